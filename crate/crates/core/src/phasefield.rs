//! Allen-Cahn update of the phase field and the Landau free-energy
//! utilities.

use crate::error::{Error, Result};
use crate::fem::{apply_dirichlet, assemble_lumped_mass, assemble_stiffness, Coefficient, ScalarField, SparseOperator};
use crate::linsolve::SparseSolver;
use crate::mesh::Mesh;
use crate::sensitivity::{solid_volume, SensitivityField};

/// Double-well potential `phi^2 (1 - phi)^2 / 4`.
pub fn double_well(phi: f64) -> f64 {
    0.25 * phi * phi * (1.0 - phi) * (1.0 - phi)
}

pub fn double_well_derivative(phi: f64) -> f64 {
    0.5 * phi * (1.0 - phi) * (1.0 - 2.0 * phi)
}

/// Interpolation `phi^3 (6 phi^2 - 15 phi + 10)`.
pub fn interpolation_g(phi: f64) -> f64 {
    phi * phi * phi * (6.0 * phi * phi - 15.0 * phi + 10.0)
}

pub fn interpolation_g_derivative(phi: f64) -> f64 {
    30.0 * phi * phi * (1.0 - phi) * (1.0 - phi)
}

/// Reaction coefficient `r` with `-d/dphi [w + eta g ghat] = phi (1 - phi) r`.
pub fn reaction_r(phi: f64, g_hat: f64, eta: f64) -> f64 {
    phi - 0.5 - 30.0 * eta * (1.0 - phi) * phi * g_hat
}

/// Discretization of the volume forcing `beta3 (V - V0)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum VolumeForcing {
    /// Implicit factor `(1 - phi)` for positive forcing and `phi` for
    /// negative forcing; keeps every step inside `[0, 1]`.
    #[default]
    Bounded,
    /// Explicit, spatially uniform source.
    Uniform,
}

impl VolumeForcing {
    pub fn name(self) -> &'static str {
        match self {
            VolumeForcing::Bounded => "bounded",
            VolumeForcing::Uniform => "uniform",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimParams {
    pub kappa: f64,
    pub tau: f64,
    pub eta: f64,
    pub beta3: f64,
    pub v0: f64,
    pub iterations: usize,
    pub substeps: usize,
    pub volume_forcing: VolumeForcing,
}

impl OptimParams {
    pub fn validate(&self, domain_area: f64) -> Result<()> {
        let check = |ok: bool, msg: String| if ok { Ok(()) } else { Err(Error::Config(msg)) };
        check(self.kappa >= 0.0 && self.kappa.is_finite(), format!("optim.kappa must be >= 0, got {}", self.kappa))?;
        check(self.tau > 0.0 && self.tau.is_finite(), format!("optim.tau must be positive, got {}", self.tau))?;
        check(self.eta >= 0.0 && self.eta.is_finite(), format!("optim.eta must be >= 0, got {}", self.eta))?;
        check(self.beta3 >= 0.0 && self.beta3.is_finite(), format!("optim.beta3 must be >= 0, got {}", self.beta3))?;
        check(
            self.v0 >= 0.0 && self.v0 <= domain_area * (1.0 + 1e-12),
            format!("optim.v0 must lie in [0, {domain_area}], got {}", self.v0),
        )?;
        check(self.substeps >= 1, "optim.substeps must be at least 1".into())
    }
}

/// Result of one Allen-Cahn step.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub phi: ScalarField,
    /// Largest distance of a pre-clamp nodal value outside `[0, 1]`.
    pub clamp: f64,
}

/// Reusable operators of the Allen-Cahn step on a fixed mesh.
#[derive(Debug)]
pub struct AllenCahn {
    stiffness: SparseOperator,
    lumped: Vec<f64>,
    /// Nodes held at `phi = 1`.
    fixed: Vec<usize>,
    solver: SparseSolver,
    /// Error if the clamp correction exceeds this value.
    pub strict_limit: Option<f64>,
}

impl AllenCahn {
    pub fn new(mesh: &Mesh, fixed_fluid: Vec<usize>) -> Result<Self> {
        Ok(AllenCahn {
            stiffness: assemble_stiffness(mesh, Coefficient::Constant(1.0))?,
            lumped: assemble_lumped_mass(mesh),
            fixed: fixed_fluid,
            solver: SparseSolver::new(),
            strict_limit: None,
        })
    }

    /// One semi-implicit step from `phi_n` with frozen normalized
    /// sensitivity.
    pub fn step(
        &self,
        mesh: &Mesh,
        phi_n: &ScalarField,
        sens: &SensitivityField,
        params: &OptimParams,
    ) -> Result<StepOutcome> {
        let n = mesh.num_nodes();
        let forcing = params.beta3 * (solid_volume(mesh, phi_n) - params.v0);
        let mut diag = vec![0.0; n];
        let mut rhs = vec![0.0; n];
        for i in 0..n {
            let m = self.lumped[i];
            let p = phi_n.values[i];
            let r = reaction_r(p, sens.normalized.values[i], params.eta);
            diag[i] = m / params.tau;
            rhs[i] = m * p / params.tau;
            if r <= 0.0 {
                diag[i] -= m * (1.0 - p) * r;
            } else {
                diag[i] += m * p * r;
                rhs[i] += m * p * r;
            }
            match params.volume_forcing {
                VolumeForcing::Uniform => rhs[i] += m * forcing,
                VolumeForcing::Bounded if forcing > 0.0 => {
                    diag[i] += m * forcing;
                    rhs[i] += m * forcing;
                }
                VolumeForcing::Bounded => diag[i] -= m * forcing,
            }
        }
        let mut op = self.stiffness.scaled(params.kappa);
        for i in 0..n {
            let pos = op.row_ptr[i] + op.col_idx[op.row_ptr[i]..op.row_ptr[i + 1]].binary_search(&i).expect("diagonal");
            op.values[pos] += diag[i];
        }
        let cons: Vec<(usize, f64)> = self.fixed.iter().map(|&i| (i, 1.0)).collect();
        let (a, b) = apply_dirichlet(&op, &rhs, &cons)?;
        let mut phi = self.solver.solve(&a, &b)?;
        let mut clamp = 0.0f64;
        for v in &mut phi {
            let c = v.clamp(0.0, 1.0);
            clamp = clamp.max((c - *v).abs());
            *v = c;
        }
        if clamp > 1e-10 {
            log::debug!("Allen-Cahn step clamped by {clamp:.3e}");
        }
        if let Some(limit) = self.strict_limit {
            if clamp > limit {
                return Err(Error::Solver(format!("Allen-Cahn step left [0, 1] by {clamp:.3e}")));
            }
        }
        Ok(StepOutcome { phi: ScalarField { values: phi }, clamp })
    }

    /// `params.substeps` steps with the same sensitivity.
    pub fn run_substeps(
        &self,
        mesh: &Mesh,
        phi_n: &ScalarField,
        sens: &SensitivityField,
        params: &OptimParams,
    ) -> Result<StepOutcome> {
        let mut out = StepOutcome { phi: phi_n.clone(), clamp: 0.0 };
        for _ in 0..params.substeps {
            let s = self.step(mesh, &out.phi, sens, params)?;
            out = StepOutcome { phi: s.phi, clamp: out.clamp.max(s.clamp) };
        }
        Ok(out)
    }
}

/// One Allen-Cahn step with freshly assembled operators.
pub fn allen_cahn_step(
    mesh: &Mesh,
    phi_n: &ScalarField,
    sens: &SensitivityField,
    params: &OptimParams,
) -> Result<ScalarField> {
    Ok(AllenCahn::new(mesh, Vec::new())?.step(mesh, phi_n, sens, params)?.phi)
}

pub fn run_substeps(mesh: &Mesh, phi_n: &ScalarField, sens: &SensitivityField, params: &OptimParams) -> Result<ScalarField> {
    Ok(AllenCahn::new(mesh, Vec::new())?.run_substeps(mesh, phi_n, sens, params)?.phi)
}

/// Parameters of the lattice model behind the Landau expansion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LandauModel {
    /// Coordination number.
    pub z: f64,
    /// Effective coupling.
    pub j: f64,
    pub kb: f64,
}

impl LandauModel {
    pub fn critical_temperature(&self) -> f64 {
        critical_temperature(self.z, self.j, self.kb)
    }
}

pub fn critical_temperature(z: f64, j: f64, kb: f64) -> f64 {
    z * j / kb
}

/// Quadratic coefficient `z kB T / 2 - z^2 J / 2`.
pub fn landau_a(t: f64, m: &LandauModel) -> f64 {
    0.5 * m.z * (m.kb * t - m.z * m.j)
}

/// Quartic coefficient `z^4 J^2 / (12 kB T)`.
pub fn landau_b(t: f64, m: &LandauModel) -> f64 {
    m.z.powi(4) * m.j * m.j / (12.0 * m.kb * t)
}

/// Local mean-field free-energy density with external field `h`.
pub fn landau_density(phi: f64, t: f64, h: f64, m: &LandauModel) -> Result<f64> {
    if !(t > 0.0) || !(m.kb > 0.0) || !(m.j > 0.0) || !(m.z >= 1.0) {
        return Err(Error::Domain(format!("invalid Landau parameters T = {t}, {m:?}")));
    }
    let kt = m.kb * t;
    let x = m.z * (m.j / kt).sqrt() * phi + h / kt;
    // ln(2 cosh x) without overflow
    let lncosh2 = x.abs() + (-2.0 * x.abs()).exp().ln_1p();
    Ok(0.5 * m.z * kt * phi * phi - kt * lncosh2)
}

/// Quartic truncation `A phi^2 + B phi^4` (constant dropped).
pub fn landau_quartic(phi: f64, t: f64, m: &LandauModel) -> f64 {
    landau_a(t, m) * phi * phi + landau_b(t, m) * phi.powi(4)
}

/// Golden-section search for a minimum of `f` on `[a, b]`.
pub fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Local minima of `f` on `[lo, hi]`: bracketed on a uniform grid of
/// `samples` intervals, refined by golden-section search.
pub fn local_minima(f: impl Fn(f64) -> f64, lo: f64, hi: f64, samples: usize, tol: f64) -> Vec<f64> {
    let h = (hi - lo) / samples as f64;
    let xs: Vec<f64> = (0..=samples).map(|i| lo + i as f64 * h).collect();
    let fs: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
    let mut out = Vec::new();
    for i in 1..samples {
        if fs[i] < fs[i - 1] && fs[i] <= fs[i + 1] {
            out.push(golden_section(&f, xs[i - 1], xs[i + 1], tol));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn double_well_values() {
        assert_eq!(double_well(0.0), 0.0);
        assert_eq!(double_well(1.0), 0.0);
        assert_eq!(double_well(0.5), 1.0 / 64.0);
        let h = 1e-5;
        let fd = (double_well(0.3 + h) - double_well(0.3 - h)) / (2.0 * h);
        assert!((fd - double_well_derivative(0.3)).abs() < 1e-8);
    }

    #[test]
    fn reaction_values() {
        assert_eq!(reaction_r(0.5, 0.0, 75.0), 0.0);
        assert_eq!(reaction_r(0.0, 3.0, 2.0), -0.5);
        assert_eq!(reaction_r(1.0, -3.0, 2.0), 0.5);
        assert_eq!(reaction_r(0.5, 1.0, 2.0), -15.0);
    }

    #[test]
    fn landau_closed_forms() {
        let m = LandauModel { z: 4.0, j: 1.0, kb: 1.0 };
        assert_eq!(m.critical_temperature(), 4.0);
        assert_eq!(landau_a(m.critical_temperature(), &m), 0.0);
        assert!(landau_density(0.1, 0.0, 0.0, &m).is_err());
    }

    #[test]
    fn golden_section_parabola() {
        let x = golden_section(|x| (x - 0.3) * (x - 0.3), -1.0, 1.0, 1e-12);
        assert!((x - 0.3).abs() < 1e-9);
    }
}
