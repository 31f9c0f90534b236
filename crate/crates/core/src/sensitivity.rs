//! Objectives, their derivative with respect to the phase field, and the
//! reporting free energy.

use crate::adjoint::{AdjointFields, ObjectiveWeights};
use crate::error::{Error, Result};
use crate::fem::{assemble_lumped_mass, assemble_mass, velocity_at, P1Element, QuadratureRule, ScalarField};
use crate::linsolve::SparseSolver;
use crate::mesh::{BoundaryTag, Mesh};
use crate::phasefield::{double_well, interpolation_g};
use crate::state::{interp_alpha, BoundaryData, PhysicsParams, StateFields};

/// Below this discrete L2 norm the normalized sensitivity is set to zero.
pub const NORM_GUARD: f64 = 1e-14;

/// Form of the dissipation term in the sensitivity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SensitivityVariant {
    /// `(beta1/2) int alpha' theta |u|^2`, the derivative of the objective.
    #[default]
    Consistent,
    /// Same term multiplied by `1/Re`.
    AsPrinted,
}

/// How the load vector is mapped to a nodal field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Projection {
    #[default]
    ConsistentMass,
    LumpedMass,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityField {
    pub raw: ScalarField,
    pub normalized: ScalarField,
    pub norm_value: f64,
    /// The assembled linear functional `<dJ, N_i>`.
    pub load: Vec<f64>,
}

impl SensitivityField {
    pub fn zeros(mesh: &Mesh) -> Self {
        SensitivityField {
            raw: ScalarField::zeros(mesh),
            normalized: ScalarField::zeros(mesh),
            norm_value: 0.0,
            load: vec![0.0; mesh.num_nodes()],
        }
    }
}

/// Load vector `<beta1 J1' + beta2 J2', N_i>`.
pub fn sensitivity_load(
    mesh: &Mesh,
    state: &StateFields,
    adj: &AdjointFields,
    weights: &ObjectiveWeights,
    params: &PhysicsParams,
    variant: SensitivityVariant,
) -> Result<Vec<f64>> {
    let n = mesh.num_nodes();
    if params.electrokinetics && (adj.xi.len() != n || state.psi.len() != n) {
        return Err(Error::Solver("adjoint potential missing for an electrokinetic sensitivity".into()));
    }
    let q = QuadratureRule::degree4();
    let dalpha = -params.alpha0;
    let deps = params.eps_m - params.eps0;
    let c1 = match variant {
        SensitivityVariant::Consistent => 0.5 * weights.beta1,
        SensitivityVariant::AsPrinted => 0.5 * weights.beta1 / params.re,
    };
    let mut load = vec![0.0; n];
    for t in 0..mesh.num_triangles() {
        let el = P1Element::new(mesh, t);
        let electro = if params.electrokinetics {
            let gp = el.gradient(el.gather(&state.psi.values));
            let gx = el.gradient(el.gather(&adj.xi.values));
            gp[0] * gx[0] + gp[1] * gx[1]
        } else {
            0.0
        };
        for (l, w0) in q.points.iter().zip(&q.weights) {
            let w = w0 * 2.0 * el.area;
            let (u, _) = velocity_at(&state.u, &el, t, l);
            let (v, _) = velocity_at(&adj.v, &el, t, l);
            let uu = u[0] * u[0] + u[1] * u[1];
            let uv = u[0] * v[0] + u[1] * v[1];
            let density = c1 * dalpha * uu - dalpha * uv - deps * electro;
            for a in 0..3 {
                load[el.nodes[a]] += w * density * l[a];
            }
        }
    }
    Ok(load)
}

/// Discrete L2 norm `sqrt(g^T M g)` with the consistent mass matrix.
pub fn l2_norm_mass(mesh: &Mesh, g: &[f64]) -> f64 {
    let m = assemble_mass(mesh);
    let mg = m.matvec(g);
    g.iter().zip(&mg).map(|(a, b)| a * b).sum::<f64>().max(0.0).sqrt()
}

/// Scales `raw` to unit discrete L2 norm, or returns zero below the guard.
pub fn normalize(mesh: &Mesh, raw: &ScalarField) -> (ScalarField, f64) {
    let norm = l2_norm_mass(mesh, &raw.values);
    if norm < NORM_GUARD || !norm.is_finite() {
        return (ScalarField::zeros(mesh), norm);
    }
    (ScalarField { values: raw.values.iter().map(|v| v / norm).collect() }, norm)
}

/// Riesz representative of the load and its normalization.
pub fn assemble_sensitivity(
    mesh: &Mesh,
    state: &StateFields,
    adj: &AdjointFields,
    weights: &ObjectiveWeights,
    params: &PhysicsParams,
    variant: SensitivityVariant,
    projection: Projection,
) -> Result<SensitivityField> {
    let load = sensitivity_load(mesh, state, adj, weights, params, variant)?;
    let raw = match projection {
        Projection::ConsistentMass => SparseSolver::new().solve(&assemble_mass(mesh), &load)?,
        Projection::LumpedMass => {
            assemble_lumped_mass(mesh).iter().zip(&load).map(|(m, l)| l / m).collect()
        }
    };
    let raw = ScalarField { values: raw };
    let (normalized, norm_value) = normalize(mesh, &raw);
    Ok(SensitivityField { raw, normalized, norm_value, load })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Objectives {
    pub j1: f64,
    pub j2: f64,
    pub volume: f64,
}

impl Objectives {
    pub fn weighted(&self, w: &ObjectiveWeights) -> f64 {
        w.beta1 * self.j1 + w.beta2 * self.j2
    }
}

/// Dissipation, outlet mixing error and solid volume.
pub fn eval_objectives(
    mesh: &Mesh,
    phi: &ScalarField,
    state: &StateFields,
    bdata: &BoundaryData,
    params: &PhysicsParams,
) -> Objectives {
    let q = QuadratureRule::degree4();
    let nu = 1.0 / params.re;
    let mut j1 = 0.0;
    for t in 0..mesh.num_triangles() {
        let el = P1Element::new(mesh, t);
        let phil = el.gather(&phi.values);
        for (l, w0) in q.points.iter().zip(&q.weights) {
            let w = w0 * 2.0 * el.area;
            let (u, g) = velocity_at(&state.u, &el, t, l);
            let alpha = interp_alpha(P1Element::interpolate(phil, l), params.alpha0);
            let gg = g[0][0] * g[0][0] + g[0][1] * g[0][1] + g[1][0] * g[1][0] + g[1][1] * g[1][1];
            j1 += w * (0.5 * nu * gg + 0.5 * alpha * (u[0] * u[0] + u[1] * u[1]));
        }
    }
    let mut j2 = 0.0;
    for e in mesh.edges_with_tag(BoundaryTag::Outlet) {
        let [a, b] = e.nodes;
        let (p, r) = (mesh.nodes[a], mesh.nodes[b]);
        let len = ((p[0] - r[0]).powi(2) + (p[1] - r[1]).powi(2)).sqrt();
        let (da, db) = (state.c.values[a] - bdata.cd, state.c.values[b] - bdata.cd);
        j2 += 0.5 * len / 3.0 * (da * da + da * db + db * db);
    }
    Objectives { j1, j2, volume: solid_volume(mesh, phi) }
}

/// `int (1 - phi)`.
pub fn solid_volume(mesh: &Mesh, phi: &ScalarField) -> f64 {
    let mut v = 0.0;
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let mean = (phi.values[tri[0]] + phi.values[tri[1]] + phi.values[tri[2]]) / 3.0;
        v += mesh.signed_area(t) * (1.0 - mean);
    }
    v
}

/// Ginzburg-Landau energy `int kappa/2 |grad phi|^2 + w(phi)`.
pub fn gl_energy(mesh: &Mesh, phi: &ScalarField, kappa: f64) -> f64 {
    let q = QuadratureRule::degree4();
    let mut f = 0.0;
    for t in 0..mesh.num_triangles() {
        let el = P1Element::new(mesh, t);
        let phil = el.gather(&phi.values);
        let g = el.gradient(phil);
        let mut local = 0.5 * kappa * (g[0] * g[0] + g[1] * g[1]) * el.area;
        for (l, w0) in q.points.iter().zip(&q.weights) {
            local += w0 * 2.0 * el.area * double_well(P1Element::interpolate(phil, l));
        }
        f += local;
    }
    f
}

/// Free energy reported in the history: interface energy, the
/// sensitivity-weighted interpolation term and the volume penalty.
pub fn eval_free_energy(
    mesh: &Mesh,
    phi: &ScalarField,
    sens: &SensitivityField,
    weights: &ObjectiveWeights,
    kappa: f64,
    eta: f64,
    v0: f64,
) -> f64 {
    let q = QuadratureRule::degree4();
    let mut field = 0.0;
    for t in 0..mesh.num_triangles() {
        let el = P1Element::new(mesh, t);
        let phil = el.gather(&phi.values);
        let gl = el.gather(&sens.normalized.values);
        for (l, w0) in q.points.iter().zip(&q.weights) {
            let p = P1Element::interpolate(phil, l);
            field += w0 * 2.0 * el.area * eta * interpolation_g(p) * P1Element::interpolate(gl, l);
        }
    }
    let dv = solid_volume(mesh, phi) - v0;
    gl_energy(mesh, phi, kappa) + field + 0.5 * weights.beta3 * dv * dv
}
