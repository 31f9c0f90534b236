//! Forward solvers: Poisson-Boltzmann, Navier-Stokes-Brinkman and
//! convection-diffusion.

use std::cell::RefCell;

use crate::error::{Error, Result};
use crate::expr::{Expr, Vars};
use crate::fem::mini::{self, condense, element_system, kept_dofs, NsElementData, LOCAL};
use crate::fem::{
    apply_dirichlet, p1_pattern, velocity_at, NsCoefficients, P1Element, Pattern, QuadratureRule, ScalarField,
    SparseOperator, VectorField,
};
use crate::linsolve::{inf_norm, newton_solve, NewtonSettings, NonlinearProblem, SolveReport, SparseSolver};
use crate::mesh::{dirichlet_owner, BoundaryTag, Mesh};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicsParams {
    pub re: f64,
    pub pe: f64,
    pub alpha0: f64,
    pub eps0: f64,
    pub eps_m: f64,
    pub rho0: f64,
    pub electrokinetics: bool,
}

impl PhysicsParams {
    pub fn validate(&self) -> Result<()> {
        let pos = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("physics.{name} must be positive and finite, got {v}")))
            }
        };
        pos("re", self.re)?;
        pos("pe", self.pe)?;
        pos("alpha0", self.alpha0)?;
        if !(self.rho0 >= 0.0) || !self.rho0.is_finite() {
            return Err(Error::Config(format!("physics.rho0 must be non-negative, got {}", self.rho0)));
        }
        if self.electrokinetics && !(self.eps_m > 0.0 && self.eps_m <= self.eps0 && self.eps0.is_finite()) {
            return Err(Error::Config(format!(
                "physics.eps_m must satisfy 0 < eps_m <= eps0, got eps_m = {}, eps0 = {}",
                self.eps_m, self.eps0
            )));
        }
        Ok(())
    }

    pub fn ns_coefficients(&self, convection: bool) -> NsCoefficients {
        NsCoefficients { inv_re: 1.0 / self.re, alpha0: self.alpha0, rho0: self.rho0, convection }
    }
}

/// Inverse permeability `alpha0 (1 - phi)`.
pub fn interp_alpha(phi: f64, alpha0: f64) -> f64 {
    alpha0 * (1.0 - phi)
}

/// Permittivity `eps0 (1 - phi) + eps_m phi`.
pub fn interp_eps(phi: f64, eps0: f64, eps_m: f64) -> f64 {
    eps0 * (1.0 - phi) + eps_m * phi
}

/// Boundary data expressions. `psi_wall` may depend on the segment label
/// `seg` of the wall edge.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryData {
    pub u0: [Expr; 2],
    pub psi_inlet: Expr,
    pub psi_wall: Expr,
    pub c0: Expr,
    pub cd: f64,
}

impl Default for BoundaryData {
    fn default() -> Self {
        BoundaryData {
            u0: [Expr::constant(0.0), Expr::constant(0.0)],
            psi_inlet: Expr::constant(0.0),
            psi_wall: Expr::constant(0.0),
            c0: Expr::constant(0.0),
            cd: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateFields {
    pub u: VectorField,
    pub p: ScalarField,
    pub psi: ScalarField,
    pub c: ScalarField,
}

impl StateFields {
    pub fn zeros(mesh: &Mesh) -> Self {
        StateFields {
            u: VectorField::zeros(mesh),
            p: ScalarField::zeros(mesh),
            psi: ScalarField::zeros(mesh),
            c: ScalarField::zeros(mesh),
        }
    }
}

const WALLS_AND_INLET: [BoundaryTag; 3] = [BoundaryTag::Inlet, BoundaryTag::WallUp, BoundaryTag::WallDown];

fn node_vars(mesh: &Mesh, node: usize, seg: i32) -> Vars {
    let p = mesh.nodes[node];
    Vars { x: p[0], y: p[1], seg: f64::from(seg) }
}

/// Segment label of a boundary node for the given tag (0 if none).
fn segment_of(mesh: &Mesh, tag: BoundaryTag) -> std::collections::HashMap<usize, i32> {
    mesh.node_segments(tag)
}

/// Dirichlet values for the potential on inlet and walls.
pub fn pb_constraints(mesh: &Mesh, bdata: &BoundaryData) -> Result<Vec<(usize, f64)>> {
    let segs_up = segment_of(mesh, BoundaryTag::WallUp);
    let segs_down = segment_of(mesh, BoundaryTag::WallDown);
    let segs_in = segment_of(mesh, BoundaryTag::Inlet);
    dirichlet_owner(mesh, &WALLS_AND_INLET)
        .into_iter()
        .map(|(n, tag)| {
            let v = match tag {
                BoundaryTag::Inlet => bdata.psi_inlet.eval_checked(node_vars(mesh, n, segs_in[&n]))?,
                BoundaryTag::WallUp => bdata.psi_wall.eval_checked(node_vars(mesh, n, segs_up[&n]))?,
                _ => bdata.psi_wall.eval_checked(node_vars(mesh, n, segs_down[&n]))?,
            };
            Ok((n, v))
        })
        .collect()
}

/// Dirichlet values for the velocity: `u0` on the inlet, zero on walls.
/// Returned as `(dof, value)` with dof `2 i + k`.
pub fn velocity_constraints(mesh: &Mesh, bdata: &BoundaryData) -> Result<Vec<(usize, f64)>> {
    let segs_in = segment_of(mesh, BoundaryTag::Inlet);
    let mut out = Vec::new();
    for (n, tag) in dirichlet_owner(mesh, &WALLS_AND_INLET) {
        for k in 0..2 {
            let v = if tag == BoundaryTag::Inlet {
                bdata.u0[k].eval_checked(node_vars(mesh, n, segs_in[&n])).map_err(|e| {
                    Error::Domain(format!("inlet velocity at node {n}: {e}"))
                })?
            } else {
                0.0
            };
            out.push((2 * n + k, v));
        }
    }
    Ok(out)
}

/// Dirichlet values for the concentration on the inlet.
pub fn concentration_constraints(mesh: &Mesh, bdata: &BoundaryData) -> Result<Vec<(usize, f64)>> {
    let segs_in = segment_of(mesh, BoundaryTag::Inlet);
    mesh.boundary_nodes(BoundaryTag::Inlet)
        .into_iter()
        .map(|n| Ok((n, bdata.c0.eval_checked(node_vars(mesh, n, segs_in[&n]))?)))
        .collect()
}

fn charge_terms(psi: f64) -> Result<(f64, f64)> {
    if !(psi.abs() <= 30.0) {
        return Err(Error::Solver(format!("electric potential {psi} outside the exponential guard")));
    }
    let (em, ep) = ((-psi).exp(), psi.exp());
    Ok((em - ep, em + ep))
}

struct PbProblem<'a> {
    mesh: &'a Mesh,
    phi: &'a [f64],
    params: PhysicsParams,
    constraints: Vec<(usize, f64)>,
    pattern: Pattern,
    quad: QuadratureRule,
    solver: SparseSolver,
}

impl PbProblem<'_> {
    fn assemble(&self, x: &[f64], with_jac: bool) -> Result<(Vec<f64>, Option<SparseOperator>)> {
        let mesh = self.mesh;
        let mut r = vec![0.0; mesh.num_nodes()];
        let mut values = if with_jac { self.pattern.zeros() } else { Vec::new() };
        let mut local = [0.0; 9];
        for t in 0..mesh.num_triangles() {
            let el = P1Element::new(mesh, t);
            let psi = el.gather(x);
            let phi = el.gather(self.phi);
            let gpsi = el.gradient(psi);
            local.iter_mut().for_each(|v| *v = 0.0);
            for (l, w0) in self.quad.points.iter().zip(&self.quad.weights) {
                let w = w0 * 2.0 * el.area;
                let eps = interp_eps(P1Element::interpolate(phi, l), self.params.eps0, self.params.eps_m);
                let (diff, sum) = charge_terms(P1Element::interpolate(psi, l))?;
                for a in 0..3 {
                    let ga = el.grads[a];
                    r[el.nodes[a]] +=
                        w * (eps * (gpsi[0] * ga[0] + gpsi[1] * ga[1]) - self.params.rho0 * diff * l[a]);
                    if with_jac {
                        for b in 0..3 {
                            let gb = el.grads[b];
                            local[3 * a + b] +=
                                w * (eps * (ga[0] * gb[0] + ga[1] * gb[1]) + self.params.rho0 * sum * l[a] * l[b]);
                        }
                    }
                }
            }
            if with_jac {
                self.pattern.add_element(&mut values, t, &local);
            }
        }
        for &(i, g) in &self.constraints {
            r[i] = x[i] - g;
        }
        let jac = with_jac.then(|| self.pattern.into_operator(values, true));
        Ok((r, jac))
    }
}

impl NonlinearProblem for PbProblem<'_> {
    fn residual(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.assemble(x, false)?.0)
    }

    fn newton_direction(&self, x: &[f64], r: &[f64]) -> Result<Vec<f64>> {
        let (_, jac) = self.assemble(x, true)?;
        let neg: Vec<f64> = r.iter().map(|v| -v).collect();
        let cons: Vec<(usize, f64)> = self.constraints.iter().map(|&(i, _)| (i, -r[i])).collect();
        let (a, b) = apply_dirichlet(&jac.expect("jacobian"), &neg, &cons)?;
        self.solver.solve(&a, &b)
    }
}

/// Poisson-Boltzmann potential for the phase field `phi`.
pub fn solve_pb(
    mesh: &Mesh,
    phi: &ScalarField,
    bdata: &BoundaryData,
    params: &PhysicsParams,
    settings: &NewtonSettings,
    psi_init: &ScalarField,
) -> Result<(ScalarField, SolveReport)> {
    if !params.electrokinetics {
        return Err(Error::Config("Poisson-Boltzmann solve requested with electrokinetics disabled".into()));
    }
    let constraints = pb_constraints(mesh, bdata)?;
    let mut x0 = psi_init.values.clone();
    for &(i, g) in &constraints {
        x0[i] = g;
    }
    let problem = PbProblem {
        mesh,
        phi: &phi.values,
        params: *params,
        constraints,
        pattern: p1_pattern(mesh),
        quad: QuadratureRule::degree4(),
        solver: SparseSolver::new(),
    };
    let (x, report) = newton_solve(&problem, x0, settings)?;
    if !report.converged {
        return Err(Error::NonConvergence { reason: "Poisson-Boltzmann Newton hit the iteration limit".into(), report });
    }
    Ok((ScalarField { values: x }, report))
}

/// Layout of the full Navier-Stokes unknown vector: nodal velocity
/// (interleaved), nodal pressure, then bubble coefficients.
#[derive(Debug, Clone, Copy)]
pub struct NsLayout {
    pub nodes: usize,
    pub triangles: usize,
}

impl NsLayout {
    pub fn new(mesh: &Mesh) -> Self {
        NsLayout { nodes: mesh.num_nodes(), triangles: mesh.num_triangles() }
    }

    pub fn condensed(&self) -> usize {
        3 * self.nodes
    }

    pub fn len(&self) -> usize {
        3 * self.nodes + 2 * self.triangles
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn pack(&self, u: &VectorField, p: &ScalarField) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.len());
        x.extend_from_slice(&u.nodal);
        x.extend_from_slice(&p.values);
        x.extend_from_slice(&u.bubble);
        x
    }

    pub fn unpack(&self, x: &[f64]) -> (VectorField, ScalarField) {
        let n2 = 2 * self.nodes;
        let n3 = 3 * self.nodes;
        (
            VectorField { nodal: x[..n2].to_vec(), bubble: x[n3..].to_vec() },
            ScalarField { values: x[n2..n3].to_vec() },
        )
    }
}

/// Pressure pin used when the domain has no outlet.
fn pressure_pin(mesh: &Mesh) -> Option<(usize, f64)> {
    if mesh.edges_with_tag(BoundaryTag::Outlet).next().is_none() {
        Some((2 * mesh.num_nodes(), 0.0))
    } else {
        None
    }
}

/// All Dirichlet constraints of the condensed Navier-Stokes system.
pub fn ns_constraints(mesh: &Mesh, bdata: &BoundaryData) -> Result<Vec<(usize, f64)>> {
    let mut c = velocity_constraints(mesh, bdata)?;
    c.extend(pressure_pin(mesh));
    Ok(c)
}

/// Homogeneous counterparts of [`ns_constraints`].
pub fn ns_homogeneous_dofs(mesh: &Mesh) -> Vec<usize> {
    let mut dofs: Vec<usize> = dirichlet_owner(mesh, &WALLS_AND_INLET)
        .into_iter()
        .flat_map(|(n, _)| [2 * n, 2 * n + 1])
        .collect();
    dofs.extend(pressure_pin(mesh).map(|(d, _)| d));
    dofs
}

pub(crate) struct NsProblem<'a> {
    pub mesh: &'a Mesh,
    pub phi: &'a [f64],
    pub psi: Option<&'a [f64]>,
    pub coef: NsCoefficients,
    pub constraints: Vec<(usize, f64)>,
    pub layout: NsLayout,
    pub pattern: Pattern,
    pub quad: QuadratureRule,
    pub solver: SparseSolver,
    pub workspace: RefCell<Vec<mini::Condensed>>,
}

impl<'a> NsProblem<'a> {
    pub fn new(
        mesh: &'a Mesh,
        phi: &'a [f64],
        psi: Option<&'a [f64]>,
        coef: NsCoefficients,
        constraints: Vec<(usize, f64)>,
    ) -> Self {
        NsProblem {
            mesh,
            phi,
            psi,
            coef,
            constraints,
            layout: NsLayout::new(mesh),
            pattern: mini::ns_pattern(mesh),
            quad: QuadratureRule::degree4(),
            solver: SparseSolver::new(),
            workspace: RefCell::new(Vec::new()),
        }
    }

    fn element_data<'b>(&self, t: usize, u: &'b VectorField, p: &'b ScalarField) -> NsElementData<'b>
    where
        'a: 'b,
    {
        NsElementData { el: P1Element::new(self.mesh, t), t, u, p: &p.values, phi: self.phi, psi: self.psi }
    }

    /// Residual with constrained rows replaced by `x - g`.
    pub fn full_residual(&self, x: &[f64]) -> Result<Vec<f64>> {
        let (u, p) = self.layout.unpack(x);
        let n3 = self.layout.condensed();
        let mut r = vec![0.0; self.layout.len()];
        for t in 0..self.mesh.num_triangles() {
            let d = self.element_data(t, &u, &p);
            let rl = element_system(&d, &self.coef, &self.quad, None)?;
            let dofs = kept_dofs(self.mesh, t);
            for (kk, &loc) in mini::KEPT.iter().enumerate() {
                r[dofs[kk]] += rl[loc];
            }
            r[n3 + 2 * t] = rl[mini::BUBBLE[0]];
            r[n3 + 2 * t + 1] = rl[mini::BUBBLE[1]];
        }
        for &(i, g) in &self.constraints {
            r[i] = x[i] - g;
        }
        Ok(r)
    }
}

impl NonlinearProblem for NsProblem<'_> {
    fn residual(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.full_residual(x)
    }

    fn newton_direction(&self, x: &[f64], r: &[f64]) -> Result<Vec<f64>> {
        let (u, p) = self.layout.unpack(x);
        let n3 = self.layout.condensed();
        let mut values = self.pattern.zeros();
        let mut rhs = vec![0.0; n3];
        let mut jac = [[0.0; LOCAL]; LOCAL];
        let mut ws = self.workspace.borrow_mut();
        ws.clear();
        for t in 0..self.mesh.num_triangles() {
            let d = self.element_data(t, &u, &p);
            let rl = element_system(&d, &self.coef, &self.quad, Some(&mut jac))?;
            let neg: [f64; LOCAL] = std::array::from_fn(|i| -rl[i]);
            let c = condense(&jac, &neg)?;
            self.pattern.add_element(&mut values, t, &c.s);
            let dofs = kept_dofs(self.mesh, t);
            for kk in 0..9 {
                rhs[dofs[kk]] += c.f[kk];
            }
            ws.push(c);
        }
        let op = self.pattern.into_operator(values, false);
        let cons: Vec<(usize, f64)> = self.constraints.iter().map(|&(i, _)| (i, -r[i])).collect();
        let (a, b) = apply_dirichlet(&op, &rhs, &cons)?;
        let dk = self.solver.solve(&a, &b)?;
        let mut delta = dk;
        delta.resize(self.layout.len(), 0.0);
        for (t, c) in ws.iter().enumerate() {
            let dofs = kept_dofs(self.mesh, t);
            let xk: [f64; 9] = std::array::from_fn(|k| delta[dofs[k]]);
            let db = c.recover(&xk);
            delta[n3 + 2 * t] = db[0];
            delta[n3 + 2 * t + 1] = db[1];
        }
        Ok(delta)
    }
}

/// Velocity and pressure of the steady Navier-Stokes-Brinkman problem.
///
/// Without a warm start the iteration begins from the Stokes-Brinkman
/// solution.
pub fn solve_ns(
    mesh: &Mesh,
    phi: &ScalarField,
    psi: Option<&ScalarField>,
    bdata: &BoundaryData,
    params: &PhysicsParams,
    settings: &NewtonSettings,
    warm: Option<&StateFields>,
) -> Result<(VectorField, ScalarField, SolveReport)> {
    let constraints = ns_constraints(mesh, bdata)?;
    let layout = NsLayout::new(mesh);
    let psi_vals = psi.map(|p| p.values.as_slice());
    let mut x0 = match warm {
        Some(w) => layout.pack(&w.u, &w.p),
        None => vec![0.0; layout.len()],
    };
    for &(i, g) in &constraints {
        x0[i] = g;
    }
    if warm.is_none() {
        let stokes = NsProblem::new(mesh, &phi.values, psi_vals, params.ns_coefficients(false), constraints.clone());
        let (x, rep) = newton_solve(&stokes, x0, settings)?;
        if !rep.converged {
            return Err(Error::NonConvergence { reason: "Stokes warm start did not converge".into(), report: rep });
        }
        x0 = x;
    }
    let problem = NsProblem::new(mesh, &phi.values, psi_vals, params.ns_coefficients(true), constraints);
    let (x, report) = newton_solve(&problem, x0, settings)?;
    if !report.converged {
        return Err(Error::NonConvergence { reason: "Navier-Stokes Newton hit the iteration limit".into(), report });
    }
    let (u, p) = layout.unpack(&x);
    Ok((u, p, report))
}

/// Nodal weak divergence `int N_i div u` (infinity norm), the continuity
/// residual of the discrete system.
pub fn divergence_residual(mesh: &Mesh, u: &VectorField) -> f64 {
    let q = QuadratureRule::degree4();
    let mut r = vec![0.0; mesh.num_nodes()];
    for t in 0..mesh.num_triangles() {
        let el = P1Element::new(mesh, t);
        for (l, w0) in q.points.iter().zip(&q.weights) {
            let (_, g) = velocity_at(u, &el, t, l);
            let div = g[0][0] + g[1][1];
            for a in 0..3 {
                r[el.nodes[a]] += w0 * 2.0 * el.area * l[a] * div;
            }
        }
    }
    inf_norm(&r)
}

/// Streamline-diffusion parameter of a triangle.
pub fn supg_tau(h: f64, speed: f64, pe: f64) -> f64 {
    if speed <= 1e-14 {
        return 0.0;
    }
    let pe_e = 0.5 * speed * h * pe;
    let xi = if pe_e < 1e-3 { pe_e / 3.0 } else { 1.0 / pe_e.tanh() - 1.0 / pe_e };
    h / (2.0 * speed) * xi
}

/// Convection-diffusion operator `int (u . grad c) s + (1/Pe) grad c . grad s`
/// (rows are test functions), without boundary conditions.
pub fn assemble_cd_operator(mesh: &Mesh, u: &VectorField, pe: f64, supg: bool) -> SparseOperator {
    let pattern = p1_pattern(mesh);
    let q = QuadratureRule::degree4();
    let mut values = pattern.zeros();
    let mut local = [0.0; 9];
    for t in 0..mesh.num_triangles() {
        let el = P1Element::new(mesh, t);
        let tau = if supg {
            let (uc, _) = velocity_at(u, &el, t, &[1.0 / 3.0; 3]);
            supg_tau(mesh.diameter(t), (uc[0] * uc[0] + uc[1] * uc[1]).sqrt(), pe)
        } else {
            0.0
        };
        local.iter_mut().for_each(|v| *v = 0.0);
        for (l, w0) in q.points.iter().zip(&q.weights) {
            let w = w0 * 2.0 * el.area;
            let (uq, _) = velocity_at(u, &el, t, l);
            let conv: [f64; 3] = std::array::from_fn(|b| uq[0] * el.grads[b][0] + uq[1] * el.grads[b][1]);
            for a in 0..3 {
                for b in 0..3 {
                    let diff = el.grads[a][0] * el.grads[b][0] + el.grads[a][1] * el.grads[b][1];
                    local[3 * a + b] += w * (conv[b] * l[a] + diff / pe + tau * conv[b] * conv[a]);
                }
            }
        }
        pattern.add_element(&mut values, t, &local);
    }
    pattern.into_operator(values, false)
}

/// Concentration transported by `u` with inlet data `c0`.
pub fn solve_cd(
    mesh: &Mesh,
    u: &VectorField,
    bdata: &BoundaryData,
    params: &PhysicsParams,
    supg: bool,
) -> Result<ScalarField> {
    let constraints = concentration_constraints(mesh, bdata)?;
    if constraints.is_empty() {
        return Err(Error::Config("convection-diffusion problem has no inlet Dirichlet nodes".into()));
    }
    let op = assemble_cd_operator(mesh, u, params.pe, supg);
    let (a, b) = apply_dirichlet(&op, &vec![0.0; mesh.num_nodes()], &constraints)?;
    let c = SparseSolver::new().solve(&a, &b)?;
    Ok(ScalarField { values: c })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpolations() {
        assert_eq!(interp_alpha(1.0, 100.0), 0.0);
        assert_eq!(interp_alpha(0.0, 800.0), 800.0);
        assert_eq!(interp_alpha(0.5, 100.0), 50.0);
        assert_eq!(interp_eps(0.0, 3.6, 0.01), 3.6);
        assert_eq!(interp_eps(1.0, 3.6, 0.01), 0.01);
        assert!((interp_eps(0.5, 3.6, 0.01) - 1.805).abs() < 1e-15);
    }

    #[test]
    fn supg_tau_limits() {
        assert_eq!(supg_tau(0.1, 0.0, 300.0), 0.0);
        // large element Peclet: tau -> h / (2 |u|)
        assert!((supg_tau(0.1, 1.0, 1e8) - 0.05).abs() < 1e-7);
        let small = supg_tau(0.01, 1e-3, 1.0);
        let pe_e = 0.5 * 1e-3 * 0.01;
        assert!((small - 0.01 / 2e-3 * pe_e / 3.0).abs() < 1e-15);
    }

    #[test]
    fn params_validation() {
        let p = PhysicsParams { re: 1.0, pe: 1.0, alpha0: 1.0, eps0: 1.0, eps_m: 2.0, rho0: 0.0, electrokinetics: true };
        assert!(p.validate().is_err());
        assert!(PhysicsParams { electrokinetics: false, ..p }.validate().is_ok());
        assert!(PhysicsParams { re: 0.0, electrokinetics: false, ..p }.validate().is_err());
    }
}
