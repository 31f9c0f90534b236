//! Adjoint solves for the coupled Poisson-Boltzmann / Navier-Stokes /
//! convection-diffusion system, in the order concentration, flow, potential.

use crate::error::{Error, Result};
use crate::fem::mini::{self, condense, kept_dofs, velocity_basis, vidx, LocalMatrix, LOCAL};
use crate::fem::{
    apply_dirichlet, boundary_load, p1_pattern, velocity_at, P1Element, QuadratureRule, ScalarField, SparseOperator,
    VectorField,
};
use crate::linsolve::{inf_norm, SparseSolver};
use crate::mesh::{BoundaryTag, Mesh};
use crate::state::{
    assemble_cd_operator, concentration_constraints, interp_eps, ns_homogeneous_dofs, pb_constraints, BoundaryData,
    NsLayout, PhysicsParams, StateFields,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveWeights {
    pub beta1: f64,
    pub beta2: f64,
    pub beta3: f64,
}

impl ObjectiveWeights {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta1 >= 0.0 && self.beta2 >= 0.0) || (self.beta1 == 0.0 && self.beta2 == 0.0) {
            return Err(Error::Config(format!(
                "objective weights must be non-negative and not both zero, got beta1 = {}, beta2 = {}",
                self.beta1, self.beta2
            )));
        }
        if !(self.beta3 > 0.0) {
            return Err(Error::Config(format!("optim.beta3 must be positive, got {}", self.beta3)));
        }
        Ok(())
    }
}

/// Which form of the adjoint convection term is assembled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AdjointConvection {
    /// `(u . grad y) . v`: the exact transpose of the discrete linearization.
    #[default]
    Transpose,
    /// `-(u . grad v) . y`: equal to the transpose only for pointwise
    /// divergence-free `u` and no outflow boundary.
    AsPrinted,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdjointFields {
    pub v: VectorField,
    pub q: ScalarField,
    pub xi: ScalarField,
    pub s: ScalarField,
}

impl AdjointFields {
    pub fn zeros(mesh: &Mesh) -> Self {
        AdjointFields {
            v: VectorField::zeros(mesh),
            q: ScalarField::zeros(mesh),
            xi: ScalarField::zeros(mesh),
            s: ScalarField::zeros(mesh),
        }
    }
}

fn homogeneous(dofs: impl IntoIterator<Item = usize>) -> Vec<(usize, f64)> {
    dofs.into_iter().map(|d| (d, 0.0)).collect()
}

/// Right-hand side of the adjoint transport problem,
/// `beta2 int_{outlet} (c - cd) z`.
pub fn adjoint_cd_rhs(mesh: &Mesh, c: &ScalarField, cd: f64, beta2: f64) -> Vec<f64> {
    let diff: Vec<f64> = c.values.iter().map(|v| v - cd).collect();
    boundary_load(mesh, BoundaryTag::Outlet, &diff).into_iter().map(|v| beta2 * v).collect()
}

/// Transposed transport operator with homogeneous inlet conditions.
fn adjoint_cd_system(
    mesh: &Mesh,
    u: &VectorField,
    rhs: &[f64],
    params: &PhysicsParams,
    supg: bool,
) -> Result<(SparseOperator, Vec<f64>)> {
    let op = assemble_cd_operator(mesh, u, params.pe, supg).transpose();
    apply_dirichlet(&op, rhs, &homogeneous(mesh.boundary_nodes(BoundaryTag::Inlet)))
}

/// Adjoint concentration `s`.
pub fn solve_adjoint_cd(
    mesh: &Mesh,
    u: &VectorField,
    c: &ScalarField,
    cd: f64,
    beta2: f64,
    params: &PhysicsParams,
    supg: bool,
) -> Result<ScalarField> {
    if beta2 == 0.0 {
        return Ok(ScalarField::zeros(mesh));
    }
    let rhs = adjoint_cd_rhs(mesh, c, cd, beta2);
    let (a, b) = adjoint_cd_system(mesh, u, &rhs, params, supg)?;
    Ok(ScalarField { values: SparseSolver::new().solve(&a, &b)? })
}

/// Element matrix of the adjoint flow problem (rows: test functions of the
/// adjoint equations, columns: adjoint unknowns), in the local MINI order.
fn adjoint_element_matrix(
    el: &P1Element,
    t: usize,
    u: &VectorField,
    phi: [f64; 3],
    params: &PhysicsParams,
    variant: AdjointConvection,
    q: &QuadratureRule,
    m: &mut LocalMatrix,
) {
    *m = [[0.0; LOCAL]; LOCAL];
    let nu = 1.0 / params.re;
    for (l, w0) in q.points.iter().zip(&q.weights) {
        let w = w0 * 2.0 * el.area;
        let (uq, gu) = velocity_at(u, el, t, l);
        let (f, g) = velocity_basis(el, l);
        let alpha = params.alpha0 * (1.0 - P1Element::interpolate(phi, l));
        let adv: [f64; 4] = std::array::from_fn(|a| uq[0] * g[a][0] + uq[1] * g[a][1]);
        // a: test y, b: trial v
        for a in 0..4 {
            for b in 0..4 {
                let visc = nu * (g[a][0] * g[b][0] + g[a][1] * g[b][1]);
                let conv = match variant {
                    AdjointConvection::Transpose => adv[a] * f[b],
                    AdjointConvection::AsPrinted => -adv[b] * f[a],
                };
                let diag = visc + conv + alpha * f[a] * f[b];
                for k in 0..2 {
                    m[vidx(a, k)][vidx(b, k)] += w * diag;
                    // (y . grad u) . v with y = f_a e_k, v = f_b e_m
                    for mm in 0..2 {
                        m[vidx(a, k)][vidx(b, mm)] += w * f[a] * gu[mm][k] * f[b];
                    }
                }
            }
            for c in 0..3 {
                for k in 0..2 {
                    let v = w * l[c] * g[a][k];
                    m[vidx(a, k)][8 + c] -= v;
                    m[8 + c][vidx(a, k)] -= v;
                }
            }
        }
    }
}

/// Element right-hand side of the adjoint flow problem:
/// `beta1 (int nu grad u : grad y + alpha u . y) - int (y . grad c) s`.
fn adjoint_element_rhs(
    el: &P1Element,
    t: usize,
    u: &VectorField,
    phi: [f64; 3],
    c: [f64; 3],
    s: [f64; 3],
    beta1: f64,
    params: &PhysicsParams,
    q: &QuadratureRule,
) -> [f64; LOCAL] {
    let mut r = [0.0; LOCAL];
    let nu = 1.0 / params.re;
    let gc = el.gradient(c);
    for (l, w0) in q.points.iter().zip(&q.weights) {
        let w = w0 * 2.0 * el.area;
        let (uq, gu) = velocity_at(u, el, t, l);
        let (f, g) = velocity_basis(el, l);
        let alpha = params.alpha0 * (1.0 - P1Element::interpolate(phi, l));
        let sq = P1Element::interpolate(s, l);
        for a in 0..4 {
            for k in 0..2 {
                let dj = nu * (gu[k][0] * g[a][0] + gu[k][1] * g[a][1]) + alpha * uq[k] * f[a];
                r[vidx(a, k)] += w * (beta1 * dj - f[a] * gc[k] * sq);
            }
        }
    }
    r
}

/// Condensed adjoint flow operator without boundary conditions.
pub fn assemble_adjoint_ns_operator(
    mesh: &Mesh,
    u: &VectorField,
    phi: &ScalarField,
    params: &PhysicsParams,
    variant: AdjointConvection,
) -> Result<SparseOperator> {
    let pattern = mini::ns_pattern(mesh);
    let q = QuadratureRule::degree4();
    let mut values = pattern.zeros();
    let mut m = [[0.0; LOCAL]; LOCAL];
    for t in 0..mesh.num_triangles() {
        let el = P1Element::new(mesh, t);
        adjoint_element_matrix(&el, t, u, el.gather(&phi.values), params, variant, &q, &mut m);
        let cnd = condense(&m, &[0.0; LOCAL])?;
        pattern.add_element(&mut values, t, &cnd.s);
    }
    Ok(pattern.into_operator(values, false))
}

/// Adjoint velocity and pressure.
#[allow(clippy::too_many_arguments)]
pub fn solve_adjoint_ns(
    mesh: &Mesh,
    u: &VectorField,
    c: &ScalarField,
    s: &ScalarField,
    phi: &ScalarField,
    weights: &ObjectiveWeights,
    params: &PhysicsParams,
    variant: AdjointConvection,
) -> Result<(VectorField, ScalarField)> {
    let layout = NsLayout::new(mesh);
    if weights.beta1 == 0.0 && s.values.iter().all(|&v| v == 0.0) {
        return Ok((VectorField::zeros(mesh), ScalarField::zeros(mesh)));
    }
    let pattern = mini::ns_pattern(mesh);
    let q = QuadratureRule::degree4();
    let n3 = layout.condensed();
    let mut values = pattern.zeros();
    let mut rhs = vec![0.0; n3];
    let mut m = [[0.0; LOCAL]; LOCAL];
    let mut condensed = Vec::with_capacity(mesh.num_triangles());
    for t in 0..mesh.num_triangles() {
        let el = P1Element::new(mesh, t);
        let phil = el.gather(&phi.values);
        adjoint_element_matrix(&el, t, u, phil, params, variant, &q, &mut m);
        let f = adjoint_element_rhs(&el, t, u, phil, el.gather(&c.values), el.gather(&s.values), weights.beta1, params, &q);
        let cnd = condense(&m, &f)?;
        pattern.add_element(&mut values, t, &cnd.s);
        let dofs = kept_dofs(mesh, t);
        for kk in 0..9 {
            rhs[dofs[kk]] += cnd.f[kk];
        }
        condensed.push(cnd);
    }
    let op = pattern.into_operator(values, false);
    let (a, b) = apply_dirichlet(&op, &rhs, &homogeneous(ns_homogeneous_dofs(mesh)))?;
    let mut x = SparseSolver::new().solve(&a, &b)?;
    x.resize(layout.len(), 0.0);
    for (t, cnd) in condensed.iter().enumerate() {
        let dofs = kept_dofs(mesh, t);
        let xk: [f64; 9] = std::array::from_fn(|k| x[dofs[k]]);
        let xb = cnd.recover(&xk);
        x[n3 + 2 * t] = xb[0];
        x[n3 + 2 * t + 1] = xb[1];
    }
    let (v, qf) = layout.unpack(&x);
    Ok((v, qf))
}

/// Right-hand side of the adjoint potential problem for test function `chi`:
/// `int rho0 (e^-psi + e^psi) chi grad psi . v - rho0 (e^-psi - e^psi) grad chi . v`.
fn adjoint_pb_rhs(mesh: &Mesh, psi: &ScalarField, v: &VectorField, params: &PhysicsParams) -> Result<Vec<f64>> {
    let q = QuadratureRule::degree4();
    let mut rhs = vec![0.0; mesh.num_nodes()];
    for t in 0..mesh.num_triangles() {
        let el = P1Element::new(mesh, t);
        let psil = el.gather(&psi.values);
        let gpsi = el.gradient(psil);
        for (l, w0) in q.points.iter().zip(&q.weights) {
            let w = w0 * 2.0 * el.area;
            let ps = P1Element::interpolate(psil, l);
            let diff = mini::charge_factor(ps)?;
            let sum = (-ps).exp() + ps.exp();
            let (vq, _) = velocity_at(v, &el, t, l);
            let gv = gpsi[0] * vq[0] + gpsi[1] * vq[1];
            for a in 0..3 {
                let ga = el.grads[a][0] * vq[0] + el.grads[a][1] * vq[1];
                rhs[el.nodes[a]] += w * params.rho0 * (sum * l[a] * gv - diff * ga);
            }
        }
    }
    Ok(rhs)
}

/// Linearized Poisson-Boltzmann operator at `psi` (symmetric).
fn pb_operator(mesh: &Mesh, psi: &ScalarField, phi: &ScalarField, params: &PhysicsParams) -> Result<SparseOperator> {
    let pattern = p1_pattern(mesh);
    let q = QuadratureRule::degree4();
    let mut values = pattern.zeros();
    let mut local = [0.0; 9];
    for t in 0..mesh.num_triangles() {
        let el = P1Element::new(mesh, t);
        let psil = el.gather(&psi.values);
        let phil = el.gather(&phi.values);
        local.iter_mut().for_each(|x| *x = 0.0);
        for (l, w0) in q.points.iter().zip(&q.weights) {
            let w = w0 * 2.0 * el.area;
            let eps = interp_eps(P1Element::interpolate(phil, l), params.eps0, params.eps_m);
            let ps = P1Element::interpolate(psil, l);
            mini::charge_factor(ps)?;
            let sum = (-ps).exp() + ps.exp();
            for a in 0..3 {
                for b in 0..3 {
                    let gg = el.grads[a][0] * el.grads[b][0] + el.grads[a][1] * el.grads[b][1];
                    local[3 * a + b] += w * (eps * gg + params.rho0 * sum * l[a] * l[b]);
                }
            }
        }
        pattern.add_element(&mut values, t, &local);
    }
    Ok(pattern.into_operator(values, true))
}

/// Adjoint potential `xi`; zero when electrokinetics is disabled.
pub fn solve_adjoint_pb(
    mesh: &Mesh,
    psi: &ScalarField,
    v: &VectorField,
    phi: &ScalarField,
    params: &PhysicsParams,
    bdata: &BoundaryData,
) -> Result<ScalarField> {
    if !params.electrokinetics {
        return Ok(ScalarField::zeros(mesh));
    }
    let op = pb_operator(mesh, psi, phi, params)?;
    let rhs = adjoint_pb_rhs(mesh, psi, v, params)?;
    let fixed = pb_constraints(mesh, bdata)?.into_iter().map(|(n, _)| n);
    let (a, b) = apply_dirichlet(&op, &rhs, &homogeneous(fixed))?;
    Ok(ScalarField { values: SparseSolver::new().solve(&a, &b)? })
}

/// Settings of an adjoint solve.
#[derive(Debug, Clone, Copy, Default)]
pub struct AdjointOptions {
    pub convection: AdjointConvection,
    pub supg: bool,
}

/// Solves all adjoint equations in block-triangular order.
pub fn solve_adjoint(
    mesh: &Mesh,
    phi: &ScalarField,
    state: &StateFields,
    bdata: &BoundaryData,
    weights: &ObjectiveWeights,
    params: &PhysicsParams,
    opts: AdjointOptions,
) -> Result<AdjointFields> {
    let s = solve_adjoint_cd(mesh, &state.u, &state.c, bdata.cd, weights.beta2, params, opts.supg)?;
    let (v, q) = solve_adjoint_ns(mesh, &state.u, &state.c, &s, phi, weights, params, opts.convection)?;
    let xi = solve_adjoint_pb(mesh, &state.psi, &v, phi, params, bdata)?;
    Ok(AdjointFields { v, q, xi, s })
}

/// Infinity norms of the residuals of the four adjoint equations
/// (momentum including bubbles, continuity, potential, concentration) over
/// unconstrained test functions.
#[derive(Debug, Clone, Copy)]
pub struct AdjointResiduals {
    pub momentum: f64,
    pub continuity: f64,
    pub potential: f64,
    pub concentration: f64,
}

pub fn adjoint_residuals(
    mesh: &Mesh,
    phi: &ScalarField,
    state: &StateFields,
    adj: &AdjointFields,
    bdata: &BoundaryData,
    weights: &ObjectiveWeights,
    params: &PhysicsParams,
    opts: AdjointOptions,
) -> Result<AdjointResiduals> {
    let n = mesh.num_nodes();
    // concentration
    let rhs = adjoint_cd_rhs(mesh, &state.c, bdata.cd, weights.beta2);
    let op = assemble_cd_operator(mesh, &state.u, params.pe, opts.supg).transpose();
    let mut rc: Vec<f64> = op.matvec(&adj.s.values).iter().zip(&rhs).map(|(a, b)| a - b).collect();
    for (i, _) in concentration_constraints(mesh, bdata)? {
        rc[i] = 0.0;
    }

    // flow, uncondensed
    let layout = NsLayout::new(mesh);
    let n3 = layout.condensed();
    let x = layout.pack(&adj.v, &adj.q);
    let mut rf = vec![0.0; layout.len()];
    let q = QuadratureRule::degree4();
    let mut m = [[0.0; LOCAL]; LOCAL];
    for t in 0..mesh.num_triangles() {
        let el = P1Element::new(mesh, t);
        let phil = el.gather(&phi.values);
        adjoint_element_matrix(&el, t, &state.u, phil, params, opts.convection, &q, &mut m);
        let f = adjoint_element_rhs(
            &el,
            t,
            &state.u,
            phil,
            el.gather(&state.c.values),
            el.gather(&adj.s.values),
            weights.beta1,
            params,
            &q,
        );
        let kd = kept_dofs(mesh, t);
        let global = |loc: usize| -> usize {
            match loc {
                6 | 7 => n3 + 2 * t + (loc - 6),
                _ => kd[mini::KEPT.iter().position(|&k| k == loc).expect("kept index")],
            }
        };
        for row in 0..LOCAL {
            let mut acc = -f[row];
            for col in 0..LOCAL {
                acc += m[row][col] * x[global(col)];
            }
            rf[global(row)] += acc;
        }
    }
    for d in ns_homogeneous_dofs(mesh) {
        rf[d] = 0.0;
    }
    let momentum = inf_norm(&rf[..2 * n]).max(inf_norm(&rf[n3..]));
    let continuity = inf_norm(&rf[2 * n..n3]);

    // potential
    let potential = if params.electrokinetics {
        let op = pb_operator(mesh, &state.psi, phi, params)?;
        let rhs = adjoint_pb_rhs(mesh, &state.psi, &adj.v, params)?;
        let mut r: Vec<f64> = op.matvec(&adj.xi.values).iter().zip(&rhs).map(|(a, b)| a - b).collect();
        for (i, _) in pb_constraints(mesh, bdata)? {
            r[i] = 0.0;
        }
        inf_norm(&r)
    } else {
        inf_norm(&adj.xi.values)
    };
    Ok(AdjointResiduals { momentum, continuity, potential, concentration: inf_norm(&rc) })
}
