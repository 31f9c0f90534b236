//! MINI element (P1-bubble velocity, P1 pressure) for the Brinkman-penalized
//! Navier-Stokes equations, with element-wise static condensation of the
//! bubble unknowns.
//!
//! Local ordering on a triangle (11 unknowns): nodal velocity interleaved
//! `2a + k` for vertex `a` and component `k`, then the two bubble
//! coefficients (6, 7), then the three vertex pressures (8..11).

use super::{bubble, P1Element, Pattern, QuadratureRule, SparseOperator, VectorField};
use crate::error::{Error, Result};
use crate::mesh::Mesh;

pub const LOCAL: usize = 11;
pub const KEPT: [usize; 9] = [0, 1, 2, 3, 4, 5, 8, 9, 10];
pub const BUBBLE: [usize; 2] = [6, 7];

pub type LocalMatrix = [[f64; LOCAL]; LOCAL];
pub type LocalVector = [f64; LOCAL];

/// Coefficients of the momentum and continuity equations.
#[derive(Debug, Clone, Copy)]
pub struct NsCoefficients {
    pub inv_re: f64,
    pub alpha0: f64,
    pub rho0: f64,
    /// Drop the convective term (Stokes-Brinkman problem).
    pub convection: bool,
}

/// Local index of velocity basis function `a` (3 = bubble), component `k`.
#[inline]
pub fn vidx(a: usize, k: usize) -> usize {
    if a < 3 {
        2 * a + k
    } else {
        6 + k
    }
}

/// Values and gradients of the four scalar velocity basis functions.
#[inline]
pub fn velocity_basis(el: &P1Element, l: &[f64; 3]) -> ([f64; 4], [[f64; 2]; 4]) {
    let (b, gb) = bubble(el, l);
    ([l[0], l[1], l[2], b], [el.grads[0], el.grads[1], el.grads[2], gb])
}

/// Guarded charge density factor `e^{-psi} - e^{psi}`.
pub fn charge_factor(psi: f64) -> Result<f64> {
    if !(psi.abs() <= 30.0) {
        return Err(Error::Solver(format!("electric potential {psi} outside the exponential guard")));
    }
    Ok((-psi).exp() - psi.exp())
}

/// Gathered element data for the Navier-Stokes kernel.
pub struct NsElementData<'a> {
    pub el: P1Element,
    pub t: usize,
    pub u: &'a VectorField,
    pub p: &'a [f64],
    pub phi: &'a [f64],
    pub psi: Option<&'a [f64]>,
}

/// Element residual and, optionally, its Jacobian with respect to the local
/// unknowns.
pub fn element_system(
    d: &NsElementData,
    coef: &NsCoefficients,
    q: &QuadratureRule,
    jac: Option<&mut LocalMatrix>,
) -> Result<LocalVector> {
    let el = &d.el;
    let mut uloc = [[0.0; 2]; 4];
    for a in 0..3 {
        uloc[a] = [d.u.nodal[2 * el.nodes[a]], d.u.nodal[2 * el.nodes[a] + 1]];
    }
    uloc[3] = [d.u.bubble[2 * d.t], d.u.bubble[2 * d.t + 1]];
    let ploc = el.gather(d.p);
    let philoc = el.gather(d.phi);
    let (psiloc, grad_psi) = match d.psi {
        Some(psi) => {
            let v = el.gather(psi);
            (Some(v), el.gradient(v))
        }
        None => (None, [0.0; 2]),
    };

    let mut r = [0.0; LOCAL];
    let mut jm = jac;
    if let Some(j) = jm.as_deref_mut() {
        *j = [[0.0; LOCAL]; LOCAL];
    }
    for (l, w0) in q.points.iter().zip(&q.weights) {
        let w = w0 * 2.0 * el.area;
        let (phi_b, g_b) = velocity_basis(el, l);
        let mut u = [0.0; 2];
        let mut gu = [[0.0; 2]; 2];
        for a in 0..4 {
            for k in 0..2 {
                u[k] += uloc[a][k] * phi_b[a];
                gu[k][0] += uloc[a][k] * g_b[a][0];
                gu[k][1] += uloc[a][k] * g_b[a][1];
            }
        }
        let p = P1Element::interpolate(ploc, l);
        let phi = P1Element::interpolate(philoc, l);
        let alpha = coef.alpha0 * (1.0 - phi);
        let force = match psiloc {
            Some(v) => {
                let f = coef.rho0 * charge_factor(P1Element::interpolate(v, l))?;
                [f * grad_psi[0], f * grad_psi[1]]
            }
            None => [0.0; 2],
        };
        let div = gu[0][0] + gu[1][1];
        let conv = if coef.convection {
            [u[0] * gu[0][0] + u[1] * gu[0][1], u[0] * gu[1][0] + u[1] * gu[1][1]]
        } else {
            [0.0; 2]
        };

        for a in 0..4 {
            for k in 0..2 {
                let visc = gu[k][0] * g_b[a][0] + gu[k][1] * g_b[a][1];
                r[vidx(a, k)] += w
                    * (coef.inv_re * visc + (conv[k] + alpha * u[k] + force[k]) * phi_b[a] - p * g_b[a][k]);
            }
        }
        for a in 0..3 {
            r[8 + a] -= w * l[a] * div;
        }

        if let Some(j) = jm.as_deref_mut() {
            for a in 0..4 {
                for b in 0..4 {
                    let visc = coef.inv_re * (g_b[b][0] * g_b[a][0] + g_b[b][1] * g_b[a][1]);
                    let mut diag = visc + alpha * phi_b[b] * phi_b[a];
                    if coef.convection {
                        diag += (u[0] * g_b[b][0] + u[1] * g_b[b][1]) * phi_b[a];
                    }
                    for k in 0..2 {
                        j[vidx(a, k)][vidx(b, k)] += w * diag;
                        if coef.convection {
                            for m in 0..2 {
                                j[vidx(a, k)][vidx(b, m)] += w * phi_b[b] * gu[k][m] * phi_b[a];
                            }
                        }
                    }
                }
                for c in 0..3 {
                    for k in 0..2 {
                        let v = w * l[c] * g_b[a][k];
                        j[vidx(a, k)][8 + c] -= v;
                        j[8 + c][vidx(a, k)] -= v;
                    }
                }
            }
        }
    }
    Ok(r)
}

/// Result of eliminating the bubble unknowns from a local system
/// `M x = f`: the kept unknowns satisfy `S x_K = f_K'`, and
/// `x_B = g - G x_K`.
#[derive(Debug, Clone)]
pub struct Condensed {
    pub s: [f64; 81],
    pub f: [f64; 9],
    pub g: [f64; 2],
    pub gmat: [[f64; 9]; 2],
}

pub fn condense(m: &LocalMatrix, f: &LocalVector) -> Result<Condensed> {
    let [b0, b1] = BUBBLE;
    let (a, b, c, d) = (m[b0][b0], m[b0][b1], m[b1][b0], m[b1][b1]);
    let det = a * d - b * c;
    if !(det.abs() > 1e-300) || !det.is_finite() {
        return Err(Error::Singular { row: b0 });
    }
    let inv = [[d / det, -b / det], [-c / det, a / det]];
    let mut g = [0.0; 2];
    let mut gmat = [[0.0; 9]; 2];
    for i in 0..2 {
        g[i] = inv[i][0] * f[b0] + inv[i][1] * f[b1];
        for (kk, &col) in KEPT.iter().enumerate() {
            gmat[i][kk] = inv[i][0] * m[b0][col] + inv[i][1] * m[b1][col];
        }
    }
    let mut s = [0.0; 81];
    let mut fk = [0.0; 9];
    for (ii, &row) in KEPT.iter().enumerate() {
        fk[ii] = f[row] - m[row][b0] * g[0] - m[row][b1] * g[1];
        for (jj, &col) in KEPT.iter().enumerate() {
            s[9 * ii + jj] = m[row][col] - m[row][b0] * gmat[0][jj] - m[row][b1] * gmat[1][jj];
        }
    }
    Ok(Condensed { s, f: fk, g, gmat })
}

impl Condensed {
    /// Bubble unknowns from the kept solution `xk` (local kept ordering).
    pub fn recover(&self, xk: &[f64; 9]) -> [f64; 2] {
        let mut xb = self.g;
        for i in 0..2 {
            for j in 0..9 {
                xb[i] -= self.gmat[i][j] * xk[j];
            }
        }
        xb
    }
}

/// Global indices of the kept unknowns of each triangle, in `KEPT` order.
/// Velocity dofs are `2 i + k`, pressures `2 n + i`.
pub fn kept_dofs(mesh: &Mesh, t: usize) -> [usize; 9] {
    let n = mesh.num_nodes();
    let tri = mesh.triangles[t];
    [
        2 * tri[0],
        2 * tri[0] + 1,
        2 * tri[1],
        2 * tri[1] + 1,
        2 * tri[2],
        2 * tri[2] + 1,
        2 * n + tri[0],
        2 * n + tri[1],
        2 * n + tri[2],
    ]
}

pub fn ns_pattern(mesh: &Mesh) -> Pattern {
    let elems: Vec<Vec<usize>> = (0..mesh.num_triangles()).map(|t| kept_dofs(mesh, t).to_vec()).collect();
    Pattern::new(3 * mesh.num_nodes(), &elems)
}

/// Condensed Jacobian of the Navier-Stokes-Brinkman residual at `u_lin`
/// over nodal velocity and pressure unknowns (no boundary conditions).
pub fn assemble_ns_jacobian(
    mesh: &Mesh,
    u_lin: &VectorField,
    phi: &[f64],
    coef: &NsCoefficients,
) -> Result<SparseOperator> {
    if !u_lin.is_finite() {
        return Err(Error::Solver("non-finite linearization velocity".into()));
    }
    let pattern = ns_pattern(mesh);
    let q = QuadratureRule::degree4();
    let p = vec![0.0; mesh.num_nodes()];
    let mut values = pattern.zeros();
    let mut jac = [[0.0; LOCAL]; LOCAL];
    for t in 0..mesh.num_triangles() {
        let d = NsElementData { el: P1Element::new(mesh, t), t, u: u_lin, p: &p, phi, psi: None };
        element_system(&d, coef, &q, Some(&mut jac))?;
        let c = condense(&jac, &[0.0; LOCAL])?;
        pattern.add_element(&mut values, t, &c.s);
    }
    Ok(pattern.into_operator(values, false))
}
