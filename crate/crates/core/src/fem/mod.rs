//! Finite-element spaces, quadrature and operator assembly.

mod assembly;
pub mod mini;
mod quadrature;
mod sparse;

pub use assembly::{
    assemble_boundary_mass, assemble_lumped_mass, assemble_mass, assemble_stiffness,
    assemble_stiffness_with, boundary_load, p1_pattern, Coefficient,
};
pub use mini::{assemble_ns_jacobian, NsCoefficients};
pub use quadrature::QuadratureRule;
pub use sparse::{apply_dirichlet, Pattern, SparseOperator};

use crate::mesh::Mesh;

/// Nodal P1 field.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(mesh: &Mesh) -> Self {
        ScalarField { values: vec![0.0; mesh.num_nodes()] }
    }

    pub fn constant(mesh: &Mesh, v: f64) -> Self {
        ScalarField { values: vec![v; mesh.num_nodes()] }
    }

    pub fn from_fn(mesh: &Mesh, f: impl Fn([f64; 2]) -> f64) -> Self {
        ScalarField { values: mesh.nodes.iter().map(|&p| f(p)).collect() }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// P1-bubble vector field: interleaved nodal components and two bubble
/// coefficients per triangle.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    pub nodal: Vec<f64>,
    pub bubble: Vec<f64>,
}

impl VectorField {
    pub fn zeros(mesh: &Mesh) -> Self {
        VectorField { nodal: vec![0.0; 2 * mesh.num_nodes()], bubble: vec![0.0; 2 * mesh.num_triangles()] }
    }

    pub fn at_node(&self, i: usize) -> [f64; 2] {
        [self.nodal[2 * i], self.nodal[2 * i + 1]]
    }

    pub fn component(&self, k: usize) -> Vec<f64> {
        self.nodal.iter().skip(k).step_by(2).copied().collect()
    }

    pub fn is_finite(&self) -> bool {
        self.nodal.iter().chain(&self.bubble).all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.nodal.iter().chain(&self.bubble).fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Geometry of one linear triangle.
#[derive(Debug, Clone, Copy)]
pub struct P1Element {
    pub nodes: [usize; 3],
    pub area: f64,
    /// Gradients of the barycentric coordinates.
    pub grads: [[f64; 2]; 3],
}

impl P1Element {
    pub fn new(mesh: &Mesh, t: usize) -> Self {
        let nodes = mesh.triangles[t];
        let [p0, p1, p2] = mesh.vertices(t);
        let det = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]);
        let grads = [
            [(p1[1] - p2[1]) / det, (p2[0] - p1[0]) / det],
            [(p2[1] - p0[1]) / det, (p0[0] - p2[0]) / det],
            [(p0[1] - p1[1]) / det, (p1[0] - p0[0]) / det],
        ];
        P1Element { nodes, area: 0.5 * det, grads }
    }

    pub fn gather(&self, field: &[f64]) -> [f64; 3] {
        [field[self.nodes[0]], field[self.nodes[1]], field[self.nodes[2]]]
    }

    /// Gradient of the interpolant. Written in difference form so that a
    /// constant field has an exactly zero gradient.
    pub fn gradient(&self, v: [f64; 3]) -> [f64; 2] {
        let d1 = v[1] - v[0];
        let d2 = v[2] - v[0];
        [
            d1 * self.grads[1][0] + d2 * self.grads[2][0],
            d1 * self.grads[1][1] + d2 * self.grads[2][1],
        ]
    }

    pub fn interpolate(v: [f64; 3], bary: &[f64; 3]) -> f64 {
        v[0] * bary[0] + v[1] * bary[1] + v[2] * bary[2]
    }

    pub fn centroid(mesh: &Mesh, t: usize) -> [f64; 2] {
        let [a, b, c] = mesh.vertices(t);
        [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
    }
}

/// Bubble function 27 l0 l1 l2 and its gradient at a barycentric point.
pub fn bubble(el: &P1Element, l: &[f64; 3]) -> (f64, [f64; 2]) {
    let b = 27.0 * l[0] * l[1] * l[2];
    let c = [27.0 * l[1] * l[2], 27.0 * l[0] * l[2], 27.0 * l[0] * l[1]];
    let g = [
        c[0] * el.grads[0][0] + c[1] * el.grads[1][0] + c[2] * el.grads[2][0],
        c[0] * el.grads[0][1] + c[1] * el.grads[1][1] + c[2] * el.grads[2][1],
    ];
    (b, g)
}

/// Velocity (with bubble) and its gradient `g[k][d] = d u_k / d x_d` at a
/// quadrature point of triangle `t`.
pub fn velocity_at(u: &VectorField, el: &P1Element, t: usize, l: &[f64; 3]) -> ([f64; 2], [[f64; 2]; 2]) {
    let (b, gb) = bubble(el, l);
    let mut val = [0.0; 2];
    let mut grad = [[0.0; 2]; 2];
    for k in 0..2 {
        let ub = u.bubble[2 * t + k];
        val[k] = ub * b;
        grad[k] = [ub * gb[0], ub * gb[1]];
        for a in 0..3 {
            let ua = u.nodal[2 * el.nodes[a] + k];
            val[k] += ua * l[a];
            grad[k][0] += ua * el.grads[a][0];
            grad[k][1] += ua * el.grads[a][1];
        }
    }
    (val, grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_structured_rect, channel_tagger, BBox};

    #[test]
    fn bubble_vanishes_on_edges_and_peaks_at_centroid() {
        let bbox = BBox::new(0.0, 1.0, 0.0, 1.0);
        let mesh = build_structured_rect(bbox, 1, 1, &channel_tagger(bbox)).unwrap();
        let el = P1Element::new(&mesh, 0);
        assert_eq!(bubble(&el, &[0.0, 0.3, 0.7]).0, 0.0);
        let (b, g) = bubble(&el, &[1.0 / 3.0; 3]);
        assert!((b - 1.0).abs() < 1e-15);
        assert!(g[0].abs() < 1e-14 && g[1].abs() < 1e-14);
    }

    #[test]
    fn gradients_sum_to_zero() {
        let bbox = BBox::new(-1.0, 2.0, 0.5, 1.5);
        let mesh = build_structured_rect(bbox, 3, 2, &channel_tagger(bbox)).unwrap();
        for t in 0..mesh.num_triangles() {
            let el = P1Element::new(&mesh, t);
            assert!(el.area > 0.0);
            for d in 0..2 {
                let s: f64 = el.grads.iter().map(|g| g[d]).sum();
                assert!(s.abs() < 1e-13);
            }
            let lin = |p: [f64; 2]| 2.0 * p[0] - 3.0 * p[1] + 1.0;
            let v = [lin(mesh.nodes[el.nodes[0]]), lin(mesh.nodes[el.nodes[1]]), lin(mesh.nodes[el.nodes[2]])];
            let g = el.gradient(v);
            assert!((g[0] - 2.0).abs() < 1e-12 && (g[1] + 3.0).abs() < 1e-12);
        }
    }
}
