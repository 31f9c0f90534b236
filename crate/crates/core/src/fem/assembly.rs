use super::{P1Element, Pattern, QuadratureRule, SparseOperator};
use crate::error::{Error, Result};
use crate::mesh::{BoundaryTag, Mesh};

/// Scalar coefficient of a bilinear form.
#[derive(Debug, Clone, Copy)]
pub enum Coefficient<'a> {
    Constant(f64),
    /// Nodal values, interpolated to quadrature points.
    Nodal(&'a [f64]),
}

/// Sparsity pattern of the P1 scalar space.
pub fn p1_pattern(mesh: &Mesh) -> Pattern {
    let elems: Vec<Vec<usize>> = mesh.triangles.iter().map(|t| t.to_vec()).collect();
    Pattern::new(mesh.num_nodes(), &elems)
}

pub fn assemble_mass(mesh: &Mesh) -> SparseOperator {
    let pattern = p1_pattern(mesh);
    let mut values = pattern.zeros();
    for t in 0..mesh.num_triangles() {
        let a = mesh.signed_area(t) / 12.0;
        let local = [2.0 * a, a, a, a, 2.0 * a, a, a, a, 2.0 * a];
        pattern.add_element(&mut values, t, &local);
    }
    pattern.into_operator(values, true)
}

/// Row sums of the consistent mass matrix (one third of the incident area).
pub fn assemble_lumped_mass(mesh: &Mesh) -> Vec<f64> {
    let mut m = vec![0.0; mesh.num_nodes()];
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let a = mesh.signed_area(t) / 3.0;
        for &n in tri {
            m[n] += a;
        }
    }
    m
}

pub fn assemble_stiffness(mesh: &Mesh, coeff: Coefficient) -> Result<SparseOperator> {
    let pattern = p1_pattern(mesh);
    match coeff {
        Coefficient::Constant(c) => assemble_stiffness_with(mesh, &pattern, |_, _| c),
        Coefficient::Nodal(v) => {
            assert_eq!(v.len(), mesh.num_nodes());
            assemble_stiffness_with(mesh, &pattern, |t, l| {
                let [a, b, c] = mesh.triangles[t];
                v[a] * l[0] + v[b] * l[1] + v[c] * l[2]
            })
        }
    }
}

/// Stiffness form with a coefficient given at barycentric points of each
/// triangle.
pub fn assemble_stiffness_with(
    mesh: &Mesh,
    pattern: &Pattern,
    coeff: impl Fn(usize, &[f64; 3]) -> f64,
) -> Result<SparseOperator> {
    let q = QuadratureRule::degree4();
    let mut values = pattern.zeros();
    let mut local = [0.0; 9];
    for t in 0..mesh.num_triangles() {
        let el = P1Element::new(mesh, t);
        let mut integral = 0.0;
        for (l, w) in q.points.iter().zip(&q.weights) {
            let c = coeff(t, l);
            if !(c >= 0.0) || !c.is_finite() {
                return Err(Error::Solver(format!("invalid diffusion coefficient {c} in triangle {t}")));
            }
            integral += w * c;
        }
        integral *= 2.0 * el.area;
        for a in 0..3 {
            for b in 0..3 {
                let g = el.grads[a][0] * el.grads[b][0] + el.grads[a][1] * el.grads[b][1];
                local[3 * a + b] = integral * g;
            }
        }
        pattern.add_element(&mut values, t, &local);
    }
    Ok(pattern.into_operator(values, true))
}

/// Mass matrix of the boundary trace on edges with the given tag.
pub fn assemble_boundary_mass(mesh: &Mesh, tag: BoundaryTag) -> SparseOperator {
    let mut trip = Vec::new();
    for e in mesh.edges_with_tag(tag) {
        let [a, b] = e.nodes;
        let len = edge_length(mesh, a, b);
        trip.push((a, a, len / 3.0));
        trip.push((b, b, len / 3.0));
        trip.push((a, b, len / 6.0));
        trip.push((b, a, len / 6.0));
    }
    let mut op = SparseOperator::from_triplets(mesh.num_nodes(), mesh.num_nodes(), &trip);
    op.symmetric = true;
    op
}

/// Load vector `int_Gamma v_h N_i` for a nodal field `v` on tagged edges.
pub fn boundary_load(mesh: &Mesh, tag: BoundaryTag, v: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; mesh.num_nodes()];
    for e in mesh.edges_with_tag(tag) {
        let [a, b] = e.nodes;
        let len = edge_length(mesh, a, b);
        out[a] += len * (2.0 * v[a] + v[b]) / 6.0;
        out[b] += len * (v[a] + 2.0 * v[b]) / 6.0;
    }
    out
}

pub(crate) fn edge_length(mesh: &Mesh, a: usize, b: usize) -> f64 {
    let (p, q) = (mesh.nodes[a], mesh.nodes[b]);
    ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_structured_rect, channel_tagger, BBox};

    fn reference_triangle_mesh() -> (Mesh, usize) {
        // the first triangle of the 1x1 unit mesh is (0,0),(1,0),(1,1); use a
        // mapping-free check via a dedicated mesh instead
        let bbox = BBox::new(0.0, 1.0, 0.0, 1.0);
        let mut mesh = build_structured_rect(bbox, 1, 1, &channel_tagger(bbox)).unwrap();
        mesh.nodes = vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]];
        mesh.triangles = vec![[0, 1, 2]];
        (mesh, 0)
    }

    #[test]
    fn reference_mass_and_stiffness() {
        let (mesh, _) = reference_triangle_mesh();
        let m = assemble_mass(&mesh).to_dense();
        let k = assemble_stiffness(&mesh, Coefficient::Constant(1.0)).unwrap().to_dense();
        let m_exact = [[2.0, 1.0, 1.0], [1.0, 2.0, 1.0], [1.0, 1.0, 2.0]];
        let k_exact = [[2.0, -1.0, -1.0], [-1.0, 1.0, 0.0], [-1.0, 0.0, 1.0]];
        for i in 0..3 {
            for j in 0..3 {
                assert!((m[i][j] - m_exact[i][j] / 24.0).abs() < 1e-15);
                assert!((k[i][j] - k_exact[i][j] / 2.0).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn negative_coefficient_rejected() {
        let bbox = BBox::new(0.0, 1.0, 0.0, 1.0);
        let mesh = build_structured_rect(bbox, 2, 2, &channel_tagger(bbox)).unwrap();
        assert!(matches!(assemble_stiffness(&mesh, Coefficient::Constant(-1.0)), Err(Error::Solver(_))));
        let v = vec![-1.0; mesh.num_nodes()];
        assert!(assemble_stiffness(&mesh, Coefficient::Nodal(&v)).is_err());
    }

    #[test]
    fn boundary_mass_integrates_length() {
        let bbox = BBox::new(0.0, 4.0, 0.0, 1.0);
        let mesh = build_structured_rect(bbox, 8, 3, &channel_tagger(bbox)).unwrap();
        let b = assemble_boundary_mass(&mesh, BoundaryTag::Outlet);
        let ones = vec![1.0; mesh.num_nodes()];
        let total: f64 = b.matvec(&ones).iter().sum();
        assert!((total - 1.0).abs() < 1e-14);
        let load = boundary_load(&mesh, BoundaryTag::Outlet, &ones);
        assert!((load.iter().sum::<f64>() - 1.0).abs() < 1e-14);
    }
}
