//! Structured triangulations of rectangles with tagged boundary segments.

use std::collections::HashMap;
use std::fmt;

use crate::error::{Error, Result};

/// Axis-aligned rectangle `[xmin, xmax] x [ymin, ymax]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub xmin: f64,
    pub xmax: f64,
    pub ymin: f64,
    pub ymax: f64,
}

impl BBox {
    pub fn new(xmin: f64, xmax: f64, ymin: f64, ymax: f64) -> Self {
        BBox { xmin, xmax, ymin, ymax }
    }

    pub fn area(&self) -> f64 {
        (self.xmax - self.xmin) * (self.ymax - self.ymin)
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        p[0] >= self.xmin && p[0] <= self.xmax && p[1] >= self.ymin && p[1] <= self.ymax
    }
}

/// Boundary classification of an edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BoundaryTag {
    Inlet,
    Outlet,
    WallUp,
    WallDown,
}

impl BoundaryTag {
    pub const ALL: [BoundaryTag; 4] = [
        BoundaryTag::Inlet,
        BoundaryTag::Outlet,
        BoundaryTag::WallUp,
        BoundaryTag::WallDown,
    ];

    pub fn is_wall(self) -> bool {
        matches!(self, BoundaryTag::WallUp | BoundaryTag::WallDown)
    }
}

impl fmt::Display for BoundaryTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            BoundaryTag::Inlet => "inlet",
            BoundaryTag::Outlet => "outlet",
            BoundaryTag::WallUp => "wall_up",
            BoundaryTag::WallDown => "wall_down",
        };
        f.write_str(s)
    }
}

/// Tag plus the segment label used by benchmarks with segmented walls.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EdgeLabel {
    pub tag: BoundaryTag,
    pub segment: i32,
}

impl From<BoundaryTag> for EdgeLabel {
    fn from(tag: BoundaryTag) -> Self {
        EdgeLabel { tag, segment: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryEdge {
    pub nodes: [usize; 2],
    pub tag: BoundaryTag,
    pub segment: i32,
}

/// Classifies a boundary edge from its midpoint; `None` means untagged.
pub trait Tagger {
    fn classify(&self, midpoint: [f64; 2]) -> Result<Option<EdgeLabel>>;
}

impl<F> Tagger for F
where
    F: Fn([f64; 2]) -> Option<EdgeLabel>,
{
    fn classify(&self, midpoint: [f64; 2]) -> Result<Option<EdgeLabel>> {
        Ok(self(midpoint))
    }
}

/// Tagger for the plain channel: inlet on the left, outlet on the right.
pub fn channel_tagger(bbox: BBox) -> impl Fn([f64; 2]) -> Option<EdgeLabel> {
    let tol = 1e-9 * (bbox.xmax - bbox.xmin).max(bbox.ymax - bbox.ymin);
    move |p: [f64; 2]| {
        let tag = if (p[0] - bbox.xmin).abs() <= tol {
            BoundaryTag::Inlet
        } else if (p[0] - bbox.xmax).abs() <= tol {
            BoundaryTag::Outlet
        } else if (p[1] - bbox.ymax).abs() <= tol {
            BoundaryTag::WallUp
        } else {
            BoundaryTag::WallDown
        };
        Some(tag.into())
    }
}

/// Triangle mesh of a rectangle, built on an `nx x ny` grid.
#[derive(Debug, Clone)]
pub struct Mesh {
    pub nodes: Vec<[f64; 2]>,
    /// Counter-clockwise vertex indices.
    pub triangles: Vec<[usize; 3]>,
    pub boundary_edges: Vec<BoundaryEdge>,
    pub nx: usize,
    pub ny: usize,
    pub bbox: BBox,
}

impl Mesh {
    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn hx(&self) -> f64 {
        (self.bbox.xmax - self.bbox.xmin) / self.nx as f64
    }

    pub fn hy(&self) -> f64 {
        (self.bbox.ymax - self.bbox.ymin) / self.ny as f64
    }

    pub fn node_index(&self, i: usize, j: usize) -> usize {
        j * (self.nx + 1) + i
    }

    pub fn vertices(&self, t: usize) -> [[f64; 2]; 3] {
        let tri = self.triangles[t];
        [self.nodes[tri[0]], self.nodes[tri[1]], self.nodes[tri[2]]]
    }

    /// Signed area (positive for counter-clockwise triangles).
    pub fn signed_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.vertices(t);
        0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
    }

    /// Sum of signed areas with compensated summation.
    pub fn total_area(&self) -> f64 {
        let (mut sum, mut comp) = (0.0f64, 0.0f64);
        for t in 0..self.num_triangles() {
            let a = self.signed_area(t);
            let s = sum + a;
            comp += if sum.abs() >= a.abs() { (sum - s) + a } else { (a - s) + sum };
            sum = s;
        }
        sum + comp
    }

    /// Nodes on edges carrying `tag`, sorted and deduplicated.
    pub fn boundary_nodes(&self, tag: BoundaryTag) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .boundary_edges
            .iter()
            .filter(|e| e.tag == tag)
            .flat_map(|e| e.nodes)
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    pub fn edges_with_tag(&self, tag: BoundaryTag) -> impl Iterator<Item = &BoundaryEdge> {
        self.boundary_edges.iter().filter(move |e| e.tag == tag)
    }

    /// Per-node segment label taken from the first incident boundary edge with `tag`.
    pub fn node_segments(&self, tag: BoundaryTag) -> HashMap<usize, i32> {
        let mut out = HashMap::new();
        for e in self.edges_with_tag(tag) {
            for &n in &e.nodes {
                out.entry(n).or_insert(e.segment);
            }
        }
        out
    }

    /// Number of triangles incident to every (sorted) edge.
    pub fn edge_incidence(&self) -> HashMap<(usize, usize), usize> {
        let mut counts = HashMap::new();
        for tri in &self.triangles {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                *counts.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        counts
    }

    /// Longest edge of triangle `t`.
    pub fn diameter(&self, t: usize) -> f64 {
        let v = self.vertices(t);
        (0..3)
            .map(|k| {
                let (a, b) = (v[k], v[(k + 1) % 3]);
                ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt()
            })
            .fold(0.0, f64::max)
    }
}

/// Builds the structured mesh of `bbox` with `2 nx ny` triangles.
///
/// Cells are split along alternating diagonals so that neighbouring cells
/// mirror each other (union-jack pattern on each 2x2 block).
pub fn build_structured_rect(bbox: BBox, nx: usize, ny: usize, tagger: &dyn Tagger) -> Result<Mesh> {
    if nx == 0 || ny == 0 {
        return Err(Error::Config(format!("mesh resolution must be positive, got {nx} x {ny}")));
    }
    let finite = [bbox.xmin, bbox.xmax, bbox.ymin, bbox.ymax].iter().all(|v| v.is_finite());
    if !finite || !(bbox.xmax > bbox.xmin) || !(bbox.ymax > bbox.ymin) {
        return Err(Error::Config(format!("degenerate bounding box {bbox:?}")));
    }
    let hx = (bbox.xmax - bbox.xmin) / nx as f64;
    let hy = (bbox.ymax - bbox.ymin) / ny as f64;

    let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            let x = if i == nx { bbox.xmax } else { bbox.xmin + i as f64 * hx };
            let y = if j == ny { bbox.ymax } else { bbox.ymin + j as f64 * hy };
            nodes.push([x, y]);
        }
    }
    let id = |i: usize, j: usize| j * (nx + 1) + i;

    let mut triangles = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (n00, n10, n01, n11) = (id(i, j), id(i + 1, j), id(i, j + 1), id(i + 1, j + 1));
            if (i + j) % 2 == 0 {
                triangles.push([n00, n10, n11]);
                triangles.push([n00, n11, n01]);
            } else {
                triangles.push([n00, n10, n01]);
                triangles.push([n10, n11, n01]);
            }
        }
    }

    // Walk the boundary counter-clockwise.
    let mut raw = Vec::with_capacity(2 * (nx + ny));
    for i in 0..nx {
        raw.push([id(i, 0), id(i + 1, 0)]);
    }
    for j in 0..ny {
        raw.push([id(nx, j), id(nx, j + 1)]);
    }
    for i in (0..nx).rev() {
        raw.push([id(i + 1, ny), id(i, ny)]);
    }
    for j in (0..ny).rev() {
        raw.push([id(0, j + 1), id(0, j)]);
    }

    let mut boundary_edges = Vec::with_capacity(raw.len());
    for [a, b] in raw {
        let mid = [0.5 * (nodes[a][0] + nodes[b][0]), 0.5 * (nodes[a][1] + nodes[b][1])];
        match tagger.classify(mid)? {
            Some(label) => boundary_edges.push(BoundaryEdge { nodes: [a, b], tag: label.tag, segment: label.segment }),
            None => {
                return Err(Error::Config(format!(
                    "boundary edge with midpoint ({:.6}, {:.6}) was not tagged",
                    mid[0], mid[1]
                )))
            }
        }
    }

    Ok(Mesh { nodes, triangles, boundary_edges, nx, ny, bbox })
}

/// Whether the node lies on any Dirichlet edge for a field constrained on `tags`.
pub fn dirichlet_nodes(mesh: &Mesh, tags: &[BoundaryTag]) -> Vec<usize> {
    let mut out: Vec<usize> = tags.iter().flat_map(|&t| mesh.boundary_nodes(t)).collect();
    out.sort_unstable();
    out.dedup();
    out
}

/// Resolves which Dirichlet tag owns each node; inlet wins over walls.
pub fn dirichlet_owner(mesh: &Mesh, tags: &[BoundaryTag]) -> Vec<(usize, BoundaryTag)> {
    let mut owner: HashMap<usize, BoundaryTag> = HashMap::new();
    for e in &mesh.boundary_edges {
        if !tags.contains(&e.tag) {
            continue;
        }
        for &n in &e.nodes {
            owner
                .entry(n)
                .and_modify(|t| {
                    if precedence(e.tag) < precedence(*t) {
                        *t = e.tag;
                    }
                })
                .or_insert(e.tag);
        }
    }
    let mut out: Vec<_> = owner.into_iter().collect();
    out.sort_unstable_by_key(|&(n, _)| n);
    out
}

fn precedence(tag: BoundaryTag) -> u8 {
    match tag {
        BoundaryTag::Inlet => 0,
        BoundaryTag::WallUp | BoundaryTag::WallDown => 1,
        BoundaryTag::Outlet => 2,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_sides() -> impl Fn([f64; 2]) -> Option<EdgeLabel> {
        channel_tagger(BBox::new(0.0, 1.0, 0.0, 1.0))
    }

    #[test]
    fn smallest_grid() {
        let m = build_structured_rect(BBox::new(0.0, 1.0, 0.0, 1.0), 1, 1, &unit_sides()).unwrap();
        assert_eq!(m.num_triangles(), 2);
        assert_eq!(m.num_nodes(), 4);
        assert_eq!(m.boundary_edges.len(), 4);
        for tag in BoundaryTag::ALL {
            assert_eq!(m.boundary_nodes(tag).len(), 2, "{tag}");
        }
    }

    #[test]
    fn example1_resolution() {
        let bbox = BBox::new(0.0, 1.8, -0.5, 0.5);
        let m = build_structured_rect(bbox, 150, 125, &channel_tagger(bbox)).unwrap();
        assert_eq!(m.num_triangles(), 37500);
    }

    #[test]
    fn area_of_long_channel() {
        let bbox = BBox::new(0.0, 4.0, 0.0, 1.0);
        let m = build_structured_rect(bbox, 200, 100, &channel_tagger(bbox)).unwrap();
        assert_eq!(m.num_triangles(), 40000);
        assert!((m.total_area() - 4.0).abs() <= 1e-12, "{}", m.total_area() - 4.0);
        assert!((0..m.num_triangles()).all(|t| m.signed_area(t) > 0.0));
    }

    #[test]
    fn edge_incidence_exhaustive() {
        for (nx, ny) in [(1, 1), (2, 3), (7, 4), (50, 50)] {
            let bbox = BBox::new(-1.0, 2.0, 0.0, 1.5);
            let m = build_structured_rect(bbox, nx, ny, &channel_tagger(bbox)).unwrap();
            let inc = m.edge_incidence();
            let boundary: std::collections::HashSet<_> =
                m.boundary_edges.iter().map(|e| (e.nodes[0].min(e.nodes[1]), e.nodes[0].max(e.nodes[1]))).collect();
            for (edge, count) in &inc {
                let expected = if boundary.contains(edge) { 1 } else { 2 };
                assert_eq!(*count, expected, "edge {edge:?} on {nx}x{ny}");
            }
            assert!(boundary.iter().all(|e| inc.contains_key(e)));
            // boundary length equals perimeter
            let perim: f64 = m
                .boundary_edges
                .iter()
                .map(|e| {
                    let (a, b) = (m.nodes[e.nodes[0]], m.nodes[e.nodes[1]]);
                    ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt()
                })
                .sum();
            assert!((perim - 2.0 * (3.0 + 1.5)).abs() < 1e-12);
        }
    }

    #[test]
    fn nodes_are_grid_points() {
        let bbox = BBox::new(0.0, 1.8, -0.5, 0.5);
        let m = build_structured_rect(bbox, 9, 5, &channel_tagger(bbox)).unwrap();
        for j in 0..=5 {
            for i in 0..=9 {
                let p = m.nodes[m.node_index(i, j)];
                assert_eq!(p[0], if i == 9 { 1.8 } else { i as f64 * 0.2 });
                assert_eq!(p[1], if j == 5 { 0.5 } else { -0.5 + j as f64 * 0.2 });
            }
        }
    }

    #[test]
    fn degenerate_inputs_are_rejected() {
        let t = unit_sides();
        assert!(matches!(build_structured_rect(BBox::new(0.0, 0.0, 0.0, 1.0), 2, 2, &t), Err(Error::Config(_))));
        assert!(matches!(build_structured_rect(BBox::new(0.0, 1.0, 0.0, 1.0), 0, 2, &t), Err(Error::Config(_))));
    }

    #[test]
    fn untagged_edge_names_midpoint() {
        let only_left = |p: [f64; 2]| (p[0] == 0.0).then_some(EdgeLabel::from(BoundaryTag::Inlet));
        let err = build_structured_rect(BBox::new(0.0, 1.0, 0.0, 1.0), 2, 2, &only_left).unwrap_err();
        assert!(err.to_string().contains("midpoint (0.250000, 0.000000)"), "{err}");
    }

    #[test]
    fn inlet_bands_by_coordinate_scan() {
        let bbox = BBox::new(0.0, 1.8, -0.5, 0.5);
        let tagger = move |p: [f64; 2]| {
            // strict band test: edges straddling a band end are walls
            let band = |c: f64| (p[1] - c).abs() < 0.15 - 1e-9;
            let tag = if p[0] == 0.0 && (band(0.35) || band(-0.35)) {
                BoundaryTag::Inlet
            } else if p[0] == 1.8 {
                BoundaryTag::Outlet
            } else if p[1] > 0.0 {
                BoundaryTag::WallUp
            } else {
                BoundaryTag::WallDown
            };
            Some(tag.into())
        };
        let m = build_structured_rect(bbox, 30, 25, &tagger).unwrap();
        let inlet = m.boundary_nodes(BoundaryTag::Inlet);
        let scan: Vec<usize> = (0..m.num_nodes())
            .filter(|&n| {
                let p = m.nodes[n];
                p[0] == 0.0 && ((p[1] - 0.35).abs() <= 0.15 + 1e-12 || (p[1] + 0.35).abs() <= 0.15 + 1e-12)
            })
            .collect();
        assert_eq!(inlet, scan);
        // corner nodes shared with walls appear in both lists
        let walls = m.boundary_nodes(BoundaryTag::WallUp);
        assert!(inlet.iter().any(|n| walls.contains(n)));
        let owner = dirichlet_owner(&m, &[BoundaryTag::Inlet, BoundaryTag::WallUp, BoundaryTag::WallDown]);
        for (n, tag) in owner {
            if inlet.contains(&n) {
                assert_eq!(tag, BoundaryTag::Inlet);
            }
        }
    }

    #[test]
    fn segmented_top_wall() {
        let bbox = BBox::new(0.0, 4.0, 0.0, 1.0);
        let base = channel_tagger(bbox);
        let tagger = move |p: [f64; 2]| {
            let mut l = base(p)?;
            if l.tag.is_wall() {
                l.segment = (p[0].floor() as i32).min(3);
            }
            Some(l)
        };
        let m = build_structured_rect(bbox, 40, 10, &tagger).unwrap();
        let mut len = [0.0; 4];
        for e in m.edges_with_tag(BoundaryTag::WallUp) {
            len[e.segment as usize] += (m.nodes[e.nodes[0]][0] - m.nodes[e.nodes[1]][0]).abs();
        }
        for l in len {
            assert!((l - 1.0).abs() < 1e-12);
        }
    }
}
