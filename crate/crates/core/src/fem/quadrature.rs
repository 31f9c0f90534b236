/// Quadrature on the reference triangle in barycentric coordinates.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    pub points: Vec<[f64; 3]>,
    /// Weights for the reference triangle; they sum to 1/2.
    pub weights: Vec<f64>,
    pub degree: usize,
}

impl QuadratureRule {
    /// Six-point symmetric rule exact for polynomials of total degree 4.
    pub fn degree4() -> Self {
        const A1: f64 = 0.445_948_490_915_964_886_32;
        const W1: f64 = 0.223_381_589_678_011_465_70;
        const A2: f64 = 0.091_576_213_509_770_743_46;
        const W2: f64 = 0.109_951_743_655_321_867_64;
        let b1 = 1.0 - 2.0 * A1;
        let b2 = 1.0 - 2.0 * A2;
        let points = vec![
            [b1, A1, A1],
            [A1, b1, A1],
            [A1, A1, b1],
            [b2, A2, A2],
            [A2, b2, A2],
            [A2, A2, b2],
        ];
        let weights = [W1, W1, W1, W2, W2, W2].iter().map(|w| 0.5 * w).collect();
        QuadratureRule { points, weights, degree: 4 }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}
