//! Gauss-Legendre rules.

use std::f64::consts::PI;

/// Gauss-Legendre rule on `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussRule {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    /// `n`-point rule, exact for polynomials of degree `2n - 1`.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let mut points = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for k in 0..n.div_ceil(2) {
            // Newton on P_n starting from the Chebyshev-like guess
            let mut x = (PI * (k as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            // map from [-1, 1] to [0, 1]
            points[k] = 0.5 * (1.0 - x);
            points[n - 1 - k] = 0.5 * (1.0 + x);
            weights[k] = 0.5 * w;
            weights[n - 1 - k] = 0.5 * w;
        }
        Self { points, weights }
    }

    /// The rule used throughout for degree-`p` spaces: `p + 2` points.
    pub fn for_degree(p: usize) -> Self {
        Self::new(p + 2)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Tensor points `(t, s)` and weights on the unit square, `t` fastest.
    pub fn tensor(&self) -> (Vec<[f64; 2]>, Vec<f64>) {
        let mut pts = Vec::with_capacity(self.len() * self.len());
        let mut wts = Vec::with_capacity(self.len() * self.len());
        for (s, ws) in self.points.iter().zip(&self.weights) {
            for (t, wt) in self.points.iter().zip(&self.weights) {
                pts.push([*t, *s]);
                wts.push(wt * ws);
            }
        }
        (pts, wts)
    }
}

/// `(P_n(x), P_n'(x))`
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}
