//! Geometry maps from the parametric unit square to the physical domain and
//! the chain rule for first and second derivatives.

use thiserror::Error;

use crate::spline::{tensor_eval, KnotVector, SplineError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("singular or inverted Jacobian (det = {det:e}) at {xi:?}")]
    SingularJacobian { xi: [f64; 2], det: f64 },
    #[error("point {0:?} is outside the parametric domain")]
    OutOfDomain([f64; 2]),
    #[error("point {0:?} could not be mapped back to the parametric domain")]
    InversionFailed([f64; 2]),
    #[error("invalid geometry: {0}")]
    Invalid(String),
    #[error(transparent)]
    Spline(#[from] SplineError),
}

/// Parametric-to-physical map.
#[derive(Debug, Clone, PartialEq)]
pub enum GeometryMap {
    Identity,
    /// `x = matrix * xi + offset`
    Affine {
        matrix: [[f64; 2]; 2],
        offset: [f64; 2],
    },
    /// Tensor B-spline map with control points ordered `index = i + j * nx`.
    Spline {
        kv_x: KnotVector,
        kv_y: KnotVector,
        control: Vec<[f64; 2]>,
    },
}

/// Map value and derivatives at a parametric point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapEval {
    pub point: [f64; 2],
    /// `jac[a][b] = d x_a / d xi_b`
    pub jac: [[f64; 2]; 2],
    /// `hess[a] = [d2 x_a/dxi2, d2 x_a/dxi deta, d2 x_a/deta2]`
    pub hess: [[f64; 3]; 2],
    pub det: f64,
}

impl GeometryMap {
    /// Exact degree-2 spline representation of the bilinear quad with the
    /// given corners (counter-clockwise from the parametric origin).
    pub fn bilinear(corners: [[f64; 2]; 4]) -> Self {
        let kv = KnotVector::open_uniform(1, 2, (0.0, 1.0)).unwrap();
        // Greville abscissae of the quadratic Bernstein basis
        let g = [0.0, 0.5, 1.0];
        let mut control = Vec::with_capacity(9);
        for &eta in &g {
            for &xi in &g {
                let w = [(1.0 - xi) * (1.0 - eta), xi * (1.0 - eta), xi * eta, (1.0 - xi) * eta];
                let mut p = [0.0; 2];
                for (wk, c) in w.iter().zip(&corners) {
                    p[0] += wk * c[0];
                    p[1] += wk * c[1];
                }
                control.push(p);
            }
        }
        GeometryMap::Spline {
            kv_x: kv.clone(),
            kv_y: kv,
            control,
        }
    }

    pub fn is_identity(&self) -> bool {
        matches!(self, GeometryMap::Identity)
    }

    /// Whether the map has a constant Jacobian.
    pub fn is_affine(&self) -> bool {
        matches!(self, GeometryMap::Identity | GeometryMap::Affine { .. })
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        if let GeometryMap::Spline { kv_x, kv_y, control } = self {
            if control.len() != kv_x.num_basis() * kv_y.num_basis() {
                return Err(GeometryError::Invalid(format!(
                    "{} control points for a {}x{} basis",
                    control.len(),
                    kv_x.num_basis(),
                    kv_y.num_basis()
                )));
            }
        }
        Ok(())
    }

    pub fn eval(&self, xi: [f64; 2]) -> Result<MapEval, GeometryError> {
        if !(0.0..=1.0).contains(&xi[0]) || !(0.0..=1.0).contains(&xi[1]) {
            return Err(GeometryError::OutOfDomain(xi));
        }
        let out = match self {
            GeometryMap::Identity => MapEval {
                point: xi,
                jac: [[1.0, 0.0], [0.0, 1.0]],
                hess: [[0.0; 3]; 2],
                det: 1.0,
            },
            GeometryMap::Affine { matrix, offset } => {
                let m = matrix;
                MapEval {
                    point: [
                        m[0][0] * xi[0] + m[0][1] * xi[1] + offset[0],
                        m[1][0] * xi[0] + m[1][1] * xi[1] + offset[1],
                    ],
                    jac: *m,
                    hess: [[0.0; 3]; 2],
                    det: m[0][0] * m[1][1] - m[0][1] * m[1][0],
                }
            }
            GeometryMap::Spline { kv_x, kv_y, control } => {
                let nx = kv_x.num_basis();
                let mut point = [0.0; 2];
                let mut jac = [[0.0; 2]; 2];
                let mut hess = [[0.0; 3]; 2];
                for v in tensor_eval(kv_x, kv_y, (xi[0], xi[1]))? {
                    let c = control[v.index.0 + v.index.1 * nx];
                    for a in 0..2 {
                        point[a] += v.value * c[a];
                        jac[a][0] += v.grad[0] * c[a];
                        jac[a][1] += v.grad[1] * c[a];
                        for k in 0..3 {
                            hess[a][k] += v.hessian[k] * c[a];
                        }
                    }
                }
                let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
                MapEval { point, jac, hess, det }
            }
        };
        if !(out.det > 0.0) {
            return Err(GeometryError::SingularJacobian { xi, det: out.det });
        }
        Ok(out)
    }

    pub fn point(&self, xi: [f64; 2]) -> Result<[f64; 2], GeometryError> {
        match self {
            GeometryMap::Identity => Ok(xi),
            _ => Ok(self.eval(xi)?.point),
        }
    }

    /// Parametric preimage of a physical point (Newton iteration for spline maps).
    pub fn inverse(&self, x: [f64; 2]) -> Result<[f64; 2], GeometryError> {
        let inside = |xi: [f64; 2]| {
            let tol = 1e-12;
            xi[0] >= -tol && xi[0] <= 1.0 + tol && xi[1] >= -tol && xi[1] <= 1.0 + tol
        };
        let clamp = |xi: [f64; 2]| [xi[0].clamp(0.0, 1.0), xi[1].clamp(0.0, 1.0)];
        match self {
            GeometryMap::Identity => {
                if inside(x) {
                    Ok(clamp(x))
                } else {
                    Err(GeometryError::OutOfDomain(x))
                }
            }
            GeometryMap::Affine { matrix, offset } => {
                let m = matrix;
                let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
                let (dx, dy) = (x[0] - offset[0], x[1] - offset[1]);
                let xi = [
                    (m[1][1] * dx - m[0][1] * dy) / det,
                    (-m[1][0] * dx + m[0][0] * dy) / det,
                ];
                if inside(xi) {
                    Ok(clamp(xi))
                } else {
                    Err(GeometryError::OutOfDomain(x))
                }
            }
            GeometryMap::Spline { .. } => {
                let mut xi = [0.5, 0.5];
                for _ in 0..100 {
                    let ev = self.eval(xi)?;
                    let r = [ev.point[0] - x[0], ev.point[1] - x[1]];
                    if r[0].hypot(r[1]) <= 1e-14 * (1.0 + x[0].hypot(x[1])) {
                        return Ok(xi);
                    }
                    let j = ev.jac;
                    let d = [
                        (j[1][1] * r[0] - j[0][1] * r[1]) / ev.det,
                        (-j[1][0] * r[0] + j[0][0] * r[1]) / ev.det,
                    ];
                    let next = [xi[0] - d[0], xi[1] - d[1]];
                    if !inside(next) && !inside(xi) {
                        return Err(GeometryError::OutOfDomain(x));
                    }
                    xi = clamp(next);
                }
                Err(GeometryError::InversionFailed(x))
            }
        }
    }
}

/// Chain-rule data at one parametric point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pushforward {
    pub point: [f64; 2],
    /// `inv_jac[b][a] = d xi_b / d x_a`
    pub inv_jac: [[f64; 2]; 2],
    pub map_hess: [[f64; 3]; 2],
    pub det: f64,
    identity: bool,
}

/// Chain-rule transform at `xi`.
///
/// With `J = dx/dxi` and `G_a` the parametric Hessian of the map component
/// `x_a`, a function with parametric gradient `g` and Hessian `H` has physical
/// gradient `J^{-T} g` and Hessian `J^{-T} (H - sum_a (J^{-T} g)_a G_a) J^{-1}`.
pub fn pushforward2(geo: &GeometryMap, xi: [f64; 2]) -> Result<Pushforward, GeometryError> {
    let ev = geo.eval(xi)?;
    let j = ev.jac;
    let inv = [
        [j[1][1] / ev.det, -j[0][1] / ev.det],
        [-j[1][0] / ev.det, j[0][0] / ev.det],
    ];
    Ok(Pushforward {
        point: ev.point,
        inv_jac: inv,
        map_hess: ev.hess,
        det: ev.det,
        identity: geo.is_identity(),
    })
}

impl Pushforward {
    pub fn identity(point: [f64; 2]) -> Self {
        Self {
            point,
            inv_jac: [[1.0, 0.0], [0.0, 1.0]],
            map_hess: [[0.0; 3]; 2],
            det: 1.0,
            identity: true,
        }
    }

    pub fn gradient(&self, g: [f64; 2]) -> [f64; 2] {
        if self.identity {
            return g;
        }
        let k = &self.inv_jac;
        [k[0][0] * g[0] + k[1][0] * g[1], k[0][1] * g[0] + k[1][1] * g[1]]
    }

    /// Physical `(gradient, [h_xx, h_xy, h_yy])` from parametric ones.
    pub fn apply(&self, g: [f64; 2], h: [f64; 3]) -> ([f64; 2], [f64; 3]) {
        if self.identity {
            return (g, h);
        }
        let gp = self.gradient(g);
        let mut c = h;
        for a in 0..2 {
            for k in 0..3 {
                c[k] -= gp[a] * self.map_hess[a][k];
            }
        }
        // H_phys[a][b] = sum_{c,d} K[c][a] C[c][d] K[d][b]
        let cm = [[c[0], c[1]], [c[1], c[2]]];
        let k = &self.inv_jac;
        let entry = |a: usize, b: usize| {
            let mut s = 0.0;
            for ci in 0..2 {
                for di in 0..2 {
                    s += k[ci][a] * cm[ci][di] * k[di][b];
                }
            }
            s
        };
        (gp, [entry(0, 0), entry(0, 1), entry(1, 1)])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn identity_is_passthrough() {
        let pf = pushforward2(&GeometryMap::Identity, [0.3, 0.4]).unwrap();
        let (g, h) = pf.apply([1.5, -2.0], [3.0, 4.0, 5.0]);
        assert_eq!(g, [1.5, -2.0]);
        assert_eq!(h, [3.0, 4.0, 5.0]);
    }

    #[test]
    fn affine_scaling() {
        let geo = GeometryMap::Affine {
            matrix: [[2.0, 0.0], [0.0, 3.0]],
            offset: [0.0, 0.0],
        };
        let pf = pushforward2(&geo, [0.5, 0.5]).unwrap();
        let (_, h) = pf.apply([0.0, 0.0], [1.0, 1.0, 1.0]);
        assert_relative_eq!(h[0], 0.25, epsilon = 1e-15);
        assert_relative_eq!(h[1], 1.0 / 6.0, epsilon = 1e-15);
        assert_relative_eq!(h[2], 1.0 / 9.0, epsilon = 1e-15);
    }

    #[test]
    fn singular_jacobian_is_reported() {
        let geo = GeometryMap::Affine {
            matrix: [[1.0, 2.0], [0.5, 1.0]],
            offset: [0.0, 0.0],
        };
        assert!(matches!(
            pushforward2(&geo, [0.1, 0.1]),
            Err(GeometryError::SingularJacobian { .. })
        ));
    }

    fn distorted() -> GeometryMap {
        GeometryMap::bilinear([[0.0, 0.0], [2.0, 0.3], [2.4, 1.9], [-0.2, 1.2]])
    }

    #[test]
    fn bilinear_reproduces_corners_and_inverts() {
        let geo = distorted();
        assert_relative_eq!(geo.point([1.0, 1.0]).unwrap()[0], 2.4, epsilon = 1e-14);
        let x = geo.point([0.3, 0.7]).unwrap();
        let xi = geo.inverse(x).unwrap();
        assert_relative_eq!(xi[0], 0.3, epsilon = 1e-12);
        assert_relative_eq!(xi[1], 0.7, epsilon = 1e-12);
    }

    /// Physical Hessian of a polynomial composed with the map, checked against
    /// central differences taken in physical coordinates.
    #[test]
    fn pushforward_matches_finite_differences() {
        let geo = distorted();
        let f = |x: [f64; 2]| x[0].powi(3) * x[1] + 0.5 * x[0] * x[1].powi(2) - x[1].powi(3);
        let hess_exact = |x: [f64; 2]| {
            [
                6.0 * x[0] * x[1],
                3.0 * x[0].powi(2) + x[1],
                x[0] - 6.0 * x[1],
            ]
        };
        for &xi in &[[0.2, 0.3], [0.7, 0.6], [0.5, 0.9]] {
            // parametric derivatives of f(S(xi)) by central differences in xi
            let fs = |a: f64, b: f64| f(geo.point([a, b]).unwrap());
            let s = 1e-4;
            let (a, b) = (xi[0], xi[1]);
            let g = [
                (fs(a + s, b) - fs(a - s, b)) / (2.0 * s),
                (fs(a, b + s) - fs(a, b - s)) / (2.0 * s),
            ];
            let h = [
                (fs(a + s, b) - 2.0 * fs(a, b) + fs(a - s, b)) / (s * s),
                (fs(a + s, b + s) - fs(a + s, b - s) - fs(a - s, b + s) + fs(a - s, b - s))
                    / (4.0 * s * s),
                (fs(a, b + s) - 2.0 * fs(a, b) + fs(a, b - s)) / (s * s),
            ];
            let pf = pushforward2(&geo, xi).unwrap();
            let (_, hp) = pf.apply(g, h);

            // physical finite differences
            let x = pf.point;
            let t = 1e-4;
            let fd = [
                (f([x[0] + t, x[1]]) - 2.0 * f(x) + f([x[0] - t, x[1]])) / (t * t),
                (f([x[0] + t, x[1] + t]) - f([x[0] + t, x[1] - t]) - f([x[0] - t, x[1] + t])
                    + f([x[0] - t, x[1] - t]))
                    / (4.0 * t * t),
                (f([x[0], x[1] + t]) - 2.0 * f(x) + f([x[0], x[1] - t])) / (t * t),
            ];
            let he = hess_exact(x);
            for k in 0..3 {
                let scale = he[k].abs().max(1.0);
                assert!((hp[k] - fd[k]).abs() <= 1e-5 * scale, "{k}: {} vs {}", hp[k], fd[k]);
            }
        }
    }
}
