//! Element bubble spaces of degree `p + 1`.

use super::EstimateError;
use crate::geometry::{pushforward2, GeometryError, GeometryMap, Pushforward};
use crate::hierarchy::{ElementId, HierarchicalMesh, Side};
use crate::plate::{PlateProblem, Rotational, Transverse};
use crate::spline::eval_bernstein_ders;

/// Sides on which bubbles are extended up to the boundary.
///
/// `value[s]`: the deflection is free on side `s`, so bubbles with nonzero
/// trace are admissible. `derivative[s]`: the rotation is free, so bubbles
/// with nonzero normal derivative are admissible.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct NeumannSides {
    pub value: [bool; 4],
    pub derivative: [bool; 4],
}

impl NeumannSides {
    /// No boundary bubbles.
    pub fn none() -> Self {
        Self::default()
    }

    /// Shear sides admit value bubbles, moment sides admit derivative bubbles.
    pub fn from_problem(problem: &PlateProblem) -> Self {
        let mut out = Self::default();
        for side in Side::ALL {
            let c = problem.side(side);
            out.value[side.index()] = matches!(c.transverse, Transverse::Shear(_));
            out.derivative[side.index()] = matches!(c.rotational, Rotational::Moment(_));
        }
        out
    }
}

/// Bernstein index pairs `(i, j)` of the bubbles of each active element.
#[derive(Debug, Clone, PartialEq)]
pub struct BubbleSpace {
    /// Bubble degree `q = p + 1`.
    pub degree: usize,
    pub elements: Vec<(ElementId, Vec<(usize, usize)>)>,
}

impl BubbleSpace {
    pub fn num_bubbles(&self) -> usize {
        self.elements.iter().map(|(_, b)| b.len()).sum()
    }

    pub fn on_level(&self, level: usize) -> impl Iterator<Item = &(ElementId, Vec<(usize, usize)>)> {
        self.elements.iter().filter(move |(e, _)| e.level == level)
    }
}

/// Admissible 1D Bernstein indices along one direction of an element.
fn direction_indices(q: usize, low: Option<Side>, high: Option<Side>, neumann: &NeumannSides) -> Vec<usize> {
    let mut out = Vec::new();
    if let Some(s) = low {
        if neumann.value[s.index()] {
            out.push(0);
        }
        if neumann.derivative[s.index()] {
            out.push(1);
        }
    }
    out.extend(2..=q - 2);
    if let Some(s) = high {
        if neumann.derivative[s.index()] {
            out.push(q - 1);
        }
        if neumann.value[s.index()] {
            out.push(q);
        }
    }
    out
}

/// Bubble indices of one element, `i` fastest.
pub fn element_bubbles(
    mesh: &HierarchicalMesh,
    e: ElementId,
    q: usize,
    neumann: &NeumannSides,
) -> Vec<(usize, usize)> {
    let sides = mesh.boundary_sides(e);
    let on = |s: Side| sides.contains(&s).then_some(s);
    let xs = direction_indices(q, on(Side::Left), on(Side::Right), neumann);
    let ys = direction_indices(q, on(Side::Bottom), on(Side::Top), neumann);
    let mut out = Vec::with_capacity(xs.len() * ys.len());
    for &j in &ys {
        for &i in &xs {
            out.push((i, j));
        }
    }
    out
}

/// Bubble space over all active elements for degree-`p` splines.
pub fn build_bubble_space(
    mesh: &HierarchicalMesh,
    p: usize,
    neumann: &NeumannSides,
) -> Result<BubbleSpace, EstimateError> {
    if p < 3 {
        return Err(EstimateError::UnsupportedDegree(p));
    }
    let q = p + 1;
    let elements = mesh
        .active_elements()
        .into_iter()
        .map(|e| (e, element_bubbles(mesh, e, q, neumann)))
        .collect();
    Ok(BubbleSpace { degree: q, elements })
}

/// Physical values, gradients and Hessians of an element's bubbles at
/// parametric points of the element, stored point-major.
#[derive(Debug, Clone)]
pub struct BubbleValues {
    pub n_bubbles: usize,
    pub pushforwards: Vec<Pushforward>,
    pub values: Vec<f64>,
    pub grads: Vec<[f64; 2]>,
    pub hess: Vec<[f64; 3]>,
}

impl BubbleValues {
    pub fn at_points(
        mesh: &HierarchicalMesh,
        geo: &GeometryMap,
        e: ElementId,
        indices: &[(usize, usize)],
        q: usize,
        params: &[[f64; 2]],
    ) -> Result<Self, GeometryError> {
        let [x0, y0, x1, y1] = mesh.bounds(e);
        let (hx, hy) = (x1 - x0, y1 - y0);
        let nb = indices.len();
        let mut pushforwards = Vec::with_capacity(params.len());
        let mut values = Vec::with_capacity(params.len() * nb);
        let mut grads = Vec::with_capacity(params.len() * nb);
        let mut hess = Vec::with_capacity(params.len() * nb);
        for xi in params {
            let t = ((xi[0] - x0) / hx).clamp(0.0, 1.0);
            let s = ((xi[1] - y0) / hy).clamp(0.0, 1.0);
            let bx = eval_bernstein_ders(q, t, 2).expect("bubble degree >= 4");
            let by = eval_bernstein_ders(q, s, 2).expect("bubble degree >= 4");
            let pf = if geo.is_identity() {
                Pushforward::identity(*xi)
            } else {
                pushforward2(geo, *xi)?
            };
            for &(i, j) in indices {
                let (u, v) = (&bx.ders, &by.ders);
                values.push(u[0][i] * v[0][j]);
                let g = [u[1][i] * v[0][j] / hx, u[0][i] * v[1][j] / hy];
                let h = [
                    u[2][i] * v[0][j] / (hx * hx),
                    u[1][i] * v[1][j] / (hx * hy),
                    u[0][i] * v[2][j] / (hy * hy),
                ];
                let (g, h) = pf.apply(g, h);
                grads.push(g);
                hess.push(h);
            }
            pushforwards.push(pf);
        }
        Ok(Self {
            n_bubbles: nb,
            pushforwards,
            values,
            grads,
            hess,
        })
    }

    pub fn value(&self, q: usize, b: usize) -> f64 {
        self.values[q * self.n_bubbles + b]
    }

    pub fn grad(&self, q: usize, b: usize) -> [f64; 2] {
        self.grads[q * self.n_bubbles + b]
    }

    pub fn hessian(&self, q: usize, b: usize) -> [f64; 3] {
        self.hess[q * self.n_bubbles + b]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interior_counts() {
        let mesh = HierarchicalMesh::new(4, 3).unwrap();
        let b = element_bubbles(&mesh, ElementId::new(0, 1, 1), 4, &NeumannSides::none());
        assert_eq!(b, vec![(2, 2)]);
        let mesh = HierarchicalMesh::new(4, 5).unwrap();
        assert_eq!(element_bubbles(&mesh, ElementId::new(0, 1, 2), 6, &NeumannSides::none()).len(), 9);
    }

    #[test]
    fn moment_side_adds_derivative_bubbles() {
        let mesh = HierarchicalMesh::new(4, 4).unwrap();
        let mut n = NeumannSides::none();
        n.derivative[Side::Bottom.index()] = true;
        let b = element_bubbles(&mesh, ElementId::new(0, 1, 0), 5, &n);
        assert_eq!(b.len(), 6);
        assert_eq!(b.iter().filter(|(_, j)| *j == 1).count(), 2);
        n.value[Side::Bottom.index()] = true;
        let b = element_bubbles(&mesh, ElementId::new(0, 1, 0), 5, &n);
        assert_eq!(b.len(), 8);
    }

    #[test]
    fn degree_two_is_rejected() {
        let mesh = HierarchicalMesh::new(2, 3).unwrap();
        assert!(matches!(
            build_bubble_space(&mesh, 2, &NeumannSides::none()),
            Err(EstimateError::UnsupportedDegree(2))
        ));
    }
}
