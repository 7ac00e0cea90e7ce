//! Evaluation of the hierarchical functions acting on one element.

use crate::geometry::{pushforward2, GeometryError, GeometryMap, Pushforward};
use super::problem::LoadQuadrature;
use crate::hierarchy::{ElementId, HierarchicalSpace, LocalFunction, Side};
use crate::quadrature::GaussRule;
use crate::spline::BasisEval;

/// Physical values, gradients and Hessians of every function acting on an
/// element, at a set of points inside (or on the boundary of) the element.
///
/// Tables are stored point-major: entry `q * n_functions + f`.
#[derive(Debug, Clone)]
pub struct ElementValues {
    pub element: ElementId,
    pub functions: Vec<LocalFunction>,
    /// Parametric coordinates.
    pub params: Vec<[f64; 2]>,
    pub pushforwards: Vec<Pushforward>,
    /// Physical quadrature weights; empty unless built from a rule.
    pub weights: Vec<f64>,
    pub values: Vec<f64>,
    pub grads: Vec<[f64; 2]>,
    pub hess: Vec<[f64; 3]>,
}

/// Univariate derivative tables of every level up to the element's own, one
/// per point, taken in the ancestor span so that boundary points get the
/// one-sided limit from this element.
/// Univariate tables per level, left empty for levels without functions on
/// `e`.
pub(crate) fn level_tables(
    space: &HierarchicalSpace,
    e: ElementId,
    functions: &[LocalFunction],
    params: &[[f64; 2]],
    max_der: usize,
) -> Vec<(Vec<BasisEval>, Vec<BasisEval>)> {
    let p = space.degree();
    let mut used = vec![false; e.level + 1];
    for f in functions {
        used[f.function.level] = true;
    }
    (0..=e.level)
        .map(|k| {
            if !used[k] {
                return (Vec::new(), Vec::new());
            }
            let kv = space.mesh.knots(k);
            let anc = e.ancestor(k);
            let xs = params
                .iter()
                .map(|xi| kv.eval_ders_in_span(anc.i + p, xi[0], max_der))
                .collect();
            let ys = params
                .iter()
                .map(|xi| kv.eval_ders_in_span(anc.j + p, xi[1], max_der))
                .collect();
            (xs, ys)
        })
        .collect()
}

/// Parametric points and weights of the tensor rule mapped onto element `e`.
pub fn element_rule(space: &HierarchicalSpace, e: ElementId, rule: &GaussRule) -> (Vec<[f64; 2]>, Vec<f64>) {
    let [x0, y0, x1, y1] = space.mesh.bounds(e);
    let (pts, wts) = rule.tensor();
    let area = (x1 - x0) * (y1 - y0);
    let params = pts
        .iter()
        .map(|[t, s]| [x0 + t * (x1 - x0), y0 + s * (y1 - y0)])
        .collect();
    let weights = wts.iter().map(|w| w * area).collect();
    (params, weights)
}

/// 1D composite rule on `[0, 1]`, graded towards the flagged ends.
fn graded_1d(rule: &GaussRule, low: bool, high: bool, layers: usize) -> (Vec<f64>, Vec<f64>) {
    let mut cuts = vec![0.0, 1.0];
    let grade = |cuts: &mut Vec<f64>, from: f64, to: f64| {
        // pieces [from, from + d 2^-k] shrinking towards `from`
        let d = to - from;
        for k in 1..=layers {
            cuts.push(from + d * 0.5f64.powi(k as i32));
        }
    };
    match (low, high) {
        (true, true) => {
            cuts.push(0.5);
            grade(&mut cuts, 0.0, 0.5);
            grade(&mut cuts, 1.0, 0.5);
        }
        (true, false) => grade(&mut cuts, 0.0, 1.0),
        (false, true) => grade(&mut cuts, 1.0, 0.0),
        (false, false) => {}
    }
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.dedup();
    let mut pts = Vec::new();
    let mut wts = Vec::new();
    for w in cuts.windows(2) {
        let len = w[1] - w[0];
        for (t, wt) in rule.points.iter().zip(&rule.weights) {
            pts.push(w[0] + t * len);
            wts.push(wt * len);
        }
    }
    (pts, wts)
}

/// Parametric points and weights for the load integral on element `e`.
pub fn load_rule(
    space: &HierarchicalSpace,
    e: ElementId,
    rule: &GaussRule,
    quad: LoadQuadrature,
) -> (Vec<[f64; 2]>, Vec<f64>) {
    let layers = match quad {
        LoadQuadrature::BoundaryGraded { layers } if !space.mesh.boundary_sides(e).is_empty() => layers,
        _ => return element_rule(space, e, rule),
    };
    let sides = space.mesh.boundary_sides(e);
    let (px, wx) = graded_1d(rule, sides.contains(&Side::Left), sides.contains(&Side::Right), layers);
    let (py, wy) = graded_1d(rule, sides.contains(&Side::Bottom), sides.contains(&Side::Top), layers);
    let [x0, y0, x1, y1] = space.mesh.bounds(e);
    let mut params = Vec::with_capacity(px.len() * py.len());
    let mut weights = Vec::with_capacity(px.len() * py.len());
    for (s, ws) in py.iter().zip(&wy) {
        for (t, wt) in px.iter().zip(&wx) {
            params.push([x0 + t * (x1 - x0), y0 + s * (y1 - y0)]);
            weights.push(wt * ws * (x1 - x0) * (y1 - y0));
        }
    }
    (params, weights)
}

impl ElementValues {
    /// Tables at given parametric points with parametric weights, which are
    /// turned into physical ones.
    pub fn with_rule(
        space: &HierarchicalSpace,
        geo: &GeometryMap,
        e: ElementId,
        params: Vec<[f64; 2]>,
        weights: Vec<f64>,
    ) -> Result<Self, GeometryError> {
        Self::build(space, geo, e, params, Some(weights))
    }

    /// Tables at arbitrary parametric points of the element.
    pub fn at_points(
        space: &HierarchicalSpace,
        geo: &GeometryMap,
        e: ElementId,
        params: Vec<[f64; 2]>,
    ) -> Result<Self, GeometryError> {
        Self::build(space, geo, e, params, None)
    }

    /// Tables at the element's `(p+2)^2` Gauss points, with physical weights.
    pub fn quadrature(
        space: &HierarchicalSpace,
        geo: &GeometryMap,
        e: ElementId,
        rule: &GaussRule,
    ) -> Result<Self, GeometryError> {
        let (params, weights) = element_rule(space, e, rule);
        Self::build(space, geo, e, params, Some(weights))
    }

    fn build(
        space: &HierarchicalSpace,
        geo: &GeometryMap,
        e: ElementId,
        params: Vec<[f64; 2]>,
        param_weights: Option<Vec<f64>>,
    ) -> Result<Self, GeometryError> {
        let functions = space.connectivity(e);
        let tables = level_tables(space, e, &functions, &params, 2);
        let pushforwards = params
            .iter()
            .map(|xi| {
                if geo.is_identity() {
                    Ok(Pushforward::identity(*xi))
                } else {
                    pushforward2(geo, *xi)
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        let weights = param_weights
            .map(|w| w.iter().zip(&pushforwards).map(|(w, pf)| w * pf.det).collect())
            .unwrap_or_default();

        let nf = functions.len();
        let nq = params.len();
        let mut values = Vec::with_capacity(nq * nf);
        let mut grads = Vec::with_capacity(nq * nf);
        let mut hess = Vec::with_capacity(nq * nf);
        for q in 0..nq {
            for lf in &functions {
                let (xs, ys) = &tables[lf.function.level];
                let (a, b) = lf.local;
                let (x, y) = (&xs[q].ders, &ys[q].ders);
                let v = x[0][a] * y[0][b];
                let g = [x[1][a] * y[0][b], x[0][a] * y[1][b]];
                let h = [x[2][a] * y[0][b], x[1][a] * y[1][b], x[0][a] * y[2][b]];
                let (g, h) = pushforwards[q].apply(g, h);
                values.push(v);
                grads.push(g);
                hess.push(h);
            }
        }
        Ok(Self {
            element: e,
            functions,
            params,
            pushforwards,
            weights,
            values,
            grads,
            hess,
        })
    }

    pub fn n_functions(&self) -> usize {
        self.functions.len()
    }

    pub fn n_points(&self) -> usize {
        self.params.len()
    }

    pub fn dofs(&self) -> impl Iterator<Item = usize> + '_ {
        self.functions.iter().map(|f| f.dof)
    }

    pub fn physical_point(&self, q: usize) -> [f64; 2] {
        self.pushforwards[q].point
    }

    pub fn value(&self, q: usize, f: usize) -> f64 {
        self.values[q * self.functions.len() + f]
    }

    pub fn grad(&self, q: usize, f: usize) -> [f64; 2] {
        self.grads[q * self.functions.len() + f]
    }

    pub fn hessian(&self, q: usize, f: usize) -> [f64; 3] {
        self.hess[q * self.functions.len() + f]
    }

    /// `(u, grad u, hess u)` of a field at point `q`.
    pub fn field_at(&self, q: usize, coeffs: &[f64]) -> (f64, [f64; 2], [f64; 3]) {
        let nf = self.functions.len();
        let mut v = 0.0;
        let mut g = [0.0; 2];
        let mut h = [0.0; 3];
        for (f, lf) in self.functions.iter().enumerate() {
            let c = coeffs[lf.dof];
            if c == 0.0 {
                continue;
            }
            let k = q * nf + f;
            v += c * self.values[k];
            g[0] += c * self.grads[k][0];
            g[1] += c * self.grads[k][1];
            for r in 0..3 {
                h[r] += c * self.hess[k][r];
            }
        }
        (v, g, h)
    }
}
