//! Element-local residual problems on the bubble spaces.

use faer::linalg::solvers::Solve;
use faer::{Mat, Side as FaerSide};

use super::bubbles::{build_bubble_space, BubbleSpace, BubbleValues, NeumannSides};
use super::{ElementEstimate, EstimateError};
use crate::geometry::GeometryMap;
use crate::hierarchy::{ElementId, HierarchicalSpace};
use crate::par::{try_map_collect, Execution};
use crate::plate::element::{element_rule, load_rule};
use crate::plate::{edge_rule, BoundaryValue, ElementValues, LoadQuadrature, PlateProblem, Rotational, Transverse};
use crate::quadrature::GaussRule;

/// Relative residual required of every block solve.
pub const BLOCK_TOL: f64 = 1e-12;

/// Dense bubble system of one element: `A e = r` with `A` the energy
/// products of the bubbles and `r = F(b) - a(u_h, b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BubbleBlock {
    pub element: ElementId,
    pub indices: Vec<(usize, usize)>,
    /// Row-major `n x n`.
    pub a: Vec<f64>,
    pub r: Vec<f64>,
    pub e: Vec<f64>,
}

impl BubbleBlock {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// `e^T A e`
    pub fn energy(&self) -> f64 {
        let n = self.len();
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                s += self.e[i] * self.a[i * n + j] * self.e[j];
            }
        }
        s.max(0.0)
    }
}

/// Builds the block of one element.
pub fn assemble_block(
    space: &HierarchicalSpace,
    geo: &GeometryMap,
    problem: &PlateProblem,
    u_h: &[f64],
    element: ElementId,
    indices: &[(usize, usize)],
    q: usize,
) -> Result<BubbleBlock, EstimateError> {
    let n = indices.len();
    let mesh = &space.mesh;
    let rule = GaussRule::for_degree(q);
    let (params, pweights) = element_rule(space, element, &rule);
    let bv = BubbleValues::at_points(mesh, geo, element, indices, q, &params)?;
    let uv = ElementValues::at_points(space, geo, element, params.clone())?;

    let graded = problem.load_quadrature != LoadQuadrature::Standard && !mesh.boundary_sides(element).is_empty();
    let mut a = vec![0.0; n * n];
    let mut r = vec![0.0; n];
    if graded {
        let (lp, lw) = load_rule(space, element, &rule, problem.load_quadrature);
        let lv = BubbleValues::at_points(mesh, geo, element, indices, q, &lp)?;
        for (k, pw) in lw.iter().enumerate() {
            let pf = &lv.pushforwards[k];
            let g = problem.load_at(pf.point) * pw * pf.det;
            for (i, ri) in r.iter_mut().enumerate() {
                *ri += g * lv.value(k, i);
            }
        }
    }
    for (k, pw) in pweights.iter().enumerate() {
        let w = pw * bv.pushforwards[k].det;
        let x = bv.pushforwards[k].point;
        let (_, _, hu) = uv.field_at(k, u_h);
        let g = if graded { 0.0 } else { problem.load_at(x) };
        for i in 0..n {
            let hi = bv.hessian(k, i);
            r[i] += w * (g * bv.value(k, i) - problem.energy_density(&hu, &hi));
            for j in i..n {
                a[i * n + j] += w * problem.energy_density(&hi, &bv.hessian(k, j));
            }
        }
    }
    for i in 0..n {
        for j in 0..i {
            a[i * n + j] = a[j * n + i];
        }
    }

    for side in mesh.boundary_sides(element) {
        let c = problem.side(side);
        let moment = match &c.rotational {
            Rotational::Moment(BoundaryValue::Function(m)) => Some(m),
            _ => None,
        };
        let shear = match &c.transverse {
            Transverse::Shear(BoundaryValue::Function(s)) => Some(s),
            _ => None,
        };
        if moment.is_none() && shear.is_none() {
            continue;
        }
        let pts = edge_rule(space, geo, element, side, &rule)?;
        let xis: Vec<[f64; 2]> = pts.iter().map(|p| p.xi).collect();
        let eb = BubbleValues::at_points(mesh, geo, element, indices, q, &xis)?;
        for (k, ep) in pts.iter().enumerate() {
            let m = moment.map_or(0.0, |f| f(ep.point));
            let s = shear.map_or(0.0, |f| f(ep.point));
            for (i, ri) in r.iter_mut().enumerate() {
                let gb = eb.grad(k, i);
                let dn = gb[0] * ep.normal[0] + gb[1] * ep.normal[1];
                *ri += ep.weight * (m * dn - s * eb.value(k, i));
            }
        }
    }

    for pl in &problem.point_loads {
        let Ok(xi) = geo.inverse(pl.location) else { continue };
        if mesh.locate(xi) != Some(element) {
            continue;
        }
        let pb = BubbleValues::at_points(mesh, geo, element, indices, q, &[xi])?;
        for (i, ri) in r.iter_mut().enumerate() {
            *ri += pl.magnitude * pb.value(0, i);
        }
    }

    Ok(BubbleBlock {
        element,
        indices: indices.to_vec(),
        a,
        r,
        e: vec![0.0; n],
    })
}

/// Blocks for every element of the bubble space, in its order.
pub fn assemble_blocks(
    bubbles: &BubbleSpace,
    u_h: &[f64],
    space: &HierarchicalSpace,
    geo: &GeometryMap,
    problem: &PlateProblem,
    exec: Execution,
) -> Result<Vec<BubbleBlock>, EstimateError> {
    try_map_collect(exec, &bubbles.elements, |(e, idx)| {
        assemble_block(space, geo, problem, u_h, *e, idx, bubbles.degree)
    })
}

/// Dense Cholesky solve of one block with a residual check.
pub fn solve_block(block: &mut BubbleBlock) -> Result<(), EstimateError> {
    let n = block.len();
    if n == 0 {
        return Ok(());
    }
    let rnorm = block.r.iter().map(|v| v * v).sum::<f64>().sqrt();
    if rnorm == 0.0 {
        block.e = vec![0.0; n];
        return Ok(());
    }
    let a = Mat::<f64>::from_fn(n, n, |i, j| block.a[i * n + j]);
    let llt = a
        .llt(FaerSide::Lower)
        .map_err(|_| EstimateError::BlockNotSpd { element: block.element })?;
    let mut e = vec![0.0; n];
    let mut res = block.r.clone();
    for _ in 0..3 {
        let mut rhs = Mat::<f64>::from_fn(n, 1, |i, _| res[i]);
        llt.solve_in_place(&mut rhs);
        for (i, ei) in e.iter_mut().enumerate() {
            *ei += rhs[(i, 0)];
        }
        for (i, ri) in res.iter_mut().enumerate() {
            *ri = block.r[i] - (0..n).map(|j| block.a[i * n + j] * e[j]).sum::<f64>();
        }
        if res.iter().map(|v| v * v).sum::<f64>().sqrt() <= BLOCK_TOL * rnorm {
            break;
        }
    }
    if e.iter().any(|v| !v.is_finite()) {
        return Err(EstimateError::BlockNotSpd { element: block.element });
    }
    block.e = e;
    Ok(())
}

pub fn solve_blocks(blocks: &mut [BubbleBlock]) -> Result<(), EstimateError> {
    blocks.iter_mut().try_for_each(solve_block)
}

/// `η = C_a sqrt(e^T A e)` per block.
pub fn eta_elements(blocks: &[BubbleBlock], ca: f64) -> Vec<ElementEstimate> {
    blocks
        .iter()
        .map(|b| ElementEstimate {
            element: b.element,
            eta: ca * b.energy().sqrt(),
        })
        .collect()
}

/// Element indicators and their root-sum-square.
#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub elements: Vec<ElementEstimate>,
    pub eta_total: f64,
}

impl Estimate {
    pub fn from_elements(elements: Vec<ElementEstimate>) -> Self {
        let eta_total = elements.iter().map(|e| e.eta * e.eta).sum::<f64>().sqrt();
        Self { elements, eta_total }
    }

    pub fn max(&self) -> f64 {
        self.elements.iter().map(|e| e.eta).fold(0.0, f64::max)
    }
}

/// Bubble estimator, processed level by level. Elements of a level are
/// independent and run through `exec`.
pub fn estimate(
    u_h: &[f64],
    space: &HierarchicalSpace,
    geo: &GeometryMap,
    problem: &PlateProblem,
    ca: f64,
    exec: Execution,
) -> Result<Estimate, EstimateError> {
    let bubbles = build_bubble_space(&space.mesh, space.degree(), &NeumannSides::from_problem(problem))?;
    let mut out = Vec::with_capacity(bubbles.elements.len());
    for level in 0..space.mesh.num_levels() {
        let items: Vec<_> = bubbles.on_level(level).collect();
        let etas = try_map_collect(exec, &items, |(e, idx)| -> Result<ElementEstimate, EstimateError> {
            let mut block = assemble_block(space, geo, problem, u_h, *e, idx, bubbles.degree)?;
            solve_block(&mut block)?;
            Ok(ElementEstimate {
                element: *e,
                eta: ca * block.energy().sqrt(),
            })
        })?;
        out.extend(etas);
    }
    Ok(Estimate::from_elements(out))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_by_one_block() {
        let mut b = BubbleBlock {
            element: ElementId::new(0, 0, 0),
            indices: vec![(2, 2)],
            a: vec![4.0],
            r: vec![2.0],
            e: vec![0.0],
        };
        solve_block(&mut b).unwrap();
        assert_eq!(b.e, vec![0.5]);
        assert_eq!(eta_elements(&[b.clone()], 3.0)[0].eta, 3.0 * 1.0f64.sqrt());
        b.r = vec![0.0];
        solve_block(&mut b).unwrap();
        assert_eq!(b.e, vec![0.0]);
        assert_eq!(eta_elements(&[b], 3.0)[0].eta, 0.0);
    }

    #[test]
    fn indefinite_block_is_reported() {
        let mut b = BubbleBlock {
            element: ElementId::new(0, 0, 0),
            indices: vec![(2, 2), (2, 3)],
            a: vec![1.0, 2.0, 2.0, 1.0],
            r: vec![1.0, 1.0],
            e: vec![0.0; 2],
        };
        assert!(matches!(solve_block(&mut b), Err(EstimateError::BlockNotSpd { .. })));
    }
}
