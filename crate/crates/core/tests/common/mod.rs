#![allow(dead_code)]

use faer::linalg::solvers::Solve;
use faer::Mat;
use hbplate::estimate::{assemble_blocks, build_bubble_space, solve_blocks, BubbleValues, NeumannSides};
use hbplate::geometry::GeometryMap;
use hbplate::hierarchy::{ElementId, HierarchicalSpace};
use hbplate::par::Execution;
use hbplate::plate::{apply_dirichlet, assemble_system, PlateProblem};
use hbplate::quadrature::GaussRule;
use hbplate::spline::eval_bernstein_ders;

pub const SEQ: Execution = Execution::Sequential;

pub fn solve(space: &HierarchicalSpace, geo: &GeometryMap, problem: &PlateProblem) -> Vec<f64> {
    let mut sys = assemble_system(space, geo, problem, SEQ).unwrap();
    apply_dirichlet(&mut sys, space, geo, problem).unwrap();
    sys.solve().unwrap().coefficients
}

/// 4x4 mesh with two refined level-0 cells and one refined level-1 cell.
pub fn graded_space(p: usize) -> HierarchicalSpace {
    let space = HierarchicalSpace::init(4, p).unwrap();
    let space = space
        .refine(&[ElementId::new(0, 0, 0), ElementId::new(0, 1, 0)].into_iter().collect(), 2)
        .unwrap();
    space.refine(&[ElementId::new(1, 0, 0)].into_iter().collect(), 2).unwrap()
}

/// Largest `|b|` or `|∇b|` of the interior bubbles at 20 points on the
/// boundary of each element.
pub fn max_interior_trace(space: &HierarchicalSpace, geo: &GeometryMap) -> f64 {
    let p = space.degree();
    let bubbles = build_bubble_space(&space.mesh, p, &NeumannSides::none()).unwrap();
    let mut worst = 0.0f64;
    for (e, idx) in &bubbles.elements {
        let [x0, y0, x1, y1] = space.mesh.bounds(*e);
        let mut pts = Vec::with_capacity(20);
        for k in 0..5 {
            let t = k as f64 / 5.0;
            pts.push([x0 + t * (x1 - x0), y0]);
            pts.push([x1, y0 + t * (y1 - y0)]);
            pts.push([x1 - t * (x1 - x0), y1]);
            pts.push([x0, y1 - t * (y1 - y0)]);
        }
        let bv = BubbleValues::at_points(&space.mesh, geo, *e, idx, p + 1, &pts).unwrap();
        for q in 0..pts.len() {
            for b in 0..idx.len() {
                let g = bv.grad(q, b);
                worst = worst.max(bv.value(q, b).abs()).max(g[0].abs()).max(g[1].abs());
            }
        }
    }
    worst
}

/// Degree-q Bernstein bubble `(i, j)` of element `e` evaluated anywhere
/// (zero outside `e`), physical Hessian on the identity map.
fn bubble_hessian(space: &HierarchicalSpace, e: ElementId, ij: (usize, usize), q: usize, x: [f64; 2]) -> [f64; 3] {
    let [x0, y0, x1, y1] = space.mesh.bounds(e);
    if x[0] < x0 || x[0] > x1 || x[1] < y0 || x[1] > y1 {
        return [0.0; 3];
    }
    let (hx, hy) = (x1 - x0, y1 - y0);
    let bx = eval_bernstein_ders(q, (x[0] - x0) / hx, 2).unwrap();
    let by = eval_bernstein_ders(q, (x[1] - y0) / hy, 2).unwrap();
    let (i, j) = ij;
    [
        bx.der(2)[i] * by.der(0)[j] / (hx * hx),
        bx.der(1)[i] * by.der(1)[j] / (hx * hy),
        bx.der(0)[i] * by.der(2)[j] / (hy * hy),
    ]
}

/// Largest difference, relative to the largest coefficient, between the
/// block-wise bubble solution and the solution of one global system over all
/// bubbles, integrated cell by cell on the identity map with `ν = 0`.
pub fn block_equivalence_error(space: &HierarchicalSpace, problem: &PlateProblem, u: &[f64]) -> f64 {
    let geo = GeometryMap::Identity;
    let p = space.degree();
    let bubbles = build_bubble_space(&space.mesh, p, &NeumannSides::from_problem(problem)).unwrap();
    let mut blocks = assemble_blocks(&bubbles, u, space, &geo, problem, SEQ).unwrap();
    solve_blocks(&mut blocks).unwrap();

    let q = p + 1;
    let all: Vec<(ElementId, (usize, usize))> = bubbles
        .elements
        .iter()
        .flat_map(|(e, idx)| idx.iter().map(move |ij| (*e, *ij)))
        .collect();
    let n = all.len();
    let rule = GaussRule::new(q + 2);
    let mut a = Mat::<f64>::zeros(n, n);
    for cell in space.mesh.active_elements() {
        let [x0, y0, x1, y1] = space.mesh.bounds(cell);
        for (ti, wi) in rule.points.iter().zip(&rule.weights) {
            for (tj, wj) in rule.points.iter().zip(&rule.weights) {
                let x = [x0 + ti * (x1 - x0), y0 + tj * (y1 - y0)];
                let w = wi * wj * (x1 - x0) * (y1 - y0);
                let h: Vec<[f64; 3]> = all.iter().map(|(e, ij)| bubble_hessian(space, *e, *ij, q, x)).collect();
                for r in 0..n {
                    if h[r] == [0.0; 3] {
                        continue;
                    }
                    for c in 0..n {
                        a[(r, c)] += w * (h[r][0] * h[c][0] + 2.0 * h[r][1] * h[c][1] + h[r][2] * h[c][2]);
                    }
                }
            }
        }
    }
    let rhs: Vec<f64> = blocks.iter().flat_map(|b| b.r.iter().copied()).collect();
    let mut x = Mat::<f64>::from_fn(n, 1, |i, _| rhs[i]);
    a.partial_piv_lu().solve_in_place(&mut x);

    let blockwise: Vec<f64> = blocks.iter().flat_map(|b| b.e.iter().copied()).collect();
    let scale = blockwise.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    blockwise
        .iter()
        .enumerate()
        .map(|(k, v)| (v - x[(k, 0)]).abs() / scale)
        .fold(0.0, f64::max)
}
