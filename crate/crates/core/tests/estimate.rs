mod common;

use std::collections::BTreeSet;

use common::{block_equivalence_error, graded_space, max_interior_trace, solve, SEQ};
use hbplate::bench::BenchmarkSpec;
use hbplate::estimate::{
    assemble_block, assemble_blocks, build_bubble_space, estimate, eta_elements, residual_estimator, solve_blocks,
    BubbleValues, NeumannSides,
};
use hbplate::geometry::GeometryMap;
use hbplate::hierarchy::{ElementId, HierarchicalSpace, Side};
use hbplate::plate::{energy_norm, h2_seminorm_error, PlateProblem};

#[test]
fn spline_exact_solution_has_zero_indicators() {
    let spec = BenchmarkSpec::quartic();
    let exact = spec.exact.clone().unwrap();
    for p in 3..=5 {
        for space in [HierarchicalSpace::init(3, p).unwrap(), graded_space(p)] {
            let geo = GeometryMap::Identity;
            let u = solve(&space, &geo, &spec.problem);
            let err = h2_seminorm_error(&space, &geo, &u, exact.hessian.as_ref(), SEQ).unwrap();
            assert!(err <= 1e-8, "p={p}: error {err:e}");
            let norm = energy_norm(&space, &geo, &spec.problem, &u, SEQ).unwrap();
            let bubble = estimate(&u, &space, &geo, &spec.problem, 3.0, SEQ).unwrap();
            assert!(bubble.max() <= 1e-8 * norm, "p={p}: bubble {:e}", bubble.max());
            let residual = residual_estimator(&u, &space, &geo, &spec.problem, SEQ).unwrap();
            assert!(residual.max() <= 1e-8 * norm, "p={p}: residual {:e}", residual.max());

            let bubbles = build_bubble_space(&space.mesh, p, &NeumannSides::from_problem(&spec.problem)).unwrap();
            let blocks = assemble_blocks(&bubbles, &u, &space, &geo, &spec.problem, SEQ).unwrap();
            for b in &blocks {
                let r = b.r.iter().map(|v| v * v).sum::<f64>().sqrt();
                assert!(r <= 1e-9, "p={p}: |r| = {r:e}");
            }
        }
    }
}

#[test]
fn interior_bubbles_have_vanishing_trace() {
    let maps = [
        GeometryMap::Identity,
        GeometryMap::bilinear([[0.0, 0.0], [1.2, 0.1], [1.1, 0.9], [-0.1, 1.0]]),
    ];
    for p in 3..=5 {
        for geo in &maps {
            let worst = max_interior_trace(&graded_space(p), geo);
            assert!(worst <= 1e-12, "p={p}: {worst:e}");
        }
    }
}

#[test]
fn boundary_bubbles_keep_the_deflection_constraint() {
    // moment sides only add derivative-active bubbles, which still vanish on the side
    let problem = BenchmarkSpec::smooth().problem;
    let space = HierarchicalSpace::init(3, 4).unwrap();
    let bubbles = build_bubble_space(&space.mesh, 4, &NeumannSides::from_problem(&problem)).unwrap();
    let geo = GeometryMap::Identity;
    for (e, idx) in &bubbles.elements {
        let [x0, y0, x1, y1] = space.mesh.bounds(*e);
        for side in space.mesh.boundary_sides(*e) {
            let pts: Vec<[f64; 2]> = (0..=10)
                .map(|k| {
                    let t = k as f64 / 10.0;
                    match side {
                        Side::Bottom => [x0 + t * (x1 - x0), y0],
                        Side::Top => [x0 + t * (x1 - x0), y1],
                        Side::Left => [x0, y0 + t * (y1 - y0)],
                        Side::Right => [x1, y0 + t * (y1 - y0)],
                    }
                })
                .collect();
            let bv = BubbleValues::at_points(&space.mesh, &geo, *e, idx, 5, &pts).unwrap();
            for q in 0..pts.len() {
                for b in 0..idx.len() {
                    assert!(bv.value(q, b).abs() <= 1e-12);
                }
            }
        }
    }
    assert!(bubbles.num_bubbles() > 9 * 4);
}

#[test]
fn blockwise_solution_matches_global_bubble_system() {
    let spec = BenchmarkSpec::smooth();
    for p in [3, 4] {
        let space = graded_space(p);
        let u = solve(&space, &GeometryMap::Identity, &spec.problem);
        let err = block_equivalence_error(&space, &spec.problem, &u);
        assert!(err <= 1e-12, "p={p}: {err:e}");
    }
}

#[test]
fn single_bubble_block_energy() {
    // ∫ |H b|² of B_2^4(t) B_2^4(s) on an element of width h: (2 I2 I0 + 2 I1²) / h²
    // with I0 = 2/35, I1 = 24/35, I2 = 144/5
    let space = HierarchicalSpace::init(4, 3).unwrap();
    let problem = PlateProblem::new(hbplate::plate::SideCondition::simply_supported());
    let u = vec![0.0; space.num_dofs()];
    let b = assemble_block(&space, &GeometryMap::Identity, &problem, &u, ElementId::new(0, 1, 2), &[(2, 2)], 4).unwrap();
    let exact = 5184.0 / 1225.0 * 16.0;
    assert!((b.a[0] - exact).abs() <= 1e-12 * exact, "{} vs {exact}", b.a[0]);
}

#[test]
fn load_enters_linearly() {
    let space = graded_space(3);
    let u = vec![0.0; space.num_dofs()];
    let geo = GeometryMap::Identity;
    let g = |x: [f64; 2]| 1.0 + x[0] * x[1];
    let p1 = PlateProblem::new(hbplate::plate::SideCondition::clamped()).with_load(g);
    let p2 = PlateProblem::new(hbplate::plate::SideCondition::clamped()).with_load(move |x| 2.0 * g(x));
    let bubbles = build_bubble_space(&space.mesh, 3, &NeumannSides::from_problem(&p1)).unwrap();
    let b1 = assemble_blocks(&bubbles, &u, &space, &geo, &p1, SEQ).unwrap();
    let b2 = assemble_blocks(&bubbles, &u, &space, &geo, &p2, SEQ).unwrap();
    for (x, y) in b1.iter().zip(&b2) {
        for (r1, r2) in x.r.iter().zip(&y.r) {
            assert!((2.0 * r1 - r2).abs() <= 1e-14 * r2.abs().max(1.0));
        }
    }
}

#[test]
fn indicators_scale_with_the_constant() {
    let spec = BenchmarkSpec::smooth();
    let space = graded_space(4);
    let geo = GeometryMap::Identity;
    let u = solve(&space, &geo, &spec.problem);
    let e3 = estimate(&u, &space, &geo, &spec.problem, 3.0, SEQ).unwrap();
    let e6 = estimate(&u, &space, &geo, &spec.problem, 6.0, SEQ).unwrap();
    for (a, b) in e3.elements.iter().zip(&e6.elements) {
        assert_eq!(a.element, b.element);
        assert_eq!(2.0 * a.eta, b.eta);
    }
}

#[test]
fn indicators_do_not_depend_on_processing_order() {
    let spec = BenchmarkSpec::smooth();
    let space = graded_space(3);
    let geo = GeometryMap::Identity;
    let u = solve(&space, &geo, &spec.problem);
    let levelwise = estimate(&u, &space, &geo, &spec.problem, 3.0, SEQ).unwrap();

    let mut bubbles = build_bubble_space(&space.mesh, 3, &NeumannSides::from_problem(&spec.problem)).unwrap();
    bubbles.elements.reverse();
    let mut blocks = assemble_blocks(&bubbles, &u, &space, &geo, &spec.problem, SEQ).unwrap();
    solve_blocks(&mut blocks).unwrap();
    let reversed = eta_elements(&blocks, 3.0);

    let elements: BTreeSet<ElementId> = levelwise.elements.iter().map(|e| e.element).collect();
    assert_eq!(elements.len(), reversed.len());
    for r in &reversed {
        let l = levelwise.elements.iter().find(|e| e.element == r.element).unwrap();
        assert_eq!(l.eta, r.eta);
    }
}

#[test]
fn estimate_decreases_under_uniform_refinement() {
    let spec = BenchmarkSpec::smooth();
    let geo = GeometryMap::Identity;
    let mut space = HierarchicalSpace::init(4, 3).unwrap();
    let mut last = f64::INFINITY;
    for _ in 0..3 {
        let u = solve(&space, &geo, &spec.problem);
        let eta = estimate(&u, &space, &geo, &spec.problem, 3.0, SEQ).unwrap().eta_total;
        assert!(eta < last);
        last = eta;
        space = space.refine_uniform().unwrap();
    }
}
