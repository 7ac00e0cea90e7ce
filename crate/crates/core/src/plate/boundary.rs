//! Essential boundary conditions.

use std::collections::{BTreeMap, HashMap};

use faer::linalg::solvers::Solve;
use faer::Mat;

use super::assembly::edge_rule;
use super::element::ElementValues;
use super::problem::{BoundaryValue, PlateProblem, Rotational, Transverse};
use super::{AssemblyError, LinearSystem};
use crate::geometry::GeometryMap;
use crate::hierarchy::{FunctionId, HierarchicalSpace, Side};
use crate::quadrature::GaussRule;

const CORNER_TOL: f64 = 1e-8;

/// Distance of a function from `side`, counted in 1D basis indices; layer 0
/// carries the trace, layers 0 and 1 carry the normal derivative.
pub fn layer(space: &HierarchicalSpace, f: FunctionId, side: Side) -> usize {
    let n = space.mesh.num_functions_per_dir(f.level);
    let idx = if side.normal_axis() == 0 { f.i } else { f.j };
    if side.is_high() {
        n - 1 - idx
    } else {
        idx
    }
}

/// Dofs of the functions in a given layer along a side.
pub fn layer_dofs(space: &HierarchicalSpace, side: Side, which: usize) -> Vec<usize> {
    space
        .basis
        .functions()
        .iter()
        .enumerate()
        .filter(|(_, f)| layer(space, **f, side) == which)
        .map(|(d, _)| d)
        .collect()
}

fn side_corners(side: Side) -> [[f64; 2]; 2] {
    match side {
        Side::Bottom => [[0.0, 0.0], [1.0, 0.0]],
        Side::Right => [[1.0, 0.0], [1.0, 1.0]],
        Side::Top => [[0.0, 1.0], [1.0, 1.0]],
        Side::Left => [[0.0, 0.0], [0.0, 1.0]],
    }
}

/// Which trace of the functions is matched along a side.
#[derive(Clone, Copy, PartialEq, Eq)]
enum Trace {
    Value,
    Normal,
}

/// Constrained least-squares fit of the `unknown` dofs so that the trace of
/// the field matches `target` along `side`, given the already fixed values.
/// For the value trace the two side endpoints are matched exactly.
fn fit_side(
    space: &HierarchicalSpace,
    geo: &GeometryMap,
    side: Side,
    unknown: &[usize],
    fixed: &BTreeMap<usize, f64>,
    target: &dyn Fn([f64; 2]) -> f64,
    trace: Trace,
) -> Result<Vec<(usize, f64)>, AssemblyError> {
    let local: HashMap<usize, usize> = unknown.iter().enumerate().map(|(k, d)| (*d, k)).collect();
    let n = unknown.len();
    let rule = GaussRule::new(space.degree() + 3);
    let mut gram = Mat::<f64>::zeros(n, n);
    let mut rhs = vec![0.0; n];
    for e in space.mesh.active_elements() {
        if !space.mesh.boundary_sides(e).contains(&side) {
            continue;
        }
        let pts = edge_rule(space, geo, e, side, &rule)?;
        let tab = ElementValues::at_points(space, geo, e, pts.iter().map(|p| p.xi).collect())?;
        for (q, ep) in pts.iter().enumerate() {
            let s: Vec<f64> = (0..tab.n_functions())
                .map(|a| match trace {
                    Trace::Value => tab.value(q, a),
                    Trace::Normal => {
                        let g = tab.grad(q, a);
                        g[0] * ep.normal[0] + g[1] * ep.normal[1]
                    }
                })
                .collect();
            let mut t = target(ep.point);
            for (a, lf) in tab.functions.iter().enumerate() {
                if let Some(c) = fixed.get(&lf.dof) {
                    t -= c * s[a];
                }
            }
            for (a, la) in tab.functions.iter().enumerate() {
                let Some(&ia) = local.get(&la.dof) else { continue };
                rhs[ia] += ep.weight * s[a] * t;
                for (b, lb) in tab.functions.iter().enumerate() {
                    if let Some(&ib) = local.get(&lb.dof) {
                        gram[(ia, ib)] += ep.weight * s[a] * s[b];
                    }
                }
            }
        }
    }

    let mut rows: Vec<(Vec<f64>, f64)> = Vec::new();
    if trace == Trace::Value {
        for xi in side_corners(side) {
            let e = space
                .mesh
                .locate(xi)
                .ok_or_else(|| AssemblyError::InvalidArgument("corner outside the mesh".into()))?;
            let tab = ElementValues::at_points(space, geo, e, vec![xi])?;
            let x = tab.physical_point(0);
            let mut row = vec![0.0; n];
            let mut t = target(x);
            for (a, lf) in tab.functions.iter().enumerate() {
                let v = tab.value(0, a);
                if let Some(&ia) = local.get(&lf.dof) {
                    row[ia] = v;
                } else if let Some(c) = fixed.get(&lf.dof) {
                    t -= c * v;
                }
            }
            if row.iter().all(|v| v.abs() < 1e-14) {
                if t.abs() > CORNER_TOL * (1.0 + target(x).abs()) {
                    return Err(AssemblyError::BoundaryData(format!(
                        "deflection data on {side:?} disagrees with an adjacent side at {x:?}"
                    )));
                }
            } else {
                rows.push((row, t));
            }
        }
    }

    let m = rows.len();
    let kkt = Mat::<f64>::from_fn(n + m, n + m, |i, j| match (i < n, j < n) {
        (true, true) => gram[(i, j)],
        (true, false) => rows[j - n].0[i],
        (false, true) => rows[i - n].0[j],
        (false, false) => 0.0,
    });
    let mut b = Mat::<f64>::from_fn(n + m, 1, |i, _| if i < n { rhs[i] } else { rows[i - n].1 });
    kkt.partial_piv_lu().solve_in_place(&mut b);
    let out: Vec<(usize, f64)> = unknown.iter().enumerate().map(|(k, d)| (*d, b[(k, 0)])).collect();
    if out.iter().any(|(_, v)| !v.is_finite()) {
        return Err(AssemblyError::BoundaryData(format!("singular trace fit on {side:?}")));
    }
    Ok(out)
}

/// Constrained dof values for every essential condition of the problem.
///
/// Deflection sides are processed first (bottom, right, top, left), then
/// rotation sides. Zero data fixes the affected layer to zero; other data is
/// fitted in the least-squares sense along the side.
pub fn dirichlet_constraints(
    space: &HierarchicalSpace,
    geo: &GeometryMap,
    problem: &PlateProblem,
) -> Result<BTreeMap<usize, f64>, AssemblyError> {
    let mut fixed: BTreeMap<usize, f64> = BTreeMap::new();
    for side in Side::ALL {
        let Transverse::Deflection(data) = &problem.side(side).transverse else { continue };
        let dofs = layer_dofs(space, side, 0);
        let unknown: Vec<usize> = dofs.iter().copied().filter(|d| !fixed.contains_key(d)).collect();
        match data {
            BoundaryValue::Zero => {
                let zero = |_: [f64; 2]| 0.0;
                check_corners(space, geo, side, &fixed, &zero)?;
                fixed.extend(unknown.iter().map(|d| (*d, 0.0)));
            }
            BoundaryValue::Function(f) => {
                let vals = fit_side(space, geo, side, &unknown, &fixed, f.as_ref(), Trace::Value)?;
                fixed.extend(vals);
            }
        }
    }
    for side in Side::ALL {
        let cond = problem.side(side);
        let Rotational::Rotation(data) = &cond.rotational else { continue };
        let Transverse::Deflection(defl) = &cond.transverse else {
            return Err(AssemblyError::BoundaryData(format!(
                "prescribed rotation on {side:?} requires prescribed deflection on the same side"
            )));
        };
        let dofs = layer_dofs(space, side, 1);
        let unknown: Vec<usize> = dofs.iter().copied().filter(|d| !fixed.contains_key(d)).collect();
        if data.is_zero() && defl.is_zero() {
            fixed.extend(unknown.iter().map(|d| (*d, 0.0)));
        } else {
            // -grad u . n = phi
            let target = |x: [f64; 2]| -data.eval(x);
            let vals = fit_side(space, geo, side, &unknown, &fixed, &target, Trace::Normal)?;
            fixed.extend(vals);
        }
    }
    Ok(fixed)
}

fn check_corners(
    space: &HierarchicalSpace,
    geo: &GeometryMap,
    side: Side,
    fixed: &BTreeMap<usize, f64>,
    target: &dyn Fn([f64; 2]) -> f64,
) -> Result<(), AssemblyError> {
    for xi in side_corners(side) {
        let Some(e) = space.mesh.locate(xi) else { continue };
        let tab = ElementValues::at_points(space, geo, e, vec![xi])?;
        let x = tab.physical_point(0);
        let mut known = 0.0;
        for (a, lf) in tab.functions.iter().enumerate() {
            if let Some(c) = fixed.get(&lf.dof) {
                known += c * tab.value(0, a);
            }
        }
        if (known - target(x)).abs() > CORNER_TOL * (1.0 + target(x).abs()) {
            return Err(AssemblyError::BoundaryData(format!(
                "deflection data on {side:?} disagrees with an adjacent side at {x:?}"
            )));
        }
    }
    Ok(())
}

/// Attaches the essential constraints to an assembled system.
pub fn apply_dirichlet(
    system: &mut LinearSystem,
    space: &HierarchicalSpace,
    geo: &GeometryMap,
    problem: &PlateProblem,
) -> Result<(), AssemblyError> {
    system.constraints = dirichlet_constraints(space, geo, problem)?;
    Ok(())
}
