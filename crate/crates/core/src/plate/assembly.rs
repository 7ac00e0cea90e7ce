//! Galerkin assembly of the plate bilinear form and load functional.

use std::collections::BTreeMap;

use super::element::{load_rule, ElementValues};
use super::problem::{BoundaryValue, LoadQuadrature, PlateProblem, Rotational, Transverse};
use super::sparse::SparseMatrix;
use super::{AssemblyError, LinearSystem};
use crate::geometry::{GeometryError, GeometryMap};
use crate::hierarchy::{ElementId, HierarchicalSpace, Side};
use crate::par::{try_map_collect, Execution};
use crate::quadrature::GaussRule;

/// Elements per parallel batch; bounds the memory held by element matrices
/// before they are scattered.
const BATCH: usize = 2048;

/// A quadrature point on an element side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgePoint {
    pub xi: [f64; 2],
    pub point: [f64; 2],
    /// Physical arc-length weight.
    pub weight: f64,
    /// Physical outward unit normal.
    pub normal: [f64; 2],
}

/// Gauss points on the parametric segment `a -> b` lying on a line of
/// constant coordinate, with `param_normal` the parametric outward normal.
pub fn segment_rule(
    geo: &GeometryMap,
    a: [f64; 2],
    b: [f64; 2],
    param_normal: [f64; 2],
    rule: &GaussRule,
) -> Result<Vec<EdgePoint>, GeometryError> {
    let d = [b[0] - a[0], b[1] - a[1]];
    let len = d[0].hypot(d[1]);
    let t_unit = [d[0] / len, d[1] / len];
    rule.points
        .iter()
        .zip(&rule.weights)
        .map(|(t, w)| {
            let xi = [a[0] + t * d[0], a[1] + t * d[1]];
            let ev = geo.eval(xi)?;
            let j = ev.jac;
            let tangent = [
                j[0][0] * t_unit[0] + j[0][1] * t_unit[1],
                j[1][0] * t_unit[0] + j[1][1] * t_unit[1],
            ];
            // normals transform with J^{-T}
            let n = [
                (j[1][1] * param_normal[0] - j[1][0] * param_normal[1]) / ev.det,
                (-j[0][1] * param_normal[0] + j[0][0] * param_normal[1]) / ev.det,
            ];
            let nn = n[0].hypot(n[1]);
            Ok(EdgePoint {
                xi,
                point: ev.point,
                weight: w * len * tangent[0].hypot(tangent[1]),
                normal: [n[0] / nn, n[1] / nn],
            })
        })
        .collect()
}

/// Parametric endpoints of one side of an element.
pub fn element_side(space: &HierarchicalSpace, e: ElementId, side: Side) -> ([f64; 2], [f64; 2]) {
    let [x0, y0, x1, y1] = space.mesh.bounds(e);
    match side {
        Side::Bottom => ([x0, y0], [x1, y0]),
        Side::Right => ([x1, y0], [x1, y1]),
        Side::Top => ([x0, y1], [x1, y1]),
        Side::Left => ([x0, y0], [x0, y1]),
    }
}

/// Gauss points along a side of element `e`.
pub fn edge_rule(
    space: &HierarchicalSpace,
    geo: &GeometryMap,
    e: ElementId,
    side: Side,
    rule: &GaussRule,
) -> Result<Vec<EdgePoint>, GeometryError> {
    let (a, b) = element_side(space, e, side);
    segment_rule(geo, a, b, side.normal(), rule)
}

struct Contribution {
    dofs: Vec<usize>,
    stiffness: Vec<f64>,
    load: Vec<f64>,
}

fn element_stiffness(ev: &ElementValues, problem: &PlateProblem) -> Vec<f64> {
    let nf = ev.n_functions();
    let mut k = vec![0.0; nf * nf];
    for q in 0..ev.n_points() {
        let w = ev.weights[q];
        let base = q * nf;
        for a in 0..nf {
            let ha = ev.hess[base + a];
            for b in a..nf {
                let hb = ev.hess[base + b];
                k[a * nf + b] += w * problem.energy_density(&ha, &hb);
            }
        }
    }
    for a in 0..nf {
        for b in 0..a {
            k[a * nf + b] = k[b * nf + a];
        }
    }
    k
}

fn element_load(
    space: &HierarchicalSpace,
    geo: &GeometryMap,
    problem: &PlateProblem,
    ev: &ElementValues,
    rule: &GaussRule,
) -> Result<Vec<f64>, AssemblyError> {
    let nf = ev.n_functions();
    let mut f = vec![0.0; nf];
    if problem.load.is_some() {
        let graded;
        let lv = match problem.load_quadrature {
            LoadQuadrature::Standard => ev,
            _ => {
                let (params, weights) = load_rule(space, ev.element, rule, problem.load_quadrature);
                graded = ElementValues::with_rule(space, geo, ev.element, params, weights)?;
                &graded
            }
        };
        for q in 0..lv.n_points() {
            let g = problem.load_at(lv.physical_point(q)) * lv.weights[q];
            for (a, fa) in f.iter_mut().enumerate() {
                *fa += g * lv.value(q, a);
            }
        }
    }
    for side in space.mesh.boundary_sides(ev.element) {
        let cond = problem.side(side);
        let moment = match &cond.rotational {
            Rotational::Moment(BoundaryValue::Function(m)) => Some(m),
            _ => None,
        };
        let shear = match &cond.transverse {
            Transverse::Shear(BoundaryValue::Function(s)) => Some(s),
            _ => None,
        };
        if moment.is_none() && shear.is_none() {
            continue;
        }
        let pts = edge_rule(space, geo, ev.element, side, rule)?;
        let tab = ElementValues::at_points(space, geo, ev.element, pts.iter().map(|p| p.xi).collect())?;
        for (q, ep) in pts.iter().enumerate() {
            let mval = moment.map_or(0.0, |m| m(ep.point));
            let sval = shear.map_or(0.0, |s| s(ep.point));
            for (a, fa) in f.iter_mut().enumerate() {
                let g = tab.grad(q, a);
                let dn = g[0] * ep.normal[0] + g[1] * ep.normal[1];
                *fa += ep.weight * (mval * dn - sval * tab.value(q, a));
            }
        }
    }
    Ok(f)
}

/// Adds `P b_i(x0)` for every point load.
fn add_point_loads(
    space: &HierarchicalSpace,
    geo: &GeometryMap,
    problem: &PlateProblem,
    rhs: &mut [f64],
) -> Result<(), AssemblyError> {
    for pl in &problem.point_loads {
        let xi = geo.inverse(pl.location).map_err(|_| {
            AssemblyError::InvalidArgument(format!("point load at {:?} is outside the domain", pl.location))
        })?;
        let e = space.mesh.locate(xi).ok_or_else(|| {
            AssemblyError::InvalidArgument(format!("point load at {:?} is outside the domain", pl.location))
        })?;
        let tab = ElementValues::at_points(space, geo, e, vec![xi])?;
        for (a, lf) in tab.functions.iter().enumerate() {
            rhs[lf.dof] += pl.magnitude * tab.value(0, a);
        }
    }
    Ok(())
}

fn sparsity(space: &HierarchicalSpace, elements: &[ElementId]) -> SparseMatrix {
    let groups: Vec<Vec<usize>> = elements
        .iter()
        .map(|e| space.connectivity(*e).iter().map(|f| f.dof).collect())
        .collect();
    SparseMatrix::from_groups(space.num_dofs(), groups.iter().map(|g| g.as_slice()))
}

fn assemble_parts(
    space: &HierarchicalSpace,
    geo: &GeometryMap,
    problem: &PlateProblem,
    exec: Execution,
    want_matrix: bool,
    want_load: bool,
) -> Result<(Option<SparseMatrix>, Option<Vec<f64>>), AssemblyError> {
    geo.validate()?;
    let rule = GaussRule::for_degree(space.degree());
    let elements = space.mesh.active_elements();
    let mut matrix = want_matrix.then(|| sparsity(space, &elements));
    let mut rhs = want_load.then(|| vec![0.0; space.num_dofs()]);
    for batch in elements.chunks(BATCH) {
        let contribs = try_map_collect(exec, batch, |e| -> Result<Contribution, AssemblyError> {
            let ev = ElementValues::quadrature(space, geo, *e, &rule)?;
            let stiffness = if want_matrix { element_stiffness(&ev, problem) } else { Vec::new() };
            let load = if want_load {
                element_load(space, geo, problem, &ev, &rule)?
            } else {
                Vec::new()
            };
            Ok(Contribution {
                dofs: ev.dofs().collect(),
                stiffness,
                load,
            })
        })?;
        for c in contribs {
            let nf = c.dofs.len();
            if let Some(m) = matrix.as_mut() {
                for (a, &i) in c.dofs.iter().enumerate() {
                    for (b, &j) in c.dofs.iter().enumerate() {
                        m.add(i, j, c.stiffness[a * nf + b]);
                    }
                }
            }
            if let Some(r) = rhs.as_mut() {
                for (a, &i) in c.dofs.iter().enumerate() {
                    r[i] += c.load[a];
                }
            }
        }
    }
    if let Some(r) = rhs.as_mut() {
        add_point_loads(space, geo, problem, r)?;
    }
    Ok((matrix, rhs))
}

/// `A_ij = ∫ D[(1-ν) H(b_i):H(b_j) + ν Δb_i Δb_j] dΩ`
pub fn assemble_stiffness(
    space: &HierarchicalSpace,
    geo: &GeometryMap,
    problem: &PlateProblem,
    exec: Execution,
) -> Result<SparseMatrix, AssemblyError> {
    Ok(assemble_parts(space, geo, problem, exec, true, false)?.0.unwrap())
}

/// Body load, natural boundary terms and point loads.
pub fn assemble_load(
    space: &HierarchicalSpace,
    geo: &GeometryMap,
    problem: &PlateProblem,
    exec: Execution,
) -> Result<Vec<f64>, AssemblyError> {
    Ok(assemble_parts(space, geo, problem, exec, false, true)?.1.unwrap())
}

/// Stiffness and load in a single element pass; no constraints yet.
pub fn assemble_system(
    space: &HierarchicalSpace,
    geo: &GeometryMap,
    problem: &PlateProblem,
    exec: Execution,
) -> Result<LinearSystem, AssemblyError> {
    let (m, r) = assemble_parts(space, geo, problem, exec, true, true)?;
    Ok(LinearSystem {
        matrix: m.unwrap(),
        rhs: r.unwrap(),
        constraints: BTreeMap::new(),
    })
}
