//! Classical residual-based estimator, used as a comparator.

use std::f64::consts::PI;

use super::{ElementEstimate, Estimate, EstimateError};
use crate::geometry::GeometryMap;
use crate::hierarchy::{CellStatus, ElementId, HierarchicalMesh, HierarchicalSpace, Side};
use crate::par::{try_map_collect, Execution};
use crate::plate::{field_partials, segment_rule, Partials, PlateProblem, PointLoad};
use crate::quadrature::GaussRule;

/// Gaussian replacing a point load inside the strong residual.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegularizedLoad {
    pub center: [f64; 2],
    pub magnitude: f64,
    pub sigma: f64,
}

impl RegularizedLoad {
    pub fn density(&self, x: [f64; 2]) -> f64 {
        let s2 = self.sigma * self.sigma;
        let r2 = (x[0] - self.center[0]).powi(2) + (x[1] - self.center[1]).powi(2);
        self.magnitude / (2.0 * PI * s2) * (-r2 / (2.0 * s2)).exp()
    }

    /// Whether the Gaussian is negligible on the given physical box.
    fn far_from(&self, lo: [f64; 2], hi: [f64; 2]) -> bool {
        let dx = (lo[0] - self.center[0]).max(self.center[0] - hi[0]).max(0.0);
        let dy = (lo[1] - self.center[1]).max(self.center[1] - hi[1]).max(0.0);
        dx.hypot(dy) > 8.0 * self.sigma
    }
}

/// Physical size of an element, `sqrt(|ε|)`.
pub fn element_diameter(mesh: &HierarchicalMesh, geo: &GeometryMap, e: ElementId) -> Result<f64, EstimateError> {
    let [x0, y0, x1, y1] = mesh.bounds(e);
    let c = [(x0 + x1) / 2.0, (y0 + y1) / 2.0];
    let det = geo.eval(c)?.det;
    Ok(((x1 - x0) * (y1 - y0) * det.abs()).sqrt())
}

/// Width `σ = h/4` of the element containing each point load.
pub fn regularize(
    mesh: &HierarchicalMesh,
    geo: &GeometryMap,
    loads: &[PointLoad],
) -> Result<Vec<RegularizedLoad>, EstimateError> {
    loads
        .iter()
        .map(|pl| {
            let xi = geo.inverse(pl.location)?;
            let e = mesh.locate(xi).ok_or_else(|| {
                EstimateError::InvalidArgument(format!("point load at {:?} outside the domain", pl.location))
            })?;
            Ok(RegularizedLoad {
                center: pl.location,
                magnitude: pl.magnitude,
                sigma: element_diameter(mesh, geo, e)? / 4.0,
            })
        })
        .collect()
}

fn laplacian(d: &Partials) -> f64 {
    d[2][0] + d[0][2]
}

fn grad_laplacian(d: &Partials) -> [f64; 2] {
    [d[3][0] + d[1][2], d[2][1] + d[0][3]]
}

fn bilaplacian(d: &Partials) -> f64 {
    d[4][0] + 2.0 * d[2][2] + d[0][4]
}

/// Active elements across `side` of `e`, each with the parametric segment of
/// the shared edge. Empty on the domain boundary.
pub fn edge_neighbors(mesh: &HierarchicalMesh, e: ElementId, side: Side) -> Vec<(ElementId, [f64; 2], [f64; 2])> {
    if mesh.boundary_sides(e).contains(&side) {
        return Vec::new();
    }
    let nb = match side {
        Side::Bottom => ElementId::new(e.level, e.i, e.j - 1),
        Side::Right => ElementId::new(e.level, e.i + 1, e.j),
        Side::Top => ElementId::new(e.level, e.i, e.j + 1),
        Side::Left => ElementId::new(e.level, e.i - 1, e.j),
    };
    let [x0, y0, x1, y1] = mesh.bounds(e);
    let whole = match side {
        Side::Bottom => ([x0, y0], [x1, y0]),
        Side::Right => ([x1, y0], [x1, y1]),
        Side::Top => ([x0, y1], [x1, y1]),
        Side::Left => ([x0, y0], [x0, y1]),
    };
    match mesh.status(nb) {
        CellStatus::Active => vec![(nb, whole.0, whole.1)],
        CellStatus::Covered => {
            let mut c = nb;
            while !mesh.is_active(c) {
                match c.parent() {
                    Some(p) => c = p,
                    None => return Vec::new(),
                }
            }
            vec![(c, whole.0, whole.1)]
        }
        CellStatus::Refined => {
            let mut out = Vec::new();
            let mut stack = vec![nb];
            let facing = side.opposite();
            while let Some(c) = stack.pop() {
                if mesh.is_active(c) {
                    let [a0, b0, a1, b1] = mesh.bounds(c);
                    let seg = match facing {
                        Side::Bottom => ([a0, b0], [a1, b0]),
                        Side::Right => ([a1, b0], [a1, b1]),
                        Side::Top => ([a0, b1], [a1, b1]),
                        Side::Left => ([a0, b0], [a0, b1]),
                    };
                    out.push((c, seg.0, seg.1));
                    continue;
                }
                for ch in c.children() {
                    let touches = match facing {
                        Side::Bottom => ch.j == 2 * c.j,
                        Side::Top => ch.j == 2 * c.j + 1,
                        Side::Left => ch.i == 2 * c.i,
                        Side::Right => ch.i == 2 * c.i + 1,
                    };
                    if touches {
                        stack.push(ch);
                    }
                }
            }
            out.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
            out
        }
    }
}

fn element_indicator(
    space: &HierarchicalSpace,
    geo: &GeometryMap,
    problem: &PlateProblem,
    u_h: &[f64],
    diracs: &[RegularizedLoad],
    e: ElementId,
) -> Result<f64, EstimateError> {
    let mesh = &space.mesh;
    let p = space.degree();
    let h = element_diameter(mesh, geo, e)?;
    let rule = GaussRule::new(p + 4);

    // parametric sub-cells: refined near regularized point loads
    let [x0, y0, x1, y1] = mesh.bounds(e);
    let lo = geo.point([x0, y0])?;
    let hi = geo.point([x1, y1])?;
    let (blo, bhi) = ([lo[0].min(hi[0]), lo[1].min(hi[1])], [lo[0].max(hi[0]), lo[1].max(hi[1])]);
    let sub = diracs
        .iter()
        .filter(|d| !d.far_from(blo, bhi))
        .map(|d| ((4.0 * h / d.sigma).ceil() as usize).clamp(1, 64))
        .max()
        .unwrap_or(1);
    let mut interior = 0.0;
    let (pts, wts) = rule.tensor();
    for sj in 0..sub {
        for si in 0..sub {
            let hx = (x1 - x0) / sub as f64;
            let hy = (y1 - y0) / sub as f64;
            let params: Vec<[f64; 2]> = pts
                .iter()
                .map(|[t, s]| [x0 + (si as f64 + t) * hx, y0 + (sj as f64 + s) * hy])
                .collect();
            let d = field_partials(space, geo, e, &params, u_h, 4)?;
            for (k, xi) in params.iter().enumerate() {
                let ev = geo.eval(*xi)?;
                let x = ev.point;
                let g = problem.load_at(x) + diracs.iter().map(|r| r.density(x)).sum::<f64>();
                let res = g - problem.d * bilaplacian(&d[k]);
                interior += wts[k] * hx * hy * ev.det.abs() * res * res;
            }
        }
    }

    let erule = GaussRule::new(p + 2);
    let mut jumps = 0.0;
    for side in Side::ALL {
        for (nb, a, b) in edge_neighbors(mesh, e, side) {
            let pts = segment_rule(geo, a, b, side.normal(), &erule)?;
            let xis: Vec<[f64; 2]> = pts.iter().map(|p| p.xi).collect();
            let de = field_partials(space, geo, e, &xis, u_h, 3)?;
            let dn = field_partials(space, geo, nb, &xis, u_h, 3)?;
            let he: f64 = pts.iter().map(|p| p.weight).sum();
            let mut j1 = 0.0;
            let mut j2 = 0.0;
            for (k, ep) in pts.iter().enumerate() {
                let jl = problem.d * (laplacian(&de[k]) - laplacian(&dn[k]));
                let ge = grad_laplacian(&de[k]);
                let gn = grad_laplacian(&dn[k]);
                let jg = problem.d * ((ge[0] - gn[0]) * ep.normal[0] + (ge[1] - gn[1]) * ep.normal[1]);
                j1 += ep.weight * jl * jl;
                j2 += ep.weight * jg * jg;
            }
            jumps += 0.5 * (he * j1 + he.powi(3) * j2);
        }
    }
    Ok((h.powi(4) * interior + jumps).max(0.0).sqrt())
}

/// `η² = h⁴‖g - DΔ²u_h‖² + ½ Σ (h_e‖[DΔu_h]‖² + h_e³‖[D∂_nΔu_h]‖²)` over the
/// interior edges of each element. Point loads enter as Gaussians of width
/// `h/4`. Unscaled.
pub fn residual_estimator(
    u_h: &[f64],
    space: &HierarchicalSpace,
    geo: &GeometryMap,
    problem: &PlateProblem,
    exec: Execution,
) -> Result<Estimate, EstimateError> {
    let diracs = regularize(&space.mesh, geo, &problem.point_loads)?;
    let elements = space.mesh.active_elements();
    let etas = try_map_collect(exec, &elements, |e| -> Result<ElementEstimate, EstimateError> {
        Ok(ElementEstimate {
            element: *e,
            eta: element_indicator(space, geo, problem, u_h, &diracs, *e)?,
        })
    })?;
    Ok(Estimate::from_elements(etas))
}
