//! Post-processing of discrete solutions.

use super::element::{level_tables, ElementValues};
use super::problem::PlateProblem;
use super::AssemblyError;
use crate::geometry::{pushforward2, GeometryMap};
use crate::hierarchy::{ElementId, HierarchicalSpace};
use crate::par::{try_map_collect, Execution};
use crate::quadrature::GaussRule;

/// `d[a][b] = ∂^{a+b} u / ∂x^a ∂y^b` for `a + b <= 4`.
pub type Partials = [[f64; 5]; 5];

/// Physical partial derivatives of a field up to `order` (at most 4) at
/// parametric points of element `e`. Only identity and affine maps are
/// supported, for which the chain rule has no curvature terms.
pub fn field_partials(
    space: &HierarchicalSpace,
    geo: &GeometryMap,
    e: ElementId,
    params: &[[f64; 2]],
    coeffs: &[f64],
    order: usize,
) -> Result<Vec<Partials>, AssemblyError> {
    if order > 4 {
        return Err(AssemblyError::InvalidArgument(format!("derivative order {order} above 4")));
    }
    if !geo.is_affine() {
        return Err(AssemblyError::Unsupported(
            "higher derivatives need an identity or affine geometry".into(),
        ));
    }
    let functions = space.connectivity(e);
    let tables = level_tables(space, e, &functions, params, order);
    let mut out = Vec::with_capacity(params.len());
    for (q, xi) in params.iter().enumerate() {
        let mut d = [[0.0; 5]; 5];
        for lf in &functions {
            let c = coeffs[lf.dof];
            if c == 0.0 {
                continue;
            }
            let (xs, ys) = &tables[lf.function.level];
            let (a, b) = lf.local;
            for i in 0..=order {
                for j in 0..=(order - i) {
                    d[i][j] += c * xs[q].ders[i][a] * ys[q].ders[j][b];
                }
            }
        }
        if !geo.is_identity() {
            let pf = pushforward2(geo, *xi)?;
            d = transform(&d, &pf.inv_jac, order);
        }
        out.push(d);
    }
    Ok(out)
}

/// `∂_{x_k1}..∂_{x_kr} = Σ_m B[m1][k1]..B[mr][kr] ∂_{ξ_m1}..∂_{ξ_mr}` for an
/// affine map with `B[m][k] = ∂ξ_m/∂x_k`.
fn transform(param: &Partials, b: &[[f64; 2]; 2], order: usize) -> Partials {
    let mut out = [[0.0; 5]; 5];
    for r in 0..=order {
        for a in 0..=r {
            let ks: Vec<usize> = std::iter::repeat_n(0, a).chain(std::iter::repeat_n(1, r - a)).collect();
            let mut s = 0.0;
            for mask in 0..(1usize << r) {
                let mut w = 1.0;
                let mut nx = 0;
                for (t, k) in ks.iter().enumerate() {
                    let m = (mask >> t) & 1;
                    if m == 0 {
                        nx += 1;
                    }
                    w *= b[m][*k];
                }
                s += w * param[nx][r - nx];
            }
            out[a][r - a] = s;
        }
    }
    out
}

/// `(u, grad u, hess u)` at a physical point.
pub fn evaluate(
    space: &HierarchicalSpace,
    geo: &GeometryMap,
    coeffs: &[f64],
    x: [f64; 2],
) -> Result<(f64, [f64; 2], [f64; 3]), AssemblyError> {
    let xi = geo.inverse(x)?;
    let e = space
        .mesh
        .locate(xi)
        .ok_or_else(|| AssemblyError::InvalidArgument(format!("point {x:?} outside the domain")))?;
    let tab = ElementValues::at_points(space, geo, e, vec![xi])?;
    Ok(tab.field_at(0, coeffs))
}

fn error_rule(space: &HierarchicalSpace) -> GaussRule {
    GaussRule::new(space.degree() + 4)
}

/// Sum over active elements of `∫_e f(x, hess u_h)`, reduced in element order.
fn integrate(
    space: &HierarchicalSpace,
    geo: &GeometryMap,
    coeffs: &[f64],
    exec: Execution,
    f: &(dyn Fn([f64; 2], [f64; 3]) -> f64 + Sync),
) -> Result<f64, AssemblyError> {
    let rule = error_rule(space);
    let elements = space.mesh.active_elements();
    let parts = try_map_collect(exec, &elements, |e| -> Result<f64, AssemblyError> {
        let ev = ElementValues::quadrature(space, geo, *e, &rule)?;
        let mut s = 0.0;
        for q in 0..ev.n_points() {
            let (_, _, h) = ev.field_at(q, coeffs);
            s += ev.weights[q] * f(ev.physical_point(q), h);
        }
        Ok(s)
    })?;
    Ok(parts.iter().sum())
}

/// `|u_ex - u_h|_{H²}` with the exact Hessian `[xx, xy, yy]`.
pub fn h2_seminorm_error(
    space: &HierarchicalSpace,
    geo: &GeometryMap,
    coeffs: &[f64],
    exact_hessian: &(dyn Fn([f64; 2]) -> [f64; 3] + Sync),
    exec: Execution,
) -> Result<f64, AssemblyError> {
    let s = integrate(space, geo, coeffs, exec, &|x, h| {
        let he = exact_hessian(x);
        let d = [he[0] - h[0], he[1] - h[1], he[2] - h[2]];
        d[0] * d[0] + 2.0 * d[1] * d[1] + d[2] * d[2]
    })?;
    Ok(s.sqrt())
}

/// `|u_h|_{H²}`
pub fn h2_seminorm(
    space: &HierarchicalSpace,
    geo: &GeometryMap,
    coeffs: &[f64],
    exec: Execution,
) -> Result<f64, AssemblyError> {
    let s = integrate(space, geo, coeffs, exec, &|_, h| h[0] * h[0] + 2.0 * h[1] * h[1] + h[2] * h[2])?;
    Ok(s.sqrt())
}

/// `sqrt(a(u_h, u_h))`
pub fn energy_norm(
    space: &HierarchicalSpace,
    geo: &GeometryMap,
    problem: &PlateProblem,
    coeffs: &[f64],
    exec: Execution,
) -> Result<f64, AssemblyError> {
    let s = integrate(space, geo, coeffs, exec, &|_, h| problem.energy_density(&h, &h))?;
    Ok(s.sqrt())
}
