//! SOLVE, ESTIMATE, MARK, REFINE.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::estimate::{self, ElementEstimate, Estimate, EstimateError};
use crate::geometry::GeometryMap;
use crate::hierarchy::{ElementId, HierarchicalMesh, HierarchicalSpace, MeshError};
use crate::par::Execution;
use crate::plate::{
    apply_dirichlet, assemble_system, evaluate, h2_seminorm_error, AssemblyError, HessianField,
    PlateProblem,
};

#[derive(Debug, Error)]
pub enum DriverError {
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
    #[error(transparent)]
    Estimate(#[from] EstimateError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("refinement at iteration {iteration} added no degrees of freedom")]
    Stagnation { iteration: usize },
    #[error("mesh lost admissibility class {m} at iteration {iteration}")]
    AdmissibilityLost { iteration: usize, m: usize },
    #[error("slope fit needs at least 3 usable records, got {0}")]
    InsufficientData(usize),
}

/// Maximum-strategy marking parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarkParams {
    pub gamma: f64,
}

impl Default for MarkParams {
    fn default() -> Self {
        Self { gamma: 0.5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RefineMode {
    Uniform,
    Adaptive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorKind {
    Bubble,
    Residual,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoopConfig {
    pub max_iterations: usize,
    pub max_dofs: usize,
    pub mode: RefineMode,
    pub estimator: EstimatorKind,
    /// Admissibility class; `None` means `p - 1`.
    pub admissibility: Option<usize>,
    pub ca: f64,
    pub mark: MarkParams,
    pub exec: Execution,
}

impl Default for LoopConfig {
    fn default() -> Self {
        Self {
            max_iterations: 10,
            max_dofs: 20_000,
            mode: RefineMode::Adaptive,
            estimator: EstimatorKind::Bubble,
            admissibility: None,
            ca: 3.0,
            mark: MarkParams::default(),
            exec: Execution::default(),
        }
    }
}

impl LoopConfig {
    fn validate(&self, p: usize) -> Result<usize, DriverError> {
        let m = self.admissibility.unwrap_or(p - 1);
        if m < 2 {
            return Err(DriverError::InvalidConfig(format!("admissibility class {m} < 2")));
        }
        if self.max_iterations == 0 || self.max_dofs == 0 {
            return Err(DriverError::InvalidConfig("budgets must be positive".into()));
        }
        if !(self.mark.gamma > 0.0 && self.mark.gamma < 1.0) {
            return Err(DriverError::InvalidConfig(format!("gamma {} not in (0, 1)", self.mark.gamma)));
        }
        if !(self.ca > 0.0) {
            return Err(DriverError::InvalidConfig(format!("C_a {} must be positive", self.ca)));
        }
        Ok(m)
    }
}

/// Exact information used only for reporting.
#[derive(Clone, Default)]
pub struct Observables {
    pub exact_hessian: Option<HessianField>,
    /// Point where the deflection is reported.
    pub qoi_point: Option<[f64; 2]>,
    /// Exact deflection under the single point load; the energy error then
    /// follows from `‖u - u_h‖² = P (u(x0) - u_h(x0))`.
    pub point_load_reference: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub dofs: usize,
    pub n_elements: usize,
    pub h_max: f64,
    pub error_h2: Option<f64>,
    pub eta_total: f64,
    pub theta: Option<f64>,
    pub qoi: Option<f64>,
}

/// `{ε : η_ε > γ max η}`; empty when every indicator vanishes.
pub fn mark_maximum(estimates: &[ElementEstimate], params: MarkParams) -> BTreeSet<ElementId> {
    let max = estimates.iter().map(|e| e.eta).fold(0.0, f64::max);
    if max <= 0.0 {
        return BTreeSet::new();
    }
    let threshold = params.gamma * max;
    estimates
        .iter()
        .filter(|e| e.eta > threshold)
        .map(|e| e.element)
        .collect()
}

/// Adds the same-level active neighbors of every marked element.
pub fn expand_marks(mesh: &HierarchicalMesh, marked: &BTreeSet<ElementId>) -> BTreeSet<ElementId> {
    let mut out = marked.clone();
    for e in marked {
        out.extend(mesh.neighbors(*e));
    }
    out
}

/// Everything one iteration produced.
#[derive(Debug, Clone)]
pub struct IterationState {
    pub space: HierarchicalSpace,
    pub coefficients: Vec<f64>,
    pub estimate: Estimate,
    pub record: IterationRecord,
}

pub fn compute_estimate(
    kind: EstimatorKind,
    u: &[f64],
    space: &HierarchicalSpace,
    geo: &GeometryMap,
    problem: &PlateProblem,
    ca: f64,
    exec: Execution,
) -> Result<Estimate, EstimateError> {
    match kind {
        EstimatorKind::Bubble => estimate::estimate(u, space, geo, problem, ca, exec),
        EstimatorKind::Residual => estimate::residual_estimator(u, space, geo, problem, exec),
    }
}

/// Solves, estimates and records one iteration on a fixed space.
pub fn solve_and_estimate(
    iteration: usize,
    space: &HierarchicalSpace,
    geo: &GeometryMap,
    problem: &PlateProblem,
    obs: &Observables,
    config: &LoopConfig,
) -> Result<IterationState, DriverError> {
    let mut sys = assemble_system(space, geo, problem, config.exec)?;
    apply_dirichlet(&mut sys, space, geo, problem)?;
    let u = sys.solve()?.coefficients;
    let est = compute_estimate(config.estimator, &u, space, geo, problem, config.ca, config.exec)?;

    let qoi = match obs.qoi_point {
        Some(x) => Some(evaluate(space, geo, &u, x)?.0),
        None => None,
    };
    let (error_h2, energy_error) = if let Some(h) = &obs.exact_hessian {
        let e = h2_seminorm_error(space, geo, &u, h.as_ref(), config.exec)?;
        let energy = if problem.nu == 0.0 {
            problem.d.sqrt() * e
        } else {
            energy_error(space, geo, problem, &u, h, config.exec)?
        };
        (Some(e), Some(energy))
    } else if let (Some(uref), Some(pl)) = (obs.point_load_reference, problem.point_loads.first()) {
        let uh = evaluate(space, geo, &u, pl.location)?.0;
        let e2 = pl.magnitude * (uref - uh);
        let e = e2.max(0.0).sqrt();
        // H² seminorm error, exact for ν = 0
        (Some(e / problem.d.sqrt()), Some(e))
    } else {
        (None, None)
    };
    let theta = energy_error.filter(|e| *e > 0.0).map(|e| est.eta_total / e);
    let record = IterationRecord {
        iteration,
        dofs: space.num_dofs(),
        n_elements: space.mesh.num_active(),
        h_max: space.h_max(),
        error_h2,
        eta_total: est.eta_total,
        theta,
        qoi,
    };
    Ok(IterationState {
        space: space.clone(),
        coefficients: u,
        estimate: est,
        record,
    })
}

fn energy_error(
    space: &HierarchicalSpace,
    geo: &GeometryMap,
    problem: &PlateProblem,
    u: &[f64],
    exact: &HessianField,
    exec: Execution,
) -> Result<f64, AssemblyError> {
    // ‖e‖_E² = D[(1-ν)|H e|² + ν (Δe)²]
    let h2 = h2_seminorm_error(space, geo, u, exact.as_ref(), exec)?;
    let lap = laplacian_error(space, geo, u, exact, exec)?;
    Ok((problem.d * ((1.0 - problem.nu) * h2 * h2 + problem.nu * lap * lap)).sqrt())
}

fn laplacian_error(
    space: &HierarchicalSpace,
    geo: &GeometryMap,
    u: &[f64],
    exact: &HessianField,
    exec: Execution,
) -> Result<f64, AssemblyError> {
    use crate::par::try_map_collect;
    use crate::plate::ElementValues;
    use crate::quadrature::GaussRule;
    let rule = GaussRule::new(space.degree() + 4);
    let elements = space.mesh.active_elements();
    let parts = try_map_collect(exec, &elements, |e| -> Result<f64, AssemblyError> {
        let ev = ElementValues::quadrature(space, geo, *e, &rule)?;
        let mut s = 0.0;
        for q in 0..ev.n_points() {
            let (_, _, h) = ev.field_at(q, u);
            let he = exact(ev.physical_point(q));
            let d = (he[0] + he[2]) - (h[0] + h[2]);
            s += ev.weights[q] * d * d;
        }
        Ok(s)
    })?;
    Ok(parts.iter().sum::<f64>().sqrt())
}

/// Runs the loop from `space0`. `observe` sees every completed iteration
/// (for mesh dumps and progress output).
pub fn run(
    problem: &PlateProblem,
    geo: &GeometryMap,
    space0: HierarchicalSpace,
    obs: &Observables,
    config: &LoopConfig,
    mut observe: impl FnMut(&IterationState),
) -> Result<Vec<IterationRecord>, DriverError> {
    let m = config.validate(space0.degree())?;
    let mut space = space0;
    let mut records = Vec::new();
    for iteration in 0..config.max_iterations {
        if space.num_dofs() > config.max_dofs {
            break;
        }
        if config.mode == RefineMode::Adaptive && !space.check_admissible(m) {
            return Err(DriverError::AdmissibilityLost { iteration, m });
        }
        let state = solve_and_estimate(iteration, &space, geo, problem, obs, config)?;
        observe(&state);
        records.push(state.record);
        if iteration + 1 == config.max_iterations {
            break;
        }
        let next = match config.mode {
            RefineMode::Uniform => space.refine_uniform()?,
            RefineMode::Adaptive => {
                let marked = mark_maximum(&state.estimate.elements, config.mark);
                if marked.is_empty() {
                    break;
                }
                let marked = expand_marks(&space.mesh, &marked);
                space.refine(&marked, m)?
            }
        };
        if next.num_dofs() <= space.num_dofs() {
            return Err(DriverError::Stagnation { iteration });
        }
        space = next;
    }
    Ok(records)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlopeAxis {
    /// Against `h_max`.
    H,
    /// Against `sqrt(dofs)`.
    SqrtDofs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantity {
    Error,
    Eta,
}

/// Least-squares slope of `log y` against `log x`.
pub fn fit_loglog(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// Rate over the last `k` records with a positive value.
pub fn slopes(records: &[IterationRecord], axis: SlopeAxis, what: Quantity, k: usize) -> Result<f64, DriverError> {
    let usable: Vec<(f64, f64)> = records
        .iter()
        .filter_map(|r| {
            let y = match what {
                Quantity::Error => r.error_h2?,
                Quantity::Eta => r.eta_total,
            };
            let x = match axis {
                SlopeAxis::H => r.h_max,
                SlopeAxis::SqrtDofs => (r.dofs as f64).sqrt(),
            };
            (y > 0.0 && y.is_finite()).then_some((x, y))
        })
        .collect();
    let k = k.max(3);
    if usable.len() < 3 {
        return Err(DriverError::InsufficientData(usable.len()));
    }
    let tail = &usable[usable.len().saturating_sub(k)..];
    let (x, y): (Vec<f64>, Vec<f64>) = tail.iter().copied().unzip();
    Ok(fit_loglog(&x, &y))
}
