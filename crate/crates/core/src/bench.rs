//! Plate benchmarks with manufactured data, study runner and record output.

use std::f64::consts::PI;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::adaptive::{run, slopes, DriverError, IterationRecord, LoopConfig, Observables, Quantity, RefineMode, SlopeAxis};
use crate::geometry::GeometryMap;
use crate::hierarchy::{HierarchicalSpace, MeshError, Side};
use crate::plate::{BoundaryValue, HessianField, LoadQuadrature, PlateProblem, Rotational, ScalarField, SideCondition, Transverse};

/// Center deflection of the simply supported unit square under a unit
/// downward point load, as printed in the literature. It comes from a
/// truncated series and sits about 3e-9 (relative) above the limit, see
/// [`point_load_closed_form`].
pub const POINT_LOAD_REFERENCE: f64 = -0.011600839735872;

/// Exponent of the singular benchmark `u = x^α y^α`.
pub const SINGULAR_ALPHA: f64 = 2.8;

/// Geometric layers of the load quadrature on boundary elements of the
/// singular benchmark, whose load behaves like `x^(α-4)` at the edges.
pub const SINGULAR_LOAD_LAYERS: usize = 20;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error(transparent)]
    Driver(#[from] DriverError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error("load of benchmark {id} is inconsistent with its exact solution: relative error {rel:e} at {point:?}")]
    InconsistentLoad { id: BenchmarkId, rel: f64, point: [f64; 2] },
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BenchmarkId {
    Smooth,
    Singular,
    PointLoad,
    /// `u = x²y²`, contained in every space of degree at least 2.
    Quartic,
}

impl fmt::Display for BenchmarkId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BenchmarkId::Smooth => "smooth",
            BenchmarkId::Singular => "singular",
            BenchmarkId::PointLoad => "point_load",
            BenchmarkId::Quartic => "quartic",
        })
    }
}

impl FromStr for BenchmarkId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "smooth" => Ok(BenchmarkId::Smooth),
            "singular" => Ok(BenchmarkId::Singular),
            "point_load" => Ok(BenchmarkId::PointLoad),
            "quartic" => Ok(BenchmarkId::Quartic),
            other => Err(format!("unknown benchmark '{other}'")),
        }
    }
}

#[derive(Clone)]
pub struct ExactSolution {
    pub value: ScalarField,
    pub hessian: HessianField,
}

#[derive(Clone)]
pub struct BenchmarkSpec {
    pub id: BenchmarkId,
    pub problem: PlateProblem,
    pub exact: Option<ExactSolution>,
    pub qoi_point: Option<[f64; 2]>,
    /// Exact deflection at `qoi_point`.
    pub reference: Option<f64>,
    pub default_n0: usize,
}

impl fmt::Debug for BenchmarkSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BenchmarkSpec")
            .field("id", &self.id)
            .field("problem", &self.problem)
            .field("reference", &self.reference)
            .finish_non_exhaustive()
    }
}

/// Deflection data and normal moment `M = D[νΔu + (1-ν) n·H n]` of an
/// exact solution on every side.
fn exact_boundary(problem: PlateProblem, exact: &ExactSolution) -> PlateProblem {
    let (d, nu) = (problem.d, problem.nu);
    let mut problem = problem;
    for side in Side::ALL {
        let u = exact.value.clone();
        let h = exact.hessian.clone();
        let axis = side.normal_axis();
        let m = move |x: [f64; 2]| {
            let hx = h(x);
            let hnn = if axis == 0 { hx[0] } else { hx[2] };
            d * (nu * (hx[0] + hx[2]) + (1.0 - nu) * hnn)
        };
        problem = problem.with_side(
            side,
            SideCondition {
                transverse: Transverse::Deflection(BoundaryValue::Function(u)),
                rotational: Rotational::Moment(BoundaryValue::function(m)),
            },
        );
    }
    problem
}

impl BenchmarkSpec {
    pub fn get(id: BenchmarkId) -> Self {
        match id {
            BenchmarkId::Smooth => Self::smooth(),
            BenchmarkId::Singular => Self::singular(),
            BenchmarkId::PointLoad => Self::point_load(),
            BenchmarkId::Quartic => Self::quartic(),
        }
    }

    /// `u = sin(2πx) sin(2πy)`, simply supported.
    pub fn smooth() -> Self {
        let k = 2.0 * PI;
        let value: ScalarField = Arc::new(move |x| (k * x[0]).sin() * (k * x[1]).sin());
        let hessian: HessianField = Arc::new(move |x| {
            let (s0, c0) = (k * x[0]).sin_cos();
            let (s1, c1) = (k * x[1]).sin_cos();
            [-k * k * s0 * s1, k * k * c0 * c1, -k * k * s0 * s1]
        });
        let problem = PlateProblem::new(SideCondition::simply_supported())
            .with_load(move |x| 4.0 * k.powi(4) * (k * x[0]).sin() * (k * x[1]).sin());
        Self {
            id: BenchmarkId::Smooth,
            problem,
            exact: Some(ExactSolution { value, hessian }),
            qoi_point: None,
            reference: None,
            default_n0: 4,
        }
    }

    /// `u = x^α y^α` with deflection and moment taken from `u` on all sides.
    pub fn singular() -> Self {
        let a = SINGULAR_ALPHA;
        let value: ScalarField = Arc::new(move |x| x[0].powf(a) * x[1].powf(a));
        let hessian: HessianField = Arc::new(move |x| {
            let (px, py) = (x[0].powf(a), x[1].powf(a));
            let d1 = |t: f64| a * t.powf(a - 1.0);
            let d2 = |t: f64| a * (a - 1.0) * t.powf(a - 2.0);
            [d2(x[0]) * py, d1(x[0]) * d1(x[1]), px * d2(x[1])]
        });
        let exact = ExactSolution { value, hessian };
        let c4 = a * (a - 1.0) * (a - 2.0) * (a - 3.0);
        let c2 = a * (a - 1.0);
        let problem = PlateProblem::new(SideCondition::simply_supported())
            .with_load_quadrature(LoadQuadrature::BoundaryGraded { layers: SINGULAR_LOAD_LAYERS })
            .with_load(move |x| {
            let (s, t) = (x[0], x[1]);
            c4 * s.powf(a - 4.0) * t.powf(a) + 2.0 * c2 * c2 * s.powf(a - 2.0) * t.powf(a - 2.0)
                + c4 * s.powf(a) * t.powf(a - 4.0)
        });
        Self {
            id: BenchmarkId::Singular,
            problem: exact_boundary(problem, &exact),
            exact: Some(exact),
            qoi_point: None,
            reference: None,
            default_n0: 4,
        }
    }

    /// Unit downward point load at the center, simply supported.
    pub fn point_load() -> Self {
        let problem = PlateProblem::new(SideCondition::simply_supported()).with_point_load([0.5, 0.5], -1.0);
        Self {
            id: BenchmarkId::PointLoad,
            problem,
            exact: None,
            qoi_point: Some([0.5, 0.5]),
            reference: Some(point_load_closed_form(-1.0, 1_000_001)),
            default_n0: 4,
        }
    }

    /// `u = x²y²`, `g = 8`.
    pub fn quartic() -> Self {
        let value: ScalarField = Arc::new(|x| x[0] * x[0] * x[1] * x[1]);
        let hessian: HessianField =
            Arc::new(|x| [2.0 * x[1] * x[1], 4.0 * x[0] * x[1], 2.0 * x[0] * x[0]]);
        let exact = ExactSolution { value, hessian };
        let problem = PlateProblem::new(SideCondition::simply_supported()).with_load(|_| 8.0);
        Self {
            id: BenchmarkId::Quartic,
            problem: exact_boundary(problem, &exact),
            exact: Some(exact),
            qoi_point: None,
            reference: None,
            default_n0: 2,
        }
    }

    pub fn observables(&self) -> Observables {
        Observables {
            exact_hessian: self.exact.as_ref().map(|e| e.hessian.clone()),
            qoi_point: self.qoi_point,
            point_load_reference: self.reference,
        }
    }

    /// Compares `g` with `D Δ²u` by fourth-order finite differences at
    /// seeded random points in `[lo, 1 - lo]²`; returns the largest relative
    /// discrepancy.
    pub fn check_load_consistency(&self, n_points: usize, seed: u64, tol: f64) -> Result<f64, BenchError> {
        let (Some(exact), Some(_)) = (&self.exact, &self.problem.load) else {
            return Ok(0.0);
        };
        let lo = 0.2;
        let step = 1e-2;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst: f64 = 0.0;
        for _ in 0..n_points {
            let x = [rng.random_range(lo..1.0 - lo), rng.random_range(lo..1.0 - lo)];
            let fd = self.problem.d * bilaplacian_fd(exact.value.as_ref(), x, step);
            let g = self.problem.load_at(x);
            let rel = (fd - g).abs() / g.abs().max(1e-300);
            if rel > tol {
                return Err(BenchError::InconsistentLoad { id: self.id, rel, point: x });
            }
            worst = worst.max(rel);
        }
        Ok(worst)
    }
}

/// `Δ²u` with fourth-order central stencils.
pub fn bilaplacian_fd(u: &dyn Fn([f64; 2]) -> f64, x: [f64; 2], h: f64) -> f64 {
    const D4: [f64; 7] = [-1.0, 12.0, -39.0, 56.0, -39.0, 12.0, -1.0];
    const D2: [f64; 5] = [-1.0, 16.0, -30.0, 16.0, -1.0];
    let mut uxxxx = 0.0;
    let mut uyyyy = 0.0;
    for (k, c) in D4.iter().enumerate() {
        let o = (k as f64 - 3.0) * h;
        uxxxx += c * u([x[0] + o, x[1]]);
        uyyyy += c * u([x[0], x[1] + o]);
    }
    let mut uxxyy = 0.0;
    for (a, ca) in D2.iter().enumerate() {
        for (b, cb) in D2.iter().enumerate() {
            uxxyy += ca * cb * u([x[0] + (a as f64 - 2.0) * h, x[1] + (b as f64 - 2.0) * h]);
        }
    }
    let h4 = h.powi(4);
    (uxxxx + uyyyy) / (6.0 * h4) + 2.0 * uxxyy / (144.0 * h4)
}

/// Center deflection of the simply supported unit square under load `p`
/// with `D = 1`: `4p/π⁴ Σ_{m,n odd} 1/(m²+n²)²`, summed up to `n_max` with
/// compensated summation.
pub fn point_load_series(p: f64, n_max: usize) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for m in (1..=n_max).step_by(2) {
        let m2 = (m * m) as f64;
        for n in (1..=n_max).step_by(2) {
            let s = m2 + (n * n) as f64;
            let term = 1.0 / (s * s);
            // Neumaier
            let t = sum + term;
            if sum.abs() >= term.abs() {
                comp += (sum - t) + term;
            } else {
                comp += (term - t) + sum;
            }
            sum = t;
        }
    }
    4.0 * p / PI.powi(4) * (sum + comp)
}

/// Center deflection as above with the inner sum over `n` in closed form,
/// `Σ_n 1/(m²+n²)² = π/(8m³) [tanh(πm/2) - (πm/2) sech²(πm/2)]`, summed over
/// odd `m ≤ m_max` from the small terms up, plus the leading tail term.
pub fn point_load_closed_form(p: f64, m_max: usize) -> f64 {
    let last = (m_max.max(1) - 1) / 2;
    let tail = PI / (32.0 * ((2 * last + 2) as f64).powi(2));
    let sum: f64 = tail + (0..=last)
        .rev()
        .map(|k| {
            let m = (2 * k + 1) as f64;
            let z = PI * m / 2.0;
            let sech = 1.0 / z.cosh();
            PI / (8.0 * m.powi(3)) * (z.tanh() - z * sech * sech)
        })
        .sum::<f64>();
    4.0 * p / PI.powi(4) * sum
}

/// Study configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub benchmark: BenchmarkId,
    pub degree: usize,
    /// Initial elements per direction; `None` uses the benchmark default.
    pub n0: Option<usize>,
    pub loop_config: LoopConfig,
    /// Records file; mesh dumps go next to it.
    pub out: Option<PathBuf>,
    pub dump_mesh: bool,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub records: Vec<IterationRecord>,
    pub slope_axis: SlopeAxis,
    /// Error rate over the last three records, if available.
    pub slope: Option<f64>,
    pub final_theta: Option<f64>,
}

impl fmt::Display for RunSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let axis = match self.slope_axis {
            SlopeAxis::H => "h",
            SlopeAxis::SqrtDofs => "sqrt(dofs)",
        };
        let last = self.records.last();
        write!(
            f,
            "iterations={} dofs={} slope(error_h2 vs {axis})={} theta={}",
            self.records.len(),
            last.map_or(0, |r| r.dofs),
            self.slope.map_or("nan".to_string(), |s| format!("{s:.4}")),
            self.final_theta.map_or("nan".to_string(), |t| format!("{t:.4}")),
        )
    }
}

/// Mesh dump path for an iteration, next to the records file.
pub fn mesh_dump_path(out: &Path, iteration: usize) -> PathBuf {
    let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("records");
    out.with_file_name(format!("{stem}_mesh_{iteration:03}.txt"))
}

pub fn run_benchmark(
    config: &RunConfig,
    mut progress: impl FnMut(&IterationRecord),
) -> Result<RunSummary, BenchError> {
    let spec = BenchmarkSpec::get(config.benchmark);
    spec.check_load_consistency(10, 7, 1e-4)?;
    let space = HierarchicalSpace::init(config.n0.unwrap_or(spec.default_n0), config.degree)?;
    let geo = GeometryMap::Identity;
    let mut io_error = None;
    let records = run(&spec.problem, &geo, space, &spec.observables(), &config.loop_config, |state| {
        progress(&state.record);
        if let (true, Some(out)) = (config.dump_mesh, &config.out) {
            if let Err(e) = fs::write(mesh_dump_path(out, state.record.iteration), state.space.mesh.dump()) {
                io_error.get_or_insert(e);
            }
        }
    })?;
    if let Some(e) = io_error {
        return Err(e.into());
    }
    if let Some(out) = &config.out {
        let f = fs::File::create(out)?;
        write_records(f, &records)?;
    }
    let slope_axis = match config.loop_config.mode {
        RefineMode::Uniform => SlopeAxis::H,
        RefineMode::Adaptive => SlopeAxis::SqrtDofs,
    };
    Ok(RunSummary {
        slope: slopes(&records, slope_axis, Quantity::Error, 3).ok(),
        final_theta: records.last().and_then(|r| r.theta),
        slope_axis,
        records,
    })
}

pub const CSV_HEADER: [&str; 8] = ["iteration", "dofs", "n_elements", "h_max", "error_h2", "eta_total", "theta", "qoi"];

fn real(v: Option<f64>) -> String {
    match v {
        Some(x) if x.is_finite() => format!("{x:.16e}"),
        _ => "nan".to_string(),
    }
}

/// Comma-separated records with a header row.
pub fn write_records(w: impl Write, records: &[IterationRecord]) -> Result<(), BenchError> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(CSV_HEADER)?;
    for r in records {
        wr.write_record([
            r.iteration.to_string(),
            r.dofs.to_string(),
            r.n_elements.to_string(),
            real(Some(r.h_max)),
            real(r.error_h2),
            real(Some(r.eta_total)),
            real(r.theta),
            real(r.qoi),
        ])?;
    }
    wr.flush()?;
    Ok(())
}
