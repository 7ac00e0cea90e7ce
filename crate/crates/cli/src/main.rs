use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, ValueEnum};
use hbplate::adaptive::{EstimatorKind, LoopConfig, MarkParams, RefineMode};
use hbplate::bench::{run_benchmark, BenchError, BenchmarkId, RunConfig};
use hbplate::par::Execution;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Benchmark {
    Smooth,
    Singular,
    #[value(name = "point_load")]
    PointLoad,
    Quartic,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Refine {
    Uniform,
    Adaptive,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Estimator {
    Bubble,
    Residual,
}

/// Run a Kirchhoff plate convergence study on hierarchical B-splines.
#[derive(Debug, Parser)]
#[command(name = "hbplate", version)]
struct Args {
    #[arg(long, value_enum)]
    benchmark: Benchmark,
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u32).range(3..=5))]
    degree: u32,
    /// Initial elements per direction.
    #[arg(long)]
    n0: Option<usize>,
    #[arg(long, value_enum, default_value_t = Refine::Adaptive)]
    refine: Refine,
    #[arg(long, value_enum, default_value_t = Estimator::Bubble)]
    estimator: Estimator,
    /// Marking threshold of the maximum strategy.
    #[arg(long, default_value_t = 0.5)]
    gamma: f64,
    /// Bubble estimator scaling.
    #[arg(long, default_value_t = 3.0)]
    ca: f64,
    /// Admissibility class (default p - 1).
    #[arg(long)]
    admissibility: Option<usize>,
    #[arg(long, default_value_t = 10)]
    max_iter: usize,
    #[arg(long, default_value_t = 20_000)]
    max_dofs: usize,
    /// Records file (CSV).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the active mesh of every iteration next to the records file.
    #[arg(long)]
    dump_mesh: bool,
    /// Run element loops sequentially.
    #[arg(long)]
    seq: bool,
}

fn config(args: &Args) -> anyhow::Result<RunConfig> {
    if !(args.gamma > 0.0 && args.gamma < 1.0) {
        anyhow::bail!("--gamma must lie in (0, 1)");
    }
    if args.dump_mesh && args.out.is_none() {
        anyhow::bail!("--dump-mesh needs --out");
    }
    let benchmark = match args.benchmark {
        Benchmark::Smooth => BenchmarkId::Smooth,
        Benchmark::Singular => BenchmarkId::Singular,
        Benchmark::PointLoad => BenchmarkId::PointLoad,
        Benchmark::Quartic => BenchmarkId::Quartic,
    };
    Ok(RunConfig {
        benchmark,
        degree: args.degree as usize,
        n0: args.n0,
        loop_config: LoopConfig {
            max_iterations: args.max_iter,
            max_dofs: args.max_dofs,
            mode: match args.refine {
                Refine::Uniform => RefineMode::Uniform,
                Refine::Adaptive => RefineMode::Adaptive,
            },
            estimator: match args.estimator {
                Estimator::Bubble => EstimatorKind::Bubble,
                Estimator::Residual => EstimatorKind::Residual,
            },
            admissibility: args.admissibility,
            ca: args.ca,
            mark: MarkParams { gamma: args.gamma },
            exec: if args.seq { Execution::Sequential } else { Execution::default() },
        },
        out: args.out.clone(),
        dump_mesh: args.dump_mesh,
    })
}

fn main() -> ExitCode {
    let args = Args::parse();
    let cfg = match config(&args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let result = run_benchmark(&cfg, |r| {
        eprintln!(
            "iter {:>3}  dofs {:>7}  elements {:>7}  error_h2 {:>12}  eta {:.4e}",
            r.iteration,
            r.dofs,
            r.n_elements,
            r.error_h2.map_or("nan".into(), |e| format!("{e:.4e}")),
            r.eta_total
        );
    })
    .with_context(|| format!("{} study failed", cfg.benchmark));
    match result {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            match e.downcast_ref::<BenchError>() {
                Some(BenchError::Driver(hbplate::adaptive::DriverError::InvalidConfig(_))) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
