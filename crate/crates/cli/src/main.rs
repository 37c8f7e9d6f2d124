//! `untangle`: computes a foldover-free map from a rest mesh and an initial map.
//!
//! Exit status is 0 when the final map has no inverted element, 1 when the
//! run finished with inverted elements left, and 2 on input or I/O errors.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::Parser;
use log::info;
use untangle_core::io::{load_problem, write_outputs, RunConfig};
use untangle_core::{build_instance, untangle, EpsRule, Scheme, TargetShapePolicy};

#[derive(Parser, Debug)]
#[command(name = "untangle", version, about = "Compute a foldover-free map of a triangle, quad or tetrahedral mesh")]
struct Args {
    /// Rest mesh (Medit .mesh); positive vertex references mark locked vertices.
    #[arg(long)]
    rest: PathBuf,
    /// Initial map with the same connectivity as the rest mesh.
    #[arg(long)]
    init: PathBuf,
    /// Lock list, one 0-based vertex index per line. Overrides reference marks.
    #[arg(long)]
    locks: Option<PathBuf>,
    /// Weight of the volume term.
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    /// Inner minimizer: quasi-newton, newton or auto.
    #[arg(long, default_value_t = Scheme::Auto)]
    scheme: Scheme,
    /// Regularization schedule: heuristic or theory.
    #[arg(long = "eps-rule", default_value_t = EpsRule::Heuristic)]
    eps_rule: EpsRule,
    /// Target shapes: rest or regular.
    #[arg(long, default_value_t = TargetShapePolicy::Rest)]
    targets: TargetShapePolicy,
    /// Output map (Medit .mesh).
    #[arg(long)]
    out: PathBuf,
    /// Output report (JSON).
    #[arg(long)]
    report: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Outer iteration budget.
    #[arg(long = "max-outer", default_value_t = 1000)]
    max_outer: usize,
}

fn run(args: Args) -> Result<bool> {
    let config = RunConfig {
        rest: args.rest,
        init: args.init,
        locks: args.locks,
        out: args.out,
        report: args.report,
        lambda: args.lambda,
        scheme: args.scheme,
        eps_rule: args.eps_rule,
        targets: args.targets,
        max_outer: args.max_outer,
        threads: args.threads,
    };
    config.validate()?;
    if let Some(n) = config.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("configuring the thread pool")?;
    }
    let mesh = load_problem(&config.rest, &config.init, config.locks.as_deref())?;
    info!("{} vertices ({} locked), {} elements, dimension {}", mesh.num_vertices(), mesh.num_locked(), mesh.elements.len(), mesh.dim);
    let instance = build_instance(mesh, config.targets)?;
    let outcome = untangle(&instance, &config.solver_config())?;
    let report = write_outputs(&outcome, &instance, &config)?;
    info!(
        "{} after {} outer iterations in {:.2}s: min det {:.3e}, max stretch {:.3}, {} inverted",
        if report.success { "fold-free" } else { "NOT fold-free" },
        report.iterations,
        report.wall_time_s,
        report.min_det,
        report.max_stretch,
        report.num_inverted
    );
    Ok(report.success)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Args::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
