//! spdelab: simulate the 1-d Dirichlet SPDE with multiplicative
//! space-time white noise, compute weighted Sobolev norms, and estimate
//! Hölder exponents and boundary decay from stored trajectories.
//!
//! Exit codes: 0 success, 2 validation failure, 3 ensemble-level failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use spde_core::error::Error;
use spde_core::estimators::HolderTargets;
use spde_core::grid::GridFunction;
use spde_core::harness::config::{load_config, ExperimentConfig, SCHEMA_VERSION};
use spde_core::harness::ensemble::{
    aggregate, report_json, run_ensemble, simulate_to_dir, summarize_path, EnsembleReport, Timing,
};
use spde_core::harness::persist::{list_trajectories, read_trajectory};
use spde_core::harness::plots::emit_plot_data;
use spde_core::sobolev::{
    bessel_negative_norm, dyadic_norm, weighted_integer_norm, KernelTable, NormOrder, SpaceSpec,
    WeightChoice,
};
use spde_core::weight::{comparability_constants, make_psi, make_zeta};
use spde_core::Real;

#[derive(Parser)]
#[command(name = "spdelab", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate trajectories and persist one file per path.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        paths: Option<usize>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Estimate exponents from stored trajectories.
    Estimate {
        #[arg(long, value_name = "dir")]
        traj_dir: PathBuf,
        #[arg(long)]
        kappa: Real,
        #[arg(long)]
        lambda: Real,
        #[arg(long)]
        p: Real,
        #[arg(long)]
        theta: Real,
        /// Defaults to the admissible mid-range when omitted.
        #[arg(long)]
        alpha: Option<Real>,
        #[arg(long)]
        beta: Option<Real>,
        #[arg(long, default_value_t = 0.0)]
        delta: Real,
        #[arg(long)]
        out: PathBuf,
    },
    /// Weighted Sobolev norm of a sampled function (CSV columns x,u).
    Norm {
        /// 0, 1, 2 or "neg" (order -(1/2+kappa), requires --kappa)
        #[arg(long)]
        order: String,
        #[arg(long)]
        p: Real,
        #[arg(long)]
        theta: Real,
        #[arg(long)]
        kappa: Option<Real>,
        #[arg(long)]
        input: PathBuf,
    },
    /// Comparability constants and worst generator-condition value.
    CheckWeight {
        #[arg(long = "K", value_name = "v")]
        k: Real,
        #[arg(long)]
        delta0: Real,
        #[arg(long, default_value_t = 4096)]
        grid: usize,
    },
    /// End-to-end: simulate, estimate, aggregate, emit plots.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        paths: Option<usize>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Re-emit plot CSVs from a stored report.json.
    EmitPlots {
        #[arg(long)]
        report: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::ConfigParse { .. }
        | Error::ConfigValidation(_)
        | Error::InvalidParameter(_)
        | Error::Precondition(_) => 2,
        _ => 3,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

fn load_with_overrides(
    config: &Path,
    seed: Option<u64>,
    paths: Option<usize>,
    workers: Option<usize>,
) -> Result<ExperimentConfig, Error> {
    let mut cfg = load_config(config)?;
    if let Some(s) = seed {
        cfg.ensemble.master_seed = s;
    }
    if let Some(p) = paths {
        cfg.ensemble.paths = p;
    }
    if let Some(w) = workers {
        cfg.ensemble.workers = w;
    }
    let violations = cfg.violations();
    if !violations.is_empty() {
        return Err(Error::ConfigValidation(violations));
    }
    Ok(cfg)
}

fn dispatch(cmd: Command) -> Result<ExitCode, Error> {
    match cmd {
        Command::Simulate {
            config,
            seed,
            paths,
            out,
            workers,
        } => {
            let cfg = load_with_overrides(&config, seed, paths, workers)?;
            let diverged = simulate_to_dir(&cfg, &out)?;
            println!(
                "{}",
                json!({
                    "schema_version": SCHEMA_VERSION,
                    "out": out,
                    "paths": cfg.ensemble.paths,
                    "diverged": diverged,
                })
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Run {
            config,
            seed,
            paths,
            out,
            workers,
        } => {
            let cfg = load_with_overrides(&config, seed, paths, workers)?;
            let report = run_ensemble(&cfg, Some(&out))?;
            emit_plot_data(&report, &out)?;
            println!(
                "{}",
                json!({
                    "schema_version": SCHEMA_VERSION,
                    "out": out,
                    "paths": report.paths.len(),
                    "excluded": report.aggregate.excluded_paths,
                    "median_space_exponent": report.aggregate.median_space,
                    "median_time_exponent": report.aggregate.median_time,
                    "median_boundary_slope": report.aggregate.median_boundary,
                    "cutoff_active_fraction": report.aggregate.cutoff_active_fraction,
                    "valid": report.aggregate.valid,
                })
            );
            if report.aggregate.valid {
                Ok(ExitCode::SUCCESS)
            } else {
                eprintln!(
                    "error: {} of {} paths diverged; report flagged invalid",
                    report.aggregate.excluded_paths,
                    report.paths.len()
                );
                Ok(ExitCode::from(3))
            }
        }
        Command::Estimate {
            traj_dir,
            kappa,
            lambda,
            p,
            theta,
            alpha,
            beta,
            delta,
            out,
        } => {
            let files = list_trajectories(&traj_dir)?;
            if files.is_empty() {
                return Err(Error::InvalidParameter(format!(
                    "no trajectory files in {}",
                    traj_dir.display()
                )));
            }
            // admissible mid-range defaults for (alpha, beta)
            let hi = 0.25 - kappa / 2.0 - 1.0 / (2.0 * p);
            let w = hi - 1.0 / p;
            let alpha = alpha.unwrap_or(1.0 / p + w / 3.0);
            let beta = beta.unwrap_or(1.0 / p + 2.0 * w / 3.0);
            HolderTargets::new(kappa, lambda, p, theta, alpha, beta, delta)?;

            let first = read_trajectory(&files[0])?;
            let mut cfg = ExperimentConfig::preset("lambda025")?;
            cfg.problem.lambda = lambda;
            cfg.scheme.n = first.meta.n;
            cfg.scheme.dt_override = Some(first.meta.dt);
            cfg.scheme.k_modes = first.meta.k_modes;
            cfg.scheme.cutoff_m = first.meta.cutoff_m;
            cfg.scheme.snapshots = first.snapshots.len().saturating_sub(1);
            cfg.problem.horizon = first.snapshots.last().map(|(t, _)| *t).unwrap_or(1.0);
            cfg.estimation.kappa = kappa;
            cfg.estimation.p = p;
            cfg.estimation.theta = theta;
            cfg.estimation.alpha = alpha;
            cfg.estimation.beta = beta;
            cfg.estimation.delta = delta;
            cfg.estimation.lag_base = if first.meta.n >= 512 { 2 } else { 1 };
            cfg.ensemble.paths = files.len();

            let mut summaries = Vec::with_capacity(files.len());
            for f in &files {
                let traj = read_trajectory(f)?;
                summaries.push(summarize_path(&traj, &cfg));
            }
            summaries.sort_by_key(|s| s.path_index);
            let agg = aggregate(&summaries, &cfg);
            let report = EnsembleReport {
                schema_version: SCHEMA_VERSION,
                config: cfg,
                paths: summaries,
                aggregate: agg,
                timing: Timing::default(),
            };
            std::fs::write(&out, report_json(&report)?)?;
            println!(
                "{}",
                json!({
                    "schema_version": SCHEMA_VERSION,
                    "report": out,
                    "paths": report.paths.len(),
                    "median_space_exponent": report.aggregate.median_space,
                    "median_time_exponent": report.aggregate.median_time,
                    "median_boundary_slope": report.aggregate.median_boundary,
                })
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Norm {
            order,
            p,
            theta,
            kappa,
            input,
        } => {
            let u = read_sampled_function(&input)?;
            let psi = make_psi(1.0, 1.0)?;
            let value = match order.as_str() {
                "0" | "1" | "2" => {
                    let ord = match order.as_str() {
                        "0" => NormOrder::Zero,
                        "1" => NormOrder::One,
                        _ => NormOrder::Two,
                    };
                    let spec = SpaceSpec::new(p, theta, ord)?;
                    weighted_integer_norm(&u, &spec, WeightChoice::Rho)?
                }
                "neg" => {
                    let kappa = kappa.ok_or_else(|| {
                        Error::InvalidParameter("--kappa required for order 'neg'".into())
                    })?;
                    let spec = SpaceSpec::new(p, theta, NormOrder::NegativeBessel { kappa })?;
                    let zeta = make_zeta(p)?;
                    let table = KernelTable::build(kappa)?;
                    bessel_negative_norm(&u, &spec, &zeta, &psi, &table)?
                }
                other => {
                    return Err(Error::InvalidParameter(format!(
                        "order must be 0, 1, 2 or neg, got '{other}'"
                    )))
                }
            };
            // the order-zero dyadic variant is reported alongside for
            // equivalence checks
            let dyadic = if order == "0" {
                let spec = SpaceSpec::new(p, theta, NormOrder::Zero)?;
                let zeta = make_zeta(p)?;
                Some(dyadic_norm(&u, &spec, &zeta, &psi)?)
            } else {
                None
            };
            println!(
                "{}",
                json!({
                    "schema_version": SCHEMA_VERSION,
                    "order": order,
                    "p": p,
                    "theta": theta,
                    "kappa": kappa,
                    "norm": value,
                    "dyadic_norm": dyadic,
                })
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::CheckWeight { k, delta0, grid } => {
            let psi = make_psi(k, delta0)?;
            let (c_lo, c_hi) = comparability_constants(&psi, grid)?;
            // worst case over the admissible drift bound |2a_x - b| <= 3K
            let mut worst = f64::NEG_INFINITY;
            for i in 1..grid {
                let x = i as Real / grid as Real;
                let g = delta0 * psi.psi_second(x) + 3.0 * k * psi.psi_prime(x).abs();
                worst = worst.max(g);
            }
            println!(
                "{}",
                json!({
                    "schema_version": SCHEMA_VERSION,
                    "K": k,
                    "delta0": delta0,
                    "k1": psi.k1(),
                    "grid": grid,
                    "c_lo": c_lo,
                    "c_hi": c_hi,
                    "worst_generator_value": worst,
                    "pass": worst <= 1e-12,
                })
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::EmitPlots { report, out } => {
            let text = std::fs::read_to_string(&report)?;
            let report: EnsembleReport = serde_json::from_str(&text)?;
            emit_plot_data(&report, &out)?;
            println!(
                "{}",
                json!({ "schema_version": SCHEMA_VERSION, "out": out })
            );
            Ok(ExitCode::SUCCESS)
        }
    }
}

/// CSV with columns x,u (header optional) sampled on the uniform grid
/// over [0,1] with zero boundary values.
fn read_sampled_function(path: &Path) -> Result<GridFunction<Real>, Error> {
    let text = std::fs::read_to_string(path)?;
    let mut xs: Vec<Real> = Vec::new();
    let mut us: Vec<Real> = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with('x') {
            continue;
        }
        let mut it = line.split(',');
        let (Some(x), Some(u)) = (it.next(), it.next()) else {
            return Err(Error::InvalidParameter(format!("bad CSV row '{line}'")));
        };
        xs.push(x.trim().parse::<Real>().map_err(|e| {
            Error::InvalidParameter(format!("bad x value '{x}': {e}"))
        })?);
        us.push(u.trim().parse::<Real>().map_err(|e| {
            Error::InvalidParameter(format!("bad u value '{u}': {e}"))
        })?);
    }
    if xs.len() < 3 {
        return Err(Error::InvalidParameter("need at least 3 samples".into()));
    }
    let n = xs.len() - 1;
    for (i, &x) in xs.iter().enumerate() {
        let expect = i as Real / n as Real;
        if (x - expect).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!(
                "sample {i} at x = {x}, expected the uniform node {expect}"
            )));
        }
    }
    GridFunction::new(us)
}
