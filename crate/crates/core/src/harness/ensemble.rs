//! Ensemble orchestration: paths are independent work units on a worker
//! pool; the aggregate report is a deterministic fold in path order, so
//! byte-identical output is independent of the worker count.

use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{
    self, boundary_profile, median_of, space_structure, time_structure, Estimate, HolderReport,
};
use crate::noise::RngStream;
use crate::solver::{check_max_principle, negativity_tolerance, simulate_path, Trajectory};
use crate::weight::make_psi;
use crate::Real;

use super::config::{ExperimentConfig, SCHEMA_VERSION};
use super::persist;

/// Fraction of diverged paths above which the whole report is invalid.
pub const MAX_EXCLUDED_FRACTION: Real = 0.05;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PathSummary {
    pub path_index: u64,
    pub diverged: bool,
    pub cutoff_active: bool,
    /// Most negative value over all snapshots.
    pub min_value: Real,
    pub negativity_pass: bool,
    pub report: Option<HolderReport<Real>>,
    /// Structure-function curves for plotting: (lag, statistic).
    pub space_curve: Vec<(Real, Real)>,
    pub time_curve: Vec<(Real, Real)>,
    /// Boundary profile (rho, sup_t |u|), left and right of the domain.
    pub boundary_left: Vec<(Real, Real)>,
    pub boundary_right: Vec<(Real, Real)>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct NegativityStats {
    pub tolerance: Real,
    pub worst: Real,
    pub pass_fraction: Real,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Aggregate {
    pub median_space: Option<Real>,
    pub iqr_space: Option<(Real, Real)>,
    pub median_time: Option<Real>,
    pub iqr_time: Option<(Real, Real)>,
    pub median_boundary: Option<Real>,
    pub iqr_boundary: Option<(Real, Real)>,
    pub weighted_sup_finite_fraction: Real,
    pub cutoff_active_fraction: Real,
    pub negativity: NegativityStats,
    pub excluded_paths: usize,
    /// False when more than 5% of paths diverged.
    pub valid: bool,
}

#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct Timing {
    pub wall_seconds: Real,
    pub paths_per_second: Real,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnsembleReport {
    pub schema_version: u32,
    pub config: ExperimentConfig,
    pub paths: Vec<PathSummary>,
    pub aggregate: Aggregate,
    /// Wall-clock metadata; excluded from the serialized report so that
    /// identical (config, seed) runs produce byte-identical JSON.
    #[serde(skip)]
    pub timing: Timing,
}

/// Simulates one path and extracts estimates and curves. Never panics on
/// path-level trouble; failures are recorded in the summary.
pub fn summarize_path(traj: &Trajectory<Real>, config: &ExperimentConfig) -> PathSummary {
    let params = config.to_estimator_params();
    let neg_tol = negativity_tolerance(
        config.scheme.dt(),
        config.problem.xi.sup_abs(512),
        config.scheme.modes(),
    );
    let min_value = traj
        .snapshots
        .iter()
        .fold(Real::INFINITY, |m, (_, g)| m.min(g.min_value()));
    let negativity_pass = check_max_principle(traj, neg_tol)
        .map(|r| r.pass)
        .unwrap_or(false);

    let mut summary = PathSummary {
        path_index: traj.path_index,
        diverged: traj.diverged,
        cutoff_active: traj.cutoff_active,
        min_value,
        negativity_pass,
        report: None,
        space_curve: Vec::new(),
        time_curve: Vec::new(),
        boundary_left: Vec::new(),
        boundary_right: Vec::new(),
        error: None,
    };
    if traj.diverged {
        return summary;
    }
    let mut run = || -> Result<()> {
        let targets = config.to_targets()?;
        let psi = make_psi(config.problem.big_k, config.problem.delta0)?;
        let mut report = estimators::weighted_holder_field(traj, &targets, &psi, &params)?;
        // unweighted interior estimates drive the aggregate exponents
        report.space_exponent = estimators::holder_exponent_space(
            traj,
            params.margin,
            params.space_lags,
            params.stat,
        )?;
        report.time_exponent = estimators::holder_exponent_time(
            traj,
            (params.margin, 1.0 - params.margin),
            params.time_lag_count,
            params.stat,
        )?;
        summary.space_curve =
            space_structure(traj, params.margin, params.space_lags, params.stat)?;
        summary.time_curve = time_structure(
            traj,
            (params.margin, 1.0 - params.margin),
            params.time_lag_count,
            params.stat,
        )?;
        let dx = 1.0 / traj.meta.n as Real;
        let window = (params.boundary_lo_mult as Real * dx, params.boundary_hi);
        let (l, r) = boundary_profile(traj, window)?;
        summary.boundary_left = l;
        summary.boundary_right = r;
        summary.report = Some(report);
        Ok(())
    };
    if let Err(e) = run() {
        summary.error = Some(e.to_string());
    }
    summary
}

fn quartiles(sorted: &[Real]) -> Option<(Real, Real)> {
    if sorted.is_empty() {
        return None;
    }
    let q = |f: Real| -> Real {
        let pos = f * (sorted.len() - 1) as Real;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        let w = pos - lo as Real;
        sorted[lo] * (1.0 - w) + sorted[hi] * w
    };
    Some((q(0.25), q(0.75)))
}

fn collect_estimates(
    paths: &[PathSummary],
    pick: impl Fn(&HolderReport<Real>) -> Option<Estimate<Real>>,
) -> Vec<Real> {
    let mut vals: Vec<Real> = paths
        .iter()
        .filter(|p| !p.diverged)
        .filter_map(|p| p.report.as_ref())
        .filter_map(|r| pick(r).map(|e| e.value))
        .collect();
    vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    vals
}

pub fn aggregate(paths: &[PathSummary], config: &ExperimentConfig) -> Aggregate {
    let total = paths.len().max(1);
    let excluded = paths.iter().filter(|p| p.diverged).count();
    let kept = total - excluded;
    let space = collect_estimates(paths, |r| r.space_exponent);
    let time = collect_estimates(paths, |r| r.time_exponent);
    let boundary = collect_estimates(paths, |r| r.boundary_slope);
    let finite = paths
        .iter()
        .filter(|p| !p.diverged)
        .filter(|p| p.report.as_ref().map(|r| r.weighted_sup_finite).unwrap_or(false))
        .count();
    let cutoff_active = paths.iter().filter(|p| p.cutoff_active).count();
    let neg_tol = negativity_tolerance(
        config.scheme.dt(),
        config.problem.xi.sup_abs(512),
        config.scheme.modes(),
    );
    let worst = paths
        .iter()
        .fold(Real::INFINITY, |m, p| m.min(p.min_value))
        .min(0.0);
    let neg_pass = paths.iter().filter(|p| p.negativity_pass).count();
    Aggregate {
        median_space: median_of(&space),
        iqr_space: quartiles(&space),
        median_time: median_of(&time),
        iqr_time: quartiles(&time),
        median_boundary: median_of(&boundary),
        iqr_boundary: quartiles(&boundary),
        weighted_sup_finite_fraction: finite as Real / kept.max(1) as Real,
        cutoff_active_fraction: cutoff_active as Real / total as Real,
        negativity: NegativityStats {
            tolerance: neg_tol,
            worst,
            pass_fraction: neg_pass as Real / total as Real,
        },
        excluded_paths: excluded,
        valid: (excluded as Real) <= MAX_EXCLUDED_FRACTION * total as Real,
    }
}

/// Runs the configured ensemble: paths i = 0..count simulated from
/// RngStream(master_seed, i), per-path persistence (when out_dir is
/// given), estimation, and a deterministic aggregate.
pub fn run_ensemble(config: &ExperimentConfig, out_dir: Option<&Path>) -> Result<EnsembleReport> {
    let violations = config.violations();
    if !violations.is_empty() {
        return Err(Error::ConfigValidation(violations));
    }
    let started = Instant::now();
    let problem = config.to_problem();
    let scheme = config.to_scheme();
    let workers = if config.ensemble.workers == 0 {
        std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
    } else {
        config.ensemble.workers
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Numerical(format!("worker pool: {e}")))?;
    let summaries: Vec<Result<PathSummary>> = pool.install(|| {
        (0..config.ensemble.paths as u64)
            .into_par_iter()
            .map(|i| {
                let mut rng = RngStream::new(config.ensemble.master_seed, i);
                let traj = simulate_path(&problem, &scheme, &mut rng)?;
                if let Some(dir) = out_dir {
                    persist::write_trajectory(dir, &traj)?;
                }
                Ok(summarize_path(&traj, config))
            })
            .collect()
    });
    let mut paths = Vec::with_capacity(summaries.len());
    for (i, s) in summaries.into_iter().enumerate() {
        match s {
            Ok(p) => paths.push(p),
            // configuration-level failures abort; path-level ones do not
            Err(e @ Error::ConfigValidation(_)) | Err(e @ Error::InvalidParameter(_)) => {
                return Err(e)
            }
            Err(e) => paths.push(PathSummary {
                path_index: i as u64,
                diverged: true,
                cutoff_active: false,
                min_value: 0.0,
                negativity_pass: false,
                report: None,
                space_curve: Vec::new(),
                time_curve: Vec::new(),
                boundary_left: Vec::new(),
                boundary_right: Vec::new(),
                error: Some(e.to_string()),
            }),
        }
    }
    let aggregate = aggregate(&paths, config);
    let wall = started.elapsed().as_secs_f64();
    let report = EnsembleReport {
        schema_version: SCHEMA_VERSION,
        config: config.clone(),
        paths,
        aggregate,
        timing: Timing {
            wall_seconds: wall,
            paths_per_second: config.ensemble.paths as Real / wall.max(1e-9),
        },
    };
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("report.json"), report_json(&report)?)?;
        std::fs::write(
            dir.join("timing.json"),
            serde_json::to_string_pretty(&report.timing)?,
        )?;
    }
    Ok(report)
}

/// Canonical report serialization (timing excluded by construction).
pub fn report_json(report: &EnsembleReport) -> Result<String> {
    Ok(serde_json::to_string_pretty(report)?)
}

/// Simulation and persistence only (no estimation): one trajectory file
/// per path under `out_dir`. Returns the number of diverged paths.
pub fn simulate_to_dir(config: &ExperimentConfig, out_dir: &Path) -> Result<usize> {
    let violations = config.violations();
    if !violations.is_empty() {
        return Err(Error::ConfigValidation(violations));
    }
    let problem = config.to_problem();
    let scheme = config.to_scheme();
    let workers = if config.ensemble.workers == 0 {
        std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
    } else {
        config.ensemble.workers
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Numerical(format!("worker pool: {e}")))?;
    let diverged: Vec<Result<bool>> = pool.install(|| {
        (0..config.ensemble.paths as u64)
            .into_par_iter()
            .map(|i| {
                let mut rng = RngStream::new(config.ensemble.master_seed, i);
                let traj = simulate_path(&problem, &scheme, &mut rng)?;
                persist::write_trajectory(out_dir, &traj)?;
                Ok(traj.diverged)
            })
            .collect()
    });
    let mut count = 0;
    for d in diverged {
        if d? {
            count += 1;
        }
    }
    Ok(count)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config() -> ExperimentConfig {
        let mut c = ExperimentConfig::preset("lambda025").unwrap();
        c.scheme.n = 128;
        c.scheme.snapshots = 64;
        c.scheme.dt_override = Some(1e-4);
        c.problem.horizon = 0.0256;
        c.ensemble.paths = 4;
        c.estimation.lag_base = 1;
        c.estimation.margin = 0.3;
        c.estimation.boundary_hi = 0.08;
        c
    }

    #[test]
    fn deterministic_report_bytes() {
        let c = tiny_config();
        let r1 = run_ensemble(&c, None).unwrap();
        let r2 = run_ensemble(&c, None).unwrap();
        assert_eq!(report_json(&r1).unwrap(), report_json(&r2).unwrap());
    }

    #[test]
    fn worker_count_does_not_change_bytes() {
        let mut c1 = tiny_config();
        c1.ensemble.workers = 1;
        let mut c2 = tiny_config();
        c2.ensemble.workers = 2;
        let r1 = run_ensemble(&c1, None).unwrap();
        let r2 = run_ensemble(&c2, None).unwrap();
        // identical apart from the config echo (worker count differs)
        let j1 = report_json(&r1).unwrap().replace("\"workers\": 1", "\"workers\": 0");
        let j2 = report_json(&r2).unwrap().replace("\"workers\": 2", "\"workers\": 0");
        assert_eq!(j1, j2);
    }

    #[test]
    fn rejects_invalid_config() {
        let mut c = tiny_config();
        c.estimation.kappa = 0.1; // below lambda
        assert!(matches!(
            run_ensemble(&c, None),
            Err(Error::ConfigValidation(_))
        ));
    }

    #[test]
    fn persists_paths_and_report() {
        let dir = tempfile::tempdir().unwrap();
        let c = tiny_config();
        let r = run_ensemble(&c, Some(dir.path())).unwrap();
        assert_eq!(r.paths.len(), 4);
        let files = persist::list_trajectories(dir.path()).unwrap();
        assert_eq!(files.len(), 4);
        assert!(dir.path().join("report.json").exists());
        assert!(dir.path().join("timing.json").exists());
        // aggregates recomputable from the stored per-path records
        let again = aggregate(&r.paths, &c);
        assert_eq!(
            serde_json::to_string(&again).unwrap(),
            serde_json::to_string(&r.aggregate).unwrap()
        );
    }
}
