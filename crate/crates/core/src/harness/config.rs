//! Experiment configuration: a flat `key = value` text format with named
//! presets, full-constraint validation (every violation reported), and a
//! canonical serializer so parse(serialize(c)) == c.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{EstimatorParams, HolderTargets, IncrementStat, LagSpec};
use crate::grid::GridFunction;
use crate::solver::{CoeffField, Nonlinearity, SchemeParams, SpdeProblem};
use crate::Real;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialData {
    Zero,
    SinPi,
    /// x(1-x)
    Parabola,
}

impl InitialData {
    pub fn to_grid(self, n: usize) -> GridFunction<Real> {
        match self {
            InitialData::Zero => GridFunction::zeros(n),
            InitialData::SinPi => {
                GridFunction::from_fn(n, |x: Real| (std::f64::consts::PI * x).sin())
            }
            InitialData::Parabola => GridFunction::from_fn(n, |x: Real| x * (1.0 - x)),
        }
    }

    fn as_str(self) -> &'static str {
        match self {
            InitialData::Zero => "zero",
            InitialData::SinPi => "sin-pi",
            InitialData::Parabola => "parabola",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "zero" => Some(InitialData::Zero),
            "sin-pi" => Some(InitialData::SinPi),
            "parabola" => Some(InitialData::Parabola),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemConfig {
    pub a: CoeffField<Real>,
    pub b: CoeffField<Real>,
    pub c: CoeffField<Real>,
    pub xi: CoeffField<Real>,
    pub lambda: Real,
    pub u0: InitialData,
    pub horizon: Real,
    pub delta0: Real,
    pub big_k: Real,
    pub nonlinearity: Nonlinearity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeConfig {
    pub n: usize,
    /// dt = dt_factor * dx^2 unless dt overrides it.
    pub dt_factor: Real,
    pub dt_override: Option<Real>,
    /// 0 means full resolution (n - 1 modes).
    pub k_modes: usize,
    pub cutoff_m: Real,
    /// Number of uniform snapshot intervals.
    pub snapshots: usize,
}

impl SchemeConfig {
    pub fn dt(&self) -> Real {
        let dx = 1.0 / self.n as Real;
        self.dt_override.unwrap_or(self.dt_factor * dx * dx)
    }

    pub fn modes(&self) -> usize {
        if self.k_modes == 0 {
            self.n - 1
        } else {
            self.k_modes
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationConfig {
    pub kappa: Real,
    pub p: Real,
    pub theta: Real,
    pub alpha: Real,
    pub beta: Real,
    pub delta: Real,
    pub margin: Real,
    pub lag_base: usize,
    pub lag_count: usize,
    pub time_lag_count: usize,
    pub stat: IncrementStat,
    pub boundary_lo_mult: usize,
    pub boundary_hi: Real,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub paths: usize,
    pub master_seed: u64,
    /// 0 means all available cores.
    pub workers: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub problem: ProblemConfig,
    pub scheme: SchemeConfig,
    pub estimation: EstimationConfig,
    pub ensemble: EnsembleConfig,
}

impl ExperimentConfig {
    pub fn preset(name: &str) -> Result<Self> {
        let mut c = base_config();
        match name {
            // deterministic heat calibration
            "heat" => {
                c.problem.xi = CoeffField::Const(0.0);
                c.problem.u0 = InitialData::SinPi;
                c.problem.horizon = 0.1;
                c.scheme.n = 256;
                c.scheme.dt_override = Some(1e-5);
                c.scheme.snapshots = 100;
                c.ensemble.paths = 1;
            }
            // additive stochastic heat (noise term xi * 1)
"additive" => {
                c.problem.nonlinearity = Nonlinearity::Additive;
                c.problem.u0 = InitialData::Zero;
                c.problem.horizon = 0.5;
                c.scheme.n = 512;
                c.scheme.snapshots = 256;
                c.estimation.lag_base = 2;
                c.ensemble.paths = 64;
            }
            // super-linear multiplicative regime
"lambda025" => {
                c.problem.lambda = 0.25;
                c.problem.u0 = InitialData::Parabola;
                c.problem.horizon = 0.25;
                c.scheme.n = 512;
                c.scheme.snapshots = 256;
                c.estimation.lag_base = 2;
                c.ensemble.paths = 64;
            }
            // nonnegativity ensemble (lambda = 0, linear noise)
            "maxprin" => {
                c.problem.lambda = 0.0;
                c.problem.u0 = InitialData::Parabola;
                c.problem.horizon = 0.25;
                c.scheme.n = 256;
                c.scheme.snapshots = 128;
                c.ensemble.paths = 64;
            }
            // variable coefficients within the admissible bounds
"variable-coeff" => {
                c.problem.a = CoeffField::Poly([1.0, 0.3, -0.3, 0.0]);
                c.problem.b = CoeffField::Poly([0.2, -0.4, 0.0, 0.0]);
                c.problem.c = CoeffField::Const(0.1);
                c.problem.delta0 = 0.75;
                c.problem.big_k = 10.0;
                c.problem.lambda = 0.25;
                c.problem.u0 = InitialData::Parabola;
                c.problem.horizon = 0.25;
                c.scheme.n = 512;
                c.scheme.snapshots = 256;
                c.estimation.lag_base = 2;
                c.ensemble.paths = 64;
            }
            other => {
                return Err(Error::InvalidParameter(format!(
                    "unknown preset '{other}' (presets: heat, additive, lambda025, maxprin, variable-coeff)"
                )))
            }
        }
        Ok(c)
    }

    /// Derived weight exponent nu = 1/2 + kappa + 1/p - theta/p.
    pub fn nu(&self) -> Real {
        0.5 + self.estimation.kappa + 1.0 / self.estimation.p
            - self.estimation.theta / self.estimation.p
    }

    pub fn to_problem(&self) -> SpdeProblem<Real> {
        SpdeProblem {
            a: self.problem.a,
            b: self.problem.b,
            c: self.problem.c,
            xi: self.problem.xi,
            lambda: self.problem.lambda,
            u0: self.problem.u0.to_grid(self.scheme.n),
            horizon: self.problem.horizon,
            delta0: self.problem.delta0,
            big_k: self.problem.big_k,
            nonlinearity: self.problem.nonlinearity,
        }
    }

    pub fn to_scheme(&self) -> SchemeParams<Real> {
        SchemeParams {
            n: self.scheme.n,
            dt: self.scheme.dt(),
            k_modes: self.scheme.modes(),
            cutoff_m: self.scheme.cutoff_m,
            snapshot_times: SchemeParams::uniform_snapshots(
                self.scheme.snapshots,
                self.problem.horizon,
            ),
            nu: self.nu(),
        }
    }

    pub fn to_targets(&self) -> Result<HolderTargets<Real>> {
        let e = &self.estimation;
        HolderTargets::new(
            e.kappa,
            self.problem.lambda,
            e.p,
            e.theta,
            e.alpha,
            e.beta,
            e.delta,
        )
    }

    pub fn to_estimator_params(&self) -> EstimatorParams<Real> {
        let e = &self.estimation;
        EstimatorParams {
            margin: e.margin,
            space_lags: LagSpec {
                base: e.lag_base,
                count: e.lag_count,
            },
            time_lag_count: e.time_lag_count,
            stat: e.stat,
            boundary_lo_mult: e.boundary_lo_mult,
            boundary_hi: e.boundary_hi,
        }
    }

    /// Every violated constraint, named; empty when the config is valid.
    pub fn violations(&self) -> Vec<String> {
        let mut v = self.to_problem().validate();
        let s = &self.scheme;
        if s.n < 64 {
            v.push(format!("scheme.n must be >= 64 for estimation, got {}", s.n));
        }
        if s.dt() <= 0.0 {
            v.push(format!("dt must be > 0, got {}", s.dt()));
        }
        let sup_c = self.problem.c.sup_abs(512);
        if sup_c > 0.0 && s.dt() >= 1.0 / (2.0 * sup_c) {
            v.push(format!(
                "dt = {} violates dt < 1/(2 sup|c|) = {}",
                s.dt(),
                1.0 / (2.0 * sup_c)
            ));
        }
        if s.k_modes > s.n.saturating_sub(1) {
            v.push(format!(
                "k_modes = {} exceeds interior node count {}",
                s.k_modes,
                s.n - 1
            ));
        }
        if s.cutoff_m <= 0.0 {
            v.push(format!("cutoff m must be > 0, got {}", s.cutoff_m));
        }
        if s.snapshots < 64 {
            v.push(format!(
                "snapshots must be >= 64 for time estimation, got {}",
                s.snapshots
            ));
        }
        if s.dt() > 0.0 {
            // snapshots snap to step boundaries; uniform spacing needs the
            // horizon to be a whole number of steps divisible by snapshots
            let steps_f = self.problem.horizon / s.dt();
            let steps = steps_f.round();
            if (steps_f - steps).abs() > 1e-6 * steps.max(1.0) {
                v.push(format!(
                    "horizon/dt = {steps_f} is not a whole number of steps"
                ));
            } else if s.snapshots > 0 && (steps as u64) % (s.snapshots as u64) != 0 {
                v.push(format!(
                    "step count {} is not divisible by snapshots = {}",
                    steps as u64, s.snapshots
                ));
            }
        }
        if let Err(Error::ConfigValidation(mut t)) = self.to_targets() {
            v.append(&mut t);
        }
        let e = &self.estimation;
        if !(e.margin > 0.0 && e.margin < 0.5) {
            v.push(format!("margin must lie in (0, 1/2), got {}", e.margin));
        }
        if e.lag_count < 4 {
            v.push("lag_count must be >= 4 (three octaves)".into());
        } else {
            let max_lag = (e.lag_base << (e.lag_count - 1)) as Real / s.n as Real;
            if max_lag > e.margin / 4.0 {
                v.push(format!(
                    "max space lag {max_lag} exceeds margin/4 = {}",
                    e.margin / 4.0
                ));
            }
        }
        if e.time_lag_count < 4 {
            v.push("time_lag_count must be >= 4 (three octaves)".into());
        } else if (1usize << (e.time_lag_count - 1)) * 4 > s.snapshots + 1 {
            v.push(format!(
                "time lags (max 2^{}) too coarse for {} snapshots",
                e.time_lag_count - 1,
                s.snapshots
            ));
        }
        if !(e.boundary_hi > 0.0 && e.boundary_hi <= 0.1) {
            v.push(format!(
                "boundary_hi must lie in (0, 0.1], got {}",
                e.boundary_hi
            ));
        }
        if e.boundary_lo_mult < 1 {
            v.push("boundary_lo_mult must be >= 1".into());
        } else {
            let i_hi = (e.boundary_hi * s.n as Real).floor() as usize;
            if i_hi < e.boundary_lo_mult + 7 {
                v.push(format!(
                    "boundary window [{}dx, {}] holds fewer than 8 grid points at n = {}",
                    e.boundary_lo_mult, e.boundary_hi, s.n
                ));
            }
        }
        if self.ensemble.paths == 0 {
            v.push("ensemble.paths must be >= 1".into());
        }
        v
    }

    pub fn serialize(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "schema_version = {SCHEMA_VERSION}");
        let _ = writeln!(out, "problem.a = {}", coeff_to_str(&self.problem.a));
        let _ = writeln!(out, "problem.b = {}", coeff_to_str(&self.problem.b));
        let _ = writeln!(out, "problem.c = {}", coeff_to_str(&self.problem.c));
        let _ = writeln!(out, "problem.xi = {}", coeff_to_str(&self.problem.xi));
        let _ = writeln!(out, "problem.lambda = {}", self.problem.lambda);
        let _ = writeln!(out, "problem.u0 = {}", self.problem.u0.as_str());
        let _ = writeln!(out, "problem.horizon = {}", self.problem.horizon);
        let _ = writeln!(out, "problem.delta0 = {}", self.problem.delta0);
        let _ = writeln!(out, "problem.K = {}", self.problem.big_k);
        let _ = writeln!(
            out,
            "problem.nonlinearity = {}",
            match self.problem.nonlinearity {
                Nonlinearity::CutoffPower => "cutoff-power",
                Nonlinearity::Additive => "additive",
            }
        );
        let _ = writeln!(out, "scheme.n = {}", self.scheme.n);
        let _ = writeln!(out, "scheme.dt_factor = {}", self.scheme.dt_factor);
        if let Some(dt) = self.scheme.dt_override {
            let _ = writeln!(out, "scheme.dt = {dt}");
        }
        let _ = writeln!(out, "scheme.k_modes = {}", self.scheme.k_modes);
        let _ = writeln!(out, "scheme.m = {}", self.scheme.cutoff_m);
        let _ = writeln!(out, "scheme.snapshots = {}", self.scheme.snapshots);
        let e = &self.estimation;
        let _ = writeln!(out, "estimation.kappa = {}", e.kappa);
        let _ = writeln!(out, "estimation.p = {}", e.p);
        let _ = writeln!(out, "estimation.theta = {}", e.theta);
        let _ = writeln!(out, "estimation.alpha = {}", e.alpha);
        let _ = writeln!(out, "estimation.beta = {}", e.beta);
        let _ = writeln!(out, "estimation.delta = {}", e.delta);
        let _ = writeln!(out, "estimation.margin = {}", e.margin);
        let _ = writeln!(out, "estimation.lag_base = {}", e.lag_base);
        let _ = writeln!(out, "estimation.lag_count = {}", e.lag_count);
        let _ = writeln!(out, "estimation.time_lag_count = {}", e.time_lag_count);
        let _ = writeln!(
            out,
            "estimation.stat = {}",
            match e.stat {
                IncrementStat::Max => "max",
                IncrementStat::Median => "median",
                IncrementStat::Mean => "mean",
            }
        );
        let _ = writeln!(out, "estimation.boundary_lo_mult = {}", e.boundary_lo_mult);
        let _ = writeln!(out, "estimation.boundary_hi = {}", e.boundary_hi);
        let _ = writeln!(out, "ensemble.paths = {}", self.ensemble.paths);
        let _ = writeln!(out, "ensemble.master_seed = {}", self.ensemble.master_seed);
        let _ = writeln!(out, "ensemble.workers = {}", self.ensemble.workers);
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        // a preset line (wherever it appears) seeds the config; the other
        // keys then override in file order
        let mut cfg = base_config();
        for (lineno, raw) in text.lines().enumerate() {
            let line = strip_comment(raw);
            if line.is_empty() {
                continue;
            }
            let (key, value) = split_kv(line, lineno + 1)?;
            if key == "preset" {
                cfg = Self::preset(value).map_err(|e| Error::ConfigParse {
                    line: lineno + 1,
                    msg: e.to_string(),
                })?;
            }
        }
        for (lineno, raw) in text.lines().enumerate() {
            let line = strip_comment(raw);
            if line.is_empty() {
                continue;
            }
            let (key, value) = split_kv(line, lineno + 1)?;
            if key == "preset" {
                continue;
            }
            apply_key(&mut cfg, key, value).map_err(|msg| Error::ConfigParse {
                line: lineno + 1,
                msg,
            })?;
        }
        Ok(cfg)
    }
}

fn strip_comment(line: &str) -> &str {
    let body = match line.find('#') {
        Some(i) => &line[..i],
        None => line,
    };
    body.trim()
}

fn split_kv(line: &str, lineno: usize) -> Result<(&str, &str)> {
    let mut parts = line.splitn(2, '=');
    let key = parts.next().unwrap_or("").trim();
    let value = parts
        .next()
        .ok_or_else(|| Error::ConfigParse {
            line: lineno,
            msg: format!("expected 'key = value', got '{line}'"),
        })?
        .trim();
    if key.is_empty() {
        return Err(Error::ConfigParse {
            line: lineno,
            msg: "empty key".into(),
        });
    }
    Ok((key, value))
}

fn coeff_to_str(c: &CoeffField<Real>) -> String {
    match c {
        CoeffField::Const(v) => format!("const {v}"),
        CoeffField::Poly(cs) => format!("poly {} {} {} {}", cs[0], cs[1], cs[2], cs[3]),
    }
}

fn coeff_from_str(s: &str) -> std::result::Result<CoeffField<Real>, String> {
    let mut it = s.split_whitespace();
    match it.next() {
        Some("const") => {
            let v = it
                .next()
                .ok_or("const needs one value")?
                .parse::<Real>()
                .map_err(|e| e.to_string())?;
            Ok(CoeffField::Const(v))
        }
        Some("poly") => {
            let mut cs = [0.0; 4];
            for c in cs.iter_mut() {
                *c = it
                    .next()
                    .ok_or("poly needs four coefficients")?
                    .parse::<Real>()
                    .map_err(|e| e.to_string())?;
            }
            Ok(CoeffField::Poly(cs))
        }
        _ => Err(format!("expected 'const v' or 'poly c0 c1 c2 c3', got '{s}'")),
    }
}

fn apply_key(
    cfg: &mut ExperimentConfig,
    key: &str,
    value: &str,
) -> std::result::Result<(), String> {
    let parse_f = |v: &str| v.parse::<Real>().map_err(|e| e.to_string());
    let parse_u = |v: &str| v.parse::<usize>().map_err(|e| e.to_string());
    match key {
        "schema_version" => {
            let v: u32 = value
                .parse()
                .map_err(|e: std::num::ParseIntError| e.to_string())?;
            if v != SCHEMA_VERSION {
                return Err(format!(
                    "unsupported schema_version {v}, expected {SCHEMA_VERSION}"
                ));
            }
        }
        "problem.a" => cfg.problem.a = coeff_from_str(value)?,
        "problem.b" => cfg.problem.b = coeff_from_str(value)?,
        "problem.c" => cfg.problem.c = coeff_from_str(value)?,
        "problem.xi" => cfg.problem.xi = coeff_from_str(value)?,
        "problem.lambda" => cfg.problem.lambda = parse_f(value)?,
        "problem.u0" => {
            cfg.problem.u0 = InitialData::parse(value)
                .ok_or_else(|| format!("unknown u0 '{value}' (zero, sin-pi, parabola)"))?
        }
        "problem.horizon" => cfg.problem.horizon = parse_f(value)?,
        "problem.delta0" => cfg.problem.delta0 = parse_f(value)?,
        "problem.K" => cfg.problem.big_k = parse_f(value)?,
        "problem.nonlinearity" => {
            cfg.problem.nonlinearity = match value {
                "cutoff-power" => Nonlinearity::CutoffPower,
    "additive" => Nonlinearity::Additive,
                other => return Err(format!("unknown nonlinearity '{other}'")),
            }
        }
        "scheme.n" => cfg.scheme.n = parse_u(value)?,
        "scheme.dt_factor" => cfg.scheme.dt_factor = parse_f(value)?,
        "scheme.dt" => cfg.scheme.dt_override = Some(parse_f(value)?),
        "scheme.k_modes" => cfg.scheme.k_modes = parse_u(value)?,
        "scheme.m" => cfg.scheme.cutoff_m = parse_f(value)?,
        "scheme.snapshots" => cfg.scheme.snapshots = parse_u(value)?,
        "estimation.kappa" => cfg.estimation.kappa = parse_f(value)?,
        "estimation.p" => cfg.estimation.p = parse_f(value)?,
        "estimation.theta" => cfg.estimation.theta = parse_f(value)?,
        "estimation.alpha" => cfg.estimation.alpha = parse_f(value)?,
        "estimation.beta" => cfg.estimation.beta = parse_f(value)?,
        "estimation.delta" => cfg.estimation.delta = parse_f(value)?,
        "estimation.margin" => cfg.estimation.margin = parse_f(value)?,
        "estimation.lag_base" => cfg.estimation.lag_base = parse_u(value)?,
        "estimation.lag_count" => cfg.estimation.lag_count = parse_u(value)?,
        "estimation.time_lag_count" => cfg.estimation.time_lag_count = parse_u(value)?,
        "estimation.stat" => {
            cfg.estimation.stat = match value {
                "max" => IncrementStat::Max,
                "median" => IncrementStat::Median,
                "mean" => IncrementStat::Mean,
                other => return Err(format!("unknown statistic '{other}' (max, median, mean)")),
            }
        }
        "estimation.boundary_lo_mult" => cfg.estimation.boundary_lo_mult = parse_u(value)?,
        "estimation.boundary_hi" => cfg.estimation.boundary_hi = parse_f(value)?,
        "ensemble.paths" => cfg.ensemble.paths = parse_u(value)?,
        "ensemble.master_seed" => {
            cfg.ensemble.master_seed = value.parse::<u64>().map_err(|e| e.to_string())?
        }
        "ensemble.workers" => cfg.ensemble.workers = parse_u(value)?,
        other => return Err(format!("unknown key '{other}'")),
    }
    Ok(())
}

fn base_config() -> ExperimentConfig {
    ExperimentConfig {
        problem: ProblemConfig {
            a: CoeffField::Const(1.0),
            b: CoeffField::Const(0.0),
            c: CoeffField::Const(0.0),
            xi: CoeffField::Const(1.0),
            lambda: 0.25,
            u0: InitialData::Parabola,
            horizon: 0.25,
            delta0: 1.0,
            big_k: 2.0,
            nonlinearity: Nonlinearity::CutoffPower,
        },
        scheme: SchemeConfig {
            n: 256,
            dt_factor: 0.25,
            dt_override: None,
            k_modes: 0,
            cutoff_m: 4.0,
            snapshots: 128,
        },
        estimation: EstimationConfig {
            kappa: 0.3,
            p: 32.0,
            theta: 1.0,
            alpha: 0.05,
            beta: 0.07,
            delta: 0.0,
            margin: 0.15,
            lag_base: 1,
            lag_count: 4,
            time_lag_count: 4,
            stat: IncrementStat::Max,
            boundary_lo_mult: 2,
            boundary_hi: 0.05,
        },
        ensemble: EnsembleConfig {
            paths: 16,
            master_seed: 20240501,
            workers: 0,
        },
    }
}

/// Parses and validates; validation failures carry every violated
/// constraint, parse failures carry the line number.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)?;
    let cfg = ExperimentConfig::parse(&text)?;
    let violations = cfg.violations();
    if !violations.is_empty() {
        return Err(Error::ConfigValidation(violations));
    }
    Ok(cfg)
}
