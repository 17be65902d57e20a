//! Empirical regularity extraction from trajectories: interior Hölder
//! exponents in space and time (structure-function log-log fits),
//! boundary-decay slopes, and the predicted exponent targets they are
//! checked against.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::{fit_loglog, LineFit};
use crate::grid::GridFunction;
use crate::scalar::{lit, Scalar};
use crate::solver::Trajectory;
use crate::weight::WeightFn;

/// Parameter bundle (kappa, lambda, p, theta, alpha, beta, delta) with
/// every chained admissibility constraint enforced at construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HolderTargets<T> {
    kappa: T,
    lambda: T,
    p: T,
    theta: T,
    alpha: T,
    beta: T,
    delta: T,
}

impl<T: Scalar> HolderTargets<T> {
    #[allow(clippy::too_many_arguments)]
    pub fn new(kappa: T, lambda: T, p: T, theta: T, alpha: T, beta: T, delta: T) -> Result<Self> {
        let mut violations = Vec::new();
        let half = lit::<T>(0.5);
        if !(lambda >= T::zero() && lambda < half) {
            violations.push(format!("lambda must lie in [0, 1/2), got {lambda}"));
        }
        if !(kappa > lambda && kappa < half) {
            violations.push(format!(
                "kappa must lie in (lambda, 1/2) = ({lambda}, 0.5), got {kappa}"
            ));
        }
        let p_min_a = lit::<T>(6.0) / (T::one() - lit::<T>(2.0) * kappa);
        let p_min_b = if lambda > T::zero() {
            lit::<T>(2.0) * lambda * theta / (T::one() - lit::<T>(2.0) * lambda)
        } else {
            T::zero()
        };
        if !(p > p_min_a && p > p_min_b) {
            violations.push(format!(
                "p must exceed max(6/(1-2kappa), 2*lambda*theta/(1-2lambda)) = max({p_min_a}, {p_min_b}), got {p}"
            ));
        }
        let theta_max = T::one() + p * (half + kappa);
        if !(theta > T::zero() && theta <= theta_max) {
            violations.push(format!(
                "theta must lie in (0, 1 + p(1/2+kappa)] = (0, {theta_max}], got {theta}"
            ));
        }
        let beta_max = lit::<T>(0.25) - kappa / lit::<T>(2.0) - (lit::<T>(2.0) * p).recip();
        if !(alpha > p.recip() && alpha < beta && beta < beta_max) {
            violations.push(format!(
                "need 1/p < alpha < beta < 1/4 - kappa/2 - 1/(2p) = {beta_max}, got alpha={alpha}, beta={beta}"
            ));
        }
        let delta_max = half - kappa - lit::<T>(2.0) * beta - p.recip();
        if !(delta >= T::zero() && delta < delta_max) {
            violations.push(format!(
                "delta must lie in [0, 1/2 - kappa - 2beta - 1/p) = [0, {delta_max}), got {delta}"
            ));
        }
        if !violations.is_empty() {
            return Err(Error::ConfigValidation(violations));
        }
        let t = Self {
            kappa,
            lambda,
            p,
            theta,
            alpha,
            beta,
            delta,
        };
        debug_assert!(t.space_exponent() > T::zero());
        Ok(t)
    }

    pub fn kappa(&self) -> T {
        self.kappa
    }

    pub fn lambda(&self) -> T {
        self.lambda
    }

    pub fn p(&self) -> T {
        self.p
    }

    pub fn theta(&self) -> T {
        self.theta
    }

    /// alpha - 1/p
    pub fn time_exponent(&self) -> T {
        self.alpha - self.p.recip()
    }

    /// 1/2 - kappa - 2 beta - 1/p - delta (positive by construction)
    pub fn space_exponent(&self) -> T {
        lit::<T>(0.5) - self.kappa - lit::<T>(2.0) * self.beta - self.p.recip() - self.delta
    }

    /// -1/2 - kappa - 1/p + theta/p - delta
    pub fn weight_exponent(&self) -> T {
        -lit::<T>(0.5) - self.kappa - self.p.recip() + self.theta / self.p - self.delta
    }

    /// Largest admissible space exponent over (alpha, beta):
    /// 1/2 - kappa - 3/p.
    pub fn sup_space_exponent(&self) -> T {
        lit::<T>(0.5) - self.kappa - lit::<T>(3.0) / self.p
    }

    /// Largest admissible time exponent: 1/4 - kappa/2 - 3/(2p).
    pub fn sup_time_exponent(&self) -> T {
        lit::<T>(0.25) - self.kappa / lit::<T>(2.0) - lit::<T>(1.5) / self.p
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentBundle<T> {
    pub time: T,
    pub space: T,
    pub weight: T,
}

pub fn target_exponents<T: Scalar>(targets: &HolderTargets<T>) -> ExponentBundle<T> {
    ExponentBundle {
        time: targets.time_exponent(),
        space: targets.space_exponent(),
        weight: targets.weight_exponent(),
    }
}

/// Statistic over the increment population at one lag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum IncrementStat {
    /// Largest |increment|: sensitive to the worst-regularity point,
    /// the calibrated default.
    Max,
    Median,
    Mean,
}

impl IncrementStat {
    fn apply<T: Scalar>(&self, values: &mut Vec<T>) -> T {
        match self {
            IncrementStat::Max => values.iter().copied().fold(T::zero(), T::max),
            IncrementStat::Median => median_in_place(values),
            IncrementStat::Mean => {
                let n = T::from_usize(values.len()).unwrap();
                values.iter().copied().sum::<T>() / n
            }
        }
    }
}

fn median_in_place<T: Scalar>(values: &mut [T]) -> T {
    let n = values.len();
    debug_assert!(n > 0);
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) * lit(0.5)
    }
}

pub fn median_of<T: Scalar>(values: &[T]) -> Option<T> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    Some(median_in_place(&mut v))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate<T> {
    pub value: T,
    pub half_width: T,
    pub r_squared: T,
}

impl<T: Scalar> Estimate<T> {
    fn from_fit(f: LineFit<T>) -> Self {
        Self {
            value: f.slope,
            half_width: f.slope_stderr,
            r_squared: f.r_squared,
        }
    }
}

/// Dyadic lags m, 2m, 4m, ... in grid-cell units.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LagSpec {
    pub base: usize,
    pub count: usize,
}

impl Default for LagSpec {
    fn default() -> Self {
        // 2dx..16dx: three octaves
        Self { base: 2, count: 4 }
    }
}

impl LagSpec {
    pub fn multiples(&self) -> Vec<usize> {
        (0..self.count).map(|j| self.base << j).collect()
    }

    pub fn max_multiple(&self) -> usize {
        self.base << (self.count - 1)
    }
}

fn snapshot_fields<T: Scalar>(traj: &Trajectory<T>) -> Vec<&GridFunction<T>> {
    traj.snapshots.iter().map(|(_, g)| g).collect()
}

fn space_window<T: Scalar>(
    traj: &Trajectory<T>,
    margin: T,
    lags: &LagSpec,
) -> Result<(usize, usize, T)> {
    if margin <= T::zero() || margin >= lit(0.5) {
        return Err(Error::InvalidParameter(format!(
            "margin must lie in (0, 1/2), got {margin}"
        )));
    }
    if lags.count < 4 {
        return Err(Error::InvalidParameter(
            "lags must span at least 3 octaves (4 dyadic values)".into(),
        ));
    }
    let n = traj.meta.n;
    let dx = T::one() / T::from_usize(n).unwrap();
    let max_lag = T::from_usize(lags.max_multiple()).unwrap() * dx;
    if max_lag > margin / lit(4.0) {
        return Err(Error::InvalidParameter(format!(
            "max lag {max_lag} exceeds margin/4 = {}",
            margin / lit(4.0)
        )));
    }
    let i0 = (margin / dx).ceil().to_usize().unwrap().max(1);
    let i1 = ((T::one() - margin) / dx).floor().to_usize().unwrap().min(n - 1);
    if i1 <= i0 {
        return Err(Error::InvalidParameter("empty interior window".into()));
    }
    Ok((i0, i1, dx))
}

/// Space structure function: per lag h, the median across snapshots of a
/// statistic of |u(t, x+h) - u(t, x)| over x in [margin, 1-margin].
pub fn space_structure<T: Scalar>(
    traj: &Trajectory<T>,
    margin: T,
    lags: LagSpec,
    stat: IncrementStat,
) -> Result<Vec<(T, T)>> {
    let (i0, i1, dx) = space_window(traj, margin, &lags)?;
    Ok(space_curve_over(&snapshot_fields(traj), i0, i1, dx, &lags, stat))
}

/// Interior space-Hölder estimate: log-log slope of the space structure
/// function. None when the field is degenerate (all zero).
pub fn holder_exponent_space<T: Scalar>(
    traj: &Trajectory<T>,
    margin: T,
    lags: LagSpec,
    stat: IncrementStat,
) -> Result<Option<Estimate<T>>> {
    let curve = space_structure(traj, margin, lags, stat)?;
    Ok(fit_curve(&curve))
}

fn fit_curve<T: Scalar>(curve: &[(T, T)]) -> Option<Estimate<T>> {
    if curve.len() < 2 {
        return None;
    }
    let hs: Vec<T> = curve.iter().map(|&(h, _)| h).collect();
    let vals: Vec<T> = curve.iter().map(|&(_, v)| v).collect();
    fit_loglog(&hs, &vals).map(Estimate::from_fit)
}

fn space_curve_over<T: Scalar>(
    fields: &[&GridFunction<T>],
    i0: usize,
    i1: usize,
    dx: T,
    lags: &LagSpec,
    stat: IncrementStat,
) -> Vec<(T, T)> {
    let mut curve = Vec::with_capacity(lags.count);
    for m in lags.multiples() {
        let mut per_snapshot = Vec::with_capacity(fields.len());
        for g in fields {
            let v = g.values();
            let mut incs = Vec::with_capacity(i1 - i0);
            for i in i0..=i1 - m {
                incs.push((v[i + m] - v[i]).abs());
            }
            if incs.is_empty() {
                continue;
            }
            let s = stat.apply(&mut incs);
            if s > T::zero() {
                per_snapshot.push(s);
            }
        }
        if per_snapshot.is_empty() {
            continue; // degenerate at this lag
        }
        curve.push((
            T::from_usize(m).unwrap() * dx,
            median_in_place(&mut per_snapshot),
        ));
    }
    curve
}

/// Time structure function for plotting: per lag, the median over the
/// sampled interior nodes of the per-node increment statistic.
pub fn time_structure<T: Scalar>(
    traj: &Trajectory<T>,
    x_window: (T, T),
    lag_count: usize,
    stat: IncrementStat,
) -> Result<Vec<(T, T)>> {
    let cols = time_columns(traj, x_window, lag_count)?;
    let snaps = &traj.snapshots;
    let delta = snaps[1].0 - snaps[0].0;
    let mut curve = Vec::with_capacity(lag_count);
    for j in 0..lag_count {
        let m = 1usize << j;
        let mut per_x = Vec::with_capacity(cols.len());
        for &i in &cols {
            let mut incs: Vec<T> = (0..snaps.len() - m)
                .map(|k| (snaps[k + m].1.values()[i] - snaps[k].1.values()[i]).abs())
                .collect();
            let s = stat.apply(&mut incs);
            if s > T::zero() {
                per_x.push(s);
            }
        }
        if per_x.is_empty() {
            continue;
        }
        curve.push((
            T::from_usize(m).unwrap() * delta,
            median_in_place(&mut per_x),
        ));
    }
    Ok(curve)
}

fn time_columns<T: Scalar>(
    traj: &Trajectory<T>,
    x_window: (T, T),
    lag_count: usize,
) -> Result<Vec<usize>> {
    let snaps = &traj.snapshots;
    if snaps.len() < 65 {
        return Err(Error::InvalidParameter(format!(
            "need >= 64 uniform snapshot intervals, got {}",
            snaps.len().saturating_sub(1)
        )));
    }
    if lag_count < 4 {
        return Err(Error::InvalidParameter(
            "lags must span at least 3 octaves (4 dyadic values)".into(),
        ));
    }
    let delta = snaps[1].0 - snaps[0].0;
    for w in snaps.windows(2) {
        if ((w[1].0 - w[0].0) - delta).abs() > delta * lit(1e-6) {
            return Err(Error::InvalidParameter(
                "snapshots must be uniformly spaced".into(),
            ));
        }
    }
    let max_lag_steps = 1usize << (lag_count - 1);
    if max_lag_steps * 4 > snaps.len() {
        return Err(Error::InvalidParameter(
            "snapshot run too short for the requested lags".into(),
        ));
    }
    let n = traj.meta.n;
    let dx = T::one() / T::from_usize(n).unwrap();
    let i0 = (x_window.0 / dx).ceil().to_usize().unwrap().max(1);
    let i1 = (x_window.1 / dx).floor().to_usize().unwrap().min(n - 1);
    if i1 <= i0 {
        return Err(Error::InvalidParameter("empty x window".into()));
    }
    let stride = ((i1 - i0) / 128).max(1);
    Ok((i0..=i1).step_by(stride).collect())
}

/// Time-Hölder estimate: per interior node x, a per-lag statistic of
/// |u(t + m*delta, x) - u(t, x)| over t, a log-log fit per node, and the
/// median of the per-node slopes over the window.
pub fn holder_exponent_time<T: Scalar>(
    traj: &Trajectory<T>,
    x_window: (T, T),
    lag_count: usize,
    stat: IncrementStat,
) -> Result<Option<Estimate<T>>> {
    let cols = time_columns(traj, x_window, lag_count)?;
    let snaps = &traj.snapshots;
    let delta = snaps[1].0 - snaps[0].0;
    let mut slopes = Vec::new();
    let mut r2s = Vec::new();
    for &i in &cols {
        let mut hs = Vec::with_capacity(lag_count);
        let mut vals = Vec::with_capacity(lag_count);
        for j in 0..lag_count {
            let m = 1usize << j;
            let mut incs: Vec<T> = (0..snaps.len() - m)
                .map(|k| (snaps[k + m].1.values()[i] - snaps[k].1.values()[i]).abs())
                .collect();
            let s = stat.apply(&mut incs);
            if s > T::zero() {
                hs.push(T::from_usize(m).unwrap() * delta);
                vals.push(s);
            }
        }
        if hs.len() >= 2 {
            if let Some(f) = fit_loglog(&hs, &vals) {
                slopes.push(f.slope);
                r2s.push(f.r_squared);
            }
        }
    }
    if slopes.is_empty() {
        return Ok(None);
    }
    let value = median_of(&slopes).unwrap();
    // spread of the per-node slopes as the half-width
    let nf = T::from_usize(slopes.len()).unwrap();
    let mean = slopes.iter().copied().sum::<T>() / nf;
    let var = slopes
        .iter()
        .map(|&s| (s - mean) * (s - mean))
        .sum::<T>()
        / nf;
    Ok(Some(Estimate {
        value,
        half_width: (var / nf).sqrt(),
        r_squared: median_of(&r2s).unwrap(),
    }))
}

/// Boundary-decay slope: M(x) = sup over snapshots of |u(t,x)|, fitted as
/// log M against log rho(x) over a window adjacent to the boundary,
/// mirrored on the right and averaged.
pub fn boundary_decay<T: Scalar>(
    traj: &Trajectory<T>,
    fit_window: (T, T),
) -> Result<Option<Estimate<T>>> {
    let n = traj.meta.n;
    let dx = T::one() / T::from_usize(n).unwrap();
    let (lo, hi) = fit_window;
    if lo <= T::zero() || hi > lit(0.1) || lo >= hi {
        return Err(Error::InvalidParameter(format!(
            "fit window ({lo}, {hi}) must sit inside (0, 0.1]"
        )));
    }
    let i_lo = (lo / dx).ceil().to_usize().unwrap().max(1);
    let i_hi = (hi / dx).floor().to_usize().unwrap();
    if i_hi < i_lo + 7 {
        return Err(Error::InvalidParameter(
            "need >= 8 grid points in the boundary window".into(),
        ));
    }
    let (left_pts, right_pts) = boundary_profile_points(traj, i_lo, i_hi);
    boundary_fit_from_profile(&left_pts, &right_pts)
}

/// (rho, sup_t |u|) points used by the boundary fit, left then right side.
pub fn boundary_profile<T: Scalar>(
    traj: &Trajectory<T>,
    fit_window: (T, T),
) -> Result<(Vec<(T, T)>, Vec<(T, T)>)> {
    let n = traj.meta.n;
    let dx = T::one() / T::from_usize(n).unwrap();
    let (lo, hi) = fit_window;
    if lo <= T::zero() || hi > lit(0.1) || lo >= hi {
        return Err(Error::InvalidParameter(format!(
            "fit window ({lo}, {hi}) must sit inside (0, 0.1]"
        )));
    }
    let i_lo = (lo / dx).ceil().to_usize().unwrap().max(1);
    let i_hi = (hi / dx).floor().to_usize().unwrap();
    if i_hi < i_lo + 7 {
        return Err(Error::InvalidParameter(
            "need >= 8 grid points in the boundary window".into(),
        ));
    }
    Ok(boundary_profile_points(traj, i_lo, i_hi))
}

fn boundary_profile_points<T: Scalar>(
    traj: &Trajectory<T>,
    i_lo: usize,
    i_hi: usize,
) -> (Vec<(T, T)>, Vec<(T, T)>) {
    let n = traj.meta.n;
    let dx = T::one() / T::from_usize(n).unwrap();
    let mut sup_profile = vec![T::zero(); n + 1];
    for (_, g) in &traj.snapshots {
        for (i, &v) in g.values().iter().enumerate() {
            sup_profile[i] = sup_profile[i].max(v.abs());
        }
    }
    let pts = |idx: Vec<usize>| -> Vec<(T, T)> {
        idx.into_iter()
            .map(|i| {
                let x = T::from_usize(i).unwrap() * dx;
                (x.min(T::one() - x), sup_profile[i])
            })
            .collect()
    };
    let left = pts((i_lo..=i_hi).collect());
    let right = pts((n - i_hi..=n - i_lo).rev().collect());
    (left, right)
}

/// Average of independent left/right log-log fits of the profile.
pub fn boundary_fit_from_profile<T: Scalar>(
    left: &[(T, T)],
    right: &[(T, T)],
) -> Result<Option<Estimate<T>>> {
    let fit = |pts: &[(T, T)]| -> Option<LineFit<T>> {
        let rhos: Vec<T> = pts.iter().map(|&(r, _)| r).collect();
        let ms: Vec<T> = pts.iter().map(|&(_, m)| m).collect();
        fit_loglog(&rhos, &ms)
    };
    match (fit(left), fit(right)) {
        (Some(l), Some(r)) => {
            let two = lit::<T>(2.0);
            Ok(Some(Estimate {
                value: (l.slope + r.slope) / two,
                half_width: (l.slope_stderr + r.slope_stderr) / two,
                r_squared: (l.r_squared + r.r_squared) / two,
            }))
        }
        _ => Ok(None), // M vanished identically in the window
    }
}

/// Per-path fit diagnostics carried in a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDiagnostics<T> {
    pub space_lag_range: Option<(T, T)>,
    pub time_lag_range: Option<(T, T)>,
    pub space_r_squared: Option<T>,
    pub time_r_squared: Option<T>,
    pub boundary_r_squared: Option<T>,
    pub excluded_path_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HolderReport<T> {
    pub time_exponent: Option<Estimate<T>>,
    pub space_exponent: Option<Estimate<T>>,
    pub boundary_slope: Option<Estimate<T>>,
    pub targets: HolderTargets<T>,
    pub target_bundle: ExponentBundle<T>,
    /// sup over the trajectory of psi^{weight exponent} |u|.
    pub weighted_sup: T,
    /// False when the weighted field overflowed near the boundary -- a
    /// meaningful negative finding, not an error.
    pub weighted_sup_finite: bool,
    pub diagnostics: ReportDiagnostics<T>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorParams<T> {
    pub margin: T,
    pub space_lags: LagSpec,
    pub time_lag_count: usize,
    pub stat: IncrementStat,
    /// Boundary fit window [lo_mult*dx, hi].
    pub boundary_lo_mult: usize,
    pub boundary_hi: T,
}

impl<T: Scalar> Default for EstimatorParams<T> {
    fn default() -> Self {
        Self {
            margin: lit(0.15),
            space_lags: LagSpec::default(),
            time_lag_count: 4,
            stat: IncrementStat::Max,
            boundary_lo_mult: 2,
            boundary_hi: lit(0.05),
        }
    }
}

/// Forms v(t,x) = psi(x)^{weight exponent} u(t,x) (zero at the boundary),
/// runs both Hölder estimators on v across the whole interior, checks
/// finiteness of sup |v|, and attaches the boundary-decay slope of u.
pub fn weighted_holder_field<T: Scalar>(
    traj: &Trajectory<T>,
    targets: &HolderTargets<T>,
    psi: &WeightFn<T>,
    params: &EstimatorParams<T>,
) -> Result<HolderReport<T>> {
    let n = traj.meta.n;
    let dx = T::one() / T::from_usize(n).unwrap();
    let wexp = targets.weight_exponent();
    let mut weighted: Vec<(T, GridFunction<T>)> = Vec::with_capacity(traj.snapshots.len());
    let mut wsup = T::zero();
    let mut finite = true;
    for (t, g) in &traj.snapshots {
        let mut vals = vec![T::zero(); n + 1];
        for i in 1..n {
            let v = psi.psi(g.node(i)).powf(wexp) * g.values()[i];
            if !v.is_finite() {
                finite = false;
            }
            wsup = wsup.max(v.abs());
            vals[i] = v;
        }
        weighted.push((*t, GridFunction::new(vals).expect("zero ends")));
    }
    let vtraj = Trajectory {
        snapshots: weighted,
        ..traj.clone()
    };

    // full-interval estimation: the window is the whole interior and the
    // lag cap is 1/16 instead of margin/4
    let i0 = 1;
    let i1 = n - 1;
    let max_lag = T::from_usize(params.space_lags.max_multiple()).unwrap() * dx;
    if max_lag > lit(1.0 / 16.0) {
        return Err(Error::InvalidParameter(
            "space lags too coarse for full-interval estimation".into(),
        ));
    }
    let space = if finite {
        fit_curve(&space_curve_over(
            &snapshot_fields(&vtraj),
            i0,
            i1,
            dx,
            &params.space_lags,
            params.stat,
        ))
    } else {
        None
    };
    let time = if finite && vtraj.snapshots.len() >= 65 {
        holder_exponent_time(&vtraj, (dx, T::one() - dx), params.time_lag_count, params.stat)?
    } else {
        None
    };
    let blo = T::from_usize(params.boundary_lo_mult).unwrap() * dx;
    let boundary = boundary_decay(traj, (blo, params.boundary_hi))?;

    let lag_lo = T::from_usize(params.space_lags.base).unwrap() * dx;
    let snaps = traj.snapshots.len();
    let delta = if snaps >= 2 {
        traj.snapshots[1].0 - traj.snapshots[0].0
    } else {
        T::zero()
    };
    Ok(HolderReport {
        time_exponent: time,
        space_exponent: space,
        boundary_slope: boundary,
        targets: *targets,
        target_bundle: target_exponents(targets),
        weighted_sup: if finite { wsup } else { T::infinity() },
        weighted_sup_finite: finite,
        diagnostics: ReportDiagnostics {
            space_lag_range: Some((lag_lo, max_lag)),
            time_lag_range: Some((delta, delta * T::from_usize(1 << (params.time_lag_count - 1)).unwrap())),
            space_r_squared: space.map(|e| e.r_squared),
            time_r_squared: time.map(|e| e.r_squared),
            boundary_r_squared: boundary.map(|e| e.r_squared),
            excluded_path_count: 0,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::{SchemeMeta, Trajectory};
    use crate::weight::make_psi;
    use approx::assert_relative_eq;

    fn synthetic_traj(
        n: usize,
        times: &[f64],
        f: impl Fn(f64, f64) -> f64,
    ) -> Trajectory<f64> {
        let snapshots = times
            .iter()
            .map(|&t| (t, GridFunction::from_fn(n, |x| f(t, x))))
            .collect();
        Trajectory {
            snapshots,
            master_seed: 0,
            path_index: 0,
            meta: SchemeMeta {
                n,
                dt: 1e-4,
                k_modes: n - 1,
                cutoff_m: 1.0,
                nu: 0.8,
            },
            cutoff_active: false,
            diverged: false,
        }
    }

    fn targets_crit5() -> HolderTargets<f64> {
        HolderTargets::new(0.3, 0.25, 32.0, 1.0, 0.05, 0.07, 0.0).unwrap()
    }

    #[test]
    fn target_exponent_arithmetic() {
        let t = targets_crit5();
        assert_relative_eq!(t.time_exponent(), 0.05 - 1.0 / 32.0, max_relative = 1e-14);
        assert_relative_eq!(
            t.space_exponent(),
            0.5 - 0.3 - 0.14 - 1.0 / 32.0,
            max_relative = 1e-12
        );
        assert_relative_eq!(t.weight_exponent(), -0.8, max_relative = 1e-12);

        // limiting envelope: kappa -> lambda, p -> inf reproduces
        // (1/4 - lambda/2, 1/2 - lambda)
        let t2 = HolderTargets::new(0.2501, 0.25, 1.0e6, 1.0, 2e-6, 3e-6, 0.0).unwrap();
        assert_relative_eq!(t2.sup_time_exponent(), 0.25 - 0.125, max_relative = 1e-2);
        assert_relative_eq!(t2.sup_space_exponent(), 0.5 - 0.25, max_relative = 1e-2);

        // lambda=0, kappa=0.01, p=1000, theta=1: space ~ 0.49, time ~ 0.245
        let t3 = HolderTargets::new(0.01, 0.0, 1000.0, 1.0, 0.0015, 0.002, 0.0).unwrap();
        assert_relative_eq!(t3.sup_space_exponent(), 0.487, max_relative = 1e-10);
        assert_relative_eq!(t3.sup_time_exponent(), 0.2435, max_relative = 1e-10);
    }

    #[test]
    fn targets_reject_boundary_p() {
        // p = 6/(1-2kappa) exactly violates the strict inequality
        let kappa = 0.25;
        let p = 6.0 / (1.0 - 2.0 * kappa);
        assert!(HolderTargets::new(kappa, 0.0, p, 1.0, 0.1, 0.11, 0.0).is_err());
        // kappa must exceed lambda
        assert!(HolderTargets::new(0.2, 0.25, 32.0, 1.0, 0.05, 0.07, 0.0).is_err());
        // theta = 0 rejected
        assert!(HolderTargets::new(0.3, 0.25, 32.0, 0.0, 0.05, 0.07, 0.0).is_err());
    }

    #[test]
    fn targets_monotone_in_kappa() {
        let mk = |kappa: f64| {
            // keep (alpha, beta) admissible for every kappa tested
            HolderTargets::new(kappa, 0.0, 64.0, 1.0, 0.02, 0.025, 0.0).unwrap()
        };
        let mut prev_s = f64::INFINITY;
        let mut prev_t = f64::INFINITY;
        for k in [0.05, 0.15, 0.25, 0.35] {
            let t = mk(k);
            assert!(t.sup_space_exponent() < prev_s);
            assert!(t.sup_time_exponent() < prev_t);
            prev_s = t.sup_space_exponent();
            prev_t = t.sup_time_exponent();
        }
    }

    #[test]
    fn space_estimator_on_lipschitz_function() {
        let traj = synthetic_traj(512, &[0.0, 1.0], |_, x| x);
        let est = holder_exponent_space(&traj, 0.15, LagSpec::default(), IncrementStat::Max)
            .unwrap()
            .unwrap();
        assert!((est.value - 1.0).abs() <= 0.01, "slope {}", est.value);
    }

    #[test]
    fn space_estimator_on_cusp() {
        let traj = synthetic_traj(512, &[0.0, 1.0], |_, x| (x - 0.5).abs().powf(0.3));
        let est = holder_exponent_space(&traj, 0.15, LagSpec::default(), IncrementStat::Max)
            .unwrap()
            .unwrap();
        assert!((est.value - 0.3).abs() <= 0.05, "slope {}", est.value);
    }

    #[test]
    fn space_estimator_calibration_family() {
        // node-aligned cusps |x - x0|^gamma, gamma = 0.1..0.9:
        // max error <= 0.05, and refinement changes estimates by < 0.02
        for n in [512usize, 1024] {
            for x0 in [0.25, 0.375, 0.5, 0.625] {
                for g10 in 1..=9 {
                    let gamma = g10 as f64 / 10.0;
                    let traj =
                        synthetic_traj(n, &[0.0, 1.0], |_, x| (x - x0).abs().powf(gamma));
                    let est =
                        holder_exponent_space(&traj, 0.15, LagSpec::default(), IncrementStat::Max)
                            .unwrap()
                            .unwrap();
                    assert!(
                        (est.value - gamma).abs() <= 0.05,
                        "n={n} x0={x0} gamma={gamma}: {}",
                        est.value
                    );
                }
            }
        }
        // refinement stability
        for x0 in [0.25, 0.5] {
            for g10 in [1, 5, 9] {
                let gamma = g10 as f64 / 10.0;
                let est = |n: usize| {
                    let traj =
                        synthetic_traj(n, &[0.0, 1.0], |_, x| (x - x0).abs().powf(gamma));
                    holder_exponent_space(&traj, 0.15, LagSpec::default(), IncrementStat::Max)
                        .unwrap()
                        .unwrap()
                        .value
                };
                assert!((est(512) - est(1024)).abs() < 0.02);
            }
        }
    }

    #[test]
    fn space_estimator_scale_invariant() {
        let traj1 = synthetic_traj(512, &[0.0, 1.0], |_, x| (x - 0.5).abs().powf(0.4));
        let traj2 = synthetic_traj(512, &[0.0, 1.0], |_, x| -7.25 * (x - 0.5).abs().powf(0.4));
        let e1 = holder_exponent_space(&traj1, 0.15, LagSpec::default(), IncrementStat::Max)
            .unwrap()
            .unwrap();
        let e2 = holder_exponent_space(&traj2, 0.15, LagSpec::default(), IncrementStat::Max)
            .unwrap()
            .unwrap();
        assert!((e1.value - e2.value).abs() < 1e-9);
    }

    #[test]
    fn space_estimator_degenerate_and_preconditions() {
        let traj = synthetic_traj(512, &[0.0, 1.0], |_, _| 0.0);
        assert!(
            holder_exponent_space(&traj, 0.15, LagSpec::default(), IncrementStat::Max)
                .unwrap()
                .is_none()
        );
        // max lag above margin/4 rejected
        let r = holder_exponent_space(&traj, 0.05, LagSpec::default(), IncrementStat::Max);
        assert!(r.is_err());
    }

    #[test]
    fn time_estimator_on_linear_growth() {
        let times: Vec<f64> = (0..=128).map(|i| i as f64 / 128.0).collect();
        let traj = synthetic_traj(64, &times, |t, x| t * x * (1.0 - x));
        let est = holder_exponent_time(&traj, (0.15, 0.85), 4, IncrementStat::Median)
            .unwrap()
            .unwrap();
        assert!((est.value - 1.0).abs() <= 0.01, "slope {}", est.value);
    }

    #[test]
    fn time_estimator_on_brownian_path() {
        use crate::noise::RngStream;
        // one Brownian path replicated across x
        let mut rng = RngStream::new(99, 0);
        let steps = 512;
        let mut b = vec![0.0_f64];
        for _ in 0..steps {
            let prev = *b.last().unwrap();
            b.push(prev + rng.normal::<f64>() * (1.0 / steps as f64).sqrt());
        }
        let times: Vec<f64> = (0..=steps).map(|i| i as f64 / steps as f64).collect();
        let snapshots = times
            .iter()
            .enumerate()
            .map(|(k, &t)| {
                let bk = b[k];
                (t, GridFunction::from_fn(32, move |_| bk))
            })
            .collect();
        let traj = Trajectory {
            snapshots,
            master_seed: 0,
            path_index: 0,
            meta: SchemeMeta {
                n: 32,
                dt: 1e-3,
                k_modes: 31,
                cutoff_m: 1.0,
                nu: 0.8,
            },
            cutoff_active: false,
            diverged: false,
        };
        let est = holder_exponent_time(&traj, (0.2, 0.8), 4, IncrementStat::Median)
            .unwrap()
            .unwrap();
        assert!((est.value - 0.5).abs() <= 0.05, "slope {}", est.value);
    }

    #[test]
    fn boundary_decay_calibrations() {
        let traj = synthetic_traj(512, &[0.0, 1.0], |_, x| x * (1.0 - x));
        let est = boundary_decay(&traj, (2.0 / 512.0, 0.05)).unwrap().unwrap();
        assert!((est.value - 1.0).abs() <= 0.02, "slope {}", est.value);

        let psi = make_psi(2.0_f64, 1.0).unwrap();
        let traj = synthetic_traj(512, &[0.0, 1.0], |_, x| psi.psi(x).powf(0.7));
        let est = boundary_decay(&traj, (2.0 / 512.0, 0.05)).unwrap().unwrap();
        assert!((est.value - 0.7).abs() <= 0.05, "slope {}", est.value);

        // degenerate: M = 0 in the window
        let traj = synthetic_traj(512, &[0.0, 1.0], |_, x| {
            if (0.4..=0.6).contains(&x) {
                1.0
            } else {
                0.0
            }
        });
        assert!(boundary_decay(&traj, (2.0 / 512.0, 0.05)).unwrap().is_none());
    }

    #[test]
    fn weighted_field_cancellation() {
        // u = psi^{-weight exponent} * w with w Lipschitz: the weighted
        // field is w itself, so the space exponent is ~1 and sup finite
        let psi = make_psi(2.0_f64, 1.0).unwrap();
        let targets = targets_crit5();
        let e = -targets.weight_exponent();
        let times: Vec<f64> = (0..=128).map(|i| i as f64 / 128.0).collect();
        let traj = synthetic_traj(512, &times, |_, x| psi.psi(x).powf(e) * (0.3 + x));
        let params = EstimatorParams::default();
        let rep = weighted_holder_field(&traj, &targets, &psi, &params).unwrap();
        assert!(rep.weighted_sup_finite);
        let space = rep.space_exponent.unwrap().value;
        assert!((space - 1.0).abs() < 0.05, "space {space}");

        // u = 0: everything degenerate but finite
        let traj0 = synthetic_traj(512, &times, |_, _| 0.0);
        let rep0 = weighted_holder_field(&traj0, &targets, &psi, &params).unwrap();
        assert!(rep0.weighted_sup_finite);
        assert_eq!(rep0.weighted_sup, 0.0);
        assert!(rep0.space_exponent.is_none());
    }

    #[test]
    fn grid_refinement_stability_on_calibrations() {
        // doubling resolution changes calibration estimates by < 0.02
        for (f, _expect) in [
            (
                Box::new(|x: f64| (x - 0.5).abs().powf(0.3)) as Box<dyn Fn(f64) -> f64>,
                0.3,
            ),
            (Box::new(|x: f64| x), 1.0),
        ] {
            let e1 = {
                let traj = synthetic_traj(512, &[0.0, 1.0], |_, x| f(x));
                holder_exponent_space(&traj, 0.15, LagSpec::default(), IncrementStat::Max)
                    .unwrap()
                    .unwrap()
                    .value
            };
            let e2 = {
                let traj = synthetic_traj(1024, &[0.0, 1.0], |_, x| f(x));
                holder_exponent_space(&traj, 0.15, LagSpec::default(), IncrementStat::Max)
                    .unwrap()
                    .unwrap()
                    .value
            };
            assert!((e1 - e2).abs() < 0.02);
        }
    }
}
