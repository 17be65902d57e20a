//! Semi-implicit time stepper for
//!     du = (a u_xx + b u_x + c u) dt + xi |u|^{1+lambda} dB
//! on (0,1) with zero boundary data: drift fully implicit (tridiagonal
//! solve, exact to roundoff), noise explicit with the cutoff nonlinearity
//! evaluated at the previous step.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::noise::{sample_increments, BasisSpec, RngStream, SineSynth};
use crate::scalar::{lit, Scalar};
use crate::weight::make_psi;

/// Paths whose sup-norm exceeds this are marked diverged and excluded
/// from exponent statistics.
pub const DIVERGENCE_SUP: f64 = 1e6;

/// Coefficient field on (t,x); the fields used here are time-constant,
/// evaluation still takes t so the stepper freezes the left endpoint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum CoeffField<T> {
    Const(T),
    /// c0 + c1 x + c2 x^2 + c3 x^3
    Poly([T; 4]),
}

impl<T: Scalar> CoeffField<T> {
    #[inline]
    pub fn eval(&self, _t: T, x: T) -> T {
        match self {
            CoeffField::Const(v) => *v,
            CoeffField::Poly(c) => c[0] + x * (c[1] + x * (c[2] + x * c[3])),
        }
    }

    #[inline]
    pub fn eval_dx(&self, _t: T, x: T) -> T {
        match self {
            CoeffField::Const(_) => T::zero(),
            CoeffField::Poly(c) => {
                c[1] + x * (lit::<T>(2.0) * c[2] + x * lit::<T>(3.0) * c[3])
            }
        }
    }

    pub fn sup_abs(&self, samples: usize) -> T {
        let n = T::from_usize(samples).unwrap();
        (0..=samples)
            .map(|i| self.eval(T::zero(), T::from_usize(i).unwrap() / n).abs())
            .fold(T::zero(), T::max)
    }

    pub fn inf(&self, samples: usize) -> T {
        let n = T::from_usize(samples).unwrap();
        (0..=samples)
            .map(|i| self.eval(T::zero(), T::from_usize(i).unwrap() / n))
            .fold(T::infinity(), T::min)
    }

    /// sup|f| + sup|f'| + sup|f''| estimated by sampled finite differences.
    pub fn c2_norm_sampled(&self, samples: usize) -> T {
        let n = T::from_usize(samples).unwrap();
        let h = T::one() / n;
        let f = |x: T| self.eval(T::zero(), x);
        let mut s0 = T::zero();
        let mut s1 = T::zero();
        let mut s2 = T::zero();
        for i in 0..=samples {
            let x = T::from_usize(i).unwrap() / n;
            s0 = s0.max(f(x).abs());
            if i >= 1 && i < samples {
                let two = lit::<T>(2.0);
                s1 = s1.max(((f(x + h) - f(x - h)) / (two * h)).abs());
                s2 = s2.max(((f(x + h) - two * f(x) + f(x - h)) / (h * h)).abs());
            }
        }
        s0 + s1 + s2
    }
}

/// How the noise coefficient depends on the state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Nonlinearity {
    /// |(-m) v u ^ m|^{1+lambda}
    CutoffPower,
    /// constant 1 (additive calibration)
    Additive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpdeProblem<T> {
    pub a: CoeffField<T>,
    pub b: CoeffField<T>,
    pub c: CoeffField<T>,
    pub xi: CoeffField<T>,
    pub lambda: T,
    pub u0: GridFunction<T>,
    pub horizon: T,
    pub delta0: T,
    pub big_k: T,
    pub nonlinearity: Nonlinearity,
}

impl<T: Scalar> SpdeProblem<T> {
    /// Sampled invariant checks; every violation is listed.
    pub fn validate(&self) -> Vec<String> {
        let mut v = Vec::new();
        let s = 512;
        if self.delta0 <= T::zero() {
            v.push(format!("delta0 must be > 0, got {}", self.delta0));
        }
        if self.big_k <= T::zero() {
            v.push(format!("K must be > 0, got {}", self.big_k));
        }
        if self.a.inf(s) < self.delta0 {
            v.push(format!(
                "a(t,x) >= delta0 violated: min a = {}, delta0 = {}",
                self.a.inf(s),
                self.delta0
            ));
        }
        let c2 = self.a.c2_norm_sampled(s) + self.b.c2_norm_sampled(s) + self.c.c2_norm_sampled(s);
        if c2 >= self.big_k {
            v.push(format!("|a|_C2 + |b|_C2 + |c|_C2 = {c2} must be < K = {}", self.big_k));
        }
        if self.xi.sup_abs(s) > self.big_k {
            v.push(format!(
                "sup|xi| = {} exceeds K = {}",
                self.xi.sup_abs(s),
                self.big_k
            ));
        }
        if self.lambda < T::zero() || self.lambda >= lit(0.5) {
            v.push(format!("lambda must lie in [0, 1/2), got {}", self.lambda));
        }
        if self.u0.min_value() < T::zero() {
            v.push(format!("u0 must be nonnegative, min = {}", self.u0.min_value()));
        }
        if self.horizon <= T::zero() {
            v.push(format!("T must be > 0, got {}", self.horizon));
        }
        v
    }
}

/// |clamp(u, -m, m)|^{1+lambda}; Lipschitz with constant (1+lambda)(2m)^lambda.
#[inline]
pub fn cutoff_nonlinearity<T: Scalar>(u: T, m: T, lambda: T) -> T {
    let clamped = u.max(-m).min(m).abs();
    if lambda == T::zero() {
        clamped
    } else if lambda == lit(0.25) {
        clamped * clamped.sqrt().sqrt()
    } else {
        clamped.powf(T::one() + lambda)
    }
}

/// (1+lambda)(2m)^lambda, a Lipschitz constant for `cutoff_nonlinearity`.
pub fn lipschitz_bound<T: Scalar>(m: T, lambda: T) -> Result<T> {
    if m <= T::zero() {
        return Err(Error::InvalidParameter(format!("m must be > 0, got {m}")));
    }
    Ok((T::one() + lambda) * (lit::<T>(2.0) * m).powf(lambda))
}

/// Thomas elimination for the tridiagonal system; coefficients are
/// consumed as scratch.
fn thomas<T: Scalar>(lower: &[T], diag: &mut [T], upper: &[T], rhs: &mut [T]) -> Result<()> {
    let n = diag.len();
    for i in 1..n {
        let piv = diag[i - 1];
        if piv == T::zero() {
            return Err(Error::Numerical("singular tridiagonal system".into()));
        }
        let w = lower[i] / piv;
        diag[i] = diag[i] - w * upper[i - 1];
        rhs[i] = rhs[i] - w * rhs[i - 1];
    }
    if diag[n - 1] == T::zero() {
        return Err(Error::Numerical("singular tridiagonal system".into()));
    }
    rhs[n - 1] = rhs[n - 1] / diag[n - 1];
    for i in (0..n - 1).rev() {
        rhs[i] = (rhs[i] - upper[i] * rhs[i + 1]) / diag[i];
    }
    Ok(())
}

struct StepWorkspace<T> {
    lower: Vec<T>,
    diag: Vec<T>,
    upper: Vec<T>,
    rhs: Vec<T>,
}

impl<T: Scalar> StepWorkspace<T> {
    fn new(m: usize) -> Self {
        Self {
            lower: vec![T::zero(); m],
            diag: vec![T::zero(); m],
            upper: vec![T::zero(); m],
            rhs: vec![T::zero(); m],
        }
    }
}

/// (Id - dt L) u_next = u + xi * f(u) * noise, interior rows only.
#[allow(clippy::too_many_arguments)]
fn step_inner<T: Scalar>(
    u: &GridFunction<T>,
    dt: T,
    a_vals: &[T],
    b_vals: &[T],
    c_vals: &[T],
    xi_vals: &[T],
    m_cut: T,
    lambda: T,
    nonlinearity: Nonlinearity,
    noise: &GridFunction<T>,
    ws: &mut StepWorkspace<T>,
) -> Result<GridFunction<T>> {
    let n = u.n();
    let m = n - 1;
    let dx = u.dx();
    let inv_dx2 = (dx * dx).recip();
    let inv_2dx = (lit::<T>(2.0) * dx).recip();
    let half = lit::<T>(0.5);

    let sup_c = c_vals.iter().fold(T::zero(), |s, &c| s.max(c.abs()));
    if dt * sup_c >= half {
        return Err(Error::Numerical(format!(
            "dt = {dt} violates the bound dt < 1/(2 sup|c|) with sup|c| = {sup_c}"
        )));
    }

    for i in 0..m {
        let a = a_vals[i];
        let b = b_vals[i];
        let c = c_vals[i];
        ws.lower[i] = -dt * (a * inv_dx2 - b * inv_2dx);
        ws.diag[i] = T::one() + dt * (lit::<T>(2.0) * a * inv_dx2 - c);
        ws.upper[i] = -dt * (a * inv_dx2 + b * inv_2dx);
        let ui = u.values()[i + 1];
        let f = match nonlinearity {
            Nonlinearity::CutoffPower => cutoff_nonlinearity(ui, m_cut, lambda),
            Nonlinearity::Additive => T::one(),
        };
        let r = ui + xi_vals[i] * f * noise.values()[i + 1];
        if !r.is_finite() {
            return Err(Error::Numerical("non-finite right-hand side".into()));
        }
        ws.rhs[i] = r;
    }
    thomas(&ws.lower, &mut ws.diag, &ws.upper, &mut ws.rhs)?;
    let mut next = GridFunction::zeros(n);
    next.interior_mut().copy_from_slice(&ws.rhs);
    Ok(next)
}

/// One semi-implicit step with drift coefficients frozen at time t.
pub fn step<T: Scalar>(
    u: &GridFunction<T>,
    t: T,
    dt: T,
    problem: &SpdeProblem<T>,
    m_cut: T,
    noise: &GridFunction<T>,
) -> Result<GridFunction<T>> {
    if dt <= T::zero() {
        return Err(Error::InvalidParameter(format!("dt must be > 0, got {dt}")));
    }
    if noise.n() != u.n() {
        return Err(Error::InvalidParameter("noise grid mismatch".into()));
    }
    let n = u.n();
    let nodes: Vec<T> = (1..n).map(|i| u.node(i)).collect();
    let a_vals: Vec<T> = nodes.iter().map(|&x| problem.a.eval(t, x)).collect();
    let b_vals: Vec<T> = nodes.iter().map(|&x| problem.b.eval(t, x)).collect();
    let c_vals: Vec<T> = nodes.iter().map(|&x| problem.c.eval(t, x)).collect();
    let xi_vals: Vec<T> = nodes.iter().map(|&x| problem.xi.eval(t, x)).collect();
    let mut ws = StepWorkspace::new(n - 1);
    step_inner(
        u,
        dt,
        &a_vals,
        &b_vals,
        &c_vals,
        &xi_vals,
        m_cut,
        problem.lambda,
        problem.nonlinearity,
        noise,
        &mut ws,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeParams<T> {
    pub n: usize,
    pub dt: T,
    pub k_modes: usize,
    pub cutoff_m: T,
    /// Requested snapshot times; snapped to step boundaries.
    pub snapshot_times: Vec<T>,
    /// Weight exponent nu = 1/2 + kappa + 1/p - theta/p of the cutoff
    /// activity gate sup_x psi^{-nu}|u| >= m/c0.
    pub nu: T,
}

impl<T: Scalar> SchemeParams<T> {
    /// Uniform snapshots 0 = t_0 < ... < t_count = T.
    pub fn uniform_snapshots(count: usize, horizon: T) -> Vec<T> {
        (0..=count)
            .map(|i| horizon * T::from_usize(i).unwrap() / T::from_usize(count).unwrap())
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchemeMeta<T> {
    pub n: usize,
    pub dt: T,
    pub k_modes: usize,
    pub cutoff_m: T,
    pub nu: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory<T> {
    pub snapshots: Vec<(T, GridFunction<T>)>,
    pub master_seed: u64,
    pub path_index: u64,
    pub meta: SchemeMeta<T>,
    /// True when sup_x psi^{-nu}|u| ever reached cutoff_m / sup(psi^nu).
    pub cutoff_active: bool,
    /// True when the path blew up (NaN or sup-norm above 1e6); the
    /// trajectory is truncated at the last finite step.
    pub diverged: bool,
}

impl<T: Scalar> Trajectory<T> {
    pub fn final_state(&self) -> &GridFunction<T> {
        &self.snapshots.last().expect("nonempty trajectory").1
    }

    pub fn times(&self) -> impl Iterator<Item = T> + '_ {
        self.snapshots.iter().map(|(t, _)| *t)
    }
}

/// Integrates from u0 to T, recording snapshots. The cutoff solution is
/// computed pathwise; the whole run is a pure function of
/// (problem, scheme, master_seed, path_index).
pub fn simulate_path<T: Scalar>(
    problem: &SpdeProblem<T>,
    scheme: &SchemeParams<T>,
    rng: &mut RngStream,
) -> Result<Trajectory<T>> {
    if scheme.n < 4 {
        return Err(Error::InvalidParameter("grid too coarse (n >= 4)".into()));
    }
    if scheme.dt <= T::zero() {
        return Err(Error::InvalidParameter("dt must be > 0".into()));
    }
    if scheme.cutoff_m <= T::zero() {
        return Err(Error::InvalidParameter("cutoff m must be > 0".into()));
    }
    if scheme.k_modes == 0 || scheme.k_modes > scheme.n - 1 {
        return Err(Error::InvalidParameter(format!(
            "k_modes must lie in 1..={}, got {}",
            scheme.n - 1,
            scheme.k_modes
        )));
    }
    if scheme.nu < T::zero() {
        return Err(Error::InvalidParameter("nu must be >= 0".into()));
    }
    if problem.u0.n() != scheme.n {
        return Err(Error::InvalidParameter("u0 grid mismatch".into()));
    }
    let horizon = problem.horizon;
    let n_steps = (horizon / scheme.dt).round().to_usize().ok_or_else(|| {
        Error::InvalidParameter("horizon/dt does not fit in usize".into())
    })?;
    if n_steps == 0 {
        return Err(Error::InvalidParameter("T/dt rounds to zero steps".into()));
    }

    // Snap snapshot times to step boundaries.
    let mut snap_steps: Vec<usize> = Vec::with_capacity(scheme.snapshot_times.len());
    for &t in &scheme.snapshot_times {
        if t < -scheme.dt * lit(0.5) || t > horizon + scheme.dt * lit(0.5) {
            return Err(Error::InvalidParameter(format!(
                "snapshot time {t} outside [0, {horizon}]"
            )));
        }
        let idx = (t / scheme.dt).round().to_usize().unwrap().min(n_steps);
        snap_steps.push(idx);
    }
    if snap_steps.first() != Some(&0) || snap_steps.last() != Some(&n_steps) {
        return Err(Error::InvalidParameter(
            "snapshot times must start at 0 and end at T".into(),
        ));
    }
    if snap_steps.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter(
            "snapshot times must be strictly increasing at the dt resolution".into(),
        ));
    }

    let psi = make_psi(problem.big_k, problem.delta0)?;
    let threshold = scheme.cutoff_m / psi.pow_sup(scheme.nu);
    let weight_inv: Vec<T> = (1..scheme.n)
        .map(|i| {
            let x = T::from_usize(i).unwrap() / T::from_usize(scheme.n).unwrap();
            psi.psi(x).powf(-scheme.nu)
        })
        .collect();

    // Time-constant coefficient fields: evaluate node values once.
    let nodes: Vec<T> = (1..scheme.n)
        .map(|i| T::from_usize(i).unwrap() / T::from_usize(scheme.n).unwrap())
        .collect();
    let a_vals: Vec<T> = nodes.iter().map(|&x| problem.a.eval(T::zero(), x)).collect();
    let b_vals: Vec<T> = nodes.iter().map(|&x| problem.b.eval(T::zero(), x)).collect();
    let c_vals: Vec<T> = nodes.iter().map(|&x| problem.c.eval(T::zero(), x)).collect();
    let xi_vals: Vec<T> = nodes.iter().map(|&x| problem.xi.eval(T::zero(), x)).collect();

    let spec = BasisSpec::new(scheme.k_modes)?;
    let mut synth = SineSynth::<T>::new(scheme.n);
    let mut ws = StepWorkspace::new(scheme.n - 1);

    let meta = SchemeMeta {
        n: scheme.n,
        dt: scheme.dt,
        k_modes: scheme.k_modes,
        cutoff_m: scheme.cutoff_m,
        nu: scheme.nu,
    };
    let mut traj = Trajectory {
        snapshots: Vec::with_capacity(snap_steps.len()),
        master_seed: rng.master_seed(),
        path_index: rng.path_index(),
        meta,
        cutoff_active: false,
        diverged: false,
    };

    let mut u = problem.u0.clone();
    let mut next_snap = 0usize;
    let sup_limit = lit::<T>(DIVERGENCE_SUP);
    for step_idx in 0..=n_steps {
        // Record first: snapshots are the state at the start of the step.
        if next_snap < snap_steps.len() && snap_steps[next_snap] == step_idx {
            let t = scheme.dt * T::from_usize(step_idx).unwrap();
            traj.snapshots.push((t, u.clone()));
            next_snap += 1;
        }
        if step_idx == n_steps {
            break;
        }
        let inc = sample_increments(&spec, scheme.dt, rng)?;
        let noise = synth.field(&inc)?;
        let t = scheme.dt * T::from_usize(step_idx).unwrap();
        let _ = t; // coefficients are time-constant; kept for clarity
        match step_inner(
            &u,
            scheme.dt,
            &a_vals,
            &b_vals,
            &c_vals,
            &xi_vals,
            scheme.cutoff_m,
            problem.lambda,
            problem.nonlinearity,
            &noise,
            &mut ws,
        ) {
            Ok(next) => u = next,
            Err(Error::Numerical(msg)) if msg.starts_with("non-finite") => {
                traj.diverged = true;
                return Ok(traj);
            }
            Err(e) => return Err(e),
        }
        // Divergence and cutoff-activity bookkeeping in one pass.
        let mut sup = T::zero();
        let mut wsup = T::zero();
        let mut finite = true;
        for (j, &v) in u.values()[1..scheme.n].iter().enumerate() {
            if !v.is_finite() {
                finite = false;
                break;
            }
            sup = sup.max(v.abs());
            wsup = wsup.max(weight_inv[j] * v.abs());
        }
        if !finite || sup > sup_limit {
            traj.diverged = true;
            return Ok(traj);
        }
        if wsup >= threshold {
            traj.cutoff_active = true;
        }
    }
    Ok(traj)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaxPrincipleReport<T> {
    /// Most negative value over all snapshots (0 when none are negative).
    pub worst: T,
    pub pass: bool,
}

/// Nonnegativity check across all snapshots against a scheme tolerance.
pub fn check_max_principle<T: Scalar>(
    traj: &Trajectory<T>,
    tol: T,
) -> Result<MaxPrincipleReport<T>> {
    if tol < T::zero() {
        return Err(Error::InvalidParameter("tolerance must be >= 0".into()));
    }
    let first = &traj.snapshots.first().ok_or_else(|| {
        Error::InvalidParameter("empty trajectory".into())
    })?.1;
    if first.min_value() < T::zero() {
        return Err(Error::Precondition("trajectory was not started from u0 >= 0".into()));
    }
    let mut worst = T::zero();
    for (_, g) in &traj.snapshots {
        worst = worst.min(g.min_value());
    }
    Ok(MaxPrincipleReport {
        worst,
        pass: worst >= -tol,
    })
}

/// Documented scheme tolerance for the nonnegativity check:
/// 10 * sqrt(2) * sup|xi| * dt * sqrt(k_modes).
pub fn negativity_tolerance<T: Scalar>(dt: T, xi_sup: T, k_modes: usize) -> T {
    lit::<T>(10.0)
        * lit::<T>(2.0).sqrt()
        * xi_sup
        * dt
        * T::from_usize(k_modes).unwrap().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn heat_problem(n: usize, horizon: f64) -> SpdeProblem<f64> {
        SpdeProblem {
            a: CoeffField::Const(1.0),
            b: CoeffField::Const(0.0),
            c: CoeffField::Const(0.0),
            xi: CoeffField::Const(0.0),
            lambda: 0.0,
            u0: GridFunction::from_fn(n, |x: f64| (std::f64::consts::PI * x).sin()),
            horizon,
            delta0: 1.0,
            big_k: 2.0,
            nonlinearity: Nonlinearity::CutoffPower,
        }
    }

    #[test]
    fn cutoff_examples() {
        assert_eq!(cutoff_nonlinearity(0.0_f64, 5.0, 0.25), 0.0);
        assert_eq!(cutoff_nonlinearity(10.0_f64, 2.0, 0.0), 2.0);
        assert_relative_eq!(
            cutoff_nonlinearity(1.5_f64, 2.0, 0.25),
            1.5_f64.powf(1.25),
            max_relative = 1e-14
        );
        assert_eq!(
            cutoff_nonlinearity(-10.0_f64, 2.0, 0.0),
            2.0,
            "clamp is symmetric"
        );
    }

    #[test]
    fn lipschitz_examples_and_dense_verification() {
        assert_relative_eq!(lipschitz_bound(1.0_f64, 0.0).unwrap(), 1.0);
        assert_relative_eq!(
            lipschitz_bound(1.0_f64, 0.25).unwrap(),
            1.25 * 2.0_f64.powf(0.25),
            max_relative = 1e-15
        );
        assert!(lipschitz_bound(0.0_f64, 0.25).is_err());

        // 10^6 pairs in [-3,3]^2 never exceed the bound
        let (m, lambda) = (1.0_f64, 0.25);
        let bound = lipschitz_bound(m, lambda).unwrap();
        let f = |u: f64| cutoff_nonlinearity(u, m, lambda);
        let k = 1000;
        for i in 0..k {
            let u = -3.0 + 6.0 * i as f64 / (k - 1) as f64;
            let fu = f(u);
            for j in 0..k {
                let v = -3.0 + 6.0 * j as f64 / (k - 1) as f64;
                assert!((fu - f(v)).abs() <= bound * (u - v).abs() + 1e-12);
            }
        }
    }

    #[test]
    fn implicit_heat_step_matches_eigen_decay() {
        // sin(pi x) is an exact eigenvector of the discrete Laplacian, so
        // one implicit step divides it by 1 + dt*mu_1.
        let n = 64;
        let problem = heat_problem(n, 1.0);
        let dt = 1e-3;
        let dx = 1.0 / n as f64;
        let mu1 = (2.0 - 2.0 * (std::f64::consts::PI * dx).cos()) / (dx * dx);
        let zero_noise = GridFunction::zeros(n);
        let next = step(&problem.u0, 0.0, dt, &problem, 1.0, &zero_noise).unwrap();
        for i in 0..=n {
            let expect = problem.u0.values()[i] / (1.0 + dt * mu1);
            assert!((next.values()[i] - expect).abs() < 1e-14);
        }
    }

    #[test]
    fn step_is_deterministic_and_linear_in_noise_amplitude() {
        let n = 32;
        let mut problem = heat_problem(n, 1.0);
        problem.xi = CoeffField::Const(1.0);
        problem.u0 = GridFunction::from_fn(n, |x| x * (1.0 - x));
        let mut rng = RngStream::new(3, 0);
        let spec = BasisSpec::new(n - 1).unwrap();
        let inc = sample_increments(&spec, 1e-4, &mut rng).unwrap();
        let noise = crate::noise::noise_field(&inc, &spec, n).unwrap();

        let s1 = step(&problem.u0, 0.0, 1e-4, &problem, 1.0, &noise).unwrap();
        let s2 = step(&problem.u0, 0.0, 1e-4, &problem, 1.0, &noise).unwrap();
        assert_eq!(s1, s2);

        // lambda = 0: scaling xi by alpha scales the noise term exactly
        let alpha = 3.0;
        let mut scaled = problem.clone();
        scaled.xi = CoeffField::Const(alpha);
        scaled.big_k = 4.0;
        let s3 = step(&problem.u0, 0.0, 1e-4, &scaled, 1.0, &noise).unwrap();
        // (s3 - drift-only) = alpha * (s1 - drift-only)
        let zero_noise = GridFunction::zeros(n);
        let drift = step(&problem.u0, 0.0, 1e-4, &problem, 1.0, &zero_noise).unwrap();
        for i in 0..=n {
            let lhs = s3.values()[i] - drift.values()[i];
            let rhs = alpha * (s1.values()[i] - drift.values()[i]);
            assert!((lhs - rhs).abs() < 1e-12);
        }
    }

    #[test]
    fn implicit_operator_preserves_nonnegativity() {
        // noise = 0, c = 0: the M-matrix solve maps u >= 0 to u >= 0
        let n = 64;
        let mut problem = heat_problem(n, 1.0);
        problem.b = CoeffField::Const(0.4);
        problem.big_k = 3.0;
        let mut rng = RngStream::new(8, 0);
        let zero_noise = GridFunction::zeros(n);
        for _ in 0..50 {
            let u = GridFunction::from_fn(n, |_| rng.normal::<f64>().abs());
            let next = step(&u, 0.0, 2e-4, &problem, 1.0, &zero_noise).unwrap();
            assert!(next.min_value() >= 0.0, "min = {}", next.min_value());
        }
    }

    #[test]
    fn dt_bound_is_asserted() {
        let n = 16;
        let mut problem = heat_problem(n, 1.0);
        problem.c = CoeffField::Const(0.9);
        let zero_noise = GridFunction::zeros(n);
        let r = step(&problem.u0, 0.0, 0.6, &problem, 1.0, &zero_noise);
        assert!(matches!(r, Err(Error::Numerical(_))));
    }

    #[test]
    fn heat_path_matches_closed_form() {
        // xi = 0, u0 = sin(pi x): u(t) = e^{-pi^2 t} sin(pi x)
        let n = 128;
        let horizon = 0.05;
        let problem = heat_problem(n, horizon);
        let scheme = SchemeParams {
            n,
            dt: 1e-5,
            k_modes: n - 1,
            cutoff_m: 1.0,
            snapshot_times: SchemeParams::uniform_snapshots(5, horizon),
            nu: 0.8,
        };
        let mut rng = RngStream::new(0, 0);
        let traj = simulate_path(&problem, &scheme, &mut rng).unwrap();
        assert!(!traj.diverged);
        let decay = (-std::f64::consts::PI.powi(2) * horizon).exp();
        let last = traj.final_state();
        let mut err = 0.0_f64;
        for i in 0..=n {
            let x = i as f64 / n as f64;
            err = err.max((last.values()[i] - decay * (std::f64::consts::PI * x).sin()).abs());
        }
        assert!(err < 1e-3, "sup error {err}");
    }

    #[test]
    fn zero_initial_data_stays_zero() {
        let n = 32;
        let mut problem = heat_problem(n, 0.01);
        problem.xi = CoeffField::Const(1.0);
        problem.lambda = 0.25;
        problem.u0 = GridFunction::zeros(n);
        let scheme = SchemeParams {
            n,
            dt: 1e-4,
            k_modes: n - 1,
            cutoff_m: 2.0,
            snapshot_times: SchemeParams::uniform_snapshots(4, 0.01),
            nu: 0.8,
        };
        let mut rng = RngStream::new(4, 7);
        let traj = simulate_path(&problem, &scheme, &mut rng).unwrap();
        for (_, g) in &traj.snapshots {
            assert!(g.values().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn cutoff_consistency_until_threshold() {
        // same seed, cutoffs m and 2m: identical while the weighted sup
        // stays below m / c0 on both runs
        let n = 64;
        let mut problem = heat_problem(n, 0.02);
        problem.xi = CoeffField::Const(1.0);
        problem.lambda = 0.25;
        problem.u0 = GridFunction::from_fn(n, |x| x * (1.0 - x));
        let mk_scheme = |m: f64| SchemeParams {
            n,
            dt: 1e-5,
            k_modes: n - 1,
            cutoff_m: m,
            snapshot_times: SchemeParams::uniform_snapshots(8, 0.02),
            nu: 0.8,
        };
        for seed in 0..4_u64 {
            let t1 = simulate_path(&problem, &mk_scheme(4.0), &mut RngStream::new(21, seed)).unwrap();
            let t2 = simulate_path(&problem, &mk_scheme(8.0), &mut RngStream::new(21, seed)).unwrap();
            assert!(!t1.cutoff_active && !t2.cutoff_active);
            for (a, b) in t1.snapshots.iter().zip(t2.snapshots.iter()) {
                for i in 0..=n {
                    assert!((a.1.values()[i] - b.1.values()[i]).abs() <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn divergence_is_marked_not_fatal() {
        let n = 32;
        let mut problem = heat_problem(n, 0.1);
        problem.xi = CoeffField::Const(1e5);
        problem.lambda = 0.45;
        problem.u0 = GridFunction::from_fn(n, |x| 100.0 * x * (1.0 - x));
        let scheme = SchemeParams {
            n,
            dt: 0.01,
            k_modes: n - 1,
            cutoff_m: 1e12,
            snapshot_times: SchemeParams::uniform_snapshots(10, 0.1),
            nu: 0.0,
        };
        let mut rng = RngStream::new(13, 0);
        let traj = simulate_path(&problem, &scheme, &mut rng).unwrap();
        assert!(traj.diverged);
        assert!(traj.snapshots.len() <= 11);
    }

    #[test]
    fn max_principle_report() {
        let n = 64;
        let problem = heat_problem(n, 0.01);
        let scheme = SchemeParams {
            n,
            dt: 1e-5,
            k_modes: n - 1,
            cutoff_m: 1.0,
            snapshot_times: SchemeParams::uniform_snapshots(4, 0.01),
            nu: 0.8,
        };
        let mut rng = RngStream::new(1, 1);
        let traj = simulate_path(&problem, &scheme, &mut rng).unwrap();
        let rep = check_max_principle(&traj, 1e-8).unwrap();
        assert!(rep.pass);
        assert!(rep.worst >= 0.0, "deterministic heat stays nonnegative");
    }

    #[test]
    fn deterministic_convergence_orders() {
        // first order in dt, second order in dx against the closed form
        let pi2 = std::f64::consts::PI.powi(2);
        let horizon = 0.02;
        let exact = |x: f64| (-pi2 * horizon).exp() * (std::f64::consts::PI * x).sin();
        let run = |n: usize, dt: f64| {
            let problem = heat_problem(n, horizon);
            let scheme = SchemeParams {
                n,
                dt,
                k_modes: n - 1,
                cutoff_m: 1.0,
                snapshot_times: vec![0.0, horizon],
                nu: 0.8,
            };
            let traj = simulate_path(&problem, &scheme, &mut RngStream::new(0, 0)).unwrap();
            let last = traj.final_state();
            (0..=n)
                .map(|i| (last.values()[i] - exact(i as f64 / n as f64)).abs())
                .fold(0.0_f64, f64::max)
        };
        // dt refinement at fixed fine dx
        let e1 = run(512, 4e-4);
        let e2 = run(512, 2e-4);
        let e3 = run(512, 1e-4);
        let p1 = (e1 / e2).log2();
        let p2 = (e2 / e3).log2();
        assert!((p1 - 1.0).abs() < 0.3, "dt order {p1}");
        assert!((p2 - 1.0).abs() < 0.3, "dt order {p2}");
        // dx refinement at tiny dt
        let f1 = run(16, 1e-6);
        let f2 = run(32, 1e-6);
        let f3 = run(64, 1e-6);
        let q1 = (f1 / f2).log2();
        let q2 = (f2 / f3).log2();
        assert!((q1 - 2.0).abs() < 0.3, "dx order {q1}");
        assert!((q2 - 2.0).abs() < 0.3, "dx order {q2}");
    }

    #[test]
    fn negativity_tolerance_formula() {
        let tol = negativity_tolerance(1e-4_f64, 2.0, 64);
        assert_relative_eq!(tol, 10.0 * 2.0_f64.sqrt() * 2.0 * 1e-4 * 8.0, max_relative = 1e-12);
    }
}
