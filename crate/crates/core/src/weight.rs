//! Boundary-distance machinery on I = (0,1): the distance function rho,
//! the smooth cosh weight psi comparable to rho, the dyadic bump family
//! zeta_n, and the drift compatibility check
//!     a*psi'' + (2a_x - b)*psi' <= 0.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{lit, Scalar};

/// Absolute slack for the <= 0 generator condition; absorbs roundoff at
/// the symmetric midpoint where both terms vanish.
pub const GENERATOR_TOL: f64 = 1e-12;

/// Distance to the boundary of (0,1): min(x, 1-x).
pub fn rho<T: Scalar>(x: T) -> Result<T> {
    if x < T::zero() || x > T::one() {
        return Err(Error::InvalidParameter(format!("x = {x} outside [0,1]")));
    }
    Ok(x.min(T::one() - x))
}

/// The smooth boundary weight
///     psi(x) = -cosh(K1*(2x-1)) + cosh(K1),    K1 = 3K/(2*delta0).
///
/// psi vanishes at the ends, is positive and strictly concave inside,
/// symmetric about x = 1/2, and comparable to rho.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightFn<T> {
    k1: T,
    big_k: T,
    delta0: T,
}

pub fn make_psi<T: Scalar>(big_k: T, delta0: T) -> Result<WeightFn<T>> {
    if big_k <= T::zero() {
        return Err(Error::InvalidParameter(format!("K must be > 0, got {big_k}")));
    }
    if delta0 <= T::zero() {
        return Err(Error::InvalidParameter(format!(
            "delta0 must be > 0, got {delta0}"
        )));
    }
    let k1 = lit::<T>(3.0) * big_k / (lit::<T>(2.0) * delta0);
    Ok(WeightFn { k1, big_k, delta0 })
}

impl<T: Scalar> WeightFn<T> {
    #[inline]
    pub fn k1(&self) -> T {
        self.k1
    }

    pub fn big_k(&self) -> T {
        self.big_k
    }

    pub fn delta0(&self) -> T {
        self.delta0
    }

    #[inline]
    pub fn psi(&self, x: T) -> T {
        let two = lit::<T>(2.0);
        self.k1.cosh() - (self.k1 * (two * x - T::one())).cosh()
    }

    #[inline]
    pub fn psi_prime(&self, x: T) -> T {
        let two = lit::<T>(2.0);
        -two * self.k1 * (self.k1 * (two * x - T::one())).sinh()
    }

    #[inline]
    pub fn psi_second(&self, x: T) -> T {
        let two = lit::<T>(2.0);
        let four = lit::<T>(4.0);
        -four * self.k1 * self.k1 * (self.k1 * (two * x - T::one())).cosh()
    }

    /// sup over I of psi, attained at x = 1/2.
    pub fn sup(&self) -> T {
        self.psi(lit(0.5))
    }

    /// c0 = sup over I of psi^nu (nu >= 0).
    pub fn pow_sup(&self, nu: T) -> T {
        self.sup().powf(nu)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneratorCheck<T> {
    pub pass: bool,
    /// max over the sampled (t,x) of a*psi'' + (2a_x - b)*psi'.
    pub worst: T,
}

/// Evaluates a*psi'' + (2a_x - b)*psi' at all interior grid points and
/// sample times. Admissibility (a >= delta0, |2a_x - b| <= 3K) is checked
/// first and reported as a precondition failure, never as a condition
/// failure.
pub fn check_generator_condition<T: Scalar>(
    psi: &WeightFn<T>,
    a: impl Fn(T, T) -> T,
    a_x: impl Fn(T, T) -> T,
    b: impl Fn(T, T) -> T,
    grid_n: usize,
    times: &[T],
) -> Result<GeneratorCheck<T>> {
    if grid_n < 2 {
        return Err(Error::InvalidParameter("grid_n must be >= 2".into()));
    }
    if times.is_empty() {
        return Err(Error::InvalidParameter("no sample times".into()));
    }
    let n = T::from_usize(grid_n).unwrap();
    let slack = lit::<T>(1e-9);
    let three_k = lit::<T>(3.0) * psi.big_k;
    let mut worst = T::neg_infinity();
    for &t in times {
        for i in 1..grid_n {
            let x = T::from_usize(i).unwrap() / n;
            let av = a(t, x);
            let axv = a_x(t, x);
            let bv = b(t, x);
            if av < psi.delta0 - slack {
                return Err(Error::Precondition(format!(
                    "a(t={t}, x={x}) = {av} < delta0 = {}",
                    psi.delta0
                )));
            }
            let drift = lit::<T>(2.0) * axv - bv;
            if drift.abs() > three_k + slack {
                return Err(Error::Precondition(format!(
                    "|2a_x - b| = {} at (t={t}, x={x}) exceeds 3K = {three_k}",
                    drift.abs()
                )));
            }
            let g = av * psi.psi_second(x) + drift * psi.psi_prime(x);
            worst = worst.max(g);
        }
    }
    Ok(GeneratorCheck {
        pass: worst <= lit(GENERATOR_TOL),
        worst,
    })
}

/// Measured comparability constants of rho against psi: the sampled
/// (min, max) of rho(x)/psi(x) over interior grid points.
pub fn comparability_constants<T: Scalar>(
    psi: &WeightFn<T>,
    grid_n: usize,
) -> Result<(T, T)> {
    if grid_n < 1002 {
        return Err(Error::InvalidParameter(format!(
            "need >= 1000 interior points, got {}",
            grid_n.saturating_sub(1)
        )));
    }
    let n = T::from_usize(grid_n).unwrap();
    let mut lo = T::infinity();
    let mut hi = T::neg_infinity();
    for i in 1..grid_n {
        let x = T::from_usize(i).unwrap() / n;
        let r = rho(x)? / psi.psi(x);
        lo = lo.min(r);
        hi = hi.max(r);
    }
    Ok((lo, hi))
}

/// C-infinity bump in the log variable l = ln x: smooth rise on
/// [s/e, s], plateau 1 on [s, e*s], smooth fall on [e*s, e^2*s], with
/// s = 1. The plateau covers one full multiplicative period, so
/// sum_n zeta^p(e^n x) >= 1 for every x > 0 and any p, and the same
/// holds for zeta^{1/2}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZetaFamily<T> {
    p: T,
    lower_bound: T,
}

/// exp(-1/t)-based smoothstep: 0 for t<=0, 1 for t>=1, C-infinity.
fn smoothstep<T: Scalar>(t: T) -> T {
    if t <= T::zero() {
        return T::zero();
    }
    if t >= T::one() {
        return T::one();
    }
    let f = |s: T| (-(s.recip())).exp();
    let a = f(t);
    a / (a + f(T::one() - t))
}

pub fn make_zeta<T: Scalar>(p: T) -> Result<ZetaFamily<T>> {
    if p <= T::one() {
        return Err(Error::InvalidParameter(format!("p must be > 1, got {p}")));
    }
    let mut fam = ZetaFamily {
        p,
        lower_bound: T::zero(),
    };
    // Certify the lower bound by dense minimization over one period.
    let samples = 4096;
    let mut c = T::infinity();
    for i in 0..samples {
        let l = T::from_usize(i).unwrap() / T::from_usize(samples).unwrap();
        let x = l.exp();
        c = c.min(fam.sum_pth_powers(x));
    }
    fam.lower_bound = c;
    Ok(fam)
}

impl<T: Scalar> ZetaFamily<T> {
    /// The base bump, evaluated in x > 0. Support is [e^-1, e^2].
    pub fn zeta(&self, x: T) -> T {
        if x <= T::zero() {
            return T::zero();
        }
        let l = x.ln();
        if l <= -T::one() || l >= lit(2.0) {
            T::zero()
        } else if l < T::zero() {
            smoothstep(l + T::one())
        } else if l <= T::one() {
            T::one()
        } else {
            smoothstep(lit::<T>(2.0) - l)
        }
    }

    /// zeta_n(x) = zeta(e^n psi(x)) for x in (0,1), 0 outside.
    pub fn zeta_n(&self, n: i32, psi: &WeightFn<T>, x: T) -> T {
        if x <= T::zero() || x >= T::one() {
            return T::zero();
        }
        let scale = T::from_i32(n).unwrap().exp();
        self.zeta(scale * psi.psi(x))
    }

    pub fn p(&self) -> T {
        self.p
    }

    /// Certified c with sum_n zeta^p(e^n x) >= c for all x > 0.
    pub fn lower_bound(&self) -> T {
        self.lower_bound
    }

    /// Support of the base bump.
    pub fn support(&self) -> (T, T) {
        ((-T::one()).exp(), lit::<T>(2.0).exp())
    }

    /// sum over n of zeta^p(e^n x); finitely many terms contribute.
    pub fn sum_pth_powers(&self, x: T) -> T {
        self.sum_powers(x, self.p)
    }

    pub fn sum_powers(&self, x: T, q: T) -> T {
        debug_assert!(x > T::zero());
        // e^n x in supp zeta  <=>  n in [-1 - ln x, 2 - ln x]
        let l = x.ln();
        let n_lo = (-T::one() - l).ceil().to_i64().unwrap();
        let n_hi = (lit::<T>(2.0) - l).floor().to_i64().unwrap();
        let mut acc = T::zero();
        for n in n_lo..=n_hi {
            let v = self.zeta((T::from_i64(n).unwrap() + l).exp());
            acc = acc + v.powf(q);
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn rho_values() {
        assert_eq!(rho(0.0_f64).unwrap(), 0.0);
        assert_eq!(rho(0.5_f64).unwrap(), 0.5);
        assert_relative_eq!(rho(0.8_f64).unwrap(), 0.2, max_relative = 1e-15);
        assert!(rho(-0.1_f64).is_err());
        assert!(rho(1.1_f64).is_err());
    }

    #[test]
    fn psi_k1_and_midpoint() {
        let w = make_psi(1.0_f64, 1.0).unwrap();
        assert_eq!(w.k1(), 1.5);
        // psi(1/2) = cosh(1.5) - 1
        assert_relative_eq!(w.psi(0.5), 1.3524096152432473, max_relative = 1e-15);
        assert!(make_psi(-1.0_f64, 1.0).is_err());
        assert!(make_psi(1.0_f64, 0.0).is_err());
    }

    #[test]
    fn psi_vanishes_at_ends_and_is_symmetric_concave() {
        for (k, d0) in [(1.0_f64, 1.0), (2.0, 0.5), (10.0, 0.75)] {
            let w = make_psi(k, d0).unwrap();
            assert!(w.psi(0.0).abs() < 1e-12 * w.sup());
            assert!(w.psi(1.0).abs() < 1e-12 * w.sup());
            for i in 1..512 {
                let x = i as f64 / 512.0;
                assert!(w.psi(x) > 0.0);
                assert!(w.psi_second(x) < 0.0);
                let sym = (w.psi(x) - w.psi(1.0 - x)).abs();
                assert!(sym <= 1e-12 * w.sup(), "asymmetry {sym} at x={x}");
            }
        }
    }

    #[test]
    fn generator_condition_heat_case() {
        let w = make_psi(1.0_f64, 1.0).unwrap();
        let r = check_generator_condition(&w, |_, _| 1.0, |_, _| 0.0, |_, _| 0.0, 512, &[0.0])
            .unwrap();
        assert!(r.pass);
        assert!(r.worst < 0.0);
    }

    #[test]
    fn generator_condition_extreme_drift_passes() {
        // a = delta0 and b = 3K constant: the hyperbolic inequality is tight
        // but still nonpositive on a 10^4-point grid.
        let (k, d0) = (1.0_f64, 1.0);
        let w = make_psi(k, d0).unwrap();
        let r = check_generator_condition(
            &w,
            |_, _| d0,
            |_, _| 0.0,
            |_, _| 3.0 * k,
            10_000,
            &[0.0],
        )
        .unwrap();
        assert!(r.pass, "worst = {}", r.worst);
    }

    #[test]
    fn generator_condition_inadmissible_drift_is_precondition_failure() {
        let w = make_psi(1.0_f64, 1.0).unwrap();
        let e = check_generator_condition(&w, |_, _| 1.0, |_, _| 0.0, |_, _| 100.0, 256, &[0.0]);
        assert!(matches!(e, Err(Error::Precondition(_))));
        let e = check_generator_condition(&w, |_, _| 0.5, |_, _| 0.0, |_, _| 0.0, 256, &[0.0]);
        assert!(matches!(e, Err(Error::Precondition(_))));
    }

    #[test]
    fn generator_condition_random_admissible_fields() {
        // 100 sampled coefficient fields: cubic polynomials in x with
        // a >= delta0 and |2a_x - b| <= 3K.
        let (k, d0) = (2.0_f64, 0.5);
        let w = make_psi(k, d0).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let mut accepted = 0;
        while accepted < 100 {
            let ac: [f64; 4] = std::array::from_fn(|_| rng.gen_range(-0.3..0.3));
            let bc: [f64; 4] = std::array::from_fn(|_| rng.gen_range(-0.8..0.8));
            let a = move |_t: f64, x: f64| d0 + 0.6 + ac[0] + ac[1] * x + ac[2] * x * x + ac[3] * x * x * x;
            let a_x = move |_t: f64, x: f64| ac[1] + 2.0 * ac[2] * x + 3.0 * ac[3] * x * x;
            let b = move |_t: f64, x: f64| bc[0] + bc[1] * x + bc[2] * x * x + bc[3] * x * x * x;
            let admissible = (0..=200).all(|i| {
                let x = i as f64 / 200.0;
                a(0.0, x) >= d0 && (2.0 * a_x(0.0, x) - b(0.0, x)).abs() <= 3.0 * k
            });
            if !admissible {
                continue;
            }
            accepted += 1;
            let r = check_generator_condition(&w, a, a_x, b, 2048, &[0.0, 0.5, 1.0]).unwrap();
            assert!(r.pass, "worst = {} for field {accepted}", r.worst);
        }
    }

    #[test]
    fn zeta_lower_bound_and_shift_invariance() {
        let fam = make_zeta(2.0_f64).unwrap();
        let c = fam.lower_bound();
        assert!(c > 0.0);
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        for _ in 0..200 {
            let x = 10f64.powf(rng.gen_range(-6.0..6.0));
            let s = fam.sum_pth_powers(x);
            assert!(s >= c - 1e-12, "sum {s} below c {c} at x={x}");
            // invariance under x -> e x (index shift)
            let s2 = fam.sum_pth_powers(std::f64::consts::E * x);
            assert_relative_eq!(s, s2, max_relative = 1e-10);
        }
    }

    #[test]
    fn zeta_sqrt_also_bounded_below() {
        let fam = make_zeta(2.0_f64).unwrap();
        let mut min = f64::INFINITY;
        for i in 0..4000 {
            let x = ((i as f64) / 4000.0).exp();
            min = min.min(fam.sum_powers(x, fam.p() / 2.0));
        }
        assert!(min >= 1.0 - 1e-12);
    }

    #[test]
    fn zeta_min_matches_dense_oracle() {
        let fam = make_zeta(2.0_f64).unwrap();
        // independent, denser and offset sampling of one period
        let mut min = f64::INFINITY;
        for i in 0..30_000 {
            let x = ((i as f64 + 0.37) / 30_000.0).exp();
            min = min.min(fam.sum_pth_powers(x));
        }
        assert!((min - fam.lower_bound()).abs() <= 0.01 * fam.lower_bound());
    }

    #[test]
    fn zeta_support() {
        let fam = make_zeta(3.0_f64).unwrap();
        let (lo, hi) = fam.support();
        assert!(fam.zeta(lo * 0.999) == 0.0);
        assert!(fam.zeta(hi * 1.001) == 0.0);
        // strictly positive on [1, e]
        for i in 0..=100 {
            let x = (i as f64 / 100.0).exp();
            assert!(fam.zeta(x) == 1.0);
        }
    }

    #[test]
    fn comparability_finite_and_boundary_limit() {
        let w = make_psi(1.0_f64, 1.0).unwrap(); // K1 = 1.5
        let (lo, hi) = comparability_constants(&w, 4096).unwrap();
        assert!(lo > 0.0 && hi.is_finite() && lo <= hi);
        // rho/psi -> 1/psi'(0) = 1/(2 K1 sinh K1) at the boundary
        let limit = 0.15654748019840819;
        let x = 1.0 / 4096.0;
        let ratio = rho(x).unwrap() / w.psi(x);
        assert_relative_eq!(ratio, limit, max_relative = 2e-3);
        // refinement changes the constants by < 1%
        let (lo2, hi2) = comparability_constants(&w, 8192).unwrap();
        assert!((lo2 - lo).abs() <= 0.01 * lo);
        assert!((hi2 - hi).abs() <= 0.01 * hi);
    }

    #[test]
    fn comparability_requires_fine_grid() {
        let w = make_psi(1.0_f64, 1.0).unwrap();
        assert!(comparability_constants(&w, 100).is_err());
    }
}
