//! Ordinary least squares on log-log axes, shared by the exponent
//! estimators and the plot emitters.

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFit<T> {
    pub slope: T,
    pub intercept: T,
    /// Standard error of the slope (zero when the fit is exact or n=2).
    pub slope_stderr: T,
    pub r_squared: T,
}

/// OLS fit y = slope*x + intercept. None if fewer than 2 points or all x equal.
pub fn fit_line<T: Scalar>(x: &[T], y: &[T]) -> Option<LineFit<T>> {
    let n = x.len();
    if n < 2 || n != y.len() {
        return None;
    }
    let nf = T::from_usize(n).unwrap();
    let sx: T = x.iter().copied().sum();
    let sy: T = y.iter().copied().sum();
    let mx = sx / nf;
    let my = sy / nf;
    let mut sxx = T::zero();
    let mut sxy = T::zero();
    for i in 0..n {
        let dx = x[i] - mx;
        sxx = sxx + dx * dx;
        sxy = sxy + dx * (y[i] - my);
    }
    if sxx <= T::zero() {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;

    let mut ss_res = T::zero();
    let mut ss_tot = T::zero();
    for i in 0..n {
        let pred = slope * x[i] + intercept;
        let r = y[i] - pred;
        ss_res = ss_res + r * r;
        let d = y[i] - my;
        ss_tot = ss_tot + d * d;
    }
    let r_squared = if ss_tot > T::zero() {
        (T::one() - ss_res / ss_tot).max(T::zero())
    } else {
        T::one()
    };
    let slope_stderr = if n > 2 {
        (ss_res / (T::from_usize(n - 2).unwrap() * sxx)).sqrt()
    } else {
        T::zero()
    };
    Some(LineFit {
        slope,
        intercept,
        slope_stderr,
        r_squared,
    })
}

/// Fit of log(y) against log(x). Pairs with y <= 0 are skipped; None when
/// fewer than 2 usable pairs remain (degenerate data).
pub fn fit_loglog<T: Scalar>(x: &[T], y: &[T]) -> Option<LineFit<T>> {
    let mut lx = Vec::with_capacity(x.len());
    let mut ly = Vec::with_capacity(y.len());
    for (&a, &b) in x.iter().zip(y.iter()) {
        if a > T::zero() && b > T::zero() {
            lx.push(a.ln());
            ly.push(b.ln());
        }
    }
    fit_line(&lx, &ly)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line() {
        let x = [1.0_f64, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 2.5 * v - 1.0).collect();
        let f = fit_line(&x, &y).unwrap();
        assert!((f.slope - 2.5).abs() < 1e-12);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
        assert!(f.slope_stderr < 1e-10);
    }

    #[test]
    fn power_law_slope() {
        let x = [0.5_f64, 1.0, 2.0, 4.0, 8.0];
        let y: Vec<f64> = x.iter().map(|v| 3.0 * v.powf(0.7)).collect();
        let f = fit_loglog(&x, &y).unwrap();
        assert!((f.slope - 0.7).abs() < 1e-12);
    }

    #[test]
    fn degenerate_is_none() {
        assert!(fit_loglog(&[1.0_f64, 2.0], &[0.0, 0.0]).is_none());
        assert!(fit_line::<f64>(&[1.0], &[1.0]).is_none());
    }
}
