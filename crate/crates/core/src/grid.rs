//! Discrete carrier of u(t,·): real values on the uniform grid
//! x_i = i/N over [0,1] with zero Dirichlet ends.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFunction<T> {
    n: usize,
    values: Vec<T>,
}

impl<T: Scalar> GridFunction<T> {
    /// Wraps node values `u_0..u_N`. Both ends must be exactly zero.
    pub fn new(values: Vec<T>) -> Result<Self> {
        if values.len() < 3 {
            return Err(Error::InvalidParameter(format!(
                "grid needs at least 3 nodes, got {}",
                values.len()
            )));
        }
        let n = values.len() - 1;
        if values[0] != T::zero() || values[n] != T::zero() {
            return Err(Error::InvalidParameter(
                "boundary values must be exactly zero".into(),
            ));
        }
        Ok(Self { n, values })
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            values: vec![T::zero(); n + 1],
        }
    }

    /// Samples f at the nodes; the ends are forced to zero.
    pub fn from_fn(n: usize, mut f: impl FnMut(T) -> T) -> Self {
        let mut values: Vec<T> = (0..=n).map(|i| f(Self::node_of(n, i))).collect();
        values[0] = T::zero();
        values[n] = T::zero();
        Self { n, values }
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn dx(&self) -> T {
        T::one() / T::from_usize(self.n).unwrap()
    }

    #[inline]
    pub fn node(&self, i: usize) -> T {
        Self::node_of(self.n, i)
    }

    #[inline]
    fn node_of(n: usize, i: usize) -> T {
        T::from_usize(i).unwrap() / T::from_usize(n).unwrap()
    }

    #[inline]
    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// Mutable access to the interior nodes 1..N-1; the ends stay pinned.
    #[inline]
    pub fn interior_mut(&mut self) -> &mut [T] {
        let n = self.n;
        &mut self.values[1..n]
    }

    pub fn sup_norm(&self) -> T {
        self.values
            .iter()
            .fold(T::zero(), |m, &v| m.max(v.abs()))
    }

    pub fn min_value(&self) -> T {
        self.values
            .iter()
            .fold(T::infinity(), |m, &v| m.min(v))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Composite trapezoid of `f(x_i, u_i)` over [0,1].
    pub fn trapezoid(&self, f: impl Fn(T, T) -> T) -> T {
        let dx = self.dx();
        let half = T::from_f64(0.5).unwrap();
        let mut acc = T::zero();
        for i in 0..=self.n {
            let w = if i == 0 || i == self.n { half } else { T::one() };
            acc = acc + w * f(self.node(i), self.values[i]);
        }
        acc * dx
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_nonzero_boundary() {
        assert!(GridFunction::new(vec![0.1_f64, 0.0, 0.0]).is_err());
        assert!(GridFunction::new(vec![0.0_f64, 1.0, 0.0]).is_ok());
    }

    #[test]
    fn from_fn_pins_ends() {
        let g = GridFunction::<f64>::from_fn(8, |_| 1.0);
        assert_eq!(g.values()[0], 0.0);
        assert_eq!(g.values()[8], 0.0);
        assert_eq!(g.values()[3], 1.0);
    }

    #[test]
    fn trapezoid_linear_exact() {
        let g = GridFunction::<f64>::from_fn(1000, |x| x * (1.0 - x));
        let v = g.trapezoid(|_, u| u);
        assert!((v - 1.0 / 6.0).abs() < 1e-6);
    }
}
