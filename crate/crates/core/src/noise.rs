//! Cylindrical Brownian increments and the space-time white-noise field
//! on the grid: dB = sum_k eta_k dw^k with eta_k = sqrt(2) sin(k pi x).
//!
//! Each simulated path owns a private `RngStream`; the whole noise
//! history is a pure function of (master_seed, path_index).

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::scalar::{lit, Scalar};

/// eta_k(x) = sqrt(2) sin(k pi x), the L2(0,1) orthonormal sine basis.
pub fn basis_eta<T: Scalar>(k: usize, x: T) -> Result<T> {
    if k == 0 {
        return Err(Error::InvalidParameter("mode index k must be >= 1".into()));
    }
    Ok(lit::<T>(2.0).sqrt() * (T::from_usize(k).unwrap() * T::PI() * x).sin())
}

/// Retained sine modes 1..=k_modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BasisSpec {
    k_modes: usize,
}

impl BasisSpec {
    pub fn new(k_modes: usize) -> Result<Self> {
        if k_modes == 0 {
            return Err(Error::InvalidParameter("k_modes must be >= 1".into()));
        }
        Ok(Self { k_modes })
    }

    pub fn k_modes(&self) -> usize {
        self.k_modes
    }

    pub fn eta<T: Scalar>(&self, k: usize, x: T) -> Result<T> {
        if k > self.k_modes {
            return Err(Error::InvalidParameter(format!(
                "mode {k} beyond k_modes = {}",
                self.k_modes
            )));
        }
        basis_eta(k, x)
    }
}

/// Deterministic per-path RNG: ChaCha12 keyed by the master seed with the
/// path index as the stream id. The counter is the cipher word position.
#[derive(Debug, Clone)]
pub struct RngStream {
    master_seed: u64,
    path_index: u64,
    steps_drawn: u64,
    rng: ChaCha12Rng,
}

impl RngStream {
    pub fn new(master_seed: u64, path_index: u64) -> Self {
        let mut rng = ChaCha12Rng::seed_from_u64(master_seed);
        rng.set_stream(path_index);
        Self {
            master_seed,
            path_index,
            steps_drawn: 0,
            rng,
        }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn path_index(&self) -> u64 {
        self.path_index
    }

    /// Cipher word position; advances deterministically with every draw.
    pub fn counter(&self) -> u128 {
        self.rng.get_word_pos()
    }

    /// Increments sampled so far on this stream.
    pub fn steps_drawn(&self) -> u64 {
        self.steps_drawn
    }

    #[inline]
    pub fn normal<T: Scalar>(&mut self) -> T {
        T::standard_normal(&mut self.rng)
    }
}

/// One step's worth of Wiener increments: dw_k ~ N(0, dt), independent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseIncrement<T> {
    pub dw: Vec<T>,
    pub dt: T,
    pub step_index: u64,
}

/// Draws k_modes independent N(0, dt) increments and advances the stream.
pub fn sample_increments<T: Scalar>(
    spec: &BasisSpec,
    dt: T,
    rng: &mut RngStream,
) -> Result<NoiseIncrement<T>> {
    if dt < T::zero() {
        return Err(Error::InvalidParameter(format!("dt must be >= 0, got {dt}")));
    }
    let scale = dt.sqrt();
    let dw = (0..spec.k_modes).map(|_| rng.normal::<T>() * scale).collect();
    let step_index = rng.steps_drawn;
    rng.steps_drawn += 1;
    Ok(NoiseIncrement { dw, dt, step_index })
}

/// Direct synthesis x_i -> sum_{k<=K} eta_k(x_i) dw_k on an N-grid.
/// Reference path; `SineSynth` computes the same values via a DST.
pub fn noise_field<T: Scalar>(
    inc: &NoiseIncrement<T>,
    spec: &BasisSpec,
    grid_n: usize,
) -> Result<GridFunction<T>> {
    if spec.k_modes > grid_n - 1 {
        return Err(Error::InvalidParameter(format!(
            "k_modes = {} exceeds interior node count {}",
            spec.k_modes,
            grid_n - 1
        )));
    }
    if inc.dw.len() != spec.k_modes {
        return Err(Error::InvalidParameter("increment/spec mode mismatch".into()));
    }
    let sqrt2 = lit::<T>(2.0).sqrt();
    let n_t = T::from_usize(grid_n).unwrap();
    let mut g = GridFunction::zeros(grid_n);
    let interior = g.interior_mut();
    for (k0, &w) in inc.dw.iter().enumerate() {
        let k = T::from_usize(k0 + 1).unwrap();
        for (i0, v) in interior.iter_mut().enumerate() {
            let x = T::from_usize(i0 + 1).unwrap() / n_t;
            *v = *v + sqrt2 * (k * T::PI() * x).sin() * w;
        }
    }
    Ok(g)
}

/// Sine synthesis via DST-I, computed with a length-2N complex FFT.
/// Produces the same field as `noise_field` to roundoff.
pub struct SineSynth<T: Scalar> {
    grid_n: usize,
    fft: Arc<dyn Fft<T>>,
    buf: Vec<Complex<T>>,
}

impl<T: Scalar> SineSynth<T> {
    pub fn new(grid_n: usize) -> Self {
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(2 * grid_n);
        Self {
            grid_n,
            fft,
            buf: vec![Complex::new(T::zero(), T::zero()); 2 * grid_n],
        }
    }

    pub fn grid_n(&self) -> usize {
        self.grid_n
    }

    /// Odd extension of dw into length 2N, one forward FFT, then
    /// field_j = -sqrt(2)/2 * Im F_j for j = 1..N-1.
    pub fn field(&mut self, inc: &NoiseIncrement<T>) -> Result<GridFunction<T>> {
        let n = self.grid_n;
        if inc.dw.len() > n - 1 {
            return Err(Error::InvalidParameter(format!(
                "k_modes = {} exceeds interior node count {}",
                inc.dw.len(),
                n - 1
            )));
        }
        for c in self.buf.iter_mut() {
            *c = Complex::new(T::zero(), T::zero());
        }
        for (k0, &w) in inc.dw.iter().enumerate() {
            let k = k0 + 1;
            self.buf[k].re = w;
            self.buf[2 * n - k].re = -w;
        }
        self.fft.process(&mut self.buf);
        let half_sqrt2 = lit::<T>(2.0).sqrt() / lit::<T>(2.0);
        let mut g = GridFunction::zeros(n);
        let interior = g.interior_mut();
        for (i0, v) in interior.iter_mut().enumerate() {
            *v = -half_sqrt2 * self.buf[i0 + 1].im;
        }
        Ok(g)
    }
}
