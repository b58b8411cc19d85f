//! Complex resource grids and the unitary transforms between the
//! time-frequency (TF) and delay-Doppler (DD) domains.
//!
//! Conventions shared by the whole crate:
//!
//! * [`TfGrid`] is `M x N` (subcarrier `m`, OFDM symbol `n`) and is stored
//!   symbol by symbol, so `m` is the fast index.
//! * [`DdGrid`] is `N x M` (Doppler `k`, delay `l`), stored with `l` fast.
//!   Doppler rows are kept in standard order `r = k mod N`; use
//!   [`DdGrid::get_centered`] for `k` in `{-N/2, ..., N/2 - 1}`.
//! * `sfft`: `h_DD[k,l] = (NM)^{-1/2} sum_{m,n} h_TF[m,n] e^{+i2pi ml/M} e^{-i2pi nk/N}`,
//!   `isfft` is its exact inverse.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::kernel::centered_range;

/// Time-frequency grid, `M` subcarriers by `N` symbols.
#[derive(Debug, Clone, PartialEq)]
pub struct TfGrid {
    m: usize,
    n: usize,
    data: Vec<Complex64>,
}

impl TfGrid {
    pub fn zeros(m: usize, n: usize) -> Self {
        Self {
            m,
            n,
            data: vec![Complex64::new(0.0, 0.0); m * n],
        }
    }

    pub fn from_fn(m: usize, n: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(m * n);
        for ni in 0..n {
            for mi in 0..m {
                data.push(f(mi, ni));
            }
        }
        Self { m, n, data }
    }

    /// Wraps a buffer laid out symbol by symbol (`index = n * M + m`).
    pub fn from_vec(m: usize, n: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != m * n {
            return Err(Error::Contract(format!(
                "buffer of {} entries cannot hold a {m}x{n} grid",
                data.len()
            )));
        }
        Ok(Self { m, n, data })
    }

    /// `(M, N)`.
    pub fn dims(&self) -> (usize, usize) {
        (self.m, self.n)
    }

    pub fn subcarriers(&self) -> usize {
        self.m
    }

    pub fn symbols(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, m: usize, n: usize) -> Complex64 {
        self.data[n * self.m + m]
    }

    #[inline]
    pub fn set(&mut self, m: usize, n: usize, v: Complex64) {
        self.data[n * self.m + m] = v;
    }

    /// One OFDM symbol (all subcarriers of symbol `n`).
    pub fn symbol(&self, n: usize) -> &[Complex64] {
        &self.data[n * self.m..(n + 1) * self.m]
    }

    pub fn symbol_mut(&mut self, n: usize) -> &mut [Complex64] {
        &mut self.data[n * self.m..(n + 1) * self.m]
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<Complex64> {
        self.data
    }

    /// Sum of squared magnitudes.
    pub fn energy(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Mean squared distance to `other`.
    pub fn mse(&self, other: &TfGrid) -> f64 {
        assert_eq!(self.dims(), other.dims());
        let s: f64 = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum();
        s / self.data.len() as f64
    }

    pub fn is_finite(&self) -> bool {
        self.data
            .iter()
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn check_dims(&self, m: usize, n: usize) -> Result<()> {
        if self.dims() != (m, n) {
            return Err(Error::dims((m, n), self.dims()));
        }
        Ok(())
    }
}

/// Delay-Doppler grid, `N` Doppler rows by `M` delay columns.
#[derive(Debug, Clone, PartialEq)]
pub struct DdGrid {
    n: usize,
    m: usize,
    data: Vec<Complex64>,
}

impl DdGrid {
    pub fn zeros(n: usize, m: usize) -> Self {
        Self {
            n,
            m,
            data: vec![Complex64::new(0.0, 0.0); n * m],
        }
    }

    /// `f(r, l)` with `r` the standard-order Doppler row.
    pub fn from_fn(n: usize, m: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(n * m);
        for r in 0..n {
            for l in 0..m {
                data.push(f(r, l));
            }
        }
        Self { n, m, data }
    }

    /// `(N, M)`.
    pub fn dims(&self) -> (usize, usize) {
        (self.n, self.m)
    }

    #[inline]
    pub fn get(&self, r: usize, l: usize) -> Complex64 {
        self.data[r * self.m + l]
    }

    #[inline]
    pub fn set(&mut self, r: usize, l: usize, v: Complex64) {
        self.data[r * self.m + l] = v;
    }

    /// Standard-order row for a centered (or any integer) Doppler index.
    #[inline]
    pub fn row_of(&self, k: i64) -> usize {
        k.rem_euclid(self.n as i64) as usize
    }

    /// Centered Doppler index of a standard-order row.
    #[inline]
    pub fn centered_of(&self, r: usize) -> i64 {
        let half = (self.n / 2) as i64;
        let r = r as i64;
        if r >= self.n as i64 - half {
            r - self.n as i64
        } else {
            r
        }
    }

    #[inline]
    pub fn get_centered(&self, k: i64, l: usize) -> Complex64 {
        self.get(self.row_of(k), l)
    }

    #[inline]
    pub fn set_centered(&mut self, k: i64, l: usize, v: Complex64) {
        let r = self.row_of(k);
        self.set(r, l, v);
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn energy(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn max_abs_diff(&self, other: &DdGrid) -> f64 {
        assert_eq!(self.dims(), other.dims());
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

/// One period of the pilot-derived periodic delay-Doppler image:
/// `N/d_t` Doppler bins (centered) by `M/d_f` delay bins.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodCsf {
    n_period: usize,
    m_period: usize,
    k_lo: i64,
    data: Vec<Complex64>,
}

impl PeriodCsf {
    pub fn zeros(n_period: usize, m_period: usize) -> Self {
        Self {
            n_period,
            m_period,
            k_lo: centered_range(n_period).start,
            data: vec![Complex64::new(0.0, 0.0); n_period * m_period],
        }
    }

    /// `(N/d_t, M/d_f)`.
    pub fn dims(&self) -> (usize, usize) {
        (self.n_period, self.m_period)
    }

    /// Centered Doppler indices covered by the period.
    pub fn doppler_range(&self) -> std::ops::Range<i64> {
        self.k_lo..self.k_lo + self.n_period as i64
    }

    #[inline]
    fn index(&self, k: i64, l: i64) -> usize {
        let np = self.n_period as i64;
        let row = (k - self.k_lo).rem_euclid(np) as usize;
        let col = l.rem_euclid(self.m_period as i64) as usize;
        row * self.m_period + col
    }

    /// Value at centered Doppler `k` and delay `l`; indices outside one
    /// period wrap cyclically.
    #[inline]
    pub fn get(&self, k: i64, l: i64) -> Complex64 {
        self.data[self.index(k, l)]
    }

    #[inline]
    pub fn set(&mut self, k: i64, l: i64, v: Complex64) {
        let i = self.index(k, l);
        self.data[i] = v;
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn scale(&mut self, c: Complex64) {
        self.data.iter_mut().for_each(|z| *z *= c);
    }
}

/// Planned forward/inverse transforms for a fixed `M x N` geometry.
#[derive(Clone)]
pub struct DdTransform {
    m: usize,
    n: usize,
    fwd_m: Arc<dyn Fft<f64>>,
    inv_m: Arc<dyn Fft<f64>>,
    fwd_n: Arc<dyn Fft<f64>>,
    inv_n: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for DdTransform {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DdTransform")
            .field("m", &self.m)
            .field("n", &self.n)
            .finish()
    }
}

impl DdTransform {
    pub fn new(m: usize, n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            m,
            n,
            fwd_m: planner.plan_fft_forward(m),
            inv_m: planner.plan_fft_inverse(m),
            fwd_n: planner.plan_fft_forward(n),
            inv_n: planner.plan_fft_inverse(n),
        }
    }

    /// TF -> DD: inverse DFT over subcarriers, DFT over symbols.
    pub fn sfft(&self, tf: &TfGrid) -> Result<DdGrid> {
        tf.check_dims(self.m, self.n)?;
        let (m, n) = (self.m, self.n);
        let mut data = tf.data.clone();
        self.inv_m.process(&mut data);
        // Row n of `data` becomes Doppler row k in place.
        self.columns(&mut data, &*self.fwd_n);
        Ok(DdGrid { n, m, data })
    }

    /// DD -> TF, exact inverse of [`DdTransform::sfft`].
    pub fn isfft(&self, dd: &DdGrid) -> Result<TfGrid> {
        if dd.dims() != (self.n, self.m) {
            return Err(Error::dims((self.n, self.m), dd.dims()));
        }
        let (m, n) = (self.m, self.n);
        let mut data = dd.data.clone();
        self.fwd_m.process(&mut data);
        self.columns(&mut data, &*self.inv_n);
        Ok(TfGrid { m, n, data })
    }

    /// Transforms every stride-`m` column of an `n x m` row-major buffer and
    /// applies the unitary `1/sqrt(MN)` scale.
    fn columns(&self, data: &mut [Complex64], fft: &dyn Fft<f64>) {
        let (m, n) = (self.m, self.n);
        let scale = 1.0 / ((m * n) as f64).sqrt();
        let mut line = vec![Complex64::new(0.0, 0.0); n];
        let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
        for c in 0..m {
            for (r, z) in line.iter_mut().enumerate() {
                *z = data[r * m + c];
            }
            fft.process_with_scratch(&mut line, &mut scratch);
            for (r, z) in line.iter().enumerate() {
                data[r * m + c] = z * scale;
            }
        }
    }
}

/// Symplectic finite Fourier transform of a TF grid.
pub fn sfft(tf: &TfGrid) -> DdGrid {
    let (m, n) = tf.dims();
    DdTransform::new(m, n)
        .sfft(tf)
        .expect("transform planned for the grid's own dimensions")
}

/// Inverse of [`sfft`].
pub fn isfft(dd: &DdGrid) -> TfGrid {
    let (n, m) = dd.dims();
    DdTransform::new(m, n)
        .isfft(dd)
        .expect("transform planned for the grid's own dimensions")
}
