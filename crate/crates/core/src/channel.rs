//! Doubly-selective multipath channel: random path realizations, the
//! ground-truth CTF and CSF they induce, and the two ways of producing a
//! received grid (per-RE multiplicative, or the exact per-symbol channel
//! matrix with inter-carrier interference).

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::FftPlanner;

use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::grid::{DdGrid, TfGrid};
use crate::kernel;

/// Extended Vehicular A tap delays (ns).
pub const EVA_DELAYS_NS: [f64; 9] = [
    0.0, 30.0, 150.0, 310.0, 370.0, 710.0, 1090.0, 1730.0, 2510.0,
];
/// Extended Vehicular A relative tap powers (dB).
pub const EVA_POWERS_DB: [f64; 9] = [0.0, -1.5, -1.4, -3.6, -0.6, -9.1, -7.0, -12.0, -16.9];

/// Power-delay profile and mobility of a channel family. Tap powers are
/// normalized to unit total linear power on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelProfile {
    pub tap_delays_ns: Vec<f64>,
    pub tap_powers_db: Vec<f64>,
    pub v_kmh: f64,
    pub f_c_hz: f64,
}

impl ChannelProfile {
    pub fn new(
        tap_delays_ns: Vec<f64>,
        tap_powers_db: Vec<f64>,
        v_kmh: f64,
        f_c_hz: f64,
    ) -> Result<Self> {
        if tap_delays_ns.len() != tap_powers_db.len() {
            return Err(Error::Profile(format!(
                "{} tap delays but {} tap powers",
                tap_delays_ns.len(),
                tap_powers_db.len()
            )));
        }
        if tap_delays_ns.is_empty() {
            return Err(Error::Profile("profile has no taps".into()));
        }
        if tap_delays_ns
            .iter()
            .chain(&tap_powers_db)
            .any(|x| !x.is_finite())
            || tap_delays_ns.iter().any(|&d| d < 0.0)
        {
            return Err(Error::Profile(
                "tap delays must be finite and non-negative, powers finite".into(),
            ));
        }
        let total: f64 = tap_powers_db.iter().map(|p| 10f64.powf(p / 10.0)).sum();
        let offset = 10.0 * total.log10();
        let tap_powers_db = tap_powers_db.into_iter().map(|p| p - offset).collect();
        Ok(Self {
            tap_delays_ns,
            tap_powers_db,
            v_kmh,
            f_c_hz,
        })
    }

    /// The raw nine-tap EVA profile.
    pub fn eva(v_kmh: f64, f_c_hz: f64) -> Self {
        Self::new(
            EVA_DELAYS_NS.to_vec(),
            EVA_POWERS_DB.to_vec(),
            v_kmh,
            f_c_hz,
        )
        .expect("static EVA table is well formed")
    }

    /// EVA with taps merged per delay bin of a grid with `m` subcarriers at
    /// `delta_f_hz`: powers that round to the same bin are summed, and the
    /// merged tap sits exactly on the bin.
    pub fn eva_merged(m: usize, delta_f_hz: f64, v_kmh: f64, f_c_hz: f64) -> Result<Self> {
        let raw = Self::eva(v_kmh, f_c_hz);
        let bw = m as f64 * delta_f_hz;
        let mut bins: Vec<(usize, f64)> = Vec::new();
        for (d, p) in raw.tap_delays_ns.iter().zip(raw.linear_powers()) {
            let bin = (d * 1e-9 * bw).round() as usize;
            match bins.iter_mut().find(|(b, _)| *b == bin) {
                Some(entry) => entry.1 += p,
                None => bins.push((bin, p)),
            }
        }
        let delays = bins.iter().map(|(b, _)| *b as f64 / bw * 1e9).collect();
        let powers = bins.iter().map(|(_, p)| 10.0 * p.log10()).collect();
        Self::new(delays, powers, v_kmh, f_c_hz)
    }

    pub fn linear_powers(&self) -> Vec<f64> {
        self.tap_powers_db
            .iter()
            .map(|p| 10f64.powf(p / 10.0))
            .collect()
    }

    /// Tap delays rounded to the `1/(M delta_f)` grid. Fails on two taps in
    /// one bin or a bin at or beyond `m_period`.
    pub fn grid_delays(&self, m: usize, delta_f_hz: f64, m_period: usize) -> Result<Vec<usize>> {
        let bw = m as f64 * delta_f_hz;
        let bins: Vec<usize> = self
            .tap_delays_ns
            .iter()
            .map(|d| (d * 1e-9 * bw).round() as usize)
            .collect();
        for (i, &b) in bins.iter().enumerate() {
            if let Some(j) = bins[..i].iter().position(|&c| c == b) {
                return Err(Error::Profile(format!(
                    "taps {j} and {i} fall into the same delay bin {b}; merge them or refine the grid"
                )));
            }
            if b >= m_period {
                return Err(Error::Support(format!(
                    "delay bin {b} exceeds M/d_f - 1 = {} (requires tau_i in [0, 1/(d_f*delta_f) - 1])",
                    m_period as i64 - 1
                )));
            }
        }
        Ok(bins)
    }
}

/// One propagation path: complex gain, integer delay bin and (possibly
/// fractional) Doppler in units of `1/(NT)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Path {
    pub gain: Complex64,
    pub delay: usize,
    pub doppler: f64,
}

impl Path {
    pub fn new(gain: Complex64, delay: usize, doppler: f64) -> Self {
        Self {
            gain,
            delay,
            doppler,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PathSet(Vec<Path>);

impl PathSet {
    pub fn new(paths: Vec<Path>) -> Self {
        Self(paths)
    }

    pub fn single(gain: Complex64, delay: usize, doppler: f64) -> Self {
        Self(vec![Path::new(gain, delay, doppler)])
    }

    pub fn paths(&self) -> &[Path] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Path> {
        self.0.iter()
    }

    pub fn push(&mut self, p: Path) {
        self.0.push(p);
    }

    /// Checks the support that makes one pilot period sufficient: delays
    /// below `M/d_f`, Doppler in `[-N/(2 d_t), N/(2 d_t) - 1]`, at most one
    /// path per delay bin.
    pub fn validate(&self, cfg: &SystemConfig) -> Result<()> {
        if self.0.is_empty() {
            return Err(Error::Contract("path set is empty".into()));
        }
        let half = (cfg.n / (2 * cfg.d_t)) as f64;
        for (i, p) in self.0.iter().enumerate() {
            if p.delay >= cfg.m_period() {
                return Err(Error::Support(format!(
                    "path {i}: delay bin {} is outside [0, {}]",
                    p.delay,
                    cfg.m_period() - 1
                )));
            }
            if !(p.doppler >= -half && p.doppler <= half - 1.0) {
                return Err(Error::Support(format!(
                    "path {i}: Doppler {} is outside [{}, {}]",
                    p.doppler,
                    -half,
                    half - 1.0
                )));
            }
            if self.0[..i].iter().any(|q| q.delay == p.delay) {
                return Err(Error::Profile(format!(
                    "two paths share delay bin {}",
                    p.delay
                )));
            }
        }
        Ok(())
    }
}

impl FromIterator<Path> for PathSet {
    fn from_iter<I: IntoIterator<Item = Path>>(iter: I) -> Self {
        Self(iter.into_iter().collect())
    }
}

impl<'a> IntoIterator for &'a PathSet {
    type Item = &'a Path;
    type IntoIter = std::slice::Iter<'a, Path>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

/// Circularly-symmetric complex Gaussian sample with variance `var`.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, var: f64) -> Complex64 {
    let s = (var / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(s * re, s * im)
}

/// Draws one path per profile tap: Rayleigh gain with the tap's power,
/// delay rounded to the grid, Jakes Doppler `k_max cos(theta)`.
pub fn gen_paths<R: Rng + ?Sized>(cfg: &SystemConfig, rng: &mut R) -> Result<PathSet> {
    let profile = &cfg.profile;
    if cfg.k_max() > cfg.doppler_bound() {
        return Err(Error::Support(format!(
            "N*T*nu_max = {:.4} exceeds N/(2*d_t) - 1 = {} \
             (requires nu_i in [-1/(2*d_t*T), 1/(2*d_t*T) - 1/(N*T)])",
            cfg.k_max(),
            cfg.doppler_bound()
        )));
    }
    let delays = profile.grid_delays(cfg.m, cfg.delta_f_hz, cfg.m_period())?;
    let k_max = cfg.k_max();
    let paths = delays
        .into_iter()
        .zip(profile.linear_powers())
        .map(|(delay, power)| {
            let gain = complex_gaussian(rng, power);
            let theta: f64 = rng.random_range(0.0..2.0 * PI);
            let mut doppler = k_max * theta.cos();
            if cfg.on_grid_doppler {
                doppler = doppler.round();
            }
            Path::new(gain, delay, doppler)
        })
        .collect();
    Ok(PathSet(paths))
}

/// `h_TF[m,n] = sum_i h_i exp(i2pi k_i n/N) exp(-i2pi l_i m/M)`.
pub fn ctf_from_paths(paths: &PathSet, m: usize, n: usize) -> TfGrid {
    let mut grid = TfGrid::zeros(m, n);
    let mut delay_phase = vec![Complex64::new(0.0, 0.0); m];
    for p in paths {
        for (mi, z) in delay_phase.iter_mut().enumerate() {
            let idx = (p.delay * mi) % m;
            *z = Complex64::from_polar(1.0, -2.0 * PI * idx as f64 / m as f64);
        }
        for ni in 0..n {
            let tone =
                p.gain * Complex64::from_polar(1.0, 2.0 * PI * p.doppler * ni as f64 / n as f64);
            for (h, d) in grid.symbol_mut(ni).iter_mut().zip(&delay_phase) {
                *h += tone * d;
            }
        }
    }
    grid
}

/// Closed-form delay-Doppler response of a path set on an `N x M` grid.
pub fn csf_from_paths(paths: &PathSet, m: usize, n: usize) -> DdGrid {
    let mut dd = DdGrid::zeros(n, m);
    let mut dop = vec![Complex64::new(0.0, 0.0); n];
    let mut del = vec![Complex64::new(0.0, 0.0); m];
    for p in paths {
        for (r, z) in dop.iter_mut().enumerate() {
            *z = p.gain * kernel::doppler(p.doppler, r as f64, n);
        }
        for (l, z) in del.iter_mut().enumerate() {
            *z = kernel::delay(p.delay as f64, l as f64, m);
        }
        for (r, a) in dop.iter().enumerate() {
            for (l, b) in del.iter().enumerate() {
                let v = dd.get(r, l) + a * b;
                dd.set(r, l, v);
            }
        }
    }
    dd
}

fn check_noise(noise_var: f64) -> Result<()> {
    if !(noise_var >= 0.0) {
        return Err(Error::Contract(format!(
            "noise variance must be >= 0, got {noise_var}"
        )));
    }
    Ok(())
}

fn add_noise<R: Rng + ?Sized>(grid: &mut TfGrid, noise_var: f64, rng: &mut R) {
    if noise_var == 0.0 {
        return;
    }
    for z in grid.as_mut_slice() {
        *z += complex_gaussian(rng, noise_var);
    }
}

/// `y = h_TF * x + w` per resource element.
pub fn apply_channel_diag<R: Rng + ?Sized>(
    x: &TfGrid,
    paths: &PathSet,
    noise_var: f64,
    rng: &mut R,
) -> Result<TfGrid> {
    check_noise(noise_var)?;
    let (m, n) = x.dims();
    let h = ctf_from_paths(paths, m, n);
    let mut y = TfGrid::from_fn(m, n, |mi, ni| h.get(mi, ni) * x.get(mi, ni));
    add_noise(&mut y, noise_var, rng);
    Ok(y)
}

/// Exact per-symbol channel `sum_i h_i F Pi^{l_i} Lambda_n^{(k_i)} F^H` plus
/// noise, where `Lambda_n` carries the intra-symbol Doppler ramp
/// `exp(i2pi k_i (n/N + q/(MN)))` over time samples `q`.
pub fn apply_channel_full<R: Rng + ?Sized>(
    x: &TfGrid,
    paths: &PathSet,
    noise_var: f64,
    rng: &mut R,
) -> Result<TfGrid> {
    check_noise(noise_var)?;
    let (m, n) = x.dims();
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(m);
    let inv = planner.plan_fft_inverse(m);
    let unit = 1.0 / (m as f64).sqrt();
    let mn = (m * n) as f64;

    let mut y = TfGrid::zeros(m, n);
    let mut time = vec![Complex64::new(0.0, 0.0); m];
    let mut acc = vec![Complex64::new(0.0, 0.0); m];
    for ni in 0..n {
        time.copy_from_slice(x.symbol(ni));
        inv.process(&mut time);
        time.iter_mut().for_each(|z| *z *= unit);
        acc.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
        for p in paths {
            let base = 2.0 * PI * p.doppler * ni as f64 / n as f64;
            for q in 0..m {
                let ramp = Complex64::from_polar(1.0, base + 2.0 * PI * p.doppler * q as f64 / mn);
                acc[(q + p.delay) % m] += p.gain * ramp * time[q];
            }
        }
        fwd.process(&mut acc);
        for (dst, src) in y.symbol_mut(ni).iter_mut().zip(&acc) {
            *dst = src * unit;
        }
    }
    add_noise(&mut y, noise_var, rng);
    Ok(y)
}
