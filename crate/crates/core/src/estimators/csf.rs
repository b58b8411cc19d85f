//! Delay-Doppler estimators built on the periodic pilot image.
//!
//! Pilots on a `d_t x d_f` lattice see the CSF through a subsampled DFT, so
//! their delay-Doppler image repeats every `N/d_t` Doppler and `M/d_f` delay
//! bins. With the channel confined to one period and on-grid, that period
//! *is* the CSF ([`csf_ongrid`]). For fractional Doppler each delay bin is
//! reduced to a single path by a two-bin magnitude ratio
//! ([`offgrid_paths`]), and the CSF is rebuilt from the recovered paths
//! ([`csf_reconstruct`]).

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;

use super::{ls_pilot, PilotObservations};
use crate::channel::{csf_from_paths, Path, PathSet};
use crate::config::SystemConfig;
use crate::error::Result;
use crate::grid::{DdGrid, DdTransform, PeriodCsf, TfGrid};
use crate::kernel;
use crate::txrx::FrameLayout;

/// One period of the pilot image:
/// `P[k,l] = (d_t d_f / sqrt(NM)) sum_{i,j} h[i d_f, j d_t] e^{+i2pi i l/(M/d_f)} e^{-i2pi j k/(N/d_t)}`.
pub fn periodic_csf(obs: &PilotObservations) -> PeriodCsf {
    let (m, n) = obs.grid_dims();
    let (d_t, d_f) = obs.spacing();
    let (mp, np) = obs.lattice();
    let mut planner = FftPlanner::new();
    let inv = planner.plan_fft_inverse(mp);
    let fwd = planner.plan_fft_forward(np);

    // Lattice order is symbol-major, so each run of `mp` values is one
    // pilot symbol.
    let mut buf = obs.values().to_vec();
    inv.process(&mut buf);
    let mut lines = vec![Complex64::new(0.0, 0.0); buf.len()];
    for j in 0..np {
        for l in 0..mp {
            lines[l * np + j] = buf[j * mp + l];
        }
    }
    fwd.process(&mut lines);
    let scale = (d_t * d_f) as f64 / ((m * n) as f64).sqrt();
    let mut period = PeriodCsf::zeros(np, mp);
    for l in 0..mp {
        for r in 0..np {
            period.set(r as i64, l as i64, lines[l * np + r] * scale);
        }
    }
    period
}

/// The defining double sum of [`periodic_csf`] at an arbitrary integer
/// `(k, l)`. Phases are reduced modulo the lattice size in integer
/// arithmetic, so the result is exactly periodic.
pub fn periodic_csf_at(obs: &PilotObservations, k: i64, l: i64) -> Complex64 {
    let (m, n) = obs.grid_dims();
    let (d_t, d_f) = obs.spacing();
    let (mp, np) = obs.lattice();
    let (mpi, npi) = (mp as i64, np as i64);
    let scale = (d_t * d_f) as f64 / ((m * n) as f64).sqrt();
    let mut acc = Complex64::new(0.0, 0.0);
    for j in 0..np {
        let tk = (j as i64 * k).rem_euclid(npi) as f64 / np as f64;
        for i in 0..mp {
            let tl = (i as i64 * l).rem_euclid(mpi) as f64 / mp as f64;
            acc += obs.at(i, j) * Complex64::from_polar(1.0, 2.0 * PI * (tl - tk));
        }
    }
    acc * scale
}

/// Embeds one period into an `N x M` grid (centered Doppler), zero
/// elsewhere.
pub fn csf_ongrid(period: &PeriodCsf, m: usize, n: usize) -> DdGrid {
    let mut dd = DdGrid::zeros(n, m);
    let (_, mp) = period.dims();
    for k in period.doppler_range() {
        for l in 0..mp.min(m) {
            dd.set_centered(k, l, period.get(k, l as i64));
        }
    }
    dd
}

/// Counts delay bins whose strongest Doppler bin exceeds
/// `gamma * sqrt(noise_var * d_t * d_f)`, the per-bin noise standard
/// deviation of the period. A floor of `1e-9` times the global peak keeps
/// floating-point residue out of the count when `noise_var` is zero.
pub fn estimate_num_paths(
    period: &PeriodCsf,
    noise_var: f64,
    d_t: usize,
    d_f: usize,
    gamma: f64,
) -> usize {
    let (_, mp) = period.dims();
    let peaks: Vec<f64> = (0..mp as i64)
        .map(|l| {
            period
                .doppler_range()
                .map(|k| period.get(k, l).norm())
                .fold(0.0, f64::max)
        })
        .collect();
    let global = peaks.iter().copied().fold(0.0, f64::max);
    let sigma = (noise_var * (d_t * d_f) as f64).sqrt();
    let threshold = (gamma * sigma).max(1e-9 * global);
    peaks.iter().filter(|&&p| p > threshold).count()
}

#[derive(Debug, Clone, PartialEq)]
pub struct OffgridPaths {
    pub paths: PathSet,
    /// Fewer than the requested number of paths could be extracted.
    pub stopped_early: bool,
}

const FRACTION_LIMIT: f64 = 0.5 - 1e-9;

/// Greedy path-wise recovery from one period.
///
/// Each round takes the strongest bin `(k0, l0)` (ties: lowest delay, then
/// lowest Doppler), picks the stronger Doppler neighbour `k0'` (wrapping
/// cyclically), sets `k = k0 + |P[k0']| (k0' - k0) / (|P[k0]| + |P[k0']|)`,
/// divides the peak by the periodic kernels to get the gain, and nulls the
/// whole Doppler column at `l0`.
pub fn offgrid_paths(period: &PeriodCsf, p_hat: usize, cfg: &SystemConfig) -> OffgridPaths {
    let (_, mp) = period.dims();
    let mut work = period.clone();
    let mut nulled = vec![false; mp];
    let mut paths = PathSet::default();
    let mut stopped_early = false;

    for _ in 0..p_hat {
        let mut best: Option<(i64, i64, f64)> = None;
        for l in (0..mp as i64).filter(|&l| !nulled[l as usize]) {
            for k in work.doppler_range() {
                let a = work.get(k, l).norm();
                if best.is_none_or(|(_, _, b)| a > b) {
                    best = Some((k, l, a));
                }
            }
        }
        let Some((k0, l0, peak)) = best.filter(|b| b.2 > 0.0) else {
            stopped_early = true;
            break;
        };

        let below = work.get(k0 - 1, l0).norm();
        let above = work.get(k0 + 1, l0).norm();
        let (k1, side) = if above > below {
            (k0 + 1, above)
        } else {
            (k0 - 1, below)
        };
        let frac = (side * (k1 - k0) as f64 / (peak + side)).clamp(-FRACTION_LIMIT, FRACTION_LIMIT);
        let doppler = k0 as f64 + frac;

        let kern = kernel::periodic_delay(l0 as f64, l0 as f64, cfg.m, cfg.d_f)
            * kernel::periodic_doppler(doppler, k0 as f64, cfg.n, cfg.d_t);
        let gain = work.get(k0, l0) / kern;
        paths.push(Path::new(gain, l0 as usize, doppler));

        for k in period.doppler_range() {
            work.set(k, l0, Complex64::new(0.0, 0.0));
        }
        nulled[l0 as usize] = true;
    }
    OffgridPaths {
        paths,
        stopped_early,
    }
}

/// Full-grid CSF of a set of (estimated) paths with fractional Doppler.
pub fn csf_reconstruct(paths: &PathSet, m: usize, n: usize) -> DdGrid {
    csf_from_paths(paths, m, n)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CsfMode {
    /// Keep the whole period as the CSF estimate.
    OnGrid,
    /// Detect paths, recover fractional Doppler, rebuild the CSF.
    OffGrid,
}

#[derive(Debug, Clone)]
pub struct CsfEstimate {
    pub period: PeriodCsf,
    /// Recovered paths (off-grid mode only).
    pub paths_hat: Option<PathSet>,
    /// Detected path count (off-grid mode only).
    pub p_hat: Option<usize>,
    pub stopped_early: bool,
    pub full_dd: DdGrid,
    pub ctf: TfGrid,
}

impl CsfEstimate {
    /// Off-grid mode found no path above threshold; the CTF is all zeros.
    pub fn is_failure(&self) -> bool {
        self.p_hat == Some(0) || self.paths_hat.as_ref().is_some_and(PathSet::is_empty)
    }
}

/// LS at the pilots, periodic image, CSF estimate, inverse transform.
pub fn proposed_ctf(
    y: &TfGrid,
    x: &TfGrid,
    layout: &FrameLayout,
    cfg: &SystemConfig,
    mode: CsfMode,
    noise_var: f64,
) -> Result<CsfEstimate> {
    let obs = ls_pilot(y, x, layout)?;
    let period = periodic_csf(&obs);
    let (m, n) = (layout.m, layout.n);
    let (full_dd, paths_hat, p_hat, stopped_early) = match mode {
        CsfMode::OnGrid => (csf_ongrid(&period, m, n), None, None, false),
        CsfMode::OffGrid => {
            let (d_t, d_f) = obs.spacing();
            let p = estimate_num_paths(&period, noise_var, d_t, d_f, cfg.gamma_threshold);
            let rec = offgrid_paths(&period, p, cfg);
            let dd = csf_reconstruct(&rec.paths, m, n);
            (dd, Some(rec.paths), Some(p), rec.stopped_early)
        }
    };
    let ctf = DdTransform::new(m, n).isfft(&full_dd)?;
    Ok(CsfEstimate {
        period,
        paths_hat,
        p_hat,
        stopped_early,
        full_dd,
        ctf,
    })
}
