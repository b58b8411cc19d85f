//! Seeded Monte-Carlo engine: one realization per (SNR, trial), shared by
//! every estimator, aggregated into a deterministic table.

use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path as FsPath;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::channel::{
    apply_channel_diag, apply_channel_full, csf_from_paths, ctf_from_paths, gen_paths, Path,
    PathSet,
};
use crate::config::{ChannelModel, SystemConfig};
use crate::error::{Error, Result};
use crate::estimators::{
    csf_ongrid, genie_mmse, interp_linear, ls_pilot, offgrid_paths, periodic_csf, proposed_ctf,
    CsfMode, EstimatorKind, PilotObservations,
};
use crate::grid::{DdGrid, DdTransform, TfGrid};
use crate::kernel;
use crate::tolerance;
use crate::txrx::{build_frame, equalize_single_tap, qam4_demod, qam4_mod, FrameLayout};
use crate::Complex64;

/// Noise variance for unit-energy symbols at `snr_db`.
pub fn noise_var(snr_db: f64) -> f64 {
    10f64.powf(-snr_db / 10.0)
}

/// Child seed for trial `trial_idx` at SNR point `snr_idx`.
pub fn child_seed(master_seed: u64, snr_idx: usize, trial_idx: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(((snr_idx as u64) << 32) | trial_idx as u64);
    rng.next_u64()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub snr_db: f64,
    pub estimator: EstimatorKind,
    /// Mean `|h_hat - h|^2` over all resource elements.
    pub mse: f64,
    /// `mse / mean |h|^2`.
    pub nmse: f64,
    pub ber: f64,
    pub n_bits: usize,
    pub near_singular_count: usize,
    pub seed: u64,
    /// The estimator produced no estimate (off-grid mode found no path);
    /// the metrics were computed with an all-zero CTF.
    pub failed: bool,
}

impl fmt::Display for TrialResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "snr_db={}", self.snr_db)?;
        writeln!(f, "estimator={}", self.estimator)?;
        writeln!(f, "mse={:.9e}", self.mse)?;
        writeln!(f, "nmse={:.9e}", self.nmse)?;
        writeln!(f, "ber={:.9e}", self.ber)?;
        writeln!(f, "n_bits={}", self.n_bits)?;
        writeln!(f, "near_singular_count={}", self.near_singular_count)?;
        writeln!(f, "seed={}", self.seed)?;
        write!(f, "failed={}", self.failed)
    }
}

/// Everything drawn for one trial: bits, then paths, then noise.
#[derive(Debug, Clone)]
pub struct Realization {
    pub snr_db: f64,
    pub noise_var: f64,
    pub seed: u64,
    pub bits: Vec<u8>,
    pub x: TfGrid,
    pub paths: PathSet,
    pub y: TfGrid,
    pub h: TfGrid,
}

pub fn draw_realization(
    cfg: &SystemConfig,
    layout: &FrameLayout,
    snr_db: f64,
    seed: u64,
) -> Result<Realization> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bits: Vec<u8> = (0..2 * layout.n_data())
        .map(|_| rng.random_range(0..2u8))
        .collect();
    let x = build_frame(&qam4_mod(&bits)?, layout)?;
    let paths = gen_paths(cfg, &mut rng)?;
    let nv = noise_var(snr_db);
    let y = match cfg.channel_model {
        ChannelModel::Diag => apply_channel_diag(&x, &paths, nv, &mut rng)?,
        ChannelModel::Full => apply_channel_full(&x, &paths, nv, &mut rng)?,
    };
    let h = ctf_from_paths(&paths, cfg.m, cfg.n);
    Ok(Realization {
        snr_db,
        noise_var: nv,
        seed,
        bits,
        x,
        paths,
        y,
        h,
    })
}

/// CTF estimate of one estimator; the flag marks an estimator failure.
pub fn estimate_ctf(
    cfg: &SystemConfig,
    layout: &FrameLayout,
    real: &Realization,
    estimator: EstimatorKind,
) -> Result<(TfGrid, bool)> {
    Ok(match estimator {
        EstimatorKind::Ideal => (real.h.clone(), false),
        EstimatorKind::LsInterp => (interp_linear(&ls_pilot(&real.y, &real.x, layout)?), false),
        EstimatorKind::MmseGenie => {
            let obs = ls_pilot(&real.y, &real.x, layout)?;
            let powers = cfg.profile.linear_powers();
            let est = genie_mmse(&obs, &real.paths, &powers, layout, real.noise_var)?;
            (est.ctf, false)
        }
        EstimatorKind::CsfOngrid => {
            let est = proposed_ctf(
                &real.y,
                &real.x,
                layout,
                cfg,
                CsfMode::OnGrid,
                real.noise_var,
            )?;
            (est.ctf, false)
        }
        EstimatorKind::CsfOffgrid => {
            let est = proposed_ctf(
                &real.y,
                &real.x,
                layout,
                cfg,
                CsfMode::OffGrid,
                real.noise_var,
            )?;
            let failed = est.is_failure();
            (est.ctf, failed)
        }
    })
}

pub fn evaluate(
    cfg: &SystemConfig,
    layout: &FrameLayout,
    real: &Realization,
    estimator: EstimatorKind,
) -> Result<TrialResult> {
    let (h_hat, failed) = estimate_ctf(cfg, layout, real, estimator)?;
    let mse = h_hat.mse(&real.h);
    let mean_power = real.h.energy() / (cfg.m * cfg.n) as f64;
    let nmse = if mean_power > 0.0 {
        mse / mean_power
    } else {
        0.0
    };
    let eq = equalize_single_tap(&real.y, &h_hat, layout)?;
    let decided = qam4_demod(&eq.symbols);
    let errors = decided
        .iter()
        .zip(&real.bits)
        .filter(|(a, b)| a != b)
        .count();
    Ok(TrialResult {
        snr_db: real.snr_db,
        estimator,
        mse,
        nmse,
        ber: errors as f64 / real.bits.len() as f64,
        n_bits: real.bits.len(),
        near_singular_count: eq.near_singular,
        seed: real.seed,
        failed,
    })
}

/// One fully seeded trial.
pub fn run_trial(
    cfg: &SystemConfig,
    snr_db: f64,
    estimator: EstimatorKind,
    seed: u64,
) -> Result<TrialResult> {
    let layout = FrameLayout::from_config(cfg)?;
    let real = draw_realization(cfg, &layout, snr_db, seed)?;
    evaluate(cfg, &layout, &real, estimator)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub snr_db: f64,
    pub estimator: EstimatorKind,
    pub mean_mse: f64,
    pub mean_nmse: f64,
    pub mean_ber: f64,
    pub n_trials: usize,
    /// Half-width of the normal-approximation 95% interval of the BER mean.
    pub ci95_ber: f64,
}

/// Rows ordered by SNR point, then by estimator as listed.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub fn row(&self, snr_db: f64, estimator: EstimatorKind) -> Option<&SweepRow> {
        self.rows
            .iter()
            .find(|r| r.snr_db == snr_db && r.estimator == estimator)
    }

    /// Aggregates `trials[snr][trial][estimator]`.
    pub fn from_trials(
        snr_list: &[f64],
        estimators: &[EstimatorKind],
        trials: &[Vec<Vec<TrialResult>>],
    ) -> Self {
        let mut rows = Vec::with_capacity(snr_list.len() * estimators.len());
        for (&snr_db, per_snr) in snr_list.iter().zip(trials) {
            for (e_idx, &estimator) in estimators.iter().enumerate() {
                let res: Vec<&TrialResult> = per_snr.iter().map(|t| &t[e_idx]).collect();
                let n = res.len();
                let mean =
                    |f: fn(&TrialResult) -> f64| res.iter().map(|r| f(r)).sum::<f64>() / n as f64;
                let mean_ber = mean(|r| r.ber);
                let ci95_ber = if n > 1 {
                    let var = res.iter().map(|r| (r.ber - mean_ber).powi(2)).sum::<f64>()
                        / (n - 1) as f64;
                    1.96 * (var / n as f64).sqrt()
                } else {
                    0.0
                };
                rows.push(SweepRow {
                    snr_db,
                    estimator,
                    mean_mse: mean(|r| r.mse),
                    mean_nmse: mean(|r| r.nmse),
                    mean_ber,
                    n_trials: n,
                    ci95_ber,
                });
            }
        }
        Self { rows }
    }

    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("snr_db,estimator,mean_mse,mean_nmse,mean_ber,n_trials,ci95_ber\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{:.9e},{},{:.9e},{:.9e},{:.9e},{},{:.9e}\n",
                r.snr_db, r.estimator, r.mean_mse, r.mean_nmse, r.mean_ber, r.n_trials, r.ci95_ber
            ));
        }
        out
    }
}

pub fn write_csv(table: &SweepTable, path: impl AsRef<FsPath>) -> Result<()> {
    let path = path.as_ref();
    let io = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    w.write_all(table.to_csv().as_bytes()).map_err(io)?;
    w.flush().map_err(io)
}

/// All trial results, indexed `[snr][trial][estimator]`.
pub fn sweep_trials(
    cfg: &SystemConfig,
    snr_list: &[f64],
    estimators: &[EstimatorKind],
    n_trials: usize,
    master_seed: u64,
) -> Result<Vec<Vec<Vec<TrialResult>>>> {
    if n_trials == 0 {
        return Err(Error::Contract("n_trials must be at least 1".into()));
    }
    let layout = FrameLayout::from_config(cfg)?;
    let jobs: Vec<(usize, usize)> = (0..snr_list.len())
        .flat_map(|s| (0..n_trials).map(move |t| (s, t)))
        .collect();
    let work = || -> Result<Vec<Vec<TrialResult>>> {
        jobs.par_iter()
            .map(|&(s, t)| {
                let real =
                    draw_realization(cfg, &layout, snr_list[s], child_seed(master_seed, s, t))?;
                estimators
                    .iter()
                    .map(|&e| evaluate(cfg, &layout, &real, e))
                    .collect()
            })
            .collect()
    };
    let flat = match cfg.threads {
        Some(threads) => rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::Contract(format!("thread pool: {e}")))?
            .install(work)?,
        None => work()?,
    };
    let mut it = flat.into_iter();
    Ok((0..snr_list.len())
        .map(|_| it.by_ref().take(n_trials).collect())
        .collect())
}

pub fn snr_sweep(
    cfg: &SystemConfig,
    snr_list: &[f64],
    estimators: &[EstimatorKind],
    n_trials: usize,
    master_seed: u64,
) -> Result<SweepTable> {
    let trials = sweep_trials(cfg, snr_list, estimators, n_trials, master_seed)?;
    Ok(SweepTable::from_trials(snr_list, estimators, &trials))
}

/// Sweep with every parameter taken from the config.
pub fn sweep_from_config(cfg: &SystemConfig) -> Result<SweepTable> {
    snr_sweep(
        cfg,
        &cfg.snr_db,
        &cfg.estimators,
        cfg.n_trials,
        cfg.master_seed,
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub max_err: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    fn push(&mut self, name: &str, max_err: f64, tol: f64) {
        self.checks.push(Check {
            name: name.to_string(),
            pass: max_err <= tol,
            max_err,
        });
    }
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            let verdict = if c.pass { "PASS" } else { "FAIL" };
            writeln!(f, "CHECK {} {verdict} max_err={:.3e}", c.name, c.max_err)?;
        }
        Ok(())
    }
}

/// Every on-grid single-path placement `(k, l)` whose Doppler lies in the
/// period's support and whose delay lies below `M/d_f`.
pub fn in_support_placements(m: usize, n: usize, d_t: usize, d_f: usize) -> Vec<(i64, usize)> {
    let np = n / d_t;
    let mut out = Vec::new();
    for l in 0..m / d_f {
        for k in kernel::centered_range(np) {
            out.push((k, l));
        }
    }
    out
}

/// Worst per-entry gap between the embedded pilot period and the true CSF
/// over single unit paths at `placements`. Placements outside the support
/// alias and show up as large errors.
pub fn check_ongrid_csf(
    m: usize,
    n: usize,
    d_t: usize,
    d_f: usize,
    placements: &[(i64, usize)],
) -> Result<f64> {
    let mut worst = 0.0f64;
    for &(k, l) in placements {
        let ps = PathSet::single(Complex64::new(1.0, 0.0), l, k as f64);
        let obs = PilotObservations::sample(&ctf_from_paths(&ps, m, n), d_t, d_f)?;
        let est = csf_ongrid(&periodic_csf(&obs), m, n);
        worst = worst.max(est.max_abs_diff(&csf_from_paths(&ps, m, n)));
    }
    Ok(worst)
}

/// End-to-end on-grid CTF error (pilots to every RE) at `placements`.
pub fn check_ongrid_ctf(
    m: usize,
    n: usize,
    d_t: usize,
    d_f: usize,
    placements: &[(i64, usize)],
) -> Result<f64> {
    let tr = DdTransform::new(m, n);
    let mut worst = 0.0f64;
    for &(k, l) in placements {
        let ps = PathSet::single(Complex64::new(1.0, 0.0), l, k as f64);
        let h = ctf_from_paths(&ps, m, n);
        let obs = PilotObservations::sample(&h, d_t, d_f)?;
        let est = tr.isfft(&csf_ongrid(&periodic_csf(&obs), m, n))?;
        for (a, b) in est.as_slice().iter().zip(h.as_slice()) {
            worst = worst.max((a - b).norm());
        }
    }
    Ok(worst)
}

fn check_kernel_ongrid(n: usize, d_t: usize) -> f64 {
    let np = (n / d_t) as i64;
    let mut worst = 0.0f64;
    for k_i in -np / 2..np / 2 {
        for k in -np / 2..np / 2 {
            let want = if k == k_i { (n as f64).sqrt() } else { 0.0 };
            worst =
                worst.max((kernel::periodic_doppler(k_i as f64, k as f64, n, d_t) - want).norm());
        }
    }
    worst
}

fn check_aliasing(m: usize, n: usize, d_t: usize, d_f: usize) -> Result<f64> {
    let mut worst = 0.0f64;
    for step in 0..20 {
        let k_i = -3.9 + 0.37 * step as f64;
        let ps = PathSet::single(Complex64::new(1.0, 0.0), 1, k_i);
        let full = csf_from_paths(&ps, m, n);
        let obs = PilotObservations::sample(&ctf_from_paths(&ps, m, n), d_t, d_f)?;
        let embedded = csf_ongrid(&periodic_csf(&obs), m, n);
        for k in kernel::centered_range(n) {
            let got = full.get_centered(k, 1) - embedded.get_centered(k, 1);
            let want = kernel::aliasing_difference(k_i, k, n, d_t) * (m as f64).sqrt();
            worst = worst.max((got - want).norm());
        }
    }
    Ok(worst)
}

fn check_periodicity(m: usize, n: usize, d_t: usize, d_f: usize) -> Result<f64> {
    let ps = PathSet::new(vec![
        Path::new(Complex64::new(0.8, 0.3), 1, 1.37),
        Path::new(Complex64::new(-0.2, 0.5), 3, -2.6),
    ]);
    let obs = PilotObservations::sample(&ctf_from_paths(&ps, m, n), d_t, d_f)?;
    let (mp, np) = obs.lattice();
    let mut worst = 0.0f64;
    for k in -(np as i64) / 2..np as i64 / 2 {
        for l in 0..mp as i64 {
            let base = crate::estimators::periodic_csf_at(&obs, k, l);
            for t in [-1i64, 1, 2] {
                worst = worst.max(
                    (crate::estimators::periodic_csf_at(&obs, k + t * np as i64, l) - base).norm(),
                );
                worst = worst.max(
                    (crate::estimators::periodic_csf_at(&obs, k, l + t * mp as i64) - base).norm(),
                );
            }
        }
    }
    Ok(worst)
}

fn check_roundtrip(m: usize, n: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tf = TfGrid::from_fn(m, n, |_, _| crate::channel::complex_gaussian(&mut rng, 1.0));
    let tr = DdTransform::new(m, n);
    let dd: DdGrid = tr.sfft(&tf)?;
    let back = tr.isfft(&dd)?;
    let rt = back
        .as_slice()
        .iter()
        .zip(tf.as_slice())
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);
    let parseval = (dd.energy() - tf.energy()).abs() / tf.energy();
    Ok(rt.max(parseval))
}

/// Off-grid recovery of a single noiseless path swept across the table's
/// fractional offsets: worst Doppler and gain errors, and whether every
/// error stayed within its table entry.
pub fn check_offgrid_table() -> Result<(f64, f64, bool)> {
    let (m, n, d_t, d_f) = tolerance::TABLE_GRID;
    let cfg = SystemConfig::with_grid(m, n, d_t, d_f);
    let (mut dop, mut gain, mut within) = (0.0f64, 0.0f64, true);
    for (i, &frac) in tolerance::FRACTIONS.iter().enumerate() {
        for base in [-3.0, 0.0, 2.0] {
            let truth = Complex64::new(1.0, 0.0);
            let ps = PathSet::single(truth, 2, base + frac);
            let obs = PilotObservations::sample(&ctf_from_paths(&ps, m, n), d_t, d_f)?;
            let rec = offgrid_paths(&periodic_csf(&obs), 1, &cfg);
            let Some(p) = rec.paths.paths().first().filter(|p| p.delay == 2) else {
                return Ok((f64::INFINITY, f64::INFINITY, false));
            };
            let (d_err, g_err) = ((p.doppler - (base + frac)).abs(), (p.gain - truth).norm());
            within &= d_err <= tolerance::DOPPLER_ERROR[i] && g_err <= tolerance::GAIN_ERROR[i];
            dop = dop.max(d_err);
            gain = gain.max(g_err);
        }
    }
    Ok((dop, gain, within))
}

/// Exhaustive small-scale and kernel checks, plus the on-grid check on the
/// configured grid.
pub fn verify_suite(cfg: &SystemConfig) -> Result<VerifyReport> {
    let mut r = VerifyReport::default();
    let small = in_support_placements(16, 16, 2, 2);
    r.push(
        "ongrid-csf-16x16",
        check_ongrid_csf(16, 16, 2, 2, &small)?,
        1e-10,
    );
    r.push(
        "ongrid-ctf-16x16",
        check_ongrid_ctf(16, 16, 2, 2, &small)?,
        1e-9,
    );
    let own = in_support_placements(cfg.m, cfg.n, cfg.d_t, cfg.d_f);
    let stride = (own.len() / 64).max(1);
    let sampled: Vec<_> = own.iter().copied().step_by(stride).collect();
    r.push(
        "ongrid-ctf-config",
        check_ongrid_ctf(cfg.m, cfg.n, cfg.d_t, cfg.d_f, &sampled)?,
        1e-9,
    );
    r.push("kernel-ongrid-n32", check_kernel_ongrid(32, 4), 1e-9);
    r.push("aliasing-n32", check_aliasing(16, 32, 4, 4)?, 1e-9);
    r.push("periodicity", check_periodicity(32, 32, 4, 2)?, 0.0);
    r.push(
        "transform-roundtrip",
        check_roundtrip(cfg.m, cfg.n, cfg.master_seed)?,
        1e-12,
    );
    let (dop, gain, within) = check_offgrid_table()?;
    r.checks.push(Check {
        name: "offgrid-table".into(),
        pass: within,
        max_err: dop.max(gain),
    });
    Ok(r)
}
