//! Acceptance criteria. Runs without the libtest harness so every verdict is
//! printed: one `criterion N: PASS|FAIL` line per criterion (with sub-lines
//! where a criterion has parts). Exits non-zero if any criterion fails.

use std::f64::consts::PI;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use csf_ofdm::channel::{apply_channel_diag, complex_gaussian, Path, PathSet};
use csf_ofdm::config::SystemConfig;
use csf_ofdm::estimators::{
    genie_correlations, genie_mmse, ls_pilot, mmse_estimate, offgrid_paths, periodic_csf,
    periodic_csf_at, proposed_ctf, CsfMode, EstimatorKind, PilotObservations,
};
use csf_ofdm::grid::{DdGrid, DdTransform, TfGrid};
use csf_ofdm::harness::{self, SweepTable};
use csf_ofdm::txrx::{build_frame, FrameLayout, PilotPattern};
use csf_ofdm::{kernel, tolerance, Complex64};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn report(name: &str, pass: bool, detail: impl std::fmt::Display) -> bool {
    println!("{name}: {} ({detail})", if pass { "PASS" } else { "FAIL" });
    pass
}

fn shipped_cfg() -> SystemConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../paper.cfg");
    SystemConfig::load(path).expect("paper.cfg loads")
}

// Time-frequency response of a path set, summed term by term.
fn ctf_oracle(ps: &PathSet, m: usize, n: usize) -> TfGrid {
    TfGrid::from_fn(m, n, |mi, ni| {
        ps.iter()
            .map(|p| {
                p.gain
                    * Complex64::from_polar(
                        1.0,
                        2.0 * PI
                            * (p.doppler * ni as f64 / n as f64 - (p.delay * mi) as f64 / m as f64),
                    )
            })
            .sum()
    })
}

// Delay-Doppler response of a path set from the defining double sums.
fn csf_oracle(ps: &PathSet, m: usize, n: usize) -> DdGrid {
    DdGrid::from_fn(n, m, |r, l| {
        let k = if r < n / 2 {
            r as f64
        } else {
            r as f64 - n as f64
        };
        ps.iter()
            .map(|p| {
                let del: Complex64 = (0..m)
                    .map(|mi| {
                        Complex64::from_polar(
                            1.0,
                            -2.0 * PI * mi as f64 * (p.delay as f64 - l as f64) / m as f64,
                        )
                    })
                    .sum();
                let dop: Complex64 = (0..n)
                    .map(|ni| {
                        Complex64::from_polar(
                            1.0,
                            2.0 * PI * ni as f64 * (p.doppler - k) / n as f64,
                        )
                    })
                    .sum();
                p.gain * del * dop / ((m * n) as f64).sqrt()
            })
            .sum()
    })
}

fn max_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

fn criterion_1_on_grid_exactness() -> bool {
    let (m, n, d_t, d_f) = (16, 16, 2, 2);
    let start = Instant::now();
    let cfg = SystemConfig::with_grid(m, n, d_t, d_f);
    let layout = FrameLayout::new(m, n, PilotPattern::new(d_t, d_f)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let data: Vec<_> = (0..layout.n_data())
        .map(|_| complex_gaussian(&mut rng, 1.0))
        .collect();
    let x = build_frame(&data, &layout).unwrap();

    let (mut period_err, mut ctf_err, mut count) = (0.0f64, 0.0f64, 0);
    for l in 0..m / d_f {
        for k in -((n / d_t / 2) as i64)..(n / d_t / 2) as i64 {
            let ps = PathSet::single(c(1.0, 0.0), l, k as f64);
            let truth = csf_oracle(&ps, m, n);
            let obs = PilotObservations::sample(&ctf_oracle(&ps, m, n), d_t, d_f).unwrap();
            let period = periodic_csf(&obs);
            for kk in period.doppler_range() {
                for ll in 0..(m / d_f) as i64 {
                    let want = truth.get(kk.rem_euclid(n as i64) as usize, ll as usize);
                    period_err = period_err.max((period.get(kk, ll) - want).norm());
                }
            }

            let y = apply_channel_diag(&x, &ps, 0.0, &mut rng).unwrap();
            let est = proposed_ctf(&y, &x, &layout, &cfg, CsfMode::OnGrid, 0.0).unwrap();
            ctf_err = ctf_err.max(max_diff(
                est.ctf.as_slice(),
                ctf_oracle(&ps, m, n).as_slice(),
            ));
            count += 1;
        }
    }
    let elapsed = start.elapsed();
    report(
        "criterion 1",
        period_err < 1e-10 && ctf_err < 1e-9 && elapsed < Duration::from_secs(10),
        format!(
            "{count} placements, period err {period_err:.2e}, ctf err {ctf_err:.2e}, {elapsed:.2?}"
        ),
    )
}

fn criterion_2_kernel_identities() -> bool {
    let (n, d_t, m) = (32, 4, 16);
    let np = (n / d_t) as i64;
    let mut ongrid = 0.0f64;
    for k_i in -np / 2..np / 2 {
        for k in -np / 2..np / 2 {
            let want = if k == k_i { (n as f64).sqrt() } else { 0.0 };
            ongrid =
                ongrid.max((kernel::periodic_doppler(k_i as f64, k as f64, n, d_t) - want).norm());
        }
    }

    // Full-grid minus one-period kernels, both as direct sums.
    let delta_direct = |k_i: f64, k: i64| {
        let x = k_i - k as f64;
        let full: Complex64 = (0..n)
            .map(|j| Complex64::from_polar(1.0, 2.0 * PI * j as f64 * x / n as f64))
            .sum::<Complex64>()
            / (n as f64).sqrt();
        if kernel::centered_range(n / d_t).contains(&k) {
            let per: Complex64 = (0..n / d_t)
                .map(|j| Complex64::from_polar(1.0, 2.0 * PI * (j * d_t) as f64 * x / n as f64))
                .sum::<Complex64>()
                * d_t as f64
                / (n as f64).sqrt();
            full - per
        } else {
            full
        }
    };
    let (mut formula, mut pipeline) = (0.0f64, 0.0f64);
    for step in 0..40 {
        let k_i = -3.95 + 0.1975 * step as f64;
        let ps = PathSet::single(c(1.0, 0.0), 1, k_i);
        let full = csf_oracle(&ps, m, n);
        let obs = PilotObservations::sample(&ctf_oracle(&ps, m, n), d_t, 4).unwrap();
        let period = periodic_csf(&obs);
        for k in kernel::centered_range(n) {
            let want = delta_direct(k_i, k);
            formula = formula.max((kernel::aliasing_difference(k_i, k, n, d_t) - want).norm());
            let embedded = if kernel::centered_range(n / d_t).contains(&k) {
                period.get(k, 1)
            } else {
                c(0.0, 0.0)
            };
            let got = full.get(k.rem_euclid(n as i64) as usize, 1) - embedded;
            pipeline = pipeline.max((got - want * (m as f64).sqrt()).norm());
        }
    }
    report(
        "criterion 2",
        ongrid < 1e-9 && formula < 1e-9 && pipeline < 1e-9,
        format!("on-grid kernel {ongrid:.2e}, aliasing formula {formula:.2e}, aliasing pipeline {pipeline:.2e}"),
    )
}

fn criterion_3_offgrid_recovery() -> bool {
    let (m, n, d_t, d_f) = tolerance::TABLE_GRID;
    let cfg = SystemConfig::with_grid(m, n, d_t, d_f);
    let start = Instant::now();
    let (mut worst_d, mut worst_g, mut ok) = (0.0f64, 0.0f64, true);
    for (i, &frac) in tolerance::FRACTIONS.iter().enumerate() {
        for base in [-5i64, -1, 0, 3, 6] {
            let k = base as f64 + frac;
            let truth = c(0.6, -0.8);
            let ps = PathSet::single(truth, 3, k);
            let obs = PilotObservations::sample(&ctf_oracle(&ps, m, n), d_t, d_f).unwrap();
            let rec = offgrid_paths(&periodic_csf(&obs), 1, &cfg);
            let p = rec.paths.paths()[0];
            let d_err = (p.doppler - k).abs();
            let g_err = (p.gain - truth).norm() / truth.norm();
            worst_d = worst_d.max(d_err);
            worst_g = worst_g.max(g_err);
            ok &= p.delay == 3
                && d_err <= tolerance::DOPPLER_ERROR[i]
                && g_err <= tolerance::GAIN_ERROR[i];
        }
    }
    let elapsed = start.elapsed();
    report(
        "criterion 3",
        ok && elapsed < Duration::from_secs(30),
        format!("max doppler err {worst_d:.2e}, max gain err {worst_g:.2e}, {elapsed:.2?}"),
    )
}

fn ber(t: &SweepTable, snr: f64, e: EstimatorKind) -> f64 {
    t.row(snr, e).unwrap().mean_ber
}

fn mse(t: &SweepTable, snr: f64, e: EstimatorKind) -> f64 {
    t.row(snr, e).unwrap().mean_mse
}

fn criterion_4_monte_carlo_curves() -> bool {
    use EstimatorKind::*;
    let start = Instant::now();
    let cfg = shipped_cfg();
    if cfg.n_trials < 500 {
        return report(
            "criterion 4",
            false,
            format!("needs >= 500 trials, config has {}", cfg.n_trials),
        );
    }
    let main = harness::sweep_from_config(&cfg).unwrap();

    let mut og = cfg.clone();
    og.on_grid_doppler = true;
    let og_snrs: Vec<f64> = cfg.snr_db.iter().copied().filter(|&s| s > 15.0).collect();
    let ongrid = harness::snr_sweep(
        &og,
        &og_snrs,
        &[CsfOngrid, Ideal],
        og.n_trials,
        og.master_seed,
    )
    .unwrap();
    let elapsed = start.elapsed();

    for r in main.rows.iter().chain(&ongrid.rows) {
        println!(
            "  {:>4} {:<12} mse={:.3e} nmse={:.3e} ber={:.3e} ±{:.1e}",
            r.snr_db, r.estimator, r.mean_mse, r.mean_nmse, r.mean_ber, r.ci95_ber
        );
    }

    let floor_mse = (mse(&main, 40.0, LsInterp) / mse(&main, 30.0, LsInterp) - 1.0).abs();
    let floor_ber = (ber(&main, 40.0, LsInterp) / ber(&main, 30.0, LsInterp) - 1.0).abs();
    let a = report(
        "criterion 4a",
        floor_mse < 0.2 && floor_ber < 0.2,
        format!("ls-interp 30->40 dB change: mse {floor_mse:.3}, ber {floor_ber:.3}"),
    );

    let mut b_ok = true;
    let mut worst_mmse = 0.0f64;
    let mut worst_ideal = 0.0f64;
    for &s in &cfg.snr_db {
        let r = ber(&main, s, CsfOffgrid) / ber(&main, s, MmseGenie);
        worst_mmse = worst_mmse.max(r);
        b_ok &= r <= 3.0;
        if s >= 20.0 {
            let r = ber(&main, s, CsfOffgrid) / ber(&main, s, Ideal);
            worst_ideal = worst_ideal.max(r);
            b_ok &= r <= 3.0;
        }
    }
    let b = report(
        "criterion 4b",
        b_ok,
        format!("csf-offgrid/mmse-genie max {worst_mmse:.3}, csf-offgrid/ideal (>=20 dB) max {worst_ideal:.3}"),
    );

    let mut worst_og = 0.0f64;
    for &s in &og_snrs {
        worst_og = worst_og.max(ber(&ongrid, s, CsfOngrid) / ber(&ongrid, s, Ideal));
    }
    let c_pass = report(
        "criterion 4c",
        worst_og <= 1.5,
        format!("on-grid Doppler, csf-ongrid/ideal BER above 15 dB max {worst_og:.3}"),
    );

    let contrast = mse(&main, 30.0, CsfOffgrid) / mse(&main, 40.0, CsfOffgrid);
    let d = report(
        "criterion 4 floor contrast",
        contrast >= 5.0,
        format!("csf-offgrid mse 30->40 dB drops {contrast:.2}x"),
    );
    let bounded = main
        .rows
        .iter()
        .all(|r| r.mean_ber <= 0.5 + 3.0 * r.ci95_ber);
    let snrs = &cfg.snr_db;
    let decreasing = snrs.windows(2).all(|w| {
        let (lo, hi) = (
            main.row(w[0], Ideal).unwrap(),
            main.row(w[1], Ideal).unwrap(),
        );
        hi.mean_ber < lo.mean_ber || hi.mean_ber - hi.ci95_ber <= lo.mean_ber + lo.ci95_ber
    });
    let e = report(
        "criterion 4 ber sanity",
        bounded && decreasing,
        "ber <= 0.5 + 3 ci, ideal decreasing in snr",
    );
    let f = report(
        "criterion 4 runtime",
        elapsed < Duration::from_secs(600),
        format!("{elapsed:.2?}"),
    );
    report("criterion 4", a && b && c_pass && d && e && f, "all parts")
}

fn criterion_5_mmse_matches_dense_oracle() -> bool {
    let (m, n) = (8, 8);
    let layout = FrameLayout::new(m, n, PilotPattern::new(2, 2)).unwrap();
    let ps = PathSet::new(vec![
        Path::new(c(0.7, 0.2), 0, 0.6),
        Path::new(c(-0.3, 0.4), 2, -1.3),
    ]);
    let powers = [0.65, 0.35];
    let corr = genie_correlations(&ps, &powers, &layout).unwrap();

    // Full MN x MN covariance written out element by element, then the
    // pilot rows/columns picked by index and the system inverted by LU.
    let all: Vec<(usize, usize)> = (0..n)
        .flat_map(|ni| (0..m).map(move |mi| (mi, ni)))
        .collect();
    let r = DMatrix::from_fn(m * n, m * n, |a, b| {
        let ((ma, na), (mb, nb)) = (all[a], all[b]);
        ps.iter()
            .zip(powers)
            .map(|(p, pw)| {
                let ph = p.doppler * (na as f64 - nb as f64) / n as f64
                    - p.delay as f64 * (ma as f64 - mb as f64) / m as f64;
                Complex64::from_polar(pw, 2.0 * PI * ph)
            })
            .sum()
    });
    let pidx: Vec<usize> = layout
        .pilot_positions
        .iter()
        .map(|&(mi, ni)| ni * m + mi)
        .collect();
    let r1 = DMatrix::from_fn(m * n, pidx.len(), |a, j| r[(a, pidx[j])]);
    let r2 = DMatrix::from_fn(pidx.len(), pidx.len(), |i, j| r[(pidx[i], pidx[j])]);

    let mut worst = 0.0f64;
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    for noise in [0.01, 0.1, 1.0] {
        let h = ctf_oracle(&ps, m, n);
        let obs = PilotObservations::from_fn(m, n, 2, 2, |mi, ni| {
            h.get(mi, ni) + complex_gaussian(&mut rng, noise)
        })
        .unwrap();
        let b = DMatrix::from_fn(pidx.len(), 1, |j, _| obs.values()[j]);
        let sys = &r2 + DMatrix::identity(pidx.len(), pidx.len()) * c(noise, 0.0);
        let inv = sys.try_inverse().unwrap();
        let want = &r1 * inv * b;
        let got = mmse_estimate(&obs, &corr, noise).unwrap();
        let fact = genie_mmse(&obs, &ps, &powers, &layout, noise).unwrap();
        worst = worst.max(max_diff(got.ctf.as_slice(), want.as_slice()));
        worst = worst.max(max_diff(fact.ctf.as_slice(), want.as_slice()));
    }
    report("criterion 5", worst < 1e-8, format!("max err {worst:.2e}"))
}

fn criterion_6_structural_invariants() -> bool {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut transform = 0.0f64;
    for (m, n) in [(16, 8), (128, 64), (12, 10)] {
        let tr = DdTransform::new(m, n);
        let tf = TfGrid::from_fn(m, n, |_, _| complex_gaussian(&mut rng, 1.0));
        let dd = tr.sfft(&tf).unwrap();
        transform = transform.max((dd.energy() - tf.energy()).abs() / tf.energy());
        transform = transform.max(max_diff(tr.isfft(&dd).unwrap().as_slice(), tf.as_slice()));
        let back = tr.sfft(&tr.isfft(&dd).unwrap()).unwrap();
        transform = transform.max(max_diff(back.as_slice(), dd.as_slice()));
    }

    let obs =
        PilotObservations::from_fn(64, 32, 4, 4, |_, _| complex_gaussian(&mut rng, 1.0)).unwrap();
    let (mp, np) = obs.lattice();
    let mut periodic = true;
    for _ in 0..200 {
        let k = rng.random_range(-20i64..20);
        let l = rng.random_range(-20i64..40);
        let base = periodic_csf_at(&obs, k, l);
        let t = rng.random_range(-3i64..4);
        periodic &= periodic_csf_at(&obs, k + t * np as i64, l) == base;
        periodic &= periodic_csf_at(&obs, k, l + t * mp as i64) == base;
    }

    let cfg = shipped_cfg();
    let perfect = (0..5).all(|s| {
        let r = harness::run_trial(&cfg, f64::INFINITY, EstimatorKind::Ideal, s).unwrap();
        r.ber == 0.0 && r.mse == 0.0
    });

    let mut small = cfg.clone();
    small.threads = Some(2);
    let snrs = [0.0, 20.0];
    let a = harness::snr_sweep(&small, &snrs, &EstimatorKind::ALL, 3, 9)
        .unwrap()
        .to_csv();
    small.threads = Some(1);
    let b = harness::snr_sweep(&small, &snrs, &EstimatorKind::ALL, 3, 9)
        .unwrap()
        .to_csv();

    report(
        "criterion 6",
        transform < 1e-12 && periodic && perfect && a == b,
        format!(
            "transform err {transform:.2e}, periodicity exact {periodic}, perfect-csi ber 0 {perfect}, deterministic {}",
            a == b
        ),
    )
}

// Per-call time: best of `reps` batches of `inner` calls. Single-core
// machines see bursty noise, which the minimum filters out.
// Seconds per call of one batch of `inner` calls.
fn batch(inner: usize, mut f: impl FnMut()) -> f64 {
    let t = Instant::now();
    for _ in 0..inner {
        f();
    }
    t.elapsed().as_secs_f64() / inner as f64
}

struct Scenario {
    cfg: SystemConfig,
    layout: FrameLayout,
    x: TfGrid,
    y: TfGrid,
    paths: PathSet,
    powers: Vec<f64>,
}

// The same four paths on every grid, so only the grid size changes.
fn scenario(m: usize, n: usize) -> Scenario {
    let cfg = SystemConfig::with_grid(m, n, 4, 4);
    let layout = FrameLayout::from_config(&cfg).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let data: Vec<_> = (0..layout.n_data())
        .map(|_| complex_gaussian(&mut rng, 1.0))
        .collect();
    let x = build_frame(&data, &layout).unwrap();
    let paths = PathSet::new(vec![
        Path::new(c(0.7, 0.3), 0, 1.3),
        Path::new(c(-0.4, 0.3), 1, -2.2),
        Path::new(c(0.2, -0.2), 2, 0.4),
        Path::new(c(0.1, 0.1), 3, 2.7),
    ]);
    let y = apply_channel_diag(&x, &paths, 0.01, &mut rng).unwrap();
    let powers = vec![0.55, 0.3, 0.1, 0.05];
    Scenario {
        cfg,
        layout,
        x,
        y,
        paths,
        powers,
    }
}

fn criterion_7_complexity() -> bool {
    // Total grid size doubles each step, alternating the subcarrier and
    // symbol axes.
    let grids = [(64, 32), (128, 32), (128, 64), (256, 64), (256, 128)];
    let scenarios: Vec<Scenario> = grids.iter().map(|&(m, n)| scenario(m, n)).collect();
    let obs: Vec<_> = scenarios
        .iter()
        .map(|s| ls_pilot(&s.y, &s.x, &s.layout).unwrap())
        .collect();
    let mut csf_times = vec![f64::INFINITY; grids.len()];
    let mut mmse_times = vec![f64::INFINITY; grids.len()];
    // Batches are interleaved across grids and the fastest batch per grid is
    // kept, so a burst of background load cannot bias a single grid.
    for round in 0..30 {
        for (i, s) in scenarios.iter().enumerate() {
            let inner = (1 << 17) / (s.cfg.m * s.cfg.n) + 1;
            let t = batch(inner, || {
                let est =
                    proposed_ctf(&s.y, &s.x, &s.layout, &s.cfg, CsfMode::OffGrid, 0.01).unwrap();
                std::hint::black_box(est);
            });
            csf_times[i] = csf_times[i].min(t);
            if round < 8 {
                let t = batch(1, || {
                    let est = genie_mmse(&obs[i], &s.paths, &s.powers, &s.layout, 0.01).unwrap();
                    std::hint::black_box(est);
                });
                mmse_times[i] = mmse_times[i].min(t);
            }
        }
    }
    let csf_ratios: Vec<f64> = csf_times.windows(2).map(|w| w[1] / w[0]).collect();
    let mmse_ratios: Vec<f64> = mmse_times.windows(2).map(|w| w[1] / w[0]).collect();
    for (i, &(m, n)) in grids.iter().enumerate() {
        println!(
            "  {m}x{n}: csf-offgrid {:.3e}s, mmse-genie {:.3e}s",
            csf_times[i], mmse_times[i]
        );
    }
    let csf_ok = csf_ratios.iter().all(|&r| r <= 2.6);
    // Cubic in the pilot count is 8x per doubling; the last two steps
    // (512 -> 1024 -> 2048 pilots) are where the factorization dominates.
    let tail = &mmse_ratios[mmse_ratios.len() - 2..];
    let mmse_ok = tail.iter().all(|&r| r >= 5.0);
    report(
        "criterion 7",
        csf_ok && mmse_ok,
        format!("csf-offgrid ratios {csf_ratios:.2?}, mmse-genie ratios {mmse_ratios:.2?}"),
    )
}

fn main() -> std::process::ExitCode {
    type Criterion = (&'static str, fn() -> bool);
    let criteria: [Criterion; 7] = [
        ("criterion 1", criterion_1_on_grid_exactness),
        ("criterion 2", criterion_2_kernel_identities),
        ("criterion 3", criterion_3_offgrid_recovery),
        ("criterion 4", criterion_4_monte_carlo_curves),
        ("criterion 5", criterion_5_mmse_matches_dense_oracle),
        ("criterion 6", criterion_6_structural_invariants),
        ("criterion 7", criterion_7_complexity),
    ];
    // `cargo test -- <filter>` selects criteria by substring of the name.
    let filters: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let mut failed = Vec::new();
    for (name, run) in criteria {
        if !filters.is_empty() && !filters.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        match std::panic::catch_unwind(run) {
            Ok(true) => {}
            Ok(false) => failed.push(name),
            Err(_) => {
                println!("{name}: FAIL (panicked)");
                failed.push(name);
            }
        }
    }
    if failed.is_empty() {
        println!("acceptance: all criteria passed");
        std::process::ExitCode::SUCCESS
    } else {
        println!("acceptance: failed: {}", failed.join(", "));
        std::process::ExitCode::FAILURE
    }
}
