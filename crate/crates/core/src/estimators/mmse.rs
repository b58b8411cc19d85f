use std::f64::consts::PI;

use nalgebra::{Cholesky, DMatrix, DVector};
use num_complex::Complex64;

use super::PilotObservations;
use crate::channel::{Path, PathSet};
use crate::error::{Error, Result};
use crate::grid::TfGrid;
use crate::txrx::FrameLayout;

/// Second-order statistics of the CTF for known path positions.
///
/// `r1` correlates every RE (layout order, subcarrier fastest) with every
/// pilot; `r2` correlates pilots with pilots. Both use the pilot order of
/// [`FrameLayout::pilot_positions`].
#[derive(Debug, Clone)]
pub struct CorrelationPair {
    pub r1: DMatrix<Complex64>,
    pub r2: DMatrix<Complex64>,
}

/// Correlations of `h_TF` when path `i` has a zero-mean gain of variance
/// `powers[i]` at the fixed delay and Doppler of `paths[i]`:
/// `R[(m,n),(m',n')] = sum_i p_i e^{i2pi k_i (n-n')/N} e^{-i2pi l_i (m-m')/M}`.
pub fn genie_correlations(
    paths: &PathSet,
    powers: &[f64],
    layout: &FrameLayout,
) -> Result<CorrelationPair> {
    if powers.len() != paths.len() {
        return Err(Error::Contract(format!(
            "{} path powers for {} paths",
            powers.len(),
            paths.len()
        )));
    }
    let (m, n) = (layout.m, layout.n);
    let n_all = m * n;

    // u[(re, i)] = steering vector of path i; weighted copy for the pilots.
    let u = DMatrix::from_fn(n_all, paths.len(), |re, i| {
        let p = &paths.paths()[i];
        steering(p, re % m, re / m, m, n)
    });
    let up_weighted_adj = DMatrix::from_fn(paths.len(), layout.n_pilot(), |i, j| {
        let p = &paths.paths()[i];
        let (mi, ni) = layout.pilot_positions[j];
        steering(p, mi, ni, m, n).conj() * powers[i]
    });
    let up = DMatrix::from_fn(layout.n_pilot(), paths.len(), |j, i| {
        let (mi, ni) = layout.pilot_positions[j];
        u[(ni * m + mi, i)]
    });

    let r1 = &u * &up_weighted_adj;
    let r2 = &up * &up_weighted_adj;
    Ok(CorrelationPair { r1, r2 })
}

#[derive(Debug, Clone)]
pub struct MmseEstimate {
    pub ctf: TfGrid,
    /// The regularized system could not be factored (zero noise) and a
    /// minimum-norm least-squares solve was used instead.
    pub least_norm: bool,
}

/// `h_hat = R1 (R2 + noise_var I)^{-1} h_pilot`, solved by Cholesky
/// factorization of the Hermitian system.
pub fn mmse_estimate(
    obs: &PilotObservations,
    corr: &CorrelationPair,
    noise_var: f64,
) -> Result<MmseEstimate> {
    let (m, n) = obs.grid_dims();
    let np = obs.values().len();
    if corr.r2.shape() != (np, np) || corr.r1.shape() != (m * n, np) {
        return Err(Error::Contract(format!(
            "correlation shapes {:?}/{:?} do not match {np} pilots on a {m}x{n} grid",
            corr.r1.shape(),
            corr.r2.shape()
        )));
    }
    if !(noise_var >= 0.0) {
        return Err(Error::Contract(format!(
            "noise variance must be >= 0, got {noise_var}"
        )));
    }
    let b = DVector::from_column_slice(obs.values());
    let (z, least_norm) = solve_regularized(&corr.r2, &b, noise_var)?;
    let h = &corr.r1 * z;
    let ctf = TfGrid::from_vec(m, n, h.as_slice().to_vec())?;
    Ok(MmseEstimate { ctf, least_norm })
}

/// Same estimate as [`mmse_estimate`] with [`genie_correlations`], without
/// materializing `R1`: with `R1 = U diag(p) U_p^H` the product `R1 z` is
/// applied as `U (diag(p) (U_p^H z))`, which costs `O(MN P)` instead of
/// `O(MN n_pilot)` time and memory.
pub fn genie_mmse(
    obs: &PilotObservations,
    paths: &PathSet,
    powers: &[f64],
    layout: &FrameLayout,
    noise_var: f64,
) -> Result<MmseEstimate> {
    if powers.len() != paths.len() {
        return Err(Error::Contract(format!(
            "{} path powers for {} paths",
            powers.len(),
            paths.len()
        )));
    }
    let (m, n) = (layout.m, layout.n);
    if obs.grid_dims() != (m, n) || obs.values().len() != layout.n_pilot() {
        return Err(Error::dims((m, n), obs.grid_dims()));
    }
    if !(noise_var >= 0.0) {
        return Err(Error::Contract(format!(
            "noise variance must be >= 0, got {noise_var}"
        )));
    }
    let up = DMatrix::from_fn(layout.n_pilot(), paths.len(), |j, i| {
        let (mi, ni) = layout.pilot_positions[j];
        steering(&paths.paths()[i], mi, ni, m, n)
    });
    let weighted_adj = DMatrix::from_fn(paths.len(), layout.n_pilot(), |i, j| {
        up[(j, i)].conj() * powers[i]
    });
    let r2 = &up * &weighted_adj;
    let b = DVector::from_column_slice(obs.values());
    let (z, least_norm) = solve_regularized(&r2, &b, noise_var)?;

    let coeff = &weighted_adj * z;
    let ctf = TfGrid::from_fn(m, n, |mi, ni| {
        paths
            .iter()
            .zip(coeff.iter())
            .map(|(p, c)| steering(p, mi, ni, m, n) * c)
            .sum()
    });
    Ok(MmseEstimate { ctf, least_norm })
}

fn steering(p: &Path, mi: usize, ni: usize, m: usize, n: usize) -> Complex64 {
    let idx = (p.delay * mi) % m;
    Complex64::from_polar(
        1.0,
        2.0 * PI * (p.doppler * ni as f64 / n as f64 - idx as f64 / m as f64),
    )
}

/// Solves `(r2 + noise_var I) z = b`. Returns `z` and whether the
/// least-norm fallback was taken.
fn solve_regularized(
    r2: &DMatrix<Complex64>,
    b: &DVector<Complex64>,
    noise_var: f64,
) -> Result<(DVector<Complex64>, bool)> {
    let np = b.len();
    let mut a = r2.clone();
    for i in 0..np {
        a[(i, i)] += noise_var;
    }
    if noise_var > 0.0 {
        if let Some(ch) = Cholesky::new(a.clone()) {
            return Ok((ch.solve(b), false));
        }
        let trace: f64 = (0..np).map(|i| a[(i, i)].re).sum();
        let jitter = 1e-12 * trace / np as f64;
        for i in 0..np {
            a[(i, i)] += jitter;
        }
        if let Some(ch) = Cholesky::new(a.clone()) {
            return Ok((ch.solve(b), false));
        }
    }
    Ok((min_norm_solve(a, b)?, true))
}

fn min_norm_solve(a: DMatrix<Complex64>, b: &DVector<Complex64>) -> Result<DVector<Complex64>> {
    let svd = a.svd(true, true);
    let smax = svd.singular_values.max();
    svd.solve(b, 1e-10 * smax)
        .map_err(|e| Error::Contract(format!("least-norm solve failed: {e}")))
}
