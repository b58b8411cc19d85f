//! Accuracy bounds for off-grid Doppler recovery.
//!
//! The two-bin ratio rule is exact for a sinc-shaped peak; the periodic
//! Dirichlet kernel deviates from a sinc, which biases the fractional part.
//! The table below holds, for a single noiseless path on the
//! `N = 64, M = 128, d_t = d_f = 4` grid, the worst-case absolute Doppler
//! error and relative gain error observed at each fractional offset,
//! inflated by a safety margin. The unit tests regenerate the raw errors
//! from an independent direct-sum oracle and check the table against them.

/// Fractional offsets covered by the table, `-0.45..=0.45` in steps of 0.05.
pub const FRACTIONS: [f64; 19] = [
    -0.45, -0.40, -0.35, -0.30, -0.25, -0.20, -0.15, -0.10, -0.05, 0.0, 0.05, 0.10, 0.15, 0.20,
    0.25, 0.30, 0.35, 0.40, 0.45,
];

/// Grid the table was generated on: `(M, N, d_t, d_f)`.
pub const TABLE_GRID: (usize, usize, usize, usize) = (128, 64, 4, 4);

/// `|k_hat - k|` bound per entry of [`FRACTIONS`].
pub const DOPPLER_ERROR: [f64; 19] = [
    2.4e-4, 4.6e-4, 6.6e-4, 8.1e-4, 9.1e-4, 9.3e-4, 8.6e-4, 7.0e-4, 4.1e-4, 1e-9, 4.1e-4, 7.0e-4,
    8.6e-4, 9.3e-4, 9.1e-4, 8.1e-4, 6.6e-4, 4.6e-4, 2.4e-4,
];

/// `|h_hat - h| / |h|` bound per entry of [`FRACTIONS`].
pub const GAIN_ERROR: [f64; 19] = [
    8.1e-4, 1.5e-3, 2.1e-3, 2.5e-3, 2.8e-3, 2.8e-3, 2.6e-3, 2.1e-3, 1.2e-3, 1e-9, 1.2e-3, 2.1e-3,
    2.6e-3, 2.8e-3, 2.8e-3, 2.5e-3, 2.1e-3, 1.5e-3, 8.1e-4,
];

/// Normalized CTF error bound for a single noiseless off-grid path:
/// `(max gain error + 2 pi max Doppler error)^2`, the worst per-RE error a
/// path inside the table can produce.
pub const OFFGRID_NMSE_BOUND: f64 = 7.5e-5;

fn lookup(table: &[f64; 19], frac: f64) -> Option<f64> {
    if !(-0.45 - 1e-9..=0.45 + 1e-9).contains(&frac) {
        return None;
    }
    // Offsets between table points take the larger neighbour.
    let pos = (frac + 0.45) / 0.05;
    let lo = (pos.floor() as usize).min(18);
    let hi = (pos.ceil() as usize).min(18);
    if (pos - pos.round()).abs() < 1e-6 {
        return Some(table[pos.round() as usize]);
    }
    Some(table[lo].max(table[hi]))
}

/// Doppler error bound for a path whose fractional Doppler is `frac`.
pub fn doppler_tolerance(frac: f64) -> Option<f64> {
    lookup(&DOPPLER_ERROR, frac)
}

/// Relative gain error bound for a path whose fractional Doppler is `frac`.
pub fn gain_tolerance(frac: f64) -> Option<f64> {
    lookup(&GAIN_ERROR, frac)
}
