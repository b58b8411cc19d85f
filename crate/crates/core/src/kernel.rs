//! Dirichlet-type kernels linking a path's (delay, Doppler) pair to the
//! delay-Doppler sample grid.
//!
//! Every kernel is a finite geometric series evaluated in closed form. Close
//! to a pole of the closed form (the path sits on, or within 1e-4 of, a grid
//! point) the series is summed term by term instead.

use std::f64::consts::PI;

use num_complex::Complex64;

const POLE_GUARD: f64 = 1e-4;

/// `sum_{j=0}^{terms-1} exp(i 2 pi j x / period)`.
pub fn geometric(x: f64, terms: usize, period: f64) -> Complex64 {
    let half = PI * x / period;
    let den = half.sin();
    if den.abs() < POLE_GUARD {
        return (0..terms)
            .map(|j| Complex64::from_polar(1.0, 2.0 * half * j as f64))
            .sum();
    }
    let num = (half * terms as f64).sin();
    Complex64::from_polar(num / den, half * (terms as f64 - 1.0))
}

/// Doppler kernel of the full grid:
/// `(1/sqrt(N)) sum_n exp(+i 2 pi n (k_i - k) / N)`.
pub fn doppler(k_i: f64, k: f64, n: usize) -> Complex64 {
    geometric(k_i - k, n, n as f64) / (n as f64).sqrt()
}

/// Delay kernel of the full grid:
/// `(1/sqrt(M)) sum_m exp(-i 2 pi m (l_i - l) / M)`.
pub fn delay(l_i: f64, l: f64, m: usize) -> Complex64 {
    geometric(l - l_i, m, m as f64) / (m as f64).sqrt()
}

/// Doppler kernel seen through pilots spaced `d_t` symbols apart, with the
/// `d_t / sqrt(N)` scaling that makes one period match [`doppler`] for
/// on-grid paths.
pub fn periodic_doppler(k_i: f64, k: f64, n: usize, d_t: usize) -> Complex64 {
    let terms = n / d_t;
    geometric(k_i - k, terms, terms as f64) * (d_t as f64 / (n as f64).sqrt())
}

/// Delay counterpart of [`periodic_doppler`] for pilots `d_f` subcarriers
/// apart.
pub fn periodic_delay(l_i: f64, l: f64, m: usize, d_f: usize) -> Complex64 {
    let terms = m / d_f;
    geometric(l - l_i, terms, terms as f64) * (d_f as f64 / (m as f64).sqrt())
}

/// Centered Doppler range `{-floor(len/2), ..., len - floor(len/2) - 1}`.
pub fn centered_range(len: usize) -> std::ops::Range<i64> {
    let lo = -((len / 2) as i64);
    lo..lo + len as i64
}

/// Error of the one-period Doppler estimate against the full-grid kernel at
/// centered Doppler bin `k`, written in the sine-ratio form.
///
/// Inside the period the embedded estimate carries the aliased periodic
/// kernel; outside it the estimate is zero, so the whole full-grid kernel is
/// missed.
pub fn aliasing_difference(k_i: f64, k: i64, n: usize, d_t: usize) -> Complex64 {
    let x = k_i - k as f64;
    let nf = n as f64;
    let dt = d_t as f64;
    let in_period = centered_range(n / d_t).contains(&k);
    let s = (PI * x).sin();
    let full_den = (PI * x / nf).sin();
    if !in_period {
        if full_den.abs() < POLE_GUARD {
            return doppler(k_i, k as f64, n);
        }
        let num = Complex64::from_polar(1.0, 2.0 * PI * x) - 1.0;
        let den = Complex64::from_polar(1.0, 2.0 * PI * x / nf) - 1.0;
        return num / den / nf.sqrt();
    }
    let per_den = (PI * dt * x / nf).sin();
    if full_den.abs() < POLE_GUARD || per_den.abs() < POLE_GUARD {
        return doppler(k_i, k as f64, n) - periodic_doppler(k_i, k as f64, n, d_t);
    }
    let full = Complex64::from_polar(s / full_den, x * PI * (nf - 1.0) / nf) / nf.sqrt();
    let periodic =
        Complex64::from_polar(s / per_den, x * PI * dt * (nf / dt - 1.0) / nf) * (dt / nf.sqrt());
    full - periodic
}
