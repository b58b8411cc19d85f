//! Bit/symbol mapping, lattice pilot frames and single-tap equalization.
//!
//! Resource elements are always enumerated symbol by symbol with the
//! subcarrier index running fastest: `(0,0), (1,0), ..., (M-1,0), (0,1), ...`.
//! Data and pilot positions inherit that order.

use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;

use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::grid::TfGrid;

/// Gray-mapped 4-QAM with unit average energy:
/// `(b1 b0) -> ((1 - 2 b1) + i (1 - 2 b0)) / sqrt(2)`.
pub fn qam4_mod(bits: &[u8]) -> Result<Vec<Complex64>> {
    if !bits.len().is_multiple_of(2) {
        return Err(Error::Contract(format!(
            "4-QAM needs an even number of bits, got {}",
            bits.len()
        )));
    }
    Ok(bits
        .chunks_exact(2)
        .map(|b| {
            let re = 1.0 - 2.0 * f64::from(b[0] & 1);
            let im = 1.0 - 2.0 * f64::from(b[1] & 1);
            Complex64::new(re * FRAC_1_SQRT_2, im * FRAC_1_SQRT_2)
        })
        .collect())
}

/// Minimum-distance hard decision. A component exactly on a decision
/// boundary decides bit 0.
pub fn qam4_demod(symbols: &[Complex64]) -> Vec<u8> {
    symbols
        .iter()
        .flat_map(|s| [u8::from(s.re < 0.0), u8::from(s.im < 0.0)])
        .collect()
}

/// Rectangular pilot lattice: every `d_f`-th subcarrier of every `d_t`-th
/// symbol carries `pilot_value`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PilotPattern {
    pub d_t: usize,
    pub d_f: usize,
    pub pilot_value: Complex64,
}

impl PilotPattern {
    /// `(1 + i)/sqrt(2)`, a constellation point, so pilot and data energy
    /// match.
    pub fn new(d_t: usize, d_f: usize) -> Self {
        Self {
            d_t,
            d_f,
            pilot_value: Complex64::new(FRAC_1_SQRT_2, FRAC_1_SQRT_2),
        }
    }

    pub fn from_config(cfg: &SystemConfig) -> Self {
        Self::new(cfg.d_t, cfg.d_f)
    }

    #[inline]
    pub fn is_pilot(&self, m: usize, n: usize) -> bool {
        m.is_multiple_of(self.d_f) && n.is_multiple_of(self.d_t)
    }

    fn check(&self, m: usize, n: usize) -> Result<()> {
        if self.d_t == 0
            || self.d_f == 0
            || !n.is_multiple_of(self.d_t)
            || !m.is_multiple_of(self.d_f)
        {
            return Err(Error::Contract(format!(
                "pilot spacing d_t={} d_f={} does not tile a {m}x{n} grid",
                self.d_t, self.d_f
            )));
        }
        if self.pilot_value.norm() == 0.0 {
            return Err(Error::Contract("pilot value must be nonzero".into()));
        }
        Ok(())
    }
}

/// Deterministic split of the grid into pilot and data resource elements.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameLayout {
    pub m: usize,
    pub n: usize,
    pub pattern: PilotPattern,
    pub pilot_positions: Vec<(usize, usize)>,
    pub data_positions: Vec<(usize, usize)>,
}

impl FrameLayout {
    pub fn new(m: usize, n: usize, pattern: PilotPattern) -> Result<Self> {
        pattern.check(m, n)?;
        let mut pilot_positions = Vec::with_capacity((m / pattern.d_f) * (n / pattern.d_t));
        let mut data_positions = Vec::with_capacity(m * n - pilot_positions.capacity());
        for ni in 0..n {
            for mi in 0..m {
                if pattern.is_pilot(mi, ni) {
                    pilot_positions.push((mi, ni));
                } else {
                    data_positions.push((mi, ni));
                }
            }
        }
        Ok(Self {
            m,
            n,
            pattern,
            pilot_positions,
            data_positions,
        })
    }

    pub fn from_config(cfg: &SystemConfig) -> Result<Self> {
        Self::new(cfg.m, cfg.n, PilotPattern::from_config(cfg))
    }

    pub fn n_pilot(&self) -> usize {
        self.pilot_positions.len()
    }

    pub fn n_data(&self) -> usize {
        self.data_positions.len()
    }

    /// Pilot lattice size `(M/d_f, N/d_t)`.
    pub fn lattice(&self) -> (usize, usize) {
        (self.m / self.pattern.d_f, self.n / self.pattern.d_t)
    }
}

/// Places pilots on the lattice and `data` on the remaining REs in layout
/// order.
pub fn build_frame(data: &[Complex64], layout: &FrameLayout) -> Result<TfGrid> {
    if data.len() != layout.n_data() {
        return Err(Error::Contract(format!(
            "frame holds {} data symbols, got {}",
            layout.n_data(),
            data.len()
        )));
    }
    let mut grid = TfGrid::zeros(layout.m, layout.n);
    for &(m, n) in &layout.pilot_positions {
        grid.set(m, n, layout.pattern.pilot_value);
    }
    for (&(m, n), &s) in layout.data_positions.iter().zip(data) {
        grid.set(m, n, s);
    }
    Ok(grid)
}

/// Data REs of `grid` in layout order.
pub fn extract_data(grid: &TfGrid, layout: &FrameLayout) -> Vec<Complex64> {
    layout
        .data_positions
        .iter()
        .map(|&(m, n)| grid.get(m, n))
        .collect()
}

/// Channel estimates below this magnitude are treated as zero.
pub const SINGULAR_THRESHOLD: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Equalized {
    pub symbols: Vec<Complex64>,
    /// Data REs whose channel estimate was below [`SINGULAR_THRESHOLD`];
    /// their symbol is set to zero.
    pub near_singular: usize,
}

/// `x_hat = y / h_hat` at every data RE.
pub fn equalize_single_tap(y: &TfGrid, h_hat: &TfGrid, layout: &FrameLayout) -> Result<Equalized> {
    y.check_dims(layout.m, layout.n)?;
    h_hat.check_dims(layout.m, layout.n)?;
    let mut near_singular = 0;
    let symbols = layout
        .data_positions
        .iter()
        .map(|&(m, n)| {
            let h = h_hat.get(m, n);
            if h.norm() < SINGULAR_THRESHOLD {
                near_singular += 1;
                Complex64::new(0.0, 0.0)
            } else {
                y.get(m, n) / h
            }
        })
        .collect();
    Ok(Equalized {
        symbols,
        near_singular,
    })
}
