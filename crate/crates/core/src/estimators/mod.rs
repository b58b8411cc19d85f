//! CTF estimators: least squares at the pilots, bilinear interpolation,
//! genie-aided linear MMSE, and the delay-Doppler (CSF) estimators.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::TfGrid;
use crate::txrx::FrameLayout;

mod csf;
mod interp;
mod mmse;

pub use csf::{
    csf_ongrid, csf_reconstruct, estimate_num_paths, offgrid_paths, periodic_csf, periodic_csf_at,
    proposed_ctf, CsfEstimate, CsfMode, OffgridPaths,
};
pub use interp::interp_linear;
pub use mmse::{genie_correlations, genie_mmse, mmse_estimate, CorrelationPair, MmseEstimate};

/// Estimator names accepted on the command line and in config files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EstimatorKind {
    LsInterp,
    MmseGenie,
    CsfOngrid,
    CsfOffgrid,
    Ideal,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 5] = [
        EstimatorKind::LsInterp,
        EstimatorKind::MmseGenie,
        EstimatorKind::CsfOngrid,
        EstimatorKind::CsfOffgrid,
        EstimatorKind::Ideal,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::LsInterp => "ls-interp",
            EstimatorKind::MmseGenie => "mmse-genie",
            EstimatorKind::CsfOngrid => "csf-ongrid",
            EstimatorKind::CsfOffgrid => "csf-offgrid",
            EstimatorKind::Ideal => "ideal",
        }
    }

    pub fn valid_names() -> String {
        Self::ALL
            .iter()
            .map(|e| e.name())
            .collect::<Vec<_>>()
            .join(", ")
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| Error::UnknownEstimator {
                name: s.to_owned(),
                valid: Self::valid_names(),
            })
    }
}

/// Least-squares channel estimates on the pilot lattice, stored densely as
/// an `(M/d_f) x (N/d_t)` lattice with the subcarrier index running fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct PilotObservations {
    m: usize,
    n: usize,
    d_t: usize,
    d_f: usize,
    values: Vec<Complex64>,
}

impl PilotObservations {
    /// `f(m, n)` is called at every lattice point with full-grid coordinates.
    pub fn from_fn(
        m: usize,
        n: usize,
        d_t: usize,
        d_f: usize,
        mut f: impl FnMut(usize, usize) -> Complex64,
    ) -> Result<Self> {
        if d_t == 0 || d_f == 0 || !n.is_multiple_of(d_t) || !m.is_multiple_of(d_f) {
            return Err(Error::Contract(format!(
                "pilot spacing d_t={d_t} d_f={d_f} does not tile a {m}x{n} grid"
            )));
        }
        let (mp, np) = (m / d_f, n / d_t);
        let mut values = Vec::with_capacity(mp * np);
        for j in 0..np {
            for i in 0..mp {
                values.push(f(i * d_f, j * d_t));
            }
        }
        Ok(Self {
            m,
            n,
            d_t,
            d_f,
            values,
        })
    }

    /// Samples a full grid on the lattice.
    pub fn sample(grid: &TfGrid, d_t: usize, d_f: usize) -> Result<Self> {
        let (m, n) = grid.dims();
        Self::from_fn(m, n, d_t, d_f, |mi, ni| grid.get(mi, ni))
    }

    /// Full grid `(M, N)`.
    pub fn grid_dims(&self) -> (usize, usize) {
        (self.m, self.n)
    }

    /// `(d_t, d_f)`.
    pub fn spacing(&self) -> (usize, usize) {
        (self.d_t, self.d_f)
    }

    /// Lattice size `(M/d_f, N/d_t)`.
    pub fn lattice(&self) -> (usize, usize) {
        (self.m / self.d_f, self.n / self.d_t)
    }

    /// Value at lattice index `(i, j)`, i.e. RE `(i d_f, j d_t)`.
    #[inline]
    pub fn at(&self, i: usize, j: usize) -> Complex64 {
        self.values[j * (self.m / self.d_f) + i]
    }

    /// Value at full-grid RE `(m, n)`, if it is a pilot.
    pub fn get(&self, m: usize, n: usize) -> Option<Complex64> {
        (m < self.m && n < self.n && m.is_multiple_of(self.d_f) && n.is_multiple_of(self.d_t))
            .then(|| self.at(m / self.d_f, n / self.d_t))
    }

    /// Values in lattice order (`n` outer, `m` inner), which is also the
    /// order of [`FrameLayout::pilot_positions`].
    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        Self {
            values: self.values.iter().map(|v| v * c).collect(),
            ..self.clone()
        }
    }
}

/// `h_hat = y / x` at every pilot RE.
pub fn ls_pilot(y: &TfGrid, x: &TfGrid, layout: &FrameLayout) -> Result<PilotObservations> {
    y.check_dims(layout.m, layout.n)?;
    x.check_dims(layout.m, layout.n)?;
    let mut values = Vec::with_capacity(layout.n_pilot());
    for &(m, n) in &layout.pilot_positions {
        let xp = x.get(m, n);
        if xp.norm() == 0.0 {
            return Err(Error::Contract(format!(
                "pilot symbol at ({m},{n}) is zero"
            )));
        }
        values.push(y.get(m, n) / xp);
    }
    Ok(PilotObservations {
        m: layout.m,
        n: layout.n,
        d_t: layout.pattern.d_t,
        d_f: layout.pattern.d_f,
        values,
    })
}
