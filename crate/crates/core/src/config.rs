//! System configuration and the flat `key = value` config file format.
//!
//! ```text
//! # comment
//! M = 128
//! N = 64
//! snr_db = 0, 5, 10
//! ```
//!
//! Arrays are comma separated. Keys not present in the file keep the
//! defaults of [`SystemConfig::high_mobility`]. Every problem found while loading is
//! reported at once.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::channel::ChannelProfile;
use crate::error::{Error, Result};
use crate::estimators::EstimatorKind;

/// Speed of light used for Doppler computations (m/s).
pub const SPEED_OF_LIGHT: f64 = 3.0e8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Modulation {
    Qam4,
}

impl FromStr for Modulation {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "qam4" => Ok(Modulation::Qam4),
            other => Err(format!("unsupported modulation `{other}` (only `qam4`)")),
        }
    }
}

/// Which input-output relation generates the received grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelModel {
    /// Per-RE multiplicative channel, no inter-carrier interference.
    Diag,
    /// Exact per-symbol channel matrix including inter-carrier interference.
    Full,
}

impl FromStr for ChannelModel {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "diag" => Ok(ChannelModel::Diag),
            "full" => Ok(ChannelModel::Full),
            other => Err(format!(
                "unknown channel_model `{other}` (valid: diag, full)"
            )),
        }
    }
}

impl fmt::Display for ChannelModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ChannelModel::Diag => "diag",
            ChannelModel::Full => "full",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    /// Subcarriers.
    pub m: usize,
    /// OFDM symbols per frame.
    pub n: usize,
    pub delta_f_hz: f64,
    /// Pilot spacing in symbols.
    pub d_t: usize,
    /// Pilot spacing in subcarriers.
    pub d_f: usize,
    pub modulation: Modulation,
    pub channel_model: ChannelModel,
    pub on_grid_doppler: bool,
    pub estimators: Vec<EstimatorKind>,
    pub snr_db: Vec<f64>,
    pub n_trials: usize,
    pub master_seed: u64,
    /// Detection threshold in units of the per-bin noise standard deviation.
    pub gamma_threshold: f64,
    /// Worker threads for sweeps; `None` uses the machine parallelism.
    pub threads: Option<usize>,
    /// Power-delay profile plus mobility (`v_kmh`, `f_c_hz`).
    pub profile: ChannelProfile,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self::high_mobility()
    }
}

impl SystemConfig {
    /// 128 subcarriers at 15 kHz, 64 symbols, 4x4 pilot lattice, 2.1 GHz
    /// carrier at 250 km/h over the grid-merged EVA profile.
    pub fn high_mobility() -> Self {
        let (m, delta_f_hz) = (128, 15e3);
        Self {
            m,
            n: 64,
            delta_f_hz,
            d_t: 4,
            d_f: 4,
            modulation: Modulation::Qam4,
            channel_model: ChannelModel::Diag,
            on_grid_doppler: false,
            estimators: EstimatorKind::ALL.to_vec(),
            snr_db: (0..=8).map(|i| 5.0 * i as f64).collect(),
            n_trials: 500,
            master_seed: 1,
            gamma_threshold: 4.0,
            threads: None,
            profile: ChannelProfile::eva_merged(m, delta_f_hz, 250.0, 2.1e9)
                .expect("EVA taps merge onto the default grid"),
        }
    }

    /// Default configuration with a different grid and lattice, keeping the
    /// remaining parameters.
    pub fn with_grid(m: usize, n: usize, d_t: usize, d_f: usize) -> Self {
        Self {
            m,
            n,
            d_t,
            d_f,
            ..Self::high_mobility()
        }
    }

    pub fn symbol_time(&self) -> f64 {
        1.0 / self.delta_f_hz
    }

    /// Doppler bins per period of the pilot image, `N / d_t`.
    pub fn n_period(&self) -> usize {
        self.n / self.d_t
    }

    /// Delay bins per period of the pilot image, `M / d_f`.
    pub fn m_period(&self) -> usize {
        self.m / self.d_f
    }

    pub fn v_kmh(&self) -> f64 {
        self.profile.v_kmh
    }

    pub fn f_c_hz(&self) -> f64 {
        self.profile.f_c_hz
    }

    /// Maximum Doppler shift (Hz).
    pub fn nu_max(&self) -> f64 {
        self.profile.v_kmh / 3.6 * self.profile.f_c_hz / SPEED_OF_LIGHT
    }

    /// Maximum Doppler in grid units, `N T nu_max`.
    pub fn k_max(&self) -> f64 {
        self.n as f64 * self.symbol_time() * self.nu_max()
    }

    /// Largest admissible Doppler index, `N / (2 d_t) - 1`.
    pub fn doppler_bound(&self) -> f64 {
        (self.n / (2 * self.d_t)) as f64 - 1.0
    }

    /// Collects every violated constraint.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.m == 0 || self.n == 0 {
            v.push(format!(
                "grid must be non-empty (M={}, N={})",
                self.m, self.n
            ));
        }
        if self.d_t == 0 || self.d_f == 0 {
            v.push(format!(
                "pilot spacings must be positive (d_t={}, d_f={})",
                self.d_t, self.d_f
            ));
        } else {
            if !self.n.is_multiple_of(self.d_t) {
                v.push(format!("N={} is not divisible by d_t={}", self.n, self.d_t));
            }
            if !self.m.is_multiple_of(self.d_f) {
                v.push(format!("M={} is not divisible by d_f={}", self.m, self.d_f));
            }
        }
        if !(self.delta_f_hz > 0.0) {
            v.push(format!(
                "delta_f_hz must be positive, got {}",
                self.delta_f_hz
            ));
        }
        if !(self.profile.f_c_hz > 0.0) {
            v.push(format!(
                "f_c_hz must be positive, got {}",
                self.profile.f_c_hz
            ));
        }
        if !(self.profile.v_kmh >= 0.0) {
            v.push(format!(
                "v_kmh must be non-negative, got {}",
                self.profile.v_kmh
            ));
        }
        // The support bounds only need well-formed scalars, not divisibility.
        let sane = self.m > 0
            && self.n > 0
            && self.d_t > 0
            && self.d_f > 0
            && self.delta_f_hz > 0.0
            && self.profile.f_c_hz > 0.0
            && self.profile.v_kmh >= 0.0;
        if sane {
            if self.k_max() > self.doppler_bound() {
                v.push(format!(
                    "Doppler support violated: N*T*nu_max = {:.4} exceeds N/(2*d_t) - 1 = {} \
                     (requires nu_i in [-1/(2*d_t*T), 1/(2*d_t*T) - 1/(N*T)])",
                    self.k_max(),
                    self.doppler_bound()
                ));
            }
            if let Err(e) = self
                .profile
                .grid_delays(self.m, self.delta_f_hz, self.m_period())
            {
                v.push(e.to_string());
            }
        }
        if self.n_trials == 0 {
            v.push("n_trials must be at least 1".into());
        }
        if !(self.gamma_threshold > 0.0) {
            v.push(format!(
                "gamma_threshold must be positive, got {}",
                self.gamma_threshold
            ));
        }
        if self.snr_db.is_empty() {
            v.push("snr_db must list at least one value".into());
        }
        if self.snr_db.iter().any(|s| s.is_nan()) {
            v.push("snr_db contains NaN".into());
        }
        if self.estimators.is_empty() {
            v.push("estimators must list at least one name".into());
        }
        if self.threads == Some(0) {
            v.push("threads must be at least 1".into());
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(v))
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::high_mobility();
        let mut errors = Vec::new();
        let mut delays: Option<Vec<f64>> = None;
        let mut powers: Option<Vec<f64>> = None;

        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                errors.push(format!("line {}: expected `key = value`", lineno + 1));
                continue;
            };
            let (key, value) = (key.trim(), value.trim());
            let res: std::result::Result<(), String> = match key {
                "M" => scalar(value).map(|x| cfg.m = x),
                "N" => scalar(value).map(|x| cfg.n = x),
                "delta_f_hz" => scalar(value).map(|x| cfg.delta_f_hz = x),
                "f_c_hz" => scalar(value).map(|x| cfg.profile.f_c_hz = x),
                "v_kmh" => scalar(value).map(|x| cfg.profile.v_kmh = x),
                "d_t" => scalar(value).map(|x| cfg.d_t = x),
                "d_f" => scalar(value).map(|x| cfg.d_f = x),
                "modulation" => value.parse().map(|x| cfg.modulation = x),
                "channel_model" => value.parse().map(|x| cfg.channel_model = x),
                "on_grid_doppler" => scalar(value).map(|x| cfg.on_grid_doppler = x),
                "estimators" => list(value).map(|x| cfg.estimators = x),
                "snr_db" => list(value).map(|x| cfg.snr_db = x),
                "n_trials" => scalar(value).map(|x| cfg.n_trials = x),
                "master_seed" => scalar(value).map(|x| cfg.master_seed = x),
                "gamma_threshold" => scalar(value).map(|x| cfg.gamma_threshold = x),
                "threads" => scalar(value).map(|x| cfg.threads = Some(x)),
                "tap_delays_ns" => list(value).map(|x| delays = Some(x)),
                "tap_powers_db" => list(value).map(|x| powers = Some(x)),
                other => Err(format!("unknown key `{other}`")),
            };
            if let Err(e) = res {
                errors.push(format!("line {}: {key}: {e}", lineno + 1));
            }
        }

        if delays.is_some() || powers.is_some() {
            let d = delays.unwrap_or_else(|| cfg.profile.tap_delays_ns.clone());
            let p = powers.unwrap_or_else(|| cfg.profile.tap_powers_db.clone());
            match ChannelProfile::new(d, p, cfg.profile.v_kmh, cfg.profile.f_c_hz) {
                Ok(profile) => cfg.profile = profile,
                Err(e) => errors.push(e.to_string()),
            }
        }

        errors.extend(cfg.violations());
        if errors.is_empty() {
            Ok(cfg)
        } else {
            Err(Error::Config(errors))
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_owned(),
            source,
        })?;
        Self::parse(&text)
    }
}

fn scalar<T: FromStr>(s: &str) -> std::result::Result<T, String>
where
    T::Err: fmt::Display,
{
    s.parse::<T>().map_err(|e| format!("`{s}`: {e}"))
}

fn list<T: FromStr>(s: &str) -> std::result::Result<Vec<T>, String>
where
    T::Err: fmt::Display,
{
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(scalar)
        .collect()
}
