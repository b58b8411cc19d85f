//! Channel estimation for OFDM over doubly-selective channels through the
//! delay-Doppler channel spreading function (CSF).
//!
//! Lattice pilots sampled from the time-frequency channel transfer function
//! (CTF) are mapped to one period of a periodic delay-Doppler image. When the
//! channel support fits inside that period the image is the CSF itself, and
//! the CTF at every resource element follows by an inverse symplectic
//! transform. Off-grid Doppler is handled path by path with a two-bin
//! Dirichlet-ratio interpolator.
//!
//! The crate also ships the usual baselines (LS with bilinear interpolation
//! and a genie-aided linear MMSE), a channel simulator and a seeded
//! Monte-Carlo harness.

// `!(x > 0.0)` style guards are used on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod config;
pub mod error;
pub mod estimators;
pub mod grid;
pub mod harness;
pub mod kernel;
pub mod tolerance;
pub mod txrx;

pub use error::{Error, Result};

pub use num_complex::Complex64;
