//! Quantum noise floors of frequency-comb measurements.
//!
//! The crate models a frequency comb as a set of classical line amplitudes
//! dressed with per-line Gaussian quantum fluctuations, and computes the
//! resulting noise of two measurements:
//!
//! * optical frequency division ([`ofd`]): the microwave amplitude and phase
//!   noise of the photodetected pulse train at the repetition rate;
//! * dual-comb spectroscopy ([`dcs`]): the balanced multi-heterodyne
//!   photocurrent noise and the transmittance SNR it implies.
//!
//! Every closed form is paired with an independent route: the covariance
//! quadratic form in [`states`], and the time-domain Monte-Carlo engine in
//! [`stochastic`]. [`validation`] bundles those comparisons into a suite.
//!
//! Conventions: amplitudes are in √(photons/s), quadrature spectra are
//! symmetrized two-sided PSDs with vacuum at 1/2, and all lines are treated
//! at the carrier frequency ω₀ when converting power to photon flux.

pub mod dcs;
pub mod envelope;
mod error;
pub mod ofd;
pub mod report;
pub mod states;
pub mod stochastic;
pub mod validation;

pub use error::{Error, Result};

/// Elementary charge (C).
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;

/// Reduced Planck constant (J·s).
pub const HBAR: f64 = 1.054_571_817e-34;

/// Speed of light in vacuum (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
