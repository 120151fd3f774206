//! Noise results with their normalization metadata.

use serde::{Deserialize, Serialize};

/// Which fluctuating quantity a PSD describes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Quantity {
    MicrowavePhase,
    MicrowaveAmplitude,
    Photocurrent,
}

/// A white PSD level. All values are symmetrized two-sided densities
/// (per unit of Ω/2π), flat inside `band_rad_s` and zero outside.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseReport {
    pub quantity: Quantity,
    /// PSD in `units`.
    pub value: f64,
    pub units: String,
    /// Reference floor in the same units: the CW heterodyne benchmark for
    /// OFD, the vacuum photocurrent floor for DCS.
    pub reference: f64,
    /// `value / reference`.
    pub normalized: f64,
    pub two_sided: bool,
    /// Elementary charge folded into `value`, if any.
    pub charge: Option<f64>,
    /// Angular-frequency band (rad/s) over which the level applies.
    pub band_rad_s: (f64, f64),
}

impl NoiseReport {
    pub(crate) fn new(
        quantity: Quantity,
        value: f64,
        units: &str,
        reference: f64,
        charge: Option<f64>,
        band_rad_s: (f64, f64),
    ) -> Self {
        NoiseReport {
            quantity,
            value,
            units: units.to_string(),
            reference,
            normalized: value / reference,
            two_sided: true,
            charge,
            band_rad_s,
        }
    }

    /// PSD at angular offset `omega`; zero outside the detection band.
    pub fn psd_at(&self, omega: f64) -> f64 {
        let w = omega.abs();
        if w >= self.band_rad_s.0 && w <= self.band_rad_s.1 {
            self.value
        } else {
            0.0
        }
    }

    /// The value with the charge scale removed (photons/s units for photocurrents).
    pub fn per_charge_squared(&self) -> f64 {
        match self.charge {
            Some(q) => self.value / (q * q),
            None => self.value,
        }
    }
}
