//! Power-split CVT efficiency.
//!
//! The hydrostatic share of the transmitted power is `|1 - v / v_sync|`. The
//! mechanical path runs through two spur meshes and a planetary set, the
//! hydrostatic share additionally loses a weighted fraction of the variator
//! loss, and the final drive follows. A multiplicative derate and a
//! load-independent parasitic power complete the model:
//!
//! `eta(v, L) = derate * eta_path(v) - parasitic / L`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TransmissionError {
    #[error("efficiency undefined at load fraction {0}")]
    ZeroLoad(f64),
    #[error("invalid transmission parameters: {0}")]
    Invalid(String),
    #[error("calibration anchors are inconsistent: {0}")]
    Calibration(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TransmissionParams {
    /// Lock-up speed [km/h].
    pub v_sync: f64,
    pub eta_spur: f64,
    pub eta_planetary: f64,
    pub eta_variator: f64,
    pub eta_final: f64,
    /// Share of the variator loss that reaches the output per unit hydrostatic fraction.
    pub hydro_loss_weight: f64,
    /// Multiplicative auxiliary derate.
    pub derate: f64,
    /// Load-independent loss as a fraction of rated input power.
    pub parasitic: f64,
}

/// Efficiency targets the calibrated parameters reproduce.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransmissionAnchors {
    /// Full-load efficiency at lock-up.
    pub eta_sync_full: f64,
    /// Part-load efficiency at lock-up, `(load fraction, efficiency)`.
    pub eta_sync_part: (f64, f64),
    /// Full-load efficiency off lock-up, `(speed km/h, efficiency)`.
    pub eta_low_full: (f64, f64),
}

impl Default for TransmissionAnchors {
    fn default() -> Self {
        Self { eta_sync_full: 0.84, eta_sync_part: (0.15, 0.75), eta_low_full: (4.0, 0.82) }
    }
}

impl Default for TransmissionParams {
    fn default() -> Self {
        Self::calibrated(Self::components(), TransmissionAnchors::default())
            .expect("default anchors are consistent")
    }
}

impl TransmissionParams {
    /// Component efficiencies with zero auxiliary losses.
    pub fn components() -> Self {
        Self {
            v_sync: 10.0,
            eta_spur: 0.99,
            eta_planetary: 0.98,
            eta_variator: 0.85,
            eta_final: 0.945,
            hydro_loss_weight: 1.0,
            derate: 1.0,
            parasitic: 0.0,
        }
    }

    /// Solves `hydro_loss_weight`, `derate` and `parasitic` from three anchors.
    pub fn calibrated(base: Self, a: TransmissionAnchors) -> Result<Self, TransmissionError> {
        let mut p = base;
        let (l_part, e_part) = a.eta_sync_part;
        if !(l_part > 0.0 && l_part < 1.0) {
            return Err(TransmissionError::Calibration("part-load fraction must be in (0, 1)".into()));
        }
        p.parasitic = (a.eta_sync_full - e_part) / (1.0 / l_part - 1.0);
        p.hydro_loss_weight = 0.0;
        p.derate = (a.eta_sync_full + p.parasitic) / p.path_efficiency(p.v_sync);
        let (v_low, e_low) = a.eta_low_full;
        let ratio = (e_low + p.parasitic) / (a.eta_sync_full + p.parasitic);
        let f = p.hydro_fraction(v_low);
        if f <= 0.0 {
            return Err(TransmissionError::Calibration("low-speed anchor sits at lock-up".into()));
        }
        p.hydro_loss_weight = (1.0 - ratio) / (f * (1.0 - p.eta_variator));
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), TransmissionError> {
        let effs = [self.eta_spur, self.eta_planetary, self.eta_variator, self.eta_final];
        if !(self.v_sync > 0.0) {
            return Err(TransmissionError::Invalid("v_sync must be positive".into()));
        }
        if effs.iter().any(|&e| !(e > 0.0 && e <= 1.0)) {
            return Err(TransmissionError::Invalid("component efficiencies must lie in (0, 1]".into()));
        }
        if !(self.hydro_loss_weight >= 0.0 && self.derate > 0.0 && self.parasitic >= 0.0) {
            return Err(TransmissionError::Invalid("loss parameters out of range".into()));
        }
        if self.derate * self.path_efficiency(self.v_sync) - self.parasitic >= 1.0 {
            return Err(TransmissionError::Invalid("full-load efficiency must stay below 1".into()));
        }
        Ok(())
    }

    pub fn hydro_fraction(&self, v: f64) -> f64 {
        hydro_fraction(self, v)
    }

    fn path_efficiency(&self, v: f64) -> f64 {
        let mech = self.eta_spur * self.eta_spur * self.eta_planetary;
        let f = self.hydro_fraction(v);
        mech * (1.0 - self.hydro_loss_weight * f * (1.0 - self.eta_variator)) * self.eta_final
    }
}

/// `|1 - v / v_sync|`, clamped to 1.
pub fn hydro_fraction(p: &TransmissionParams, v: f64) -> f64 {
    (1.0 - v / p.v_sync).abs().min(1.0)
}

/// Efficiency at ground speed `v` [km/h] and input load fraction `load`.
///
/// May return a non-positive value at very light load, where parasitic losses
/// exceed the transmitted power.
pub fn transmission_efficiency(p: &TransmissionParams, v: f64, load: f64) -> Result<f64, TransmissionError> {
    if !(load > 0.0) {
        return Err(TransmissionError::ZeroLoad(load));
    }
    Ok(p.derate * p.path_efficiency(v) - p.parasitic / load)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hydro_fraction_examples() {
        let p = TransmissionParams::default();
        assert_eq!(hydro_fraction(&p, 10.0), 0.0);
        assert_eq!(hydro_fraction(&p, 5.0), 0.5);
        assert_eq!(hydro_fraction(&p, 0.0), 1.0);
        assert_eq!(hydro_fraction(&p, 25.0), 1.0);
    }

    #[test]
    fn anchors_reproduced() {
        let p = TransmissionParams::default();
        let e = |v, l| transmission_efficiency(&p, v, l).unwrap();
        assert!((e(10.0, 1.0) - 0.84).abs() < 1e-12);
        assert!((e(4.0, 1.0) - 0.82).abs() < 1e-12);
        assert!((e(10.0, 0.15) - 0.75).abs() < 1e-12);
    }

    #[test]
    fn zero_load_is_an_error() {
        let p = TransmissionParams::default();
        assert!(transmission_efficiency(&p, 8.0, 0.0).is_err());
    }
}
