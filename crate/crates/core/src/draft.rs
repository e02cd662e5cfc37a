//! ASAE implement draft: `F = f_s (A + B v + C v^2) w d` with v in km/h.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DraftCoefficients {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    /// Soil texture factor: 1.0 fine, 0.70 medium, 0.45 coarse.
    pub f_s: f64,
    /// Width in the draft model's unit (metres, or number of tools for narrow points).
    pub w: f64,
    /// Depth [cm].
    pub d: f64,
}

impl DraftCoefficients {
    pub fn validate(&self) -> Result<(), String> {
        if self.a < 0.0 {
            return Err("A must be non-negative".into());
        }
        if !(self.f_s > 0.0 && self.f_s <= 1.2) {
            return Err(format!("f_s {} outside (0, 1.2]", self.f_s));
        }
        if !(self.w > 0.0 && self.d > 0.0) {
            return Err("width and depth must be positive".into());
        }
        Ok(())
    }
}

/// Draft force [N] at speed `v` [km/h].
pub fn draft_force(c: &DraftCoefficients, v: f64) -> f64 {
    c.f_s * (c.a + c.b * v + c.c * v * v) * c.w * c.d
}

/// dF/dv [N per km/h].
pub fn draft_gradient(c: &DraftCoefficients, v: f64) -> f64 {
    c.f_s * (c.b + 2.0 * c.c * v) * c.w * c.d
}
