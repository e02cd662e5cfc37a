//! Brixius wheel-soil traction with radial-tyre coefficients.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Upper slip bound; beyond it the tractor is traction limited.
pub const S_MAX: f64 = 0.25;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TractionError {
    #[error("pull {demand:.1} N exceeds capability {capability:.1} N at slip {s_max}")]
    TractionLimit { demand: f64, capability: f64, s_max: f64 },
    #[error("negative pull demand {0}")]
    NegativeDemand(f64),
}

/// Tyre geometry and static load of one axle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TyreConfig {
    /// Section width b [m].
    pub section_width: f64,
    /// Overall diameter d [m].
    pub overall_diameter: f64,
    /// Deflection over section height.
    pub deflection_ratio: f64,
    /// Static vertical load on the axle [N].
    pub axle_load: f64,
    /// Multiplies the cone index seen by this axle.
    pub k_mp: f64,
}

impl TyreConfig {
    /// Overall diameter of a metric tyre `width/aspect Rrim`.
    pub fn metric_diameter(width_m: f64, aspect: f64, rim_in: f64) -> f64 {
        2.0 * width_m * aspect + rim_in * 0.0254
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TractionSolution {
    pub slip: f64,
    pub kappa: f64,
    pub rho: f64,
    pub eta_tractive: f64,
    pub bn: f64,
}

/// `Bn = (CI b d / W) (1 + 5 delta/h) / (1 + 3 b/d)` with W the axle load in kN
/// and CI scaled by `k_mp`.
pub fn mobility_number(tyre: &TyreConfig, ci: f64) -> f64 {
    let b = tyre.section_width;
    let d = tyre.overall_diameter;
    let w_kn = tyre.axle_load / 1000.0;
    ci * tyre.k_mp * b * d / w_kn * (1.0 + 5.0 * tyre.deflection_ratio) / (1.0 + 3.0 * b / d)
}

/// Net traction and motion resistance coefficients `(kappa, rho)`.
pub fn traction_curves(bn: f64, s: f64) -> (f64, f64) {
    let rho = 1.2 / bn + 0.5 * s / bn.sqrt() + 0.03;
    let kappa = 0.88 * (1.0 - (-0.08 * bn).exp()) * (1.0 - (-7.0 * s).exp()) - rho;
    (kappa, rho)
}

/// `kappa / (kappa + rho) (1 - s)`.
pub fn tractive_efficiency(kappa: f64, rho: f64, s: f64) -> f64 {
    kappa / (kappa + rho) * (1.0 - s)
}

fn solution(bn: f64, s: f64) -> TractionSolution {
    let (kappa, rho) = traction_curves(bn, s);
    TractionSolution { slip: s, kappa, rho, eta_tractive: tractive_efficiency(kappa, rho, s), bn }
}

/// Slip at which one axle develops `pull_demand` [N], by bisection on `[0, S_MAX]`.
pub fn solve_slip(tyre: &TyreConfig, ci: f64, pull_demand: f64) -> Result<TractionSolution, TractionError> {
    if pull_demand < 0.0 {
        return Err(TractionError::NegativeDemand(pull_demand));
    }
    let bn = mobility_number(tyre, ci);
    let w = tyre.axle_load;
    let target = pull_demand / w;
    let cap = traction_curves(bn, S_MAX).0;
    if cap < target {
        return Err(TractionError::TractionLimit { demand: pull_demand, capability: cap * w, s_max: S_MAX });
    }
    let (mut lo, mut hi) = (0.0, S_MAX);
    for _ in 0..64 {
        let mid = 0.5 * (lo + hi);
        if traction_curves(bn, mid).0 < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    Ok(solution(bn, 0.5 * (lo + hi)))
}

/// Both axles of a four-wheel-drive tractor sharing the pull by static load.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxlePair {
    pub front: TyreConfig,
    pub rear: TyreConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CombinedTraction {
    pub front: TractionSolution,
    pub rear: TractionSolution,
    /// Axle input power per unit ground speed [N], i.e. wheel power / v.
    pub wheel_force: f64,
    /// Slip loss per unit ground speed [N].
    pub slip_force: f64,
    /// Motion resistance per unit ground speed [N].
    pub rolling_force: f64,
    /// Pull over wheel force.
    pub eta_tractive: f64,
    /// Wheel-power weighted slip.
    pub slip: f64,
}

impl AxlePair {
    pub fn total_load(&self) -> f64 {
        self.front.axle_load + self.rear.axle_load
    }

    /// Pull split in proportion to axle load; both axles run at the same
    /// net traction coefficient and their own slip.
    pub fn solve(&self, ci: f64, pull: f64) -> Result<CombinedTraction, TractionError> {
        let w = self.total_load();
        let f = solve_slip(&self.front, ci, pull * self.front.axle_load / w)?;
        let r = solve_slip(&self.rear, ci, pull * self.rear.axle_load / w)?;
        let mut wheel = 0.0;
        let mut slip_loss = 0.0;
        let mut rolling = 0.0;
        for (sol, load) in [(f, self.front.axle_load), (r, self.rear.axle_load)] {
            let axle = (sol.kappa + sol.rho) * load / (1.0 - sol.slip);
            wheel += axle;
            slip_loss += axle * sol.slip;
            rolling += sol.rho * load;
        }
        Ok(CombinedTraction {
            front: f,
            rear: r,
            wheel_force: wheel,
            slip_force: slip_loss,
            rolling_force: rolling,
            eta_tractive: pull / wheel,
            slip: slip_loss / wheel,
        })
    }
}
