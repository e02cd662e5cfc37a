//! Tractor-side efficiency fusion, speed response and power limiting.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::{EfficiencyBroadcast, SpeedAccelCommand};
use crate::engine::{self, EngineEnvelope, EngineError, OperatingPoint, WillansCoefficients};
use crate::traction::{AxlePair, CombinedTraction, TractionError, TyreConfig};
use crate::transmission::{transmission_efficiency, TransmissionParams};

pub const G: f64 = 9.81;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Infeasible {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Traction(#[from] TractionError),
    #[error("transmission load {load:.4} too small for a positive efficiency")]
    Transmission { load: f64 },
    #[error("speed {0} km/h must be positive")]
    Speed(f64),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TractorError {
    #[error("no feasible speed at {v_min:.2} km/h: {cause}")]
    NothingFeasible { v_min: f64, cause: Infeasible },
    #[error("invalid tractor configuration: {0}")]
    Config(String),
}

/// Tyre size in metric notation, e.g. 650/65 R38.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TyreSize {
    pub width: f64,
    pub aspect: f64,
    pub rim: f64,
    pub deflection_ratio: f64,
}

/// How the tractor extrapolates hitch force during the speed probe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DraftProbe {
    /// Measured hitch force held constant.
    Hold,
    /// Hitch force extrapolated with a slope fitted to recent (speed, force) samples.
    Regression,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EngineConfig {
    pub eta_pto: f64,
    pub envelope: EngineEnvelope,
    pub eco_step_rpm: f64,
    pub dyno: Vec<engine::DynoPoint>,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            eta_pto: 0.93,
            envelope: EngineEnvelope::default(),
            eco_step_rpm: 10.0,
            dyno: engine::default_dyno_points(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TractorConfig {
    /// kg.
    pub mass: f64,
    pub front_share: f64,
    pub front_tyre: TyreSize,
    pub rear_tyre: TyreSize,
    pub k_mp: f64,
    pub engine: EngineConfig,
    pub transmission: TransmissionParams,
    /// Response time constant [s].
    pub tau: f64,
    /// Tractor-side probe step [km/h].
    pub probe_dv: f64,
    pub fixed_point_tol: f64,
    pub fixed_point_max_iter: usize,
    pub draft_probe: DraftProbe,
    /// Samples in the hitch-force regression window.
    pub slope_window: usize,
    /// Minimum speed standard deviation [km/h] for a new slope estimate.
    pub slope_min_spread: f64,
    /// Bisection tolerance of the power-limited speed [km/h].
    pub limit_tol: f64,
}

impl Default for TractorConfig {
    fn default() -> Self {
        Self {
            mass: 8540.0,
            front_share: 0.4,
            front_tyre: TyreSize { width: 0.54, aspect: 0.65, rim: 28.0, deflection_ratio: 0.2 },
            rear_tyre: TyreSize { width: 0.65, aspect: 0.65, rim: 38.0, deflection_ratio: 0.2 },
            k_mp: 1.1,
            engine: EngineConfig::default(),
            transmission: TransmissionParams::default(),
            tau: 2.0,
            probe_dv: 0.3,
            fixed_point_tol: 1e-10,
            fixed_point_max_iter: 10,
            draft_probe: DraftProbe::Regression,
            slope_window: 50,
            slope_min_spread: 0.05,
            limit_tol: 1e-3,
        }
    }
}

/// Local soil and terrain seen by the tractor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Env {
    /// Cone index [kPa].
    pub ci: f64,
    /// Rise over run.
    pub grade: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TractorState {
    /// km/h.
    pub v: f64,
    pub op: OperatingPoint,
    pub eta_engine_rel: f64,
    pub eta_transmission: f64,
    pub eta_tractive: f64,
    pub eta_tractor: f64,
    pub traction: CombinedTraction,
    /// Hitch draft [N].
    pub draft: f64,
    /// Weight component along the slope [N], signed.
    pub grade_force: f64,
    /// Braking force needed downhill when the pull would be negative [N].
    pub brake_force: f64,
    /// Pull developed by the tyres [N].
    pub pull: f64,
    /// Axle input power [kW].
    pub wheel_power: f64,
    pub fixed_point_iterations: usize,
}

/// Central-difference efficiency slope.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Derivative {
    /// Per km/h.
    pub deta_dv: f64,
    pub one_sided: bool,
}

/// The tractor's own powertrain and traction models.
#[derive(Debug, Clone, PartialEq)]
pub struct TractorModel {
    pub config: TractorConfig,
    pub engine: WillansCoefficients,
    pub axles: AxlePair,
    pub calibration_rms: f64,
}

impl TractorModel {
    pub fn new(config: TractorConfig) -> Result<Self, TractorError> {
        let c = &config;
        if !(c.mass > 0.0 && c.front_share > 0.0 && c.front_share < 1.0 && c.k_mp >= 1.0) {
            return Err(TractorError::Config("mass, front_share or k_mp out of range".into()));
        }
        if !(c.tau > 0.0 && c.probe_dv > 0.0 && c.fixed_point_max_iter > 0 && c.limit_tol > 0.0) {
            return Err(TractorError::Config("controller parameters must be positive".into()));
        }
        c.transmission.validate().map_err(|e| TractorError::Config(e.to_string()))?;
        let cal = engine::calibrate_willans(&c.engine.dyno, c.engine.eta_pto, c.engine.envelope.clone())
            .map_err(|e| TractorError::Config(e.to_string()))?;
        let weight = c.mass * G;
        let tyre = |t: &TyreSize, load: f64, k_mp: f64| TyreConfig {
            section_width: t.width,
            overall_diameter: TyreConfig::metric_diameter(t.width, t.aspect, t.rim),
            deflection_ratio: t.deflection_ratio,
            axle_load: load,
            k_mp,
        };
        let axles = AxlePair {
            front: tyre(&c.front_tyre, weight * c.front_share, 1.0),
            rear: tyre(&c.rear_tyre, weight * (1.0 - c.front_share), c.k_mp),
        };
        Ok(Self { engine: cal.map, axles, calibration_rms: cal.rms_residual, config })
    }

    pub fn weight(&self) -> f64 {
        self.config.mass * G
    }

    /// Full efficiency chain at ground speed `v` [km/h] and hitch draft `draft` [N].
    pub fn compute_efficiency(&self, env: Env, v: f64, draft: f64) -> Result<TractorState, Infeasible> {
        if !(v > 0.0) {
            return Err(Infeasible::Speed(v));
        }
        let grade_force = self.weight() * env.grade.atan().sin();
        let demand = draft + grade_force;
        let pull = demand.max(0.0);
        let brake_force = (-demand).max(0.0);
        let traction = self.axles.solve(env.ci, pull)?;
        let wheel_power = traction.wheel_force * v / 3.6 / 1000.0;

        let p_rated = self.engine.envelope.p_rated;
        let tp = &self.config.transmission;
        let eta_at = |p_crank: f64| -> Result<f64, Infeasible> {
            let load = p_crank / p_rated;
            let e = transmission_efficiency(tp, v, load).map_err(|_| Infeasible::Transmission { load })?;
            if e <= 0.0 {
                return Err(Infeasible::Transmission { load });
            }
            Ok(e)
        };
        let mut eta_t = eta_at(p_rated)?;
        let mut iterations = 0;
        for _ in 0..self.config.fixed_point_max_iter {
            iterations += 1;
            let next = eta_at(wheel_power / eta_t)?;
            let done = (next - eta_t).abs() <= self.config.fixed_point_tol * eta_t;
            eta_t = next;
            if done {
                break;
            }
        }
        let p_crank = wheel_power / eta_t;
        let op = engine::eco_mode_select(&self.engine, p_crank, self.config.engine.eco_step_rpm)?;
        let eta_engine_rel = match op.b_e {
            Some(b) => self.engine.b_e_best / b,
            None => 0.0,
        };
        let eta_tractive = traction.eta_tractive;
        Ok(TractorState {
            v,
            op,
            eta_engine_rel,
            eta_transmission: eta_t,
            eta_tractive,
            eta_tractor: eta_engine_rel * eta_t * eta_tractive,
            traction,
            draft,
            grade_force,
            brake_force,
            pull,
            wheel_power,
            fixed_point_iterations: iterations,
        })
    }

    /// `(eta(v + dv) - eta(v - dv)) / (2 dv)` with hitch force extrapolated by `slope` [N per km/h].
    pub fn efficiency_derivative(
        &self,
        env: Env,
        v: f64,
        draft: f64,
        slope: f64,
    ) -> Result<Derivative, Infeasible> {
        let dv = self.config.probe_dv;
        let eta = |u: f64| self.compute_efficiency(env, u, draft + slope * (u - v)).map(|s| s.eta_tractor);
        let up = eta(v + dv);
        let down = if v - dv > 0.0 { eta(v - dv) } else { Err(Infeasible::Speed(v - dv)) };
        match (up, down) {
            (Ok(a), Ok(b)) => Ok(Derivative { deta_dv: (a - b) / (2.0 * dv), one_sided: false }),
            (Ok(a), Err(_)) => Ok(Derivative { deta_dv: (a - eta(v)?) / dv, one_sided: true }),
            (Err(_), Ok(b)) => Ok(Derivative { deta_dv: (eta(v)? - b) / dv, one_sided: true }),
            (Err(e), Err(_)) => Err(e),
        }
    }

    /// Largest speed in `[lo, hi]` [km/h] that the engine envelope and the
    /// slip limit allow when the implement draws `draft(v)`.
    pub fn max_feasible_speed(
        &self,
        env: Env,
        draft: impl Fn(f64) -> f64,
        lo: f64,
        hi: f64,
    ) -> Result<f64, TractorError> {
        let ok = |v: f64| self.compute_efficiency(env, v, draft(v));
        if ok(hi).is_ok() {
            return Ok(hi);
        }
        if let Err(cause) = ok(lo) {
            return Err(TractorError::NothingFeasible { v_min: lo, cause });
        }
        let (mut a, mut b) = (lo, hi);
        while b - a > self.config.limit_tol {
            let m = 0.5 * (a + b);
            if ok(m).is_ok() {
                a = m;
            } else {
                b = m;
            }
        }
        Ok(a)
    }
}

/// Speed response: feed-forward acceleration plus first-order feedback.
///
/// Speeds in m/s. The feed-forward part does not carry the speed past the
/// setpoint, so a saturated command at a speed bound holds the bound.
pub fn respond(v: f64, cmd: &SpeedAccelCommand, dt: f64, tau: f64, limit: Option<f64>) -> f64 {
    let a = cmd.accel.unwrap_or(0.0);
    let mut v_ff = v + a * dt;
    if a > 0.0 {
        v_ff = v_ff.min(v.max(cmd.speed));
    } else if a < 0.0 {
        v_ff = v_ff.max(v.min(cmd.speed));
    }
    let mut v_new = v_ff + dt / tau * (cmd.speed - v);
    if let Some(l) = limit {
        v_new = v_new.min(l);
    }
    v_new.max(0.0)
}

/// Windowed least-squares slope of hitch force over ground speed.
#[derive(Debug, Clone, PartialEq)]
pub struct SlopeEstimator {
    window: usize,
    min_spread: f64,
    samples: VecDeque<(f64, f64)>,
    slope: f64,
}

impl SlopeEstimator {
    pub fn new(window: usize, min_spread: f64) -> Self {
        Self { window: window.max(2), min_spread, samples: VecDeque::new(), slope: 0.0 }
    }

    /// Adds a `(km/h, N)` sample and returns the current slope [N per km/h].
    pub fn push(&mut self, v: f64, force: f64) -> f64 {
        if self.samples.len() == self.window {
            self.samples.pop_front();
        }
        self.samples.push_back((v, force));
        let n = self.samples.len() as f64;
        if n >= 3.0 {
            let mv = self.samples.iter().map(|s| s.0).sum::<f64>() / n;
            let mf = self.samples.iter().map(|s| s.1).sum::<f64>() / n;
            let sxx: f64 = self.samples.iter().map(|s| (s.0 - mv).powi(2)).sum();
            let sxy: f64 = self.samples.iter().map(|s| (s.0 - mv) * (s.1 - mf)).sum();
            if (sxx / n).sqrt() >= self.min_spread {
                self.slope = sxy / sxx;
            }
        }
        self.slope
    }

    pub fn slope(&self) -> f64 {
        self.slope
    }
}

/// Stateful tractor controller: computes the broadcast each tick.
#[derive(Debug, Clone)]
pub struct TractorEcu {
    pub model: TractorModel,
    estimator: SlopeEstimator,
}

/// Broadcast content together with the state it was computed from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TractorOutput {
    pub state: TractorState,
    pub derivative: Derivative,
    pub broadcast: EfficiencyBroadcast,
    pub draft_slope: f64,
}

impl TractorEcu {
    pub fn new(model: TractorModel) -> Self {
        let c = &model.config;
        let estimator = SlopeEstimator::new(c.slope_window, c.slope_min_spread);
        Self { model, estimator }
    }

    /// One tractor cycle at measured speed `v` [km/h] and hitch force `hitch` [N].
    pub fn cycle(&mut self, env: Env, v: f64, hitch: f64) -> Result<TractorOutput, Infeasible> {
        let slope = match self.model.config.draft_probe {
            DraftProbe::Hold => 0.0,
            DraftProbe::Regression => self.estimator.push(v, hitch),
        };
        let draft_at = |u: f64| hitch + slope * (u - v);
        let (v, hitch) = match self.model.compute_efficiency(env, v, hitch) {
            Ok(_) => (v, hitch),
            // quantised measurements can sit just past the power limit
            Err(e) => {
                let lo = (v - self.model.config.probe_dv).max(0.5 * v);
                let u = self.model.max_feasible_speed(env, draft_at, lo, v).map_err(|_| e)?;
                (u, draft_at(u))
            }
        };
        let state = self.model.compute_efficiency(env, v, hitch)?;
        let derivative = self.model.efficiency_derivative(env, v, hitch, slope)?;
        let pct = |x: f64| (100.0 * x).clamp(0.0, 100.0);
        let broadcast = EfficiencyBroadcast {
            eta_tractor: pct(state.eta_tractor),
            deta_dv: (100.0 * 3.6 * derivative.deta_dv).clamp(-327.68, 327.67),
            eta_engine_rel: pct(state.eta_engine_rel),
            eta_transmission: pct(state.eta_transmission),
            eta_tractive: pct(state.eta_tractive),
            load_fraction: pct(state.op.chi),
        };
        Ok(TractorOutput { state, derivative, broadcast, draft_slope: slope })
    }
}
