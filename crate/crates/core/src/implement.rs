//! Implement-side speed optimizer.
//!
//! Minimises the fuel proxy `F_draft / eta_tractor`, which is proportional to
//! fuel per hectare, from the implement's own draft model and the two scalars
//! broadcast by the tractor.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::{EfficiencyBroadcast, SpeedAccelCommand};
use crate::draft::{draft_force, DraftCoefficients};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    /// Probe step [km/h].
    pub probe_dv: f64,
    /// km/h per unit relative gradient.
    pub k_v: f64,
    /// km/h per cycle.
    pub dv_max: f64,
    /// m/s² per unit relative gradient.
    pub k_a: f64,
    /// m/s².
    pub a_max: f64,
    pub v_min: f64,
    pub v_max: f64,
    /// Floor for linearised efficiencies.
    pub eta_floor: f64,
    /// Optimizer runs every `cycle_divisor` ticks.
    pub cycle_divisor: u32,
    /// Ticks without a broadcast after which the optimizer disables itself.
    pub timeout_ticks: u32,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            probe_dv: 0.5,
            k_v: 2.0,
            dv_max: 0.5,
            k_a: 1.0,
            a_max: 0.5,
            v_min: 4.0,
            v_max: 10.0,
            eta_floor: 0.01,
            cycle_divisor: 1,
            timeout_ticks: 3,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<(), String> {
        let pos = [self.probe_dv, self.k_v, self.dv_max, self.k_a, self.a_max, self.v_min, self.eta_floor];
        if pos.iter().any(|&x| !(x > 0.0)) || self.cycle_divisor == 0 || self.timeout_ticks == 0 {
            return Err("optimizer parameters must be positive".into());
        }
        if self.v_min >= self.v_max {
            return Err(format!("v_min {} must be below v_max {}", self.v_min, self.v_max));
        }
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OptimizerFault {
    #[error("linearised efficiency non-positive at probe step {probe_dv} km/h")]
    NonPositiveEta { probe_dv: f64 },
    #[error("received efficiency {0} is not positive")]
    NoEfficiency(f64),
}

/// Command in km/h and m/s² with the relative gradient that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub v_cmd: f64,
    pub a_cmd: f64,
    /// Relative proxy gradient [1 per km/h].
    pub gradient: f64,
}

fn clamp_sym(x: f64, m: f64) -> f64 {
    x.clamp(-m, m)
}

/// Relative gradient of the fuel proxy for given `eta` and `deta` [per km/h].
fn relative_gradient(draft: &DraftCoefficients, v: f64, eta: f64, deta: f64, dv: f64, floor: f64) -> Option<f64> {
    let eta_p = eta + deta * dv;
    let eta_m = eta - deta * dv;
    if eta_p <= 0.0 || eta_m <= 0.0 {
        return None;
    }
    let proxy = |u: f64, e: f64| draft_force(draft, u) / e.max(floor);
    let center = proxy(v, eta);
    Some((proxy(v + dv, eta_p) - proxy(v - dv, eta_m)) / (2.0 * dv) / center)
}

/// One optimizer cycle at actual speed `v` [km/h].
pub fn optimize_step(
    cfg: &OptimizerConfig,
    draft: &DraftCoefficients,
    rx: &EfficiencyBroadcast,
    v: f64,
) -> Result<Step, OptimizerFault> {
    if draft_force(draft, v) <= 0.0 {
        // zero draft: fuel per hectare falls monotonically with speed
        return Ok(Step { v_cmd: (v + cfg.dv_max).clamp(cfg.v_min, cfg.v_max), a_cmd: cfg.a_max, gradient: 0.0 });
    }
    let eta = rx.eta_tractor / 100.0;
    if !(eta > 0.0) {
        return Err(OptimizerFault::NoEfficiency(eta));
    }
    let deta = rx.deta_dv / 100.0 / 3.6;
    let g = relative_gradient(draft, v, eta, deta, cfg.probe_dv, cfg.eta_floor)
        .or_else(|| relative_gradient(draft, v, eta, deta, 0.5 * cfg.probe_dv, cfg.eta_floor))
        .ok_or(OptimizerFault::NonPositiveEta { probe_dv: 0.5 * cfg.probe_dv })?;
    let dv = clamp_sym(-cfg.k_v * g, cfg.dv_max);
    Ok(Step {
        v_cmd: (v + dv).clamp(cfg.v_min, cfg.v_max),
        a_cmd: clamp_sym(-cfg.k_a * g, cfg.a_max),
        gradient: g,
    })
}

/// Implement controller with capability detection and fault hold.
#[derive(Debug, Clone)]
pub struct ImplementEcu {
    pub cfg: OptimizerConfig,
    pub draft: DraftCoefficients,
    tick: u64,
    last_rx: Option<u64>,
    last_cmd: Option<SpeedAccelCommand>,
    last_step: Option<Step>,
}

impl ImplementEcu {
    pub fn new(cfg: OptimizerConfig, draft: DraftCoefficients) -> Self {
        Self { cfg, draft, tick: 0, last_rx: None, last_cmd: None, last_step: None }
    }

    pub fn enabled(&self) -> bool {
        detect_capability(self.last_rx, self.tick, self.cfg.timeout_ticks)
    }

    pub fn last_step(&self) -> Option<Step> {
        self.last_step
    }

    /// Processes one tick. Returns the command to send, or `None` while the
    /// optimizer is disabled.
    pub fn on_tick(&mut self, rx: Option<&EfficiencyBroadcast>, v: f64) -> Option<SpeedAccelCommand> {
        self.tick += 1;
        if rx.is_some() {
            self.last_rx = Some(self.tick);
        }
        if !self.enabled() {
            self.last_step = None;
            return None;
        }
        let run = (self.tick - 1) % self.cfg.cycle_divisor as u64 == 0;
        if let (true, Some(rx)) = (run, rx) {
            match optimize_step(&self.cfg, &self.draft, rx, v) {
                Ok(step) => {
                    self.last_step = Some(step);
                    self.last_cmd = Some(SpeedAccelCommand { speed: step.v_cmd / 3.6, accel: Some(step.a_cmd) });
                }
                Err(_) => self.last_step = None,
            }
        }
        self.last_cmd
    }
}

/// Enabled while a broadcast arrived within the last `timeout` ticks.
pub fn detect_capability(last_rx_tick: Option<u64>, tick: u64, timeout: u32) -> bool {
    match last_rx_tick {
        Some(t) => tick.saturating_sub(t) < timeout as u64,
        None => false,
    }
}
