//! Fixed-step co-simulation of tractor and implement over the test track.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::{CodecError, GroundSpeed, HitchState, SpeedAccelCommand};
use crate::config::{RunConfig, Scenario};
use crate::draft::draft_force;
use crate::implement::ImplementEcu;
use crate::track::{TrackError, TrackProfile};
use crate::tractor::{self, Env, Infeasible, TractorEcu, TractorError, TractorModel, TractorState};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("run aborted at x = {x:.1} m: {source}")]
    Aborted { x: f64, source: TractorError },
    #[error("tractor state infeasible at x = {x:.1} m: {source}")]
    Infeasible { x: f64, source: Infeasible },
    #[error("energy balance residual {residual:.4} exceeds {tol}")]
    Closure { residual: f64, tol: f64 },
    #[error("track end not reached within {0} s")]
    Timeout(f64),
    #[error(transparent)]
    Track(#[from] TrackError),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Tractor(#[from] TractorError),
    #[error("invalid run: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Mode {
    Ecotim,
    Baseline { v_set: f64 },
}

/// Per-tick state. Speeds in m/s, forces in N, energies in J.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: f64,
    pub x: f64,
    pub v_actual: f64,
    pub v_cmd: f64,
    pub a_cmd: f64,
    pub ci: f64,
    pub grade: f64,
    pub f_draft: f64,
    pub slip: f64,
    pub eta_engine_rel: f64,
    pub eta_transmission: f64,
    pub eta_tractive: f64,
    pub eta_tractor: f64,
    /// Broadcast derivative [1 per m/s], zero in baseline runs.
    pub deta_dv: f64,
    pub engine_rpm: f64,
    pub engine_kw: f64,
    pub fuel_g_h: f64,
    pub power_limited: bool,
    pub e_fuel: f64,
    pub e_thermal: f64,
    pub e_transmission: f64,
    pub e_slip: f64,
    pub e_rolling: f64,
    /// Signed potential-energy change.
    pub e_grade: f64,
    pub e_tillage: f64,
}

/// Energy categories in litres of fuel equivalent per hectare.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyPartition {
    pub engine_thermal: f64,
    pub transmission: f64,
    /// Motion resistance, braking and net grade work.
    pub rolling_resistance: f64,
    pub slip: f64,
    pub tillage: f64,
}

impl EnergyPartition {
    pub fn total(&self) -> f64 {
        self.engine_thermal + self.transmission + self.rolling_resistance + self.slip + self.tillage
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub scenario: String,
    pub mode: Mode,
    pub fuel_l_ha: f64,
    pub time_min_ha: f64,
    pub total_fuel_l: f64,
    pub duration_s: f64,
    pub mean_speed_kmh: f64,
    pub fuel_energy_l_ha: f64,
    pub energy: EnergyPartition,
    /// Balance residual as a fraction of fuel energy.
    pub closure: f64,
    pub power_limited_share: f64,
    pub max_fixed_point_iterations: usize,
    pub frames_per_second: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub records: Vec<StepRecord>,
    pub summary: RunSummary,
}

/// Runs scenarios against one calibrated tractor.
#[derive(Debug, Clone)]
pub struct Simulator {
    pub config: RunConfig,
    pub model: TractorModel,
}

impl Simulator {
    pub fn new(config: RunConfig) -> Result<Self, SimError> {
        let model = TractorModel::new(config.tractor.clone())?;
        if !(config.sim.dt > 0.0) {
            return Err(SimError::Invalid("dt must be positive".into()));
        }
        Ok(Self { config, model })
    }

    pub fn track(&self) -> Result<TrackProfile, SimError> {
        Ok(crate::track::generate(&self.config.track, self.config.seed)?)
    }

    pub fn run_ecotim(&self, s: &Scenario, track: &TrackProfile) -> Result<RunOutput, SimError> {
        self.run(s, track, Mode::Ecotim)
    }

    pub fn run_baseline(&self, s: &Scenario, track: &TrackProfile, v_set: f64) -> Result<RunOutput, SimError> {
        self.run(s, track, Mode::Baseline { v_set })
    }

    pub fn run(&self, s: &Scenario, track: &TrackProfile, mode: Mode) -> Result<RunOutput, SimError> {
        s.validate().map_err(|e| SimError::Invalid(e.to_string()))?;
        let cfg = &self.config;
        let codec = cfg.codec;
        let dt = cfg.sim.dt;
        let tau = self.model.config.tau;
        let length = track.length;
        let model = &self.model;
        let draft = |u: f64| draft_force(&s.draft, u);

        let v0 = match mode {
            Mode::Ecotim => s.v_baseline,
            Mode::Baseline { v_set } => {
                if !(v_set > 0.0) {
                    return Err(SimError::Invalid(format!("baseline speed {v_set} must be positive")));
                }
                v_set
            }
        };
        let v_floor = s.v_min.min(v0);
        let opt = cfg.optimizer_for(s);
        opt.validate().map_err(SimError::Invalid)?;
        let mut tractor_ecu = TractorEcu::new(model.clone());
        let mut implement = ImplementEcu::new(opt, s.draft);

        let mut v = v0;
        let mut cmd = SpeedAccelCommand { speed: v0 / 3.6, accel: None };
        let (mut x, mut t) = (0.0_f64, 0.0_f64);
        let mut records = Vec::new();
        let mut frames = 0u64;
        let mut max_iter = 0;
        let mut limited_ticks = 0usize;

        while x < length {
            if t >= cfg.sim.t_max {
                return Err(SimError::Timeout(cfg.sim.t_max));
            }
            let sample = track.sample(x)?;
            let env = Env { ci: sample.ci, grade: sample.grade };

            let mut limited = false;
            let plant = match model.compute_efficiency(env, v, draft(v)) {
                Ok(st) => st,
                Err(_) => {
                    v = model
                        .max_feasible_speed(env, draft, v_floor, v)
                        .map_err(|source| SimError::Aborted { x, source })?;
                    limited = true;
                    model
                        .compute_efficiency(env, v, draft(v))
                        .map_err(|source| SimError::Infeasible { x, source })?
                }
            };
            limited_ticks += limited as usize;
            max_iter = max_iter.max(plant.fixed_point_iterations);
            let f = plant.draft;

            let mut deta_dv = 0.0;
            if mode == Mode::Ecotim {
                let hitch = codec.decode_hitch(&codec.encode_hitch(&HitchState { position: 50.0, draft: f })?)?;
                let ground = codec.decode_ground_speed(
                    &codec.encode_ground_speed(&GroundSpeed { speed: v / 3.6, distance: x })?,
                )?;
                frames += 2;
                let rx = match tractor_ecu.cycle(env, ground.speed * 3.6, hitch.draft) {
                    Ok(out) => {
                        frames += 1;
                        let rx = codec.decode_efficiency(&codec.encode_efficiency(&out.broadcast)?)?;
                        deta_dv = rx.deta_dv / 100.0;
                        Some(rx)
                    }
                    Err(_) => None,
                };
                if let Some(c) = implement.on_tick(rx.as_ref(), ground.speed * 3.6) {
                    frames += 1;
                    cmd = codec.decode_speed_accel(&codec.encode_speed_accel(&c)?)?;
                }
            }

            let vm = v / 3.6;
            let remaining = length - x;
            let step = if vm * dt >= remaining { remaining / vm } else { dt };
            let e = energy(&plant, vm, step, cfg.sim.lhv);
            records.push(StepRecord {
                t,
                x,
                v_actual: vm,
                v_cmd: cmd.speed,
                a_cmd: cmd.accel.unwrap_or(0.0),
                ci: env.ci,
                grade: env.grade,
                f_draft: f,
                slip: plant.traction.slip,
                eta_engine_rel: plant.eta_engine_rel,
                eta_transmission: plant.eta_transmission,
                eta_tractive: plant.eta_tractive,
                eta_tractor: plant.eta_tractor,
                deta_dv,
                engine_rpm: plant.op.speed,
                engine_kw: plant.op.power_crank,
                fuel_g_h: plant.op.fuel_flow,
                power_limited: limited,
                ..e
            });
            x = if step < dt { length } else { x + vm * dt };
            t += step;
            v = tractor::respond(vm, &cmd, dt, tau, None) * 3.6;
        }

        let summary = self.summarize(s, mode, &records, t, frames, limited_ticks, max_iter)?;
        Ok(RunOutput { records, summary })
    }

    #[allow(clippy::too_many_arguments)]
    fn summarize(
        &self,
        s: &Scenario,
        mode: Mode,
        records: &[StepRecord],
        duration: f64,
        frames: u64,
        limited_ticks: usize,
        max_iter: usize,
    ) -> Result<RunSummary, SimError> {
        let sim = &self.config.sim;
        let area_ha = self.config.track.length * s.w_eff / 1e4;
        let per_ha = |joules: f64| joules / (sim.lhv * 1000.0) / sim.fuel_density / area_ha;
        let fuel_j: f64 = records.iter().map(|r| r.e_fuel).sum();
        let energy = energy_partition(records, per_ha);
        let fuel_energy_l_ha = per_ha(fuel_j);
        let closure = ((fuel_energy_l_ha - energy.total()) / fuel_energy_l_ha).abs();
        if closure > sim.closure_tol {
            return Err(SimError::Closure { residual: closure, tol: sim.closure_tol });
        }
        let total_fuel_l = fuel_j / (sim.lhv * 1000.0) / sim.fuel_density;
        Ok(RunSummary {
            scenario: s.id.clone(),
            mode,
            fuel_l_ha: fuel_energy_l_ha,
            time_min_ha: duration / 60.0 / area_ha,
            total_fuel_l,
            duration_s: duration,
            mean_speed_kmh: self.config.track.length / duration * 3.6,
            fuel_energy_l_ha,
            energy,
            closure,
            power_limited_share: limited_ticks as f64 / records.len().max(1) as f64,
            max_fixed_point_iterations: max_iter,
            frames_per_second: frames as f64 / duration,
        })
    }
}

/// Energy increments of one tick [J] from powers in kW.
fn energy(st: &TractorState, v_mps: f64, dt: f64, lhv: f64) -> StepRecord {
    let kw = |p: f64| p * 1000.0 * dt;
    let fuel = st.op.fuel_flow / 3600.0 * lhv;
    let crank = st.op.power_crank;
    let wheel = st.wheel_power;
    let per_v = |force: f64| force * v_mps / 1000.0;
    StepRecord {
        t: 0.0,
        x: 0.0,
        v_actual: 0.0,
        v_cmd: 0.0,
        a_cmd: 0.0,
        ci: 0.0,
        grade: 0.0,
        f_draft: 0.0,
        slip: 0.0,
        eta_engine_rel: 0.0,
        eta_transmission: 0.0,
        eta_tractive: 0.0,
        eta_tractor: 0.0,
        deta_dv: 0.0,
        engine_rpm: 0.0,
        engine_kw: 0.0,
        fuel_g_h: 0.0,
        power_limited: false,
        e_fuel: kw(fuel),
        e_thermal: kw(fuel - crank),
        e_transmission: kw(crank - wheel),
        e_slip: kw(per_v(st.traction.slip_force)),
        e_rolling: kw(per_v(st.traction.rolling_force + st.brake_force)),
        e_grade: kw(per_v(st.grade_force)),
        e_tillage: kw(per_v(st.draft)),
    }
}

/// Sums the per-tick categories, netting grade work into rolling resistance.
pub fn energy_partition(records: &[StepRecord], convert: impl Fn(f64) -> f64) -> EnergyPartition {
    let mut p = EnergyPartition::default();
    for r in records {
        p.engine_thermal += r.e_thermal;
        p.transmission += r.e_transmission;
        p.rolling_resistance += r.e_rolling + r.e_grade;
        p.slip += r.e_slip;
        p.tillage += r.e_tillage;
    }
    EnergyPartition {
        engine_thermal: convert(p.engine_thermal),
        transmission: convert(p.transmission),
        rolling_resistance: convert(p.rolling_resistance),
        slip: convert(p.slip),
        tillage: convert(p.tillage),
    }
}
