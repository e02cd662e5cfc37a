//! Diesel engine fuel model.
//!
//! Fuel flow follows a Willans line with a speed-dependent intercept and slope:
//! `m_f = c1 + c2 n' + c3 n'^2 + (c4 + c5 n') P` with `n' = n / 1000`.
//! The map is fitted by ordinary least squares to dynamometer points measured at
//! the PTO shaft, which are first rescaled to crankshaft power.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error("calibration needs at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("calibration design matrix is rank deficient (rank {rank} of 5)")]
    RankDeficient { rank: usize },
    #[error("invalid calibration input: {0}")]
    InvalidInput(String),
    #[error("operating point infeasible: {power:.3} kW at {speed:.1} rpm exceeds full load {limit:.3} kW")]
    Infeasible { speed: f64, power: f64, limit: f64 },
    #[error("engine speed {0:.1} rpm outside the map")]
    SpeedOutOfRange(f64),
    #[error("power demand {demand:.3} kW exceeds envelope maximum {max:.3} kW")]
    Overload { demand: f64, max: f64 },
    #[error("load fraction must be positive, got {0}")]
    Domain(f64),
}

/// A dynamometer test point measured at the PTO shaft.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DynoPoint {
    /// Engine speed [rpm].
    pub speed: f64,
    /// PTO power [kW].
    pub power_pto: f64,
    /// Fuel flow [g/h].
    pub fuel_flow: f64,
}

/// Parses the plain-text dataset format: one `rpm kW g/h` triple per line,
/// `#` starts a comment, commas and whitespace both separate columns.
pub fn parse_dyno_table(text: &str) -> Result<Vec<DynoPoint>, EngineError> {
    let mut points = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let cols: Vec<f64> = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .map(|s| s.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| EngineError::InvalidInput(format!("line {}: {e}", lineno + 1)))?;
        if cols.len() != 3 {
            return Err(EngineError::InvalidInput(format!(
                "line {}: expected 3 columns, got {}",
                lineno + 1,
                cols.len()
            )));
        }
        points.push(DynoPoint { speed: cols[0], power_pto: cols[1], fuel_flow: cols[2] });
    }
    Ok(points)
}

/// Default calibration dataset shipped with the crate.
pub fn default_dyno_points() -> Vec<DynoPoint> {
    parse_dyno_table(include_str!("../data/dyno_default.txt")).expect("bundled dataset parses")
}

/// Speed limits and full-load curve of the engine, crankshaft basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineEnvelope {
    pub n_idle: f64,
    pub n_torque_peak: f64,
    pub n_rated: f64,
    /// Rated crankshaft power [kW], denominator of the load fraction.
    pub p_rated: f64,
    /// `(rpm, kW)` knots, strictly increasing in speed, linearly interpolated.
    pub full_load: Vec<(f64, f64)>,
}

impl Default for EngineEnvelope {
    fn default() -> Self {
        Self {
            n_idle: 850.0,
            n_torque_peak: 1400.0,
            n_rated: 2000.0,
            p_rated: 100.0,
            full_load: vec![
                (850.0, 30.0),
                (1000.0, 42.0),
                (1200.0, 64.0),
                (1400.0, 88.0),
                (1550.0, 95.0),
                (1700.0, 100.0),
                (2000.0, 100.0),
            ],
        }
    }
}

impl EngineEnvelope {
    pub fn validate(&self) -> Result<(), EngineError> {
        let bad = |m: &str| Err(EngineError::InvalidInput(m.to_string()));
        if !(self.n_idle > 0.0 && self.n_idle <= self.n_torque_peak && self.n_torque_peak < self.n_rated) {
            return bad("speeds must satisfy 0 < n_idle <= n_torque_peak < n_rated");
        }
        if self.p_rated <= 0.0 {
            return bad("p_rated must be positive");
        }
        if self.full_load.len() < 2 {
            return bad("full-load curve needs at least two knots");
        }
        if self.full_load.windows(2).any(|w| w[1].0 <= w[0].0) {
            return bad("full-load knots must be strictly increasing in speed");
        }
        if self.full_load.iter().any(|k| k.1 <= 0.0) {
            return bad("full-load power must be positive");
        }
        let (lo, hi) = (self.full_load[0].0, self.full_load[self.full_load.len() - 1].0);
        if lo > self.n_torque_peak || hi < self.n_rated {
            return bad("full-load curve must cover [n_torque_peak, n_rated]");
        }
        Ok(())
    }

    /// Full-load power at `n` [kW]; constant beyond the outer knots.
    pub fn full_load_power(&self, n: f64) -> f64 {
        let k = &self.full_load;
        if n <= k[0].0 {
            return k[0].1;
        }
        for w in k.windows(2) {
            if n <= w[1].0 {
                let t = (n - w[0].0) / (w[1].0 - w[0].0);
                return w[0].1 + t * (w[1].1 - w[0].1);
            }
        }
        k[k.len() - 1].1
    }

    /// Largest full-load power reachable in the Eco-mode speed range.
    pub fn max_eco_power(&self) -> f64 {
        let mut m = self
            .full_load_power(self.n_torque_peak)
            .max(self.full_load_power(self.n_rated));
        for &(n, p) in &self.full_load {
            if n > self.n_torque_peak && n < self.n_rated {
                m = m.max(p);
            }
        }
        m
    }
}

/// Calibrated Willans-line engine map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WillansCoefficients {
    /// `[c1, c2, c3, c4, c5]` in g/h, g/h/krpm, g/h/krpm², g/kWh, g/kWh/krpm.
    pub c: [f64; 5],
    pub envelope: EngineEnvelope,
    pub eta_pto: f64,
    /// Minimum SFC along the full-load curve within the Eco range [g/kWh].
    pub b_e_best: f64,
}

/// Result of [`calibrate_willans`].
#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub map: WillansCoefficients,
    /// Root-mean-square fuel-flow residual [g/h].
    pub rms_residual: f64,
}

/// An engine operating point on the crankshaft.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    pub speed: f64,
    pub power_crank: f64,
    pub fuel_flow: f64,
    /// `None` at zero power where SFC is undefined.
    pub b_e: Option<f64>,
    pub chi: f64,
}

fn regressors(n: f64, p: f64) -> [f64; 5] {
    let x = n / 1000.0;
    [1.0, x, x * x, p, x * p]
}

impl WillansCoefficients {
    pub fn new(c: [f64; 5], envelope: EngineEnvelope, eta_pto: f64) -> Result<Self, EngineError> {
        envelope.validate()?;
        if !(eta_pto > 0.0 && eta_pto <= 1.0) {
            return Err(EngineError::InvalidInput(format!("eta_pto {eta_pto} not in (0, 1]")));
        }
        let mut map = Self { c, envelope, eta_pto, b_e_best: f64::NAN };
        map.check_positive()?;
        map.b_e_best = map.search_best_sfc();
        Ok(map)
    }

    fn check_positive(&self) -> Result<(), EngineError> {
        let env = &self.envelope;
        let mut n = env.n_idle;
        while n <= env.n_rated {
            for p in [0.0, env.full_load_power(n)] {
                let m = self.fuel_flow_unchecked(n, p);
                if !(m > 0.0) {
                    return Err(EngineError::InvalidInput(format!(
                        "map predicts non-positive fuel flow {m:.2} g/h at {n} rpm, {p} kW"
                    )));
                }
            }
            n += 1.0;
        }
        Ok(())
    }

    fn sfc_on_envelope(&self, n: f64) -> f64 {
        let p = self.envelope.full_load_power(n);
        self.fuel_flow_unchecked(n, p) / p
    }

    fn search_best_sfc(&self) -> f64 {
        let env = &self.envelope;
        let step = 0.5;
        let mut best_n = env.n_torque_peak;
        let mut best = self.sfc_on_envelope(best_n);
        let mut n = env.n_torque_peak;
        while n < env.n_rated {
            n = (n + step).min(env.n_rated);
            let b = self.sfc_on_envelope(n);
            if b < best {
                best = b;
                best_n = n;
            }
        }
        // golden-section refinement around the best sample
        let (mut a, mut b) = ((best_n - step).max(env.n_torque_peak), (best_n + step).min(env.n_rated));
        let g = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..60 {
            let x1 = b - g * (b - a);
            let x2 = a + g * (b - a);
            if self.sfc_on_envelope(x1) < self.sfc_on_envelope(x2) {
                b = x2;
            } else {
                a = x1;
            }
        }
        best.min(self.sfc_on_envelope(0.5 * (a + b)))
    }

    /// Zero-load (friction) fuel flow at speed `n` [g/h].
    pub fn zero_load_flow(&self, n: f64) -> f64 {
        let x = n / 1000.0;
        self.c[0] + self.c[1] * x + self.c[2] * x * x
    }

    /// Incremental fuel per crankshaft energy at speed `n` [g/kWh].
    pub fn incremental_sfc(&self, n: f64) -> f64 {
        self.c[3] + self.c[4] * n / 1000.0
    }

    /// Evaluates the map without checking the envelope.
    pub fn fuel_flow_unchecked(&self, n: f64, p: f64) -> f64 {
        self.zero_load_flow(n) + self.incremental_sfc(n) * p
    }

    pub fn full_load_power(&self, n: f64) -> f64 {
        self.envelope.full_load_power(n)
    }

    pub fn load_fraction(&self, p: f64) -> f64 {
        p / self.envelope.p_rated
    }
}

/// Fits the map to dyno points. PTO powers are divided by `eta_pto` first.
pub fn calibrate_willans(
    points: &[DynoPoint],
    eta_pto: f64,
    envelope: EngineEnvelope,
) -> Result<Calibration, EngineError> {
    if points.len() < 5 {
        return Err(EngineError::TooFewPoints { needed: 5, got: points.len() });
    }
    if !(eta_pto > 0.0 && eta_pto <= 1.0) {
        return Err(EngineError::InvalidInput(format!("eta_pto {eta_pto} not in (0, 1]")));
    }
    if let Some(p) = points.iter().find(|p| p.power_pto < 0.0 || p.fuel_flow <= 0.0) {
        return Err(EngineError::InvalidInput(format!("bad dyno point {p:?}")));
    }
    let rows: Vec<[f64; 5]> = points
        .iter()
        .map(|p| regressors(p.speed, p.power_pto / eta_pto))
        .collect();
    let x = DMatrix::from_fn(rows.len(), 5, |i, j| rows[i][j]);
    let y = DVector::from_iterator(points.len(), points.iter().map(|p| p.fuel_flow));

    let svd = x.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let tol = smax * 1e-10;
    let rank = svd.singular_values.iter().filter(|&&s| s > tol).count();
    if rank < 5 {
        return Err(EngineError::RankDeficient { rank });
    }
    let sol = svd
        .solve(&y, tol)
        .map_err(|e| EngineError::InvalidInput(e.to_string()))?;
    let resid = &x * &sol - &y;
    let rms = (resid.norm_squared() / points.len() as f64).sqrt();
    let c = [sol[0], sol[1], sol[2], sol[3], sol[4]];
    Ok(Calibration { map: WillansCoefficients::new(c, envelope, eta_pto)?, rms_residual: rms })
}

/// Fuel flow [g/h] at a feasible operating point.
pub fn fuel_flow(map: &WillansCoefficients, n: f64, p: f64) -> Result<f64, EngineError> {
    let env = &map.envelope;
    if n < env.n_idle - 1e-9 || n > env.n_rated + 1e-9 {
        return Err(EngineError::SpeedOutOfRange(n));
    }
    let limit = env.full_load_power(n);
    if p < 0.0 || p > limit * (1.0 + 1e-12) {
        return Err(EngineError::Infeasible { speed: n, power: p, limit });
    }
    Ok(map.fuel_flow_unchecked(n, p))
}

/// ASAE hyperbolic part-load SFC: `b_base (0.22 + 0.096 / chi) f_pt`.
pub fn asae_sfc(chi: f64, b_e_base: f64, f_pt: f64) -> Result<f64, EngineError> {
    if !(chi > 0.0) {
        return Err(EngineError::Domain(chi));
    }
    Ok(b_e_base * (0.22 + 0.096 / chi) * f_pt)
}

/// Picks the engine speed in `[n_torque_peak, n_rated]` with the lowest fuel flow
/// that can still deliver `p_demand`.
///
/// The grid sweep at `step_rpm` is augmented with the envelope crossings and
/// the stationary point of the (quadratic in speed) fuel flow, so the result is
/// the exact constrained minimum rather than a grid approximation.
pub fn eco_mode_select(
    map: &WillansCoefficients,
    p_demand: f64,
    step_rpm: f64,
) -> Result<OperatingPoint, EngineError> {
    let env = &map.envelope;
    let p = p_demand.max(0.0);
    let max = env.max_eco_power();
    if p > max * (1.0 + 1e-12) {
        return Err(EngineError::Overload { demand: p, max });
    }
    let (lo, hi) = (env.n_torque_peak, env.n_rated);
    let mut cands: Vec<f64> = vec![lo, hi];
    let step = if step_rpm > 0.0 { step_rpm } else { 10.0 };
    let mut n = lo + step;
    while n < hi {
        cands.push(n);
        n += step;
    }
    for &(kn, _) in &env.full_load {
        if kn > lo && kn < hi {
            cands.push(kn);
        }
    }
    // envelope crossings P_full(n) = p on each linear piece inside the range
    let mut knots: Vec<f64> = vec![lo];
    knots.extend(env.full_load.iter().map(|k| k.0).filter(|&k| k > lo && k < hi));
    knots.push(hi);
    for w in knots.windows(2) {
        let (a, b) = (w[0], w[1]);
        let (pa, pb) = (env.full_load_power(a), env.full_load_power(b));
        if (pa - p) * (pb - p) < 0.0 {
            cands.push(a + (p - pa) / (pb - pa) * (b - a));
        }
    }
    let c = &map.c;
    if c[2] > 0.0 {
        let x = -(c[1] + c[4] * p) / (2.0 * c[2]);
        let n = 1000.0 * x;
        if n > lo && n < hi {
            cands.push(n);
        }
    }
    let mut best: Option<(f64, f64)> = None;
    for &n in &cands {
        if env.full_load_power(n) < p * (1.0 - 1e-12) {
            continue;
        }
        let f = map.fuel_flow_unchecked(n, p);
        if best.map_or(true, |(bf, bn)| f < bf || (f == bf && n < bn)) {
            best = Some((f, n));
        }
    }
    let (f, n) = best.ok_or(EngineError::Overload { demand: p, max })?;
    Ok(OperatingPoint {
        speed: n,
        power_crank: p,
        fuel_flow: f,
        b_e: if p > 0.0 { Some(f / p) } else { None },
        chi: map.load_fraction(p),
    })
}

/// Calibrates the bundled dataset with default envelope and `eta_pto = 0.93`.
pub fn default_map() -> WillansCoefficients {
    calibrate_willans(&default_dyno_points(), 0.93, EngineEnvelope::default())
        .expect("bundled calibration succeeds")
        .map
}
