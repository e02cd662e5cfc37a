//! Deterministic 1 km test track with zoned soil strength and two hills.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TrackError {
    #[error("position {x} m outside [0, {length}]")]
    OutOfRange { x: f64, length: f64 },
    #[error("invalid track configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrackConfig {
    /// m.
    pub length: f64,
    pub zones: usize,
    /// Cone index of each soil type, softest first [kPa].
    pub soil_ci: Vec<f64>,
    /// Width of the cosine blend across zone boundaries [m].
    pub blend: f64,
    /// Crest heights and valley depth [m].
    pub hill_1: f64,
    pub hill_2: f64,
    pub valley: f64,
    /// Range for the first crest position [m].
    pub crest_window: (f64, f64),
    /// Range for the crest-to-valley and valley-to-crest distances [m].
    pub flank_window: (f64, f64),
}

impl Default for TrackConfig {
    fn default() -> Self {
        Self {
            length: 1000.0,
            zones: 10,
            soil_ci: vec![800.0, 900.0, 1000.0, 1150.0, 1300.0],
            blend: 10.0,
            hill_1: 5.5,
            hill_2: 5.0,
            valley: 4.5,
            crest_window: (200.0, 260.0),
            flank_window: (200.0, 260.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Zone {
    pub start: f64,
    pub end: f64,
    /// Index into the soil table, 0 = softest.
    pub soil: usize,
    pub ci: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackProfile {
    pub seed: u64,
    pub length: f64,
    pub zones: Vec<Zone>,
    /// `(x, elevation)` knots of the piecewise-cosine profile.
    pub keypoints: Vec<(f64, f64)>,
    /// Samples on the 1 m grid.
    pub ci: Vec<f64>,
    pub elevation: Vec<f64>,
    pub grade: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackSample {
    pub ci: f64,
    pub grade: f64,
    pub elevation: f64,
}

fn profile_at(kp: &[(f64, f64)], x: f64) -> (f64, f64) {
    for w in kp.windows(2) {
        let ((x0, e0), (x1, e1)) = (w[0], w[1]);
        if x <= x1 {
            let l = x1 - x0;
            let t = ((x - x0) / l).clamp(0.0, 1.0);
            let pi = std::f64::consts::PI;
            let e = e0 + (e1 - e0) * (1.0 - (pi * t).cos()) / 2.0;
            let g = (e1 - e0) * pi / 2.0 * (pi * t).sin() / l;
            return (e, g);
        }
    }
    (kp[kp.len() - 1].1, 0.0)
}

impl TrackConfig {
    fn validate(&self) -> Result<(), TrackError> {
        let bad = |m: &str| Err(TrackError::Config(m.into()));
        if !(self.length > 0.0) || self.zones == 0 || self.soil_ci.is_empty() {
            return bad("length, zones and soil table must be non-empty");
        }
        if self.zones % self.soil_ci.len() != 0 {
            return bad("zone count must be a multiple of the number of soil types");
        }
        if self.soil_ci.iter().any(|&c| !(c > 0.0)) || self.soil_ci.windows(2).any(|w| w[1] <= w[0]) {
            return bad("soil cone indices must be positive and increasing");
        }
        let (c_lo, c_hi) = self.crest_window;
        let (f_lo, f_hi) = self.flank_window;
        if !(c_lo > 0.0 && c_hi >= c_lo && f_lo > 0.0 && f_hi >= f_lo) {
            return bad("hill windows must be positive ranges");
        }
        if c_hi + 2.0 * f_hi >= self.length {
            return bad("hill windows do not fit on the track");
        }
        Ok(())
    }
}

/// Builds the track for `seed`.
pub fn generate(cfg: &TrackConfig, seed: u64) -> Result<TrackProfile, TrackError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |(lo, hi): (f64, f64)| lo + (hi - lo) * rng.random::<f64>();
    let c1 = draw(cfg.crest_window);
    let cv = c1 + draw(cfg.flank_window);
    let c2 = cv + draw(cfg.flank_window);
    let keypoints = vec![(0.0, 0.0), (c1, cfg.hill_1), (cv, -cfg.valley), (c2, cfg.hill_2), (cfg.length, 0.0)];

    let n = cfg.length.round() as usize + 1;
    let mut elevation = Vec::with_capacity(n);
    let mut grade = Vec::with_capacity(n);
    for i in 0..n {
        let (e, g) = profile_at(&keypoints, i as f64);
        elevation.push(e);
        grade.push(g);
    }

    let zl = cfg.length / cfg.zones as f64;
    let mut mean: Vec<(usize, f64)> = (0..cfg.zones)
        .map(|z| {
            let (a, b) = ((z as f64 * zl).round() as usize, ((z + 1) as f64 * zl).round() as usize);
            (z, elevation[a..b].iter().sum::<f64>() / (b - a) as f64)
        })
        .collect();
    mean.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    let per_type = cfg.zones / cfg.soil_ci.len();
    let mut soil = vec![0; cfg.zones];
    for (rank, &(z, _)) in mean.iter().enumerate() {
        soil[z] = rank / per_type;
    }
    let zones: Vec<Zone> = (0..cfg.zones)
        .map(|z| Zone { start: z as f64 * zl, end: (z + 1) as f64 * zl, soil: soil[z], ci: cfg.soil_ci[soil[z]] })
        .collect();

    let half = cfg.blend / 2.0;
    let ci = (0..n)
        .map(|i| {
            let x = i as f64;
            let z = ((x / zl) as usize).min(cfg.zones - 1);
            let mut c = zones[z].ci;
            if z > 0 && x - zones[z].start < half {
                let t = (x - (zones[z].start - half)) / cfg.blend;
                c = zones[z - 1].ci + (zones[z].ci - zones[z - 1].ci) * (1.0 - (std::f64::consts::PI * t).cos()) / 2.0;
            } else if z + 1 < cfg.zones && zones[z].end - x < half {
                let t = (x - (zones[z].end - half)) / cfg.blend;
                c = zones[z].ci + (zones[z + 1].ci - zones[z].ci) * (1.0 - (std::f64::consts::PI * t).cos()) / 2.0;
            }
            c
        })
        .collect();

    Ok(TrackProfile { seed, length: cfg.length, zones, keypoints, ci, elevation, grade })
}

impl TrackProfile {
    /// Linear interpolation on the 1 m grid.
    pub fn sample(&self, x: f64) -> Result<TrackSample, TrackError> {
        if !(x >= 0.0 && x <= self.length) {
            return Err(TrackError::OutOfRange { x, length: self.length });
        }
        let last = self.ci.len() - 1;
        let i = (x.floor() as usize).min(last - 1);
        let t = x - i as f64;
        let lerp = |v: &[f64]| v[i] + (v[i + 1] - v[i]) * t;
        Ok(TrackSample { ci: lerp(&self.ci), grade: lerp(&self.grade), elevation: lerp(&self.elevation) })
    }

    /// Same soil and elevation model with a uniform cone index and no grade.
    pub fn uniform(length: f64, ci: f64) -> Self {
        let n = length.round() as usize + 1;
        Self {
            seed: 0,
            length,
            zones: vec![Zone { start: 0.0, end: length, soil: 0, ci }],
            keypoints: vec![(0.0, 0.0), (length, 0.0)],
            ci: vec![ci; n],
            elevation: vec![0.0; n],
            grade: vec![0.0; n],
        }
    }

    pub fn max_abs_grade(&self) -> f64 {
        self.grade.iter().fold(0.0, |m, g| m.max(g.abs()))
    }

    pub fn elevation_range(&self) -> f64 {
        let max = self.elevation.iter().cloned().fold(f64::MIN, f64::max);
        let min = self.elevation.iter().cloned().fold(f64::MAX, f64::min);
        max - min
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), TrackError> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["x_m", "ci_kpa", "elevation_m", "grade"])?;
        for i in 0..self.ci.len() {
            out.write_record([
                format!("{i}"),
                format!("{:.3}", self.ci[i]),
                format!("{:.6}", self.elevation[i]),
                format!("{:.6}", self.grade[i]),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoints_and_mid_zone() {
        let t = generate(&TrackConfig::default(), 42).unwrap();
        let s0 = t.sample(0.0).unwrap();
        let s1 = t.sample(1000.0).unwrap();
        assert_eq!(s0.ci, t.ci[0]);
        assert_eq!(s1.elevation, t.elevation[1000]);
        for z in &t.zones {
            let mid = t.sample(0.5 * (z.start + z.end)).unwrap();
            assert_eq!(mid.ci, z.ci);
        }
        assert!(t.sample(1000.5).is_err());
        assert!(t.sample(-0.1).is_err());
    }

    #[test]
    fn grade_bound_for_default_seed() {
        let t = generate(&TrackConfig::default(), 42).unwrap();
        let g = t.max_abs_grade();
        assert!((0.06..=0.08).contains(&g), "{g}");
        assert!(t.elevation_range() <= 10.5);
    }
}
