//! Comparisons, sweeps and the files written for each run.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::{RunConfig, Scenario};
use crate::sim::{Mode, RunOutput, RunSummary, SimError, Simulator, StepRecord};
use crate::track::TrackProfile;

/// Baseline speed setpoints of the trade-off sweep [km/h].
pub const SWEEP_SPEEDS: [f64; 9] = [4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0, 11.0, 12.0];

pub const MANIFEST_VERSION: u32 = 1;

/// Everything needed to repeat a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub tool_version: String,
    pub scenario: Scenario,
    pub mode: Mode,
    pub config: RunConfig,
}

impl Manifest {
    pub fn new(scenario: Scenario, mode: Mode, config: RunConfig) -> Self {
        Self { version: MANIFEST_VERSION, tool_version: env!("CARGO_PKG_VERSION").into(), scenario, mode, config }
    }

    pub fn execute(&self) -> Result<RunOutput, SimError> {
        let sim = Simulator::new(self.config.clone())?;
        let track = sim.track()?;
        sim.run(&self.scenario, &track, self.mode)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub scenario: String,
    pub implement: String,
    pub baseline: RunSummary,
    pub ecotim: RunSummary,
    /// Negative means EcoTIM uses less fuel.
    pub fuel_change_pct: f64,
    pub time_change_pct: f64,
    pub sweep: Vec<RunSummary>,
}

/// Baseline at `v_baseline`, EcoTIM and the speed sweep for one scenario.
pub fn compare(sim: &Simulator, s: &Scenario, track: &TrackProfile) -> Result<Comparison, SimError> {
    let (ecotim, baseline, sweep) = std::thread::scope(|scope| {
        let eco = scope.spawn(|| sim.run_ecotim(s, track).map(|o| o.summary));
        let base = scope.spawn(|| sim.run_baseline(s, track, s.v_baseline).map(|o| o.summary));
        let points: Vec<_> = SWEEP_SPEEDS
            .iter()
            .map(|&v| scope.spawn(move || sim.run_baseline(s, track, v).map(|o| o.summary)))
            .collect();
        let sweep: Result<Vec<_>, _> = points.into_iter().map(|h| h.join().expect("sweep run panicked")).collect();
        (eco.join().expect("run panicked"), base.join().expect("run panicked"), sweep)
    });
    let (ecotim, baseline, sweep) = (ecotim?, baseline?, sweep?);
    let pct = |a: f64, b: f64| 100.0 * (a - b) / b;
    Ok(Comparison {
        scenario: s.id.clone(),
        implement: s.implement.clone(),
        fuel_change_pct: pct(ecotim.fuel_l_ha, baseline.fuel_l_ha),
        time_change_pct: pct(ecotim.time_min_ha, baseline.time_min_ha),
        baseline,
        ecotim,
        sweep,
    })
}

pub fn compare_all(sim: &Simulator, scenarios: &[Scenario]) -> Result<Vec<Comparison>, SimError> {
    let track = sim.track()?;
    std::thread::scope(|scope| {
        let handles: Vec<_> = scenarios.iter().map(|s| scope.spawn(|| compare(sim, s, &track))).collect();
        handles.into_iter().map(|h| h.join().expect("comparison panicked")).collect()
    })
}

fn mode_label(m: Mode) -> String {
    match m {
        Mode::Ecotim => "ecotim".into(),
        Mode::Baseline { v_set } => format!("baseline@{v_set}"),
    }
}

pub fn write_trace<W: Write>(records: &[StepRecord], w: W) -> Result<(), csv::Error> {
    let mut out = csv::Writer::from_writer(w);
    for r in records {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

const SUMMARY_HEADER: [&str; 16] = [
    "scenario",
    "mode",
    "fuel_l_ha",
    "time_min_ha",
    "total_fuel_l",
    "duration_s",
    "mean_speed_kmh",
    "engine_thermal_l_ha",
    "transmission_l_ha",
    "rolling_resistance_l_ha",
    "slip_l_ha",
    "tillage_l_ha",
    "closure",
    "power_limited_share",
    "max_fixed_point_iterations",
    "frames_per_second",
];

fn summary_row(s: &RunSummary) -> Vec<String> {
    let f = |x: f64| format!("{x:.6}");
    vec![
        s.scenario.clone(),
        mode_label(s.mode),
        f(s.fuel_l_ha),
        f(s.time_min_ha),
        f(s.total_fuel_l),
        f(s.duration_s),
        f(s.mean_speed_kmh),
        f(s.energy.engine_thermal),
        f(s.energy.transmission),
        f(s.energy.rolling_resistance),
        f(s.energy.slip),
        f(s.energy.tillage),
        format!("{:.3e}", s.closure),
        f(s.power_limited_share),
        s.max_fixed_point_iterations.to_string(),
        f(s.frames_per_second),
    ]
}

pub fn write_summaries<W: Write>(summaries: &[&RunSummary], w: W) -> Result<(), csv::Error> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(SUMMARY_HEADER)?;
    for s in summaries {
        out.write_record(summary_row(s))?;
    }
    out.flush()?;
    Ok(())
}

/// One row per scenario in the layout of the results table.
pub fn write_comparison_csv<W: Write>(cmp: &[Comparison], w: W) -> Result<(), csv::Error> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "scenario",
        "implement",
        "baseline_fuel_l_ha",
        "baseline_time_min_ha",
        "ecotim_fuel_l_ha",
        "ecotim_time_min_ha",
        "fuel_change_pct",
        "time_change_pct",
    ])?;
    for c in cmp {
        let f = |x: f64| format!("{x:.4}");
        out.write_record([
            c.scenario.clone(),
            c.implement.clone(),
            f(c.baseline.fuel_l_ha),
            f(c.baseline.time_min_ha),
            f(c.ecotim.fuel_l_ha),
            f(c.ecotim.time_min_ha),
            f(c.fuel_change_pct),
            f(c.time_change_pct),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Tidy sweep data: one row per scenario and setpoint, EcoTIM rows included.
pub fn write_sweep_csv<W: Write>(cmp: &[Comparison], w: W) -> Result<(), csv::Error> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["scenario", "mode", "v_set_kmh", "fuel_l_ha", "time_min_ha"])?;
    for c in cmp {
        for s in c.sweep.iter().chain(std::iter::once(&c.ecotim)) {
            let v = match s.mode {
                Mode::Baseline { v_set } => format!("{v_set}"),
                Mode::Ecotim => String::new(),
            };
            let mode = if v.is_empty() { "ecotim" } else { "baseline" };
            out.write_record([
                c.scenario.clone(),
                mode.to_string(),
                v,
                format!("{:.4}", s.fuel_l_ha),
                format!("{:.4}", s.time_min_ha),
            ])?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Aligned text table.
pub fn comparison_table(cmp: &[Comparison]) -> String {
    let mut t = format!(
        "{:<4} {:<32} {:>10} {:>10} {:>10} {:>10} {:>8} {:>8}\n",
        "", "Implement", "BL L/ha", "BL min/ha", "Eco L/ha", "Eco min/ha", "dFuel%", "dTime%"
    );
    for c in cmp {
        t += &format!(
            "{:<4} {:<32} {:>10.1} {:>10.1} {:>10.1} {:>10.1} {:>8.1} {:>8.1}\n",
            c.scenario,
            c.implement,
            c.baseline.fuel_l_ha,
            c.baseline.time_min_ha,
            c.ecotim.fuel_l_ha,
            c.ecotim.time_min_ha,
            c.fuel_change_pct,
            c.time_change_pct
        );
    }
    t
}

/// Writes `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path.file_name().ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "no file name"))?;
    let tmp: PathBuf = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)
}

/// Paths of the files written for a single run.
#[derive(Debug, Clone)]
pub struct RunFiles {
    pub trace: PathBuf,
    pub summary: PathBuf,
    pub manifest: PathBuf,
}

pub fn write_run(dir: &Path, manifest: &Manifest, out: &RunOutput) -> anyhow::Result<RunFiles> {
    let files = RunFiles {
        trace: dir.join("trace.csv"),
        summary: dir.join("summary.csv"),
        manifest: dir.join("manifest.json"),
    };
    let mut buf = Vec::new();
    write_trace(&out.records, &mut buf)?;
    write_atomic(&files.trace, &buf)?;
    buf.clear();
    write_summaries(&[&out.summary], &mut buf)?;
    write_atomic(&files.summary, &buf)?;
    write_atomic(&files.manifest, serde_json::to_string_pretty(manifest)?.as_bytes())?;
    Ok(files)
}
