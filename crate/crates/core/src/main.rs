use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use ecotim::config::{RunConfig, Scenario};
use ecotim::report::{self, Manifest};
use ecotim::sim::{Mode, Simulator};

#[derive(Parser)]
#[command(name = "ecotim", version, about = "Tractor-implement ground-speed optimisation simulator")]
struct Cli {
    /// Run configuration TOML; missing keys take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, env = "ECOTIM_OUT_DIR", default_value = "out")]
    out_dir: PathBuf,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Ecotim,
    Baseline,
}

#[derive(Subcommand)]
enum Cmd {
    /// Simulate one scenario and write trace, summary and manifest.
    Run {
        /// S1..S6 or a scenario TOML file.
        scenario: String,
        #[arg(long, value_enum, default_value = "ecotim")]
        mode: ModeArg,
        /// Baseline setpoint [km/h]; defaults to the scenario baseline speed.
        #[arg(long)]
        speed: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Baseline against EcoTIM for every built-in scenario, with the speed sweep.
    Compare {
        /// Run all six scenarios (the default when no scenario is given).
        #[arg(long)]
        all: bool,
        /// Limit to these scenarios.
        #[arg(long = "scenario")]
        scenarios: Vec<String>,
        #[arg(long)]
        seed: Option<u64>,
        /// Print the summary as JSON instead of a table.
        #[arg(long)]
        json: bool,
    },
    /// Repeat a run from its manifest.
    Replay { manifest: PathBuf },
    /// Export the test track as CSV.
    Track {
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn load_config(path: Option<&PathBuf>, seed: Option<u64>) -> Result<RunConfig> {
    let mut c = match path {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = seed {
        c.seed = s;
    }
    Ok(c)
}

fn run(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::Run { scenario, mode, speed, seed } => {
            let s = Scenario::resolve(&scenario)?;
            let config = load_config(cli.config.as_ref(), seed)?;
            let mode = match mode {
                ModeArg::Ecotim => {
                    if speed.is_some() {
                        bail!("--speed applies to baseline runs only");
                    }
                    Mode::Ecotim
                }
                ModeArg::Baseline => Mode::Baseline { v_set: speed.unwrap_or(s.v_baseline) },
            };
            let manifest = Manifest::new(s, mode, config);
            let out = manifest.execute()?;
            let files = report::write_run(&cli.out_dir, &manifest, &out)?;
            let m = &out.summary;
            println!(
                "{} {}: {:.2} L/ha, {:.1} min/ha, closure {:.1e}",
                m.scenario,
                if matches!(m.mode, Mode::Ecotim) { "ecotim" } else { "baseline" },
                m.fuel_l_ha,
                m.time_min_ha,
                m.closure
            );
            println!("wrote {}", files.trace.parent().unwrap_or(&cli.out_dir).display());
        }
        Cmd::Compare { all, scenarios, seed, json } => {
            let list = if all || scenarios.is_empty() {
                Scenario::all_builtin()
            } else {
                scenarios.iter().map(|s| Scenario::resolve(s)).collect::<Result<_, _>>()?
            };
            let sim = Simulator::new(load_config(cli.config.as_ref(), seed)?)?;
            let cmp = report::compare_all(&sim, &list)?;
            let dir = &cli.out_dir;
            let mut buf = Vec::new();
            report::write_comparison_csv(&cmp, &mut buf)?;
            report::write_atomic(&dir.join("comparison.csv"), &buf)?;
            buf.clear();
            report::write_sweep_csv(&cmp, &mut buf)?;
            report::write_atomic(&dir.join("sweep.csv"), &buf)?;
            let table = report::comparison_table(&cmp);
            report::write_atomic(&dir.join("comparison.txt"), table.as_bytes())?;
            let js = serde_json::to_string_pretty(&cmp)?;
            report::write_atomic(&dir.join("comparison.json"), js.as_bytes())?;
            if json {
                println!("{js}");
            } else {
                print!("{table}");
            }
        }
        Cmd::Replay { manifest } => {
            let text = std::fs::read_to_string(&manifest).with_context(|| format!("reading {}", manifest.display()))?;
            let m: Manifest = serde_json::from_str(&text).context("parsing manifest")?;
            let out = m.execute()?;
            report::write_run(&cli.out_dir, &m, &out)?;
            println!("{}: {:.2} L/ha, {:.1} min/ha", m.scenario.id, out.summary.fuel_l_ha, out.summary.time_min_ha);
        }
        Cmd::Track { seed } => {
            let sim = Simulator::new(load_config(cli.config.as_ref(), seed)?)?;
            let track = sim.track()?;
            let mut buf = Vec::new();
            track.write_csv(&mut buf)?;
            let path = cli.out_dir.join(format!("track_seed{}.csv", track.seed));
            report::write_atomic(&path, &buf)?;
            println!(
                "seed {}: max grade {:.4}, elevation range {:.2} m -> {}",
                track.seed,
                track.max_abs_grade(),
                track.elevation_range(),
                path.display()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
