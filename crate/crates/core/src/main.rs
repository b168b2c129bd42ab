use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};

use camcrew::metrics::{evaluate, report_text};
use camcrew::output::{self, EVENTS_FILE, METRICS_FILE, REPORT_FILE, SCENARIO_FILE, STORAGE_FILE, TIMELINE_FILE};
use camcrew::scenario::{load_scenario, parse_scenario, Scenario};
use camcrew::scene::{CameraId, CameraKind};
use camcrew::sim::{calibration_for, run_with, RunOptions};

#[derive(Parser)]
#[command(name = "camcrew", version, about = "Autonomous camera crew simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write timeline, events, metrics and reports.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Overrides the scenario tick.
        #[arg(long)]
        tick_ms: Option<u64>,
        #[arg(long, default_value = "run")]
        out: PathBuf,
        /// Also write every frame and foreground mask as PGM under `<out>/frames`.
        #[arg(long)]
        dump_frames: bool,
    },
    /// Build the calibration table of a PTZ camera.
    Calibrate {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value_t = 5)]
        grid: usize,
        #[arg(long, default_value_t = 3)]
        zooms: usize,
        #[arg(long)]
        out: PathBuf,
        /// PTZ camera id; defaults to the first one in the scenario.
        #[arg(long)]
        camera: Option<String>,
    },
    /// Recompute metrics and reports for an existing run directory.
    Report {
        #[arg(long)]
        run: PathBuf,
    },
}

fn main() -> anyhow::Result<()> {
    match Cli::parse().command {
        Command::Simulate {
            scenario,
            seed,
            tick_ms,
            out,
            dump_frames,
        } => simulate(&scenario, seed, tick_ms, &out, dump_frames),
        Command::Calibrate {
            scenario,
            grid,
            zooms,
            out,
            camera,
        } => {
            let s = load_scenario(&scenario)?;
            let ptz = match camera {
                Some(id) => CameraId::new(&id),
                None => match s.cameras.iter().find(|c| c.kind == CameraKind::Ptz) {
                    Some(c) => c.id.clone(),
                    None => bail!("{} has no ptz camera", scenario.display()),
                },
            };
            let table = calibration_for(&s, &ptz, grid, zooms)?;
            output::write_text(&out, &table.to_text())?;
            println!("wrote {} samples for `{ptz}` to {}", table.samples.len(), out.display());
            Ok(())
        }
        Command::Report { run } => {
            let text = std::fs::read_to_string(run.join(SCENARIO_FILE))
                .with_context(|| format!("reading {}", run.join(SCENARIO_FILE).display()))?;
            let s = parse_scenario(&text)?;
            let samples = output::read_timeline(&run.join(TIMELINE_FILE))?;
            let events = output::read_events(&run.join(EVENTS_FILE))?;
            let ledger = output::ledger_from_events(&events, s.params.bitrate);
            let report = write_reports(&run, &s, &samples, &ledger)?;
            print!("{report}");
            Ok(())
        }
    }
}

fn simulate(path: &Path, seed: u64, tick_ms: Option<u64>, out: &Path, dump_frames: bool) -> anyhow::Result<()> {
    let mut text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    if let Some(ms) = tick_ms {
        if ms == 0 {
            bail!("--tick-ms must be positive");
        }
        text.push_str(&format!("\n[params]\ntick = {}\n", ms as f64 / 1000.0));
    }
    let scenario = parse_scenario(&text).with_context(|| format!("loading {}", path.display()))?;
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let options = RunOptions {
        dump_frames: dump_frames.then(|| out.join("frames")),
    };
    let result = run_with(&scenario, seed, &options)?;
    output::write_text(&out.join(SCENARIO_FILE), &text)?;
    output::write_timeline(&out.join(TIMELINE_FILE), &result.samples)?;
    output::write_events(&out.join(EVENTS_FILE), &result.events)?;
    let report = write_reports(out, &scenario, &result.samples, &result.ledger)?;
    print!("{report}");
    Ok(())
}

fn write_reports(
    dir: &Path,
    scenario: &Scenario,
    samples: &[camcrew::sim::TimelineSample],
    ledger: &camcrew::recorder::StorageLedger,
) -> anyhow::Result<String> {
    let metrics = evaluate(samples, scenario, scenario.params.sample_period, ledger);
    let report = report_text(&metrics, ledger);
    output::write_metrics(&dir.join(METRICS_FILE), &metrics)?;
    output::write_text(&dir.join(REPORT_FILE), &report)?;
    output::write_text(&dir.join(STORAGE_FILE), &output::storage_text(ledger, metrics.total_camera_seconds))?;
    Ok(report)
}
