//! `swarmsim` command-line tool: run scenarios, list configurations and
//! check mission files.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use swarmsim::runner::{self, RunError, RunRequest};
use swarmsim::sim::SimOptions;
use swarmsim::time::SimTime;

#[derive(Debug, Parser)]
#[command(name = "swarmsim", version, about = "Deterministic UAV swarm data-collection simulator")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Run one scenario and write traces plus summary.json.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Named configuration; `General` runs the [General] section alone.
        #[arg(long, default_value = "General")]
        scenario: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Horizon such as `600s` or `1500ms`; defaults to the scenario's
        /// sim-time-limit.
        #[arg(long, value_parser = parse_time)]
        until: Option<SimTime>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Interval between POSITION samples; `0s` disables them.
        #[arg(long, value_parser = parse_time, default_value = "1s")]
        position_interval: SimTime,
        /// Skip TX and RX records.
        #[arg(long)]
        no_message_trace: bool,
    },
    /// List the named configurations in a scenario file.
    ListConfigs {
        #[arg(long)]
        config: PathBuf,
    },
    /// Parse a mission file and print its geometry.
    ValidateMission { path: PathBuf },
}

fn parse_time(text: &str) -> Result<SimTime, String> {
    let t = text.trim();
    let (num, scale) = if let Some(n) = t.strip_suffix("ms") {
        (n, 1e-3)
    } else if let Some(n) = t.strip_suffix('s') {
        (n, 1.0)
    } else {
        (t, 1.0)
    };
    let v: f64 = num.trim().parse().map_err(|_| format!("`{text}` is not a duration"))?;
    if !v.is_finite() || v < 0.0 {
        return Err(format!("`{text}` must be a non-negative duration"));
    }
    Ok(SimTime::from_secs_f64(v * scale))
}

fn fail(e: RunError) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(e.exit_code() as u8)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match cli.command {
        Cmd::Run { config, scenario, seed, until, out, position_interval, no_message_trace } => {
            let req = RunRequest {
                config,
                scenario,
                seed,
                until,
                out_dir: out.clone(),
                options: SimOptions {
                    position_interval: (position_interval > SimTime::ZERO).then_some(position_interval),
                    trace_messages: !no_message_trace,
                    event_log: false,
                },
            };
            match runner::run(&req) {
                Ok(report) => {
                    log::info!("wall time {:?}", report.wall_time);
                    println!(
                        "{} seed {}: {} events to t={}, ground received {} units; output in {}",
                        report.scenario,
                        report.seed,
                        report.events_processed,
                        report.sim_end_time,
                        report.totals.ground_data_received,
                        out.display()
                    );
                    ExitCode::SUCCESS
                }
                Err(e) => fail(e),
            }
        }
        Cmd::ListConfigs { config } => match runner::list(&config) {
            Ok(rows) => {
                print!("{}", runner::format_listing(&rows));
                ExitCode::SUCCESS
            }
            Err(e) => fail(e),
        },
        Cmd::ValidateMission { path } => match runner::validate_mission(&path) {
            Ok(summary) => {
                println!("{summary}");
                ExitCode::SUCCESS
            }
            Err(e) => fail(e),
        },
    }
}
