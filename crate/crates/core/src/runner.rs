//! Run orchestration behind the command-line tool.
//!
//! Exit codes: 2 for configuration, mission or world-building errors, 3 for
//! an attempt to run an abstract configuration, 1 for output failures.

use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Instant;

use thiserror::Error;

use crate::config::{list_configs, ConfigError, ConfigListing, ScenarioConfig};
use crate::mission::{parse_mission_file, Coord3, MissionError};
use crate::report::{ReportError, RunReport};
use crate::sim::{build_world, MissionSource, SimOptions, Simulation, SpecError};
use crate::time::SimTime;
use crate::trace::{write_trace, TraceError};

/// Horizon used when neither the caller nor the scenario sets one.
pub const DEFAULT_UNTIL: SimTime = SimTime::from_secs(600);

/// Scenario parameter holding the run horizon.
pub const TIME_LIMIT_KEY: &str = "sim-time-limit";

pub const SUMMARY_FILE: &str = "summary.json";

#[derive(Debug, Error)]
pub enum RunError {
    #[error("{path}: {source}")]
    Config { path: String, source: ConfigError },
    #[error("{path}: {source}")]
    World { path: String, source: SpecError },
    #[error("{path}: {source}")]
    Mission { path: String, source: MissionError },
    #[error("configuration `{0}` is abstract and cannot be run")]
    AbstractScenario(String),
    #[error("writing traces: {0}")]
    Trace(#[from] TraceError),
    #[error(transparent)]
    Report(#[from] ReportError),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config { .. } | RunError::World { .. } | RunError::Mission { .. } => 2,
            RunError::AbstractScenario(_) => 3,
            RunError::Trace(_) | RunError::Report(_) => 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunRequest {
    pub config: PathBuf,
    pub scenario: String,
    pub seed: u64,
    /// `None` takes the scenario's `sim-time-limit`, else [`DEFAULT_UNTIL`].
    pub until: Option<SimTime>,
    pub out_dir: PathBuf,
    pub options: SimOptions,
}

fn load_config(path: &Path) -> Result<ScenarioConfig, RunError> {
    ScenarioConfig::from_file(path).map_err(|source| RunError::Config { path: path.display().to_string(), source })
}

/// Builds the world for a scenario without running it.
pub fn prepare(req: &RunRequest) -> Result<(Simulation, SimTime), RunError> {
    let path = req.config.display().to_string();
    let cfg = load_config(&req.config)?;
    let scn = cfg.scenario(&req.scenario).map_err(|source| RunError::Config { path: path.clone(), source })?;
    if scn.is_abstract() {
        return Err(RunError::AbstractScenario(req.scenario.clone()));
    }
    let until = match req.until {
        Some(t) => t,
        None => {
            let mut rng = crate::rng::RngFactory::new(req.seed).stream("config");
            let secs = scn
                .seconds_or(TIME_LIMIT_KEY, DEFAULT_UNTIL.as_secs_f64(), &mut rng)
                .map_err(|source| RunError::Config { path: path.clone(), source })?;
            SimTime::from_secs_f64(secs)
        }
    };
    let base = req.config.parent().map(Path::to_path_buf).unwrap_or_default();
    let mut missions = MissionSource::new(base);
    let world = build_world(&scn, &mut missions, req.seed).map_err(|source| RunError::World { path: path.clone(), source })?;
    let sim = Simulation::new(&world, req.options.clone()).map_err(|source| RunError::World { path, source })?;
    Ok((sim, until))
}

/// Runs a scenario to its horizon and writes the traces and `summary.json`
/// into `out_dir`.
pub fn run(req: &RunRequest) -> Result<RunReport, RunError> {
    let started = Instant::now();
    let (mut sim, until) = prepare(req)?;
    sim.run_until(until);
    let report = RunReport::from_sim(&sim, started.elapsed());
    write_trace(&req.out_dir, sim.trace())?;
    report.write(&req.out_dir.join(SUMMARY_FILE))?;
    Ok(report)
}

pub fn list(path: &Path) -> Result<Vec<ConfigListing>, RunError> {
    let cfg = load_config(path)?;
    // Surface cycles and dangling bases as errors rather than empty chains.
    for c in &cfg.named {
        cfg.extends_chain(&c.name).map_err(|source| RunError::Config { path: path.display().to_string(), source })?;
    }
    Ok(list_configs(&cfg))
}

/// Human-readable `list-configs` output.
pub fn format_listing(rows: &[ConfigListing]) -> String {
    if rows.is_empty() {
        return "no named configurations\n".to_string();
    }
    let mut out = String::new();
    for r in rows {
        out.push_str(&r.name);
        if !r.chain.is_empty() {
            out.push_str(" extends ");
            out.push_str(&r.chain.join(" -> "));
        }
        if r.is_abstract {
            out.push_str(" (abstract)");
        }
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct MissionSummary {
    pub waypoints: usize,
    pub tour_points: usize,
    pub tour_length: f64,
    pub bounds: (Coord3, Coord3),
}

impl fmt::Display for MissionSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (lo, hi) = self.bounds;
        write!(
            f,
            "{} waypoints, tour {:.1} m, bounds ({:.1}, {:.1}, {:.1}) to ({:.1}, {:.1}, {:.1})",
            self.waypoints, self.tour_length, lo.x, lo.y, lo.z, hi.x, hi.y, hi.z
        )
    }
}

pub fn validate_mission(path: &Path) -> Result<MissionSummary, RunError> {
    let m = parse_mission_file(path).map_err(|source| RunError::Mission { path: path.display().to_string(), source })?;
    Ok(MissionSummary {
        waypoints: m.waypoints().len(),
        tour_points: m.tour_len(),
        tour_length: m.tour_length(),
        bounds: m.bounding_box(),
    })
}
