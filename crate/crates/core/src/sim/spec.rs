//! Resolved description of a world: every node with its modules' settings.
//!
//! Scenario parameters are looked up per node, for example
//! `quads[2].mobility.speed`, so any pattern in the file may target them.
//! Resolution happens in a fixed order (globals, then quads, sensors and
//! the ground station by index) so that random draws are reproducible.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use thiserror::Error;

use crate::config::{ConfigError, ParamValue, Scenario};
use crate::failures::FailureConfigError;
use crate::mission::{parse_mission_file, Coord3, Mission, MissionError};
use crate::network::{RadioConfig, RadioConfigError};
use crate::protocols::{ProtocolParams, UnknownProtocol, PROTOCOL_NAMES};
use crate::rng::{RngFactory, RngStream};
use crate::time::SimTime;

pub const GROUND_STATION: &str = "groundStation";

#[derive(Debug, Error)]
pub enum SpecError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{node}: mission: {source}")]
    Mission { node: String, source: MissionError },
    #[error("{node}: {source}")]
    Protocol { node: String, source: UnknownProtocol },
    #[error("{node}: {source}")]
    Failure { node: String, source: FailureConfigError },
    #[error(transparent)]
    Radio(#[from] RadioConfigError),
    #[error("{node}: unknown destination `{target}`")]
    UnknownDestination { node: String, target: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NodeKind {
    Uav,
    Sensor,
    Ground,
}

impl NodeKind {
    pub fn name(self) -> &'static str {
        match self {
            NodeKind::Uav => "UAV",
            NodeKind::Sensor => "SENSOR",
            NodeKind::Ground => "GROUND",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Placement {
    Drone { mission: Arc<Mission>, speed: f64, start_time: SimTime },
    Fixed(Coord3),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergySpec {
    pub capacity: f64,
    pub drain_flying: f64,
    pub drain_idle: f64,
    pub rth_threshold: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeSpec {
    pub name: String,
    pub kind: NodeKind,
    pub protocol: String,
    pub params: ProtocolParams,
    pub placement: Placement,
    pub send_interval: SimTime,
    pub app_start: SimTime,
    /// Names of unicast destinations for the periodic sender; `None` means
    /// the protocol's own choice.
    pub destinations: Option<Vec<String>>,
    pub energy: Option<EnergySpec>,
    pub shutdown_time: Option<SimTime>,
}

impl NodeSpec {
    pub fn new(name: impl Into<String>, kind: NodeKind, protocol: impl Into<String>, placement: Placement) -> Self {
        NodeSpec {
            name: name.into(),
            kind,
            protocol: protocol.into(),
            params: ProtocolParams::default(),
            placement,
            send_interval: SimTime::from_secs(1),
            app_start: SimTime::ZERO,
            destinations: None,
            energy: None,
            shutdown_time: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorldSpec {
    pub scenario: String,
    pub seed: u64,
    pub radio: RadioConfig,
    /// Node ids are positions in this list.
    pub nodes: Vec<NodeSpec>,
}

impl WorldSpec {
    pub fn new(scenario: impl Into<String>, seed: u64) -> Self {
        WorldSpec { scenario: scenario.into(), seed, radio: RadioConfig::default(), nodes: Vec::new() }
    }

    pub fn push(&mut self, node: NodeSpec) -> &mut Self {
        self.nodes.push(node);
        self
    }

    pub fn node_index(&self, name: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n.name == name)
    }

    pub fn names(&self) -> Vec<String> {
        self.nodes.iter().map(|n| n.name.clone()).collect()
    }
}

/// Where `mobility.waypointFile` values are looked up: missions registered
/// in memory by name first, then files relative to `base_dir`.
#[derive(Debug, Clone, Default)]
pub struct MissionSource {
    pub base_dir: PathBuf,
    registered: BTreeMap<String, Arc<Mission>>,
    cache: BTreeMap<PathBuf, Arc<Mission>>,
}

impl MissionSource {
    pub fn new(base_dir: impl Into<PathBuf>) -> Self {
        MissionSource { base_dir: base_dir.into(), ..Default::default() }
    }

    pub fn register(mut self, name: impl Into<String>, mission: Mission) -> Self {
        self.registered.insert(name.into(), Arc::new(mission));
        self
    }

    pub fn load(&mut self, name: &str) -> Result<Arc<Mission>, MissionError> {
        if let Some(m) = self.registered.get(name) {
            return Ok(m.clone());
        }
        let path = if Path::new(name).is_absolute() { PathBuf::from(name) } else { self.base_dir.join(name) };
        if let Some(m) = self.cache.get(&path) {
            return Ok(m.clone());
        }
        let m = Arc::new(parse_mission_file(&path)?);
        self.cache.insert(path, m.clone());
        Ok(m)
    }
}

fn secs(v: f64) -> SimTime {
    SimTime::from_secs_f64(v)
}

fn positive(path: &str, v: f64) -> Result<f64, ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(ConfigError::Invalid { path: path.to_string(), reason: format!("must be positive, got {v}") })
    }
}

fn count(scn: &Scenario<'_>, path: &str, default: i64) -> Result<usize, ConfigError> {
    let n = scn.int_or(path, default)?;
    usize::try_from(n)
        .map_err(|_| ConfigError::Invalid { path: path.to_string(), reason: format!("must be non-negative, got {n}") })
}

/// Names listed in `app.destAddresses`, separated by spaces or commas.
fn destinations(scn: &Scenario<'_>, path: &str) -> Result<Option<Vec<String>>, ConfigError> {
    match scn.lookup(path)?.map(|e| &e.value) {
        None => Ok(None),
        Some(ParamValue::Str(s)) => {
            Ok(Some(s.split([' ', ',']).map(str::trim).filter(|s| !s.is_empty()).map(str::to_string).collect()))
        }
        Some(other) => {
            Err(ConfigError::TypeMismatch { path: path.to_string(), expected: "a list of node names", found: other.to_string() })
        }
    }
}

struct Resolver<'s, 'a> {
    scn: &'s Scenario<'a>,
    rng: RngStream,
    failure_rng: RngStream,
}

impl Resolver<'_, '_> {
    fn node(&mut self, name: &str, kind: NodeKind, default_protocol: &str, placement: Placement) -> Result<NodeSpec, SpecError> {
        let scn = self.scn;
        let rng = &mut self.rng;
        let p = |leaf: &str| format!("{name}.{leaf}");
        let protocol = scn.string_or(&p("protocol.typename"), default_protocol)?;
        if !PROTOCOL_NAMES.contains(&protocol.as_str()) {
            return Err(SpecError::Protocol { node: name.to_string(), source: UnknownProtocol(protocol) });
        }
        let mut node = NodeSpec::new(name, kind, protocol, placement);
        let quiet = scn.seconds_or(&p("protocol.quietTime"), node.params.quiet_time, rng)?;
        node.params = ProtocolParams {
            quiet_time: positive(&p("protocol.quietTime"), quiet)?,
            data_length: count(scn, &p("protocol.dataLength"), node.params.data_length as i64)? as u64,
            generation_interval: secs(scn.seconds_or(&p("protocol.generationInterval"), 0.0, rng)?),
        };
        let interval = scn.seconds_or(&p("app.sendInterval"), 1.0, rng)?;
        node.send_interval = secs(positive(&p("app.sendInterval"), interval)?);
        node.app_start = secs(scn.seconds_or(&p("app.startTime"), 0.0, rng)?);
        node.destinations = destinations(scn, &p("app.destAddresses"))?;
        if scn.contains(&p("energy.capacity"))? {
            node.energy = Some(EnergySpec {
                capacity: scn.real(&p("energy.capacity"), rng)?,
                drain_flying: scn.real_or(&p("energy.drainFlying"), 1.0, rng)?,
                drain_idle: scn.real_or(&p("energy.drainIdle"), 0.0, rng)?,
                rth_threshold: scn.real_or(&p("energy.rthThreshold"), 0.2, rng)?,
            });
        }
        if scn.contains(&p("failure.shutdownTime"))? {
            node.shutdown_time = Some(secs(scn.seconds_or(&p("failure.shutdownTime"), 0.0, &mut self.failure_rng)?));
        }
        Ok(node)
    }

    /// `mobility.initialX/Y/Z` if any is set.
    fn fixed_position(&mut self, name: &str) -> Result<Option<Coord3>, ConfigError> {
        let keys = ["initialX", "initialY", "initialZ"].map(|k| format!("{name}.mobility.{k}"));
        let mut any = false;
        for k in &keys {
            any |= self.scn.contains(k)?;
        }
        if !any {
            return Ok(None);
        }
        let mut c = [0.0; 3];
        for (v, k) in c.iter_mut().zip(&keys) {
            *v = self.scn.real_or(k, 0.0, &mut self.rng)?;
        }
        Ok(Some(Coord3::new(c[0], c[1], c[2])))
    }
}

/// Builds the world for `scn`. Distributions are drawn from the `config`
/// stream, except failure times, which use their own `failure` stream so
/// that enabling failures leaves every other draw unchanged.
///
/// Without explicit positions, sensor `i` of `n` sits at fraction
/// `(i + 1) / (n + 1)` along the first UAV's tour and the ground station at
/// that mission's home.
pub fn build_world(scn: &Scenario<'_>, missions: &mut MissionSource, seed: u64) -> Result<WorldSpec, SpecError> {
    let rngs = RngFactory::new(seed);
    let mut r = Resolver { scn, rng: rngs.stream("config"), failure_rng: rngs.stream("failure") };
    let mut world = WorldSpec::new(scn.name(), seed);

    let num_uavs = count(scn, "numUAVs", 1)?;
    let num_sensors = count(scn, "numSensors", 0)?;
    let d = RadioConfig::default();
    world.radio = RadioConfig {
        range: scn.real_or("radio.range", d.range, &mut r.rng)?,
        loss_probability: scn.real_or("radio.lossProbability", d.loss_probability, &mut r.rng)?,
        delay_fixed: secs(scn.seconds_or("radio.propagationDelay", d.delay_fixed.as_secs_f64(), &mut r.rng)?),
        delay_per_meter: scn.real_or("radio.delayPerMeter", d.delay_per_meter, &mut r.rng)?,
    };
    world.radio.validate()?;

    let mut first_tour: Option<Arc<Mission>> = None;
    for i in 0..num_uavs {
        let name = format!("quads[{i}]");
        let file = scn.string(&format!("{name}.mobility.waypointFile"))?;
        let mission = missions.load(&file).map_err(|source| SpecError::Mission { node: name.clone(), source })?;
        first_tour.get_or_insert_with(|| mission.clone());
        let speed_path = format!("{name}.mobility.speed");
        let speed = positive(&speed_path, scn.real_or(&speed_path, 10.0, &mut r.rng)?)?;
        let start_time = secs(scn.seconds_or(&format!("{name}.mobility.startTime"), 0.0, &mut r.rng)?);
        let placement = Placement::Drone { mission, speed, start_time };
        world.nodes.push(r.node(&name, NodeKind::Uav, "ZigzagProtocol", placement)?);
    }
    for i in 0..num_sensors {
        let name = format!("sensors[{i}]");
        let position = match r.fixed_position(&name)? {
            Some(p) => p,
            None => match &first_tour {
                Some(t) => t.point_at_fraction((i + 1) as f64 / (num_sensors + 1) as f64).position,
                None => Coord3::default(),
            },
        };
        world.nodes.push(r.node(&name, NodeKind::Sensor, "ZigzagProtocolSensor", Placement::Fixed(position))?);
    }
    let position = match r.fixed_position(GROUND_STATION)? {
        Some(p) => p,
        None => first_tour.as_ref().map(|t| t.home()).unwrap_or_default(),
    };
    world.nodes.push(r.node(GROUND_STATION, NodeKind::Ground, "GroundStationProtocol", Placement::Fixed(position))?);

    for node in &world.nodes {
        for target in node.destinations.iter().flatten() {
            if world.node_index(target).is_none() {
                return Err(SpecError::UnknownDestination { node: node.name.clone(), target: target.clone() });
            }
        }
        if let Some(e) = &node.energy {
            crate::failures::EnergyModel::new(e.capacity, e.drain_flying, e.drain_idle, e.rth_threshold)
                .map_err(|source| SpecError::Failure { node: node.name.clone(), source })?;
        }
    }
    Ok(world)
}
