//! Scenario builders and observers shared by the integration tests.
#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Arc;

use swarmsim::mission::{Coord3, Mission};
use swarmsim::network::RadioConfig;
use swarmsim::sim::{NodeKind, NodeSpec, Placement, SimOptions, Simulation, WorldSpec, GROUND_STATION};
use swarmsim::time::SimTime;
use swarmsim::trace::TraceRecord;

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

pub fn line(len: f64) -> Arc<Mission> {
    Arc::new(Mission::from_points(&[Coord3::new(0.0, 0.0, 10.0), Coord3::new(len, 0.0, 10.0)]).unwrap())
}

pub fn secs(s: f64) -> SimTime {
    SimTime::from_secs_f64(s)
}

/// A swarm on one shared tour with sensors spread evenly along it and the
/// ground station at the tour start.
#[derive(Debug, Clone)]
pub struct Swarm {
    pub tour: Arc<Mission>,
    pub protocol: &'static str,
    pub starts: Vec<f64>,
    pub sensors: usize,
    pub data_length: u64,
    pub generation_interval: f64,
    pub quiet_time: f64,
    pub range: f64,
    pub loss: f64,
    pub speed: f64,
}

impl Swarm {
    pub fn new(protocol: &'static str, starts: Vec<f64>) -> Self {
        Swarm {
            tour: line(300.0),
            protocol,
            starts,
            sensors: 3,
            data_length: 5,
            generation_interval: 0.0,
            quiet_time: 5.0,
            range: 50.0,
            loss: 0.0,
            speed: 10.0,
        }
    }

    pub fn world(&self, seed: u64) -> WorldSpec {
        let mut w = WorldSpec::new("test", seed);
        w.radio = RadioConfig { range: self.range, loss_probability: self.loss, ..RadioConfig::default() };
        for (i, &s) in self.starts.iter().enumerate() {
            let mut n = NodeSpec::new(
                format!("quads[{i}]"),
                NodeKind::Uav,
                self.protocol,
                Placement::Drone { mission: self.tour.clone(), speed: self.speed, start_time: secs(s) },
            );
            n.params.quiet_time = self.quiet_time;
            w.push(n);
        }
        let sensor_protocol = if self.protocol.starts_with("Dadca") { "DadcaProtocolSensor" } else { "ZigzagProtocolSensor" };
        for i in 0..self.sensors {
            let p = self.tour.point_at_fraction((i + 1) as f64 / (self.sensors + 1) as f64).position;
            let mut n = NodeSpec::new(format!("sensors[{i}]"), NodeKind::Sensor, sensor_protocol, Placement::Fixed(p));
            n.params.data_length = self.data_length;
            n.params.generation_interval = secs(self.generation_interval);
            w.push(n);
        }
        w.push(NodeSpec::new(GROUND_STATION, NodeKind::Ground, "GroundStationProtocol", Placement::Fixed(self.tour.home())));
        w
    }

    pub fn sim(&self, seed: u64) -> Simulation {
        Simulation::new(&self.world(seed), SimOptions::default()).unwrap()
    }
}

/// One completed pairing, located at the midpoint of the two UAVs.
#[derive(Debug, Clone, Copy)]
pub struct Encounter {
    pub time: SimTime,
    pub fraction: f64,
    pub farther: u32,
    pub nearer: u32,
    /// Boundary fraction computed by the pair, if any.
    pub boundary: Option<f64>,
}

/// Runs `sim` to `until` one event at a time, calling `observe` after each.
pub fn step_until(sim: &mut Simulation, until: SimTime, mut observe: impl FnMut(&Simulation)) {
    while sim.step(until) {
        observe(sim);
    }
}

/// Runs to `until`, locating every pairing as it is recorded.
pub fn encounters(sim: &mut Simulation, tour: &Mission, until: SimTime) -> Vec<Encounter> {
    let mut out = Vec::new();
    let mut seen = sim.trace().len();
    step_until(sim, until, |s| {
        for r in &s.trace()[seen..] {
            if let TraceRecord::Pair { time, node, partner, farther: true, boundary, .. } = r {
                let a = s.position(*node as usize);
                let b = s.position(*partner as usize);
                let mid = a.lerp(&b, 0.5);
                out.push(Encounter {
                    time: *time,
                    fraction: tour.project(&mid) / tour.tour_length(),
                    farther: *node,
                    nearer: *partner,
                    boundary: *boundary,
                });
            }
        }
        seen = s.trace().len();
    });
    out
}

/// Distance from `f` to the nearest interior section boundary `k / n`.
pub fn off_boundary(f: f64, n: usize) -> f64 {
    (1..n).map(|k| (f - k as f64 / n as f64).abs()).fold(f64::INFINITY, f64::min)
}

/// Earliest encounter from which this and the next `2 (n - 1)` encounters
/// all lie within `tol` of a section boundary `k / n`.
pub fn time_to_equal_spacing(enc: &[Encounter], n: usize, tol: f64) -> Option<SimTime> {
    let window = 2 * (n - 1) + 1;
    enc.windows(window).find(|w| w.iter().all(|e| off_boundary(e.fraction, n) <= tol)).map(|w| w[0].time)
}

/// `(scenario, parameter path, expected value)` against
/// `fixtures/resolution.ini`; `None` means no entry matches.
pub const RESOLUTION_CASES: &[(&str, &str, Option<&str>)] = &[
    // An earlier general pattern shadows a later specific one.
    ("General", "quads[3].mobility.speed", Some("1")),
    ("General", "numUAVs", Some("1")),
    // An unindexed segment is index 0.
    ("General", "quads.app.startTime", Some("7s")),
    ("General", "radio.range", Some("100")),
    // Inherited from an abstract base.
    ("Mid", "radio.range", Some("60")),
    // A config's own entries come before [General].
    ("Mid", "numUAVs", Some("4")),
    // ...and before its bases.
    ("Mid", "quads[2].protocol.typename", Some("\"SimpleProtocol\"")),
    ("Mid", "quads[1].protocol.typename", Some("\"DadcaProtocol\"")),
    // Outside the index range, the next base entry applies.
    ("Mid", "quads[3].protocol.typename", Some("\"ZigzagProtocol\"")),
    // The deprecated `quad` spelling still matches, but comes second.
    ("Leaf", "quads[3].app.startTime", Some("3s")),
    ("Leaf", "quads[0].app.startTime", Some("3s")),
    // Two levels of extends.
    ("Leaf", "radio.range", Some("60")),
    ("Leaf", "sensors[2].protocol.dataLength", Some("5")),
    ("Leaf", "quads[1].mobility.speed", Some("1")),
    ("Leaf", "quads[0].mobility.waypointFile", None),
    // Bases are searched in declaration order.
    ("Multi", "radio.range", Some("70")),
    ("Multi", "numSensors", Some("6")),
    ("Multi", "quads[0].protocol.quietTime", Some("normal(40, 1)")),
    ("Other", "quads[0].protocol.typename", None),
];

/// Mismatches between the fixture file and [`RESOLUTION_CASES`].
pub fn resolution_mismatches() -> Vec<String> {
    let cfg = swarmsim::config::ScenarioConfig::from_file(&fixtures().join("resolution.ini")).unwrap();
    let mut bad = Vec::new();
    for &(scenario, path, expected) in RESOLUTION_CASES {
        let scn = cfg.scenario(scenario).unwrap();
        let got = scn.lookup(path).unwrap().map(|e| e.value.to_string());
        if got.as_deref() != expected {
            bad.push(format!("{scenario}/{path}: expected {expected:?}, got {got:?}"));
        }
    }
    bad
}
