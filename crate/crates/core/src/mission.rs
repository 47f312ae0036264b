//! Waypoint missions in a QGC-WPL-style text format and the tour geometry
//! derived from them.
//!
//! A file is one header line (`QGC WPL 110`) followed by tab-separated rows:
//!
//! ```text
//! index  current  frame  command  p1  p2  p3  p4  x/lat  y/lon  z/alt  autocontinue
//! ```
//!
//! Geodetic rows (frames 0, 3, 10) are projected to local east/north/up meters
//! around the first row with an equirectangular approximation. Frame 1 rows are
//! already local meters and are taken verbatim.
//!
//! The *tour* is the polyline through the `NAV_WAYPOINT` rows, in file order.
//! Waypoint ids exchanged with mobility and protocols index into the tour.

use std::fmt;
use std::fs;
use std::ops::{Add, Mul, Sub};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const WPL_HEADER: &str = "QGC WPL 110";

const EARTH_RADIUS_M: f64 = 6_371_000.0;

/// Local Cartesian position in meters: x east, y north, z up.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Coord3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Coord3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Coord3 { x, y, z }
    }

    pub fn distance(&self, other: &Coord3) -> f64 {
        (*self - *other).norm()
    }

    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn lerp(&self, to: &Coord3, t: f64) -> Coord3 {
        *self + (*to - *self) * t
    }

    fn dot(&self, o: &Coord3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }
}

impl Add for Coord3 {
    type Output = Coord3;
    fn add(self, o: Coord3) -> Coord3 {
        Coord3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Coord3 {
    type Output = Coord3;
    fn sub(self, o: Coord3) -> Coord3 {
        Coord3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Coord3 {
    type Output = Coord3;
    fn mul(self, k: f64) -> Coord3 {
        Coord3::new(self.x * k, self.y * k, self.z * k)
    }
}

impl fmt::Display for Coord3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:.3}, {:.3}, {:.3})", self.x, self.y, self.z)
    }
}

/// Supported MAVLink command subset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MavCommand {
    NavWaypoint,
    NavReturnToLaunch,
    NavTakeoff,
}

impl MavCommand {
    pub fn code(self) -> u16 {
        match self {
            MavCommand::NavWaypoint => 16,
            MavCommand::NavReturnToLaunch => 20,
            MavCommand::NavTakeoff => 22,
        }
    }

    pub fn from_code(code: u16) -> Option<Self> {
        match code {
            16 => Some(MavCommand::NavWaypoint),
            20 => Some(MavCommand::NavReturnToLaunch),
            22 => Some(MavCommand::NavTakeoff),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub index: usize,
    pub command: MavCommand,
    pub position: Coord3,
    /// Dwell time in seconds on arrival.
    pub hold: f64,
}

#[derive(Debug, Error, PartialEq)]
pub enum MissionError {
    #[error("line 1: expected header `{WPL_HEADER}`")]
    BadHeader,
    #[error("line {line}: {reason}")]
    BadRow { line: usize, reason: String },
    #[error("line {line}: unsupported MAV command {code}")]
    UnsupportedCommand { line: usize, code: i64 },
    #[error("line {line}: unsupported coordinate frame {frame}")]
    UnsupportedFrame { line: usize, frame: i64 },
    #[error("mission has no waypoints")]
    EmptyMission,
    #[error("mission has no NAV_WAYPOINT rows")]
    NoNavWaypoint,
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

/// Parsed mission plus cached tour geometry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mission {
    waypoints: Vec<Waypoint>,
    home: Coord3,
    source_path: String,
    /// Indices into `waypoints` of the NAV_WAYPOINT rows.
    tour: Vec<usize>,
    /// `cumulative[i]` is the arc length from tour point 0 to tour point i.
    cumulative: Vec<f64>,
}

/// A point on the tour together with the segment that brackets it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TourPoint {
    pub position: Coord3,
    /// Tour index toward the end of the tour.
    pub next: usize,
    /// Tour index toward the start of the tour.
    pub last: usize,
}

impl Mission {
    /// Builds a mission directly from waypoints. The first waypoint is home.
    pub fn new(waypoints: Vec<Waypoint>) -> Result<Self, MissionError> {
        if waypoints.is_empty() {
            return Err(MissionError::EmptyMission);
        }
        let tour: Vec<usize> = waypoints
            .iter()
            .enumerate()
            .filter(|(_, w)| w.command == MavCommand::NavWaypoint)
            .map(|(i, _)| i)
            .collect();
        if tour.is_empty() {
            return Err(MissionError::NoNavWaypoint);
        }
        let mut cumulative = Vec::with_capacity(tour.len());
        let mut acc = 0.0;
        cumulative.push(0.0);
        for pair in tour.windows(2) {
            acc += waypoints[pair[0]].position.distance(&waypoints[pair[1]].position);
            cumulative.push(acc);
        }
        let home = waypoints[0].position;
        Ok(Mission { waypoints, home, source_path: String::new(), tour, cumulative })
    }

    /// Convenience for local-frame tours made only of NAV_WAYPOINT rows.
    pub fn from_points(points: &[Coord3]) -> Result<Self, MissionError> {
        let wps = points
            .iter()
            .enumerate()
            .map(|(index, p)| Waypoint { index, command: MavCommand::NavWaypoint, position: *p, hold: 0.0 })
            .collect();
        Mission::new(wps)
    }

    pub fn with_source_path(mut self, path: impl Into<String>) -> Self {
        self.source_path = path.into();
        self
    }

    pub fn waypoints(&self) -> &[Waypoint] {
        &self.waypoints
    }

    pub fn home(&self) -> Coord3 {
        self.home
    }

    pub fn source_path(&self) -> &str {
        &self.source_path
    }

    /// Number of points on the tour.
    pub fn tour_len(&self) -> usize {
        self.tour.len()
    }

    pub fn tour_point(&self, i: usize) -> Coord3 {
        self.waypoints[self.tour[i]].position
    }

    pub fn tour_hold(&self, i: usize) -> f64 {
        self.waypoints[self.tour[i]].hold
    }

    pub fn tour_points(&self) -> Vec<Coord3> {
        self.tour.iter().map(|&i| self.waypoints[i].position).collect()
    }

    /// Arc length from the tour start to tour point `i`.
    pub fn arc_length_to(&self, i: usize) -> f64 {
        self.cumulative[i]
    }

    pub fn tour_length(&self) -> f64 {
        *self.cumulative.last().expect("non-empty tour")
    }

    /// Position at arc length `f * tour_length`, with the bracketing segment.
    ///
    /// Segments are half-open, so a point exactly on an interior waypoint is
    /// reported on the segment that starts there. `f = 1` lands on the final
    /// waypoint with `next` equal to the last index.
    pub fn point_at_fraction(&self, f: f64) -> TourPoint {
        let n = self.tour.len();
        if n == 1 {
            return TourPoint { position: self.tour_point(0), next: 0, last: 0 };
        }
        let f = if f.is_nan() { 0.0 } else { f.clamp(0.0, 1.0) };
        let target = f * self.tour_length();
        for i in 0..n - 1 {
            let (c0, c1) = (self.cumulative[i], self.cumulative[i + 1]);
            if target >= c0 && target < c1 {
                let t = (target - c0) / (c1 - c0);
                let position = self.tour_point(i).lerp(&self.tour_point(i + 1), t);
                return TourPoint { position, next: i + 1, last: i };
            }
        }
        TourPoint { position: self.tour_point(n - 1), next: n - 1, last: n - 2 }
    }

    /// Arc length of the tour point closest to `p`.
    pub fn project(&self, p: &Coord3) -> f64 {
        let n = self.tour.len();
        if n == 1 {
            return 0.0;
        }
        let mut best = (f64::INFINITY, 0.0);
        for i in 0..n - 1 {
            let a = self.tour_point(i);
            let b = self.tour_point(i + 1);
            let ab = b - a;
            let len2 = ab.dot(&ab);
            let t = if len2 == 0.0 { 0.0 } else { ((*p - a).dot(&ab) / len2).clamp(0.0, 1.0) };
            let d = p.distance(&a.lerp(&b, t));
            if d < best.0 {
                best = (d, self.cumulative[i] + t * len2.sqrt());
            }
        }
        best.1
    }

    /// Bounding box of all waypoint positions as (min, max).
    pub fn bounding_box(&self) -> (Coord3, Coord3) {
        let mut lo = Coord3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY);
        let mut hi = Coord3::new(f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
        for w in &self.waypoints {
            let p = w.position;
            lo = Coord3::new(lo.x.min(p.x), lo.y.min(p.y), lo.z.min(p.z));
            hi = Coord3::new(hi.x.max(p.x), hi.y.max(p.y), hi.z.max(p.z));
        }
        (lo, hi)
    }

    /// Writes the mission back out in the local frame (frame 1).
    pub fn serialize(&self) -> String {
        let mut out = String::from(WPL_HEADER);
        out.push('\n');
        for w in &self.waypoints {
            let current = if w.index == 0 { 1 } else { 0 };
            let p1 = if w.command == MavCommand::NavWaypoint { w.hold } else { 0.0 };
            out.push_str(&format!(
                "{}\t{}\t1\t{}\t{}\t0\t0\t0\t{}\t{}\t{}\t1\n",
                w.index,
                current,
                w.command.code(),
                p1,
                w.position.x,
                w.position.y,
                w.position.z
            ));
        }
        out
    }
}

/// Sum of segment lengths between consecutive NAV_WAYPOINT positions.
pub fn tour_length(mission: &Mission) -> f64 {
    mission.tour_length()
}

#[derive(Clone, Copy, PartialEq)]
enum FrameKind {
    Local,
    GeodeticAmsl,
    GeodeticRelative,
}

fn frame_kind(code: i64) -> Option<FrameKind> {
    match code {
        0 => Some(FrameKind::GeodeticAmsl),
        3 | 10 => Some(FrameKind::GeodeticRelative),
        1 => Some(FrameKind::Local),
        _ => None,
    }
}

struct Origin {
    lat: f64,
    lon: f64,
    alt: f64,
}

fn bad_row(line: usize, reason: impl Into<String>) -> MissionError {
    MissionError::BadRow { line, reason: reason.into() }
}

fn parse_int(line: usize, col: &str, what: &str) -> Result<i64, MissionError> {
    let v: f64 = col.trim().parse().map_err(|_| bad_row(line, format!("{what}: `{col}` is not numeric")))?;
    if v.fract() != 0.0 || !v.is_finite() {
        return Err(bad_row(line, format!("{what}: `{col}` is not an integer")));
    }
    Ok(v as i64)
}

fn parse_real(line: usize, col: &str, what: &str) -> Result<f64, MissionError> {
    let v: f64 = col.trim().parse().map_err(|_| bad_row(line, format!("{what}: `{col}` is not numeric")))?;
    if !v.is_finite() {
        return Err(bad_row(line, format!("{what}: `{col}` is not finite")));
    }
    Ok(v)
}

/// Parses mission text. See the module docs for the format.
pub fn parse_mission(text: &str) -> Result<Mission, MissionError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, l)) if l.trim().starts_with("QGC WPL") => {}
        _ => return Err(MissionError::BadHeader),
    }

    let mut origin: Option<Origin> = None;
    let mut first_local = false;
    let mut waypoints: Vec<Waypoint> = Vec::new();

    for (i, raw) in lines {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = if raw.contains('\t') {
            raw.trim_end_matches(['\r', '\n']).split('\t').collect()
        } else {
            raw.split_whitespace().collect()
        };
        if cols.len() != 12 {
            return Err(bad_row(line, format!("expected 12 columns, found {}", cols.len())));
        }
        let index = parse_int(line, cols[0], "index")?;
        if index != waypoints.len() as i64 {
            return Err(bad_row(line, format!("index {index} out of sequence, expected {}", waypoints.len())));
        }
        let frame = parse_int(line, cols[2], "frame")?;
        let code = parse_int(line, cols[3], "command")?;
        let params: Vec<f64> =
            (4..8).map(|c| parse_real(line, cols[c], "param")).collect::<Result<_, _>>()?;
        let (a, b, c) = (
            parse_real(line, cols[8], "x/lat")?,
            parse_real(line, cols[9], "y/lon")?,
            parse_real(line, cols[10], "z/alt")?,
        );
        parse_int(line, cols[11], "autocontinue")?;

        let command = u16::try_from(code)
            .ok()
            .and_then(MavCommand::from_code)
            .ok_or(MissionError::UnsupportedCommand { line, code })?;
        let kind = frame_kind(frame).ok_or(MissionError::UnsupportedFrame { line, frame })?;

        let is_first = waypoints.is_empty();
        let home = waypoints.first().map(|w| w.position).unwrap_or_default();
        let position = match kind {
            FrameKind::Local => {
                if is_first {
                    first_local = true;
                }
                Coord3::new(a, b, c)
            }
            FrameKind::GeodeticAmsl | FrameKind::GeodeticRelative => {
                if first_local {
                    return Err(bad_row(line, "geodetic row in a mission whose first row is local"));
                }
                let o = origin.get_or_insert(Origin { lat: a, lon: b, alt: c });
                let z = if kind == FrameKind::GeodeticAmsl { c - o.alt } else { c };
                if a == 0.0 && b == 0.0 && !is_first {
                    // MAVLink convention: zero lat/lon means "current position".
                    Coord3::new(home.x, home.y, z)
                } else {
                    let x = EARTH_RADIUS_M * (b - o.lon).to_radians() * o.lat.to_radians().cos();
                    let y = EARTH_RADIUS_M * (a - o.lat).to_radians();
                    Coord3::new(x, y, z)
                }
            }
        };
        let position = if command == MavCommand::NavReturnToLaunch && !is_first { home } else { position };
        if position.z < 0.0 {
            return Err(bad_row(line, format!("altitude {} below ground", position.z)));
        }
        let hold = if command == MavCommand::NavWaypoint { params[0] } else { 0.0 };
        if hold < 0.0 {
            return Err(bad_row(line, format!("negative hold time {hold}")));
        }
        waypoints.push(Waypoint { index: waypoints.len(), command, position, hold });
    }

    Mission::new(waypoints)
}

pub fn parse_mission_file(path: &Path) -> Result<Mission, MissionError> {
    let text = fs::read_to_string(path)
        .map_err(|e| MissionError::Io { path: path.display().to_string(), message: e.to_string() })?;
    Ok(parse_mission(&text)?.with_source_path(path.display().to_string()))
}
