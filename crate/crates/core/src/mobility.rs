//! Node movement: fixed placement for ground nodes and a waypoint-following
//! drone model driven by [`MobilityCommand`]s.
//!
//! The drone moves at constant speed along straight legs with instantaneous
//! turns. Movement is event driven: [`DroneMobility::next_transition`] names
//! the next instant something happens (waypoint arrival, dwell end, start),
//! and [`DroneMobility::advance`] replays everything up to a given time,
//! returning the telemetry produced on the way.

use std::collections::VecDeque;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mission::{Coord3, Mission};
use crate::time::SimTime;

/// Distance under which a target counts as reached.
pub const ARRIVAL_TOLERANCE_M: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[repr(i32)]
pub enum MobilityCommandType {
    Reverse = 0,
    GotoWaypoint = 1,
    GotoCoords = 2,
    ReturnToHome = 3,
    Shutdown = 4,
}

impl MobilityCommandType {
    pub fn code(self) -> i32 {
        self as i32
    }

    pub fn name(self) -> &'static str {
        match self {
            MobilityCommandType::Reverse => "REVERSE",
            MobilityCommandType::GotoWaypoint => "GOTO_WAYPOINT",
            MobilityCommandType::GotoCoords => "GOTO_COORDS",
            MobilityCommandType::ReturnToHome => "RETURN_TO_HOME",
            MobilityCommandType::Shutdown => "SHUTDOWN",
        }
    }
}

/// Order for the mobility module. Unused parameters stay at −1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MobilityCommand {
    pub command_type: MobilityCommandType,
    pub param1: f64,
    pub param2: f64,
    pub param3: f64,
    pub param4: f64,
    pub param5: f64,
}

impl MobilityCommand {
    pub fn new(command_type: MobilityCommandType) -> Self {
        MobilityCommand { command_type, param1: -1.0, param2: -1.0, param3: -1.0, param4: -1.0, param5: -1.0 }
    }

    pub fn reverse() -> Self {
        Self::new(MobilityCommandType::Reverse)
    }

    pub fn goto_waypoint(index: usize) -> Self {
        MobilityCommand { param1: index as f64, ..Self::new(MobilityCommandType::GotoWaypoint) }
    }

    /// Fly to `target`, then resume the tour heading for `next` having come
    /// from `last`.
    pub fn goto_coords(target: Coord3, next: usize, last: usize) -> Self {
        MobilityCommand {
            command_type: MobilityCommandType::GotoCoords,
            param1: target.x,
            param2: target.y,
            param3: target.z,
            param4: next as f64,
            param5: last as f64,
        }
    }

    pub fn return_to_home() -> Self {
        Self::new(MobilityCommandType::ReturnToHome)
    }

    pub fn shutdown() -> Self {
        Self::new(MobilityCommandType::Shutdown)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[repr(i32)]
pub enum DroneActivity {
    Idle = 0,
    Navigating = 1,
    ReachedEdge = 2,
    FollowingCommand = 3,
}

impl DroneActivity {
    pub fn name(self) -> &'static str {
        match self {
            DroneActivity::Idle => "IDLE",
            DroneActivity::Navigating => "NAVIGATING",
            DroneActivity::ReachedEdge => "REACHED_EDGE",
            DroneActivity::FollowingCommand => "FOLLOWING_COMMAND",
        }
    }
}

/// Mobility status report for the protocol module.
#[derive(Debug, Clone, PartialEq)]
pub struct Telemetry {
    pub next_waypoint_id: i32,
    pub last_waypoint_id: i32,
    pub current_command: i32,
    pub is_reversed: bool,
    pub drone_activity: DroneActivity,
    /// Present only on the initialisation report.
    pub tour: Option<Arc<Mission>>,
}

#[derive(Debug, Error, PartialEq)]
pub enum MobilityError {
    #[error("waypoint index {0} is not a tour index")]
    InvalidWaypointIndex(f64),
    #[error("target coordinates are not finite")]
    InvalidCoordinates,
    #[error("node is shut down")]
    InactiveNode,
    #[error("stationary node cannot execute {0}")]
    Stationary(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Leg {
    from: Coord3,
    to: Coord3,
    depart: SimTime,
    arrive: SimTime,
}

impl Leg {
    fn new(from: Coord3, to: Coord3, depart: SimTime, speed: f64) -> Self {
        let d = from.distance(&to);
        Leg { from, to, depart, arrive: depart + SimTime::from_secs_f64_ceil(d / speed) }
    }

    fn position_at(&self, t: SimTime) -> Coord3 {
        if t >= self.arrive || self.arrive == self.depart {
            return self.to;
        }
        if t <= self.depart {
            return self.from;
        }
        let total = (self.arrive - self.depart).as_micros() as f64;
        let done = (t - self.depart).as_micros() as f64;
        self.from.lerp(&self.to, done / total)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Motion {
    Hold,
    Leg(Leg),
    Dwell { until: SimTime },
}

#[derive(Debug, Clone, PartialEq)]
enum Resume {
    Coords { next: usize, last: usize },
    Waypoint(usize),
    Home,
}

#[derive(Debug, Clone, PartialEq)]
struct ActiveCommand {
    command: MobilityCommand,
    route: VecDeque<Coord3>,
    resume: Resume,
}

/// Waypoint-following drone.
#[derive(Debug, Clone)]
pub struct DroneMobility {
    mission: Arc<Mission>,
    speed: f64,
    start_time: SimTime,
    started: bool,
    clock: SimTime,
    position: Coord3,
    reversed: bool,
    activity: DroneActivity,
    last: i32,
    next: i32,
    queue: VecDeque<MobilityCommand>,
    current: Option<ActiveCommand>,
    motion: Motion,
    active: bool,
    recalled: bool,
}

impl DroneMobility {
    /// The drone waits at the first tour point until `start_time`.
    pub fn new(mission: Arc<Mission>, speed: f64, start_time: SimTime) -> Self {
        assert!(speed > 0.0 && speed.is_finite(), "speed must be positive");
        let position = mission.tour_point(0);
        DroneMobility {
            mission,
            speed,
            start_time,
            started: false,
            clock: SimTime::ZERO,
            position,
            reversed: false,
            activity: DroneActivity::Idle,
            last: -1,
            next: -1,
            queue: VecDeque::new(),
            current: None,
            motion: Motion::Hold,
            active: true,
            recalled: false,
        }
    }

    pub fn mission(&self) -> &Arc<Mission> {
        &self.mission
    }

    pub fn speed(&self) -> f64 {
        self.speed
    }

    pub fn start_time(&self) -> SimTime {
        self.start_time
    }

    pub fn is_active(&self) -> bool {
        self.active
    }

    pub fn is_reversed(&self) -> bool {
        self.reversed
    }

    pub fn activity(&self) -> DroneActivity {
        self.activity
    }

    pub fn queue_len(&self) -> usize {
        self.queue.len()
    }

    /// True while airborne (any activity other than IDLE).
    pub fn is_flying(&self) -> bool {
        self.active && self.activity != DroneActivity::Idle
    }

    pub fn position_at(&self, t: SimTime) -> Coord3 {
        match &self.motion {
            Motion::Leg(leg) if self.active => leg.position_at(t),
            _ => self.position,
        }
    }

    pub fn position(&self) -> Coord3 {
        self.position_at(self.clock)
    }

    /// Next instant at which the drone changes state on its own.
    pub fn next_transition(&self) -> Option<SimTime> {
        if !self.active {
            return None;
        }
        if !self.started {
            return if self.recalled { None } else { Some(self.start_time.max(self.clock)) };
        }
        match &self.motion {
            Motion::Hold => None,
            Motion::Leg(leg) => Some(leg.arrive),
            Motion::Dwell { until } => Some(*until),
        }
    }

    /// Snapshot of the current state. Never mutates.
    pub fn current_telemetry(&self) -> Telemetry {
        let current_command = match (&self.current, self.activity) {
            (Some(c), DroneActivity::FollowingCommand) => c.command.command_type.code(),
            _ => -1,
        };
        Telemetry {
            next_waypoint_id: self.next,
            last_waypoint_id: self.last,
            current_command,
            is_reversed: self.reversed,
            drone_activity: self.activity,
            tour: None,
        }
    }

    /// The report sent once at initialisation, carrying the tour.
    pub fn initial_telemetry(&self) -> Telemetry {
        Telemetry { tour: Some(self.mission.clone()), ..self.current_telemetry() }
    }

    /// Integrates motion up to `to`, firing every transition on the way.
    pub fn advance(&mut self, to: SimTime) -> Vec<Telemetry> {
        let mut out = Vec::new();
        if to < self.clock {
            return out;
        }
        let mut guard = 0usize;
        while let Some(t) = self.next_transition() {
            if t > to {
                break;
            }
            self.position = self.position_at(t);
            self.clock = t;
            self.fire_transition(&mut out);
            guard += 1;
            assert!(guard < 1_000_000, "mobility transition loop did not settle");
        }
        self.position = self.position_at(to);
        self.clock = to;
        out
    }

    /// Applies a command at time `now`. Any pending transitions up to `now`
    /// are replayed first and their telemetry is included in the result.
    pub fn handle_command(&mut self, now: SimTime, cmd: MobilityCommand) -> Result<Vec<Telemetry>, MobilityError> {
        if cmd.command_type == MobilityCommandType::Shutdown {
            if self.active {
                self.advance(now);
                self.motion = Motion::Hold;
                self.active = false;
                self.activity = DroneActivity::Idle;
                self.queue.clear();
                self.current = None;
            }
            return Ok(Vec::new());
        }
        if !self.active {
            return Err(MobilityError::InactiveNode);
        }
        self.validate(&cmd)?;
        let mut out = self.advance(now);
        if self.recalled {
            log::debug!("ignoring {} after return-to-home", cmd.command_type.name());
            return Ok(out);
        }
        match cmd.command_type {
            MobilityCommandType::Reverse => self.reverse(&mut out),
            MobilityCommandType::GotoWaypoint | MobilityCommandType::GotoCoords => {
                self.queue.push_back(cmd);
                if self.started && self.current.is_none() {
                    self.begin_next_command(&mut out);
                }
            }
            MobilityCommandType::ReturnToHome => {
                self.queue.clear();
                self.recalled = true;
                self.next = -1;
                self.last = -1;
                if self.started {
                    let home = self.mission.home();
                    self.current = Some(ActiveCommand {
                        command: cmd,
                        route: VecDeque::from([home]),
                        resume: Resume::Home,
                    });
                    self.activity = DroneActivity::FollowingCommand;
                    self.motion = Motion::Leg(Leg::new(self.position, home, self.clock, self.speed));
                } else {
                    self.current = None;
                    self.activity = DroneActivity::Idle;
                    self.motion = Motion::Hold;
                }
                out.push(self.current_telemetry());
            }
            MobilityCommandType::Shutdown => unreachable!(),
        }
        Ok(out)
    }

    fn validate(&self, cmd: &MobilityCommand) -> Result<(), MobilityError> {
        let n = self.mission.tour_len();
        let index_ok = |v: f64| v.fract() == 0.0 && v >= 0.0 && (v as usize) < n;
        match cmd.command_type {
            MobilityCommandType::GotoWaypoint => {
                if !index_ok(cmd.param1) {
                    return Err(MobilityError::InvalidWaypointIndex(cmd.param1));
                }
            }
            MobilityCommandType::GotoCoords => {
                if !(cmd.param1.is_finite() && cmd.param2.is_finite() && cmd.param3.is_finite()) {
                    return Err(MobilityError::InvalidCoordinates);
                }
                for p in [cmd.param4, cmd.param5] {
                    if !index_ok(p) {
                        return Err(MobilityError::InvalidWaypointIndex(p));
                    }
                }
                if cmd.param4 == cmd.param5 {
                    return Err(MobilityError::InvalidWaypointIndex(cmd.param5));
                }
            }
            _ => {}
        }
        Ok(())
    }

    fn upcoming_from(&self, w: usize) -> Option<usize> {
        if self.reversed {
            w.checked_sub(1)
        } else if w + 1 < self.mission.tour_len() {
            Some(w + 1)
        } else {
            None
        }
    }

    fn fly_tour_leg(&mut self, to: usize) {
        self.next = to as i32;
        self.activity = DroneActivity::Navigating;
        let target = self.mission.tour_point(to);
        self.motion = Motion::Leg(Leg::new(self.position, target, self.clock, self.speed));
    }

    /// Leaves tour point `w` in the current direction, or stops at the edge.
    fn proceed_from(&mut self, w: usize, out: &mut Vec<Telemetry>) {
        self.last = w as i32;
        match self.upcoming_from(w) {
            Some(u) => self.fly_tour_leg(u),
            None => {
                self.next = -1;
                self.activity = DroneActivity::ReachedEdge;
                self.motion = Motion::Hold;
            }
        }
        out.push(self.current_telemetry());
    }

    fn fire_transition(&mut self, out: &mut Vec<Telemetry>) {
        if !self.started {
            self.started = true;
            if !self.queue.is_empty() {
                self.last = 0;
                self.begin_next_command(out);
            } else {
                self.proceed_from(0, out);
            }
            return;
        }
        match std::mem::replace(&mut self.motion, Motion::Hold) {
            Motion::Hold => {}
            Motion::Dwell { .. } => {
                let w = self.last.max(0) as usize;
                self.proceed_from(w, out);
            }
            Motion::Leg(leg) => {
                self.position = leg.to;
                if let Some(active) = self.current.as_mut() {
                    active.route.pop_front();
                    if let Some(&to) = active.route.front() {
                        self.motion = Motion::Leg(Leg::new(self.position, to, self.clock, self.speed));
                    } else {
                        self.complete_command(out);
                    }
                } else {
                    let w = self.next.max(0) as usize;
                    self.last = w as i32;
                    let hold = self.mission.tour_hold(w);
                    if hold > 0.0 {
                        self.next = self.upcoming_from(w).map_or(-1, |u| u as i32);
                        self.motion = Motion::Dwell { until: self.clock + SimTime::from_secs_f64(hold) };
                        out.push(self.current_telemetry());
                    } else {
                        self.proceed_from(w, out);
                    }
                }
            }
        }
    }

    fn complete_command(&mut self, out: &mut Vec<Telemetry>) {
        let active = self.current.take().expect("active command");
        match active.resume {
            Resume::Home => {
                self.activity = DroneActivity::Idle;
                self.motion = Motion::Hold;
                out.push(self.current_telemetry());
            }
            Resume::Coords { next, last } => {
                self.reversed = next < last;
                self.last = last as i32;
                if !self.queue.is_empty() {
                    self.next = next as i32;
                    self.activity = DroneActivity::Navigating;
                    out.push(self.current_telemetry());
                    self.begin_next_command(out);
                } else {
                    self.fly_tour_leg(next);
                    out.push(self.current_telemetry());
                }
            }
            Resume::Waypoint(w) => {
                if !self.queue.is_empty() {
                    self.last = w as i32;
                    self.next = self.upcoming_from(w).map_or(-1, |u| u as i32);
                    self.activity = DroneActivity::Navigating;
                    out.push(self.current_telemetry());
                    self.begin_next_command(out);
                } else {
                    self.proceed_from(w, out);
                }
            }
        }
    }

    /// Tour indices bracketing the drone: `(low, high)` with `low == high`
    /// when sitting on a tour point.
    fn bracket(&self) -> (usize, usize) {
        match (self.last, self.next) {
            (l, n) if l >= 0 && n >= 0 => (l.min(n) as usize, l.max(n) as usize),
            (l, _) if l >= 0 => (l as usize, l as usize),
            (_, n) if n >= 0 => (n as usize, n as usize),
            _ => (0, 0),
        }
    }

    fn begin_next_command(&mut self, out: &mut Vec<Telemetry>) {
        let Some(cmd) = self.queue.pop_front() else { return };
        let (route, resume, next, last) = match cmd.command_type {
            MobilityCommandType::GotoCoords => {
                let target = Coord3::new(cmd.param1, cmd.param2, cmd.param3);
                let (n, l) = (cmd.param4 as usize, cmd.param5 as usize);
                (VecDeque::from([target]), Resume::Coords { next: n, last: l }, n as i32, l as i32)
            }
            MobilityCommandType::GotoWaypoint => {
                let p = cmd.param1 as usize;
                let (lo, hi) = self.bracket();
                let near = |i: usize| self.position.distance(&self.mission.tour_point(i)) <= ARRIVAL_TOLERANCE_M;
                let on_point = if lo == hi || near(lo) {
                    Some(lo)
                } else if near(hi) {
                    Some(hi)
                } else {
                    None
                };
                let (indices, origin): (Vec<usize>, usize) = match on_point {
                    Some(w) if p > w => ((w + 1..=p).collect(), w),
                    Some(w) if p < w => ((p..w).rev().collect(), w),
                    Some(w) => (vec![w], w),
                    None if p >= hi => ((hi..=p).collect(), lo),
                    None => ((p..=lo).rev().collect(), hi),
                };
                let route: VecDeque<Coord3> = indices.iter().map(|&i| self.mission.tour_point(i)).collect();
                let last = if origin == p { -1 } else { origin as i32 };
                (route, Resume::Waypoint(p), p as i32, last)
            }
            _ => unreachable!("only GOTO commands are queued"),
        };
        self.next = next;
        self.last = last;
        self.activity = DroneActivity::FollowingCommand;
        let first = *route.front().expect("non-empty route");
        self.motion = Motion::Leg(Leg::new(self.position, first, self.clock, self.speed));
        self.current = Some(ActiveCommand { command: cmd, route, resume });
        out.push(self.current_telemetry());
    }

    fn reverse(&mut self, out: &mut Vec<Telemetry>) {
        self.reversed = !self.reversed;
        if !self.started || self.current.is_some() {
            out.push(self.current_telemetry());
            return;
        }
        match self.motion.clone() {
            Motion::Leg(_) => {
                let (last, next) = (self.last, self.next);
                self.last = next;
                self.fly_tour_leg(last.max(0) as usize);
                out.push(self.current_telemetry());
            }
            Motion::Dwell { .. } => {
                let w = self.last.max(0) as usize;
                self.next = self.upcoming_from(w).map_or(-1, |u| u as i32);
                out.push(self.current_telemetry());
            }
            Motion::Hold => {
                if self.activity == DroneActivity::ReachedEdge {
                    let w = self.last.max(0) as usize;
                    // A one-point tour has no edge to turn around at; reporting
                    // REACHED_EDGE again would only invite another REVERSE.
                    if self.upcoming_from(w).is_none() {
                        return;
                    }
                    self.proceed_from(w, out);
                } else {
                    out.push(self.current_telemetry());
                }
            }
        }
    }
}

/// Mobility module of any node.
#[derive(Debug, Clone)]
pub enum Mobility {
    Stationary { position: Coord3, active: bool },
    Drone(Box<DroneMobility>),
}

impl Mobility {
    pub fn stationary(position: Coord3) -> Self {
        Mobility::Stationary { position, active: true }
    }

    pub fn position_at(&self, t: SimTime) -> Coord3 {
        match self {
            Mobility::Stationary { position, .. } => *position,
            Mobility::Drone(d) => d.position_at(t),
        }
    }

    pub fn advance(&mut self, to: SimTime) -> Vec<Telemetry> {
        match self {
            Mobility::Stationary { .. } => Vec::new(),
            Mobility::Drone(d) => d.advance(to),
        }
    }

    pub fn next_transition(&self) -> Option<SimTime> {
        match self {
            Mobility::Stationary { .. } => None,
            Mobility::Drone(d) => d.next_transition(),
        }
    }

    pub fn handle_command(&mut self, now: SimTime, cmd: MobilityCommand) -> Result<Vec<Telemetry>, MobilityError> {
        match self {
            Mobility::Stationary { active, .. } => match cmd.command_type {
                MobilityCommandType::Shutdown => {
                    *active = false;
                    Ok(Vec::new())
                }
                _ if !*active => Err(MobilityError::InactiveNode),
                other => Err(MobilityError::Stationary(other.name())),
            },
            Mobility::Drone(d) => d.handle_command(now, cmd),
        }
    }

    pub fn current_telemetry(&self) -> Option<Telemetry> {
        match self {
            Mobility::Stationary { .. } => None,
            Mobility::Drone(d) => Some(d.current_telemetry()),
        }
    }

    pub fn as_drone(&self) -> Option<&DroneMobility> {
        match self {
            Mobility::Drone(d) => Some(d),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(points: &[(f64, f64)]) -> Arc<Mission> {
        let pts: Vec<Coord3> = points.iter().map(|&(x, y)| Coord3::new(x, y, 0.0)).collect();
        Arc::new(Mission::from_points(&pts).unwrap())
    }

    fn secs(s: f64) -> SimTime {
        SimTime::from_secs_f64(s)
    }

    fn started(mission: Arc<Mission>, speed: f64) -> DroneMobility {
        let mut d = DroneMobility::new(mission, speed, SimTime::ZERO);
        d.advance(SimTime::ZERO);
        d
    }

    #[test]
    fn before_start_is_idle() {
        let d = DroneMobility::new(line(&[(0.0, 0.0), (100.0, 0.0)]), 10.0, secs(40.0));
        let t = d.current_telemetry();
        assert_eq!(t.drone_activity, DroneActivity::Idle);
        assert_eq!(t.next_waypoint_id, -1);
        assert_eq!(t.last_waypoint_id, -1);
        assert!(t.tour.is_none());
        let init = d.initial_telemetry();
        assert_eq!(init.tour.as_ref().unwrap().tour_len(), 2);
    }

    #[test]
    fn start_emits_navigating() {
        let mut d = DroneMobility::new(line(&[(0.0, 0.0), (100.0, 0.0)]), 10.0, secs(40.0));
        assert_eq!(d.next_transition(), Some(secs(40.0)));
        assert!(d.advance(secs(39.0)).is_empty());
        let t = d.advance(secs(40.0));
        assert_eq!(t.len(), 1);
        assert_eq!(t[0].drone_activity, DroneActivity::Navigating);
        assert_eq!((t[0].last_waypoint_id, t[0].next_waypoint_id), (0, 1));
    }

    #[test]
    fn mid_segment_moves_speed_times_dt() {
        let mut d = started(line(&[(0.0, 0.0), (100.0, 0.0)]), 10.0);
        let t = d.advance(secs(3.25));
        assert!(t.is_empty());
        assert!((d.position().x - 32.5).abs() < 1e-9);
    }

    #[test]
    fn reaching_final_waypoint_sets_reached_edge() {
        let mut d = started(line(&[(0.0, 0.0), (50.0, 0.0), (100.0, 0.0)]), 10.0);
        let t = d.advance(secs(12.0));
        assert_eq!(t.len(), 2);
        assert_eq!(t[0].drone_activity, DroneActivity::Navigating);
        assert_eq!((t[0].last_waypoint_id, t[0].next_waypoint_id), (1, 2));
        assert_eq!(t[1].drone_activity, DroneActivity::ReachedEdge);
        assert_eq!(t[1].last_waypoint_id, 2);
        assert_eq!(d.position(), Coord3::new(100.0, 0.0, 0.0));
    }

    #[test]
    fn reverse_twice_restores_heading() {
        let mut d = started(line(&[(0.0, 0.0), (100.0, 0.0)]), 10.0);
        d.advance(secs(5.0));
        let before = d.current_telemetry();
        d.handle_command(secs(5.0), MobilityCommand::reverse()).unwrap();
        let mid = d.current_telemetry();
        assert!(mid.is_reversed);
        assert_eq!((mid.last_waypoint_id, mid.next_waypoint_id), (1, 0));
        d.handle_command(secs(5.0), MobilityCommand::reverse()).unwrap();
        assert_eq!(d.current_telemetry(), before);
        d.advance(secs(10.0));
        assert_eq!(d.position(), Coord3::new(100.0, 0.0, 0.0));
    }

    #[test]
    fn reverse_mid_segment_retargets_previous_waypoint() {
        let mut d = started(line(&[(0.0, 0.0), (100.0, 0.0)]), 10.0);
        d.advance(secs(3.0));
        d.handle_command(secs(3.0), MobilityCommand::reverse()).unwrap();
        let t = d.advance(secs(6.0));
        assert_eq!(t.last().unwrap().drone_activity, DroneActivity::ReachedEdge);
        assert_eq!(t.last().unwrap().last_waypoint_id, 0);
        assert_eq!(d.position(), Coord3::new(0.0, 0.0, 0.0));
    }

    #[test]
    fn reverse_at_edge_departs() {
        let mut d = started(line(&[(0.0, 0.0), (20.0, 0.0)]), 10.0);
        d.advance(secs(2.0));
        assert_eq!(d.activity(), DroneActivity::ReachedEdge);
        let t = d.handle_command(secs(2.0), MobilityCommand::reverse()).unwrap();
        assert_eq!(t[0].drone_activity, DroneActivity::Navigating);
        assert_eq!((t[0].last_waypoint_id, t[0].next_waypoint_id), (1, 0));
        d.advance(secs(3.0));
        assert!((d.position().x - 10.0).abs() < 1e-9);
    }

    #[test]
    fn goto_coords_kinematics() {
        let mut d = started(line(&[(0.0, 0.0), (10.0, 0.0), (20.0, 0.0)]), 5.0);
        let t = d.handle_command(SimTime::ZERO, MobilityCommand::goto_coords(Coord3::new(10.0, 0.0, 0.0), 2, 1)).unwrap();
        let following = t.last().unwrap();
        assert_eq!(following.drone_activity, DroneActivity::FollowingCommand);
        assert_eq!(following.current_command, MobilityCommandType::GotoCoords.code());
        assert!(d.advance(secs(1.999)).is_empty());
        let arrival = d.advance(secs(2.0));
        assert_eq!(arrival.len(), 1);
        assert_eq!(arrival[0].next_waypoint_id, 2);
        assert_eq!(arrival[0].last_waypoint_id, 1);
        assert_eq!(arrival[0].drone_activity, DroneActivity::Navigating);
        assert_eq!(arrival[0].current_command, -1);
        assert!(!arrival[0].is_reversed);
    }

    #[test]
    fn goto_coords_resume_sets_direction() {
        let mut d = started(line(&[(0.0, 0.0), (10.0, 0.0), (20.0, 0.0)]), 5.0);
        d.handle_command(SimTime::ZERO, MobilityCommand::goto_coords(Coord3::new(15.0, 0.0, 0.0), 1, 2)).unwrap();
        let arrival = d.advance(secs(3.0));
        assert!(arrival[0].is_reversed);
        d.advance(secs(100.0));
        assert_eq!(d.position(), Coord3::new(0.0, 0.0, 0.0));
        assert_eq!(d.activity(), DroneActivity::ReachedEdge);
    }

    #[test]
    fn goto_commands_queue_fifo() {
        let mut d = started(line(&[(0.0, 0.0), (10.0, 0.0), (20.0, 0.0)]), 10.0);
        d.handle_command(SimTime::ZERO, MobilityCommand::goto_coords(Coord3::new(5.0, 5.0, 0.0), 1, 0)).unwrap();
        d.handle_command(SimTime::ZERO, MobilityCommand::goto_coords(Coord3::new(5.0, 0.0, 0.0), 2, 1)).unwrap();
        assert_eq!(d.queue_len(), 1);
        d.advance(secs(0.8));
        assert_eq!(d.queue_len(), 0);
        assert_eq!(d.current_telemetry().next_waypoint_id, 2);
        d.advance(secs(1.3));
        assert_eq!(d.activity(), DroneActivity::Navigating);
        assert!((d.position().x - 5.0).abs() < 1.0);
    }

    #[test]
    fn goto_waypoint_follows_tour() {
        let mut d = started(line(&[(0.0, 0.0), (10.0, 0.0), (10.0, 10.0), (0.0, 10.0)]), 10.0);
        d.handle_command(SimTime::ZERO, MobilityCommand::goto_waypoint(2)).unwrap();
        d.advance(secs(1.0));
        assert_eq!(d.position(), Coord3::new(10.0, 0.0, 0.0));
        let t = d.advance(secs(2.0));
        let arrival = t.last().unwrap();
        assert_eq!(d.position(), Coord3::new(10.0, 10.0, 0.0));
        assert_eq!((arrival.last_waypoint_id, arrival.next_waypoint_id), (2, 3));
    }

    #[test]
    fn invalid_waypoint_index() {
        let mut d = started(line(&[(0.0, 0.0), (10.0, 0.0)]), 10.0);
        assert_eq!(
            d.handle_command(SimTime::ZERO, MobilityCommand::goto_waypoint(2)),
            Err(MobilityError::InvalidWaypointIndex(2.0))
        );
        let mut bad = MobilityCommand::goto_waypoint(0);
        bad.param1 = 0.5;
        assert!(d.handle_command(SimTime::ZERO, bad).is_err());
    }

    #[test]
    fn shutdown_freezes_node() {
        let mut d = started(line(&[(0.0, 0.0), (100.0, 0.0)]), 10.0);
        d.handle_command(secs(2.0), MobilityCommand::shutdown()).unwrap();
        let p = d.position();
        assert_eq!(d.handle_command(secs(3.0), MobilityCommand::reverse()), Err(MobilityError::InactiveNode));
        assert!(d.advance(secs(50.0)).is_empty());
        assert_eq!(d.position(), p);
        assert_eq!(d.next_transition(), None);
        assert!(d.handle_command(secs(60.0), MobilityCommand::shutdown()).is_ok());
    }

    #[test]
    fn return_to_home_clears_queue_and_lands() {
        let mut d = started(line(&[(0.0, 0.0), (100.0, 0.0)]), 10.0);
        d.advance(secs(5.0));
        d.handle_command(secs(5.0), MobilityCommand::goto_coords(Coord3::new(90.0, 0.0, 0.0), 1, 0)).unwrap();
        d.handle_command(secs(5.0), MobilityCommand::goto_coords(Coord3::new(80.0, 0.0, 0.0), 1, 0)).unwrap();
        let t = d.handle_command(secs(6.0), MobilityCommand::return_to_home()).unwrap();
        assert_eq!(t.last().unwrap().current_command, 3);
        assert_eq!(d.queue_len(), 0);
        let t = d.advance(secs(100.0));
        assert_eq!(t.last().unwrap().drone_activity, DroneActivity::Idle);
        assert_eq!(d.position(), Coord3::new(0.0, 0.0, 0.0));
        assert!(!d.is_flying());
    }

    #[test]
    fn dwell_at_waypoint() {
        let mut pts = Mission::from_points(&[
            Coord3::new(0.0, 0.0, 0.0),
            Coord3::new(10.0, 0.0, 0.0),
            Coord3::new(20.0, 0.0, 0.0),
        ])
        .unwrap()
        .waypoints()
        .to_vec();
        pts[1].hold = 3.0;
        let mut d = started(Arc::new(Mission::new(pts).unwrap()), 10.0);
        d.advance(secs(2.5));
        assert_eq!(d.position(), Coord3::new(10.0, 0.0, 0.0));
        d.advance(secs(4.0));
        assert_eq!(d.position(), Coord3::new(10.0, 0.0, 0.0));
        d.advance(secs(4.5));
        assert!((d.position().x - 15.0).abs() < 1e-9);
    }

    #[test]
    fn stationary_never_moves() {
        let mut m = Mobility::stationary(Coord3::new(1.0, 2.0, 0.0));
        assert!(m.advance(secs(100.0)).is_empty());
        assert_eq!(m.position_at(secs(100.0)), Coord3::new(1.0, 2.0, 0.0));
        assert!(m.handle_command(SimTime::ZERO, MobilityCommand::reverse()).is_err());
        assert!(m.handle_command(SimTime::ZERO, MobilityCommand::shutdown()).is_ok());
        assert_eq!(m.handle_command(SimTime::ZERO, MobilityCommand::reverse()), Err(MobilityError::InactiveNode));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        #[derive(Debug, Clone)]
        enum Step {
            Advance(u32),
            Reverse,
            GotoWaypoint(usize),
            GotoCoords(f64, f64, usize),
        }

        fn step() -> impl Strategy<Value = Step> {
            prop_oneof![
                4 => (1u32..5_000_000).prop_map(Step::Advance),
                1 => Just(Step::Reverse),
                1 => (0usize..4).prop_map(Step::GotoWaypoint),
                1 => (0.0f64..60.0, -10.0f64..10.0, 0usize..3).prop_map(|(x, y, s)| Step::GotoCoords(x, y, s)),
            ]
        }

        proptest! {
            #[test]
            fn motion_invariants(steps in proptest::collection::vec(step(), 1..60)) {
                let m = line(&[(0.0, 0.0), (20.0, 0.0), (40.0, 10.0), (60.0, 10.0)]);
                let speed = 7.0;
                let mut d = DroneMobility::new(m.clone(), speed, SimTime::from_secs(1));
                let mut now = SimTime::ZERO;
                let mut pos = d.position();
                for s in steps {
                    let queue_before = d.queue_len();
                    match s {
                        Step::Advance(us) => {
                            let to = now + SimTime::from_micros(us as u64);
                            let telemetry = d.advance(to);
                            for t in &telemetry {
                                prop_assert!(t.next_waypoint_id != t.last_waypoint_id || t.next_waypoint_id == -1);
                                prop_assert_eq!(t.current_command == -1, t.drone_activity != DroneActivity::FollowingCommand);
                            }
                            let new_pos = d.position();
                            let dt = (to - now).as_secs_f64();
                            prop_assert!(new_pos.distance(&pos) <= speed * dt + 1e-9);
                            prop_assert!(d.queue_len() <= queue_before);
                            now = to;
                            pos = new_pos;
                        }
                        Step::Reverse => { d.handle_command(now, MobilityCommand::reverse()).unwrap(); }
                        Step::GotoWaypoint(i) => { d.handle_command(now, MobilityCommand::goto_waypoint(i)).unwrap(); }
                        Step::GotoCoords(x, y, s) => {
                            d.handle_command(now, MobilityCommand::goto_coords(Coord3::new(x, y, 0.0), s + 1, s)).unwrap();
                        }
                    }
                    let t = d.current_telemetry();
                    if t.drone_activity == DroneActivity::Navigating {
                        let (l, n) = (t.last_waypoint_id, t.next_waypoint_id);
                        prop_assert!(l >= 0 && n >= 0 && (l - n).abs() == 1, "l={} n={}", l, n);
                        prop_assert_eq!(n < l, t.is_reversed);
                    }
                }
            }

            #[test]
            fn shutdown_position_is_constant(pre in 0u64..20_000_000, post in 0u64..50_000_000) {
                let m = line(&[(0.0, 0.0), (30.0, 0.0), (30.0, 30.0)]);
                let mut d = DroneMobility::new(m, 4.0, SimTime::ZERO);
                let t0 = SimTime::from_micros(pre);
                d.advance(t0);
                d.handle_command(t0, MobilityCommand::shutdown()).unwrap();
                let p = d.position();
                d.advance(t0 + SimTime::from_micros(post));
                prop_assert_eq!(d.position(), p);
            }
        }
    }
}
