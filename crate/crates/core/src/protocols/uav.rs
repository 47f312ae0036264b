//! UAV side of the ZigZag and DADCA data-collection protocols.
//!
//! Both share pairing: a UAV that hears another UAV's heartbeat while solo
//! sends a pair request carrying a snapshot of its tour progress and
//! neighbour counts. A solo receiver confirms with its own snapshot. Each
//! side then runs the exchange on the same two snapshots, so both agree on
//! which of them is farther along the tour. The farther UAV hands its data
//! to the nearer one, which is the one heading toward the ground station at
//! the tour start.
//!
//! ZigZag then reverses both UAVs. DADCA additionally updates neighbour
//! counts and sends both UAVs to the shared section boundary before they
//! resume in opposite directions.
//!
//! DADCA counts stay sound only while partners are adjacent and UAVs never
//! pass each other unpaired, so pairing is constrained:
//! - after a pairing the two partners ignore each other for the quiet
//!   window, and a newer pairing ends that window for earlier partners;
//! - no UAV pairs across another one it has just heard between them;
//! - a UAV already flying to a boundary keeps that plan when it pairs
//!   again, rather than queueing a second flight.

use std::sync::Arc;

use crate::mission::{Coord3, Mission};
use crate::mobility::{DroneActivity, MobilityCommand, Telemetry};
use crate::network::{CommunicationCommand, NodeId, Packet};
use crate::protocol::{Protocol, ProtocolContext, ProtocolEvent, ProtocolStats};
use crate::protocols::message::{MessageType, SenderKind, SwarmMessage};
use crate::time::SimTime;

pub const DEFAULT_QUIET_TIME_S: f64 = 15.0;
/// An unanswered pair request is abandoned after this long.
pub const REQUEST_TIMEOUT: SimTime = SimTime::from_micros(1_000_000);
/// The ground station counts as nearby if heard this recently.
pub const GROUND_WINDOW: SimTime = SimTime::from_micros(3_000_000);
/// Another UAV's last heartbeat position is trusted for this long.
pub const NEIGHBOUR_WINDOW: SimTime = SimTime::from_micros(2_000_000);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    ZigZag,
    Dadca,
}

/// Tour progress and neighbour counts as carried in pairing messages.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Snapshot {
    pub last: i32,
    pub next: i32,
    pub reversed: bool,
    pub left: i32,
    pub right: i32,
    /// Position within the current segment; see [`segment_progress`].
    pub progress: u16,
}

impl Snapshot {
    pub fn from_message(m: &SwarmMessage) -> Self {
        Snapshot {
            last: m.last_waypoint_id,
            next: m.next_waypoint_id,
            reversed: m.reversed,
            left: m.left_neighbours,
            right: m.right_neighbours,
            progress: m.segment_progress,
        }
    }

    fn apply(&self, m: SwarmMessage) -> SwarmMessage {
        SwarmMessage {
            last_waypoint_id: self.last,
            next_waypoint_id: self.next,
            reversed: self.reversed,
            left_neighbours: self.left,
            right_neighbours: self.right,
            segment_progress: self.progress,
            ..m
        }
    }
}

/// Orders positions along the tour: `2k` on tour point `k`, `2k + 1` on the
/// segment between points `k` and `k + 1`. Unknown ids count as point 0.
pub fn progress_key(last: i32, next: i32) -> i64 {
    match (last >= 0, next >= 0) {
        (true, true) if last == next => 2 * last as i64,
        (true, true) => 2 * last.min(next) as i64 + 1,
        (true, false) => 2 * last as i64,
        (false, true) => 2 * next as i64,
        (false, false) => 0,
    }
}

/// How far `p` is along the segment between tour points `last` and
/// `next`, measured from the lower-indexed end and scaled to `0..=65535`.
/// Zero when not between two distinct tour points.
pub fn segment_progress(tour: &Mission, last: i32, next: i32, p: Coord3) -> u16 {
    let n = tour.tour_len() as i32;
    if last < 0 || next < 0 || last == next || last >= n || next >= n {
        return 0;
    }
    let a = tour.tour_point(last.min(next) as usize);
    let b = tour.tour_point(last.max(next) as usize);
    let d = b - a;
    let len2 = d.x * d.x + d.y * d.y + d.z * d.z;
    if len2 == 0.0 {
        return 0;
    }
    let v = p - a;
    let t = ((v.x * d.x + v.y * d.y + v.z * d.z) / len2).clamp(0.0, 1.0);
    (t * u16::MAX as f64).round() as u16
}

/// Whether `a` is farther along the tour than `b`: by segment or tour
/// point, then by progress within a shared segment, then by node id (the
/// lower id counts as nearer). Exactly one of any distinct pair is farther.
pub fn is_farther(a: &Snapshot, a_id: NodeId, b: &Snapshot, b_id: NodeId) -> bool {
    (tour_position(a), a_id) > (tour_position(b), b_id)
}

/// Position along the tour, ordered; equal for UAVs at the same place.
fn tour_position(s: &Snapshot) -> (i64, u16) {
    let k = progress_key(s.last, s.next);
    (k, if k % 2 == 1 { s.progress } else { 0 })
}

/// Tour fraction of the boundary between the nearer UAV `L` and the
/// farther UAV `R`, from the counts before the exchange: `L` and its
/// `left` neighbours take `left + 1` equal sections from the start, `R` and
/// its `right` neighbours the remaining `right + 1`.
pub fn boundary_fraction(left_of_nearer: i32, right_of_farther: i32) -> f64 {
    let l = left_of_nearer.max(0) as f64 + 1.0;
    let r = right_of_farther.max(0) as f64 + 1.0;
    l / (l + r)
}

#[derive(Debug, Clone, PartialEq)]
enum Phase {
    Solo,
    Requested { partner: NodeId, since: SimTime, mine: Snapshot },
}

/// Another UAV's last advertised tour position, with this UAV's own
/// position when it arrived.
#[derive(Debug, Clone, Copy)]
struct Heard {
    id: NodeId,
    theirs: (i64, u16),
    mine: (i64, u16),
    at: SimTime,
}

#[derive(Debug)]
pub struct UavProtocol {
    variant: Variant,
    quiet_time: f64,
    tour: Option<Arc<Mission>>,
    last: i32,
    next: i32,
    reversed: bool,
    activity: DroneActivity,
    left: i32,
    right: i32,
    carried: u64,
    phase: Phase,
    /// Partners being ignored, each with the end of its quiet window.
    quiet: Vec<(NodeId, SimTime)>,
    /// Partner of the unfinished boundary flight, if any. Its quiet window
    /// restarts when this UAV arrives.
    rendezvous: Vec<NodeId>,
    heard: Vec<Heard>,
    ground: Option<(NodeId, SimTime)>,
    pairings: u64,
}

impl UavProtocol {
    pub fn new(variant: Variant, quiet_time: f64) -> Self {
        UavProtocol {
            variant,
            quiet_time,
            tour: None,
            last: -1,
            next: -1,
            reversed: false,
            activity: DroneActivity::Idle,
            left: 0,
            right: 0,
            carried: 0,
            phase: Phase::Solo,
            quiet: Vec::new(),
            rendezvous: Vec::new(),
            heard: Vec::new(),
            ground: None,
            pairings: 0,
        }
    }

    pub fn zigzag(quiet_time: f64) -> Self {
        Self::new(Variant::ZigZag, quiet_time)
    }

    pub fn dadca(quiet_time: f64) -> Self {
        Self::new(Variant::Dadca, quiet_time)
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn carried(&self) -> u64 {
        self.carried
    }

    pub fn neighbours(&self) -> (i32, i32) {
        (self.left, self.right)
    }

    fn snapshot(&self, ctx: &ProtocolContext<'_>) -> Snapshot {
        let progress =
            self.tour.as_ref().map_or(0, |t| segment_progress(t, self.last, self.next, ctx.position()));
        Snapshot { last: self.last, next: self.next, reversed: self.reversed, left: self.left, right: self.right, progress }
    }

    fn message(&self, ctx: &ProtocolContext<'_>, kind: MessageType) -> SwarmMessage {
        let m = SwarmMessage::new(kind, SenderKind::Uav, ctx.node_id().as_i32())
            .with_data(clamp_units(self.carried));
        self.snapshot(ctx).apply(m)
    }

    fn refresh_heartbeat(&self, ctx: &mut ProtocolContext<'_>) {
        let hb = self.message(ctx, MessageType::Heartbeat);
        issue(ctx, CommunicationCommand::set_payload(hb));
    }

    fn is_solo(&mut self, now: SimTime) -> bool {
        if let Phase::Requested { since, .. } = self.phase {
            if now >= since + REQUEST_TIMEOUT {
                self.phase = Phase::Solo;
            }
        }
        self.phase == Phase::Solo
    }

    fn airborne(&self) -> bool {
        self.tour.is_some() && self.activity != DroneActivity::Idle
    }

    fn shuns(&self, now: SimTime, other: NodeId) -> bool {
        self.quiet.iter().any(|&(p, until)| p == other && now < until)
    }

    fn note_heard(&mut self, ctx: &ProtocolContext<'_>, from: NodeId, theirs: &Snapshot) {
        let now = ctx.now();
        let mine = tour_position(&self.snapshot(ctx));
        self.heard.retain(|h| h.id != from && now.saturating_sub(h.at) <= NEIGHBOUR_WINDOW);
        self.heard.push(Heard { id: from, theirs: tour_position(theirs), mine, at: now });
    }

    /// Whether a UAV heard recently lies between this one and `other`.
    /// Pairing across it would skip a neighbour and break the counts, which
    /// assume partners are adjacent.
    fn someone_between(&self, now: SimTime, other: NodeId) -> bool {
        self.heard.iter().any(|y| y.id != other && now.saturating_sub(y.at) <= NEIGHBOUR_WINDOW && self.lies_between(y, other))
    }

    /// Whether `y` lies strictly between this UAV and `other`. Each side of
    /// the test compares positions taken at the same moment, since
    /// heartbeats can be a full send interval old.
    fn lies_between(&self, y: &Heard, other: NodeId) -> bool {
        let Some(x) = self.heard.iter().find(|h| h.id == other) else { return false };
        let x_ahead = x.theirs > x.mine;
        y.theirs != y.mine && (y.theirs > y.mine) == x_ahead && y.theirs != x.theirs && (y.theirs < x.theirs) == x_ahead
    }

    fn on_uav_heartbeat(&mut self, ctx: &mut ProtocolContext<'_>, from: NodeId, theirs: Snapshot) {
        self.note_heard(ctx, from, &theirs);
        if !self.airborne() || self.shuns(ctx.now(), from) || !self.is_solo(ctx.now()) {
            return;
        }
        if self.someone_between(ctx.now(), from) {
            return;
        }
        let mine = self.snapshot(ctx);
        let req = self.message(ctx, MessageType::PairRequest).to(from.as_i32());
        if ctx.send_message(req, Some(from)).is_ok() {
            self.phase = Phase::Requested { partner: from, since: ctx.now(), mine };
        }
    }

    fn on_pair_request(&mut self, ctx: &mut ProtocolContext<'_>, from: NodeId, theirs: Snapshot) {
        self.note_heard(ctx, from, &theirs);
        if !self.airborne() || self.shuns(ctx.now(), from) {
            return;
        }
        let now = ctx.now();
        let accept = match self.phase {
            Phase::Solo => !self.someone_between(now, from),
            // Crossed requests: the higher id yields to the lower id's request.
            Phase::Requested { partner, since, .. } if partner == from => {
                now >= since + REQUEST_TIMEOUT || ctx.node_id() > from
            }
            // A request from a UAV closer than the one asked wins.
            Phase::Requested { partner, .. } => {
                let closer = self.heard.last().is_some_and(|y| y.id == from && self.lies_between(y, partner));
                closer || (self.is_solo(now) && !self.someone_between(now, from))
            }
        };
        if !accept {
            return;
        }
        let mine = self.snapshot(ctx);
        let confirm = self.message(ctx, MessageType::PairConfirm).to(from.as_i32());
        if ctx.send_message(confirm, Some(from)).is_err() {
            return;
        }
        self.exchange(ctx, from, mine, theirs);
    }

    fn on_pair_confirm(&mut self, ctx: &mut ProtocolContext<'_>, from: NodeId, theirs: Snapshot) {
        match self.phase {
            Phase::Requested { partner, mine, .. } if partner == from => self.exchange(ctx, from, mine, theirs),
            _ => log::debug!("node {}: stray pair confirm from {}", ctx.node_id(), from),
        }
    }

    fn exchange(&mut self, ctx: &mut ProtocolContext<'_>, partner: NodeId, mine: Snapshot, theirs: Snapshot) {
        let me = ctx.node_id();
        let farther = is_farther(&mine, me, &theirs, partner);
        self.pairings += 1;
        let now = ctx.now();
        // Earlier partners are no longer kept apart by this UAV's plan.
        self.quiet.clear();
        self.quiet.push((partner, now + SimTime::from_secs_f64(self.quiet_time)));
        if farther {
            let units = self.carried;
            let bearer = self.message(ctx, MessageType::Bearer).to(partner.as_i32()).with_data(clamp_units(units));
            if ctx.send_message(bearer, Some(partner)).is_ok() {
                self.carried -= clamp_units(units) as u64;
                ctx.record(ProtocolEvent::HandedOff { to: partner, units });
            }
        }
        let mut boundary = None;
        match self.variant {
            Variant::ZigZag => {
                issue(ctx, MobilityCommand::reverse());
                self.phase = Phase::Solo;
            }
            Variant::Dadca => {
                let (near, far) = if farther { (&theirs, &mine) } else { (&mine, &theirs) };
                let f = boundary_fraction(near.left, far.right);
                boundary = Some(f);
                if farther {
                    self.left = near.left + 1;
                } else {
                    self.right = far.right + 1;
                }
                self.phase = Phase::Solo;
                // Already flying to a boundary: keep that plan.
                let bound = !self.rendezvous.is_empty();
                if let Some(tour) = self.tour.clone().filter(|t| t.tour_len() > 1 && !bound) {
                    let tp = tour.point_at_fraction(f);
                    let order = if farther {
                        MobilityCommand::goto_coords(tp.position, tp.next, tp.last)
                    } else {
                        MobilityCommand::goto_coords(tp.position, tp.last, tp.next)
                    };
                    if ctx.send_command(order).is_ok() {
                        self.rendezvous.push(partner);
                    }
                }
            }
        }
        let _ = ctx.initiate_timeout(self.quiet_time);
        ctx.record(ProtocolEvent::Paired {
            partner,
            farther,
            left_neighbours: self.left,
            right_neighbours: self.right,
            boundary,
        });
        self.refresh_heartbeat(ctx);
    }

    fn at_tour_start(&self) -> bool {
        self.last == 0 && self.next < 0
    }

    fn deliver_to_ground(&mut self, ctx: &mut ProtocolContext<'_>) {
        let Some((ground, heard)) = self.ground else { return };
        if self.carried == 0 || ctx.now().saturating_sub(heard) > GROUND_WINDOW {
            return;
        }
        let units = clamp_units(self.carried);
        let bearer = self.message(ctx, MessageType::Bearer).to(ground.as_i32()).with_data(units);
        if ctx.send_message(bearer, Some(ground)).is_ok() {
            self.carried -= units as u64;
            ctx.record(ProtocolEvent::Delivered { to: ground, units: units as u64 });
        }
    }
}

fn clamp_units(units: u64) -> i32 {
    units.min(i32::MAX as u64) as i32
}

/// Orders a sibling module; failures only happen once the node is shut
/// down, when there is nothing left to do.
fn issue(ctx: &mut ProtocolContext<'_>, order: impl Into<crate::protocol::Command>) {
    if let Err(e) = ctx.send_command(order) {
        log::debug!("node {}: {}", ctx.node_id(), e);
    }
}

impl Protocol for UavProtocol {
    fn type_name(&self) -> &'static str {
        match self.variant {
            Variant::ZigZag => "ZigzagProtocol",
            Variant::Dadca => "DadcaProtocol",
        }
    }

    fn initialize(&mut self, ctx: &mut ProtocolContext<'_>) {
        issue(ctx, CommunicationCommand::set_target(""));
        self.refresh_heartbeat(ctx);
    }

    fn handle_telemetry(&mut self, ctx: &mut ProtocolContext<'_>, t: &Telemetry) {
        if let Some(tour) = &t.tour {
            self.tour = Some(tour.clone());
        }
        self.last = t.last_waypoint_id;
        self.next = t.next_waypoint_id;
        self.reversed = t.is_reversed;
        self.activity = t.drone_activity;
        if !self.rendezvous.is_empty() && t.drone_activity == DroneActivity::Navigating {
            let now = ctx.now();
            for p in std::mem::take(&mut self.rendezvous) {
                self.quiet.retain(|&(q, _)| q != p);
                self.quiet.push((p, now + SimTime::from_secs_f64(self.quiet_time)));
            }
            let _ = ctx.initiate_timeout(self.quiet_time);
        }
        if t.drone_activity == DroneActivity::ReachedEdge {
            if self.at_tour_start() {
                self.deliver_to_ground(ctx);
            }
            issue(ctx, MobilityCommand::reverse());
        }
        self.refresh_heartbeat(ctx);
    }

    fn before_periodic_send(&mut self, ctx: &mut ProtocolContext<'_>) {
        // Keeps the advertised position current for neighbours' ordering.
        self.refresh_heartbeat(ctx);
    }

    fn handle_packet(&mut self, ctx: &mut ProtocolContext<'_>, pkt: &Packet, msg: &SwarmMessage) {
        let me = ctx.node_id().as_i32();
        if msg.destination_id >= 0 && msg.destination_id != me {
            return;
        }
        let from = pkt.src;
        match (msg.sender_kind, msg.message_type) {
            (SenderKind::Ground, MessageType::Heartbeat) => {
                self.ground = Some((from, ctx.now()));
                if msg.destination_id == me {
                    ctx.record(ProtocolEvent::Acknowledged { by: from, units: msg.data_length.max(0) as u64 });
                }
            }
            (SenderKind::Sensor, MessageType::Bearer) | (SenderKind::Uav, MessageType::Bearer) => {
                let units = msg.data_length.max(0) as u64;
                if units > 0 {
                    self.carried += units;
                    ctx.record(ProtocolEvent::Collected { from, units });
                    self.refresh_heartbeat(ctx);
                }
            }
            (SenderKind::Uav, MessageType::Heartbeat) => {
                self.on_uav_heartbeat(ctx, from, Snapshot::from_message(msg))
            }
            (SenderKind::Uav, MessageType::PairRequest) => {
                self.on_pair_request(ctx, from, Snapshot::from_message(msg))
            }
            (SenderKind::Uav, MessageType::PairConfirm) => {
                self.on_pair_confirm(ctx, from, Snapshot::from_message(msg))
            }
            _ => {}
        }
    }

    fn stats(&self) -> ProtocolStats {
        ProtocolStats {
            carried: self.carried,
            received: 0,
            left_neighbours: Some(self.left),
            right_neighbours: Some(self.right),
            pairings: self.pairings,
        }
    }
}
