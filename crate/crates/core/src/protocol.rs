//! The contract every node behaviour implements.
//!
//! A protocol reacts to packets forwarded by the communication module and
//! telemetry from the mobility module, and steers both through commands
//! queued on its [`ProtocolContext`]. Commands are applied to the sibling
//! modules as soon as the handler returns, within the same event.

use std::fmt::Debug;

use thiserror::Error;

use crate::mission::Coord3;
use crate::mobility::{MobilityCommand, Telemetry};
use crate::network::{CommunicationCommand, NodeId, Packet};
use crate::protocols::message::SwarmMessage;
use crate::rng::RngStream;
use crate::time::SimTime;

#[derive(Debug, Clone, PartialEq)]
pub enum Command {
    Mobility(MobilityCommand),
    Communication(CommunicationCommand),
}

impl From<MobilityCommand> for Command {
    fn from(c: MobilityCommand) -> Self {
        Command::Mobility(c)
    }
}

impl From<CommunicationCommand> for Command {
    fn from(c: CommunicationCommand) -> Self {
        Command::Communication(c)
    }
}

/// Observations a protocol reports for tracing. They have no effect on the
/// simulation.
#[derive(Debug, Clone, PartialEq)]
pub enum ProtocolEvent {
    Paired {
        partner: NodeId,
        farther: bool,
        left_neighbours: i32,
        right_neighbours: i32,
        /// Section boundary as a tour fraction, for protocols that compute one.
        boundary: Option<f64>,
    },
    Collected { from: NodeId, units: u64 },
    HandedOff { to: NodeId, units: u64 },
    Delivered { to: NodeId, units: u64 },
    Received { from: NodeId, units: u64 },
    Acknowledged { by: NodeId, units: u64 },
    SensorSent { to: NodeId, units: u64 },
}

#[derive(Debug, Error, PartialEq)]
pub enum ProtocolError {
    #[error("node is shut down")]
    InactiveNode,
    #[error("timeout duration must be positive, got {0} s")]
    NonPositiveDuration(f64),
}

/// Per-call view of the node a protocol runs on.
pub struct ProtocolContext<'a> {
    node_id: NodeId,
    node_name: &'a str,
    now: SimTime,
    active: bool,
    timeout: &'a mut Option<SimTime>,
    rng: &'a mut RngStream,
    names: &'a [String],
    position: Coord3,
    commands: Vec<Command>,
    events: Vec<ProtocolEvent>,
}

impl<'a> ProtocolContext<'a> {
    pub fn new(
        node_id: NodeId,
        node_name: &'a str,
        now: SimTime,
        active: bool,
        timeout: &'a mut Option<SimTime>,
        rng: &'a mut RngStream,
        names: &'a [String],
    ) -> Self {
        ProtocolContext {
            node_id,
            node_name,
            now,
            active,
            timeout,
            rng,
            names,
            position: Coord3::default(),
            commands: Vec::new(),
            events: Vec::new(),
        }
    }

    /// The node's own position as its navigation system reports it.
    pub fn with_position(mut self, position: Coord3) -> Self {
        self.position = position;
        self
    }

    pub fn position(&self) -> Coord3 {
        self.position
    }

    pub fn node_id(&self) -> NodeId {
        self.node_id
    }

    pub fn node_name(&self) -> &str {
        self.node_name
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn rng(&mut self) -> &mut RngStream {
        self.rng
    }

    /// Name of another node, for use as a communication target.
    pub fn name_of(&self, id: NodeId) -> Option<&str> {
        self.names.get(id.index()).map(String::as_str)
    }

    pub fn send_command(&mut self, order: impl Into<Command>) -> Result<(), ProtocolError> {
        if !self.active {
            return Err(ProtocolError::InactiveNode);
        }
        self.commands.push(order.into());
        Ok(())
    }

    /// One-shot transmission to node `to`, or broadcast when `None`.
    pub fn send_message(&mut self, msg: SwarmMessage, to: Option<NodeId>) -> Result<(), ProtocolError> {
        let target = match to {
            Some(id) => self.name_of(id).unwrap_or_default().to_string(),
            None => String::new(),
        };
        self.send_command(CommunicationCommand::send(msg, target))
    }

    /// Starts (or restarts) the quiet window. The latest call wins.
    pub fn initiate_timeout(&mut self, seconds: f64) -> Result<(), ProtocolError> {
        if !(seconds > 0.0) {
            return Err(ProtocolError::NonPositiveDuration(seconds));
        }
        *self.timeout = Some(self.now + SimTime::from_secs_f64(seconds));
        Ok(())
    }

    /// True strictly before the deadline set by the last `initiate_timeout`.
    pub fn is_timed_out(&self) -> bool {
        matches!(*self.timeout, Some(deadline) if self.now < deadline)
    }

    pub fn record(&mut self, event: ProtocolEvent) {
        self.events.push(event);
    }

    /// Hands the queued commands and events back to the caller.
    pub fn finish(self) -> (Vec<Command>, Vec<ProtocolEvent>) {
        (self.commands, self.events)
    }
}

/// Figures a protocol exposes for reports.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ProtocolStats {
    /// Data units currently carried (UAVs) or held (sensors).
    pub carried: u64,
    /// Data units accepted in total (ground station).
    pub received: u64,
    pub left_neighbours: Option<i32>,
    pub right_neighbours: Option<i32>,
    pub pairings: u64,
}

/// Node behaviour. All handlers default to no-ops.
pub trait Protocol: Debug {
    fn type_name(&self) -> &'static str;

    /// Called once when the node is created, before any other handler.
    fn initialize(&mut self, _ctx: &mut ProtocolContext<'_>) {}

    fn handle_packet(&mut self, _ctx: &mut ProtocolContext<'_>, _pkt: &Packet, _msg: &SwarmMessage) {}

    fn handle_telemetry(&mut self, _ctx: &mut ProtocolContext<'_>, _telemetry: &Telemetry) {}

    /// Called just before the node's periodic broadcast, so the payload can
    /// reflect the current state.
    fn before_periodic_send(&mut self, _ctx: &mut ProtocolContext<'_>) {}

    fn stats(&self) -> ProtocolStats {
        ProtocolStats::default()
    }
}

/// A protocol that does nothing; the behaviour of the base class.
#[derive(Debug, Default)]
pub struct NullProtocol;

impl Protocol for NullProtocol {
    fn type_name(&self) -> &'static str {
        "NullProtocol"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mobility::DroneActivity;
    use crate::network::Address;
    use crate::protocols::message::{MessageType, SenderKind};
    use crate::rng::RngFactory;

    struct Harness {
        timeout: Option<SimTime>,
        rng: RngStream,
        names: Vec<String>,
    }

    impl Harness {
        fn new() -> Self {
            Harness { timeout: None, rng: RngFactory::new(0).stream("protocol"), names: vec!["quads[0]".into()] }
        }

        fn ctx(&mut self, now: SimTime, active: bool) -> ProtocolContext<'_> {
            ProtocolContext::new(NodeId(0), "quads[0]", now, active, &mut self.timeout, &mut self.rng, &self.names)
        }
    }

    #[test]
    fn base_handlers_are_noops() {
        let mut h = Harness::new();
        let mut p = NullProtocol;
        let mut ctx = h.ctx(SimTime::ZERO, true);
        let msg = SwarmMessage::new(MessageType::Heartbeat, SenderKind::Uav, 1);
        let pkt = Packet {
            src: NodeId(1),
            dst: Address::Broadcast,
            receiver: NodeId(0),
            payload: msg.encode().to_vec(),
            length: 62,
            sent_at: SimTime::ZERO,
            delivered_at: SimTime::ZERO,
        };
        p.before_periodic_send(&mut ctx);
        p.handle_packet(&mut ctx, &pkt, &msg);
        p.handle_telemetry(
            &mut ctx,
            &Telemetry {
                next_waypoint_id: -1,
                last_waypoint_id: -1,
                current_command: -1,
                is_reversed: false,
                drone_activity: DroneActivity::Idle,
                tour: None,
            },
        );
        let (cmds, events) = ctx.finish();
        assert!(cmds.is_empty() && events.is_empty());
    }

    #[test]
    fn timeout_window() {
        let mut h = Harness::new();
        {
            let mut ctx = h.ctx(SimTime::from_secs(10), true);
            assert!(!ctx.is_timed_out());
            ctx.initiate_timeout(5.0).unwrap();
            assert!(ctx.is_timed_out());
        }
        assert!(h.ctx(SimTime::from_secs_f64(14.9), true).is_timed_out());
        assert!(!h.ctx(SimTime::from_secs(15), true).is_timed_out());
        assert!(!h.ctx(SimTime::from_secs_f64(15.1), true).is_timed_out());
    }

    #[test]
    fn reinitiating_replaces_deadline() {
        let mut h = Harness::new();
        h.ctx(SimTime::ZERO, true).initiate_timeout(5.0).unwrap();
        h.ctx(SimTime::from_secs(1), true).initiate_timeout(1.0).unwrap();
        assert!(!h.ctx(SimTime::from_secs(3), true).is_timed_out());
        h.ctx(SimTime::from_secs(3), true).initiate_timeout(10.0).unwrap();
        assert!(h.ctx(SimTime::from_secs(12), true).is_timed_out());
    }

    #[test]
    fn non_positive_timeout_rejected() {
        let mut h = Harness::new();
        let mut ctx = h.ctx(SimTime::ZERO, true);
        assert_eq!(ctx.initiate_timeout(0.0), Err(ProtocolError::NonPositiveDuration(0.0)));
        assert_eq!(ctx.initiate_timeout(-1.0), Err(ProtocolError::NonPositiveDuration(-1.0)));
    }

    #[test]
    fn inactive_node_cannot_command() {
        let mut h = Harness::new();
        let mut ctx = h.ctx(SimTime::ZERO, false);
        assert_eq!(ctx.send_command(MobilityCommand::reverse()), Err(ProtocolError::InactiveNode));
    }
}
