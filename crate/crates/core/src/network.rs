//! Unit-disk radio medium and the per-node communication module.
//!
//! The medium delivers a transmission to every listening node within
//! `range` of the sender (checked at send time), after a fixed plus
//! distance-proportional delay, dropping each copy independently with
//! `loss_probability`. There is no contention or collision model.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mission::Coord3;
use crate::protocols::message::{DecodeError, SwarmMessage, WIRE_SIZE};
use crate::rng::RngStream;
use crate::time::SimTime;

/// IPv4 + UDP header bytes added on top of the swarm message.
pub const HEADER_BYTES: usize = 28;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn as_i32(self) -> i32 {
        self.0 as i32
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Address {
    Broadcast,
    Node(NodeId),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Packet {
    pub src: NodeId,
    pub dst: Address,
    /// The receiving node this copy is addressed to.
    pub receiver: NodeId,
    pub payload: Vec<u8>,
    pub length: usize,
    pub sent_at: SimTime,
    pub delivered_at: SimTime,
}

impl Packet {
    pub fn decode(&self) -> Result<SwarmMessage, DecodeError> {
        SwarmMessage::decode(&self.payload)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[repr(i32)]
pub enum CommunicationCommandType {
    SetPayload = 0,
    SetTarget = 1,
    /// One-shot transmission of `payload_template` to `target`.
    SendMessage = 2,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CommunicationCommand {
    pub command_type: CommunicationCommandType,
    pub payload_template: Option<SwarmMessage>,
    /// Node name; empty means broadcast.
    pub target: String,
}

impl CommunicationCommand {
    pub fn set_payload(msg: SwarmMessage) -> Self {
        CommunicationCommand {
            command_type: CommunicationCommandType::SetPayload,
            payload_template: Some(msg),
            target: String::new(),
        }
    }

    pub fn set_target(target: impl Into<String>) -> Self {
        CommunicationCommand {
            command_type: CommunicationCommandType::SetTarget,
            payload_template: None,
            target: target.into(),
        }
    }

    pub fn send(msg: SwarmMessage, target: impl Into<String>) -> Self {
        CommunicationCommand {
            command_type: CommunicationCommandType::SendMessage,
            payload_template: Some(msg),
            target: target.into(),
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CommError {
    #[error("SET_PAYLOAD without a payload template")]
    MissingPayload,
    #[error("unknown target node `{0}`")]
    UnknownTarget(String),
    #[error("communication has not started")]
    NotStarted,
    #[error("node is shut down")]
    InactiveNode,
}

#[derive(Debug, Error, PartialEq)]
pub enum RadioConfigError {
    #[error("radio range must be positive and finite, got {0}")]
    Range(f64),
    #[error("loss probability must be in [0, 1], got {0}")]
    Loss(f64),
    #[error("per-meter delay must be non-negative and finite, got {0}")]
    Delay(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadioConfig {
    pub range: f64,
    pub loss_probability: f64,
    pub delay_fixed: SimTime,
    /// Seconds of extra delay per meter of distance.
    pub delay_per_meter: f64,
}

impl Default for RadioConfig {
    fn default() -> Self {
        RadioConfig {
            range: 100.0,
            loss_probability: 0.0,
            delay_fixed: SimTime::from_millis(1),
            delay_per_meter: 0.0,
        }
    }
}

impl RadioConfig {
    pub fn validate(&self) -> Result<(), RadioConfigError> {
        if !(self.range > 0.0 && self.range.is_finite()) {
            return Err(RadioConfigError::Range(self.range));
        }
        if !(0.0..=1.0).contains(&self.loss_probability) {
            return Err(RadioConfigError::Loss(self.loss_probability));
        }
        if !(self.delay_per_meter >= 0.0 && self.delay_per_meter.is_finite()) {
            return Err(RadioConfigError::Delay(self.delay_per_meter));
        }
        Ok(())
    }

    pub fn delay_for(&self, distance: f64) -> SimTime {
        self.delay_fixed + SimTime::from_secs_f64(self.delay_per_meter * distance)
    }
}

/// Medium bookkeeping. Every scheduled copy ends up delivered, dropped
/// because the receiver went inactive, or malformed; `lost` and
/// `unreachable` count copies that were never scheduled.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MediumStats {
    pub transmissions: u64,
    pub scheduled: u64,
    pub delivered: u64,
    pub lost: u64,
    pub unreachable: u64,
    pub dropped_inactive: u64,
    pub malformed: u64,
}

/// A potential receiver as seen at send time.
#[derive(Debug, Clone, Copy)]
pub struct Listener {
    pub id: NodeId,
    pub position: Coord3,
    pub listening: bool,
}

#[derive(Debug)]
pub struct Medium {
    config: RadioConfig,
    rng: RngStream,
    stats: MediumStats,
}

/// Outcome of handing a packet to its receiver.
#[derive(Debug, Clone, PartialEq)]
pub enum Delivery {
    Delivered(SwarmMessage),
    ReceiverInactive,
    Malformed(DecodeError),
}

impl Medium {
    pub fn new(config: RadioConfig, rng: RngStream) -> Self {
        Medium { config, rng, stats: MediumStats::default() }
    }

    pub fn config(&self) -> &RadioConfig {
        &self.config
    }

    pub fn stats(&self) -> &MediumStats {
        &self.stats
    }

    /// Plans the copies of one transmission. Listeners are visited in the
    /// order given, which callers keep sorted by node id so that loss draws
    /// are reproducible.
    pub fn transmit(
        &mut self,
        src: NodeId,
        src_pos: Coord3,
        dst: Address,
        payload: Vec<u8>,
        now: SimTime,
        listeners: &[Listener],
    ) -> Vec<Packet> {
        self.stats.transmissions += 1;
        let mut out = Vec::new();
        for l in listeners {
            if l.id == src {
                continue;
            }
            if let Address::Node(d) = dst {
                if d != l.id {
                    continue;
                }
            }
            let distance = src_pos.distance(&l.position);
            if !l.listening || distance > self.config.range {
                if matches!(dst, Address::Node(_)) {
                    self.stats.unreachable += 1;
                }
                continue;
            }
            if self.config.loss_probability > 0.0 && self.rng.bernoulli(self.config.loss_probability) {
                self.stats.lost += 1;
                continue;
            }
            self.stats.scheduled += 1;
            out.push(Packet {
                src,
                dst,
                receiver: l.id,
                length: payload.len() + HEADER_BYTES,
                payload: payload.clone(),
                sent_at: now,
                delivered_at: now + self.config.delay_for(distance),
            });
        }
        out
    }

    /// Decodes a packet for its receiver and updates the counters.
    pub fn deliver(&mut self, pkt: &Packet, receiver_active: bool) -> Delivery {
        if !receiver_active {
            self.stats.dropped_inactive += 1;
            return Delivery::ReceiverInactive;
        }
        match pkt.decode() {
            Ok(m) => {
                self.stats.delivered += 1;
                Delivery::Delivered(m)
            }
            Err(e) => {
                self.stats.malformed += 1;
                Delivery::Malformed(e)
            }
        }
    }
}

/// Destination of the periodic sender.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Target {
    Broadcast,
    Node(NodeId),
    /// One unicast copy per listed node, from `app.destAddresses`.
    List(Vec<NodeId>),
}

/// Per-node communication module: holds the payload template and target
/// the periodic sender transmits, and validates protocol orders.
#[derive(Debug, Clone)]
pub struct CommModule {
    payload: Option<SwarmMessage>,
    target: Target,
    send_interval: SimTime,
    start_time: SimTime,
    started: bool,
    active: bool,
}

impl CommModule {
    pub fn new(send_interval: SimTime, start_time: SimTime, default_target: Target) -> Self {
        assert!(send_interval > SimTime::ZERO, "send interval must be positive");
        CommModule { payload: None, target: default_target, send_interval, start_time, started: false, active: true }
    }

    pub fn send_interval(&self) -> SimTime {
        self.send_interval
    }

    pub fn start_time(&self) -> SimTime {
        self.start_time
    }

    pub fn is_started(&self) -> bool {
        self.started
    }

    pub fn is_active(&self) -> bool {
        self.active
    }

    pub fn payload(&self) -> Option<&SwarmMessage> {
        self.payload.as_ref()
    }

    pub fn target(&self) -> &Target {
        &self.target
    }

    pub fn start(&mut self) {
        if self.active {
            self.started = true;
        }
    }

    pub fn deactivate(&mut self) {
        self.active = false;
    }

    /// Listening means able to receive: active and started.
    pub fn is_listening(&self) -> bool {
        self.active && self.started
    }

    pub fn check_can_send(&self) -> Result<(), CommError> {
        if !self.active {
            Err(CommError::InactiveNode)
        } else if !self.started {
            Err(CommError::NotStarted)
        } else {
            Ok(())
        }
    }

    /// Applies a protocol order. `SEND_MESSAGE` is returned to the caller as
    /// an immediate transmission; the other two only change state.
    pub fn handle_command<F>(
        &mut self,
        cmd: &CommunicationCommand,
        resolve: F,
    ) -> Result<Option<(Address, SwarmMessage)>, CommError>
    where
        F: Fn(&str) -> Option<NodeId>,
    {
        let lookup = |name: &str| -> Result<Address, CommError> {
            let name = name.trim();
            if name.is_empty() {
                Ok(Address::Broadcast)
            } else {
                resolve(name).map(Address::Node).ok_or_else(|| CommError::UnknownTarget(name.to_string()))
            }
        };
        match cmd.command_type {
            CommunicationCommandType::SetPayload => {
                let msg = cmd.payload_template.ok_or(CommError::MissingPayload)?;
                self.payload = Some(msg);
                Ok(None)
            }
            CommunicationCommandType::SetTarget => {
                self.target = match lookup(&cmd.target)? {
                    Address::Broadcast => Target::Broadcast,
                    Address::Node(n) => Target::Node(n),
                };
                Ok(None)
            }
            CommunicationCommandType::SendMessage => {
                let msg = cmd.payload_template.ok_or(CommError::MissingPayload)?;
                let addr = lookup(&cmd.target)?;
                self.check_can_send()?;
                Ok(Some((addr, msg)))
            }
        }
    }

    /// What the periodic sender transmits now; empty when no payload has
    /// been set or the module cannot send.
    pub fn periodic_tick(&self) -> Vec<(Address, SwarmMessage)> {
        if self.check_can_send().is_err() {
            return Vec::new();
        }
        let Some(msg) = self.payload else { return Vec::new() };
        match &self.target {
            Target::Broadcast => vec![(Address::Broadcast, msg)],
            Target::Node(n) => vec![(Address::Node(*n), msg)],
            Target::List(ns) => ns.iter().map(|n| (Address::Node(*n), msg)).collect(),
        }
    }
}

pub fn encode_payload(msg: &SwarmMessage) -> Vec<u8> {
    let bytes = msg.encode();
    debug_assert_eq!(bytes.len(), WIRE_SIZE);
    bytes.to_vec()
}
