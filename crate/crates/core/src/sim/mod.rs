//! The simulated world: nodes wired to the scheduler and the radio medium.
//!
//! Each node owns a mobility module, a communication module, a protocol and
//! optional failure generators. Commands a protocol queues are applied to
//! the node's other modules before the triggering event returns, and any
//! telemetry they produce is fed straight back to the protocol.
//!
//! Everything a node does on its own at time zero (protocol start-up,
//! take-off, the first periodic transmission) happens while the world is
//! built, so a run to time zero processes no scheduler events.

pub mod spec;

use std::collections::BTreeMap;

use crate::engine::{EngineReport, EventHandle, LoggedEvent, Scheduler};
use crate::failures::{EnergyModel, FailureKind, FailureModule, RandomShutdown};
use crate::mission::Coord3;
use crate::mobility::{DroneMobility, Mobility, Telemetry};
use crate::network::{Address, CommModule, Delivery, Listener, Medium, MediumStats, NodeId, Packet, Target, HEADER_BYTES};
use crate::protocol::{Command, Protocol, ProtocolContext, ProtocolEvent, ProtocolStats};
use crate::protocols::message::{MessageType, SwarmMessage, WIRE_SIZE};
use crate::protocols::{create_protocol, UnknownProtocol};
use crate::rng::{RngFactory, RngStream};
use crate::time::SimTime;
use crate::trace::{DataAction, TraceRecord};

pub use spec::{build_world, MissionSource, NodeKind, NodeSpec, Placement, SpecError, WorldSpec, GROUND_STATION};

#[derive(Debug, Clone, PartialEq)]
enum SimEvent {
    Mobility(usize),
    CommStart(usize),
    PeriodicSend(usize),
    Deliver(Box<Packet>),
    FailureCheck(usize),
    PositionSample,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOptions {
    /// Interval between POSITION samples of every UAV; `None` disables them.
    pub position_interval: Option<SimTime>,
    /// Record TX and RX traces.
    pub trace_messages: bool,
    /// Keep a log line per processed event.
    pub event_log: bool,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions { position_interval: Some(SimTime::from_secs(1)), trace_messages: true, event_log: false }
    }
}

#[derive(Debug)]
struct Node {
    id: NodeId,
    name: String,
    kind: NodeKind,
    mobility: Mobility,
    comm: CommModule,
    protocol: Box<dyn Protocol>,
    timeout: Option<SimTime>,
    rng: RngStream,
    failures: FailureModule,
    mobility_timer: Option<EventHandle>,
    failure_timer: Option<EventHandle>,
}

impl Node {
    fn is_active(&self) -> bool {
        match &self.mobility {
            Mobility::Stationary { active, .. } => *active,
            Mobility::Drone(d) => d.is_active(),
        }
    }

    fn is_flying(&self) -> bool {
        self.mobility.as_drone().is_some_and(DroneMobility::is_flying)
    }
}

/// Running totals kept alongside the trace.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Counters {
    pub shutdowns: u64,
    pub rth_events: u64,
    pub pair_events: u64,
    /// Data units in BEARER messages that never reached their addressee.
    pub bearer_units_lost: u64,
}

pub struct Simulation {
    scenario: String,
    seed: u64,
    sched: Scheduler<SimEvent>,
    nodes: Vec<Node>,
    names: Vec<String>,
    by_name: BTreeMap<String, usize>,
    medium: Medium,
    options: SimOptions,
    trace: Vec<TraceRecord>,
    counters: Counters,
    event_log: Vec<LoggedEvent>,
    events_processed: u64,
}

impl std::fmt::Debug for Simulation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Simulation")
            .field("scenario", &self.scenario)
            .field("seed", &self.seed)
            .field("now", &self.sched.now())
            .field("nodes", &self.names)
            .finish()
    }
}

fn address_id(a: Address) -> i64 {
    match a {
        Address::Broadcast => -1,
        Address::Node(n) => n.0 as i64,
    }
}

impl Simulation {
    pub fn new(spec: &WorldSpec, options: SimOptions) -> Result<Self, SpecError> {
        let rngs = RngFactory::new(spec.seed);
        let names = spec.names();
        let by_name: BTreeMap<String, usize> = names.iter().enumerate().map(|(i, n)| (n.clone(), i)).collect();
        let mut nodes = Vec::with_capacity(spec.nodes.len());
        for (i, ns) in spec.nodes.iter().enumerate() {
            let protocol = create_protocol(&ns.protocol, &ns.params)
                .map_err(|source: UnknownProtocol| SpecError::Protocol { node: ns.name.clone(), source })?;
            let mobility = match &ns.placement {
                Placement::Drone { mission, speed, start_time } => {
                    Mobility::Drone(Box::new(DroneMobility::new(mission.clone(), *speed, *start_time)))
                }
                Placement::Fixed(p) => Mobility::stationary(*p),
            };
            let target = match &ns.destinations {
                None => Target::Broadcast,
                Some(list) => {
                    let ids = list
                        .iter()
                        .map(|n| {
                            by_name.get(n).map(|&j| NodeId(j as u32)).ok_or_else(|| SpecError::UnknownDestination {
                                node: ns.name.clone(),
                                target: n.clone(),
                            })
                        })
                        .collect::<Result<Vec<_>, _>>()?;
                    Target::List(ids)
                }
            };
            let mut failures = FailureModule::default();
            if let Some(e) = &ns.energy {
                failures.energy = Some(
                    EnergyModel::new(e.capacity, e.drain_flying, e.drain_idle, e.rth_threshold)
                        .map_err(|source| SpecError::Failure { node: ns.name.clone(), source })?,
                );
            }
            failures.shutdown = ns.shutdown_time.map(RandomShutdown::new);
            nodes.push(Node {
                id: NodeId(i as u32),
                name: ns.name.clone(),
                kind: ns.kind,
                mobility,
                comm: CommModule::new(ns.send_interval, ns.app_start, target),
                protocol,
                timeout: None,
                rng: rngs.stream(&format!("protocol/{}", ns.name)),
                failures,
                mobility_timer: None,
                failure_timer: None,
            });
        }
        let mut sim = Simulation {
            scenario: spec.scenario.clone(),
            seed: spec.seed,
            sched: Scheduler::new(),
            nodes,
            names,
            by_name,
            medium: Medium::new(spec.radio.clone(), rngs.stream("radio")),
            options,
            trace: Vec::new(),
            counters: Counters::default(),
            event_log: Vec::new(),
            events_processed: 0,
        };
        sim.initialize();
        Ok(sim)
    }

    fn initialize(&mut self) {
        let now = SimTime::ZERO;
        for i in 0..self.nodes.len() {
            self.run_protocol(i, |p, ctx| p.initialize(ctx));
            if let Some(d) = self.nodes[i].mobility.as_drone() {
                let t = d.initial_telemetry();
                self.run_protocol(i, |p, ctx| p.handle_telemetry(ctx, &t));
            }
            let tel = self.nodes[i].mobility.advance(now);
            self.after_mobility_change(i, tel);
            let start = self.nodes[i].comm.start_time();
            if start == now {
                self.nodes[i].comm.start();
            } else {
                self.schedule(start, SimEvent::CommStart(i));
            }
        }
        for i in 0..self.nodes.len() {
            if self.nodes[i].comm.is_started() {
                self.periodic_send(i);
            }
        }
        if self.options.position_interval.is_some() {
            self.sample_positions();
        }
    }

    fn schedule(&mut self, at: SimTime, ev: SimEvent) -> EventHandle {
        let at = at.max(self.sched.now());
        self.sched.schedule(at, ev).expect("never in the past")
    }

    pub fn now(&self) -> SimTime {
        self.sched.now()
    }

    pub fn scenario(&self) -> &str {
        &self.scenario
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn node_index(&self, name: &str) -> Option<usize> {
        self.by_name.get(name).copied()
    }

    pub fn node_kind(&self, i: usize) -> NodeKind {
        self.nodes[i].kind
    }

    pub fn protocol_name(&self, i: usize) -> &'static str {
        self.nodes[i].protocol.type_name()
    }

    pub fn position(&self, i: usize) -> Coord3 {
        self.nodes[i].mobility.position_at(self.now())
    }

    pub fn telemetry(&self, i: usize) -> Option<Telemetry> {
        self.nodes[i].mobility.current_telemetry()
    }

    pub fn is_active(&self, i: usize) -> bool {
        self.nodes[i].is_active()
    }

    pub fn stats(&self, i: usize) -> ProtocolStats {
        self.nodes[i].protocol.stats()
    }

    pub fn energy_level(&self, i: usize) -> Option<f64> {
        self.nodes[i].failures.energy.as_ref().map(EnergyModel::level)
    }

    /// Total data units accepted by ground stations.
    pub fn ground_received(&self) -> u64 {
        self.nodes.iter().filter(|n| n.kind == NodeKind::Ground).map(|n| n.protocol.stats().received).sum()
    }

    pub fn medium_stats(&self) -> &MediumStats {
        self.medium.stats()
    }

    pub fn counters(&self) -> &Counters {
        &self.counters
    }

    pub fn trace(&self) -> &[TraceRecord] {
        &self.trace
    }

    pub fn event_log(&self) -> &[LoggedEvent] {
        &self.event_log
    }

    pub fn events_processed(&self) -> u64 {
        self.events_processed
    }

    /// Processes the next event if it fires no later than `limit`; returns
    /// whether one was processed. The clock does not move otherwise.
    pub fn step(&mut self, limit: SimTime) -> bool {
        let Some(ev) = self.sched.pop_until(limit) else {
            return false;
        };
        self.events_processed += 1;
        if self.options.event_log {
            self.event_log.push(LoggedEvent {
                fire_at: ev.fire_at,
                sequence: ev.sequence,
                description: self.describe(&ev.payload),
            });
        }
        self.dispatch(ev.payload);
        true
    }

    /// Processes every event up to and including `t_end`, then moves the
    /// clock to `t_end`.
    pub fn run_until(&mut self, t_end: SimTime) -> EngineReport {
        let mut count = 0;
        while self.step(t_end) {
            count += 1;
        }
        self.sched.advance_clock(t_end);
        EngineReport { events_processed: count, final_clock: self.sched.now() }
    }

    fn describe(&self, ev: &SimEvent) -> String {
        match ev {
            SimEvent::Mobility(i) => format!("MOBILITY {}", self.names[*i]),
            SimEvent::CommStart(i) => format!("COMM_START {}", self.names[*i]),
            SimEvent::PeriodicSend(i) => format!("SEND {}", self.names[*i]),
            SimEvent::Deliver(p) => format!(
                "DELIVER {} -> {}",
                self.names[p.src.index()],
                self.names[p.receiver.index()]
            ),
            SimEvent::FailureCheck(i) => format!("FAILURE_CHECK {}", self.names[*i]),
            SimEvent::PositionSample => "POSITION_SAMPLE".to_string(),
        }
    }

    fn dispatch(&mut self, ev: SimEvent) {
        let now = self.now();
        match ev {
            SimEvent::Mobility(i) => {
                self.nodes[i].mobility_timer = None;
                let tel = self.nodes[i].mobility.advance(now);
                self.after_mobility_change(i, tel);
            }
            SimEvent::CommStart(i) => {
                self.nodes[i].comm.start();
                if self.nodes[i].comm.is_started() {
                    self.periodic_send(i);
                }
            }
            SimEvent::PeriodicSend(i) => self.periodic_send(i),
            SimEvent::Deliver(pkt) => self.deliver(*pkt),
            SimEvent::FailureCheck(i) => {
                self.nodes[i].failure_timer = None;
                let kinds = self.nodes[i].failures.check(now);
                self.apply_failures(i, kinds);
                self.sync_timers(i);
            }
            SimEvent::PositionSample => self.sample_positions(),
        }
    }

    fn sample_positions(&mut self) {
        let now = self.now();
        for n in &self.nodes {
            if n.kind == NodeKind::Uav {
                let p = n.mobility.position_at(now);
                self.trace.push(TraceRecord::Position { time: now, node: n.id.0, x: p.x, y: p.y, z: p.z });
            }
        }
        if let Some(dt) = self.options.position_interval.filter(|d| *d > SimTime::ZERO) {
            self.schedule(now + dt, SimEvent::PositionSample);
        }
    }

    fn periodic_send(&mut self, i: usize) {
        if self.nodes[i].is_active() {
            self.run_protocol(i, |p, ctx| p.before_periodic_send(ctx));
        }
        let sends = self.nodes[i].comm.periodic_tick();
        for (addr, msg) in sends {
            self.transmit(i, addr, msg);
        }
        if self.nodes[i].comm.is_active() {
            let next = self.now() + self.nodes[i].comm.send_interval();
            self.schedule(next, SimEvent::PeriodicSend(i));
        }
    }

    fn transmit(&mut self, i: usize, addr: Address, msg: SwarmMessage) {
        let now = self.now();
        let listeners: Vec<Listener> = self
            .nodes
            .iter()
            .map(|n| Listener { id: n.id, position: n.mobility.position_at(now), listening: n.comm.is_listening() })
            .collect();
        let src = &self.nodes[i];
        let src_pos = src.mobility.position_at(now);
        let packets = self.medium.transmit(src.id, src_pos, addr, msg.encode().to_vec(), now, &listeners);
        if self.options.trace_messages {
            self.trace.push(TraceRecord::Tx {
                time: now,
                node: src.id.0,
                destination: address_id(addr),
                message_type: msg.message_type.name().to_string(),
                bytes: WIRE_SIZE + HEADER_BYTES,
                copies: packets.len(),
            });
        }
        if msg.message_type == MessageType::Bearer && matches!(addr, Address::Node(_)) && packets.is_empty() {
            self.counters.bearer_units_lost += msg.data_length.max(0) as u64;
        }
        for p in packets {
            let at = p.delivered_at;
            self.schedule(at, SimEvent::Deliver(Box::new(p)));
        }
    }

    fn deliver(&mut self, pkt: Packet) {
        let r = pkt.receiver.index();
        let listening = self.nodes[r].comm.is_listening();
        match self.medium.deliver(&pkt, listening) {
            Delivery::Delivered(msg) => {
                if self.options.trace_messages {
                    self.trace.push(TraceRecord::Rx {
                        time: self.now(),
                        node: pkt.receiver.0,
                        source: pkt.src.0,
                        message_type: msg.message_type.name().to_string(),
                        sent_at: pkt.sent_at,
                    });
                }
                self.run_protocol(r, |p, ctx| p.handle_packet(ctx, &pkt, &msg));
            }
            Delivery::ReceiverInactive => {
                if let Ok(m) = pkt.decode() {
                    if m.message_type == MessageType::Bearer && matches!(pkt.dst, Address::Node(_)) {
                        self.counters.bearer_units_lost += m.data_length.max(0) as u64;
                    }
                }
            }
            Delivery::Malformed(e) => log::warn!("{}: dropped malformed packet: {e}", self.names[r]),
        }
    }

    fn run_protocol<F>(&mut self, i: usize, f: F)
    where
        F: FnOnce(&mut dyn Protocol, &mut ProtocolContext<'_>),
    {
        let now = self.now();
        let node = &mut self.nodes[i];
        let active = node.is_active();
        let (commands, events) = {
            let position = node.mobility.position_at(now);
            let mut ctx =
                ProtocolContext::new(node.id, &node.name, now, active, &mut node.timeout, &mut node.rng, &self.names)
                    .with_position(position);
            f(node.protocol.as_mut(), &mut ctx);
            ctx.finish()
        };
        for e in events {
            self.record_protocol_event(i, e);
        }
        for c in commands {
            self.apply_command(i, c);
        }
    }

    fn record_protocol_event(&mut self, i: usize, e: ProtocolEvent) {
        let time = self.now();
        let node = i as u32;
        let rec = match e {
            ProtocolEvent::Paired { partner, farther, left_neighbours, right_neighbours, boundary } => {
                if farther {
                    self.counters.pair_events += 1;
                }
                TraceRecord::Pair {
                    time,
                    node,
                    partner: partner.0,
                    farther,
                    left: left_neighbours,
                    right: right_neighbours,
                    boundary,
                }
            }
            ProtocolEvent::Collected { from, units } => {
                let action = if self.nodes[from.index()].kind == NodeKind::Uav {
                    DataAction::HandoffIn
                } else {
                    DataAction::Collect
                };
                TraceRecord::Data { time, node, peer: from.0, action, units }
            }
            ProtocolEvent::HandedOff { to, units } => {
                TraceRecord::Data { time, node, peer: to.0, action: DataAction::HandoffOut, units }
            }
            ProtocolEvent::Delivered { to, units } => {
                TraceRecord::Data { time, node, peer: to.0, action: DataAction::Deliver, units }
            }
            ProtocolEvent::Received { from, units } => {
                TraceRecord::Data { time, node, peer: from.0, action: DataAction::GroundReceive, units }
            }
            ProtocolEvent::Acknowledged { by, units } => {
                TraceRecord::Data { time, node, peer: by.0, action: DataAction::Ack, units }
            }
            ProtocolEvent::SensorSent { to, units } => {
                TraceRecord::Data { time, node, peer: to.0, action: DataAction::SensorSend, units }
            }
        };
        self.trace.push(rec);
    }

    fn apply_command(&mut self, i: usize, cmd: Command) {
        let now = self.now();
        match cmd {
            Command::Mobility(m) => {
                let result = self.nodes[i].mobility.handle_command(now, m);
                let outcome = match &result {
                    Ok(_) => "ok".to_string(),
                    Err(e) => e.to_string(),
                };
                self.trace.push(TraceRecord::Command {
                    time: now,
                    node: i as u32,
                    command: m.command_type.name().to_string(),
                    params: [m.param1, m.param2, m.param3, m.param4, m.param5],
                    outcome,
                });
                match result {
                    Ok(tel) => self.after_mobility_change(i, tel),
                    Err(e) => log::debug!("{}: {} rejected: {e}", self.names[i], m.command_type.name()),
                }
            }
            Command::Communication(c) => {
                let by_name = &self.by_name;
                let result =
                    self.nodes[i].comm.handle_command(&c, |n| by_name.get(n).map(|&j| NodeId(j as u32)));
                match result {
                    Ok(Some((addr, msg))) => self.transmit(i, addr, msg),
                    Ok(None) => {}
                    Err(e) => log::debug!("{}: communication command rejected: {e}", self.names[i]),
                }
            }
        }
    }

    fn after_mobility_change(&mut self, i: usize, telemetry: Vec<Telemetry>) {
        let now = self.now();
        if !self.nodes[i].is_active() && self.nodes[i].comm.is_active() {
            self.nodes[i].comm.deactivate();
        }
        let flying = self.nodes[i].is_flying();
        let changed = self.nodes[i].failures.energy.as_ref().is_some_and(|e| e.is_flying() != flying);
        let kinds = self.nodes[i].failures.set_flying(now, flying);
        if changed {
            self.record_energy(i);
        }
        self.apply_failures(i, kinds);
        for t in telemetry {
            self.run_protocol(i, |p, ctx| p.handle_telemetry(ctx, &t));
        }
        self.sync_timers(i);
    }

    fn record_energy(&mut self, i: usize) {
        if let Some(e) = &self.nodes[i].failures.energy {
            self.trace.push(TraceRecord::Energy { time: self.now(), node: i as u32, level: e.level(), flying: e.is_flying() });
        }
    }

    fn apply_failures(&mut self, i: usize, kinds: Vec<FailureKind>) {
        for k in kinds {
            match k {
                FailureKind::ReturnToHome => self.counters.rth_events += 1,
                FailureKind::Shutdown => self.counters.shutdowns += 1,
            }
            self.record_energy(i);
            self.trace.push(TraceRecord::Failure { time: self.now(), node: i as u32, failure: k.name().to_string() });
            log::info!("{}: {} at {}", self.names[i], k.name(), self.now());
            self.apply_command(i, Command::Mobility(k.command()));
        }
    }

    /// Keeps exactly one pending mobility event and one failure check per
    /// node, at the times the modules currently report.
    fn sync_timers(&mut self, i: usize) {
        let want = self.nodes[i].mobility.next_transition();
        let have = self.nodes[i].mobility_timer.filter(|h| self.sched.is_pending(*h));
        if have.map(|h| h.fire_at()) != want {
            if let Some(h) = have {
                self.sched.cancel(h);
            }
            self.nodes[i].mobility_timer = want.map(|t| self.schedule(t, SimEvent::Mobility(i)));
        }
        let want = self.nodes[i].failures.next_check();
        let have = self.nodes[i].failure_timer.filter(|h| self.sched.is_pending(*h));
        if have.map(|h| h.fire_at()) != want {
            if let Some(h) = have {
                self.sched.cancel(h);
            }
            self.nodes[i].failure_timer = want.map(|t| self.schedule(t, SimEvent::FailureCheck(i)));
        }
    }
}
