//! Minimal collect-and-drop protocol, kept as an example of writing a
//! protocol against the node API.
//!
//! UAVs patrol their tour, advertising how much data they carry. Sensors
//! answer with readings. When a UAV hears the ground station it sends its
//! payload there and drops it once the station acknowledges.

use crate::mobility::{DroneActivity, MobilityCommand, Telemetry};
use crate::network::{CommunicationCommand, Packet};
use crate::protocol::{Protocol, ProtocolContext, ProtocolEvent, ProtocolStats};
use crate::protocols::message::{MessageType, SenderKind, SwarmMessage};
use crate::time::SimTime;

/// A delivery without acknowledgement is retried after this long.
const ACK_WAIT: SimTime = SimTime::from_micros(2_000_000);

#[derive(Debug, Default)]
pub struct SimpleProtocol {
    carried: u64,
    awaiting_ack: Option<SimTime>,
}

impl SimpleProtocol {
    pub fn new() -> Self {
        Self::default()
    }

    fn heartbeat(&self, ctx: &mut ProtocolContext<'_>) {
        let hb = SwarmMessage::new(MessageType::Heartbeat, SenderKind::Uav, ctx.node_id().as_i32())
            .with_data(self.carried.min(i32::MAX as u64) as i32);
        let _ = ctx.send_command(CommunicationCommand::set_payload(hb));
    }
}

impl Protocol for SimpleProtocol {
    fn type_name(&self) -> &'static str {
        "SimpleProtocol"
    }

    fn initialize(&mut self, ctx: &mut ProtocolContext<'_>) {
        let _ = ctx.send_command(CommunicationCommand::set_target(""));
        self.heartbeat(ctx);
    }

    fn handle_telemetry(&mut self, ctx: &mut ProtocolContext<'_>, t: &Telemetry) {
        if t.drone_activity == DroneActivity::ReachedEdge {
            let _ = ctx.send_command(MobilityCommand::reverse());
        }
    }

    fn handle_packet(&mut self, ctx: &mut ProtocolContext<'_>, pkt: &Packet, msg: &SwarmMessage) {
        let me = ctx.node_id().as_i32();
        if msg.destination_id >= 0 && msg.destination_id != me {
            return;
        }
        match (msg.sender_kind, msg.message_type) {
            (SenderKind::Sensor, MessageType::Bearer) if msg.data_length > 0 => {
                self.carried += msg.data_length as u64;
                ctx.record(ProtocolEvent::Collected { from: pkt.src, units: msg.data_length as u64 });
                self.heartbeat(ctx);
            }
            (SenderKind::Ground, MessageType::Heartbeat) if msg.destination_id == me => {
                let units = (msg.data_length.max(0) as u64).min(self.carried);
                self.carried -= units;
                self.awaiting_ack = None;
                ctx.record(ProtocolEvent::Acknowledged { by: pkt.src, units });
                self.heartbeat(ctx);
            }
            (SenderKind::Ground, MessageType::Heartbeat) => {
                let waiting = matches!(self.awaiting_ack, Some(since) if ctx.now() < since + ACK_WAIT);
                if self.carried > 0 && !waiting {
                    let units = self.carried.min(i32::MAX as u64);
                    let bearer = SwarmMessage::new(MessageType::Bearer, SenderKind::Uav, me)
                        .to(pkt.src.as_i32())
                        .with_data(units as i32);
                    if ctx.send_message(bearer, Some(pkt.src)).is_ok() {
                        self.awaiting_ack = Some(ctx.now());
                        ctx.record(ProtocolEvent::Delivered { to: pkt.src, units });
                    }
                }
            }
            _ => {}
        }
    }

    fn stats(&self) -> ProtocolStats {
        ProtocolStats { carried: self.carried, ..Default::default() }
    }
}
