//! Ground station: advertises itself and accepts data deliveries.

use crate::network::{CommunicationCommand, NodeId, Packet};
use crate::protocol::{Protocol, ProtocolContext, ProtocolEvent, ProtocolStats};
use crate::protocols::message::{MessageType, SenderKind, SwarmMessage};
use crate::time::SimTime;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Delivery {
    pub at: SimTime,
    pub from: NodeId,
    pub units: u64,
}

#[derive(Debug, Default)]
pub struct GroundStationProtocol {
    received: u64,
    deliveries: Vec<Delivery>,
}

impl GroundStationProtocol {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn received(&self) -> u64 {
        self.received
    }

    pub fn deliveries(&self) -> &[Delivery] {
        &self.deliveries
    }
}

impl Protocol for GroundStationProtocol {
    fn type_name(&self) -> &'static str {
        "GroundStationProtocol"
    }

    fn initialize(&mut self, ctx: &mut ProtocolContext<'_>) {
        let hb = SwarmMessage::new(MessageType::Heartbeat, SenderKind::Ground, ctx.node_id().as_i32()).with_data(0);
        let _ = ctx.send_command(CommunicationCommand::set_target(""));
        let _ = ctx.send_command(CommunicationCommand::set_payload(hb));
    }

    fn handle_packet(&mut self, ctx: &mut ProtocolContext<'_>, pkt: &Packet, msg: &SwarmMessage) {
        let me = ctx.node_id().as_i32();
        if msg.message_type != MessageType::Bearer || msg.destination_id != me {
            return;
        }
        let units = msg.data_length.max(0) as u64;
        self.received += units;
        self.deliveries.push(Delivery { at: ctx.now(), from: pkt.src, units });
        ctx.record(ProtocolEvent::Received { from: pkt.src, units });
        let ack = SwarmMessage::new(MessageType::Heartbeat, SenderKind::Ground, me)
            .to(pkt.src.as_i32())
            .with_data(units.min(i32::MAX as u64) as i32);
        let _ = ctx.send_message(ack, Some(pkt.src));
    }

    fn stats(&self) -> ProtocolStats {
        ProtocolStats { received: self.received, ..Default::default() }
    }
}
