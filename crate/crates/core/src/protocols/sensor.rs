//! Stationary sensor: answers every UAV heartbeat with its pending data.
//!
//! A reading of `data_length` units is generated at time zero and then
//! every `generation_interval` (never again when the interval is zero).
//! Pending units are computed lazily from the clock, so no timers are
//! needed. Each reply empties the buffer; a reply may carry zero units.

use crate::network::{NodeId, Packet};
use crate::protocol::{Protocol, ProtocolContext, ProtocolEvent, ProtocolStats};
use crate::protocols::message::{MessageType, SenderKind, SwarmMessage};
use crate::time::SimTime;

pub const DEFAULT_DATA_LENGTH: u64 = 5;

#[derive(Debug)]
pub struct SensorProtocol {
    type_name: &'static str,
    data_length: u64,
    generation_interval: SimTime,
    sent: u64,
    replies: u64,
}

impl SensorProtocol {
    pub fn new(type_name: &'static str, data_length: u64, generation_interval: SimTime) -> Self {
        SensorProtocol { type_name, data_length, generation_interval, sent: 0, replies: 0 }
    }

    /// Units generated up to and including `now`.
    pub fn generated(&self, now: SimTime) -> u64 {
        if self.generation_interval == SimTime::ZERO {
            return self.data_length;
        }
        let readings = now.as_micros() / self.generation_interval.as_micros() + 1;
        readings.saturating_mul(self.data_length)
    }

    pub fn pending(&self, now: SimTime) -> u64 {
        self.generated(now) - self.sent
    }

    /// Units handed to UAVs so far.
    pub fn sent(&self) -> u64 {
        self.sent
    }

    pub fn replies(&self) -> u64 {
        self.replies
    }
}

impl Protocol for SensorProtocol {
    fn type_name(&self) -> &'static str {
        self.type_name
    }

    fn handle_packet(&mut self, ctx: &mut ProtocolContext<'_>, pkt: &Packet, msg: &SwarmMessage) {
        if msg.message_type != MessageType::Heartbeat || msg.sender_kind != SenderKind::Uav {
            return;
        }
        let to: NodeId = pkt.src;
        let units = self.pending(ctx.now()).min(i32::MAX as u64);
        let reply = SwarmMessage::new(MessageType::Bearer, SenderKind::Sensor, ctx.node_id().as_i32())
            .to(to.as_i32())
            .with_data(units as i32);
        if ctx.send_message(reply, Some(to)).is_ok() {
            self.sent += units;
            self.replies += 1;
            if units > 0 {
                ctx.record(ProtocolEvent::SensorSent { to, units });
            }
        }
    }

    fn stats(&self) -> ProtocolStats {
        ProtocolStats { carried: self.sent, ..Default::default() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::Address;
    use crate::protocol::Command;
    use crate::rng::RngFactory;

    fn hear(p: &mut SensorProtocol, now: SimTime, msg: SwarmMessage) -> Vec<SwarmMessage> {
        let names = vec!["quads[0]".to_string(), "sensors[0]".to_string()];
        let mut timeout = None;
        let mut rng = RngFactory::new(0).stream("s");
        let mut ctx = ProtocolContext::new(NodeId(1), "sensors[0]", now, true, &mut timeout, &mut rng, &names);
        let pkt = Packet {
            src: NodeId(0),
            dst: Address::Broadcast,
            receiver: NodeId(1),
            payload: msg.encode().to_vec(),
            length: 62,
            sent_at: now,
            delivered_at: now,
        };
        p.handle_packet(&mut ctx, &pkt, &msg);
        ctx.finish()
            .0
            .into_iter()
            .filter_map(|c| match c {
                Command::Communication(cc) => cc.payload_template,
                _ => None,
            })
            .collect()
    }

    #[test]
    fn replies_to_every_uav_heartbeat() {
        let mut p = SensorProtocol::new("ZigzagProtocolSensor", 5, SimTime::ZERO);
        let hb = SwarmMessage::new(MessageType::Heartbeat, SenderKind::Uav, 0);
        let first = hear(&mut p, SimTime::from_secs(1), hb);
        let second = hear(&mut p, SimTime::from_secs(1), hb);
        assert_eq!(first.len(), 1);
        assert_eq!(second.len(), 1);
        assert_eq!((first[0].message_type, first[0].destination_id, first[0].data_length), (MessageType::Bearer, 0, 5));
        assert_eq!(second[0].data_length, 0);
        assert_eq!(p.replies(), 2);
    }

    #[test]
    fn ignores_other_messages() {
        let mut p = SensorProtocol::new("ZigzagProtocolSensor", 5, SimTime::ZERO);
        for m in [
            SwarmMessage::new(MessageType::Bearer, SenderKind::Uav, 0),
            SwarmMessage::new(MessageType::PairRequest, SenderKind::Uav, 0),
            SwarmMessage::new(MessageType::Heartbeat, SenderKind::Ground, 0),
        ] {
            assert!(hear(&mut p, SimTime::ZERO, m).is_empty());
        }
    }

    #[test]
    fn periodic_generation() {
        let p = SensorProtocol::new("ZigzagProtocolSensor", 2, SimTime::from_secs(10));
        assert_eq!(p.generated(SimTime::ZERO), 2);
        assert_eq!(p.generated(SimTime::from_secs_f64(9.9)), 2);
        assert_eq!(p.generated(SimTime::from_secs(10)), 4);
        assert_eq!(p.generated(SimTime::from_secs(35)), 8);
    }
}
