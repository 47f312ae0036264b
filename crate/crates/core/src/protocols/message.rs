//! The 34-byte swarm PDU exchanged between UAVs, sensors and the ground station.
//!
//! Layout, little-endian:
//!
//! | offset | size | field            |
//! |--------|------|------------------|
//! | 0      | 1    | message type     |
//! | 1      | 1    | sender kind      |
//! | 2      | 2    | segment progress |
//! | 4      | 4    | source id        |
//! | 8      | 4    | destination id   |
//! | 12     | 4    | next waypoint    |
//! | 16     | 4    | last waypoint    |
//! | 20     | 4    | data length      |
//! | 24     | 4    | left neighbours  |
//! | 28     | 4    | right neighbours |
//! | 32     | 1    | reversed flag    |
//! | 33     | 1    | padding (zero)   |
//!
//! Segment progress is how far along its current tour segment a UAV is,
//! in 1/65535ths of the segment, measured from the lower-indexed end.

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const WIRE_SIZE: usize = 34;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[repr(u8)]
pub enum MessageType {
    Heartbeat = 0,
    PairRequest = 1,
    PairConfirm = 2,
    Bearer = 3,
}

impl MessageType {
    pub fn name(self) -> &'static str {
        match self {
            MessageType::Heartbeat => "HEARTBEAT",
            MessageType::PairRequest => "PAIR_REQUEST",
            MessageType::PairConfirm => "PAIR_CONFIRM",
            MessageType::Bearer => "BEARER",
        }
    }

    fn from_u8(v: u8) -> Option<Self> {
        match v {
            0 => Some(MessageType::Heartbeat),
            1 => Some(MessageType::PairRequest),
            2 => Some(MessageType::PairConfirm),
            3 => Some(MessageType::Bearer),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[repr(u8)]
pub enum SenderKind {
    Uav = 0,
    Sensor = 1,
    Ground = 2,
}

impl SenderKind {
    pub fn name(self) -> &'static str {
        match self {
            SenderKind::Uav => "UAV",
            SenderKind::Sensor => "SENSOR",
            SenderKind::Ground => "GROUND",
        }
    }

    fn from_u8(v: u8) -> Option<Self> {
        match v {
            0 => Some(SenderKind::Uav),
            1 => Some(SenderKind::Sensor),
            2 => Some(SenderKind::Ground),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SwarmMessage {
    pub message_type: MessageType,
    pub sender_kind: SenderKind,
    pub source_id: i32,
    pub destination_id: i32,
    pub next_waypoint_id: i32,
    pub last_waypoint_id: i32,
    pub data_length: i32,
    pub left_neighbours: i32,
    pub right_neighbours: i32,
    pub reversed: bool,
    pub segment_progress: u16,
}

impl Default for SwarmMessage {
    fn default() -> Self {
        SwarmMessage {
            message_type: MessageType::Heartbeat,
            sender_kind: SenderKind::Uav,
            source_id: -1,
            destination_id: -1,
            next_waypoint_id: -1,
            last_waypoint_id: -1,
            data_length: 5,
            left_neighbours: 0,
            right_neighbours: 0,
            reversed: false,
            segment_progress: 0,
        }
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum DecodeError {
    #[error("expected {WIRE_SIZE} bytes, got {0}")]
    Length(usize),
    #[error("unknown message type {0}")]
    MessageType(u8),
    #[error("unknown sender kind {0}")]
    SenderKind(u8),
    #[error("reversed flag must be 0 or 1, got {0}")]
    Flag(u8),
}

impl SwarmMessage {
    pub fn new(message_type: MessageType, sender_kind: SenderKind, source_id: i32) -> Self {
        SwarmMessage { message_type, sender_kind, source_id, ..Default::default() }
    }

    pub fn to(mut self, destination_id: i32) -> Self {
        self.destination_id = destination_id;
        self
    }

    pub fn with_data(mut self, units: i32) -> Self {
        self.data_length = units;
        self
    }

    pub fn encode(&self) -> [u8; WIRE_SIZE] {
        let mut b = [0u8; WIRE_SIZE];
        b[0] = self.message_type as u8;
        b[1] = self.sender_kind as u8;
        let ints = [
            self.source_id,
            self.destination_id,
            self.next_waypoint_id,
            self.last_waypoint_id,
            self.data_length,
            self.left_neighbours,
            self.right_neighbours,
        ];
        for (i, v) in ints.iter().enumerate() {
            let at = 4 + 4 * i;
            b[at..at + 4].copy_from_slice(&v.to_le_bytes());
        }
        b[2..4].copy_from_slice(&self.segment_progress.to_le_bytes());
        b[32] = self.reversed as u8;
        b
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, DecodeError> {
        if bytes.len() != WIRE_SIZE {
            return Err(DecodeError::Length(bytes.len()));
        }
        let int = |i: usize| {
            let at = 4 + 4 * i;
            i32::from_le_bytes(bytes[at..at + 4].try_into().expect("4 bytes"))
        };
        let message_type = MessageType::from_u8(bytes[0]).ok_or(DecodeError::MessageType(bytes[0]))?;
        let sender_kind = SenderKind::from_u8(bytes[1]).ok_or(DecodeError::SenderKind(bytes[1]))?;
        let reversed = match bytes[32] {
            0 => false,
            1 => true,
            other => return Err(DecodeError::Flag(other)),
        };
        Ok(SwarmMessage {
            message_type,
            sender_kind,
            source_id: int(0),
            destination_id: int(1),
            next_waypoint_id: int(2),
            last_waypoint_id: int(3),
            data_length: int(4),
            left_neighbours: int(5),
            right_neighbours: int(6),
            reversed,
            segment_progress: u16::from_le_bytes([bytes[2], bytes[3]]),
        })
    }
}
