//! Trace records and their CSV form, one file per record kind.
//!
//! Times are written as exact `seconds.micros` and floats with Rust's
//! shortest round-trip formatting, so reading a file back yields the same
//! records bit for bit.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use thiserror::Error;

use crate::time::SimTime;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TraceKind {
    Position,
    Tx,
    Rx,
    Pair,
    Data,
    Energy,
    Failure,
    Command,
}

impl TraceKind {
    pub const ALL: [TraceKind; 8] = [
        TraceKind::Position,
        TraceKind::Tx,
        TraceKind::Rx,
        TraceKind::Pair,
        TraceKind::Data,
        TraceKind::Energy,
        TraceKind::Failure,
        TraceKind::Command,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TraceKind::Position => "POSITION",
            TraceKind::Tx => "TX",
            TraceKind::Rx => "RX",
            TraceKind::Pair => "PAIR",
            TraceKind::Data => "DATA",
            TraceKind::Energy => "ENERGY",
            TraceKind::Failure => "FAILURE",
            TraceKind::Command => "COMMAND",
        }
    }

    pub fn file_name(self) -> String {
        format!("{}.csv", self.name().to_ascii_lowercase())
    }

    pub fn header(self) -> &'static [&'static str] {
        match self {
            TraceKind::Position => &["time", "node", "x", "y", "z"],
            TraceKind::Tx => &["time", "node", "destination", "message_type", "bytes", "copies"],
            TraceKind::Rx => &["time", "node", "source", "message_type", "sent_at"],
            TraceKind::Pair => &["time", "node", "partner", "farther", "left", "right", "boundary"],
            TraceKind::Data => &["time", "node", "peer", "action", "units"],
            TraceKind::Energy => &["time", "node", "level", "flying"],
            TraceKind::Failure => &["time", "node", "failure"],
            TraceKind::Command => &["time", "node", "command", "param1", "param2", "param3", "param4", "param5", "outcome"],
        }
    }
}

/// What happened to data units, from the point of view of `node`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DataAction {
    /// UAV received readings from a sensor.
    Collect,
    /// UAV received data handed over by another UAV.
    HandoffIn,
    /// UAV handed its data to another UAV.
    HandoffOut,
    /// UAV sent its data to the ground station.
    Deliver,
    /// Ground station accepted a delivery.
    GroundReceive,
    /// UAV got the ground station's acknowledgement.
    Ack,
    /// Sensor sent readings to a UAV.
    SensorSend,
}

impl DataAction {
    pub fn name(self) -> &'static str {
        match self {
            DataAction::Collect => "COLLECT",
            DataAction::HandoffIn => "HANDOFF_IN",
            DataAction::HandoffOut => "HANDOFF_OUT",
            DataAction::Deliver => "DELIVER",
            DataAction::GroundReceive => "GROUND_RECEIVE",
            DataAction::Ack => "ACK",
            DataAction::SensorSend => "SENSOR_SEND",
        }
    }
}

impl FromStr for DataAction {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "COLLECT" => DataAction::Collect,
            "HANDOFF_IN" => DataAction::HandoffIn,
            "HANDOFF_OUT" => DataAction::HandoffOut,
            "DELIVER" => DataAction::Deliver,
            "GROUND_RECEIVE" => DataAction::GroundReceive,
            "ACK" => DataAction::Ack,
            "SENSOR_SEND" => DataAction::SensorSend,
            other => return Err(format!("unknown data action `{other}`")),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TraceRecord {
    Position { time: SimTime, node: u32, x: f64, y: f64, z: f64 },
    /// `destination` is -1 for broadcast; `copies` counts scheduled deliveries.
    Tx { time: SimTime, node: u32, destination: i64, message_type: String, bytes: usize, copies: usize },
    Rx { time: SimTime, node: u32, source: u32, message_type: String, sent_at: SimTime },
    Pair { time: SimTime, node: u32, partner: u32, farther: bool, left: i32, right: i32, boundary: Option<f64> },
    Data { time: SimTime, node: u32, peer: u32, action: DataAction, units: u64 },
    Energy { time: SimTime, node: u32, level: f64, flying: bool },
    Failure { time: SimTime, node: u32, failure: String },
    Command { time: SimTime, node: u32, command: String, params: [f64; 5], outcome: String },
}

impl TraceRecord {
    pub fn kind(&self) -> TraceKind {
        match self {
            TraceRecord::Position { .. } => TraceKind::Position,
            TraceRecord::Tx { .. } => TraceKind::Tx,
            TraceRecord::Rx { .. } => TraceKind::Rx,
            TraceRecord::Pair { .. } => TraceKind::Pair,
            TraceRecord::Data { .. } => TraceKind::Data,
            TraceRecord::Energy { .. } => TraceKind::Energy,
            TraceRecord::Failure { .. } => TraceKind::Failure,
            TraceRecord::Command { .. } => TraceKind::Command,
        }
    }

    pub fn time(&self) -> SimTime {
        match self {
            TraceRecord::Position { time, .. }
            | TraceRecord::Tx { time, .. }
            | TraceRecord::Rx { time, .. }
            | TraceRecord::Pair { time, .. }
            | TraceRecord::Data { time, .. }
            | TraceRecord::Energy { time, .. }
            | TraceRecord::Failure { time, .. }
            | TraceRecord::Command { time, .. } => *time,
        }
    }

    pub fn node(&self) -> u32 {
        match self {
            TraceRecord::Position { node, .. }
            | TraceRecord::Tx { node, .. }
            | TraceRecord::Rx { node, .. }
            | TraceRecord::Pair { node, .. }
            | TraceRecord::Data { node, .. }
            | TraceRecord::Energy { node, .. }
            | TraceRecord::Failure { node, .. }
            | TraceRecord::Command { node, .. } => *node,
        }
    }

    pub fn to_row(&self) -> Vec<String> {
        let t = self.time().to_string();
        let n = self.node().to_string();
        match self {
            TraceRecord::Position { x, y, z, .. } => vec![t, n, x.to_string(), y.to_string(), z.to_string()],
            TraceRecord::Tx { destination, message_type, bytes, copies, .. } => {
                vec![t, n, destination.to_string(), message_type.clone(), bytes.to_string(), copies.to_string()]
            }
            TraceRecord::Rx { source, message_type, sent_at, .. } => {
                vec![t, n, source.to_string(), message_type.clone(), sent_at.to_string()]
            }
            TraceRecord::Pair { partner, farther, left, right, boundary, .. } => vec![
                t,
                n,
                partner.to_string(),
                farther.to_string(),
                left.to_string(),
                right.to_string(),
                boundary.map(|b| b.to_string()).unwrap_or_default(),
            ],
            TraceRecord::Data { peer, action, units, .. } => {
                vec![t, n, peer.to_string(), action.name().to_string(), units.to_string()]
            }
            TraceRecord::Energy { level, flying, .. } => vec![t, n, level.to_string(), flying.to_string()],
            TraceRecord::Failure { failure, .. } => vec![t, n, failure.clone()],
            TraceRecord::Command { command, params, outcome, .. } => {
                let mut row = vec![t, n, command.clone()];
                row.extend(params.iter().map(|p| p.to_string()));
                row.push(outcome.clone());
                row
            }
        }
    }

    pub fn from_row(kind: TraceKind, row: &[&str]) -> Result<Self, TraceError> {
        let bad = |what: &str| TraceError::Row { kind: kind.name(), reason: format!("bad {what} in {row:?}") };
        if row.len() != kind.header().len() {
            return Err(TraceError::Row {
                kind: kind.name(),
                reason: format!("expected {} columns, got {}", kind.header().len(), row.len()),
            });
        }
        fn num<T: FromStr>(s: &str, what: &str, bad: &dyn Fn(&str) -> TraceError) -> Result<T, TraceError> {
            s.parse().map_err(|_| bad(what))
        }
        let time = SimTime::parse_exact(row[0]).ok_or_else(|| bad("time"))?;
        let node: u32 = num(row[1], "node", &bad)?;
        Ok(match kind {
            TraceKind::Position => TraceRecord::Position {
                time,
                node,
                x: num(row[2], "x", &bad)?,
                y: num(row[3], "y", &bad)?,
                z: num(row[4], "z", &bad)?,
            },
            TraceKind::Tx => TraceRecord::Tx {
                time,
                node,
                destination: num(row[2], "destination", &bad)?,
                message_type: row[3].to_string(),
                bytes: num(row[4], "bytes", &bad)?,
                copies: num(row[5], "copies", &bad)?,
            },
            TraceKind::Rx => TraceRecord::Rx {
                time,
                node,
                source: num(row[2], "source", &bad)?,
                message_type: row[3].to_string(),
                sent_at: SimTime::parse_exact(row[4]).ok_or_else(|| bad("sent_at"))?,
            },
            TraceKind::Pair => TraceRecord::Pair {
                time,
                node,
                partner: num(row[2], "partner", &bad)?,
                farther: num(row[3], "farther", &bad)?,
                left: num(row[4], "left", &bad)?,
                right: num(row[5], "right", &bad)?,
                boundary: if row[6].is_empty() { None } else { Some(num(row[6], "boundary", &bad)?) },
            },
            TraceKind::Data => TraceRecord::Data {
                time,
                node,
                peer: num(row[2], "peer", &bad)?,
                action: row[3].parse().map_err(|_| bad("action"))?,
                units: num(row[4], "units", &bad)?,
            },
            TraceKind::Energy => TraceRecord::Energy {
                time,
                node,
                level: num(row[2], "level", &bad)?,
                flying: num(row[3], "flying", &bad)?,
            },
            TraceKind::Failure => TraceRecord::Failure { time, node, failure: row[2].to_string() },
            TraceKind::Command => {
                let mut params = [0.0; 5];
                for (i, p) in params.iter_mut().enumerate() {
                    *p = num(row[3 + i], "param", &bad)?;
                }
                TraceRecord::Command { time, node, command: row[2].to_string(), params, outcome: row[8].to_string() }
            }
        })
    }
}

impl fmt::Display for TraceRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.kind().name(), self.to_row().join(","))
    }
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("{kind} row: {reason}")]
    Row { kind: &'static str, reason: String },
    #[error("{kind} file has header {found:?}")]
    Header { kind: &'static str, found: Vec<String> },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Writes one CSV per kind into `dir`, including empty files with just a
/// header, so the output set is the same for every run.
pub fn write_trace(dir: &Path, records: &[TraceRecord]) -> Result<(), TraceError> {
    fs::create_dir_all(dir)?;
    for kind in TraceKind::ALL {
        let mut w = csv::Writer::from_path(dir.join(kind.file_name()))?;
        w.write_record(kind.header())?;
        for r in records.iter().filter(|r| r.kind() == kind) {
            w.write_record(r.to_row())?;
        }
        w.flush()?;
    }
    Ok(())
}

pub fn read_trace_kind(dir: &Path, kind: TraceKind) -> Result<Vec<TraceRecord>, TraceError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_path(dir.join(kind.file_name()))?;
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header != kind.header() {
        return Err(TraceError::Header { kind: kind.name(), found: header });
    }
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let fields: Vec<&str> = row.iter().collect();
        out.push(TraceRecord::from_row(kind, &fields)?);
    }
    Ok(out)
}

/// Reads every kind back, ordered by time (stable within equal times per kind).
pub fn read_trace(dir: &Path) -> Result<Vec<TraceRecord>, TraceError> {
    let mut out = Vec::new();
    for kind in TraceKind::ALL {
        out.extend(read_trace_kind(dir, kind)?);
    }
    out.sort_by_key(|r| r.time());
    Ok(out)
}
