//! End-of-run summary, written as `summary.json` next to the traces.
//!
//! Every total here can be recomputed from the trace files alone;
//! [`TraceTotals::from_trace`] does exactly that, and the two must agree.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::MediumStats;
use crate::sim::{NodeKind, Simulation};
use crate::trace::{DataAction, TraceRecord};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("cannot write {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("bad summary {path}: {source}")]
    Json { path: String, source: serde_json::Error },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeSummary {
    pub id: u32,
    pub name: String,
    pub kind: String,
    pub protocol: String,
    pub active: bool,
    /// Units held when the run ended.
    pub carried: u64,
    pub position: [f64; 3],
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Totals {
    pub ground_data_received: u64,
    /// Units each UAV picked up directly from sensors.
    pub per_uav_collected: BTreeMap<String, u64>,
    /// Completed pairings, each counted once per pair.
    pub pair_events: u64,
    pub messages: MediumStats,
    pub bearer_units_lost: u64,
    pub shutdowns: u64,
    pub rth_events: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub scenario: String,
    pub seed: u64,
    /// Simulated end time as `seconds.micros`.
    pub sim_end_time: String,
    pub events_processed: u64,
    /// Host time spent; not serialized so summaries stay reproducible.
    #[serde(skip)]
    pub wall_time: Duration,
    pub totals: Totals,
    pub nodes: Vec<NodeSummary>,
}

impl RunReport {
    pub fn from_sim(sim: &Simulation, wall_time: Duration) -> Self {
        let mut per_uav_collected = BTreeMap::new();
        let mut nodes = Vec::with_capacity(sim.node_count());
        for i in 0..sim.node_count() {
            let kind = sim.node_kind(i);
            if kind == NodeKind::Uav {
                per_uav_collected.insert(sim.names()[i].clone(), 0);
            }
            let p = sim.position(i);
            nodes.push(NodeSummary {
                id: i as u32,
                name: sim.names()[i].clone(),
                kind: kind.name().to_string(),
                protocol: sim.protocol_name(i).to_string(),
                active: sim.is_active(i),
                carried: sim.stats(i).carried,
                position: [p.x, p.y, p.z],
            });
        }
        for r in sim.trace() {
            if let TraceRecord::Data { node, action: DataAction::Collect, units, .. } = r {
                *per_uav_collected.entry(sim.names()[*node as usize].clone()).or_default() += units;
            }
        }
        let c = sim.counters();
        RunReport {
            scenario: sim.scenario().to_string(),
            seed: sim.seed(),
            sim_end_time: sim.now().to_string(),
            events_processed: sim.events_processed(),
            wall_time,
            totals: Totals {
                ground_data_received: sim.ground_received(),
                per_uav_collected,
                pair_events: c.pair_events,
                messages: sim.medium_stats().clone(),
                bearer_units_lost: c.bearer_units_lost,
                shutdowns: c.shutdowns,
                rth_events: c.rth_events,
            },
            nodes,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report is always serializable")
    }

    pub fn write(&self, path: &Path) -> Result<(), ReportError> {
        std::fs::write(path, self.to_json() + "\n")
            .map_err(|source| ReportError::Io { path: path.display().to_string(), source })
    }

    pub fn read(path: &Path) -> Result<Self, ReportError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ReportError::Io { path: path.display().to_string(), source })?;
        serde_json::from_str(&text).map_err(|source| ReportError::Json { path: path.display().to_string(), source })
    }
}

/// Aggregates rebuilt from trace records only.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TraceTotals {
    pub ground_data_received: u64,
    pub per_uav_collected: BTreeMap<String, u64>,
    pub pair_events: u64,
    pub transmissions: u64,
    pub delivered: u64,
    pub shutdowns: u64,
    pub rth_events: u64,
}

impl TraceTotals {
    /// `names[i]` is the name of node `i`; UAVs are listed in `uavs`.
    pub fn from_trace<'a>(records: &[TraceRecord], names: &[String], uavs: impl IntoIterator<Item = &'a str>) -> Self {
        let mut t = TraceTotals::default();
        for u in uavs {
            t.per_uav_collected.insert(u.to_string(), 0);
        }
        for r in records {
            match r {
                TraceRecord::Data { action: DataAction::GroundReceive, units, .. } => t.ground_data_received += units,
                TraceRecord::Data { node, action: DataAction::Collect, units, .. } => {
                    *t.per_uav_collected.entry(names[*node as usize].clone()).or_default() += units;
                }
                TraceRecord::Pair { farther: true, .. } => t.pair_events += 1,
                TraceRecord::Tx { .. } => t.transmissions += 1,
                TraceRecord::Rx { .. } => t.delivered += 1,
                TraceRecord::Failure { failure, .. } if failure == "SHUTDOWN" => t.shutdowns += 1,
                TraceRecord::Failure { failure, .. } if failure == "RETURN_TO_HOME" => t.rth_events += 1,
                _ => {}
            }
        }
        t
    }

    /// Whether a summary agrees with these aggregates.
    pub fn matches(&self, totals: &Totals) -> bool {
        self.ground_data_received == totals.ground_data_received
            && self.per_uav_collected == totals.per_uav_collected
            && self.pair_events == totals.pair_events
            && self.transmissions == totals.messages.transmissions
            && self.delivered == totals.messages.delivered
            && self.shutdowns == totals.shutdowns
            && self.rth_events == totals.rth_events
    }
}
