//! Deterministic discrete-event simulator for UAV data-collection swarms.
//!
//! Every node is built from three cooperating modules: mobility, radio and
//! protocol. Protocols steer the other two only through commands, and learn
//! about the world only through packets and telemetry.

pub mod config;
pub mod engine;
pub mod failures;
pub mod mission;
pub mod mobility;
pub mod network;
pub mod protocol;
pub mod protocols;
pub mod report;
pub mod rng;
pub mod runner;
pub mod sim;
pub mod time;
pub mod trace;
