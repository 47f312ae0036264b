//! Built-in protocols and the registry that maps type names to them.

pub mod ground;
pub mod message;
pub mod sensor;
pub mod simple;
pub mod uav;

use thiserror::Error;

use crate::protocol::Protocol;
use crate::time::SimTime;

pub use ground::GroundStationProtocol;
pub use sensor::SensorProtocol;
pub use simple::SimpleProtocol;
pub use uav::UavProtocol;

/// Tunables a protocol may read from the scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolParams {
    pub quiet_time: f64,
    pub data_length: u64,
    pub generation_interval: SimTime,
}

impl Default for ProtocolParams {
    fn default() -> Self {
        ProtocolParams {
            quiet_time: uav::DEFAULT_QUIET_TIME_S,
            data_length: sensor::DEFAULT_DATA_LENGTH,
            generation_interval: SimTime::ZERO,
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("unknown protocol type `{0}`")]
pub struct UnknownProtocol(pub String);

pub const PROTOCOL_NAMES: &[&str] = &[
    "ZigzagProtocol",
    "ZigZagProtocol",
    "DadcaProtocol",
    "ZigzagProtocolSensor",
    "ZigZagProtocolSensor",
    "DadcaProtocolSensor",
    "GroundStationProtocol",
    "SimpleProtocol",
];

pub fn create_protocol(type_name: &str, params: &ProtocolParams) -> Result<Box<dyn Protocol>, UnknownProtocol> {
    let p: Box<dyn Protocol> = match type_name {
        "ZigzagProtocol" | "ZigZagProtocol" => Box::new(UavProtocol::zigzag(params.quiet_time)),
        "DadcaProtocol" => Box::new(UavProtocol::dadca(params.quiet_time)),
        "ZigzagProtocolSensor" | "ZigZagProtocolSensor" => Box::new(SensorProtocol::new(
            "ZigzagProtocolSensor",
            params.data_length,
            params.generation_interval,
        )),
        "DadcaProtocolSensor" => Box::new(SensorProtocol::new(
            "DadcaProtocolSensor",
            params.data_length,
            params.generation_interval,
        )),
        "GroundStationProtocol" => Box::new(GroundStationProtocol::new()),
        "SimpleProtocol" => Box::new(SimpleProtocol::new()),
        other => return Err(UnknownProtocol(other.to_string())),
    };
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_registered_name_resolves() {
        for name in PROTOCOL_NAMES {
            assert!(create_protocol(name, &ProtocolParams::default()).is_ok(), "{name}");
        }
        assert_eq!(
            create_protocol("Nope", &ProtocolParams::default()).unwrap_err(),
            UnknownProtocol("Nope".into())
        );
    }
}
