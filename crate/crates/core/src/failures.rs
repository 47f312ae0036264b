//! Failure generators: battery depletion and random shutdowns.
//!
//! Both emit ordinary mobility commands through the same sink the protocol
//! uses. The energy model drains at one of two rates depending on whether
//! the drone is flying, so its level is piecewise linear in time and the
//! instant it crosses a threshold can be computed exactly and scheduled.

use thiserror::Error;

use crate::mobility::MobilityCommand;
use crate::time::SimTime;

/// Slack when comparing a level against a threshold, absorbing the rounding
/// of crossing times to whole microseconds.
const LEVEL_EPSILON: f64 = 1e-6;

#[derive(Debug, Error, PartialEq)]
pub enum FailureConfigError {
    #[error("energy capacity must be positive, got {0}")]
    Capacity(f64),
    #[error("drain rates must be non-negative, got flying {flying} and idle {idle}")]
    Drain { flying: f64, idle: f64 },
    #[error("return-to-home threshold must lie in (0, 1), got {0}")]
    Threshold(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FailureKind {
    ReturnToHome,
    Shutdown,
}

impl FailureKind {
    pub fn name(self) -> &'static str {
        match self {
            FailureKind::ReturnToHome => "RETURN_TO_HOME",
            FailureKind::Shutdown => "SHUTDOWN",
        }
    }

    pub fn command(self) -> MobilityCommand {
        match self {
            FailureKind::ReturnToHome => MobilityCommand::return_to_home(),
            FailureKind::Shutdown => MobilityCommand::shutdown(),
        }
    }
}

/// Battery with constant flying and idle drain rates (units per second).
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyModel {
    capacity: f64,
    level: f64,
    drain_flying: f64,
    drain_idle: f64,
    rth_threshold: f64,
    flying: bool,
    updated_at: SimTime,
    rth_sent: bool,
    shutdown_sent: bool,
}

impl EnergyModel {
    pub fn new(capacity: f64, drain_flying: f64, drain_idle: f64, rth_threshold: f64) -> Result<Self, FailureConfigError> {
        if !(capacity > 0.0 && capacity.is_finite()) {
            return Err(FailureConfigError::Capacity(capacity));
        }
        if !(drain_flying >= 0.0 && drain_idle >= 0.0 && drain_flying.is_finite() && drain_idle.is_finite()) {
            return Err(FailureConfigError::Drain { flying: drain_flying, idle: drain_idle });
        }
        if !(rth_threshold > 0.0 && rth_threshold < 1.0) {
            return Err(FailureConfigError::Threshold(rth_threshold));
        }
        Ok(EnergyModel {
            capacity,
            level: capacity,
            drain_flying,
            drain_idle,
            rth_threshold,
            flying: false,
            updated_at: SimTime::ZERO,
            rth_sent: false,
            shutdown_sent: false,
        })
    }

    pub fn capacity(&self) -> f64 {
        self.capacity
    }

    pub fn level(&self) -> f64 {
        self.level
    }

    pub fn is_flying(&self) -> bool {
        self.flying
    }

    pub fn rth_sent(&self) -> bool {
        self.rth_sent
    }

    pub fn shutdown_sent(&self) -> bool {
        self.shutdown_sent
    }

    fn rate(&self) -> f64 {
        if self.flying {
            self.drain_flying
        } else {
            self.drain_idle
        }
    }

    fn rth_level(&self) -> f64 {
        self.rth_threshold * self.capacity
    }

    /// Drains for `dt` seconds at the current rate and reports any
    /// threshold crossed. Each kind is reported at most once per model.
    pub fn tick(&mut self, dt: f64) -> Vec<FailureKind> {
        if self.shutdown_sent {
            return Vec::new();
        }
        self.level = (self.level - self.rate() * dt.max(0.0)).max(0.0);
        let mut out = Vec::new();
        if !self.rth_sent && self.level <= self.rth_level() + LEVEL_EPSILON {
            self.rth_sent = true;
            out.push(FailureKind::ReturnToHome);
        }
        if self.level <= LEVEL_EPSILON {
            self.level = 0.0;
            self.shutdown_sent = true;
            out.push(FailureKind::Shutdown);
        }
        out
    }

    /// Drains up to `now` at the rate in force since the last update.
    pub fn advance_to(&mut self, now: SimTime) -> Vec<FailureKind> {
        if now <= self.updated_at {
            return Vec::new();
        }
        let dt = (now - self.updated_at).as_secs_f64();
        self.updated_at = now;
        self.tick(dt)
    }

    /// Switches drain rate at `now`, settling the elapsed interval first.
    pub fn set_flying(&mut self, now: SimTime, flying: bool) -> Vec<FailureKind> {
        let out = self.advance_to(now);
        self.flying = flying;
        out
    }

    /// When the next threshold will be crossed at the current rate.
    pub fn next_crossing(&self) -> Option<SimTime> {
        if self.shutdown_sent {
            return None;
        }
        let rate = self.rate();
        if rate <= 0.0 {
            return None;
        }
        let target = if self.rth_sent { 0.0 } else { self.rth_level() };
        let dt = ((self.level - target) / rate).max(0.0);
        Some(self.updated_at + SimTime::from_secs_f64_ceil(dt))
    }
}

/// Shuts a node down once at a preset time.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomShutdown {
    shutdown_time: SimTime,
    armed: bool,
}

impl RandomShutdown {
    pub fn new(shutdown_time: SimTime) -> Self {
        RandomShutdown { shutdown_time, armed: true }
    }

    pub fn shutdown_time(&self) -> SimTime {
        self.shutdown_time
    }

    pub fn is_armed(&self) -> bool {
        self.armed
    }

    /// Fires once `now` reaches the shutdown time, then disarms.
    pub fn tick(&mut self, now: SimTime) -> Option<FailureKind> {
        if self.armed && now >= self.shutdown_time {
            self.armed = false;
            Some(FailureKind::Shutdown)
        } else {
            None
        }
    }
}

/// Failure generators attached to one node.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FailureModule {
    pub energy: Option<EnergyModel>,
    pub shutdown: Option<RandomShutdown>,
}

impl FailureModule {
    pub fn is_empty(&self) -> bool {
        self.energy.is_none() && self.shutdown.is_none()
    }

    /// Settles all generators at `now`.
    pub fn check(&mut self, now: SimTime) -> Vec<FailureKind> {
        let mut out = Vec::new();
        if let Some(e) = self.energy.as_mut() {
            out.extend(e.advance_to(now));
        }
        if let Some(s) = self.shutdown.as_mut() {
            out.extend(s.tick(now));
        }
        out
    }

    pub fn set_flying(&mut self, now: SimTime, flying: bool) -> Vec<FailureKind> {
        let out = self.check(now);
        if let Some(e) = self.energy.as_mut() {
            e.flying = flying;
        }
        out
    }

    /// Earliest time any generator fires on its own.
    pub fn next_check(&self) -> Option<SimTime> {
        let e = self.energy.as_ref().and_then(EnergyModel::next_crossing);
        let s = self.shutdown.as_ref().filter(|s| s.armed).map(|s| s.shutdown_time);
        match (e, s) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        }
    }
}
