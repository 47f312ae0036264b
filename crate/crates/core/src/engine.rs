//! Event queue and simulation clock.
//!
//! Events are ordered by `(fire_at, sequence)`. The sequence number is the
//! insertion counter, so events scheduled for the same instant fire in the
//! order they were scheduled.

use std::collections::BTreeMap;
use std::fmt::Debug;

use thiserror::Error;

use crate::time::SimTime;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ScheduleError {
    #[error("cannot schedule at {at}: clock is already at {now}")]
    PastTime { at: SimTime, now: SimTime },
}

/// Handle returned by [`Scheduler::schedule`], usable for cancellation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EventHandle {
    fire_at: SimTime,
    sequence: u64,
}

impl EventHandle {
    pub fn fire_at(&self) -> SimTime {
        self.fire_at
    }

    pub fn sequence(&self) -> u64 {
        self.sequence
    }
}

/// An event popped from the queue.
#[derive(Debug, Clone, PartialEq)]
pub struct Event<E> {
    pub fire_at: SimTime,
    pub sequence: u64,
    pub payload: E,
}

/// Deterministic priority queue plus clock.
#[derive(Debug)]
pub struct Scheduler<E> {
    now: SimTime,
    next_sequence: u64,
    queue: BTreeMap<(SimTime, u64), E>,
    processed: u64,
}

impl<E> Default for Scheduler<E> {
    fn default() -> Self {
        Self::new()
    }
}

impl<E> Scheduler<E> {
    pub fn new() -> Self {
        Scheduler {
            now: SimTime::ZERO,
            next_sequence: 0,
            queue: BTreeMap::new(),
            processed: 0,
        }
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn pending(&self) -> usize {
        self.queue.len()
    }

    /// Number of events popped so far.
    pub fn processed(&self) -> u64 {
        self.processed
    }

    pub fn schedule(&mut self, fire_at: SimTime, payload: E) -> Result<EventHandle, ScheduleError> {
        if fire_at < self.now {
            return Err(ScheduleError::PastTime { at: fire_at, now: self.now });
        }
        let sequence = self.next_sequence;
        self.next_sequence += 1;
        self.queue.insert((fire_at, sequence), payload);
        Ok(EventHandle { fire_at, sequence })
    }

    /// Schedules `delay` after the current clock. Never fails.
    pub fn schedule_in(&mut self, delay: SimTime, payload: E) -> EventHandle {
        let at = self.now + delay;
        self.schedule(at, payload).expect("future time")
    }

    /// Returns true if the event was still pending.
    pub fn cancel(&mut self, handle: EventHandle) -> bool {
        self.queue.remove(&(handle.fire_at, handle.sequence)).is_some()
    }

    pub fn is_pending(&self, handle: EventHandle) -> bool {
        self.queue.contains_key(&(handle.fire_at, handle.sequence))
    }

    pub fn peek_time(&self) -> Option<SimTime> {
        self.queue.keys().next().map(|(t, _)| *t)
    }

    /// Pops the next event if it fires no later than `limit`, advancing the
    /// clock to its time.
    pub fn pop_until(&mut self, limit: SimTime) -> Option<Event<E>> {
        let (&(fire_at, sequence), _) = self.queue.iter().next()?;
        if fire_at > limit {
            return None;
        }
        let payload = self.queue.remove(&(fire_at, sequence)).expect("present");
        self.now = fire_at;
        self.processed += 1;
        Some(Event { fire_at, sequence, payload })
    }

    /// Moves the clock forward without processing anything. Used when a run
    /// ends at a horizon later than the last event.
    pub fn advance_clock(&mut self, to: SimTime) {
        if to > self.now {
            self.now = to;
        }
    }
}

/// Summary of a single `run_until` call.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EngineReport {
    pub events_processed: u64,
    pub final_clock: SimTime,
}

/// Drains every event with `fire_at <= t_end` through `handler`, in
/// `(fire_at, sequence)` order. The handler may schedule or cancel further
/// events through the scheduler it receives.
///
/// The clock stops at the last processed event when the queue empties
/// before `t_end`.
pub fn run_until<E, F>(sched: &mut Scheduler<E>, t_end: SimTime, mut handler: F) -> EngineReport
where
    F: FnMut(&mut Scheduler<E>, Event<E>),
{
    let mut count = 0;
    while let Some(ev) = sched.pop_until(t_end) {
        count += 1;
        handler(sched, ev);
    }
    EngineReport { events_processed: count, final_clock: sched.now() }
}

/// One line of the processed-event log.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoggedEvent {
    pub fire_at: SimTime,
    pub sequence: u64,
    pub description: String,
}

/// Serialises processed events one per line for determinism diffs.
pub fn format_event_log(log: &[LoggedEvent]) -> String {
    let mut out = String::new();
    for e in log {
        out.push_str(&format!("{}\t{}\t{}\n", e.fire_at, e.sequence, e.description));
    }
    out
}

/// Convenience for `Debug`-described payloads.
pub fn describe<E: Debug>(ev: &Event<E>) -> LoggedEvent {
    LoggedEvent {
        fire_at: ev.fire_at,
        sequence: ev.sequence,
        description: format!("{:?}", ev.payload),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn drain(s: &mut Scheduler<&'static str>, t_end: SimTime) -> (EngineReport, Vec<&'static str>) {
        let mut seen = Vec::new();
        let r = run_until(s, t_end, |_, ev| seen.push(ev.payload));
        (r, seen)
    }

    #[test]
    fn empty_queue_reports_zero_events() {
        let mut s = Scheduler::<&str>::new();
        let (r, _) = drain(&mut s, SimTime::from_secs(100));
        assert_eq!(r.events_processed, 0);
        assert_eq!(r.final_clock, SimTime::ZERO);
    }

    #[test]
    fn same_time_events_fire_fifo() {
        let mut s = Scheduler::new();
        s.schedule(SimTime::from_secs(2), "two-a").unwrap();
        s.schedule(SimTime::from_secs(1), "one").unwrap();
        s.schedule(SimTime::from_secs(2), "two-b").unwrap();
        let (r, seen) = drain(&mut s, SimTime::from_secs(10));
        assert_eq!(r.events_processed, 3);
        assert_eq!(seen, vec!["one", "two-a", "two-b"]);
        assert_eq!(r.final_clock, SimTime::from_secs(2));
    }

    #[test]
    fn event_at_now_fires_before_later_ones() {
        let mut s = Scheduler::new();
        s.schedule(SimTime::from_secs(5), "later").unwrap();
        s.schedule(SimTime::ZERO, "now").unwrap();
        let (_, seen) = drain(&mut s, SimTime::from_secs(10));
        assert_eq!(seen, vec!["now", "later"]);
    }

    #[test]
    fn past_time_is_rejected() {
        let mut s = Scheduler::new();
        s.schedule(SimTime::from_secs(5), "x").unwrap();
        drain(&mut s, SimTime::from_secs(10));
        assert_eq!(
            s.schedule(SimTime::from_secs(1), "late"),
            Err(ScheduleError::PastTime { at: SimTime::from_secs(1), now: SimTime::from_secs(5) })
        );
    }

    #[test]
    fn cancellation_contract() {
        let mut s = Scheduler::new();
        let a = s.schedule(SimTime::from_secs(1), "a").unwrap();
        let b = s.schedule(SimTime::from_secs(2), "b").unwrap();
        assert!(s.cancel(a));
        assert!(!s.cancel(a));
        let (_, seen) = drain(&mut s, SimTime::from_secs(10));
        assert_eq!(seen, vec!["b"]);
        assert!(!s.cancel(b));
    }

    #[test]
    fn horizon_is_respected() {
        let mut s = Scheduler::new();
        s.schedule(SimTime::from_secs(1), "in").unwrap();
        s.schedule(SimTime::from_secs(3), "out").unwrap();
        let (r, seen) = drain(&mut s, SimTime::from_secs(2));
        assert_eq!(seen, vec!["in"]);
        assert!(r.final_clock <= SimTime::from_secs(2));
        assert_eq!(s.pending(), 1);
    }

    #[test]
    fn handler_can_schedule_follow_ups() {
        let mut s = Scheduler::new();
        s.schedule(SimTime::ZERO, 0u32).unwrap();
        let mut fired = Vec::new();
        run_until(&mut s, SimTime::from_secs(5), |sch, ev| {
            fired.push((ev.fire_at, ev.payload));
            if ev.payload < 10 {
                sch.schedule_in(SimTime::from_secs(1), ev.payload + 1);
            }
        });
        assert_eq!(fired.len(), 6);
        assert!(fired.windows(2).all(|w| w[0].0 <= w[1].0));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn processed_log_is_sorted_by_time_then_sequence(
                times in proptest::collection::vec(0u64..50, 1..200),
                cancel_mask in proptest::collection::vec(any::<bool>(), 200),
            ) {
                let mut s = Scheduler::new();
                let handles: Vec<_> = times
                    .iter()
                    .map(|&t| s.schedule(SimTime::from_millis(t), t).unwrap())
                    .collect();
                let mut cancelled = 0;
                for (h, c) in handles.iter().zip(cancel_mask.iter()) {
                    if *c && s.cancel(*h) {
                        cancelled += 1;
                    }
                }
                let mut log = Vec::new();
                let r = run_until(&mut s, SimTime::from_secs(1), |_, ev| log.push((ev.fire_at, ev.sequence)));
                prop_assert_eq!(r.events_processed as usize, times.len() - cancelled);
                prop_assert!(log.windows(2).all(|w| w[0] < w[1]));
            }
        }
    }
}
