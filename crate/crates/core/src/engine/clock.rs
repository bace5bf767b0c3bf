use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::time::{SimTime, WallTime};

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClockMode {
    /// Advance straight to the next due event.
    #[default]
    Fast,
    /// Track wall time, `speed` virtual seconds per wall second.
    RealTime { speed: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimClock {
    pub now: SimTime,
    pub mode: ClockMode,
    /// Wall-clock instant mapped to virtual zero.
    pub epoch: WallTime,
}

/// Maps virtual deadlines to wall-clock instants for real-time runs.
#[derive(Debug, Clone)]
pub struct Pacer {
    mode: ClockMode,
    anchor_wall: Instant,
    anchor_virtual: SimTime,
}

impl Pacer {
    pub fn new(mode: ClockMode, anchor_virtual: SimTime) -> Self {
        Pacer { mode, anchor_wall: Instant::now(), anchor_virtual }
    }

    /// Re-anchors after a pause so paused wall time is not caught up.
    pub fn reanchor(&mut self, anchor_virtual: SimTime) {
        self.anchor_wall = Instant::now();
        self.anchor_virtual = anchor_virtual;
    }

    /// Wall instant at which virtual time `t` is due; `None` in fast mode.
    pub fn deadline(&self, t: SimTime) -> Option<Instant> {
        match self.mode {
            ClockMode::Fast => None,
            ClockMode::RealTime { speed } => {
                let ahead = t.as_ms().saturating_sub(self.anchor_virtual.as_ms()) as f64;
                Some(self.anchor_wall + Duration::from_secs_f64(ahead / 1000.0 / speed))
            }
        }
    }

    /// Virtual time reached at wall instant `at`.
    pub fn virtual_at(&self, at: Instant) -> SimTime {
        match self.mode {
            ClockMode::Fast => self.anchor_virtual,
            ClockMode::RealTime { speed } => {
                let elapsed = at.saturating_duration_since(self.anchor_wall).as_secs_f64();
                self.anchor_virtual + (elapsed * speed * 1000.0) as u64
            }
        }
    }

    /// Blocks until virtual time `t` is due.
    pub fn wait_until(&self, t: SimTime) {
        if let Some(deadline) = self.deadline(t) {
            let now = Instant::now();
            if deadline > now {
                std::thread::sleep(deadline - now);
            }
        }
    }
}
