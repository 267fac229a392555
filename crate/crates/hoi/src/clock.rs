//! Tick sources for the servo loop: a deterministic simulated clock and a
//! wall clock that logs missed ticks instead of double-stepping.

use std::time::{Duration, Instant};

/// Yields tick timestamps (seconds) at a fixed period.
pub trait TickSource {
    /// Block (wall clock) or advance (simulated) until the next tick.
    /// Returns the tick's timestamp, or `None` once past `duration`.
    fn next_tick(&mut self) -> Option<f64>;

    /// Ticks that were scheduled but could not be serviced on time.
    fn missed_ticks(&self) -> u64 {
        0
    }
}

/// Fixed-step simulated clock; bit-reproducible.
pub struct SimClock {
    period: f64,
    ticks: u64,
    limit: u64,
}

impl SimClock {
    pub fn new(period: f64, duration: f64) -> SimClock {
        assert!(period > 0.0);
        let limit = (duration / period).round() as u64;
        SimClock {
            period,
            ticks: 0,
            limit,
        }
    }
}

impl TickSource for SimClock {
    fn next_tick(&mut self) -> Option<f64> {
        if self.ticks >= self.limit {
            return None;
        }
        let t = self.ticks as f64 * self.period;
        self.ticks += 1;
        Some(t)
    }
}

/// Wall clock pinned to a fixed schedule. If a deadline is already past, the
/// tick is counted as missed and skipped, never run twice.
pub struct WallClock {
    period: Duration,
    start: Instant,
    next_index: u64,
    limit: u64,
    missed: u64,
}

impl WallClock {
    pub fn new(period: Duration, duration: Duration) -> WallClock {
        assert!(!period.is_zero());
        let limit = (duration.as_secs_f64() / period.as_secs_f64()).round() as u64;
        WallClock {
            period,
            start: Instant::now(),
            next_index: 0,
            limit,
            missed: 0,
        }
    }
}

impl TickSource for WallClock {
    fn next_tick(&mut self) -> Option<f64> {
        loop {
            if self.next_index >= self.limit {
                return None;
            }
            let deadline = self.start + self.period * self.next_index as u32;
            let now = Instant::now();
            if now <= deadline {
                std::thread::sleep(deadline - now);
                let t = self.next_index as f64 * self.period.as_secs_f64();
                self.next_index += 1;
                return Some(t);
            }
            // Deadline already past: if we are less than one period late,
            // run it; otherwise drop it and try the next slot.
            if now - deadline < self.period {
                let t = self.next_index as f64 * self.period.as_secs_f64();
                self.next_index += 1;
                return Some(t);
            }
            self.missed += 1;
            self.next_index += 1;
        }
    }

    fn missed_ticks(&self) -> u64 {
        self.missed
    }
}
