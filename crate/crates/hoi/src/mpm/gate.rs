//! Confirmation gate: a rolling queue over per-window decisions that emits a
//! class only once the queue is full and unanimous.

use std::collections::VecDeque;

/// Default queue capacity.
pub const DEFAULT_GATE_LEN: usize = 10;

/// Rolling decision filter. `push` returns the confirmed class when the last
/// `capacity` decisions are identical, otherwise nothing.
#[derive(Debug, Clone)]
pub struct StabilityGate {
    capacity: usize,
    queue: VecDeque<u8>,
}

impl Default for StabilityGate {
    fn default() -> Self {
        StabilityGate::new(DEFAULT_GATE_LEN)
    }
}

impl StabilityGate {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity >= 1, "gate capacity must be >= 1");
        StabilityGate {
            capacity,
            queue: VecDeque::with_capacity(capacity),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.queue.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queue.is_empty()
    }

    /// Push a decision, evicting the oldest when full.
    pub fn push(&mut self, decision: u8) -> Option<u8> {
        if self.queue.len() == self.capacity {
            self.queue.pop_front();
        }
        self.queue.push_back(decision);
        if self.queue.len() == self.capacity && self.queue.iter().all(|d| *d == decision) {
            Some(decision)
        } else {
            None
        }
    }

    /// Drop all queued decisions; the gate must refill before confirming.
    pub fn flush(&mut self) {
        self.queue.clear();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unanimous_full_queue_confirms() {
        let mut gate = StabilityGate::new(10);
        for i in 0..9 {
            assert_eq!(gate.push(1), None, "push {i}");
        }
        assert_eq!(gate.push(1), Some(1));
    }

    #[test]
    fn one_dissent_suppresses_output() {
        let mut gate = StabilityGate::new(10);
        for _ in 0..9 {
            gate.push(1);
        }
        assert_eq!(gate.push(2), None);
    }

    #[test]
    fn partial_queue_never_confirms() {
        let mut gate = StabilityGate::new(10);
        for _ in 0..3 {
            assert_eq!(gate.push(0), None);
        }
    }

    #[test]
    fn flush_forces_refill() {
        let mut gate = StabilityGate::new(3);
        gate.push(2);
        gate.push(2);
        assert_eq!(gate.push(2), Some(2));
        gate.flush();
        assert_eq!(gate.push(2), None);
        assert_eq!(gate.push(2), None);
        assert_eq!(gate.push(2), Some(2));
    }

    /// Exhaustive check against the defining rule: a class is emitted iff at
    /// least `n` decisions have been pushed and the last `n` are identical.
    #[test]
    fn brute_force_matches_rule() {
        let n = 4;
        let k = 3u8;
        for len in 1..=8usize {
            let total = (k as usize).pow(len as u32);
            for mut code in 0..total {
                let mut seq = Vec::with_capacity(len);
                for _ in 0..len {
                    seq.push((code % k as usize) as u8);
                    code /= k as usize;
                }
                let mut gate = StabilityGate::new(n);
                for (i, d) in seq.iter().enumerate() {
                    let got = gate.push(*d);
                    let expected = if i + 1 >= n && seq[i + 1 - n..=i].iter().all(|x| x == d) {
                        Some(*d)
                    } else {
                        None
                    };
                    assert_eq!(got, expected, "seq {seq:?} at {i}");
                }
            }
        }
    }
}
