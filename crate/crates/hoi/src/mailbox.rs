//! Latest-value-wins mailbox for cross-context handoff.

use std::sync::{Arc, Mutex};

/// Single-slot mailbox: writers overwrite, the reader takes the newest value.
#[derive(Debug)]
pub struct Mailbox<T> {
    slot: Arc<Mutex<Option<T>>>,
}

impl<T> Clone for Mailbox<T> {
    fn clone(&self) -> Self {
        Mailbox {
            slot: Arc::clone(&self.slot),
        }
    }
}

impl<T> Default for Mailbox<T> {
    fn default() -> Self {
        Mailbox::new()
    }
}

impl<T> Mailbox<T> {
    pub fn new() -> Self {
        Mailbox {
            slot: Arc::new(Mutex::new(None)),
        }
    }

    /// Replace whatever is in the slot.
    pub fn post(&self, value: T) {
        *self.slot.lock().unwrap() = Some(value);
    }

    /// Take the newest value, leaving the slot empty.
    pub fn take(&self) -> Option<T> {
        self.slot.lock().unwrap().take()
    }

    pub fn is_empty(&self) -> bool {
        self.slot.lock().unwrap().is_none()
    }
}

impl<T: Clone> Mailbox<T> {
    /// Read the newest value without consuming it.
    pub fn peek(&self) -> Option<T> {
        self.slot.lock().unwrap().clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn latest_value_wins() {
        let mb = Mailbox::new();
        mb.post(1);
        mb.post(2);
        mb.post(3);
        assert_eq!(mb.take(), Some(3));
        assert_eq!(mb.take(), None);
    }

    #[test]
    fn shared_across_threads() {
        let mb = Mailbox::new();
        let writer = mb.clone();
        let handle = std::thread::spawn(move || {
            for i in 0..100 {
                writer.post(i);
            }
        });
        handle.join().unwrap();
        assert_eq!(mb.take(), Some(99));
    }
}
