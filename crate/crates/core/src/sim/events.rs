use std::cmp::Reverse;
use std::collections::BinaryHeap;

use crate::mailbox::Tick;

/// Time-ordered event queue. Events at the same tick pop in the order they
/// were scheduled, which keeps runs replayable.
#[derive(Debug)]
pub struct EventQueue<E> {
    heap: BinaryHeap<Reverse<(Tick, u64, usize)>>,
    slots: Vec<Option<E>>,
    seq: u64,
    now: Tick,
}

impl<E> EventQueue<E> {
    pub fn new() -> Self {
        Self {
            heap: BinaryHeap::new(),
            slots: Vec::new(),
            seq: 0,
            now: 0,
        }
    }

    pub fn now(&self) -> Tick {
        self.now
    }

    /// Schedules `event` at `at`; panics if `at` is in the past.
    pub fn schedule(&mut self, at: Tick, event: E) {
        assert!(
            at >= self.now,
            "event scheduled at {at} before current time {}",
            self.now
        );
        self.slots.push(Some(event));
        self.heap.push(Reverse((at, self.seq, self.slots.len() - 1)));
        self.seq += 1;
    }

    pub fn pop(&mut self) -> Option<(Tick, E)> {
        let Reverse((at, _, slot)) = self.heap.pop()?;
        self.now = at;
        let event = self.slots[slot].take().expect("each slot is popped once");
        Some((at, event))
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }
}

impl<E> Default for EventQueue<E> {
    fn default() -> Self {
        Self::new()
    }
}
