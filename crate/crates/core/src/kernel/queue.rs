use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, HashSet};

use super::SimTime;

/// Handle to a scheduled event, usable for cancellation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EventHandle(u64);

impl EventHandle {
    pub fn seq(self) -> u64 {
        self.0
    }
}

struct Entry<E> {
    time: SimTime,
    seq: u64,
    event: E,
}

impl<E> PartialEq for Entry<E> {
    fn eq(&self, other: &Self) -> bool {
        self.seq == other.seq
    }
}

impl<E> Eq for Entry<E> {}

impl<E> PartialOrd for Entry<E> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<E> Ord for Entry<E> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.time
            .cmp(&other.time)
            .then_with(|| self.seq.cmp(&other.seq))
    }
}

/// Virtual clock plus a priority queue of pending events.
///
/// Events pop in ascending `(time, seq)` order, where `seq` is a global
/// insertion counter, so simultaneous events come out in the order they were
/// scheduled.
pub struct EventQueue<E> {
    heap: BinaryHeap<Reverse<Entry<E>>>,
    pending: HashSet<u64>,
    now: SimTime,
    next_seq: u64,
}

impl<E> Default for EventQueue<E> {
    fn default() -> Self {
        Self::new()
    }
}

impl<E> EventQueue<E> {
    pub fn new() -> Self {
        Self {
            heap: BinaryHeap::new(),
            pending: HashSet::new(),
            now: SimTime::ZERO,
            next_seq: 0,
        }
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    /// Number of scheduled, not yet delivered or cancelled events.
    pub fn len(&self) -> usize {
        self.pending.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pending.is_empty()
    }

    /// Schedules `event` at absolute time `when`.
    ///
    /// Panics if `when` lies before the current clock.
    pub fn schedule(&mut self, when: SimTime, event: E) -> EventHandle {
        assert!(
            when >= self.now,
            "event scheduled in the past: {when} < now {}",
            self.now
        );
        let seq = self.next_seq;
        self.next_seq += 1;
        self.pending.insert(seq);
        self.heap.push(Reverse(Entry {
            time: when,
            seq,
            event,
        }));
        EventHandle(seq)
    }

    /// Schedules `event` `delay` minutes from now.
    pub fn schedule_in(&mut self, delay: f64, event: E) -> EventHandle {
        let when = self.now + delay;
        self.schedule(when, event)
    }

    /// Returns true if the event was still pending.
    pub fn cancel(&mut self, handle: EventHandle) -> bool {
        self.pending.remove(&handle.0)
    }

    /// Pops the earliest live event and advances the clock to it.
    /// `None` means the queue is exhausted.
    pub fn next_event(&mut self) -> Option<(SimTime, E)> {
        while let Some(Reverse(entry)) = self.heap.pop() {
            if !self.pending.remove(&entry.seq) {
                continue;
            }
            debug_assert!(entry.time >= self.now);
            self.now = entry.time;
            return Some((entry.time, entry.event));
        }
        None
    }
}
