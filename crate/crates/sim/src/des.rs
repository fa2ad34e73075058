//! Event queue over the virtual clock.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EventKind {
    /// A camera produced a frame.
    FrameArrival,
    ServiceStart,
    ServiceEnd,
    /// A message reached the far end of a link.
    MessageDelivery,
    /// The transfer at the head of the cloud uplink may have finished.
    TransferEnd,
    TimingTick,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Event<P> {
    pub time: f64,
    pub seq: u64,
    pub kind: EventKind,
    pub node: String,
    pub payload: P,
}

impl<P: PartialEq> Eq for Event<P> {}

impl<P: PartialEq> Ord for Event<P> {
    // Reversed so the max-heap pops the earliest event, oldest first on ties.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

impl<P: PartialEq> PartialOrd for Event<P> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug)]
pub struct EventQueue<P> {
    heap: BinaryHeap<Event<P>>,
    seq: u64,
    now: f64,
}

impl<P: PartialEq> Default for EventQueue<P> {
    fn default() -> Self {
        EventQueue {
            heap: BinaryHeap::new(),
            seq: 0,
            now: 0.0,
        }
    }
}

impl<P: PartialEq> EventQueue<P> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn now(&self) -> f64 {
        self.now
    }

    /// Schedules at `time`, which must not precede the clock.
    pub fn push(&mut self, time: f64, kind: EventKind, node: impl Into<String>, payload: P) {
        assert!(time >= self.now, "event at {time} scheduled in the past ({})", self.now);
        let seq = self.seq;
        self.seq += 1;
        self.heap.push(Event {
            time,
            seq,
            kind,
            node: node.into(),
            payload,
        });
    }

    /// Earliest pending event; advances the clock.
    pub fn pop(&mut self) -> Option<Event<P>> {
        let e = self.heap.pop()?;
        self.now = e.time;
        Some(e)
    }

    pub fn peek_time(&self) -> Option<f64> {
        self.heap.peek().map(|e| e.time)
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }
}
