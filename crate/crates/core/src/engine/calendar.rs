use std::cmp::Ordering;
use std::collections::BinaryHeap;

/// Scheduled completion of a timed transition's service.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub time: f64,
    /// Index of the transition in id order.
    pub transition: usize,
    pub seq: u64,
}

impl Eq for Event {}

impl Ord for Event {
    // reversed so the max-heap pops the earliest event
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then(other.transition.cmp(&self.transition))
            .then(other.seq.cmp(&self.seq))
    }
}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Future event list ordered by (time, transition id, insertion sequence).
#[derive(Debug, Default)]
pub struct EventCalendar {
    heap: BinaryHeap<Event>,
    seq: u64,
}

impl EventCalendar {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn schedule(&mut self, time: f64, transition: usize) {
        self.heap.push(Event {
            time,
            transition,
            seq: self.seq,
        });
        self.seq += 1;
    }

    pub fn next_time(&self) -> Option<f64> {
        self.heap.peek().map(|e| e.time)
    }

    pub fn pop(&mut self) -> Option<Event> {
        self.heap.pop()
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }
}
