//! Deterministic event engine: events fire strictly in (time, seq) order,
//! where seq is the scheduling order. One engine is single-threaded.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use thiserror::Error;

use crate::time::SimTime;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("event scheduled in the past: {at} < now {now}")]
    SchedulePast { at: SimTime, now: SimTime },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fired<P> {
    pub time: SimTime,
    pub seq: u64,
    pub payload: P,
}

#[derive(Debug)]
struct Scheduled<P> {
    time: SimTime,
    seq: u64,
    payload: P,
}

impl<P> PartialEq for Scheduled<P> {
    fn eq(&self, other: &Self) -> bool {
        self.time == other.time && self.seq == other.seq
    }
}
impl<P> Eq for Scheduled<P> {}
impl<P> PartialOrd for Scheduled<P> {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl<P> Ord for Scheduled<P> {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.time, self.seq).cmp(&(other.time, other.seq))
    }
}

#[derive(Debug)]
pub struct Engine<P> {
    now: SimTime,
    next_seq: u64,
    queue: BinaryHeap<Reverse<Scheduled<P>>>,
}

impl<P> Default for Engine<P> {
    fn default() -> Self {
        Engine { now: SimTime::ZERO, next_seq: 0, queue: BinaryHeap::new() }
    }
}

impl<P> Engine<P> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn pending(&self) -> usize {
        self.queue.len()
    }

    pub fn schedule(&mut self, time: SimTime, payload: P) -> Result<u64, EngineError> {
        if time < self.now {
            return Err(EngineError::SchedulePast { at: time, now: self.now });
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.queue.push(Reverse(Scheduled { time, seq, payload }));
        Ok(seq)
    }

    /// Fires every event with time < t_end, in (time, seq) order. The
    /// handler may schedule further events. Engine time ends at t_end.
    pub fn run_until<F>(&mut self, t_end: SimTime, mut handler: F) -> usize
    where
        F: FnMut(&mut Engine<P>, Fired<P>),
    {
        let mut fired = 0;
        while let Some(Reverse(head)) = self.queue.peek() {
            if head.time >= t_end {
                break;
            }
            let Reverse(ev) = self.queue.pop().unwrap();
            debug_assert!(ev.time >= self.now);
            self.now = ev.time;
            handler(self, Fired { time: ev.time, seq: ev.seq, payload: ev.payload });
            fired += 1;
        }
        if t_end > self.now {
            self.now = t_end;
        }
        fired
    }

    /// Pops the earliest pending event, advancing engine time to it.
    pub fn pop_next(&mut self) -> Option<Fired<P>> {
        let Reverse(ev) = self.queue.pop()?;
        self.now = ev.time;
        Some(Fired { time: ev.time, seq: ev.seq, payload: ev.payload })
    }

    /// Drains the queue completely.
    pub fn run_to_completion<F>(&mut self, mut handler: F) -> usize
    where
        F: FnMut(&mut Engine<P>, Fired<P>),
    {
        let mut fired = 0;
        while let Some(Reverse(ev)) = self.queue.pop() {
            self.now = ev.time;
            handler(self, Fired { time: ev.time, seq: ev.seq, payload: ev.payload });
            fired += 1;
        }
        fired
    }
}
