//! Event queue: a total order on (time, sequence) drives the whole run.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt;

use crate::ids::{BearerId, CellId, GroupId, UeId};
use crate::time::SimTime;

/// Everything that can happen, with its per-kind payload. Loss is carried
/// in parts per million so events stay integral and traces byte-stable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventPayload {
    CallRequest { group: GroupId },
    BearerComplete { bearer: BearerId },
    McchBoundary { bearer: BearerId },
    UliReport { group: GroupId },
    LossReport { ue: UeId, group: GroupId, loss_ppm: u32 },
    Handover { ue: UeId, to_cell: CellId },
    TalkBurst { ue: UeId, group: GroupId, release: bool },
    CallEnd { group: GroupId },
}

impl EventPayload {
    pub fn kind(&self) -> &'static str {
        match self {
            EventPayload::CallRequest { .. } => "call_request",
            EventPayload::BearerComplete { .. } => "bearer_complete",
            EventPayload::McchBoundary { .. } => "mcch_boundary",
            EventPayload::UliReport { .. } => "uli_report",
            EventPayload::LossReport { .. } => "loss_report",
            EventPayload::Handover { .. } => "handover",
            EventPayload::TalkBurst { .. } => "talk_burst",
            EventPayload::CallEnd { .. } => "call_end",
        }
    }
}

impl fmt::Display for EventPayload {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EventPayload::CallRequest { group } => write!(f, "group={group}"),
            EventPayload::BearerComplete { bearer } => write!(f, "bearer={bearer}"),
            EventPayload::McchBoundary { bearer } => write!(f, "bearer={bearer}"),
            EventPayload::UliReport { group } => write!(f, "group={group}"),
            EventPayload::LossReport { ue, group, loss_ppm } => {
                write!(f, "ue={ue} group={group} loss_ppm={loss_ppm}")
            }
            EventPayload::Handover { ue, to_cell } => write!(f, "ue={ue} to={to_cell}"),
            EventPayload::TalkBurst { ue, group, release } => {
                write!(f, "ue={ue} group={group} release={release}")
            }
            EventPayload::CallEnd { group } => write!(f, "group={group}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Event {
    pub time: SimTime,
    pub seq: u64,
    pub payload: EventPayload,
}

impl Event {
    /// One trace line: time, sequence, kind, payload fields.
    pub fn trace_line(&self) -> String {
        format!("{} {} {} {}", self.time.as_us(), self.seq, self.payload.kind(), self.payload)
    }
}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.time, self.seq).cmp(&(other.time, other.seq))
    }
}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Min-queue over events; insertion order breaks time ties, so replays are
/// stable.
#[derive(Debug, Default)]
pub struct EventQueue {
    heap: BinaryHeap<std::cmp::Reverse<Event>>,
    next_seq: u64,
}

impl EventQueue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, time: SimTime, payload: EventPayload) -> u64 {
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(std::cmp::Reverse(Event { time, seq, payload }));
        seq
    }

    pub fn pop(&mut self) -> Option<Event> {
        self.heap.pop().map(|r| r.0)
    }

    pub fn peek_time(&self) -> Option<SimTime> {
        self.heap.peek().map(|r| r.0.time)
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }
}
