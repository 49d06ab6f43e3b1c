//! Per-round event log of a simulation.
//!
//! Every sent message appears exactly once, either as a `Deliver` event or as
//! a `Drop` event tagged with the reason, so conservation (sends = deliveries
//! + drops) and the sleep/crash delivery rules are checkable after the fact.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::types::{Output, Payload, ProcessorId, Round};

/// Why a sent message was not delivered.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropReason {
    /// The destination slept through the delivery round; the message is
    /// permanently lost.
    DstAsleep,
    /// The destination crashed at or before the delivery round.
    DstCrashed,
    /// The source crashed in the send round and the adversary excluded this
    /// message from the delivered subset.
    SrcCrashOmitted,
}

/// One logged event. The `round` field is 0 for pre-round setup events.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct Event {
    pub round: Round,
    #[serde(flatten)]
    pub kind: EventKind,
}

#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EventKind {
    /// The static set of adversary-controlled processors (round 0).
    Byzantine { pids: Vec<ProcessorId> },
    /// An awake processor acted this round, emitting `sends` messages.
    Action { pid: ProcessorId, sends: u32 },
    /// A processor starts sleeping: asleep for rounds `[round, until)`.
    Sleep { pid: ProcessorId, until: Round },
    /// The adversary crashed `pid` this round; `delivered` is the chosen
    /// subset of destinations that still receive its messages.
    Crash { pid: ProcessorId, delivered: Vec<ProcessorId> },
    Deliver { src: ProcessorId, dst: ProcessorId, payload: Payload },
    Drop { src: ProcessorId, dst: ProcessorId, payload: Payload, reason: DropReason },
    /// Final output of a non-crashed processor, recorded at the last round.
    Output { pid: ProcessorId, output: Output },
}

/// Complete event log of one simulation.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Transcript {
    pub n: u32,
    /// Fixed schedule length of the executed protocol.
    pub total_rounds: Round,
    /// Whether per-message events were recorded (fast runs may skip them).
    pub recorded: bool,
    pub events: Vec<Event>,
}

impl Transcript {
    pub(crate) fn new(n: u32, total_rounds: Round, recorded: bool) -> Self {
        Transcript { n, total_rounds, recorded, events: Vec::new() }
    }

    /// Per-message and per-action events; skipped when recording is off.
    pub(crate) fn push(&mut self, round: Round, kind: EventKind) {
        if self.recorded {
            self.events.push(Event { round, kind });
        }
    }

    /// Skeleton events (corruption set, crashes, outputs) that fault views
    /// and checkers rely on; kept even when per-message recording is off.
    pub(crate) fn push_always(&mut self, round: Round, kind: EventKind) {
        self.events.push(Event { round, kind });
    }

    fn require_recorded(&self) -> Result<()> {
        if self.recorded {
            Ok(())
        } else {
            Err(Error::TranscriptNotRecorded)
        }
    }

    /// Processors the adversary fully controls.
    pub fn byzantine(&self) -> BTreeSet<ProcessorId> {
        self.events
            .iter()
            .filter_map(|e| match &e.kind {
                EventKind::Byzantine { pids } => Some(pids.iter().copied()),
                _ => None,
            })
            .flatten()
            .collect()
    }

    /// Crash events as (processor, crash round).
    pub fn crashes(&self) -> BTreeMap<ProcessorId, Round> {
        self.events
            .iter()
            .filter_map(|e| match &e.kind {
                EventKind::Crash { pid, .. } => Some((*pid, e.round)),
                _ => None,
            })
            .collect()
    }

    /// Messages delivered to `pid`, as (round, src, payload).
    pub fn delivered_to(&self, pid: ProcessorId) -> Vec<(Round, ProcessorId, &Payload)> {
        self.events
            .iter()
            .filter_map(|e| match &e.kind {
                EventKind::Deliver { src, dst, payload } if *dst == pid => {
                    Some((e.round, *src, payload))
                }
                _ => None,
            })
            .collect()
    }

    /// All sent messages (delivered or dropped), as (round, src, dst, payload).
    pub fn sends(&self) -> impl Iterator<Item = (Round, ProcessorId, ProcessorId, &Payload)> {
        self.events.iter().filter_map(|e| match &e.kind {
            EventKind::Deliver { src, dst, payload }
            | EventKind::Drop { src, dst, payload, .. } => Some((e.round, *src, *dst, payload)),
            _ => None,
        })
    }

    /// Serializes events as line-delimited JSON, one event per line, in
    /// round order.
    pub fn to_ldjson(&self) -> Result<String> {
        self.require_recorded()?;
        let mut out = String::new();
        for event in &self.events {
            out.push_str(&serde_json::to_string(event).expect("event serializes"));
            out.push('\n');
        }
        Ok(out)
    }
}

/// Canonical digest of a transcript: events are grouped by round, sorted
/// within each round, and hashed. The digest is therefore independent of
/// intra-round recording order, and identical configs yield identical
/// digests.
pub fn replay_hash(transcript: &Transcript) -> Result<String> {
    if !transcript.recorded {
        return Err(Error::TranscriptNotRecorded);
    }
    let mut by_round: BTreeMap<Round, Vec<String>> = BTreeMap::new();
    for event in &transcript.events {
        by_round
            .entry(event.round)
            .or_default()
            .push(serde_json::to_string(event).expect("event serializes"));
    }
    let mut hasher = Sha256::new();
    hasher.update(transcript.n.to_le_bytes());
    hasher.update(transcript.total_rounds.to_le_bytes());
    for (round, mut lines) in by_round {
        lines.sort_unstable();
        hasher.update(round.to_le_bytes());
        for line in lines {
            hasher.update(line.as_bytes());
            hasher.update([b'\n']);
        }
    }
    Ok(hex::encode(hasher.finalize()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::Value;

    fn sample() -> Transcript {
        let mut t = Transcript::new(2, 1, true);
        t.push(1, EventKind::Action { pid: ProcessorId(1), sends: 1 });
        t.push(
            1,
            EventKind::Deliver {
                src: ProcessorId(1),
                dst: ProcessorId(2),
                payload: Payload::Vote { value: Value::Val(3) },
            },
        );
        t
    }

    #[test]
    fn hash_is_order_independent_within_round() {
        let t = sample();
        let mut reordered = t.clone();
        reordered.events.reverse();
        assert_eq!(replay_hash(&t).unwrap(), replay_hash(&reordered).unwrap());
    }

    #[test]
    fn hash_distinguishes_payloads() {
        let t = sample();
        let mut other = t.clone();
        if let EventKind::Deliver { payload, .. } = &mut other.events[1].kind {
            *payload = Payload::Vote { value: Value::Val(4) };
        }
        assert_ne!(replay_hash(&t).unwrap(), replay_hash(&other).unwrap());
    }

    #[test]
    fn unrecorded_transcript_has_no_hash() {
        let t = Transcript::new(2, 1, false);
        assert_eq!(replay_hash(&t), Err(Error::TranscriptNotRecorded));
    }

    #[test]
    fn event_json_shape() {
        let e = Event {
            round: 3,
            kind: EventKind::Drop {
                src: ProcessorId(1),
                dst: ProcessorId(2),
                payload: Payload::Dissem { value: Value::Val(0) },
                reason: DropReason::DstAsleep,
            },
        };
        let json = serde_json::to_string(&e).unwrap();
        assert!(json.contains(r#""round":3"#), "{json}");
        assert!(json.contains(r#""kind":"drop""#), "{json}");
        assert!(json.contains(r#""reason":"dst_asleep""#), "{json}");
    }
}
