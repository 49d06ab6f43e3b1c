//! Awake/round/message accounting.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::transcript::{EventKind, Transcript};
use crate::types::{ProcessorId, Round};

/// Complexity counters of one execution.
///
/// A processor is awake in a round when it is neither sleeping nor crashed
/// out; dropped messages still count as sent (the sender paid for them).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Metrics {
    pub awake_rounds: BTreeMap<ProcessorId, u32>,
    pub total_rounds: Round,
    pub total_messages: u64,
}

impl Metrics {
    /// The awake complexity of the run: the maximum number of rounds any
    /// single processor spent awake.
    pub fn max_awake(&self) -> u32 {
        self.awake_rounds.values().copied().max().unwrap_or(0)
    }
}

/// Recomputes metrics from a recorded transcript. This is an independent
/// route from the engine's own counters: `Action` events mark awake rounds
/// and every `Deliver`/`Drop` event is one sent message.
pub fn metrics_of(transcript: &Transcript) -> Result<Metrics> {
    if !transcript.recorded {
        return Err(Error::TranscriptNotRecorded);
    }
    let mut awake_rounds: BTreeMap<ProcessorId, u32> = BTreeMap::new();
    for pid in crate::types::all_processors(transcript.n) {
        awake_rounds.insert(pid, 0);
    }
    let mut total_messages = 0u64;
    for event in &transcript.events {
        match &event.kind {
            EventKind::Action { pid, .. } => *awake_rounds.entry(*pid).or_default() += 1,
            EventKind::Deliver { .. } | EventKind::Drop { .. } => total_messages += 1,
            _ => {}
        }
    }
    Ok(Metrics { awake_rounds, total_rounds: transcript.total_rounds, total_messages })
}
