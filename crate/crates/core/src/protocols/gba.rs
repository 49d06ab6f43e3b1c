//! Unauthenticated graded Byzantine agreement, two rounds, for f < n/3.
//!
//! Round 1 broadcasts a vote for the input. Round 2 broadcasts a
//! confirmation for the value that gathered at least n−f votes, if any, and
//! grades the adopted value by its confirmation count. Tallies are
//! deduplicated per sender, so an equivocating sender still contributes at
//! most one vote and one confirmation to any single receiver.

use std::collections::BTreeMap;

use crate::model::Instance;
use crate::protocols::GbaThresholds;
use crate::types::{all_processors, GradedOutput, Message, Output, Payload, ProcessorId, Round, RoundAction, Value};

pub(crate) struct GbaInstance {
    n: u32,
    f: u32,
    thresholds: GbaThresholds,
    input: Value,
    /// First vote received from each sender.
    votes: BTreeMap<ProcessorId, Value>,
    /// First confirmation received from each sender.
    confirms: BTreeMap<ProcessorId, Value>,
    decided: Option<GradedOutput>,
}

impl GbaInstance {
    pub(crate) fn new(n: u32, f: u32, thresholds: GbaThresholds, input: Value) -> Self {
        GbaInstance {
            n,
            f,
            thresholds,
            input,
            votes: BTreeMap::new(),
            confirms: BTreeMap::new(),
            decided: None,
        }
    }

    /// Tally of distinct-sender messages per value, in ascending value order.
    fn tally(map: &BTreeMap<ProcessorId, Value>) -> BTreeMap<Value, u32> {
        let mut counts = BTreeMap::new();
        for value in map.values() {
            *counts.entry(*value).or_insert(0u32) += 1;
        }
        counts
    }

    /// The value with the most entries; ties break to the smallest value.
    fn best(counts: &BTreeMap<Value, u32>) -> Option<(Value, u32)> {
        let mut best: Option<(Value, u32)> = None;
        for (value, count) in counts {
            match best {
                Some((_, c)) if *count <= c => {}
                _ => best = Some((*value, *count)),
            }
        }
        best
    }

    fn decide(&mut self) {
        let counts = Self::tally(&self.confirms);
        let best = Self::best(&counts);
        let grade1_needed = match self.thresholds {
            // The paper's rule: grade 1 once the adopted value has f+1
            // confirmations.
            GbaThresholds::Paper => self.f + 1,
            // The conservative rule: grade 1 requires n−f confirmations.
            GbaThresholds::Strict => self.n - self.f,
        };
        let adopt_needed = match self.thresholds {
            // Adopt the most-confirmed value whenever any confirmation
            // arrived (smallest value on ties).
            GbaThresholds::Paper => 1,
            GbaThresholds::Strict => self.f + 1,
        };
        self.decided = Some(match best {
            Some((value, count)) if count >= adopt_needed => {
                let grade = u8::from(count >= grade1_needed);
                GradedOutput { value, grade }
            }
            _ => GradedOutput { value: self.input, grade: 0 },
        });
    }
}

impl Instance for GbaInstance {
    fn act(&mut self, round: Round) -> Option<RoundAction> {
        match round {
            1 => {
                let payload = Payload::Vote { value: self.input };
                Some(RoundAction::Send(
                    all_processors(self.n).map(|dst| (dst, payload.clone())).collect(),
                ))
            }
            2 => {
                let counts = Self::tally(&self.votes);
                let threshold = self.n - self.f;
                let confirmed = Self::best(&counts).filter(|(_, c)| *c >= threshold);
                let sends = match confirmed {
                    Some((value, _)) => {
                        let payload = Payload::Confirm { value };
                        all_processors(self.n).map(|dst| (dst, payload.clone())).collect()
                    }
                    None => Vec::new(),
                };
                Some(RoundAction::Send(sends))
            }
            _ => None,
        }
    }

    fn round_end(&mut self, round: Round, delivered: &[Message]) {
        match round {
            1 => {
                for msg in delivered {
                    if let Payload::Vote { value } = msg.payload {
                        self.votes.entry(msg.src).or_insert(value);
                    }
                }
            }
            2 => {
                for msg in delivered {
                    if let Payload::Confirm { value } = msg.payload {
                        self.confirms.entry(msg.src).or_insert(value);
                    }
                }
                self.decide();
            }
            _ => {}
        }
    }

    fn output(&self) -> Option<Output> {
        self.decided.map(Output::Graded)
    }
}
