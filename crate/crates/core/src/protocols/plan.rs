//! Plan-compiled state machines for the crash-fault protocols.
//!
//! Every crash protocol here follows a fixed global calendar, so each
//! processor's whole career can be compiled upfront into a sorted list of
//! per-round steps; rounds between steps are slept through. A single value
//! register threads the recursion: flood segments decide into it,
//! dissemination rounds publish it, the preliminary 1-preference round may
//! overwrite it, and the final subset-decision exchange maxes over it.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use crate::model::Instance;
use crate::protocols::schedule::{partition, rca_duration, split_halves};
use crate::protocols::BaseVariant;
use crate::types::{all_processors, Message, Output, Payload, ProcessorId, Round, RoundAction, Value};

type Group = Arc<[ProcessorId]>;

#[derive(Clone, Debug)]
pub(crate) struct PlanStep {
    round: Round,
    kind: StepKind,
}

#[derive(Clone, Debug)]
enum StepKind {
    /// One FloodSet round: broadcast the known-value set within `group`.
    Flood { group: Group, first: bool, last: bool },
    /// Send the current value to the first half (1-preference prelim round).
    PrelimSend { targets: Group },
    /// Listen for preliminary values; a received 1 overwrites the input.
    PrelimListen,
    /// Broadcast the decided child value to the whole parent group.
    DissemSend { group: Group },
    /// Listen for the first half's dissemination; adopt the value.
    DissemListen,
    /// Final exchange of the optimized algorithm: broadcast own subset's
    /// decision under `slot` (when a member of a deciding subset) and take
    /// the max over all collected slots.
    SubsetExchange { slot: Option<u32> },
}

/// Compiles the steps of `RCA[members]` for processor `p`, starting at
/// `start`. Returns the last round of the call (the processor appends no
/// steps for phases it sleeps through).
fn push_rca_steps(
    steps: &mut Vec<PlanStep>,
    p: ProcessorId,
    members: &[ProcessorId],
    start: Round,
    c: u32,
    one_preference: bool,
) -> Round {
    let m = members.len() as u32;
    if m <= c {
        push_flood_segment(steps, p, members, start);
        return start + m - 1;
    }
    let (first, second) = split_halves(members);
    let in_first = first.binary_search(&p).is_ok();
    let in_second = second.binary_search(&p).is_ok();

    let mut r = start;
    if one_preference {
        if in_second {
            steps.push(PlanStep { round: r, kind: StepKind::PrelimSend { targets: first.into() } });
        } else if in_first {
            steps.push(PlanStep { round: r, kind: StepKind::PrelimListen });
        }
        r += 1;
    }

    let first_end = if in_first {
        push_rca_steps(steps, p, first, r, c, one_preference)
    } else {
        r + rca_duration(first.len() as u32, c, one_preference) - 1
    };

    let dissem = first_end + 1;
    if in_first {
        steps.push(PlanStep { round: dissem, kind: StepKind::DissemSend { group: members.into() } });
    } else if in_second {
        steps.push(PlanStep { round: dissem, kind: StepKind::DissemListen });
    }

    if in_second {
        push_rca_steps(steps, p, second, dissem + 1, c, one_preference)
    } else {
        // The second child occupies [dissem + 1, dissem + duration].
        dissem + rca_duration(second.len() as u32, c, one_preference)
    }
}

/// FloodSet over `members`: one broadcast round per member.
fn push_flood_segment(steps: &mut Vec<PlanStep>, p: ProcessorId, members: &[ProcessorId], start: Round) {
    if members.binary_search(&p).is_err() {
        return;
    }
    let group: Group = members.into();
    let rounds = members.len() as Round;
    for i in 0..rounds {
        steps.push(PlanStep {
            round: start + i,
            kind: StepKind::Flood {
                group: Arc::clone(&group),
                first: i == 0,
                last: i + 1 == rounds,
            },
        });
    }
}

/// The plan-driven instance shared by FloodSet, the recursive algorithm, its
/// 1-preference variant and the optimized partitioned algorithm.
pub(crate) struct CrashInstance {
    value: Value,
    known: BTreeSet<Value>,
    variant: BaseVariant,
    n: u32,
    /// Number of deciding subsets of the optimized algorithm (0 otherwise).
    num_slots: u32,
    slots: BTreeMap<u32, Value>,
    steps: Vec<PlanStep>,
    cursor: usize,
    horizon: Round,
    finished: bool,
}

impl CrashInstance {
    fn new(
        input: Value,
        variant: BaseVariant,
        n: u32,
        num_slots: u32,
        steps: Vec<PlanStep>,
        horizon: Round,
    ) -> Self {
        debug_assert!(steps.windows(2).all(|w| w[0].round < w[1].round));
        CrashInstance {
            value: input,
            known: BTreeSet::new(),
            variant,
            n,
            num_slots,
            slots: BTreeMap::new(),
            steps,
            cursor: 0,
            horizon,
            finished: false,
        }
    }

    /// Standalone FloodSet over all `n` processors, running `n` rounds.
    pub(crate) fn base_ca(pid: ProcessorId, n: u32, input: Value, variant: BaseVariant) -> Self {
        let members: Vec<ProcessorId> = all_processors(n).collect();
        let mut steps = Vec::new();
        push_flood_segment(&mut steps, pid, &members, 1);
        Self::new(input, variant, n, 0, steps, n)
    }

    /// Recursive crash agreement over all `n` processors.
    pub(crate) fn rca(
        pid: ProcessorId,
        n: u32,
        input: Value,
        c: u32,
        variant: BaseVariant,
        one_preference: bool,
    ) -> Self {
        let members: Vec<ProcessorId> = all_processors(n).collect();
        let mut steps = Vec::new();
        let end = push_rca_steps(&mut steps, pid, &members, 1, c, one_preference);
        Self::new(input, variant, n, 0, steps, end)
    }

    /// Optimized construction: parallel recursive calls on subsets of size
    /// `f+1`, then one broadcast round of per-subset decisions.
    pub(crate) fn optimized_rca(
        pid: ProcessorId,
        n: u32,
        input: Value,
        c: u32,
        f: u32,
        variant: BaseVariant,
    ) -> Self {
        let groups = partition(n, f);
        let num_slots = (groups.len() - 1) as u32;
        let phase1 = rca_duration(f + 1, c, false);
        let exchange = phase1 + 1;
        let mut steps = Vec::new();
        let mut slot = None;
        for (i, group) in groups.iter().take(num_slots as usize).enumerate() {
            if group.binary_search(&pid).is_ok() {
                push_rca_steps(&mut steps, pid, group, 1, c, false);
                slot = Some(i as u32 + 1);
                break;
            }
        }
        steps.push(PlanStep { round: exchange, kind: StepKind::SubsetExchange { slot } });
        Self::new(input, variant, n, num_slots, steps, exchange)
    }

    fn decide_flood(&mut self) {
        debug_assert!(!self.known.is_empty());
        self.value = match self.variant {
            BaseVariant::DecideMin => *self.known.iter().next().unwrap(),
            BaseVariant::DecideMax => *self.known.iter().next_back().unwrap(),
        };
    }
}

impl Instance for CrashInstance {
    fn act(&mut self, round: Round) -> Option<RoundAction> {
        // Step kinds are Arc-backed, so cloning out of the plan is cheap and
        // leaves `self` free for the state updates below.
        let (step_round, kind) = match self.steps.get(self.cursor) {
            None => return Some(RoundAction::Sleep { until: self.horizon + 1 }),
            Some(step) => (step.round, step.kind.clone()),
        };
        if step_round > round {
            return Some(RoundAction::Sleep { until: step_round });
        }
        if step_round < round {
            return None; // calendar slipped; the engine reports it as stuck
        }
        let sends = match &kind {
            StepKind::Flood { group, first, .. } => {
                if *first {
                    self.known = [self.value].into_iter().collect();
                }
                let payload = Payload::Flood { values: self.known.clone() };
                group.iter().map(|dst| (*dst, payload.clone())).collect()
            }
            StepKind::PrelimSend { targets } => targets
                .iter()
                .map(|dst| (*dst, Payload::Prelim { value: self.value }))
                .collect(),
            StepKind::DissemSend { group } => group
                .iter()
                .map(|dst| (*dst, Payload::Dissem { value: self.value }))
                .collect(),
            StepKind::SubsetExchange { slot: Some(slot) } => {
                let payload = Payload::SubsetDecision { slot: *slot, value: self.value };
                all_processors(self.n).map(|dst| (dst, payload.clone())).collect()
            }
            StepKind::PrelimListen
            | StepKind::DissemListen
            | StepKind::SubsetExchange { slot: None } => Vec::new(),
        };
        Some(RoundAction::Send(sends))
    }

    fn round_end(&mut self, round: Round, delivered: &[Message]) {
        let kind = match self.steps.get(self.cursor) {
            Some(step) if step.round == round => step.kind.clone(),
            _ => return,
        };
        match &kind {
            StepKind::Flood { last, .. } => {
                for msg in delivered {
                    if let Payload::Flood { values } = &msg.payload {
                        self.known.extend(values.iter().copied());
                    }
                }
                if *last {
                    self.decide_flood();
                }
            }
            StepKind::PrelimListen => {
                if delivered
                    .iter()
                    .any(|m| matches!(m.payload, Payload::Prelim { value } if value == Value::one()))
                {
                    self.value = Value::one();
                }
            }
            StepKind::DissemListen => {
                // All senders decided the same value; take the smallest id.
                let adopted = delivered
                    .iter()
                    .filter_map(|m| match m.payload {
                        Payload::Dissem { value } => Some((m.src, value)),
                        _ => None,
                    })
                    .min_by_key(|(src, _)| *src);
                if let Some((_, v)) = adopted {
                    self.value = v;
                }
            }
            StepKind::SubsetExchange { .. } => {
                for msg in delivered {
                    if let Payload::SubsetDecision { slot, value } = msg.payload {
                        if (1..=self.num_slots).contains(&slot) {
                            // Deliveries arrive in ascending sender order.
                            self.slots.entry(slot).or_insert(value);
                        }
                    }
                }
                // Max over the collected entries; missing slots stay ⊥ and
                // are ignored, so an absent decision never wins.
                self.value =
                    self.slots.values().copied().max().unwrap_or(Value::Bottom);
            }
            StepKind::PrelimSend { .. } | StepKind::DissemSend { .. } => {}
        }
        self.cursor += 1;
        if self.cursor == self.steps.len() {
            self.finished = true;
        }
    }

    fn output(&self) -> Option<Output> {
        self.finished.then_some(Output::Plain(self.value))
    }
}
