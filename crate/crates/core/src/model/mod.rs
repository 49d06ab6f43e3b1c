//! The deterministic round engine.
//!
//! Rounds are lockstep: every awake, non-crashed processor acts, a rushing
//! Byzantine strategy then chooses its own messages having observed the
//! honest ones, crash filtering applies the adversary's delivered subset in
//! the crash round, messages to sleeping destinations are permanently lost,
//! and the remainder is delivered. Everything is recorded in the transcript;
//! `(config, seed)` fully determines the run.

pub mod metrics;
pub mod transcript;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use metrics::{metrics_of, Metrics};
pub use transcript::{replay_hash, DropReason, Event, EventKind, Transcript};

use crate::adversary::{self, AdversarySpec, CrashSchedule};
use crate::error::{Error, Result};
use crate::protocols::ProtocolSpec;
use crate::types::{all_processors, Message, Output, ProcessorId, Round, RoundAction, Value};

/// A per-processor protocol state machine driven by the engine.
pub trait Instance {
    /// Called at the start of every round the processor is not sleeping
    /// through. `None` means the protocol has no action where its schedule
    /// expects one (reported as a stuck protocol).
    fn act(&mut self, round: Round) -> Option<RoundAction>;

    /// Called at the end of every round the processor was awake in, with the
    /// messages delivered to it this round (possibly none).
    fn round_end(&mut self, round: Round, delivered: &[Message]);

    /// The final output, available once the schedule has completed.
    fn output(&self) -> Option<Output>;
}

/// Engine knobs. Metrics and outputs are always exact; disabling transcript
/// recording skips per-message events for high-volume sweeps.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SimConfig {
    pub record_transcript: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig { record_transcript: true }
    }
}

/// Everything a finished simulation yields.
#[derive(Clone, Debug)]
pub struct SimResult {
    pub transcript: Transcript,
    /// Outputs of all processors that were neither Byzantine nor crashed.
    pub outputs: BTreeMap<ProcessorId, Output>,
    pub metrics: Metrics,
}

struct ProcessorState {
    instance: Option<Box<dyn Instance>>,
    /// Asleep for rounds `< wake_at`.
    wake_at: Round,
    /// Round the adversary crashes this processor, if any.
    crash_round: Option<Round>,
    byzantine: bool,
    awake_rounds: u32,
}

impl ProcessorState {
    fn crashed_by(&self, round: Round) -> bool {
        self.crash_round.is_some_and(|r| r <= round)
    }
}

/// Runs one complete simulation of `protocol` over processors `1..=n`.
///
/// The adversary corrupts at most `f` processors (its budget is validated
/// against the protocol configuration); Byzantine adversaries are only
/// meaningful for protocols that tolerate them.
pub fn run_simulation(
    n: u32,
    inputs: &BTreeMap<ProcessorId, Value>,
    protocol: &ProtocolSpec,
    adversary: &AdversarySpec,
    config: &SimConfig,
) -> Result<SimResult> {
    protocol.validate(n, inputs)?;
    validate_inputs(n, inputs)?;
    adversary::validate(adversary, n, protocol.config.f)?;
    if protocol.crash_only() && matches!(adversary, AdversarySpec::Byzantine { .. }) {
        return Err(Error::ConfigInvalid(format!(
            "protocol {} operates under crash faults only",
            protocol.kind.name()
        )));
    }

    let total_rounds = protocol.duration(n);
    let empty_schedule = CrashSchedule::empty();
    let crash_schedule = match adversary {
        AdversarySpec::Crash(schedule) => schedule,
        _ => &empty_schedule,
    };
    let (mut strategy, corrupted) = match adversary {
        AdversarySpec::Byzantine { name, params, seed } => {
            let corrupted = adversary::resolve_corrupted(params, n, protocol.config.f);
            (Some(adversary::builtin_strategy(name, params, *seed)?), corrupted)
        }
        _ => (None, Default::default()),
    };

    let mut transcript = Transcript::new(n, total_rounds, config.record_transcript);
    if !corrupted.is_empty() {
        transcript.push_always(0, EventKind::Byzantine { pids: corrupted.iter().copied().collect() });
    }

    let mut procs: BTreeMap<ProcessorId, ProcessorState> = all_processors(n)
        .map(|pid| {
            let byzantine = corrupted.contains(&pid);
            let state = ProcessorState {
                instance: (!byzantine).then(|| protocol.build(pid, n, inputs[&pid])),
                wake_at: 1,
                crash_round: crash_schedule.crash_of(pid).map(|c| c.round),
                byzantine,
                awake_rounds: 0,
            };
            (pid, state)
        })
        .collect();

    let mut total_messages = 0u64;
    let mut inboxes: BTreeMap<ProcessorId, Vec<Message>> = BTreeMap::new();

    for round in 1..=total_rounds {
        // (i) Actions of awake, non-crashed processors, in id order.
        let mut sent: Vec<Message> = Vec::new();
        let mut acted: Vec<ProcessorId> = Vec::new();
        for pid in all_processors(n) {
            let state = procs.get_mut(&pid).expect("state exists");
            if state.byzantine || state.crashed_by(round - 1) || round < state.wake_at {
                continue;
            }
            let instance = state.instance.as_mut().expect("honest processor has an instance");
            match instance.act(round) {
                None => return Err(Error::ProtocolStuck { pid, round }),
                Some(RoundAction::Sleep { until }) => {
                    if until <= round {
                        return Err(Error::ProtocolStuck { pid, round });
                    }
                    state.wake_at = until;
                    transcript.push(round, EventKind::Sleep { pid, until });
                }
                Some(RoundAction::Send(sends)) => {
                    state.awake_rounds += 1;
                    acted.push(pid);
                    transcript.push(round, EventKind::Action { pid, sends: sends.len() as u32 });
                    sent.extend(sends.into_iter().map(|(dst, payload)| Message {
                        src: pid,
                        dst,
                        round,
                        payload,
                    }));
                }
            }
        }

        // Rushing Byzantine substitution: the strategy observes all honest
        // round-t traffic before emitting its own.
        if let Some(strategy) = strategy.as_mut() {
            let chosen = strategy.decide(round, &corrupted, n, &sent, &transcript);
            let mut per_src: BTreeMap<ProcessorId, u32> =
                corrupted.iter().map(|pid| (*pid, 0)).collect();
            for (src, dst, payload) in chosen {
                // Strategies may only speak for corrupted processors, and
                // only towards real ones.
                if !corrupted.contains(&src) || dst.0 < 1 || dst.0 > n {
                    continue;
                }
                *per_src.entry(src).or_default() += 1;
                sent.push(Message { src, dst, round, payload });
            }
            // Corrupted processors listen every round; they are never asleep.
            for (pid, sends) in per_src {
                procs.get_mut(&pid).expect("state exists").awake_rounds += 1;
                transcript.push(round, EventKind::Action { pid, sends });
            }
        }

        // Crash events of this round.
        for entry in &crash_schedule.crashes {
            if entry.round == round {
                transcript.push_always(
                    round,
                    EventKind::Crash {
                        pid: entry.pid,
                        delivered: entry.delivered.iter().copied().collect(),
                    },
                );
            }
        }

        // (ii) Delivery: crash filtering, then sleep drops, then the rest.
        for msg in sent {
            total_messages += 1;
            let src_state = &procs[&msg.src];
            let omitted = src_state.crash_round == Some(round)
                && !crash_schedule
                    .crash_of(msg.src)
                    .is_some_and(|c| c.delivered.contains(&msg.dst));
            let dst_state = &procs[&msg.dst];
            let reason = if omitted {
                Some(DropReason::SrcCrashOmitted)
            } else if dst_state.crashed_by(round) {
                Some(DropReason::DstCrashed)
            } else if !dst_state.byzantine && round < dst_state.wake_at {
                Some(DropReason::DstAsleep)
            } else {
                None
            };
            match reason {
                Some(reason) => transcript.push(
                    round,
                    EventKind::Drop { src: msg.src, dst: msg.dst, payload: msg.payload, reason },
                ),
                None => {
                    transcript.push(
                        round,
                        EventKind::Deliver {
                            src: msg.src,
                            dst: msg.dst,
                            payload: msg.payload.clone(),
                        },
                    );
                    inboxes.entry(msg.dst).or_default().push(msg);
                }
            }
        }

        // (iii) Local computation of processors that were awake this round
        // and did not crash during it.
        for pid in acted {
            let state = procs.get_mut(&pid).expect("state exists");
            if state.crashed_by(round) {
                continue;
            }
            let delivered = inboxes.remove(&pid).unwrap_or_default();
            state.instance.as_mut().expect("honest").round_end(round, &delivered);
        }
        inboxes.clear();
    }

    // Outputs of all processors that are neither Byzantine nor crashed.
    let mut outputs = BTreeMap::new();
    for (pid, state) in &procs {
        if state.byzantine || state.crashed_by(total_rounds) {
            continue;
        }
        let output = state
            .instance
            .as_ref()
            .and_then(|i| i.output())
            .ok_or(Error::ProtocolStuck { pid: *pid, round: total_rounds })?;
        transcript.push_always(total_rounds, EventKind::Output { pid: *pid, output });
        outputs.insert(*pid, output);
    }

    let metrics = Metrics {
        awake_rounds: procs.iter().map(|(pid, s)| (*pid, s.awake_rounds)).collect(),
        total_rounds,
        total_messages,
    };
    Ok(SimResult { transcript, outputs, metrics })
}

fn validate_inputs(n: u32, inputs: &BTreeMap<ProcessorId, Value>) -> Result<()> {
    for pid in all_processors(n) {
        match inputs.get(&pid) {
            None => {
                return Err(Error::ConfigInvalid(format!("missing input for processor {pid}")))
            }
            Some(Value::Bottom) => {
                return Err(Error::ConfigInvalid(format!("input of processor {pid} is ⊥")))
            }
            Some(_) => {}
        }
    }
    if inputs.len() as u32 != n {
        return Err(Error::ConfigInvalid(format!(
            "{} inputs supplied for {} processors",
            inputs.len(),
            n
        )));
    }
    Ok(())
}
