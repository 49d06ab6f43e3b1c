//! Property checkers over inputs, outputs, transcripts and metrics, plus the
//! exhaustive small-scope verification driver.
//!
//! Checkers are pure functions; re-checking a replayed transcript yields
//! identical verdicts. A failing verdict always carries a witness.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adversary::{enumerate_crash_schedules, AdversarySpec};
use crate::error::{Error, Result};
use crate::model::transcript::Transcript;
use crate::model::{run_simulation, Metrics, SimConfig, SimResult};
use crate::protocols::ProtocolSpec;
use crate::types::{all_processors, GradedOutput, Output, ProcessorId, Round, Value};

/// Outcome of one property check.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct Verdict {
    pub property: String,
    pub pass: bool,
    /// Minimal description of the violation; present exactly when failing.
    pub witness: Option<String>,
}

impl Verdict {
    pub fn pass(property: impl Into<String>) -> Self {
        Verdict { property: property.into(), pass: true, witness: None }
    }

    pub fn fail(property: impl Into<String>, witness: impl Into<String>) -> Self {
        Verdict { property: property.into(), pass: false, witness: Some(witness.into()) }
    }

    pub fn is_pass(&self) -> bool {
        self.pass
    }
}

/// Which processors misbehaved, extracted from a transcript.
#[derive(Clone, PartialEq, Eq, Debug, Default, Serialize, Deserialize)]
pub struct FaultView {
    pub crashed: BTreeMap<ProcessorId, Round>,
    pub byzantine: BTreeSet<ProcessorId>,
}

impl FaultView {
    pub fn from_transcript(transcript: &Transcript) -> Self {
        FaultView { crashed: transcript.crashes(), byzantine: transcript.byzantine() }
    }

    pub fn is_faulty(&self, pid: ProcessorId) -> bool {
        self.crashed.contains_key(&pid) || self.byzantine.contains(&pid)
    }

    pub fn is_empty(&self) -> bool {
        self.crashed.is_empty() && self.byzantine.is_empty()
    }

    pub fn non_faulty(&self, n: u32) -> Vec<ProcessorId> {
        all_processors(n).filter(|pid| !self.is_faulty(*pid)).collect()
    }
}

fn non_faulty_outputs<'a>(
    outputs: &'a BTreeMap<ProcessorId, Output>,
    faults: &'a FaultView,
) -> impl Iterator<Item = (ProcessorId, &'a Output)> + 'a {
    outputs.iter().filter(|(pid, _)| !faults.is_faulty(**pid)).map(|(pid, o)| (*pid, o))
}

/// Safety: all non-faulty processors decided the same value.
pub fn check_agreement(outputs: &BTreeMap<ProcessorId, Output>, faults: &FaultView) -> Verdict {
    let mut first: Option<(ProcessorId, Value)> = None;
    for (pid, output) in non_faulty_outputs(outputs, faults) {
        let value = output.value();
        match first {
            None => first = Some((pid, value)),
            Some((p0, v0)) if v0 != value => {
                return Verdict::fail(
                    "agreement",
                    format!("processor {p0} output {v0} but processor {pid} output {value}"),
                );
            }
            Some(_) => {}
        }
    }
    Verdict::pass("agreement")
}

/// The three validity flavors. Vacuous premises pass.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValidityKind {
    /// Unanimous non-faulty inputs force that output.
    Standard,
    /// Binding only in completely fault-free runs.
    Weak,
    /// Every decision is some non-faulty processor's input.
    Strong,
}

pub fn check_validity(
    inputs: &BTreeMap<ProcessorId, Value>,
    outputs: &BTreeMap<ProcessorId, Output>,
    faults: &FaultView,
    kind: ValidityKind,
) -> Verdict {
    let name = match kind {
        ValidityKind::Standard => "validity",
        ValidityKind::Weak => "weak_validity",
        ValidityKind::Strong => "strong_validity",
    };
    // Inputs exist at time zero, when no processor has crashed yet: a
    // crash-faulty processor ran the protocol honestly on its real input,
    // so only Byzantine inputs are excluded from validity premises. (A
    // group that agrees, disseminates its value and only then crashes
    // legitimately imprints that value on the survivors.)
    let honest_inputs: BTreeSet<Value> = inputs
        .iter()
        .filter(|(pid, _)| !faults.byzantine.contains(pid))
        .map(|(_, v)| *v)
        .collect();
    match kind {
        ValidityKind::Standard | ValidityKind::Weak => {
            if kind == ValidityKind::Weak && !faults.is_empty() {
                return Verdict::pass(name);
            }
            let unanimous = if kind == ValidityKind::Weak {
                // Weak validity premises unanimity of *all* processors.
                let every: BTreeSet<Value> = inputs.values().copied().collect();
                (every.len() == 1).then(|| *every.iter().next().unwrap())
            } else {
                (honest_inputs.len() == 1).then(|| *honest_inputs.iter().next().unwrap())
            };
            let Some(v) = unanimous else { return Verdict::pass(name) };
            for (pid, output) in non_faulty_outputs(outputs, faults) {
                if output.value() != v {
                    return Verdict::fail(
                        name,
                        format!("unanimous input {v} but processor {pid} output {}", output.value()),
                    );
                }
            }
            Verdict::pass(name)
        }
        ValidityKind::Strong => {
            for (pid, output) in non_faulty_outputs(outputs, faults) {
                if !honest_inputs.contains(&output.value()) {
                    return Verdict::fail(
                        name,
                        format!(
                            "processor {pid} output {} which is no non-faulty input",
                            output.value()
                        ),
                    );
                }
            }
            Verdict::pass(name)
        }
    }
}

/// Termination: every non-faulty processor produced exactly one output.
pub fn check_termination(
    outputs: &BTreeMap<ProcessorId, Output>,
    faults: &FaultView,
    n: u32,
) -> Verdict {
    for pid in faults.non_faulty(n) {
        if !outputs.contains_key(&pid) {
            return Verdict::fail("termination", format!("processor {pid} produced no output"));
        }
    }
    Verdict::pass("termination")
}

/// Graded agreement properties: consistency (a grade-1 output pins every
/// honest value) and validity (unanimous honest inputs force `(v, 1)`).
pub fn check_gba(
    inputs: &BTreeMap<ProcessorId, Value>,
    outputs: &BTreeMap<ProcessorId, Output>,
    faults: &FaultView,
) -> (Verdict, Verdict) {
    let graded: BTreeMap<ProcessorId, GradedOutput> = non_faulty_outputs(outputs, faults)
        .filter_map(|(pid, o)| o.graded().map(|g| (pid, g)))
        .collect();

    let consistency = 'c: {
        let anchor = graded.iter().find(|(_, g)| g.grade == 1);
        if let Some((p0, g0)) = anchor {
            for (pid, g) in &graded {
                if g.value != g0.value {
                    break 'c Verdict::fail(
                        "gba_consistency",
                        format!(
                            "processor {p0} output ({}, 1) but processor {pid} holds {}",
                            g0.value, g.value
                        ),
                    );
                }
            }
        }
        Verdict::pass("gba_consistency")
    };

    let validity = 'v: {
        let honest_inputs: BTreeSet<Value> = inputs
            .iter()
            .filter(|(pid, _)| !faults.is_faulty(**pid))
            .map(|(_, v)| *v)
            .collect();
        if honest_inputs.len() == 1 {
            let v = *honest_inputs.iter().next().unwrap();
            for (pid, g) in &graded {
                if g.value != v || g.grade != 1 {
                    break 'v Verdict::fail(
                        "gba_validity",
                        format!(
                            "unanimous honest input {v} but processor {pid} output ({}, {})",
                            g.value, g.grade
                        ),
                    );
                }
            }
        }
        Verdict::pass("gba_validity")
    };

    (consistency, validity)
}

/// 1-preference: every non-faulty processor that had any delivered message
/// carrying the value 1 must output 1.
pub fn check_1_preference(
    transcript: &Transcript,
    outputs: &BTreeMap<ProcessorId, Output>,
    faults: &FaultView,
) -> Verdict {
    let one = Value::one();
    for (pid, output) in non_faulty_outputs(outputs, faults) {
        if output.value() == one {
            continue;
        }
        let received_one = transcript
            .delivered_to(pid)
            .iter()
            .find(|(_, _, payload)| payload.carries(one))
            .map(|(round, src, _)| (*round, *src));
        if let Some((round, src)) = received_one {
            return Verdict::fail(
                "one_preference",
                format!(
                    "processor {pid} received 1 from {src} in round {round} but output {}",
                    output.value()
                ),
            );
        }
    }
    Verdict::pass("one_preference")
}

/// Complexity: the fixed calendar must be followed exactly; awake rounds
/// match the bound exactly in fault-free runs and never exceed it otherwise.
pub fn check_complexity(
    metrics: &Metrics,
    protocol: &ProtocolSpec,
    n: u32,
    fault_free: bool,
) -> Verdict {
    let expected_rounds = protocol.duration(n);
    let bound = protocol.awake_bound(n);
    if metrics.total_rounds != expected_rounds {
        return Verdict::fail(
            "complexity",
            format!("{} rounds executed, schedule says {expected_rounds}", metrics.total_rounds),
        );
    }
    let max_awake = metrics.max_awake();
    if fault_free && max_awake != bound {
        return Verdict::fail(
            "complexity",
            format!("fault-free max awake {max_awake} differs from bound {bound}"),
        );
    }
    if max_awake > bound {
        return Verdict::fail(
            "complexity",
            format!("max awake {max_awake} exceeds bound {bound}"),
        );
    }
    Verdict::pass("complexity")
}

/// Confirmations sent by non-faulty processors carry at most one distinct
/// value in any execution.
pub fn check_honest_confirm_uniqueness(transcript: &Transcript, faults: &FaultView) -> Verdict {
    let mut confirmed: BTreeMap<Value, ProcessorId> = BTreeMap::new();
    for (round, src, _dst, payload) in transcript.sends() {
        if faults.is_faulty(src) {
            continue;
        }
        if let crate::types::Payload::Confirm { value } = payload {
            confirmed.entry(*value).or_insert(src);
            if confirmed.len() > 1 {
                let mut it = confirmed.iter();
                let (v1, p1) = it.next().unwrap();
                let (v2, p2) = it.next().unwrap();
                return Verdict::fail(
                    "confirm_uniqueness",
                    format!(
                        "non-faulty confirms for {v1} (processor {p1}) and {v2} (processor {p2}) coexist at round {round}"
                    ),
                );
            }
        }
    }
    Verdict::pass("confirm_uniqueness")
}

/// Optimized construction: every survivor received at least one subset
/// decision for every deciding slot `1..=s`.
pub fn check_subset_coverage(
    transcript: &Transcript,
    faults: &FaultView,
    slots: u32,
) -> Verdict {
    for pid in faults.non_faulty(transcript.n) {
        let mut seen: BTreeSet<u32> = BTreeSet::new();
        for (_, _, payload) in transcript.delivered_to(pid) {
            if let crate::types::Payload::SubsetDecision { slot, .. } = payload {
                seen.insert(*slot);
            }
        }
        for slot in 1..=slots {
            if !seen.contains(&slot) {
                return Verdict::fail(
                    "subset_coverage",
                    format!("survivor {pid} collected no decision for subset {slot}"),
                );
            }
        }
    }
    Verdict::pass("subset_coverage")
}

/// Properties the drivers can evaluate after a run.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Property {
    Agreement,
    Validity,
    StrongValidity,
    Termination,
    OnePreference,
    GbaConsistency,
    GbaValidity,
    ConfirmUniqueness,
    Complexity,
    SubsetCoverage,
}

impl Property {
    pub fn name(&self) -> &'static str {
        match self {
            Property::Agreement => "agreement",
            Property::Validity => "validity",
            Property::StrongValidity => "strong_validity",
            Property::Termination => "termination",
            Property::OnePreference => "one_preference",
            Property::GbaConsistency => "gba_consistency",
            Property::GbaValidity => "gba_validity",
            Property::ConfirmUniqueness => "confirm_uniqueness",
            Property::Complexity => "complexity",
            Property::SubsetCoverage => "subset_coverage",
        }
    }

    /// Whether evaluating this property needs per-message transcript events.
    pub fn needs_transcript(&self) -> bool {
        matches!(
            self,
            Property::OnePreference | Property::ConfirmUniqueness | Property::SubsetCoverage
        )
    }
}

/// Evaluates `property` against one finished run.
pub fn evaluate(
    property: Property,
    protocol: &ProtocolSpec,
    n: u32,
    inputs: &BTreeMap<ProcessorId, Value>,
    result: &SimResult,
    fault_free: bool,
) -> Verdict {
    let faults = FaultView::from_transcript(&result.transcript);
    match property {
        Property::Agreement => check_agreement(&result.outputs, &faults),
        Property::Validity => check_validity(inputs, &result.outputs, &faults, ValidityKind::Standard),
        Property::StrongValidity => {
            check_validity(inputs, &result.outputs, &faults, ValidityKind::Strong)
        }
        Property::Termination => check_termination(&result.outputs, &faults, n),
        Property::OnePreference => check_1_preference(&result.transcript, &result.outputs, &faults),
        Property::GbaConsistency => check_gba(inputs, &result.outputs, &faults).0,
        Property::GbaValidity => check_gba(inputs, &result.outputs, &faults).1,
        Property::ConfirmUniqueness => check_honest_confirm_uniqueness(&result.transcript, &faults),
        Property::Complexity => check_complexity(&result.metrics, protocol, n, fault_free),
        Property::SubsetCoverage => {
            let slots = n / (protocol.config.f + 1);
            check_subset_coverage(&result.transcript, &faults, slots)
        }
    }
}

/// Replayable description of a failing run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FailureCase {
    pub protocol: ProtocolSpec,
    pub n: u32,
    pub inputs: Vec<Value>,
    pub adversary: AdversarySpec,
    pub verdict: Verdict,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PropertySummary {
    pub property: String,
    pub pass: u64,
    pub fail: u64,
    pub first_failure: Option<FailureCase>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExhaustiveSummary {
    pub runs: u64,
    pub properties: Vec<PropertySummary>,
}

impl ExhaustiveSummary {
    pub fn all_pass(&self) -> bool {
        self.properties.iter().all(|p| p.fail == 0)
    }
}

/// Exhaustive verification: runs every (input vector, crash schedule) pair
/// through the simulator and aggregates the property verdicts. The crash
/// schedules range over every choice of at most `f` crashing processors,
/// every crash round within the schedule, and every delivered subset.
pub fn exhaustive_verify(
    protocol: &ProtocolSpec,
    n: u32,
    input_domain: &[Value],
    properties: &[Property],
    cap: u128,
) -> Result<ExhaustiveSummary> {
    let f = protocol.config.f;
    let horizon = protocol.duration(n);
    let participants: Vec<ProcessorId> = all_processors(n).collect();
    let schedules = crate::adversary::count_crash_schedules(participants.len(), f, horizon)
        .ok_or(Error::SizeLimit { size: u128::MAX, cap })?;
    let vectors = (input_domain.len() as u128).checked_pow(n).unwrap_or(u128::MAX);
    let total = schedules.checked_mul(vectors).unwrap_or(u128::MAX);
    if total > cap {
        return Err(Error::SizeLimit { size: total, cap });
    }

    let record = properties.iter().any(|p| p.needs_transcript());
    let sim_config = SimConfig { record_transcript: record };

    let mut summaries: Vec<(u64, u64, Vec<PropertySummary>)> = input_vectors(input_domain, n)
        .enumerate()
        .par_bridge()
        .map(|(index, inputs)| -> Result<(u64, u64, Vec<PropertySummary>)> {
            let input_map: BTreeMap<ProcessorId, Value> = all_processors(n)
                .zip(inputs.iter().copied())
                .collect();
            let mut acc: Vec<PropertySummary> = properties
                .iter()
                .map(|p| PropertySummary {
                    property: p.name().to_string(),
                    pass: 0,
                    fail: 0,
                    first_failure: None,
                })
                .collect();
            let mut runs = 0u64;
            for schedule in enumerate_crash_schedules(&participants, f, horizon, None)? {
                let fault_free = schedule.crashes.is_empty();
                let adversary = if fault_free {
                    AdversarySpec::None
                } else {
                    AdversarySpec::Crash(schedule)
                };
                let result = run_simulation(n, &input_map, protocol, &adversary, &sim_config)?;
                runs += 1;
                for (property, summary) in properties.iter().zip(acc.iter_mut()) {
                    let verdict =
                        evaluate(*property, protocol, n, &input_map, &result, fault_free);
                    if verdict.pass {
                        summary.pass += 1;
                    } else {
                        summary.fail += 1;
                        summary.first_failure.get_or_insert_with(|| FailureCase {
                            protocol: *protocol,
                            n,
                            inputs: inputs.clone(),
                            adversary: adversary.clone(),
                            verdict: verdict.clone(),
                        });
                    }
                }
            }
            Ok((index as u64, runs, acc))
        })
        .collect::<Result<_>>()?;
    // Parallel bridging completes in arbitrary order; merge by input index
    // so the reported first failure is deterministic.
    summaries.sort_by_key(|(index, _, _)| *index);

    let mut merged: Vec<PropertySummary> = properties
        .iter()
        .map(|p| PropertySummary {
            property: p.name().to_string(),
            pass: 0,
            fail: 0,
            first_failure: None,
        })
        .collect();
    let mut runs = 0u64;
    for (_, r, partial) in summaries {
        runs += r;
        for (into, from) in merged.iter_mut().zip(partial) {
            into.pass += from.pass;
            into.fail += from.fail;
            if into.first_failure.is_none() {
                into.first_failure = from.first_failure;
            }
        }
    }
    Ok(ExhaustiveSummary { runs, properties: merged })
}

/// All input vectors of length `n` over `domain`, in lexicographic order.
pub fn input_vectors(domain: &[Value], n: u32) -> impl Iterator<Item = Vec<Value>> + Send {
    let domain = domain.to_vec();
    let total = (domain.len() as u64).pow(n);
    (0..total).map(move |mut index| {
        let mut vector = Vec::with_capacity(n as usize);
        for _ in 0..n {
            vector.push(domain[(index % domain.len() as u64) as usize]);
            index /= domain.len() as u64;
        }
        vector
    })
}
