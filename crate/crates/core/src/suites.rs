//! Prepackaged verification suites: the small-scope exhaustive matrix, the
//! randomized fault fuzzer, and the scripted confirm-equivocation attack.
//!
//! The command-line `check` subcommand and the acceptance tests both drive
//! these; all randomness flows from the caller's seed.

use std::collections::BTreeMap;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::adversary::{random_crash_schedule, AdversarySpec, StrategyParams, BUILTIN_STRATEGIES};
use crate::error::Result;
use crate::model::{replay_hash, run_simulation, SimConfig, SimResult};
use crate::protocols::{BaseVariant, GbaThresholds, ProtocolConfig, ProtocolKind, ProtocolSpec};
use crate::types::{all_processors, Output, ProcessorId, Value};
use crate::verify::{evaluate, exhaustive_verify, Property, Verdict};

/// One named suite item with its verdict; `asserted` distinguishes items
/// whose failure fails the suite from items that are reported only.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SuiteEntry {
    pub name: String,
    pub verdict: Verdict,
    pub asserted: bool,
    pub runs: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: String,
    pub entries: Vec<SuiteEntry>,
}

impl SuiteReport {
    /// True when every asserted entry passed.
    pub fn ok(&self) -> bool {
        self.entries.iter().all(|e| !e.asserted || e.verdict.pass)
    }

    fn push_summary(
        &mut self,
        name: impl Into<String>,
        summary: &crate::verify::ExhaustiveSummary,
    ) {
        let name = name.into();
        for prop in &summary.properties {
            let verdict = if prop.fail == 0 {
                Verdict::pass(prop.property.clone())
            } else {
                Verdict::fail(
                    prop.property.clone(),
                    serde_json::to_string(&prop.first_failure).unwrap_or_default(),
                )
            };
            self.entries.push(SuiteEntry {
                name: format!("{name}/{}", prop.property),
                verdict,
                asserted: true,
                runs: prop.pass + prop.fail,
            });
        }
    }
}

fn binary_domain() -> [Value; 2] {
    [Value::Val(0), Value::Val(1)]
}

fn spec(kind: ProtocolKind, f: u32) -> ProtocolSpec {
    ProtocolSpec::new(kind, ProtocolConfig { f, ..ProtocolConfig::default() })
}

fn gba_spec(n: u32, thresholds: GbaThresholds) -> ProtocolSpec {
    let f = n.div_ceil(3) - 1;
    ProtocolSpec::new(ProtocolKind::Gba, ProtocolConfig { f, thresholds, ..Default::default() })
}

const CRASH_PROPS: [Property; 4] =
    [Property::Agreement, Property::Validity, Property::Termination, Property::Complexity];

const GBA_PROPS: [Property; 4] = [
    Property::GbaConsistency,
    Property::GbaValidity,
    Property::ConfirmUniqueness,
    Property::Termination,
];

/// The exhaustive desk-scale matrix: FloodSet at n ≤ 3 with full
/// delivered-subset enumeration, the recursive algorithm and its
/// 1-preference variant at n = 4 with f = 3, and graded agreement under
/// crash faults at n = 4 exhaustively plus n = 7 randomized, in both
/// threshold modes.
pub fn small_exhaustive(seed: u64, n7_trials: u64) -> Result<SuiteReport> {
    let mut report = SuiteReport { suite: "small_exhaustive".into(), entries: Vec::new() };

    for n in 1..=3u32 {
        for variant in [BaseVariant::DecideMin, BaseVariant::DecideMax] {
            let mut protocol = spec(ProtocolKind::BaseCa, n - 1);
            protocol.config.base_variant = variant;
            let summary =
                exhaustive_verify(&protocol, n, &binary_domain(), &CRASH_PROPS, 1 << 24)?;
            report.push_summary(format!("base_ca/n{n}/{variant:?}"), &summary);
        }
    }

    let rca = spec(ProtocolKind::Rca, 3);
    let summary = exhaustive_verify(&rca, 4, &binary_domain(), &CRASH_PROPS, 1 << 24)?;
    report.push_summary("rca/n4", &summary);

    // The 1-preference variant trades standard validity away: a crashing
    // 1-holder may overwrite a survivor's 0 in the preliminary round. Only
    // agreement, termination and the 1-preference property are asserted.
    let mut rca1p = spec(ProtocolKind::Rca1p, 3);
    rca1p.config.base_variant = BaseVariant::DecideMax;
    let props = [
        Property::Agreement,
        Property::Termination,
        Property::Complexity,
        Property::OnePreference,
    ];
    let summary = exhaustive_verify(&rca1p, 4, &binary_domain(), &props, 1 << 24)?;
    report.push_summary("rca1p/n4", &summary);

    for thresholds in [GbaThresholds::Paper, GbaThresholds::Strict] {
        let protocol = gba_spec(4, thresholds);
        let summary = exhaustive_verify(&protocol, 4, &binary_domain(), &GBA_PROPS, 1 << 24)?;
        report.push_summary(format!("gba_crash/n4/{thresholds:?}"), &summary);

        let entry = randomized_crash_entry(
            format!("gba_crash/n7/{thresholds:?}"),
            &gba_spec(7, thresholds),
            7,
            &GBA_PROPS,
            seed,
            n7_trials,
        )?;
        report.entries.extend(entry);
    }

    Ok(report)
}

/// Runs `trials` random (input vector, crash schedule) pairs and folds the
/// property verdicts into one entry per property.
fn randomized_crash_entry(
    name: String,
    protocol: &ProtocolSpec,
    n: u32,
    properties: &[Property],
    seed: u64,
    trials: u64,
) -> Result<Vec<SuiteEntry>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut verdicts: Vec<Verdict> =
        properties.iter().map(|p| Verdict::pass(p.name())).collect();
    let horizon = protocol.duration(n);
    let record = properties.iter().any(|p| p.needs_transcript());
    let config = SimConfig { record_transcript: record };
    for _ in 0..trials {
        let inputs = random_inputs(n, &mut rng);
        let schedule = random_crash_schedule(rng.gen(), n, protocol.config.f, horizon);
        let fault_free = schedule.crashes.is_empty();
        let adversary = if fault_free {
            AdversarySpec::None
        } else {
            AdversarySpec::Crash(schedule)
        };
        let result = run_simulation(n, &inputs, protocol, &adversary, &config)?;
        for (property, slot) in properties.iter().zip(verdicts.iter_mut()) {
            if slot.pass {
                let verdict = evaluate(*property, protocol, n, &inputs, &result, fault_free);
                if !verdict.pass {
                    *slot = verdict;
                }
            }
        }
    }
    Ok(properties
        .iter()
        .zip(verdicts)
        .map(|(p, verdict)| SuiteEntry {
            name: format!("{name}/{}", p.name()),
            verdict,
            asserted: true,
            runs: trials,
        })
        .collect())
}

fn random_inputs(n: u32, rng: &mut ChaCha8Rng) -> BTreeMap<ProcessorId, Value> {
    all_processors(n).map(|pid| (pid, Value::Val(rng.gen_range(0..=1)))).collect()
}

/// Randomized fuzzing at larger sizes: the optimized construction under
/// random crash schedules, graded agreement under every built-in Byzantine
/// strategy plus `trials` random-strategy seeds (strict thresholds), a
/// random-crash soak of the recursive algorithm, and replay-determinism
/// samples.
pub fn randomized(seed: u64, trials: u64) -> Result<SuiteReport> {
    let mut report = SuiteReport { suite: "randomized".into(), entries: Vec::new() };

    let opt = spec(ProtocolKind::OptRca, 3);
    let mut props = CRASH_PROPS.to_vec();
    props.push(Property::SubsetCoverage);
    report.entries.extend(randomized_crash_entry(
        "opt_rca/n16/f3".into(),
        &opt,
        16,
        &props,
        seed ^ 0x0b7c,
        trials,
    )?);

    let rca = spec(ProtocolKind::Rca, 7);
    report.entries.extend(randomized_crash_entry(
        "rca/n8/f7".into(),
        &rca,
        8,
        &[Property::Agreement, Property::Validity, Property::Termination],
        seed ^ 0x9e37,
        trials.min(1000),
    )?);

    for n in [4u32, 7, 10] {
        report.entries.extend(gba_byzantine_entries(n, seed, trials)?);
    }

    report.entries.push(determinism_entry(seed, 50)?);

    Ok(report)
}

/// Strict-mode graded agreement under every built-in strategy and `trials`
/// random-strategy seeds at one system size.
fn gba_byzantine_entries(n: u32, seed: u64, trials: u64) -> Result<Vec<SuiteEntry>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ u64::from(n));
    let protocol = gba_spec(n, GbaThresholds::Strict);
    let f = protocol.config.f;
    let config = SimConfig::default();
    let props = [Property::GbaConsistency, Property::GbaValidity, Property::ConfirmUniqueness];
    let mut entries = Vec::new();

    for name in BUILTIN_STRATEGIES {
        let mut verdicts: Vec<Verdict> = props.iter().map(|p| Verdict::pass(p.name())).collect();
        let strategy_trials = if name == "random" { trials } else { 64 };
        for trial in 0..strategy_trials {
            // Unanimous honest inputs exercise validity; mixed ones
            // exercise consistency.
            let inputs = if trial % 2 == 0 {
                all_processors(n).map(|pid| (pid, Value::Val(1))).collect()
            } else {
                random_inputs(n, &mut rng)
            };
            let adversary = AdversarySpec::Byzantine {
                name: name.into(),
                params: StrategyParams::default(),
                seed: rng.gen(),
            };
            let result = run_simulation(n, &inputs, &protocol, &adversary, &config)?;
            for (property, slot) in props.iter().zip(verdicts.iter_mut()) {
                if slot.pass {
                    let verdict = evaluate(*property, &protocol, n, &inputs, &result, false);
                    if !verdict.pass {
                        *slot = verdict;
                    }
                }
            }
        }
        entries.extend(props.iter().zip(verdicts).map(|(p, verdict)| SuiteEntry {
            name: format!("gba_byz/n{n}/f{f}/{name}/strict/{}", p.name()),
            verdict,
            asserted: true,
            runs: strategy_trials,
        }));
    }
    Ok(entries)
}

/// Samples random run configurations, executes each twice, and requires
/// byte-identical replay hashes.
pub fn determinism_entry(seed: u64, samples: u64) -> Result<SuiteEntry> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xd1ce);
    let config = SimConfig::default();
    for sample in 0..samples {
        let (protocol, n, inputs, adversary) = random_run_config(&mut rng);
        let first = run_simulation(n, &inputs, &protocol, &adversary, &config)?;
        let second = run_simulation(n, &inputs, &protocol, &adversary, &config)?;
        let h1 = replay_hash(&first.transcript)?;
        let h2 = replay_hash(&second.transcript)?;
        if h1 != h2 {
            return Ok(SuiteEntry {
                name: "determinism".into(),
                verdict: Verdict::fail(
                    "determinism",
                    format!("sample {sample}: {h1} != {h2} for n={n} {}", protocol.kind.name()),
                ),
                asserted: true,
                runs: sample + 1,
            });
        }
    }
    Ok(SuiteEntry {
        name: "determinism".into(),
        verdict: Verdict::pass("determinism"),
        asserted: true,
        runs: samples,
    })
}

/// A random legal run configuration over all five protocols.
pub fn random_run_config(
    rng: &mut ChaCha8Rng,
) -> (ProtocolSpec, u32, BTreeMap<ProcessorId, Value>, AdversarySpec) {
    let kind = *[
        ProtocolKind::BaseCa,
        ProtocolKind::Gba,
        ProtocolKind::Rca,
        ProtocolKind::Rca1p,
        ProtocolKind::OptRca,
    ]
    .choose(rng)
    .unwrap();
    let (n, f) = match kind {
        ProtocolKind::Gba => {
            let n: u32 = rng.gen_range(4..=10);
            (n, rng.gen_range(0..n.div_ceil(3)))
        }
        _ => {
            let n = rng.gen_range(1..=8);
            (n, rng.gen_range(0..n))
        }
    };
    let mut config = ProtocolConfig { f, ..ProtocolConfig::default() };
    if kind == ProtocolKind::Rca1p {
        config.base_variant = BaseVariant::DecideMax;
    }
    let protocol = ProtocolSpec::new(kind, config);
    let inputs = all_processors(n).map(|pid| (pid, Value::Val(rng.gen_range(0..=1)))).collect();
    let horizon = protocol.duration(n);
    let adversary = match rng.gen_range(0..3) {
        0 => AdversarySpec::None,
        1 if kind == ProtocolKind::Gba => AdversarySpec::Byzantine {
            name: BUILTIN_STRATEGIES.choose(rng).unwrap().to_string(),
            params: StrategyParams::default(),
            seed: rng.gen(),
        },
        _ if f > 0 => AdversarySpec::Crash(random_crash_schedule(rng.gen(), n, f, horizon)),
        _ => AdversarySpec::None,
    };
    (protocol, n, inputs, adversary)
}

/// Output of the scripted confirm-equivocation scenario, reported for both
/// threshold modes. The paper-mode consistency verdict is informational: the
/// adopt rule's behaviour under equivocated confirmations is exactly the
/// ambiguity the scenario exists to exhibit.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScriptedReport {
    pub paper_mode_consistency: Verdict,
    pub strict_mode_consistency: Verdict,
    pub paper_outputs: BTreeMap<ProcessorId, Output>,
    pub strict_outputs: BTreeMap<ProcessorId, Output>,
    pub silent_validity: Verdict,
    pub vote_equivocator_strict_consistency: Verdict,
}

impl ScriptedReport {
    /// Only the strict-mode verdicts are load-bearing.
    pub fn ok(&self) -> bool {
        self.strict_mode_consistency.pass
            && self.silent_validity.pass
            && self.vote_equivocator_strict_consistency.pass
    }
}

/// The n = 7, f = 2 confirm-equivocation scenario: honest inputs
/// (1,1,1,1,0), the corrupted pair votes 1 only towards processor 1, then
/// confirms 1 to processor 1 and 0 to processor 2.
pub fn confirm_equivocation_run(thresholds: GbaThresholds) -> Result<SimResult> {
    let protocol = ProtocolSpec::new(
        ProtocolKind::Gba,
        ProtocolConfig { f: 2, thresholds, ..Default::default() },
    );
    let inputs: BTreeMap<ProcessorId, Value> = [1u64, 1, 1, 1, 0, 0, 0]
        .into_iter()
        .enumerate()
        .map(|(i, v)| (ProcessorId(i as u32 + 1), Value::Val(v)))
        .collect();
    let adversary = AdversarySpec::Byzantine {
        name: "confirm_equivocator".into(),
        params: StrategyParams {
            value: Value::Val(1),
            alt_value: Value::Val(0),
            vote_targets: vec![ProcessorId(1)],
            confirm_value_dst: ProcessorId(1),
            confirm_alt_dst: ProcessorId(2),
            ..Default::default()
        },
        seed: 0,
    };
    run_simulation(7, &inputs, &protocol, &adversary, &SimConfig::default())
}

/// Runs the scripted attacks and reports both threshold modes' verdicts.
pub fn scripted_attacks() -> Result<ScriptedReport> {
    let inputs: BTreeMap<ProcessorId, Value> = [1u64, 1, 1, 1, 0, 0, 0]
        .into_iter()
        .enumerate()
        .map(|(i, v)| (ProcessorId(i as u32 + 1), Value::Val(v)))
        .collect();

    let paper = confirm_equivocation_run(GbaThresholds::Paper)?;
    let strict = confirm_equivocation_run(GbaThresholds::Strict)?;
    let paper_faults = crate::verify::FaultView::from_transcript(&paper.transcript);
    let strict_faults = crate::verify::FaultView::from_transcript(&strict.transcript);
    let paper_consistency = crate::verify::check_gba(&inputs, &paper.outputs, &paper_faults).0;
    let strict_consistency = crate::verify::check_gba(&inputs, &strict.outputs, &strict_faults).0;

    // Silent adversary, unanimous honest inputs: validity must give (v, 1).
    let silent_protocol = gba_spec(7, GbaThresholds::Strict);
    let unanimous: BTreeMap<ProcessorId, Value> =
        all_processors(7).map(|pid| (pid, Value::Val(5))).collect();
    let silent_adversary = AdversarySpec::Byzantine {
        name: "silent".into(),
        params: StrategyParams::default(),
        seed: 0,
    };
    let silent = run_simulation(7, &unanimous, &silent_protocol, &silent_adversary, &SimConfig::default())?;
    let silent_faults = crate::verify::FaultView::from_transcript(&silent.transcript);
    let silent_validity = crate::verify::check_gba(&unanimous, &silent.outputs, &silent_faults).1;

    // Vote equivocator at n = 4, f = 1: exhaust the target-subset parameter;
    // strict-mode consistency must hold for every choice.
    let mut vote_verdict = Verdict::pass("gba_consistency");
    let ve_protocol = gba_spec(4, GbaThresholds::Strict);
    let ve_inputs: BTreeMap<ProcessorId, Value> = [0u64, 0, 1, 0]
        .into_iter()
        .enumerate()
        .map(|(i, v)| (ProcessorId(i as u32 + 1), Value::Val(v)))
        .collect();
    for mask in 0u32..16 {
        let targets: Vec<ProcessorId> =
            (1..=4).filter(|i| mask >> (i - 1) & 1 == 1).map(ProcessorId).collect();
        let adversary = AdversarySpec::Byzantine {
            name: "vote_equivocator".into(),
            params: StrategyParams { vote_targets: targets, ..Default::default() },
            seed: 0,
        };
        let result = run_simulation(4, &ve_inputs, &ve_protocol, &adversary, &SimConfig::default())?;
        let faults = crate::verify::FaultView::from_transcript(&result.transcript);
        let verdict = crate::verify::check_gba(&ve_inputs, &result.outputs, &faults).0;
        if !verdict.pass {
            vote_verdict = verdict;
            break;
        }
    }

    Ok(ScriptedReport {
        paper_mode_consistency: paper_consistency,
        strict_mode_consistency: strict_consistency,
        paper_outputs: paper.outputs,
        strict_outputs: strict.outputs,
        silent_validity,
        vote_equivocator_strict_consistency: vote_verdict,
    })
}
