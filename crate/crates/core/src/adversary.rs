//! Fault behaviors: crash schedules with per-crash partial delivery,
//! exhaustive and randomized schedule generators, and scripted Byzantine
//! strategies.
//!
//! Generators are pure given their seed; the exhaustive enumerator is the
//! brute-force oracle behind the small-scope verification suites.

use std::collections::BTreeSet;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::transcript::Transcript;
use crate::types::{all_processors, Message, Payload, ProcessorId, Round, Value};

/// One crashed processor: the round it crashes in and the subset of
/// destinations that still receive the messages it sent that round.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct CrashEntry {
    pub pid: ProcessorId,
    pub round: Round,
    pub delivered: BTreeSet<ProcessorId>,
}

/// A full crash schedule; at most `f` entries, one per crashed processor.
#[derive(Clone, PartialEq, Eq, Debug, Default, Serialize, Deserialize)]
pub struct CrashSchedule {
    pub crashes: Vec<CrashEntry>,
}

impl CrashSchedule {
    pub fn empty() -> Self {
        CrashSchedule::default()
    }

    pub fn crash_of(&self, pid: ProcessorId) -> Option<&CrashEntry> {
        self.crashes.iter().find(|c| c.pid == pid)
    }
}

/// Parameters of the built-in Byzantine strategies. Every field has a
/// default so a bare `{}` selects a sensible scripted shape.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct StrategyParams {
    /// Corrupted processors; defaults to the last `f` ids.
    pub corrupted: Option<Vec<ProcessorId>>,
    /// Primary value pushed by equivocators.
    pub value: Value,
    /// Alternative value used when equivocating.
    pub alt_value: Value,
    /// Destinations that receive votes for `value` (equivocators).
    pub vote_targets: Vec<ProcessorId>,
    /// Processor receiving `confirm value` in round 2 (confirm equivocator).
    pub confirm_value_dst: ProcessorId,
    /// Processor receiving `confirm alt_value` in round 2.
    pub confirm_alt_dst: ProcessorId,
    /// Value domain the random strategy draws from.
    pub domain: Vec<Value>,
    /// Random strategy also emits payload kinds foreign to the protocol.
    pub malformed: bool,
}

impl Default for StrategyParams {
    fn default() -> Self {
        StrategyParams {
            corrupted: None,
            value: Value::Val(1),
            alt_value: Value::Val(0),
            vote_targets: vec![ProcessorId(1)],
            confirm_value_dst: ProcessorId(1),
            confirm_alt_dst: ProcessorId(2),
            domain: vec![Value::Val(0), Value::Val(1)],
            malformed: false,
        }
    }
}

/// Adversary selection for one simulation. `crash = corrupt` for budget
/// purposes: a crashed processor permanently occupies one of the `f` slots.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum AdversarySpec {
    None,
    Crash(CrashSchedule),
    Byzantine { name: String, #[serde(default)] params: StrategyParams, seed: u64 },
}

impl AdversarySpec {
    pub fn is_none(&self) -> bool {
        matches!(self, AdversarySpec::None)
    }
}

/// Resolves the corrupted set of a Byzantine spec: explicit `params.corrupted`
/// or the last `f` processor ids.
pub fn resolve_corrupted(params: &StrategyParams, n: u32, f: u32) -> BTreeSet<ProcessorId> {
    match &params.corrupted {
        Some(pids) => pids.iter().copied().collect(),
        None => (n.saturating_sub(f) + 1..=n).map(ProcessorId).collect(),
    }
}

/// Checks the corruption budget and index ranges of an adversary spec.
pub fn validate(spec: &AdversarySpec, n: u32, f: u32) -> Result<()> {
    let in_range = |pid: ProcessorId| pid.0 >= 1 && pid.0 <= n;
    match spec {
        AdversarySpec::None => Ok(()),
        AdversarySpec::Crash(schedule) => {
            if schedule.crashes.len() > f as usize {
                return Err(Error::ConfigInvalid(format!(
                    "crash budget exceeded: {} crashes with f = {}",
                    schedule.crashes.len(),
                    f
                )));
            }
            let mut seen = BTreeSet::new();
            for entry in &schedule.crashes {
                if !in_range(entry.pid) {
                    return Err(Error::ConfigInvalid(format!(
                        "crashed processor {} out of range [1, {}]",
                        entry.pid, n
                    )));
                }
                if !seen.insert(entry.pid) {
                    return Err(Error::ConfigInvalid(format!(
                        "processor {} crashes twice",
                        entry.pid
                    )));
                }
                if entry.round < 1 {
                    return Err(Error::ConfigInvalid(format!(
                        "crash round out of range: processor {} at round {}",
                        entry.pid, entry.round
                    )));
                }
                if let Some(bad) = entry.delivered.iter().find(|d| !in_range(**d)) {
                    return Err(Error::ConfigInvalid(format!(
                        "delivered destination {bad} out of range [1, {n}]"
                    )));
                }
            }
            Ok(())
        }
        AdversarySpec::Byzantine { name, params, seed } => {
            let corrupted = resolve_corrupted(params, n, f);
            if corrupted.len() > f as usize {
                return Err(Error::ConfigInvalid(format!(
                    "byzantine budget exceeded: {} corrupted with f = {}",
                    corrupted.len(),
                    f
                )));
            }
            if let Some(bad) = corrupted.iter().find(|p| !in_range(**p)) {
                return Err(Error::ConfigInvalid(format!(
                    "corrupted processor {bad} out of range [1, {n}]"
                )));
            }
            // Probe the name so unknown strategies fail at validation time.
            builtin_strategy(name, params, *seed)?;
            Ok(())
        }
    }
}

/// A scripted Byzantine sender. `decide` observes all honest messages of the
/// current round before choosing its own (rushing), plus the history so far,
/// and returns `(src, dst, payload)` triples for corrupted sources.
pub trait ByzantineStrategy {
    fn decide(
        &mut self,
        round: Round,
        corrupted: &BTreeSet<ProcessorId>,
        n: u32,
        honest: &[Message],
        history: &Transcript,
    ) -> Vec<(ProcessorId, ProcessorId, Payload)>;
}

/// Sends nothing, ever.
struct Silent;

impl ByzantineStrategy for Silent {
    fn decide(
        &mut self,
        _round: Round,
        _corrupted: &BTreeSet<ProcessorId>,
        _n: u32,
        _honest: &[Message],
        _history: &Transcript,
    ) -> Vec<(ProcessorId, ProcessorId, Payload)> {
        Vec::new()
    }
}

/// Seeded fuzzing strategy: every round, each corrupted processor sends an
/// independently random vote/confirm (value drawn from `domain`) to a random
/// subset of destinations, equivocating freely. With `malformed` set it also
/// mixes in payload kinds the protocol under test does not expect.
struct RandomStrategy {
    rng: ChaCha8Rng,
    domain: Vec<Value>,
    malformed: bool,
}

impl RandomStrategy {
    fn random_value(&mut self) -> Value {
        *self.domain.choose(&mut self.rng).unwrap_or(&Value::Val(0))
    }
}

impl ByzantineStrategy for RandomStrategy {
    fn decide(
        &mut self,
        round: Round,
        corrupted: &BTreeSet<ProcessorId>,
        n: u32,
        _honest: &[Message],
        _history: &Transcript,
    ) -> Vec<(ProcessorId, ProcessorId, Payload)> {
        let mut out = Vec::new();
        for &src in corrupted {
            for dst in all_processors(n) {
                if !self.rng.gen_bool(0.5) {
                    continue;
                }
                let value = self.random_value();
                let mut payload = if round == 1 {
                    Payload::Vote { value }
                } else {
                    Payload::Confirm { value }
                };
                if self.malformed && self.rng.gen_bool(0.25) {
                    payload = match self.rng.gen_range(0..4) {
                        0 => Payload::Dissem { value },
                        1 => Payload::Prelim { value },
                        2 => Payload::SubsetDecision { slot: self.rng.gen_range(1..=4), value },
                        _ => Payload::Flood { values: [value].into_iter().collect() },
                    };
                }
                out.push((src, dst, payload));
            }
        }
        out
    }
}

/// Round-1 equivocator: votes `value` towards `vote_targets` and
/// `alt_value` towards everyone else. Silent afterwards.
struct VoteEquivocator {
    params: StrategyParams,
}

impl ByzantineStrategy for VoteEquivocator {
    fn decide(
        &mut self,
        round: Round,
        corrupted: &BTreeSet<ProcessorId>,
        n: u32,
        _honest: &[Message],
        _history: &Transcript,
    ) -> Vec<(ProcessorId, ProcessorId, Payload)> {
        if round != 1 {
            return Vec::new();
        }
        let mut out = Vec::new();
        for &src in corrupted {
            for dst in all_processors(n) {
                let value = if self.params.vote_targets.contains(&dst) {
                    self.params.value
                } else {
                    self.params.alt_value
                };
                out.push((src, dst, Payload::Vote { value }));
            }
        }
        out
    }
}

/// The confirm-equivocation scenario: votes `value` only towards
/// `vote_targets` in round 1, then in round 2 confirms `value` to one chosen
/// processor and `alt_value` to another.
struct ConfirmEquivocator {
    params: StrategyParams,
}

impl ByzantineStrategy for ConfirmEquivocator {
    fn decide(
        &mut self,
        round: Round,
        corrupted: &BTreeSet<ProcessorId>,
        _n: u32,
        _honest: &[Message],
        _history: &Transcript,
    ) -> Vec<(ProcessorId, ProcessorId, Payload)> {
        let mut out = Vec::new();
        for &src in corrupted {
            match round {
                1 => {
                    for &dst in &self.params.vote_targets {
                        out.push((src, dst, Payload::Vote { value: self.params.value }));
                    }
                }
                2 => {
                    out.push((
                        src,
                        self.params.confirm_value_dst,
                        Payload::Confirm { value: self.params.value },
                    ));
                    out.push((
                        src,
                        self.params.confirm_alt_dst,
                        Payload::Confirm { value: self.params.alt_value },
                    ));
                }
                _ => {}
            }
        }
        out
    }
}

/// Instantiates a built-in strategy by name (case-insensitive).
pub fn builtin_strategy(
    name: &str,
    params: &StrategyParams,
    seed: u64,
) -> Result<Box<dyn ByzantineStrategy>> {
    match name.to_ascii_lowercase().as_str() {
        "silent" => Ok(Box::new(Silent)),
        "random" => Ok(Box::new(RandomStrategy {
            rng: ChaCha8Rng::seed_from_u64(seed),
            domain: params.domain.clone(),
            malformed: params.malformed,
        })),
        "vote_equivocator" => Ok(Box::new(VoteEquivocator { params: params.clone() })),
        "confirm_equivocator" => Ok(Box::new(ConfirmEquivocator { params: params.clone() })),
        other => Err(Error::UnknownStrategy(other.to_string())),
    }
}

pub const BUILTIN_STRATEGIES: [&str; 4] =
    ["silent", "random", "vote_equivocator", "confirm_equivocator"];

/// Closed-form count of the schedules `enumerate_crash_schedules` yields:
/// Σ_{k ≤ f} C(P, k) · (horizon · 2^(P−1))^k over P participants. Returns
/// `None` on overflow.
pub fn count_crash_schedules(participants: usize, f: u32, horizon: Round) -> Option<u128> {
    let per_member = (horizon as u128).checked_mul(1u128.checked_shl(participants as u32 - 1)?)?;
    let mut total: u128 = 0;
    for k in 0..=(f as usize).min(participants) {
        let mut choose: u128 = 1;
        for i in 0..k {
            choose = choose.checked_mul((participants - i) as u128)? / (i as u128 + 1);
        }
        let mut options: u128 = 1;
        for _ in 0..k {
            options = options.checked_mul(per_member)?;
        }
        total = total.checked_add(choose.checked_mul(options)?)?;
    }
    Some(total)
}

/// Exhaustive, deterministic stream of crash schedules: every choice of at
/// most `f` crashing participants, each with a crash round in `[1, horizon]`
/// and an arbitrary delivered subset of the other participants.
pub fn enumerate_crash_schedules(
    participants: &[ProcessorId],
    f: u32,
    horizon: Round,
    cap: Option<u128>,
) -> Result<CrashScheduleIter> {
    assert!(horizon >= 1);
    if let Some(cap) = cap {
        let size = count_crash_schedules(participants.len(), f, horizon);
        match size {
            Some(size) if size <= cap => {}
            Some(size) => return Err(Error::SizeLimit { size, cap }),
            None => return Err(Error::SizeLimit { size: u128::MAX, cap }),
        }
    }
    Ok(CrashScheduleIter {
        participants: participants.to_vec(),
        max_crashes: (f as usize).min(participants.len()),
        horizon,
        size: 0,
        combo: Vec::new(),
        options: Vec::new(),
        done: false,
        fresh: true,
    })
}

#[derive(Debug)]
pub struct CrashScheduleIter {
    participants: Vec<ProcessorId>,
    max_crashes: usize,
    horizon: Round,
    /// Current crash-set size.
    size: usize,
    /// Indices into `participants` of the current crash set (ascending).
    combo: Vec<usize>,
    /// Per-member option index in `[0, horizon · 2^(P−1))`.
    options: Vec<u64>,
    done: bool,
    fresh: bool,
}

impl CrashScheduleIter {
    fn per_member_options(&self) -> u64 {
        self.horizon as u64 * (1u64 << (self.participants.len() - 1))
    }

    fn current(&self) -> CrashSchedule {
        let mask_bits = self.participants.len() as u64 - 1;
        let masks = 1u64 << mask_bits;
        let crashes = self
            .combo
            .iter()
            .zip(&self.options)
            .map(|(&idx, &opt)| {
                let pid = self.participants[idx];
                let round = (opt / masks) as Round + 1;
                let mask = opt % masks;
                // Mask bits address the other participants in ascending order.
                let delivered = self
                    .participants
                    .iter()
                    .filter(|p| **p != pid)
                    .enumerate()
                    .filter(|(bit, _)| mask >> bit & 1 == 1)
                    .map(|(_, p)| *p)
                    .collect();
                CrashEntry { pid, round, delivered }
            })
            .collect();
        CrashSchedule { crashes }
    }

    /// Advances the mixed-radix option counter; false when exhausted.
    fn bump_options(&mut self) -> bool {
        let radix = self.per_member_options();
        for slot in self.options.iter_mut().rev() {
            *slot += 1;
            if *slot < radix {
                return true;
            }
            *slot = 0;
        }
        false
    }

    /// Advances to the next combination of `size` participants; false when
    /// exhausted.
    fn bump_combo(&mut self) -> bool {
        let p = self.participants.len();
        let k = self.combo.len();
        let mut i = k;
        while i > 0 {
            i -= 1;
            if self.combo[i] < p - (k - i) {
                self.combo[i] += 1;
                for j in i + 1..k {
                    self.combo[j] = self.combo[j - 1] + 1;
                }
                return true;
            }
        }
        false
    }
}

impl Iterator for CrashScheduleIter {
    type Item = CrashSchedule;

    fn next(&mut self) -> Option<CrashSchedule> {
        if self.done {
            return None;
        }
        if self.fresh {
            self.fresh = false;
            // size 0: the single no-crash schedule.
            return Some(CrashSchedule::empty());
        }
        loop {
            if !self.options.is_empty() && self.bump_options() {
                return Some(self.current());
            }
            if !self.combo.is_empty() && self.bump_combo() {
                self.options = vec![0; self.size];
                return Some(self.current());
            }
            // Move to the next crash-set size.
            self.size += 1;
            if self.size > self.max_crashes {
                self.done = true;
                return None;
            }
            self.combo = (0..self.size).collect();
            self.options = vec![0; self.size];
            return Some(self.current());
        }
    }
}

/// Seed-deterministic random schedule: uniform crash-set size in `[0, f]`,
/// uniform rounds in `[1, horizon]`, and delivered subsets with each other
/// destination included independently with probability 1/2.
pub fn random_crash_schedule(seed: u64, n: u32, f: u32, horizon: Round) -> CrashSchedule {
    assert!(f < n && horizon >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = rng.gen_range(0..=f);
    let mut pids: Vec<ProcessorId> = all_processors(n).collect();
    pids.partial_shuffle(&mut rng, k as usize);
    let mut chosen: Vec<ProcessorId> = pids[..k as usize].to_vec();
    chosen.sort_unstable();
    let crashes = chosen
        .into_iter()
        .map(|pid| {
            let round = rng.gen_range(1..=horizon);
            let delivered = all_processors(n)
                .filter(|dst| *dst != pid && rng.gen_bool(0.5))
                .collect();
            CrashEntry { pid, round, delivered }
        })
        .collect();
    CrashSchedule { crashes }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(v: &[u32]) -> Vec<ProcessorId> {
        v.iter().map(|i| ProcessorId(*i)).collect()
    }

    #[test]
    fn validate_accepts_none() {
        assert!(validate(&AdversarySpec::None, 4, 0).is_ok());
    }

    #[test]
    fn validate_rejects_budget_excess() {
        let schedule = CrashSchedule {
            crashes: vec![
                CrashEntry { pid: ProcessorId(1), round: 1, delivered: BTreeSet::new() },
                CrashEntry { pid: ProcessorId(2), round: 1, delivered: BTreeSet::new() },
            ],
        };
        let err = validate(&AdversarySpec::Crash(schedule), 4, 1).unwrap_err();
        assert!(err.to_string().contains("budget exceeded"), "{err}");
    }

    #[test]
    fn validate_rejects_round_zero() {
        let schedule = CrashSchedule {
            crashes: vec![CrashEntry {
                pid: ProcessorId(1),
                round: 0,
                delivered: BTreeSet::new(),
            }],
        };
        let err = validate(&AdversarySpec::Crash(schedule), 4, 2).unwrap_err();
        assert!(err.to_string().contains("round out of range"), "{err}");
    }

    #[test]
    fn validate_rejects_unknown_strategy() {
        let spec = AdversarySpec::Byzantine {
            name: "gaslight".into(),
            params: StrategyParams::default(),
            seed: 0,
        };
        assert_eq!(validate(&spec, 4, 1), Err(Error::UnknownStrategy("gaslight".into())));
    }

    #[test]
    fn enumeration_matches_closed_form_tiny() {
        // 1 + n·horizon·2^(n−1) for a single allowed crash.
        let two = ids(&[1, 2]);
        let stream: Vec<_> =
            enumerate_crash_schedules(&two, 1, 1, None).unwrap().collect();
        assert_eq!(stream.len(), 5);
        assert_eq!(count_crash_schedules(2, 1, 1), Some(5));

        let three = ids(&[1, 2, 3]);
        let stream: Vec<_> =
            enumerate_crash_schedules(&three, 2, 1, None).unwrap().collect();
        assert_eq!(stream.len() as u128, count_crash_schedules(3, 2, 1).unwrap());
        assert_eq!(stream.len(), 61);

        for horizon in 1..=2 {
            for f in 0..=3 {
                let stream: Vec<_> =
                    enumerate_crash_schedules(&three, f, horizon, None).unwrap().collect();
                assert_eq!(
                    stream.len() as u128,
                    count_crash_schedules(3, f, horizon).unwrap(),
                    "f={f} horizon={horizon}"
                );
            }
        }
    }

    #[test]
    fn enumeration_is_deduplicated() {
        let three = ids(&[1, 2, 3]);
        let stream: Vec<_> = enumerate_crash_schedules(&three, 2, 2, None).unwrap().collect();
        let unique: BTreeSet<String> =
            stream.iter().map(|s| serde_json::to_string(s).unwrap()).collect();
        assert_eq!(unique.len(), stream.len());
    }

    #[test]
    fn enumeration_zero_budget_is_no_crash_only() {
        let stream: Vec<_> =
            enumerate_crash_schedules(&ids(&[1, 2, 3]), 0, 5, None).unwrap().collect();
        assert_eq!(stream, vec![CrashSchedule::empty()]);
    }

    #[test]
    fn enumeration_respects_cap() {
        let err = enumerate_crash_schedules(&ids(&[1, 2, 3]), 2, 1, Some(10)).unwrap_err();
        assert!(matches!(err, Error::SizeLimit { size: 61, cap: 10 }));
    }

    #[test]
    fn random_schedule_is_seed_deterministic() {
        for seed in [0u64, 1, 42] {
            let a = random_crash_schedule(seed, 8, 7, 11);
            let b = random_crash_schedule(seed, 8, 7, 11);
            assert_eq!(a, b);
            assert!(a.crashes.len() <= 7);
            for entry in &a.crashes {
                assert!((1..=11).contains(&entry.round));
                assert!(!entry.delivered.contains(&entry.pid));
            }
        }
        let a = random_crash_schedule(1, 8, 7, 11);
        let b = random_crash_schedule(2, 8, 7, 11);
        assert_ne!(a, b);
    }

    #[test]
    fn adversary_spec_json_shape() {
        let spec = AdversarySpec::Crash(CrashSchedule {
            crashes: vec![CrashEntry {
                pid: ProcessorId(1),
                round: 2,
                delivered: [ProcessorId(3)].into_iter().collect(),
            }],
        });
        let json = serde_json::to_string(&spec).unwrap();
        assert_eq!(json, r#"{"kind":"crash","crashes":[{"pid":1,"round":2,"delivered":[3]}]}"#);
        let back: AdversarySpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back, spec);

        let byz: AdversarySpec = serde_json::from_str(
            r#"{"kind":"byzantine","name":"silent","params":{},"seed":7}"#,
        )
        .unwrap();
        assert!(matches!(byz, AdversarySpec::Byzantine { seed: 7, .. }));
    }
}
