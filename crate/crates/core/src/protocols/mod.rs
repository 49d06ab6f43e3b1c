//! The protocol library: graded Byzantine agreement, FloodSet crash
//! agreement, the recursive crash agreement, its 1-preference variant and
//! the optimized partitioned construction, plus the pure schedule
//! calculators that keep every processor on the same global calendar.

mod gba;
mod plan;
pub mod schedule;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use schedule::{partition, rca_awake_bound, rca_duration, split_halves, subgroup};

use crate::error::{Error, Result};
use crate::model::Instance;
use crate::types::{ProcessorId, Round, Value};

/// Which protocol a simulation runs.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProtocolKind {
    /// Standalone FloodSet crash agreement, n rounds over n processors.
    BaseCa,
    /// Two-round graded Byzantine agreement for f < n/3.
    Gba,
    /// Recursive crash agreement over the halving tree.
    Rca,
    /// Recursive crash agreement with the preliminary 1-preference round.
    Rca1p,
    /// Parallel recursive calls on subsets of size f+1, then one broadcast.
    OptRca,
}

impl ProtocolKind {
    pub fn name(&self) -> &'static str {
        match self {
            ProtocolKind::BaseCa => "base_ca",
            ProtocolKind::Gba => "gba",
            ProtocolKind::Rca => "rca",
            ProtocolKind::Rca1p => "rca1p",
            ProtocolKind::OptRca => "opt_rca",
        }
    }
}

/// Decision rule of the FloodSet base case.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaseVariant {
    #[default]
    DecideMin,
    DecideMax,
}

/// Grading thresholds: the paper's rule or the conservative variant.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GbaThresholds {
    #[default]
    Paper,
    Strict,
}

fn default_c() -> u32 {
    2
}

/// Tunables shared by the protocol family.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct ProtocolConfig {
    /// Base-case threshold of the recursion.
    #[serde(default = "default_c")]
    pub c: u32,
    /// Fault budget.
    #[serde(default)]
    pub f: u32,
    #[serde(rename = "gba_thresholds", default)]
    pub thresholds: GbaThresholds,
    #[serde(default)]
    pub base_variant: BaseVariant,
    /// Prepend the preliminary round at every composed level (binary only).
    #[serde(default)]
    pub one_preference: bool,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        ProtocolConfig {
            c: 2,
            f: 0,
            thresholds: GbaThresholds::Paper,
            base_variant: BaseVariant::DecideMin,
            one_preference: false,
        }
    }
}

/// A protocol plus its configuration; the factory the engine instantiates
/// per-processor state machines from.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct ProtocolSpec {
    #[serde(rename = "protocol")]
    pub kind: ProtocolKind,
    #[serde(flatten)]
    pub config: ProtocolConfig,
}

impl ProtocolSpec {
    pub fn new(kind: ProtocolKind, config: ProtocolConfig) -> Self {
        ProtocolSpec { kind, config }
    }

    /// `rca` with the one-preference flag set is the `rca1p` protocol.
    pub fn effective_kind(&self) -> ProtocolKind {
        match self.kind {
            ProtocolKind::Rca if self.config.one_preference => ProtocolKind::Rca1p,
            kind => kind,
        }
    }

    /// Effective FloodSet decision rule: the 1-preference variant requires
    /// decide-max so a known 1 always wins.
    fn variant(&self) -> BaseVariant {
        self.config.base_variant
    }

    /// Checks structural preconditions: fault bounds, the base threshold,
    /// and the input domain.
    pub fn validate(&self, n: u32, inputs: &BTreeMap<ProcessorId, Value>) -> Result<()> {
        if n == 0 {
            return Err(Error::ConfigInvalid("n must be at least 1".into()));
        }
        if self.config.c < 1 {
            return Err(Error::ConfigInvalid("base threshold c must be at least 1".into()));
        }
        let f = self.config.f;
        match self.effective_kind() {
            ProtocolKind::Gba => {
                if 3 * f >= n {
                    return Err(Error::ConfigInvalid(format!(
                        "gba requires f < n/3 (got n = {n}, f = {f})"
                    )));
                }
            }
            ProtocolKind::Rca1p => {
                if f >= n {
                    return Err(Error::ConfigInvalid(format!(
                        "crash agreement requires f < n (got n = {n}, f = {f})"
                    )));
                }
                if self.variant() != BaseVariant::DecideMax {
                    return Err(Error::ConfigInvalid(
                        "the 1-preference variant requires base_variant = decide_max".into(),
                    ));
                }
                for (pid, value) in inputs {
                    if !value.is_binary() {
                        return Err(Error::NonBinaryValue {
                            pid: *pid,
                            value: value.to_string(),
                        });
                    }
                }
            }
            ProtocolKind::BaseCa | ProtocolKind::Rca | ProtocolKind::OptRca => {
                if f >= n {
                    return Err(Error::ConfigInvalid(format!(
                        "crash agreement requires f < n (got n = {n}, f = {f})"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Fixed schedule length over `n` processors.
    pub fn duration(&self, n: u32) -> Round {
        let c = self.config.c;
        match self.effective_kind() {
            ProtocolKind::BaseCa => n,
            ProtocolKind::Gba => 2,
            ProtocolKind::Rca => rca_duration(n, c, false),
            ProtocolKind::Rca1p => rca_duration(n, c, true),
            ProtocolKind::OptRca => rca_duration(self.config.f + 1, c, false) + 1,
        }
    }

    /// Maximum awake rounds of any processor in a fault-free run; crashes
    /// can only reduce activity.
    pub fn awake_bound(&self, n: u32) -> Round {
        let c = self.config.c;
        match self.effective_kind() {
            ProtocolKind::BaseCa => n,
            ProtocolKind::Gba => 2,
            ProtocolKind::Rca => rca_awake_bound(n, c, false),
            ProtocolKind::Rca1p => rca_awake_bound(n, c, true),
            ProtocolKind::OptRca => rca_awake_bound(self.config.f + 1, c, false) + 1,
        }
    }

    /// Builds the state machine of processor `pid`.
    pub fn build(&self, pid: ProcessorId, n: u32, input: Value) -> Box<dyn Instance> {
        let cfg = &self.config;
        match self.effective_kind() {
            ProtocolKind::BaseCa => {
                Box::new(plan::CrashInstance::base_ca(pid, n, input, cfg.base_variant))
            }
            ProtocolKind::Gba => {
                Box::new(gba::GbaInstance::new(n, cfg.f, cfg.thresholds, input))
            }
            ProtocolKind::Rca => {
                Box::new(plan::CrashInstance::rca(pid, n, input, cfg.c, cfg.base_variant, false))
            }
            ProtocolKind::Rca1p => {
                Box::new(plan::CrashInstance::rca(pid, n, input, cfg.c, BaseVariant::DecideMax, true))
            }
            ProtocolKind::OptRca => Box::new(plan::CrashInstance::optimized_rca(
                pid,
                n,
                input,
                cfg.c,
                cfg.f,
                cfg.base_variant,
            )),
        }
    }

    /// Graded protocols produce `(value, grade)` pairs.
    pub fn is_graded(&self) -> bool {
        self.effective_kind() == ProtocolKind::Gba
    }

    /// Whether the protocol operates under crash faults only.
    pub fn crash_only(&self) -> bool {
        self.effective_kind() != ProtocolKind::Gba
    }
}
