//! # Somnus
//!
//! A deterministic simulator, protocol library and verification harness for
//! agreement in the synchronous sleeping model.
//!
//! Processors may voluntarily sleep for chosen rounds; messages sent to a
//! sleeping processor are permanently lost. The adversary may crash
//! processors (choosing which of their final-round messages arrive) or fully
//! corrupt them. On top of the round engine sit five protocols — FloodSet
//! crash agreement, two-round graded Byzantine agreement, the recursive
//! crash agreement over the halving subgroup tree, its 1-preference variant
//! and the optimized partitioned construction — together with exact
//! awake/round/message accounting, adversarial schedule enumeration, and
//! checkers that turn the protocols' correctness properties into executable
//! verdicts.

pub mod adversary;
pub mod error;
pub mod model;
pub mod protocols;
pub mod suites;
pub mod types;
pub mod verify;

pub use error::{Error, Result};
pub use model::{metrics_of, replay_hash, run_simulation, Metrics, SimConfig, SimResult, Transcript};
pub use types::{GradedOutput, Message, Output, Payload, ProcessorId, Round, Value};
