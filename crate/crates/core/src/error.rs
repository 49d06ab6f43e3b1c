use thiserror::Error;

use crate::types::{ProcessorId, Round};

/// Errors surfaced by the simulator, the adversary generators and the
/// verification drivers.
#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),

    #[error("protocol stuck: processor {pid} produced no action or output at round {round}")]
    ProtocolStuck { pid: ProcessorId, round: Round },

    #[error("non-binary value {value} as input of processor {pid}")]
    NonBinaryValue { pid: ProcessorId, value: String },

    #[error("subgroup {0} is empty (unreachable in the halving tree)")]
    EmptySubgroup(u64),

    #[error("enumeration size {size} exceeds cap {cap}")]
    SizeLimit { size: u128, cap: u128 },

    #[error("unknown strategy `{0}`")]
    UnknownStrategy(String),

    #[error("transcript was not recorded (simulation ran with record_transcript = false)")]
    TranscriptNotRecorded,
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
