//! Domain types shared by the engine, the protocol library and the checkers.

use std::collections::BTreeSet;
use std::fmt;

use serde::de::{self, Deserializer, Visitor};
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};

/// Global round index, 1-based across the whole composed execution.
pub type Round = u32;

/// Identity of a processor. Ids are exactly `1..=n` within a simulation.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ProcessorId(pub u32);

impl fmt::Display for ProcessorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Returns all processor ids `1..=n` in ascending order.
pub fn all_processors(n: u32) -> impl Iterator<Item = ProcessorId> {
    (1..=n).map(ProcessorId)
}

/// An agreement value: an element of a totally ordered finite domain, or ⊥.
///
/// ⊥ compares strictly below every proper value, which is what the
/// max-of-subset-decisions step relies on.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum Value {
    Bottom,
    Val(u64),
}

impl Value {
    pub fn is_bottom(&self) -> bool {
        matches!(self, Value::Bottom)
    }

    /// True for the two binary values 0 and 1.
    pub fn is_binary(&self) -> bool {
        matches!(self, Value::Val(0) | Value::Val(1))
    }

    pub fn one() -> Value {
        Value::Val(1)
    }
}

impl From<u64> for Value {
    fn from(v: u64) -> Self {
        Value::Val(v)
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Bottom => write!(f, "⊥"),
            Value::Val(v) => write!(f, "{}", v),
        }
    }
}

// ⊥ maps to JSON null, proper values to plain numbers.
impl Serialize for Value {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            Value::Bottom => serializer.serialize_none(),
            Value::Val(v) => serializer.serialize_u64(*v),
        }
    }
}

impl<'de> Deserialize<'de> for Value {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct ValueVisitor;
        impl<'de> Visitor<'de> for ValueVisitor {
            type Value = Value;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a non-negative integer or null")
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Value, E> {
                Ok(Value::Val(v))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Value, E> {
                u64::try_from(v).map(Value::Val).map_err(de::Error::custom)
            }
            fn visit_none<E: de::Error>(self) -> Result<Value, E> {
                Ok(Value::Bottom)
            }
            fn visit_unit<E: de::Error>(self) -> Result<Value, E> {
                Ok(Value::Bottom)
            }
        }
        deserializer.deserialize_any(ValueVisitor)
    }
}

/// Message payloads, one per protocol message kind.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Payload {
    Vote { value: Value },
    Confirm { value: Value },
    Dissem { value: Value },
    Prelim { value: Value },
    SubsetDecision { slot: u32, value: Value },
    Flood { values: BTreeSet<Value> },
}

impl Payload {
    /// Every proper value the payload carries (a flood set contributes all
    /// of its elements). Used by the 1-preference trace check.
    pub fn values(&self) -> Vec<Value> {
        match self {
            Payload::Vote { value }
            | Payload::Confirm { value }
            | Payload::Dissem { value }
            | Payload::Prelim { value }
            | Payload::SubsetDecision { value, .. } => vec![*value],
            Payload::Flood { values } => values.iter().copied().collect(),
        }
    }

    pub fn carries(&self, v: Value) -> bool {
        match self {
            Payload::Flood { values } => values.contains(&v),
            _ => self.values() == [v],
        }
    }
}

/// A message in flight: sent and delivered within the same round.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct Message {
    pub src: ProcessorId,
    pub dst: ProcessorId,
    pub round: Round,
    pub payload: Payload,
}

/// What a processor does in a round it is scheduled to be awake.
#[derive(Clone, Debug)]
pub enum RoundAction {
    /// Stay awake this round and send the listed messages (possibly none).
    Send(Vec<(ProcessorId, Payload)>),
    /// Sleep from the current round up to (excluding) `until`.
    Sleep { until: Round },
}

/// Output of a graded agreement protocol.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct GradedOutput {
    pub value: Value,
    pub grade: u8,
}

/// Final output of a processor: a plain value or a graded pair.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Output {
    Graded(GradedOutput),
    Plain(Value),
}

impl Output {
    pub fn plain(&self) -> Option<Value> {
        match self {
            Output::Plain(v) => Some(*v),
            Output::Graded(_) => None,
        }
    }

    pub fn graded(&self) -> Option<GradedOutput> {
        match self {
            Output::Graded(g) => Some(*g),
            Output::Plain(_) => None,
        }
    }

    /// The decided value, ignoring any grade.
    pub fn value(&self) -> Value {
        match self {
            Output::Plain(v) => *v,
            Output::Graded(g) => g.value,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bottom_sorts_below_everything() {
        assert!(Value::Bottom < Value::Val(0));
        assert!(Value::Val(0) < Value::Val(1));
        assert_eq!(
            std::cmp::max(Value::Bottom, Value::Val(0)),
            Value::Val(0)
        );
    }

    #[test]
    fn value_json_roundtrip() {
        assert_eq!(serde_json::to_string(&Value::Val(7)).unwrap(), "7");
        assert_eq!(serde_json::to_string(&Value::Bottom).unwrap(), "null");
        assert_eq!(serde_json::from_str::<Value>("7").unwrap(), Value::Val(7));
        assert_eq!(
            serde_json::from_str::<Value>("null").unwrap(),
            Value::Bottom
        );
    }

    #[test]
    fn payload_carried_values() {
        let flood = Payload::Flood {
            values: [Value::Val(0), Value::Val(1)].into_iter().collect(),
        };
        assert!(flood.carries(Value::Val(1)));
        assert!(!flood.carries(Value::Val(2)));
        let vote = Payload::Vote { value: Value::Val(3) };
        assert!(vote.carries(Value::Val(3)));
    }

    #[test]
    fn output_untagged_json() {
        let g = Output::Graded(GradedOutput { value: Value::Val(5), grade: 1 });
        assert_eq!(
            serde_json::to_string(&g).unwrap(),
            r#"{"value":5,"grade":1}"#
        );
        let p = Output::Plain(Value::Val(5));
        assert_eq!(serde_json::to_string(&p).unwrap(), "5");
    }
}
