//! Closed vocabularies used on the wire.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown {vocabulary} {value:?}")]
pub struct UnknownVariant {
    pub vocabulary: &'static str,
    pub value: String,
}

macro_rules! wire_enum {
    ($(#[$meta:meta])* $name:ident, $vocab:literal { $($variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }
        }

        impl FromStr for $name {
            type Err = UnknownVariant;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s {
                    $($text => Ok($name::$variant),)+
                    _ => Err(UnknownVariant { vocabulary: $vocab, value: s.to_string() }),
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl Serialize for $name {
            fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
                serializer.serialize_str(self.as_str())
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
                let s = String::deserialize(deserializer)?;
                s.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}

wire_enum!(
    /// The nine span categories of the agent taxonomy.
    SpanKind, "span kind" {
        Agent => "agent",
        Reasoning => "reasoning",
        Planning => "planning",
        Workflow => "workflow",
        Task => "task",
        Tool => "tool",
        Evaluation => "evaluation",
        Guardrail => "guardrail",
        Llm => "llm",
    }
);

wire_enum!(
    /// Non-hierarchical edge types carried by link records.
    Relation, "relation" {
        Generates => "generates",
        RealizedBy => "realized_by",
        Assesses => "assesses",
        Monitors => "monitors",
        UsesKnowledgeBase => "uses_knowledge_base",
        Calls => "calls",
    }
);

wire_enum!(
    Status, "status" {
        Ok => "ok",
        Error => "error",
    }
);

wire_enum!(
    TaskStatus, "task status" {
        Pending => "pending",
        InProgress => "in_progress",
        Completed => "completed",
        Failed => "failed",
    }
);

wire_enum!(
    EvalMode, "evaluation mode" {
        FinalResponse => "final_response",
        SingleStep => "single_step",
        Trajectory => "trajectory",
    }
);

wire_enum!(
    FeedbackSource, "feedback source" {
        Explicit => "explicit",
        Implicit => "implicit",
    }
);

wire_enum!(
    RecordType, "record_type" {
        SpanStart => "span_start",
        SpanEnd => "span_end",
        Event => "event",
        Link => "link",
        Feedback => "feedback",
    }
);
