//! Span taxonomy types, the NDJSON record grammar, trace assembly and
//! canonical serialization.

mod canonical;
mod fields;
mod ids;
mod kinds;
mod payload;
mod record;
mod trace;

pub use canonical::{canonical_serialize, canonical_value};
pub use ids::{IdError, SpanId, TraceId};
pub use kinds::{
    EvalMode, FeedbackSource, RecordType, Relation, SpanKind, Status, TaskStatus, UnknownVariant,
};
pub use payload::{
    AgentPayload, EvaluationPayload, GuardrailPayload, KindPayload, LlmPayload, PlanningPayload,
    ReasoningPayload, TaskPayload, ToolPayload, WorkflowPayload,
};
pub use record::{
    parse_record, ErrorInfo, EventRecord, FeedbackScore, FeedbackValue, LinkRecord, LinkTarget,
    MalformedRecord, Record, SpanEnd, SpanStart,
};
pub use trace::{assemble_trace, group_by_trace, AssemblyError, Span, SpanEvent, SpanLink, Trace};
