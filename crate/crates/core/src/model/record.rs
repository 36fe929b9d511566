//! Wire records: one NDJSON line each.

use std::collections::BTreeMap;

use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::{Map, Number, Value};

use super::fields::{FieldResult, Fields};
use super::ids::{SpanId, TraceId};
use super::kinds::{FeedbackSource, RecordType, Relation, SpanKind, Status};
use super::payload::KindPayload;

const EXCERPT_CHARS: usize = 80;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("malformed record ({reason}): {line_excerpt}")]
pub struct MalformedRecord {
    pub line_excerpt: String,
    pub reason: String,
}

impl MalformedRecord {
    fn new(line: &str, reason: impl Into<String>) -> Self {
        let mut line_excerpt: String = line.chars().take(EXCERPT_CHARS).collect();
        if line.chars().count() > EXCERPT_CHARS {
            line_excerpt.push('…');
        }
        Self {
            line_excerpt,
            reason: reason.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "record_type", rename_all = "snake_case")]
pub enum Record {
    SpanStart(SpanStart),
    SpanEnd(SpanEnd),
    Event(EventRecord),
    Link(LinkRecord),
    Feedback(FeedbackScore),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpanStart {
    pub trace_id: TraceId,
    pub span_id: SpanId,
    pub parent_id: Option<SpanId>,
    pub name: String,
    pub kind: SpanKind,
    pub start_time_unix_ns: u64,
    pub inputs: Option<Value>,
    pub payload: KindPayload,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorInfo {
    #[serde(rename = "type")]
    pub error_type: String,
    pub message: String,
    pub traceback: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpanEnd {
    pub trace_id: TraceId,
    pub span_id: SpanId,
    pub end_time_unix_ns: u64,
    pub status: Status,
    pub error: Option<ErrorInfo>,
    pub metrics: BTreeMap<String, Number>,
    pub outputs: Option<Value>,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EventRecord {
    pub trace_id: TraceId,
    pub span_id: SpanId,
    pub time_unix_ns: u64,
    pub name: String,
    pub attributes: Map<String, Value>,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

/// Where a link points: a span (possibly in another trace) or an external
/// resource such as a knowledge base.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LinkTarget {
    Span {
        trace_id: Option<TraceId>,
        span_id: SpanId,
    },
    Resource(String),
}

impl LinkTarget {
    pub fn span(span_id: SpanId) -> Self {
        Self::Span {
            trace_id: None,
            span_id,
        }
    }

    /// The target span if it lives in `trace` (an absent target trace id
    /// means the link's own trace).
    pub fn local_span(&self, trace: TraceId) -> Option<SpanId> {
        match self {
            Self::Span { trace_id, span_id } if trace_id.is_none_or(|t| t == trace) => {
                Some(*span_id)
            }
            _ => None,
        }
    }
}

impl Serialize for LinkTarget {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(3))?;
        match self {
            Self::Span { trace_id, span_id } => {
                map.serialize_entry("target_trace_id", trace_id)?;
                map.serialize_entry("target_span_id", span_id)?;
                map.serialize_entry("resource", &None::<String>)?;
            }
            Self::Resource(r) => {
                map.serialize_entry("target_trace_id", &None::<TraceId>)?;
                map.serialize_entry("target_span_id", &None::<SpanId>)?;
                map.serialize_entry("resource", r)?;
            }
        }
        map.end()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinkRecord {
    pub trace_id: TraceId,
    pub span_id: SpanId,
    #[serde(flatten)]
    pub target: LinkTarget,
    pub relation: Relation,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum FeedbackValue {
    Number(Number),
    Text(String),
}

impl FeedbackValue {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Self::Number(n) => n.as_f64(),
            Self::Text(_) => None,
        }
    }
}

/// A user or behavioral score attached to a trace, optionally to one span.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeedbackScore {
    pub trace_id: TraceId,
    pub span_id: Option<SpanId>,
    pub source: FeedbackSource,
    pub name: String,
    pub value: FeedbackValue,
    pub comment: Option<String>,
    pub time_unix_ns: u64,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

impl Record {
    pub fn record_type(&self) -> RecordType {
        match self {
            Record::SpanStart(_) => RecordType::SpanStart,
            Record::SpanEnd(_) => RecordType::SpanEnd,
            Record::Event(_) => RecordType::Event,
            Record::Link(_) => RecordType::Link,
            Record::Feedback(_) => RecordType::Feedback,
        }
    }

    pub fn trace_id(&self) -> TraceId {
        match self {
            Record::SpanStart(r) => r.trace_id,
            Record::SpanEnd(r) => r.trace_id,
            Record::Event(r) => r.trace_id,
            Record::Link(r) => r.trace_id,
            Record::Feedback(r) => r.trace_id,
        }
    }

    /// The span the record belongs to; `None` only for trace-level feedback.
    pub fn span_id(&self) -> Option<SpanId> {
        match self {
            Record::SpanStart(r) => Some(r.span_id),
            Record::SpanEnd(r) => Some(r.span_id),
            Record::Event(r) => Some(r.span_id),
            Record::Link(r) => Some(r.span_id),
            Record::Feedback(r) => r.span_id,
        }
    }

    /// Decodes an already-parsed JSON value.
    pub fn from_value(value: Value) -> Result<Self, String> {
        let mut f = Fields::new(value, "record")?;
        let record_type: RecordType = f.parsed("record_type")?;
        let trace_id = f.trace_id("trace_id")?;
        let record = match record_type {
            RecordType::SpanStart => {
                let span_id = f.span_id("span_id")?;
                let parent_id = f.opt_span_id("parent_id")?;
                let name = f.string("name")?;
                let kind: SpanKind = f.parsed("kind")?;
                let start_time_unix_ns = f.u64("start_time_unix_ns")?;
                let inputs = f.opt_value("inputs");
                let payload = KindPayload::from_value(kind, f.opt_value("payload"))?;
                Record::SpanStart(SpanStart {
                    trace_id,
                    span_id,
                    parent_id,
                    name,
                    kind,
                    start_time_unix_ns,
                    inputs,
                    payload,
                    extra: f.into_rest(),
                })
            }
            RecordType::SpanEnd => {
                let span_id = f.span_id("span_id")?;
                let end_time_unix_ns = f.u64("end_time_unix_ns")?;
                let status: Status = f.parsed("status")?;
                let error = parse_error_info(f.opt_value("error"))?;
                if status == Status::Error && error.is_none() {
                    return Err("status=error requires an error object".into());
                }
                let metrics = f.number_map("metrics")?;
                let outputs = f.opt_value("outputs");
                Record::SpanEnd(SpanEnd {
                    trace_id,
                    span_id,
                    end_time_unix_ns,
                    status,
                    error,
                    metrics,
                    outputs,
                    extra: f.into_rest(),
                })
            }
            RecordType::Event => Record::Event(EventRecord {
                trace_id,
                span_id: f.span_id("span_id")?,
                time_unix_ns: f.u64("time_unix_ns")?,
                name: f.string("name")?,
                attributes: f.object("attributes")?,
                extra: f.into_rest(),
            }),
            RecordType::Link => {
                let span_id = f.span_id("span_id")?;
                let target_trace_id = f.opt_parsed::<TraceId>("target_trace_id")?;
                let target_span_id = f.opt_span_id("target_span_id")?;
                let resource = f.opt_string("resource")?;
                let target = match (target_span_id, resource) {
                    (Some(span_id), None) => LinkTarget::Span {
                        trace_id: target_trace_id,
                        span_id,
                    },
                    (None, Some(resource)) if target_trace_id.is_none() => {
                        LinkTarget::Resource(resource)
                    }
                    (None, Some(_)) => {
                        return Err("target_trace_id is only valid with target_span_id".into())
                    }
                    (Some(_), Some(_)) => {
                        return Err(
                            "link carries both target_span_id and resource; exactly one is allowed"
                                .into(),
                        )
                    }
                    (None, None) => {
                        return Err("link needs exactly one of target_span_id or resource".into())
                    }
                };
                Record::Link(LinkRecord {
                    trace_id,
                    span_id,
                    target,
                    relation: f.parsed("relation")?,
                    extra: f.into_rest(),
                })
            }
            RecordType::Feedback => {
                let span_id = f.opt_span_id("span_id")?;
                let source = f.parsed("source")?;
                let name = f.string("name")?;
                let value = match f.opt_value("value") {
                    Some(Value::Number(n)) => FeedbackValue::Number(n),
                    Some(Value::String(s)) => FeedbackValue::Text(s),
                    Some(_) => return Err("feedback value must be a number or a string".into()),
                    None => return Err("missing required field record.value".into()),
                };
                Record::Feedback(FeedbackScore {
                    trace_id,
                    span_id,
                    source,
                    name,
                    value,
                    comment: f.opt_string("comment")?,
                    time_unix_ns: f.u64("time_unix_ns")?,
                    extra: f.into_rest(),
                })
            }
        };
        Ok(record)
    }
}

fn parse_error_info(value: Option<Value>) -> FieldResult<Option<ErrorInfo>> {
    let Some(value) = value else { return Ok(None) };
    let mut f = Fields::new(value, "error")?;
    let error_type = f.string("type")?;
    let message = f.string("message")?;
    if error_type.is_empty() || message.is_empty() {
        return Err("error.type and error.message must be non-empty".into());
    }
    let traceback = f.opt_string("traceback")?;
    Ok(Some(ErrorInfo {
        error_type,
        message,
        traceback,
    }))
}

/// Parses one NDJSON line into a typed record.
pub fn parse_record(line: &str) -> Result<Record, MalformedRecord> {
    let trimmed = line.trim_end_matches(['\n', '\r']);
    if trimmed.trim().is_empty() {
        return Err(MalformedRecord::new(line, "empty line"));
    }
    let value: Value = serde_json::from_str(trimmed)
        .map_err(|e| MalformedRecord::new(trimmed, format!("invalid JSON: {e}")))?;
    Record::from_value(value).map_err(|reason| MalformedRecord::new(trimmed, reason))
}

impl<'de> Deserialize<'de> for Record {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let value = Value::deserialize(deserializer)?;
        Record::from_value(value).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const T: &str = "aaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaa";
    const S: &str = "bbbbbbbbbbbbbbbb";

    #[test]
    fn parses_span_start() {
        let line = format!(
            r#"{{"record_type":"span_start","trace_id":"{T}","span_id":"{S}","parent_id":null,"name":"run","kind":"agent","start_time_unix_ns":1000,"payload":{{"role":"coder"}}}}"#
        );
        let r = parse_record(&line).unwrap();
        let Record::SpanStart(s) = r else { panic!() };
        assert_eq!(s.kind, SpanKind::Agent);
        assert_eq!(s.parent_id, None);
        let KindPayload::Agent(a) = s.payload else {
            panic!()
        };
        assert_eq!(a.role.as_deref(), Some("coder"));
    }

    #[test]
    fn rejects_unknown_record_type() {
        let err =
            parse_record(&format!(r#"{{"record_type":"hug","trace_id":"{T}"}}"#)).unwrap_err();
        assert!(err.reason.contains("unknown record_type"), "{err}");
    }

    #[test]
    fn rejects_unknown_kind() {
        let line = format!(
            r#"{{"record_type":"span_start","trace_id":"{T}","span_id":"{S}","name":"x","kind":"memory","start_time_unix_ns":1}}"#
        );
        assert!(parse_record(&line)
            .unwrap_err()
            .reason
            .contains("span kind"));
    }

    #[test]
    fn link_targets_are_mutually_exclusive() {
        let both = format!(
            r#"{{"record_type":"link","trace_id":"{T}","span_id":"{S}","target_span_id":"cccccccccccccccc","resource":"kb://docs","relation":"uses_knowledge_base"}}"#
        );
        assert!(parse_record(&both).unwrap_err().reason.contains("both"));
        let neither = format!(
            r#"{{"record_type":"link","trace_id":"{T}","span_id":"{S}","relation":"calls"}}"#
        );
        assert!(parse_record(&neither).is_err());
        let resource = format!(
            r#"{{"record_type":"link","trace_id":"{T}","span_id":"{S}","resource":"kb://docs","relation":"uses_knowledge_base"}}"#
        );
        let Record::Link(l) = parse_record(&resource).unwrap() else {
            panic!()
        };
        assert_eq!(l.target, LinkTarget::Resource("kb://docs".into()));
    }

    #[test]
    fn error_status_requires_error_info() {
        let no_info = format!(
            r#"{{"record_type":"span_end","trace_id":"{T}","span_id":"{S}","end_time_unix_ns":5,"status":"error"}}"#
        );
        assert!(parse_record(&no_info).is_err());
        let empty_msg = format!(
            r#"{{"record_type":"span_end","trace_id":"{T}","span_id":"{S}","end_time_unix_ns":5,"status":"error","error":{{"type":"Timeout","message":""}}}}"#
        );
        assert!(parse_record(&empty_msg).is_err());
        let ok = format!(
            r#"{{"record_type":"span_end","trace_id":"{T}","span_id":"{S}","end_time_unix_ns":5,"status":"error","error":{{"type":"Timeout","message":"took too long"}}}}"#
        );
        assert!(parse_record(&ok).is_ok());
    }

    #[test]
    fn bad_ids_and_syntax() {
        assert!(parse_record("{not json").is_err());
        assert!(parse_record("").is_err());
        let short = r#"{"record_type":"event","trace_id":"abc","span_id":"bbbbbbbbbbbbbbbb","time_unix_ns":1,"name":"x"}"#;
        assert!(parse_record(short).unwrap_err().reason.contains("trace_id"));
        let negative = format!(
            r#"{{"record_type":"event","trace_id":"{T}","span_id":"{S}","time_unix_ns":-1,"name":"x"}}"#
        );
        assert!(parse_record(&negative).is_err());
    }

    #[test]
    fn unknown_top_level_fields_are_preserved() {
        let line = format!(
            r#"{{"record_type":"event","trace_id":"{T}","span_id":"{S}","time_unix_ns":1,"name":"x","host":"h1"}}"#
        );
        let Record::Event(e) = parse_record(&line).unwrap() else {
            panic!()
        };
        assert_eq!(e.extra.get("host"), Some(&Value::String("h1".into())));
    }

    #[test]
    fn excerpt_is_truncated() {
        let long = "x".repeat(500);
        let err = parse_record(&long).unwrap_err();
        assert_eq!(err.line_excerpt.chars().count(), EXCERPT_CHARS + 1);
    }
}
