//! Assembled traces: spans joined from their start/end records with events,
//! links and feedback attached.

use std::collections::BTreeMap;

use serde::Serialize;
use serde_json::{Map, Number, Value};

use super::canonical::canonical_serialize;
use super::ids::{SpanId, TraceId};
use super::kinds::Relation;
use super::kinds::{RecordType, SpanKind, Status};
use super::payload::KindPayload;
use super::record::{ErrorInfo, FeedbackScore, LinkTarget, Record};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AssemblyError {
    #[error("no records to assemble")]
    Empty,
    #[error("record for trace {found} mixed into trace {expected}")]
    MixedTraceIds { expected: TraceId, found: TraceId },
    #[error("{record_type} record references span {span_id} which has no span_start")]
    OrphanRecord {
        record_type: RecordType,
        span_id: SpanId,
    },
    #[error("span {0} started more than once")]
    DuplicateSpanStart(SpanId),
    #[error("span {0} ended more than once")]
    DuplicateSpanEnd(SpanId),
    #[error("span {span_id} ends at {end} before it starts at {start}")]
    EndBeforeStart {
        span_id: SpanId,
        start: u64,
        end: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpanEvent {
    pub time_unix_ns: u64,
    pub name: String,
    pub attributes: Map<String, Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpanLink {
    #[serde(flatten)]
    pub target: LinkTarget,
    pub relation: Relation,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Span {
    pub span_id: SpanId,
    pub trace_id: TraceId,
    pub parent_id: Option<SpanId>,
    pub name: String,
    pub kind: SpanKind,
    pub start_time_unix_ns: u64,
    pub end_time_unix_ns: Option<u64>,
    pub duration_ns: Option<u64>,
    pub status: Option<Status>,
    pub error: Option<ErrorInfo>,
    pub inputs: Option<Value>,
    pub outputs: Option<Value>,
    pub metrics: BTreeMap<String, Number>,
    /// Sorted by time; equal times keep arrival order.
    pub events: Vec<SpanEvent>,
    pub links: Vec<SpanLink>,
    pub payload: KindPayload,
}

impl Span {
    pub fn is_ended(&self) -> bool {
        self.end_time_unix_ns.is_some()
    }

    pub fn metric_u64(&self, name: &str) -> Option<u64> {
        self.metrics.get(name).and_then(Number::as_u64)
    }

    pub fn links_with(&self, relation: Relation) -> impl Iterator<Item = &SpanLink> {
        self.links.iter().filter(move |l| l.relation == relation)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trace {
    pub trace_id: TraceId,
    pub spans: BTreeMap<SpanId, Span>,
    pub feedback: Vec<FeedbackScore>,
    /// Spans without a parent, ordered by start time then id.
    pub root_span_ids: Vec<SpanId>,
}

impl Trace {
    pub fn span(&self, id: SpanId) -> Option<&Span> {
        self.spans.get(&id)
    }

    /// The earliest root, or the earliest span when parents form a cycle.
    pub fn primary_root(&self) -> Option<&Span> {
        self.root_span_ids
            .first()
            .and_then(|id| self.spans.get(id))
            .or_else(|| {
                self.spans
                    .values()
                    .min_by_key(|s| (s.start_time_unix_ns, s.span_id))
            })
    }

    /// Parent to children, each child list ordered by start time then id.
    pub fn children(&self) -> BTreeMap<SpanId, Vec<SpanId>> {
        let mut map: BTreeMap<SpanId, Vec<&Span>> = BTreeMap::new();
        for span in self.spans.values() {
            if let Some(parent) = span.parent_id {
                map.entry(parent).or_default().push(span);
            }
        }
        map.into_iter()
            .map(|(parent, mut kids)| {
                kids.sort_by_key(|s| (s.start_time_unix_ns, s.span_id));
                (parent, kids.into_iter().map(|s| s.span_id).collect())
            })
            .collect()
    }

    pub fn spans_of_kind(&self, kind: SpanKind) -> impl Iterator<Item = &Span> {
        self.spans.values().filter(move |s| s.kind == kind)
    }

    /// Whether `ancestor` appears on the parent chain of `span`. Tolerates
    /// cyclic parent pointers.
    pub fn is_descendant(&self, span: SpanId, ancestor: SpanId) -> bool {
        let mut current = self.spans.get(&span).and_then(|s| s.parent_id);
        let mut steps = 0;
        while let Some(id) = current {
            if id == ancestor {
                return true;
            }
            steps += 1;
            if steps > self.spans.len() {
                return false;
            }
            current = self.spans.get(&id).and_then(|s| s.parent_id);
        }
        false
    }
}

/// Builds a trace from the records of one trace id. Input order only
/// matters for events that share a timestamp.
pub fn assemble_trace<'a, I>(records: I) -> Result<Trace, AssemblyError>
where
    I: IntoIterator<Item = &'a Record>,
{
    let records: Vec<&Record> = records.into_iter().collect();
    let trace_id = records.first().ok_or(AssemblyError::Empty)?.trace_id();
    if let Some(r) = records.iter().find(|r| r.trace_id() != trace_id) {
        return Err(AssemblyError::MixedTraceIds {
            expected: trace_id,
            found: r.trace_id(),
        });
    }

    let mut spans = BTreeMap::new();
    for record in &records {
        if let Record::SpanStart(s) = record {
            let span = Span {
                span_id: s.span_id,
                trace_id,
                parent_id: s.parent_id,
                name: s.name.clone(),
                kind: s.kind,
                start_time_unix_ns: s.start_time_unix_ns,
                end_time_unix_ns: None,
                duration_ns: None,
                status: None,
                error: None,
                inputs: s.inputs.clone(),
                outputs: None,
                metrics: BTreeMap::new(),
                events: Vec::new(),
                links: Vec::new(),
                payload: s.payload.clone(),
            };
            if spans.insert(s.span_id, span).is_some() {
                return Err(AssemblyError::DuplicateSpanStart(s.span_id));
            }
        }
    }

    let mut feedback = Vec::new();
    for record in &records {
        let orphan = |span_id| AssemblyError::OrphanRecord {
            record_type: record.record_type(),
            span_id,
        };
        match record {
            Record::SpanStart(_) => {}
            Record::SpanEnd(e) => {
                let span = spans.get_mut(&e.span_id).ok_or_else(|| orphan(e.span_id))?;
                if span.is_ended() {
                    return Err(AssemblyError::DuplicateSpanEnd(e.span_id));
                }
                let duration = e
                    .end_time_unix_ns
                    .checked_sub(span.start_time_unix_ns)
                    .ok_or(AssemblyError::EndBeforeStart {
                        span_id: e.span_id,
                        start: span.start_time_unix_ns,
                        end: e.end_time_unix_ns,
                    })?;
                span.end_time_unix_ns = Some(e.end_time_unix_ns);
                span.duration_ns = Some(duration);
                span.status = Some(e.status);
                span.error = e.error.clone();
                span.metrics = e.metrics.clone();
                span.outputs = e.outputs.clone();
            }
            Record::Event(e) => {
                let span = spans.get_mut(&e.span_id).ok_or_else(|| orphan(e.span_id))?;
                span.events.push(SpanEvent {
                    time_unix_ns: e.time_unix_ns,
                    name: e.name.clone(),
                    attributes: e.attributes.clone(),
                });
            }
            Record::Link(l) => {
                let span = spans.get_mut(&l.span_id).ok_or_else(|| orphan(l.span_id))?;
                span.links.push(SpanLink {
                    target: l.target.clone(),
                    relation: l.relation,
                });
            }
            Record::Feedback(f) => {
                if let Some(id) = f.span_id {
                    if !spans.contains_key(&id) {
                        return Err(orphan(id));
                    }
                }
                feedback.push(f.clone());
            }
        }
    }

    for span in spans.values_mut() {
        span.events.sort_by_key(|e| e.time_unix_ns);
        span.links
            .sort_by_cached_key(|l| (l.relation, canonical_serialize(&l.target)));
    }
    feedback.sort_by_cached_key(|f| (f.time_unix_ns, canonical_serialize(f)));

    let mut roots: Vec<&Span> = spans.values().filter(|s| s.parent_id.is_none()).collect();
    roots.sort_by_key(|s| (s.start_time_unix_ns, s.span_id));
    let root_span_ids = roots.into_iter().map(|s| s.span_id).collect();

    Ok(Trace {
        trace_id,
        spans,
        feedback,
        root_span_ids,
    })
}

/// Splits a mixed record stream into per-trace lists, preserving order
/// within each trace.
pub fn group_by_trace<I>(records: I) -> BTreeMap<TraceId, Vec<Record>>
where
    I: IntoIterator<Item = Record>,
{
    let mut groups: BTreeMap<TraceId, Vec<Record>> = BTreeMap::new();
    for r in records {
        groups.entry(r.trace_id()).or_default().push(r);
    }
    groups
}
