use std::collections::BTreeSet;

use serde::Serialize;

use crate::model::{SpanKind, Status, Trace, TraceId};

/// One row of the trace listing: identity, timing, size, error flag and
/// token totals.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TraceSummary {
    pub trace_id: TraceId,
    pub root_name: String,
    pub root_kind: SpanKind,
    pub start_time_unix_ns: u64,
    /// Duration of the root span, when it has ended.
    pub duration_ns: Option<u64>,
    pub span_count: usize,
    pub has_error: bool,
    pub input_tokens: u64,
    pub output_tokens: u64,
    pub span_kinds: BTreeSet<SpanKind>,
}

impl TraceSummary {
    /// `None` for a trace without spans (feedback only).
    pub fn from_trace(trace: &Trace) -> Option<Self> {
        let root = trace.primary_root()?;
        let llm_total = |metric: &str| {
            trace
                .spans_of_kind(SpanKind::Llm)
                .filter_map(|s| s.metric_u64(metric))
                .sum()
        };
        Some(Self {
            trace_id: trace.trace_id,
            root_name: root.name.clone(),
            root_kind: root.kind,
            start_time_unix_ns: root.start_time_unix_ns,
            duration_ns: root.duration_ns,
            span_count: trace.spans.len(),
            has_error: trace
                .spans
                .values()
                .any(|s| s.status == Some(Status::Error)),
            input_tokens: llm_total("input_tokens"),
            output_tokens: llm_total("output_tokens"),
            span_kinds: trace.spans.values().map(|s| s.kind).collect(),
        })
    }
}

/// Conjunction of optional predicates over trace summaries.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct QueryFilter {
    pub has_error: Option<bool>,
    pub min_duration_ns: Option<u64>,
    /// Matches traces containing at least one span of this kind.
    pub kind: Option<SpanKind>,
    /// Substring of the root span name.
    pub name_contains: Option<String>,
    /// Inclusive lower bound on the root start time.
    pub start_from_unix_ns: Option<u64>,
    /// Exclusive upper bound on the root start time.
    pub start_before_unix_ns: Option<u64>,
}

impl QueryFilter {
    pub fn matches(&self, s: &TraceSummary) -> bool {
        self.has_error.is_none_or(|e| s.has_error == e)
            && self
                .min_duration_ns
                .is_none_or(|min| s.duration_ns.is_some_and(|d| d >= min))
            && self.kind.is_none_or(|k| s.span_kinds.contains(&k))
            && self
                .name_contains
                .as_deref()
                .is_none_or(|n| s.root_name.contains(n))
            && self
                .start_from_unix_ns
                .is_none_or(|t| s.start_time_unix_ns >= t)
            && self
                .start_before_unix_ns
                .is_none_or(|t| s.start_time_unix_ns < t)
    }
}
