use std::collections::BTreeMap;

use serde::Serialize;
use serde_json::Number;

use crate::model::{KindPayload, LinkTarget, Relation, SpanId, SpanKind, Status, Trace};

/// Target group for evaluations without an assesses link.
pub const UNLINKED: &str = "unlinked";
/// Target group for assesses links that leave the trace.
pub const EXTERNAL: &str = "external";
/// Target group for links to a span id the trace does not contain.
pub const UNRESOLVED: &str = "unresolved";
/// Mode group for evaluations that do not state their mode.
pub const UNSPECIFIED: &str = "unspecified";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluationEntry {
    pub span_id: SpanId,
    pub name: String,
    pub eval_mode: String,
    pub target_span_id: Option<SpanId>,
    pub target_kind: String,
    pub test_cases: Vec<String>,
    pub testing_metrics: BTreeMap<String, Number>,
    pub testing_results: Option<String>,
    pub status: Option<Status>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct EvaluationRollup {
    pub by_mode: BTreeMap<String, Vec<EvaluationEntry>>,
    pub by_target_kind: BTreeMap<String, Vec<EvaluationEntry>>,
}

impl EvaluationRollup {
    pub fn len(&self) -> usize {
        self.by_mode.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.by_mode.is_empty()
    }
}

/// Groups the evaluation spans of `trace` twice: by mode and by the kind of
/// the span they assess. Only the first assesses link of a span counts.
pub fn evaluation_rollup(trace: &Trace) -> EvaluationRollup {
    let mut rollup = EvaluationRollup::default();
    let mut evals: Vec<_> = trace.spans_of_kind(SpanKind::Evaluation).collect();
    evals.sort_by_key(|s| (s.start_time_unix_ns, s.span_id));
    for span in evals {
        let (eval_mode, test_cases, testing_metrics, testing_results) = match &span.payload {
            KindPayload::Evaluation(p) => (
                p.eval_mode.map(|m| m.to_string()),
                p.test_cases.clone(),
                p.testing_metrics.clone(),
                p.testing_results.clone(),
            ),
            _ => (None, Vec::new(), BTreeMap::new(), None),
        };
        let (target_span_id, target_kind) = match span.links_with(Relation::Assesses).next() {
            None => (None, UNLINKED.to_string()),
            Some(link) => match &link.target {
                LinkTarget::Span { span_id, .. } => match link.target.local_span(trace.trace_id) {
                    Some(local) => (
                        Some(local),
                        trace
                            .span(local)
                            .map_or(UNRESOLVED.to_string(), |t| t.kind.to_string()),
                    ),
                    None => (Some(*span_id), EXTERNAL.to_string()),
                },
                LinkTarget::Resource(_) => (None, EXTERNAL.to_string()),
            },
        };
        let entry = EvaluationEntry {
            span_id: span.span_id,
            name: span.name.clone(),
            eval_mode: eval_mode.unwrap_or_else(|| UNSPECIFIED.to_string()),
            target_span_id,
            target_kind,
            test_cases,
            testing_metrics,
            testing_results,
            status: span.status,
        };
        rollup
            .by_target_kind
            .entry(entry.target_kind.clone())
            .or_default()
            .push(entry.clone());
        rollup
            .by_mode
            .entry(entry.eval_mode.clone())
            .or_default()
            .push(entry);
    }
    rollup
}
