use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;

use serde::Serialize;

use super::evaluation::{EXTERNAL, UNRESOLVED};
use crate::exec::Execution;
use crate::model::{
    KindPayload, LinkTarget, Relation, Span, SpanId, SpanKind, Status, Trace, TraceId,
};

/// Outcome label for guardrail spans that have not ended.
pub const OPEN: &str = "open";

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AuditTarget {
    pub span_id: SpanId,
    /// Kind of the target span, `external` for other traces and
    /// `unresolved` for ids the trace does not contain.
    pub kind: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AuditEntry {
    pub trace_id: TraceId,
    pub span_id: SpanId,
    pub name: String,
    pub actions: Vec<String>,
    pub targets: Vec<AuditTarget>,
    pub outcome: String,
    pub start_time_unix_ns: u64,
    pub end_time_unix_ns: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TimeRange {
    pub start_unix_ns: u64,
    pub end_unix_ns: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct AuditReport {
    pub guardrail_count: u64,
    pub action_counts: BTreeMap<String, u64>,
    pub target_kind_counts: BTreeMap<String, u64>,
    pub outcome_counts: BTreeMap<String, u64>,
    pub entries: Vec<AuditEntry>,
    /// Span of time covered by the listed guardrails.
    pub time_range: Option<TimeRange>,
}

fn add_counts(into: &mut BTreeMap<String, u64>, from: BTreeMap<String, u64>) {
    for (k, v) in from {
        *into.entry(k).or_default() += v;
    }
}

impl AuditReport {
    /// Associative, with the empty report as identity.
    pub fn merge(mut self, other: AuditReport) -> AuditReport {
        self.guardrail_count += other.guardrail_count;
        add_counts(&mut self.action_counts, other.action_counts);
        add_counts(&mut self.target_kind_counts, other.target_kind_counts);
        add_counts(&mut self.outcome_counts, other.outcome_counts);
        self.entries.extend(other.entries);
        self.entries
            .sort_by_key(|e| (e.start_time_unix_ns, e.trace_id, e.span_id));
        self.time_range = match (self.time_range, other.time_range) {
            (Some(a), Some(b)) => Some(TimeRange {
                start_unix_ns: a.start_unix_ns.min(b.start_unix_ns),
                end_unix_ns: a.end_unix_ns.max(b.end_unix_ns),
            }),
            (a, b) => a.or(b),
        };
        self
    }

    pub fn to_markdown(&self) -> String {
        let mut out = String::from("# Guardrail audit\n\n");
        let _ = writeln!(out, "Guardrail spans: {}", self.guardrail_count);
        if let Some(r) = self.time_range {
            let _ = writeln!(
                out,
                "Time range (unix ns): {} .. {}",
                r.start_unix_ns, r.end_unix_ns
            );
        }
        for (title, counts) in [
            ("Actions", &self.action_counts),
            ("Target kinds", &self.target_kind_counts),
            ("Outcomes", &self.outcome_counts),
        ] {
            let _ = writeln!(out, "\n## {title}\n\n| name | count |\n|---|---|");
            for (k, v) in counts {
                let _ = writeln!(out, "| {k} | {v} |");
            }
        }
        out.push_str("\n## Guardrail spans\n\n| trace | span | name | actions | targets | outcome |\n|---|---|---|---|---|---|\n");
        for e in &self.entries {
            let targets: Vec<String> = e
                .targets
                .iter()
                .map(|t| format!("{} ({})", t.span_id, t.kind))
                .collect();
            let _ = writeln!(
                out,
                "| {} | {} | {} | {} | {} | {} |",
                e.trace_id,
                e.span_id,
                e.name,
                e.actions.join(", "),
                targets.join(", "),
                e.outcome
            );
        }
        out
    }
}

/// Payload targets plus local and cross-trace monitors targets, each once.
fn guardrail_targets(trace: &Trace, span: &Span) -> Vec<AuditTarget> {
    let mut seen: BTreeSet<(bool, SpanId)> = BTreeSet::new();
    let mut out = Vec::new();
    let mut push = |span_id: SpanId, local: bool| {
        if seen.insert((local, span_id)) {
            let kind = if local {
                trace
                    .span(span_id)
                    .map_or(UNRESOLVED.to_string(), |t| t.kind.to_string())
            } else {
                EXTERNAL.to_string()
            };
            out.push(AuditTarget { span_id, kind });
        }
    };
    if let KindPayload::Guardrail(p) = &span.payload {
        for t in &p.targets {
            push(*t, true);
        }
    }
    for link in span.links_with(Relation::Monitors) {
        if let LinkTarget::Span { span_id, .. } = &link.target {
            push(*span_id, link.target.local_span(trace.trace_id).is_some());
        }
    }
    out
}

pub fn guardrail_audit_trace(trace: &Trace) -> AuditReport {
    let mut report = AuditReport::default();
    for span in trace.spans_of_kind(SpanKind::Guardrail) {
        let actions = match &span.payload {
            KindPayload::Guardrail(p) => p.actions.clone(),
            _ => Vec::new(),
        };
        let targets = guardrail_targets(trace, span);
        let outcome = match span.status {
            Some(Status::Ok) => "ok",
            Some(Status::Error) => "error",
            None => OPEN,
        }
        .to_string();
        report.guardrail_count += 1;
        for a in &actions {
            *report.action_counts.entry(a.clone()).or_default() += 1;
        }
        for t in &targets {
            *report.target_kind_counts.entry(t.kind.clone()).or_default() += 1;
        }
        *report.outcome_counts.entry(outcome.clone()).or_default() += 1;
        let end = span.end_time_unix_ns.unwrap_or(span.start_time_unix_ns);
        report.time_range = Some(match report.time_range {
            Some(r) => TimeRange {
                start_unix_ns: r.start_unix_ns.min(span.start_time_unix_ns),
                end_unix_ns: r.end_unix_ns.max(end),
            },
            None => TimeRange {
                start_unix_ns: span.start_time_unix_ns,
                end_unix_ns: end,
            },
        });
        report.entries.push(AuditEntry {
            trace_id: trace.trace_id,
            span_id: span.span_id,
            name: span.name.clone(),
            actions,
            targets,
            outcome,
            start_time_unix_ns: span.start_time_unix_ns,
            end_time_unix_ns: span.end_time_unix_ns,
        });
    }
    report
        .entries
        .sort_by_key(|e| (e.start_time_unix_ns, e.trace_id, e.span_id));
    report
}

/// Safety-case report over every guardrail span in `traces`.
pub fn guardrail_audit(traces: &[Trace], exec: Execution) -> AuditReport {
    exec.map_reduce(
        traces,
        guardrail_audit_trace,
        AuditReport::default,
        AuditReport::merge,
    )
}
