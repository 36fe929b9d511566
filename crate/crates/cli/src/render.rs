use comfy_table::presets::NOTHING;
use comfy_table::{Cell, CellAlignment, Table};

use agenttrace_collector::IngestSummary;
use agenttrace_core::analytics::{CostBreakdown, ErrorRate, LatencyStats, Similarity, Trajectory};
use agenttrace_core::model::{Span, SpanId, Trace};
use agenttrace_core::store::{PromptRecord, TraceSummary};
use agenttrace_core::validator::ValidationReport;

/// Aligned columns without borders; numeric-looking cells right-aligned.
pub fn table(headers: &[&str], rows: Vec<Vec<String>>) -> String {
    let mut t = Table::new();
    t.load_preset(NOTHING).set_header(headers.to_vec());
    for row in rows {
        t.add_row(row.into_iter().map(|c| {
            let numeric = !c.is_empty() && c.parse::<f64>().is_ok();
            Cell::new(c).set_alignment(if numeric {
                CellAlignment::Right
            } else {
                CellAlignment::Left
            })
        }));
    }
    let mut out = String::new();
    for line in t.to_string().lines() {
        out.push_str(line.trim_end());
        out.push('\n');
    }
    out
}

pub fn ms(ns: Option<u64>) -> String {
    ns.map_or_else(|| "-".into(), |ns| format!("{:.3}", ns as f64 / 1e6))
}

fn status(span: &Span) -> String {
    span.status.map_or_else(|| "open".into(), |s| s.to_string())
}

pub fn spans(trace: &Trace) -> String {
    let mut spans: Vec<&Span> = trace.spans.values().collect();
    spans.sort_by_key(|s| (s.start_time_unix_ns, s.span_id));
    let start = spans.first().map_or(0, |s| s.start_time_unix_ns);
    let rows = spans
        .into_iter()
        .map(|s| {
            vec![
                s.span_id.to_string(),
                s.parent_id.map_or_else(|| "-".into(), |p| p.to_string()),
                s.kind.to_string(),
                s.name.clone(),
                format!("{:.3}", (s.start_time_unix_ns - start) as f64 / 1e6),
                ms(s.duration_ns),
                status(s),
            ]
        })
        .collect();
    let mut out = format!(
        "trace {}  spans {}  feedback {}\n",
        trace.trace_id,
        trace.spans.len(),
        trace.feedback.len()
    );
    out.push_str(&table(
        &[
            "span_id",
            "parent_id",
            "kind",
            "name",
            "offset_ms",
            "duration_ms",
            "status",
        ],
        rows,
    ));
    out
}

/// One line per span, indented under its parent: kind, name, duration.
pub fn tree(trace: &Trace) -> String {
    let children = trace.children();
    let mut out = format!("trace {}\n", trace.trace_id);
    let mut stack: Vec<(SpanId, usize)> = trace
        .root_span_ids
        .iter()
        .rev()
        .map(|id| (*id, 0))
        .collect();
    // Spans on a parent cycle have no root; list them last at depth 0.
    let mut seen = std::collections::BTreeSet::new();
    let mut emit = |out: &mut String, stack: &mut Vec<(SpanId, usize)>| {
        while let Some((id, depth)) = stack.pop() {
            if !seen.insert(id) {
                continue;
            }
            let Some(span) = trace.span(id) else { continue };
            out.push_str(&format!(
                "{}{} {} [{} ms] {}\n",
                "  ".repeat(depth),
                span.kind,
                span.name,
                ms(span.duration_ns),
                status(span)
            ));
            for child in children.get(&id).into_iter().flatten().rev() {
                stack.push((*child, depth + 1));
            }
        }
    };
    emit(&mut out, &mut stack);
    let rest: Vec<SpanId> = trace.spans.keys().copied().collect();
    for id in rest {
        stack.push((id, 0));
        emit(&mut out, &mut stack);
    }
    out
}

pub fn summaries(rows: &[TraceSummary]) -> String {
    table(
        &[
            "trace_id",
            "root",
            "kind",
            "start_unix_ns",
            "duration_ms",
            "spans",
            "error",
            "input_tokens",
            "output_tokens",
        ],
        rows.iter()
            .map(|s| {
                vec![
                    s.trace_id.to_string(),
                    s.root_name.clone(),
                    s.root_kind.to_string(),
                    s.start_time_unix_ns.to_string(),
                    ms(s.duration_ns),
                    s.span_count.to_string(),
                    s.has_error.to_string(),
                    s.input_tokens.to_string(),
                    s.output_tokens.to_string(),
                ]
            })
            .collect(),
    )
}

pub fn reports(reports: &[ValidationReport]) -> String {
    let mut out = String::new();
    for r in reports {
        if r.is_conforming() {
            out.push_str(&format!("{}: conforming ({})\n", r.trace_id, r.mode));
            continue;
        }
        out.push_str(&format!(
            "{}: {} violation(s)\n",
            r.trace_id,
            r.violations.len()
        ));
        let rows = r
            .violations
            .iter()
            .map(|v| {
                let spans: Vec<String> = v.span_ids.iter().map(|s| s.to_string()).collect();
                vec![v.rule_id.to_string(), spans.join(","), v.message.clone()]
            })
            .collect();
        out.push_str(&table(&["rule", "spans", "message"], rows));
    }
    out
}

pub fn cost(c: &CostBreakdown) -> String {
    let mut rows: Vec<Vec<String>> = c
        .per_model
        .iter()
        .map(|(m, mc)| {
            vec![
                m.clone(),
                mc.input_tokens.to_string(),
                mc.output_tokens.to_string(),
                mc.cost.normalize().to_string(),
            ]
        })
        .collect();
    rows.push(vec![
        "total".into(),
        String::new(),
        String::new(),
        c.total_cost.normalize().to_string(),
    ]);
    table(
        &[
            "model",
            "input_tokens",
            "output_tokens",
            &format!("cost_{}", c.currency),
        ],
        rows,
    )
}

pub fn latency(stats: &LatencyStats, errors: &ErrorRate) -> String {
    let mut rows = vec![
        vec!["count".into(), stats.count.to_string()],
        vec!["mean_ms".into(), format!("{:.3}", stats.mean_ns / 1e6)],
        vec!["min_ms".into(), ms(Some(stats.min_ns))],
    ];
    for (p, v) in &stats.percentiles {
        rows.push(vec![format!("p{p}_ms"), ms(Some(*v))]);
    }
    rows.push(vec!["max_ms".into(), ms(Some(stats.max_ns))]);
    rows.push(vec![
        "error_rate".into(),
        format!("{:.4} ({}/{})", errors.rate, errors.erroring, errors.traces),
    ]);
    table(&["metric", "value"], rows)
}

pub fn trajectory(actual: &Trajectory, expected: Option<(&Trajectory, &Similarity)>) -> String {
    let mut out = format!("actual:   {}\n", actual.0.join(" -> "));
    if let Some((e, s)) = expected {
        out.push_str(&format!("expected: {}\n", e.0.join(" -> ")));
        out.push_str(&format!(
            "exact: {}  distance: {}  score: {}\n",
            s.exact, s.distance, s.score
        ));
    }
    out
}

pub fn prompts(records: &[PromptRecord]) -> String {
    table(
        &["name", "version", "content_hash", "created_unix_ns"],
        records
            .iter()
            .map(|r| {
                vec![
                    r.name.clone(),
                    r.version.to_string(),
                    r.content_hash.clone(),
                    r.created_time_unix_ns.to_string(),
                ]
            })
            .collect(),
    )
}

pub fn ingest(s: &IngestSummary) -> String {
    let mut out = format!("accepted {}  rejected {}\n", s.accepted, s.rejected);
    for r in &s.rejects {
        out.push_str(&format!("  line {}: {}\n", r.line_number, r.reason));
    }
    out
}
