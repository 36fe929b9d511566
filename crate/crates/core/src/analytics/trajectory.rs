use serde::Serialize;

use crate::model::{KindPayload, Span, SpanId, SpanKind, Trace};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TrajectoryError {
    #[error("span {0} not found")]
    SpanNotFound(SpanId),
    #[error("span {span_id} is a {kind} span, not a workflow")]
    NotAWorkflow { span_id: SpanId, kind: SpanKind },
}

/// Tool names in execution order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct Trajectory(pub Vec<String>);

impl Trajectory {
    pub fn from_names<S: AsRef<str>>(names: &[S]) -> Self {
        Self(names.iter().map(|s| s.as_ref().to_string()).collect())
    }
}

fn tool_name(span: &Span) -> &str {
    match &span.payload {
        KindPayload::Tool(p) => p.tool_name.as_deref().unwrap_or(&span.name),
        _ => &span.name,
    }
}

/// Tool spans below `workflow`, or below any workflow when `None`, ordered
/// by start time then span id.
pub fn extract_trajectory(
    trace: &Trace,
    workflow: Option<SpanId>,
) -> Result<Trajectory, TrajectoryError> {
    let workflows: Vec<SpanId> = match workflow {
        Some(id) => {
            let span = trace.span(id).ok_or(TrajectoryError::SpanNotFound(id))?;
            if span.kind != SpanKind::Workflow {
                return Err(TrajectoryError::NotAWorkflow {
                    span_id: id,
                    kind: span.kind,
                });
            }
            vec![id]
        }
        None => trace
            .spans_of_kind(SpanKind::Workflow)
            .map(|s| s.span_id)
            .collect(),
    };
    let mut tools: Vec<&Span> = trace
        .spans_of_kind(SpanKind::Tool)
        .filter(|t| workflows.iter().any(|w| trace.is_descendant(t.span_id, *w)))
        .collect();
    tools.sort_by_key(|s| (s.start_time_unix_ns, s.span_id));
    Ok(Trajectory(
        tools
            .into_iter()
            .map(|s| tool_name(s).to_string())
            .collect(),
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Similarity {
    pub exact: bool,
    pub distance: usize,
    pub score: f64,
}

/// `1 - levenshtein / max(len)`, with two empty paths scoring 1.
pub fn trajectory_similarity(expected: &Trajectory, actual: &Trajectory) -> Similarity {
    let distance = strsim::generic_levenshtein(&expected.0, &actual.0);
    let longest = expected.0.len().max(actual.0.len());
    let score = if longest == 0 {
        1.0
    } else {
        1.0 - distance as f64 / longest as f64
    };
    Similarity {
        exact: expected == actual,
        distance,
        score,
    }
}
