//! Reports over assembled traces: token cost, latency and error rate,
//! tool-call trajectories, evaluation rollups and guardrail audits.
//!
//! Every function is pure. Corpus-wide variants take an [`Execution`] and
//! merge per-trace partial results associatively, so sequential and
//! parallel runs agree exactly.
//!
//! [`Execution`]: crate::exec::Execution

mod audit;
mod cost;
mod evaluation;
mod latency;
mod trajectory;

pub use audit::{
    guardrail_audit, guardrail_audit_trace, AuditEntry, AuditReport, AuditTarget, TimeRange, OPEN,
};
pub use cost::{
    compute_corpus_cost, compute_cost, CostBreakdown, CostError, ModelCost, ModelPrice, PriceTable,
};
pub use evaluation::{
    evaluation_rollup, EvaluationEntry, EvaluationRollup, EXTERNAL, UNLINKED, UNRESOLVED,
    UNSPECIFIED,
};
pub use latency::{
    error_rate, latency_stats, latency_stats_of, nearest_rank, ErrorRate, LatencyError,
    LatencyStats, DEFAULT_PERCENTILES,
};
pub use trajectory::{
    extract_trajectory, trajectory_similarity, Similarity, Trajectory, TrajectoryError,
};
