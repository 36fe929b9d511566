use std::collections::BTreeMap;

use serde::Serialize;

use crate::store::TraceSummary;

pub const DEFAULT_PERCENTILES: [u8; 3] = [50, 90, 99];

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LatencyError {
    #[error("no durations to summarize")]
    EmptyInput,
    #[error("percentile {0} outside 1..=100")]
    InvalidPercentile(u8),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LatencyStats {
    pub count: usize,
    pub mean_ns: f64,
    pub min_ns: u64,
    pub max_ns: u64,
    /// Keyed by percentile rank.
    pub percentiles: BTreeMap<u8, u64>,
}

/// Value at 1-based rank `ceil(p/100 * n)` of `sorted`.
pub fn nearest_rank(sorted: &[u64], p: u8) -> u64 {
    let n = sorted.len();
    let rank = (p as usize * n).div_ceil(100).max(1);
    sorted[rank - 1]
}

pub fn latency_stats_of(
    durations: &[u64],
    percentiles: &[u8],
) -> Result<LatencyStats, LatencyError> {
    if let Some(p) = percentiles.iter().find(|p| !(1..=100).contains(*p)) {
        return Err(LatencyError::InvalidPercentile(*p));
    }
    if durations.is_empty() {
        return Err(LatencyError::EmptyInput);
    }
    let mut sorted = durations.to_vec();
    sorted.sort_unstable();
    let sum: u128 = sorted.iter().map(|d| *d as u128).sum();
    Ok(LatencyStats {
        count: sorted.len(),
        mean_ns: sum as f64 / sorted.len() as f64,
        min_ns: sorted[0],
        max_ns: sorted[sorted.len() - 1],
        percentiles: percentiles
            .iter()
            .map(|p| (*p, nearest_rank(&sorted, *p)))
            .collect(),
    })
}

/// Statistics over the root durations of `summaries`; traces whose root
/// has not ended are left out.
pub fn latency_stats(
    summaries: &[TraceSummary],
    percentiles: &[u8],
) -> Result<LatencyStats, LatencyError> {
    let durations: Vec<u64> = summaries.iter().filter_map(|s| s.duration_ns).collect();
    latency_stats_of(&durations, percentiles)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorRate {
    pub traces: usize,
    pub erroring: usize,
    /// 0 for an empty corpus.
    pub rate: f64,
}

pub fn error_rate(summaries: &[TraceSummary]) -> ErrorRate {
    let erroring = summaries.iter().filter(|s| s.has_error).count();
    ErrorRate {
        traces: summaries.len(),
        erroring,
        rate: if summaries.is_empty() {
            0.0
        } else {
            erroring as f64 / summaries.len() as f64
        },
    }
}
