use serde::{Deserialize, Serialize};

use agenttrace_core::model::{parse_record, Record};
use agenttrace_core::store::{Store, StoreError};

pub const DEFAULT_MAX_BODY_BYTES: usize = 16 * 1024 * 1024;
pub const DEFAULT_MAX_LINE_BYTES: usize = 1024 * 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IngestLimits {
    pub max_body_bytes: usize,
    pub max_line_bytes: usize,
}

impl Default for IngestLimits {
    fn default() -> Self {
        Self {
            max_body_bytes: DEFAULT_MAX_BODY_BYTES,
            max_line_bytes: DEFAULT_MAX_LINE_BYTES,
        }
    }
}

impl IngestLimits {
    /// Limits for local files: no body cap, the usual line cap.
    pub fn for_files() -> Self {
        Self {
            max_body_bytes: usize::MAX,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LineReject {
    /// 1-based, counting blank lines.
    pub line_number: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestSummary {
    pub accepted: usize,
    pub rejected: usize,
    pub rejects: Vec<LineReject>,
}

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("body of {size} bytes exceeds the {limit}-byte limit")]
    BodyTooLarge { size: usize, limit: usize },
    #[error(transparent)]
    Store(#[from] StoreError),
}

/// Splits an NDJSON body into parsed records and per-line rejects. Blank
/// lines are skipped and count as neither.
pub fn screen(body: &[u8], limits: &IngestLimits) -> (Vec<Record>, Vec<LineReject>) {
    let mut records = Vec::new();
    let mut rejects = Vec::new();
    for (i, raw) in body.split(|b| *b == b'\n').enumerate() {
        let raw = raw.strip_suffix(b"\r").unwrap_or(raw);
        let line_number = i + 1;
        let mut reject = |reason: String| {
            rejects.push(LineReject {
                line_number,
                reason,
            })
        };
        if raw.len() > limits.max_line_bytes {
            reject(format!(
                "line too long: {} bytes exceeds the {}-byte limit",
                raw.len(),
                limits.max_line_bytes
            ));
            continue;
        }
        let line = match std::str::from_utf8(raw) {
            Ok(line) => line,
            Err(e) => {
                reject(format!("invalid UTF-8: {e}"));
                continue;
            }
        };
        if line.trim().is_empty() {
            continue;
        }
        match parse_record(line) {
            Ok(record) => records.push(record),
            Err(e) => reject(e.reason),
        }
    }
    (records, rejects)
}

/// Screens `body` and appends every parseable record to `store` in arrival
/// order. Returns once the records are durable.
pub fn ingest(
    store: &Store,
    body: &[u8],
    limits: &IngestLimits,
) -> Result<IngestSummary, IngestError> {
    if body.len() > limits.max_body_bytes {
        return Err(IngestError::BodyTooLarge {
            size: body.len(),
            limit: limits.max_body_bytes,
        });
    }
    let (records, rejects) = screen(body, limits);
    let accepted = store.append(&records)?;
    Ok(IngestSummary {
        accepted,
        rejected: rejects.len(),
        rejects,
    })
}
