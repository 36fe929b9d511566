use std::time::Duration;

use agenttrace_collector::{IngestSummary, LineReject};

use crate::Failure;

/// Largest body sent in one request; well under the collector's default
/// body limit.
pub const MAX_CHUNK_BYTES: usize = 4 * 1024 * 1024;

/// Splits `body` into chunks of whole lines, each at most `max` bytes
/// unless a single line is longer. Returns each chunk with the number of
/// lines preceding it.
pub fn chunks(body: &[u8], max: usize) -> Vec<(usize, &[u8])> {
    let mut out = Vec::new();
    let mut start = 0;
    let mut lines_before = 0;
    let mut lines_in_chunk = 0;
    let mut pos = 0;
    while pos < body.len() {
        let end = body[pos..]
            .iter()
            .position(|b| *b == b'\n')
            .map_or(body.len(), |i| pos + i + 1);
        if end - start > max && pos > start {
            out.push((lines_before, &body[start..pos]));
            lines_before += lines_in_chunk;
            lines_in_chunk = 0;
            start = pos;
        }
        lines_in_chunk += 1;
        pos = end;
    }
    if start < body.len() {
        out.push((lines_before, &body[start..]));
    }
    out
}

/// POSTs `body` to `<base>/v1/traces` in line-aligned chunks and merges
/// the per-chunk summaries, renumbering rejects to file line numbers.
pub fn post_chunked(base: &str, body: &[u8], max: usize) -> Result<IngestSummary, Failure> {
    let url = format!("{}/v1/traces", base.trim_end_matches('/'));
    let client = reqwest::blocking::Client::builder()
        .timeout(Duration::from_secs(120))
        .build()
        .map_err(|e| Failure::io(e.to_string()))?;
    let mut total = IngestSummary::default();
    for (offset, chunk) in chunks(body, max) {
        let response = client
            .post(&url)
            .header("content-type", "application/x-ndjson")
            .body(chunk.to_vec())
            .send()
            .map_err(|e| Failure::io(format!("{url}: {e}")))?;
        let status = response.status();
        let text = response
            .text()
            .map_err(|e| Failure::io(format!("{url}: {e}")))?;
        if !status.is_success() {
            return Err(Failure::io(format!("{url}: {status}: {text}")));
        }
        let part: IngestSummary =
            serde_json::from_str(&text).map_err(|e| Failure::io(format!("{url}: {e}")))?;
        total.accepted += part.accepted;
        total.rejected += part.rejected;
        total
            .rejects
            .extend(part.rejects.into_iter().map(|r| LineReject {
                line_number: offset + r.line_number,
                ..r
            }));
    }
    Ok(total)
}
