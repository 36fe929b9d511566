//! Append-only record storage with an in-memory trace index.
//!
//! Layout of a data directory:
//!
//! ```text
//! <data-dir>/segments/000001.ndjson   records, one canonical line each
//! <data-dir>/segments/000002.ndjson   next segment once the first is full
//! <data-dir>/prompts.ndjson           prompt registry
//! ```
//!
//! The index is derived state rebuilt by scanning every segment on open.
//! Feedback records are stored in the segments like any other record and
//! routed to a per-trace feedback list in the index.

mod prompts;
mod summary;

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use crate::exec::Execution;
use crate::model::{
    assemble_trace, canonical_serialize, parse_record, AssemblyError, FeedbackScore, Record,
    SpanId, Trace, TraceId,
};

pub use prompts::{content_hash, PromptRecord};
pub use summary::{QueryFilter, TraceSummary};

pub const SEGMENTS_DIR: &str = "segments";
pub const PROMPTS_FILE: &str = "prompts.ndjson";
pub const DEFAULT_SEGMENT_MAX_BYTES: u64 = 64 * 1024 * 1024;

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("storage full")]
    StorageFull,
    #[error("i/o failure: {0}")]
    Io(io::Error),
    #[error("{}:{line}: {reason}", path.display())]
    Corrupt {
        path: PathBuf,
        line: usize,
        reason: String,
    },
    #[error("trace {0} not found")]
    TraceNotFound(TraceId),
    #[error("span {span_id} not found in trace {trace_id}")]
    SpanNotFound { trace_id: TraceId, span_id: SpanId },
    #[error("prompt name must not be empty")]
    EmptyName,
    #[error("trace {trace_id} cannot be assembled: {source}")]
    Assembly {
        trace_id: TraceId,
        source: AssemblyError,
    },
}

pub(crate) fn io_error(e: io::Error) -> StoreError {
    if e.kind() == io::ErrorKind::StorageFull {
        StoreError::StorageFull
    } else {
        StoreError::Io(e)
    }
}

#[derive(Debug, Clone)]
pub struct StoreOptions {
    /// A segment is closed once it reaches this size; a batch never spans
    /// two segments.
    pub segment_max_bytes: u64,
    pub execution: Execution,
}

impl Default for StoreOptions {
    fn default() -> Self {
        Self {
            segment_max_bytes: DEFAULT_SEGMENT_MAX_BYTES,
            execution: Execution::default(),
        }
    }
}

/// One trace's records and feedback, borrowed from the index.
type Group<'a> = (TraceId, &'a Vec<Record>, Option<&'a Vec<FeedbackScore>>);

#[derive(Default)]
struct Index {
    records: BTreeMap<TraceId, Vec<Record>>,
    feedback: BTreeMap<TraceId, Vec<FeedbackScore>>,
    record_count: usize,
}

impl Index {
    fn insert(&mut self, record: Record) {
        self.record_count += 1;
        match record {
            Record::Feedback(f) => self.feedback.entry(f.trace_id).or_default().push(f),
            other => self
                .records
                .entry(other.trace_id())
                .or_default()
                .push(other),
        }
    }

    fn assemble(&self, trace_id: TraceId) -> Result<Trace, StoreError> {
        let records = self
            .records
            .get(&trace_id)
            .ok_or(StoreError::TraceNotFound(trace_id))?;
        assemble_group(trace_id, records, self.feedback.get(&trace_id))
    }

    fn groups(&self) -> Vec<Group<'_>> {
        self.records
            .iter()
            .map(|(id, records)| (*id, records, self.feedback.get(id)))
            .collect()
    }
}

fn assemble_group(
    trace_id: TraceId,
    records: &[Record],
    feedback: Option<&Vec<FeedbackScore>>,
) -> Result<Trace, StoreError> {
    let feedback: Vec<Record> = feedback
        .into_iter()
        .flatten()
        .cloned()
        .map(Record::Feedback)
        .collect();
    assemble_trace(records.iter().chain(feedback.iter()))
        .map_err(|source| StoreError::Assembly { trace_id, source })
}

struct SegmentWriter {
    dir: PathBuf,
    number: u32,
    bytes: u64,
    max_bytes: u64,
    file: Option<File>,
}

impl SegmentWriter {
    fn path(&self) -> PathBuf {
        segment_path(&self.dir, self.number)
    }

    fn write_batch(&mut self, batch: &[u8]) -> Result<(), StoreError> {
        if self.bytes > 0 && self.bytes + batch.len() as u64 > self.max_bytes {
            self.number += 1;
            self.bytes = 0;
            self.file = None;
        }
        if self.file.is_none() {
            let file = OpenOptions::new()
                .create(true)
                .append(true)
                .open(self.path())
                .map_err(io_error)?;
            self.file = Some(file);
        }
        let file = self.file.as_mut().expect("opened above");
        file.write_all(batch).map_err(io_error)?;
        file.flush().map_err(io_error)?;
        self.bytes += batch.len() as u64;
        Ok(())
    }
}

fn segment_path(dir: &Path, number: u32) -> PathBuf {
    dir.join(format!("{number:06}.ndjson"))
}

fn segment_number(path: &Path) -> Option<u32> {
    let name = path.file_name()?.to_str()?;
    let stem = name.strip_suffix(".ndjson")?;
    (stem.len() == 6 && stem.bytes().all(|b| b.is_ascii_digit()))
        .then(|| stem.parse().ok())
        .flatten()
}

/// Reads one segment into `index`. An unterminated final line is a torn
/// write and is cut off so later appends start on a fresh line.
fn load_segment(path: &Path, index: &mut Index) -> Result<u64, StoreError> {
    let data = fs::read(path).map_err(io_error)?;
    let complete = match data.iter().rposition(|b| *b == b'\n') {
        Some(last) => last + 1,
        None => 0,
    };
    if complete < data.len() {
        let file = OpenOptions::new()
            .write(true)
            .open(path)
            .map_err(io_error)?;
        file.set_len(complete as u64).map_err(io_error)?;
    }
    let reader = BufReader::new(&data[..complete]);
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(io_error)?;
        if line.trim().is_empty() {
            continue;
        }
        let record = parse_record(&line).map_err(|e| StoreError::Corrupt {
            path: path.to_path_buf(),
            line: i + 1,
            reason: e.reason,
        })?;
        index.insert(record);
    }
    Ok(complete as u64)
}

fn now_unix_ns() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_nanos() as u64)
        .unwrap_or(0)
}

/// Safe for concurrent appenders and readers: appends are serialized by one
/// writer lock, and readers only ever see fully appended batches.
pub struct Store {
    root: PathBuf,
    writer: Mutex<SegmentWriter>,
    index: RwLock<Index>,
    prompts: Mutex<prompts::PromptRegistry>,
    execution: Execution,
}

impl Store {
    pub fn open(root: impl AsRef<Path>) -> Result<Self, StoreError> {
        Self::open_with(root, StoreOptions::default())
    }

    pub fn open_with(root: impl AsRef<Path>, options: StoreOptions) -> Result<Self, StoreError> {
        let root = root.as_ref().to_path_buf();
        let dir = root.join(SEGMENTS_DIR);
        fs::create_dir_all(&dir).map_err(io_error)?;

        let mut segments: Vec<(u32, PathBuf)> = fs::read_dir(&dir)
            .map_err(io_error)?
            .filter_map(|entry| entry.ok().map(|e| e.path()))
            .filter_map(|path| segment_number(&path).map(|n| (n, path)))
            .collect();
        segments.sort();

        let mut index = Index::default();
        let mut last = (1, 0);
        for (number, path) in &segments {
            let bytes = load_segment(path, &mut index)?;
            last = (*number, bytes);
        }
        let writer = SegmentWriter {
            dir,
            number: last.0,
            bytes: last.1,
            max_bytes: options.segment_max_bytes.max(1),
            file: None,
        };
        let prompts = prompts::PromptRegistry::open(root.join(PROMPTS_FILE))?;
        Ok(Self {
            root,
            writer: Mutex::new(writer),
            index: RwLock::new(index),
            prompts: Mutex::new(prompts),
            execution: options.execution,
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Durably appends `records` in order and publishes them to readers.
    /// Returns the number appended.
    pub fn append(&self, records: &[Record]) -> Result<usize, StoreError> {
        if records.is_empty() {
            return Ok(0);
        }
        let mut batch = String::new();
        for r in records {
            batch.push_str(&canonical_serialize(r));
            batch.push('\n');
        }
        let mut writer = self.writer.lock().expect("writer lock poisoned");
        writer.write_batch(batch.as_bytes())?;
        let mut index = self.index.write().expect("index lock poisoned");
        for r in records {
            index.insert(r.clone());
        }
        Ok(records.len())
    }

    pub fn record_count(&self) -> usize {
        self.index.read().expect("index lock poisoned").record_count
    }

    pub fn trace_ids(&self) -> Vec<TraceId> {
        let index = self.index.read().expect("index lock poisoned");
        index.records.keys().copied().collect()
    }

    /// Every stored record, grouped by trace id, in arrival order within a
    /// trace (feedback after the other records of its trace).
    pub fn records(&self) -> Vec<Record> {
        let index = self.index.read().expect("index lock poisoned");
        let mut out = Vec::with_capacity(index.record_count);
        let ids: std::collections::BTreeSet<TraceId> = index
            .records
            .keys()
            .chain(index.feedback.keys())
            .copied()
            .collect();
        for id in ids {
            out.extend(index.records.get(&id).into_iter().flatten().cloned());
            out.extend(
                index
                    .feedback
                    .get(&id)
                    .into_iter()
                    .flatten()
                    .cloned()
                    .map(Record::Feedback),
            );
        }
        out
    }

    pub fn get_trace(&self, trace_id: TraceId) -> Result<Trace, StoreError> {
        self.index
            .read()
            .expect("index lock poisoned")
            .assemble(trace_id)
    }

    /// Assembles every stored trace. Traces whose records do not assemble
    /// (orphans, duplicates) are returned as errors in trace-id order.
    pub fn all_traces(&self) -> Vec<Result<Trace, StoreError>> {
        let index = self.index.read().expect("index lock poisoned");
        self.execution
            .map(&index.groups(), |(id, records, feedback)| {
                assemble_group(*id, records, *feedback)
            })
    }

    /// Assembled traces only, skipping any that fail to assemble.
    pub fn traces(&self) -> Vec<Trace> {
        self.all_traces()
            .into_iter()
            .filter_map(Result::ok)
            .collect()
    }

    pub fn summaries(&self) -> Vec<TraceSummary> {
        let index = self.index.read().expect("index lock poisoned");
        let mut out: Vec<TraceSummary> = self
            .execution
            .map(&index.groups(), |(id, records, feedback)| {
                assemble_group(*id, records, *feedback)
                    .ok()
                    .and_then(|t| TraceSummary::from_trace(&t))
            })
            .into_iter()
            .flatten()
            .collect();
        out.sort_by_key(|s| (s.start_time_unix_ns, s.trace_id));
        out
    }

    /// Summaries of the traces matching every set field of `filter`,
    /// ordered by start time then trace id.
    pub fn query_traces(&self, filter: &QueryFilter) -> Vec<TraceSummary> {
        self.summaries()
            .into_iter()
            .filter(|s| filter.matches(s))
            .collect()
    }

    pub fn register_prompt(&self, name: &str, template: &str) -> Result<PromptRecord, StoreError> {
        self.prompts
            .lock()
            .expect("prompt lock poisoned")
            .register(name, template, now_unix_ns())
    }

    pub fn list_prompts(&self, name: Option<&str>) -> Vec<PromptRecord> {
        self.prompts
            .lock()
            .expect("prompt lock poisoned")
            .list(name)
    }

    /// Attaches a score to an existing trace (and span, when targeted).
    pub fn attach_feedback(&self, feedback: FeedbackScore) -> Result<(), StoreError> {
        {
            let index = self.index.read().expect("index lock poisoned");
            let records = index
                .records
                .get(&feedback.trace_id)
                .ok_or(StoreError::TraceNotFound(feedback.trace_id))?;
            if let Some(span_id) = feedback.span_id {
                let known = records
                    .iter()
                    .any(|r| matches!(r, Record::SpanStart(s) if s.span_id == span_id));
                if !known {
                    return Err(StoreError::SpanNotFound {
                        trace_id: feedback.trace_id,
                        span_id,
                    });
                }
            }
        }
        self.append(&[Record::Feedback(feedback)]).map(|_| ())
    }
}
