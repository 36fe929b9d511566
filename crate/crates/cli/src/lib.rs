//! The `agenttrace` command line.
//!
//! Exit codes are shared by every command:
//!
//! | code | meaning |
//! |---|---|
//! | 0 | success; for `validate`, every trace conforms |
//! | 1 | findings: violations, rejected lines, no match where one is required |
//! | 2 | usage error |
//! | 3 | I/O, parse or service error |

mod args;
mod remote;
mod render;

use std::fs;
use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::Parser;
use serde::Serialize;
use serde_json::Number;

use agenttrace_collector::{ingest, CollectorConfig, IngestLimits, IngestSummary};
use agenttrace_core::analytics::{
    compute_corpus_cost, compute_cost, error_rate, extract_trajectory, guardrail_audit,
    latency_stats, trajectory_similarity, CostError, LatencyError, PriceTable, Trajectory,
    TrajectoryError,
};
use agenttrace_core::model::{
    assemble_trace, canonical_serialize, group_by_trace, parse_record, FeedbackScore,
    FeedbackValue, Record, TraceId,
};
use agenttrace_core::simulator::{corpus_seed, generate, mutate, MutateError, ShapeConfig};
use agenttrace_core::store::{QueryFilter, Store, StoreError};
use agenttrace_core::validator::{validate, validate_corpus, ValidationReport, ValidatorConfig};
use agenttrace_core::Execution;

pub use args::{AuditFormat, Cli, Command, Format, DEFAULT_COLLECTOR_URL};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FINDINGS: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;

#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn new(code: i32, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }

    fn io(message: impl Into<String>) -> Self {
        Self::new(EXIT_IO, message)
    }
}

impl From<StoreError> for Failure {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::TraceNotFound(_) | StoreError::SpanNotFound { .. } => {
                Failure::new(EXIT_FINDINGS, e.to_string())
            }
            StoreError::EmptyName => Failure::new(EXIT_USAGE, e.to_string()),
            _ => Failure::io(e.to_string()),
        }
    }
}

/// What a command produced: text for stdout and the exit code.
struct Outcome {
    text: String,
    code: i32,
}

impl Outcome {
    fn ok(text: String) -> Self {
        Self {
            text,
            code: EXIT_OK,
        }
    }
}

fn json<T: Serialize + ?Sized>(value: &T) -> String {
    let mut s = canonical_serialize(value);
    s.push('\n');
    s
}

fn emit<T: Serialize + ?Sized>(
    format: Format,
    value: &T,
    table: impl FnOnce() -> String,
) -> String {
    match format {
        Format::Json => json(value),
        Format::Table => table(),
    }
}

/// Parses `argv` (program name first) and runs the command, writing
/// results to `out` and diagnostics to `err`. Returns the exit code.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                err.write_all(text.as_bytes())
            } else {
                out.write_all(text.as_bytes())
            };
            return code;
        }
    };
    match dispatch(cli) {
        Ok(outcome) => {
            if out.write_all(outcome.text.as_bytes()).is_err() {
                return EXIT_IO;
            }
            outcome.code
        }
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

fn dispatch(cli: Cli) -> Result<Outcome, Failure> {
    let data_dir = cli.data_dir;
    match cli.command {
        Command::Serve {
            port,
            bind,
            max_body_bytes,
            max_line_bytes,
        } => serve(CollectorConfig {
            bind,
            port,
            data_dir,
            limits: IngestLimits {
                max_body_bytes,
                max_line_bytes,
            },
        }),
        Command::Ingest {
            file,
            remote: true,
            collector_url,
            format,
        } => {
            let body = read_input(&file)?;
            let summary = remote::post_chunked(&collector_url, &body, remote::MAX_CHUNK_BYTES)?;
            Ok(ingest_outcome(format, &summary))
        }
        Command::Ingest { file, format, .. } => {
            let body = read_input(&file)?;
            let store = open_store(&data_dir)?;
            let summary = ingest(&store, &body, &IngestLimits::for_files())
                .map_err(|e| Failure::io(e.to_string()))?;
            Ok(ingest_outcome(format, &summary))
        }
        Command::Validate {
            target,
            mode,
            epsilon_ns,
            disable_rules,
            format,
        } => {
            let mut config = ValidatorConfig::for_mode(mode).with_epsilon(epsilon_ns);
            for rule in disable_rules {
                config = config.disable(rule);
            }
            let reports = validate_target(&target, &data_dir, &config)?;
            let code = if reports.iter().all(ValidationReport::is_conforming) {
                EXIT_OK
            } else {
                EXIT_FINDINGS
            };
            Ok(Outcome {
                text: emit(format, &reports, || render::reports(&reports)),
                code,
            })
        }
        Command::Explain { rule } => {
            let doc = rule.doc();
            Ok(Outcome::ok(format!(
                "{} {}\n{}\nanchor: {}\n",
                doc.rule_id, doc.title, doc.description, doc.anchor
            )))
        }
        Command::Show {
            trace_id,
            tree,
            format,
        } => {
            let trace = open_store(&data_dir)?.get_trace(trace_id)?;
            Ok(Outcome::ok(match (format, tree) {
                (Format::Json, _) => json(&trace),
                (Format::Table, true) => render::tree(&trace),
                (Format::Table, false) => render::spans(&trace),
            }))
        }
        Command::Query(q) => {
            let filter = QueryFilter {
                has_error: q.has_error.then_some(true),
                min_duration_ns: q.min_duration_ms.map(|ms| ms.saturating_mul(1_000_000)),
                kind: q.kind,
                name_contains: q.name_contains,
                ..QueryFilter::default()
            };
            let rows = open_store(&data_dir)?.query_traces(&filter);
            Ok(Outcome::ok(emit(q.format, &rows, || {
                render::summaries(&rows)
            })))
        }
        Command::Report(args::Report::Cost {
            prices,
            trace,
            format,
        }) => {
            let text = fs::read_to_string(&prices)
                .map_err(|e| Failure::io(format!("{}: {e}", prices.display())))?;
            let table = PriceTable::from_json(&text).map_err(cost_failure)?;
            let store = open_store(&data_dir)?;
            let breakdown = match trace {
                Some(id) => compute_cost(&store.get_trace(id)?, &table),
                None => compute_corpus_cost(&store.traces(), &table, Execution::default()),
            }
            .map_err(cost_failure)?;
            Ok(Outcome::ok(emit(format, &breakdown, || {
                render::cost(&breakdown)
            })))
        }
        Command::Report(args::Report::Latency {
            percentiles,
            format,
        }) => {
            let summaries = open_store(&data_dir)?.summaries();
            let stats = latency_stats(&summaries, &percentiles).map_err(|e| match e {
                LatencyError::EmptyInput => Failure::new(EXIT_FINDINGS, e.to_string()),
                LatencyError::InvalidPercentile(_) => Failure::new(EXIT_USAGE, e.to_string()),
            })?;
            let errors = error_rate(&summaries);
            #[derive(Serialize)]
            struct LatencyReport<'a> {
                latency: &'a agenttrace_core::analytics::LatencyStats,
                error_rate: &'a agenttrace_core::analytics::ErrorRate,
            }
            let report = LatencyReport {
                latency: &stats,
                error_rate: &errors,
            };
            Ok(Outcome::ok(emit(format, &report, || {
                render::latency(&stats, &errors)
            })))
        }
        Command::Trajectory {
            trace_id,
            workflow,
            expected,
            format,
        } => {
            let trace = open_store(&data_dir)?.get_trace(trace_id)?;
            let actual = extract_trajectory(&trace, workflow).map_err(|e| match e {
                TrajectoryError::SpanNotFound(_) => Failure::new(EXIT_FINDINGS, e.to_string()),
                TrajectoryError::NotAWorkflow { .. } => Failure::new(EXIT_USAGE, e.to_string()),
            })?;
            let expected = expected.map(Trajectory);
            let similarity = expected.as_ref().map(|e| trajectory_similarity(e, &actual));
            #[derive(Serialize)]
            struct TrajectoryReport<'a> {
                actual: &'a Trajectory,
                expected: Option<&'a Trajectory>,
                similarity: Option<&'a agenttrace_core::analytics::Similarity>,
            }
            let report = TrajectoryReport {
                actual: &actual,
                expected: expected.as_ref(),
                similarity: similarity.as_ref(),
            };
            let code = match &similarity {
                Some(s) if !s.exact => EXIT_FINDINGS,
                _ => EXIT_OK,
            };
            Ok(Outcome {
                text: emit(format, &report, || {
                    render::trajectory(&actual, expected.as_ref().zip(similarity.as_ref()))
                }),
                code,
            })
        }
        Command::Audit(args::Audit::Guardrails { format }) => {
            let traces = open_store(&data_dir)?.traces();
            let report = guardrail_audit(&traces, Execution::default());
            Ok(Outcome::ok(match format {
                AuditFormat::Json => json(&report),
                AuditFormat::Md => report.to_markdown(),
            }))
        }
        Command::Prompts(args::Prompts::Register { name, file, format }) => {
            let bytes = read_input(&file)?;
            let template = String::from_utf8(bytes)
                .map_err(|_| Failure::io(format!("{}: not UTF-8", file.display())))?;
            let record = open_store(&data_dir)?.register_prompt(&name, &template)?;
            Ok(Outcome::ok(emit(format, &record, || {
                render::prompts(std::slice::from_ref(&record))
            })))
        }
        Command::Prompts(args::Prompts::List { name, format }) => {
            let records = open_store(&data_dir)?.list_prompts(name.as_deref());
            Ok(Outcome::ok(emit(format, &records, || {
                render::prompts(&records)
            })))
        }
        Command::Feedback {
            trace_id,
            name,
            value,
            span,
            source,
            comment,
        } => {
            let value = match serde_json::from_str::<Number>(&value) {
                Ok(n) => FeedbackValue::Number(n),
                Err(_) => FeedbackValue::Text(value),
            };
            let feedback = FeedbackScore {
                trace_id,
                span_id: span,
                source,
                name,
                value,
                comment,
                time_unix_ns: now_unix_ns(),
                extra: Default::default(),
            };
            open_store(&data_dir)?.attach_feedback(feedback.clone())?;
            Ok(Outcome::ok(json(&Record::Feedback(feedback))))
        }
        Command::Simulate(s) => simulate(s),
    }
}

fn ingest_outcome(format: Format, summary: &IngestSummary) -> Outcome {
    Outcome {
        text: emit(format, summary, || render::ingest(summary)),
        code: if summary.rejected == 0 {
            EXIT_OK
        } else {
            EXIT_FINDINGS
        },
    }
}

fn cost_failure(e: CostError) -> Failure {
    Failure::io(e.to_string())
}

fn now_unix_ns() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_nanos() as u64)
        .unwrap_or(0)
}

fn open_store(dir: &Path) -> Result<Store, Failure> {
    Store::open(dir).map_err(|e| Failure::io(format!("{}: {e}", dir.display())))
}

fn read_input(path: &Path) -> Result<Vec<u8>, Failure> {
    if path == Path::new("-") {
        let mut buf = Vec::new();
        std::io::stdin()
            .read_to_end(&mut buf)
            .map_err(|e| Failure::io(format!("stdin: {e}")))?;
        return Ok(buf);
    }
    fs::read(path).map_err(|e| Failure::io(format!("{}: {e}", path.display())))
}

/// A path that exists is read as NDJSON; otherwise a trace id is looked up
/// in the store.
fn validate_target(
    target: &str,
    data_dir: &Path,
    config: &ValidatorConfig,
) -> Result<Vec<ValidationReport>, Failure> {
    let path = Path::new(target);
    if path.exists() || target == "-" {
        let bytes = read_input(path)?;
        let text =
            String::from_utf8(bytes).map_err(|_| Failure::io(format!("{target}: not UTF-8")))?;
        let mut records = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let record = parse_record(line)
                .map_err(|e| Failure::io(format!("{target}:{}: {}", i + 1, e.reason)))?;
            records.push(record);
        }
        let mut traces = Vec::new();
        for (trace_id, group) in group_by_trace(records) {
            let trace = assemble_trace(&group)
                .map_err(|e| Failure::io(format!("trace {trace_id}: {e}")))?;
            traces.push(trace);
        }
        return Ok(validate_corpus(&traces, config, Execution::default()));
    }
    let trace_id: TraceId = target
        .parse()
        .map_err(|_| Failure::io(format!("{target}: no such file")))?;
    let store = open_store(data_dir)?;
    let trace = store
        .get_trace(trace_id)
        .map_err(|e| Failure::io(e.to_string()))?;
    Ok(vec![validate(&trace, config)])
}

fn simulate(s: args::SimulateArgs) -> Result<Outcome, Failure> {
    let base = ShapeConfig::new(s.seed);
    let shape = ShapeConfig {
        plans_per_agent: s.plans.unwrap_or(base.plans_per_agent),
        tasks_per_workflow: s.tasks.unwrap_or(base.tasks_per_workflow),
        tools_per_task: s.tools.unwrap_or(base.tools_per_task),
        llm_calls_per_task: s.llm_per_task.unwrap_or(base.llm_calls_per_task),
        llm_calls_per_plan: s.llm_per_plan.unwrap_or(base.llm_calls_per_plan),
        kb_links: s.kb_links.unwrap_or(base.kb_links),
        guardrail_probability: s
            .guardrail_probability
            .unwrap_or(base.guardrail_probability),
        error_probability: s.error_probability.unwrap_or(base.error_probability),
        include_evaluation: !s.no_evaluation,
        ..base
    };
    shape
        .validate()
        .map_err(|e| Failure::new(EXIT_USAGE, e.to_string()))?;
    let mut out = String::new();
    for i in 0..s.traces {
        let seed = corpus_seed(s.seed, i);
        let trace_shape = ShapeConfig {
            seed,
            ..shape.clone()
        };
        let mut records =
            generate(&trace_shape).map_err(|e| Failure::new(EXIT_USAGE, e.to_string()))?;
        if let Some(rule) = &s.mutate {
            records = mutate(&records, rule, seed).map_err(|e| match e {
                MutateError::UnknownRule(_) => Failure::new(EXIT_USAGE, e.to_string()),
                _ => Failure::new(EXIT_FINDINGS, format!("trace {i}: {e}")),
            })?;
        }
        for r in &records {
            out.push_str(&canonical_serialize(r));
            out.push('\n');
        }
    }
    if s.out == Path::new("-") {
        return Ok(Outcome::ok(out));
    }
    fs::write(&s.out, out).map_err(|e| Failure::io(format!("{}: {e}", s.out.display())))?;
    Ok(Outcome::ok(String::new()))
}

fn serve(config: CollectorConfig) -> Result<Outcome, Failure> {
    let _ = tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("info")),
        )
        .with_writer(std::io::stderr)
        .try_init();
    let runtime = tokio::runtime::Runtime::new().map_err(|e| Failure::io(e.to_string()))?;
    runtime
        .block_on(async {
            let collector = agenttrace_collector::Collector::bind(&config).await?;
            let addr = collector.local_addr().ok();
            let store: Arc<Store> = collector.store();
            eprintln!(
                "listening on {} (data dir {}, {} records)",
                addr.map_or_else(|| "?".into(), |a| a.to_string()),
                config.data_dir.display(),
                store.record_count()
            );
            collector
                .run(async {
                    let _ = tokio::signal::ctrl_c().await;
                })
                .await
        })
        .map_err(|e| Failure::io(e.to_string()))?;
    Ok(Outcome::ok(String::new()))
}
