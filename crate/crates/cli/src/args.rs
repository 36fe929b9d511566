use std::net::IpAddr;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use agenttrace_collector::{DEFAULT_MAX_BODY_BYTES, DEFAULT_MAX_LINE_BYTES};
use agenttrace_core::model::{FeedbackSource, SpanId, SpanKind, TraceId};
use agenttrace_core::validator::{Mode, RuleId, DEFAULT_EPSILON_NS};

pub const DEFAULT_COLLECTOR_URL: &str = "http://127.0.0.1:4318";

#[derive(Debug, Parser)]
#[command(
    name = "agenttrace",
    version,
    about = "Record, validate and analyze LLM-agent traces"
)]
pub struct Cli {
    /// Store directory.
    #[arg(
        long,
        global = true,
        env = "AGENTTRACE_DATA_DIR",
        default_value = ".agenttrace"
    )]
    pub data_dir: PathBuf,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Table,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AuditFormat {
    Json,
    Md,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the ingestion service.
    Serve {
        #[arg(long, env = "AGENTTRACE_PORT", default_value_t = agenttrace_collector::DEFAULT_PORT)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        bind: IpAddr,
        #[arg(long, default_value_t = DEFAULT_MAX_BODY_BYTES)]
        max_body_bytes: usize,
        #[arg(long, default_value_t = DEFAULT_MAX_LINE_BYTES)]
        max_line_bytes: usize,
    },
    /// Append an NDJSON file (or `-` for stdin) to the store.
    Ingest {
        file: PathBuf,
        /// Send to a running collector instead of writing the store.
        #[arg(long)]
        remote: bool,
        #[arg(long, env = "AGENTTRACE_COLLECTOR_URL", default_value = DEFAULT_COLLECTOR_URL)]
        collector_url: String,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
    /// Check traces from a file, or one stored trace, against the rules.
    Validate {
        /// NDJSON file or stored trace id.
        target: String,
        #[arg(long, default_value = "strict")]
        mode: Mode,
        #[arg(long, default_value_t = DEFAULT_EPSILON_NS)]
        epsilon_ns: u64,
        #[arg(long = "disable-rule")]
        disable_rules: Vec<RuleId>,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
    /// Describe a validation rule.
    Explain { rule: RuleId },
    /// Print one stored trace.
    Show {
        trace_id: TraceId,
        /// Render the span hierarchy.
        #[arg(long)]
        tree: bool,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
    /// List stored traces matching every given filter.
    Query(QueryArgs),
    #[command(subcommand)]
    Report(Report),
    /// Tool-call path of a trace, optionally compared with an expected one.
    Trajectory {
        trace_id: TraceId,
        #[arg(long)]
        workflow: Option<SpanId>,
        #[arg(long, value_delimiter = ',')]
        expected: Option<Vec<String>>,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
    #[command(subcommand)]
    Audit(Audit),
    #[command(subcommand)]
    Prompts(Prompts),
    /// Attach a feedback score to a stored trace or span.
    Feedback {
        trace_id: TraceId,
        #[arg(long)]
        name: String,
        /// Number, or text when it does not parse as one.
        #[arg(long)]
        value: String,
        #[arg(long)]
        span: Option<SpanId>,
        #[arg(long, default_value = "explicit")]
        source: FeedbackSource,
        #[arg(long)]
        comment: Option<String>,
    },
    /// Write synthetic traces as NDJSON.
    Simulate(SimulateArgs),
}

#[derive(Debug, Args)]
pub struct QueryArgs {
    #[arg(long)]
    pub has_error: bool,
    #[arg(long)]
    pub min_duration_ms: Option<u64>,
    #[arg(long)]
    pub kind: Option<SpanKind>,
    #[arg(long)]
    pub name_contains: Option<String>,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    pub format: Format,
}

#[derive(Debug, Subcommand)]
pub enum Report {
    /// Token cost per model.
    Cost {
        #[arg(long)]
        prices: PathBuf,
        #[arg(long)]
        trace: Option<TraceId>,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
    /// Root-span latency percentiles and error rate.
    Latency {
        #[arg(long, value_delimiter = ',', default_value = "50,90,99")]
        percentiles: Vec<u8>,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
}

#[derive(Debug, Subcommand)]
pub enum Audit {
    /// Guardrail activations, actions, targets and outcomes.
    Guardrails {
        #[arg(long, value_enum, default_value_t = AuditFormat::Md)]
        format: AuditFormat,
    },
}

#[derive(Debug, Subcommand)]
pub enum Prompts {
    /// Register a template file (or `-` for stdin) under a name.
    Register {
        name: String,
        file: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
    List {
        name: Option<String>,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub traces: u64,
    /// Output file, `-` for stdout.
    #[arg(long, default_value = "-")]
    pub out: PathBuf,
    /// Inject a violation of this rule into every trace.
    #[arg(long)]
    pub mutate: Option<String>,
    #[arg(long)]
    pub tasks: Option<u32>,
    #[arg(long)]
    pub plans: Option<u32>,
    #[arg(long)]
    pub tools: Option<u32>,
    #[arg(long)]
    pub llm_per_task: Option<u32>,
    #[arg(long)]
    pub llm_per_plan: Option<u32>,
    #[arg(long)]
    pub kb_links: Option<u32>,
    #[arg(long)]
    pub guardrail_probability: Option<f64>,
    #[arg(long)]
    pub error_probability: Option<f64>,
    #[arg(long)]
    pub no_evaluation: bool,
}
