//! Structural conformance rules over assembled traces.
//!
//! Each rule is independent and can be switched off through
//! [`ValidatorConfig::disabled_rules`]. Findings are report entries, never
//! errors; an empty violation list means the trace conforms under the given
//! mode and configuration.

mod rules;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Serialize, Serializer};

use crate::exec::Execution;
use crate::model::{SpanId, SpanKind, Trace, TraceId};

/// Name of the span event that records a task status transition; the new
/// status is carried in the attribute of the same name.
pub const STATUS_EVENT: &str = "status";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RuleId {
    R01,
    R02,
    R03,
    R04,
    R05,
    R06,
    R07,
    R08,
    R09,
    R10,
    R11,
    R12,
    R13,
}

impl RuleId {
    pub const ALL: [RuleId; 13] = [
        RuleId::R01,
        RuleId::R02,
        RuleId::R03,
        RuleId::R04,
        RuleId::R05,
        RuleId::R06,
        RuleId::R07,
        RuleId::R08,
        RuleId::R09,
        RuleId::R10,
        RuleId::R11,
        RuleId::R12,
        RuleId::R13,
    ];

    pub fn as_str(self) -> &'static str {
        CATALOG[self as usize].id
    }

    pub fn doc(self) -> RuleDoc {
        let entry = &CATALOG[self as usize];
        RuleDoc {
            rule_id: self,
            title: entry.title,
            description: entry.description,
            anchor: entry.anchor,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown rule {0:?} (expected R01..R13)")]
pub struct UnknownRule(pub String);

impl FromStr for RuleId {
    type Err = UnknownRule;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        RuleId::ALL
            .into_iter()
            .find(|r| r.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| UnknownRule(s.to_string()))
    }
}

impl fmt::Display for RuleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for RuleId {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}

struct CatalogEntry {
    id: &'static str,
    title: &'static str,
    description: &'static str,
    anchor: &'static str,
}

const CATALOG: [CatalogEntry; 13] = [
    CatalogEntry {
        id: "R01",
        title: "single root",
        description: "A trace has exactly one span without a parent.",
        anchor: "The first span represents the root span.",
    },
    CatalogEntry {
        id: "R02",
        title: "parent tree",
        description: "Every parent_id resolves to a span of the same trace and parent links contain no cycle.",
        anchor: "Parent ID: an identifier establishing a hierarchical relationship between spans.",
    },
    CatalogEntry {
        id: "R03",
        title: "time containment",
        description: "A child starts no earlier and ends no later than its parent, within the configured clock-skew epsilon.",
        anchor: "none; tolerance for clock skew between agent hosts and collectors",
    },
    CatalogEntry {
        id: "R04",
        title: "kind nesting",
        description: "reasoning, planning and workflow spans sit under an agent; tasks under a workflow; tools under a task; llm spans under a configured parent kind (default planning or task); evaluations under an agent or at the root.",
        anchor: "Each plan span may call one or more LLM spans. Task may also call one or more LLM spans. A workflow comprises multiple tasks.",
    },
    CatalogEntry {
        id: "R05",
        title: "reasoning generates a plan",
        description: "Each reasoning span has exactly one outgoing generates link to a planning span (lenient: at most one).",
        anchor: "A single reasoning span generates a plan.",
    },
    CatalogEntry {
        id: "R06",
        title: "plan realized by one workflow",
        description: "Each planning span has exactly one realized_by link to a workflow and each workflow is the target of exactly one (lenient: at most one).",
        anchor: "A plan is realized as a single Workflow.",
    },
    CatalogEntry {
        id: "R07",
        title: "task dependency DAG",
        description: "Workflow task_dependencies reference child tasks of that workflow and form a directed acyclic graph.",
        anchor: "Task Dependencies: Information about dependencies between tasks.",
    },
    CatalogEntry {
        id: "R08",
        title: "token metrics",
        description: "Every ended llm span reports integer input_tokens >= 0 and output_tokens >= 0.",
        anchor: "Metrics such as input_tokens, output_tokens, evaluation metrics.",
    },
    CatalogEntry {
        id: "R09",
        title: "guardrail monitoring",
        description: "Each guardrail span carries at least one monitors link and all of its targets resolve.",
        anchor: "The guardrail monitors all other spans.",
    },
    CatalogEntry {
        id: "R10",
        title: "task status transitions",
        description: "Task status events follow pending -> in_progress -> completed|failed and agree with the payload status.",
        anchor: "Task Status: the current status (e.g., pending, in progress, completed).",
    },
    CatalogEntry {
        id: "R11",
        title: "evaluation target",
        description: "Each evaluation span carries exactly one assesses link targeting an agent, planning or workflow span (lenient: at most one).",
        anchor: "Evaluation spans assess either a specific agent, a plan or a single workflow.",
    },
    CatalogEntry {
        id: "R12",
        title: "completion",
        description: "When completion is required, every span has a span_end.",
        anchor: "none; distinguishes streaming traces from complete ones",
    },
    CatalogEntry {
        id: "R13",
        title: "payload schema",
        description: "The payload variant matches the span kind and carries its required fields; strict mode also rejects payload fields the kind does not define.",
        anchor: "Per-kind span metadata lists (agent, reasoning, planning, workflow, task, tool, evaluation, guardrail, llm).",
    },
];

/// Human-facing description of a rule.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RuleDoc {
    pub rule_id: RuleId,
    pub title: &'static str,
    pub description: &'static str,
    pub anchor: &'static str,
}

pub fn explain_rule(rule_id: &str) -> Result<RuleDoc, UnknownRule> {
    rule_id.parse::<RuleId>().map(RuleId::doc)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Strict,
    Lenient,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Strict => "strict",
            Mode::Lenient => "lenient",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "strict" => Ok(Mode::Strict),
            "lenient" => Ok(Mode::Lenient),
            other => Err(format!(
                "unknown mode {other:?} (expected strict or lenient)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidatorConfig {
    pub mode: Mode,
    pub containment_epsilon_ns: u64,
    /// Allowed parent kinds for llm spans; `None` stands for "no parent".
    pub llm_parent_kinds: BTreeSet<Option<SpanKind>>,
    /// Allowed parent kinds for agent spans; `None` stands for "no parent".
    pub agent_parent_kinds: BTreeSet<Option<SpanKind>>,
    pub require_completion: bool,
    pub disabled_rules: BTreeSet<RuleId>,
}

pub const DEFAULT_EPSILON_NS: u64 = 1_000_000;

impl ValidatorConfig {
    /// Audit posture: exact cardinalities, no unknown payload fields, every
    /// span ended.
    pub fn strict() -> Self {
        Self {
            mode: Mode::Strict,
            containment_epsilon_ns: DEFAULT_EPSILON_NS,
            llm_parent_kinds: [Some(SpanKind::Planning), Some(SpanKind::Task)].into(),
            agent_parent_kinds: [None, Some(SpanKind::Agent)].into(),
            require_completion: true,
            disabled_rules: BTreeSet::new(),
        }
    }

    /// For in-flight traces: open spans and missing links are tolerated.
    pub fn lenient() -> Self {
        Self {
            mode: Mode::Lenient,
            require_completion: false,
            ..Self::strict()
        }
    }

    pub fn for_mode(mode: Mode) -> Self {
        match mode {
            Mode::Strict => Self::strict(),
            Mode::Lenient => Self::lenient(),
        }
    }

    pub fn with_epsilon(mut self, epsilon_ns: u64) -> Self {
        self.containment_epsilon_ns = epsilon_ns;
        self
    }

    pub fn disable(mut self, rule: RuleId) -> Self {
        self.disabled_rules.insert(rule);
        self
    }

    pub fn is_enabled(&self, rule: RuleId) -> bool {
        !self.disabled_rules.contains(&rule)
    }
}

impl Default for ValidatorConfig {
    fn default() -> Self {
        Self::strict()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub rule_id: RuleId,
    pub span_ids: Vec<SpanId>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub trace_id: TraceId,
    pub mode: Mode,
    pub violations: Vec<Violation>,
    pub checked_rules: Vec<RuleId>,
}

impl ValidationReport {
    pub fn is_conforming(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn violated_rules(&self) -> BTreeSet<RuleId> {
        self.violations.iter().map(|v| v.rule_id).collect()
    }
}

/// Runs every enabled rule over `trace`. Violations come back sorted by
/// rule id, then first span id, then message.
pub fn validate(trace: &Trace, config: &ValidatorConfig) -> ValidationReport {
    let ctx = rules::Context::new(trace, config);
    let checked_rules: Vec<RuleId> = RuleId::ALL
        .into_iter()
        .filter(|r| config.is_enabled(*r))
        .collect();
    let mut violations: Vec<Violation> = checked_rules
        .iter()
        .flat_map(|rule| ctx.check(*rule))
        .collect();
    violations.sort_by(|a, b| {
        (a.rule_id, a.span_ids.first(), &a.message).cmp(&(
            b.rule_id,
            b.span_ids.first(),
            &b.message,
        ))
    });
    ValidationReport {
        trace_id: trace.trace_id,
        mode: config.mode,
        violations,
        checked_rules,
    }
}

/// Validates each trace independently; reports come back in input order.
pub fn validate_corpus(
    traces: &[Trace],
    config: &ValidatorConfig,
    exec: Execution,
) -> Vec<ValidationReport> {
    exec.map(traces, |t| validate(t, config))
}
