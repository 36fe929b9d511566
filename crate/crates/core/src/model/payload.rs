//! Kind-specific span metadata.
//!
//! A payload on the wire is a plain object; which variant it decodes into is
//! decided by the span's `kind`. Keys that the kind does not define are kept
//! in `extra` so tolerant readers lose nothing and strict validation can flag
//! them.

use std::collections::BTreeMap;

use serde::Serialize;
use serde_json::{Map, Number, Value};

use super::fields::{FieldResult, Fields};
use super::ids::SpanId;
use super::kinds::{EvalMode, SpanKind, TaskStatus};

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct AgentPayload {
    pub role: Option<String>,
    pub persona: Option<String>,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ReasoningPayload {
    pub context: Option<String>,
    pub retrieved_knowledge: Option<String>,
    pub inference_rules: Option<String>,
    pub outcome: Option<String>,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct PlanningPayload {
    /// Required.
    pub goal: Option<String>,
    pub constraints: Vec<String>,
    pub context: Option<String>,
    pub historical_plans: Vec<String>,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct WorkflowPayload {
    /// `(prerequisite, dependent)` edges between child task spans.
    pub task_dependencies: Vec<(SpanId, SpanId)>,
    pub operational_context: Option<String>,
    pub past_execution_history: Vec<String>,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct TaskPayload {
    /// Required.
    pub description: Option<String>,
    pub status: Option<TaskStatus>,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ToolPayload {
    /// Required.
    pub tool_name: Option<String>,
    pub tool_version: Option<String>,
    pub configuration: Map<String, Value>,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct EvaluationPayload {
    pub test_cases: Vec<String>,
    pub testing_metrics: BTreeMap<String, Number>,
    pub testing_results: Option<String>,
    pub eval_mode: Option<EvalMode>,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct GuardrailPayload {
    /// e.g. block, validation, filter
    pub actions: Vec<String>,
    pub targets: Vec<SpanId>,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct LlmPayload {
    /// Required.
    pub model_name: Option<String>,
    pub model_version: Option<String>,
    /// Sampling settings such as temperature and max_tokens.
    pub parameters: Map<String, Value>,
    pub prompt_name: Option<String>,
    pub prompt_version: Option<u64>,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum KindPayload {
    Agent(AgentPayload),
    Reasoning(ReasoningPayload),
    Planning(PlanningPayload),
    Workflow(WorkflowPayload),
    Task(TaskPayload),
    Tool(ToolPayload),
    Evaluation(EvaluationPayload),
    Guardrail(GuardrailPayload),
    Llm(LlmPayload),
}

impl KindPayload {
    /// Field names each kind defines, in declaration order.
    pub fn field_names(kind: SpanKind) -> &'static [&'static str] {
        match kind {
            SpanKind::Agent => &["role", "persona"],
            SpanKind::Reasoning => &[
                "context",
                "retrieved_knowledge",
                "inference_rules",
                "outcome",
            ],
            SpanKind::Planning => &["goal", "constraints", "context", "historical_plans"],
            SpanKind::Workflow => &[
                "task_dependencies",
                "operational_context",
                "past_execution_history",
            ],
            SpanKind::Task => &["description", "status"],
            SpanKind::Tool => &["tool_name", "tool_version", "configuration"],
            SpanKind::Evaluation => &[
                "test_cases",
                "testing_metrics",
                "testing_results",
                "eval_mode",
            ],
            SpanKind::Guardrail => &["actions", "targets"],
            SpanKind::Llm => &[
                "model_name",
                "model_version",
                "parameters",
                "prompt_name",
                "prompt_version",
            ],
        }
    }

    pub fn required_fields(kind: SpanKind) -> &'static [&'static str] {
        match kind {
            SpanKind::Planning => &["goal"],
            SpanKind::Task => &["description"],
            SpanKind::Tool => &["tool_name"],
            SpanKind::Llm => &["model_name"],
            _ => &[],
        }
    }

    /// An empty payload of the given kind.
    pub fn empty(kind: SpanKind) -> Self {
        match kind {
            SpanKind::Agent => Self::Agent(Default::default()),
            SpanKind::Reasoning => Self::Reasoning(Default::default()),
            SpanKind::Planning => Self::Planning(Default::default()),
            SpanKind::Workflow => Self::Workflow(Default::default()),
            SpanKind::Task => Self::Task(Default::default()),
            SpanKind::Tool => Self::Tool(Default::default()),
            SpanKind::Evaluation => Self::Evaluation(Default::default()),
            SpanKind::Guardrail => Self::Guardrail(Default::default()),
            SpanKind::Llm => Self::Llm(Default::default()),
        }
    }

    pub fn kind(&self) -> SpanKind {
        match self {
            Self::Agent(_) => SpanKind::Agent,
            Self::Reasoning(_) => SpanKind::Reasoning,
            Self::Planning(_) => SpanKind::Planning,
            Self::Workflow(_) => SpanKind::Workflow,
            Self::Task(_) => SpanKind::Task,
            Self::Tool(_) => SpanKind::Tool,
            Self::Evaluation(_) => SpanKind::Evaluation,
            Self::Guardrail(_) => SpanKind::Guardrail,
            Self::Llm(_) => SpanKind::Llm,
        }
    }

    /// Keys present on the wire that this kind does not define.
    pub fn extra(&self) -> &Map<String, Value> {
        match self {
            Self::Agent(p) => &p.extra,
            Self::Reasoning(p) => &p.extra,
            Self::Planning(p) => &p.extra,
            Self::Workflow(p) => &p.extra,
            Self::Task(p) => &p.extra,
            Self::Tool(p) => &p.extra,
            Self::Evaluation(p) => &p.extra,
            Self::Guardrail(p) => &p.extra,
            Self::Llm(p) => &p.extra,
        }
    }

    pub fn extra_mut(&mut self) -> &mut Map<String, Value> {
        match self {
            Self::Agent(p) => &mut p.extra,
            Self::Reasoning(p) => &mut p.extra,
            Self::Planning(p) => &mut p.extra,
            Self::Workflow(p) => &mut p.extra,
            Self::Task(p) => &mut p.extra,
            Self::Tool(p) => &mut p.extra,
            Self::Evaluation(p) => &mut p.extra,
            Self::Guardrail(p) => &mut p.extra,
            Self::Llm(p) => &mut p.extra,
        }
    }

    /// Required fields of this variant that are absent or empty.
    pub fn missing_required(&self) -> Vec<&'static str> {
        let blank = |s: &Option<String>| s.as_deref().is_none_or(|s| s.trim().is_empty());
        let mut missing = Vec::new();
        match self {
            Self::Planning(p) if blank(&p.goal) => missing.push("goal"),
            Self::Task(p) if blank(&p.description) => missing.push("description"),
            Self::Tool(p) if blank(&p.tool_name) => missing.push("tool_name"),
            Self::Llm(p) if blank(&p.model_name) => missing.push("model_name"),
            _ => {}
        }
        missing
    }

    /// Decodes `value` as the payload of a span of `kind`. A missing or null
    /// payload decodes to the empty payload.
    pub fn from_value(kind: SpanKind, value: Option<Value>) -> FieldResult<Self> {
        let mut f = match value {
            None | Some(Value::Null) => Fields::empty("payload"),
            Some(v) => Fields::new(v, "payload")?,
        };
        let payload = match kind {
            SpanKind::Agent => Self::Agent(AgentPayload {
                role: f.opt_string("role")?,
                persona: f.opt_string("persona")?,
                extra: Map::new(),
            }),
            SpanKind::Reasoning => Self::Reasoning(ReasoningPayload {
                context: f.opt_string("context")?,
                retrieved_knowledge: f.opt_string("retrieved_knowledge")?,
                inference_rules: f.opt_string("inference_rules")?,
                outcome: f.opt_string("outcome")?,
                extra: Map::new(),
            }),
            SpanKind::Planning => Self::Planning(PlanningPayload {
                goal: f.opt_string("goal")?,
                constraints: f.string_list("constraints")?,
                context: f.opt_string("context")?,
                historical_plans: f.string_list("historical_plans")?,
                extra: Map::new(),
            }),
            SpanKind::Workflow => Self::Workflow(WorkflowPayload {
                task_dependencies: f.span_id_pairs("task_dependencies")?,
                operational_context: f.opt_string("operational_context")?,
                past_execution_history: f.string_list("past_execution_history")?,
                extra: Map::new(),
            }),
            SpanKind::Task => Self::Task(TaskPayload {
                description: f.opt_string("description")?,
                status: f.opt_parsed("status")?,
                extra: Map::new(),
            }),
            SpanKind::Tool => Self::Tool(ToolPayload {
                tool_name: f.opt_string("tool_name")?,
                tool_version: f.opt_string("tool_version")?,
                configuration: f.object("configuration")?,
                extra: Map::new(),
            }),
            SpanKind::Evaluation => Self::Evaluation(EvaluationPayload {
                test_cases: f.string_list("test_cases")?,
                testing_metrics: f.number_map("testing_metrics")?,
                testing_results: f.opt_string("testing_results")?,
                eval_mode: f.opt_parsed("eval_mode")?,
                extra: Map::new(),
            }),
            SpanKind::Guardrail => Self::Guardrail(GuardrailPayload {
                actions: f.string_list("actions")?,
                targets: f.span_id_list("targets")?,
                extra: Map::new(),
            }),
            SpanKind::Llm => Self::Llm(LlmPayload {
                model_name: f.opt_string("model_name")?,
                model_version: f.opt_string("model_version")?,
                parameters: f.object("parameters")?,
                prompt_name: f.opt_string("prompt_name")?,
                prompt_version: f.opt_u64("prompt_version")?,
                extra: Map::new(),
            }),
        };
        let mut payload = payload;
        *payload.extra_mut() = f.into_rest();
        Ok(payload)
    }
}
