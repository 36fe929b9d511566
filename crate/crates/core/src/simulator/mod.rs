//! Seeded generator of conforming synthetic agent traces, and mutation
//! operators that each break exactly one validation rule.
//!
//! Every trace has one agent root. Per plan the generator emits a reasoning
//! span that `generates` a planning span, which is `realized_by` a workflow
//! whose tasks run sequentially with a dependency chain between them. Each
//! task holds its tool and llm calls; a guardrail may follow any tool call.
//! An optional evaluation span closes the run. Output depends only on the
//! shape and its seed.

mod mutate;

use std::collections::HashSet;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Map, Number, Value};

use crate::exec::Execution;
use crate::model::{
    AgentPayload, ErrorInfo, EvalMode, EvaluationPayload, EventRecord, GuardrailPayload,
    KindPayload, LinkRecord, LinkTarget, LlmPayload, PlanningPayload, ReasoningPayload, Record,
    Relation, SpanEnd, SpanId, SpanStart, Status, TaskPayload, TaskStatus, ToolPayload, TraceId,
    WorkflowPayload,
};
use crate::validator::STATUS_EVENT;

pub use mutate::{expected_violations, mutate, MutateError};

/// Synthetic clocks start here (2023-11-14T22:13:20Z) plus a seeded offset.
pub const BASE_EPOCH_NS: u64 = 1_700_000_000_000_000_000;

pub const TOOL_NAMES: &[&str] = &[
    "search",
    "calculator",
    "code_exec",
    "web_fetch",
    "sql_query",
];
pub const MODEL_NAMES: &[&str] = &["gpt-4o", "claude-3-5-sonnet", "llama-3-70b"];
pub const GUARDRAIL_ACTIONS: &[&str] = &["block", "validation", "filter"];
const TASK_DESCRIPTIONS: &[&str] = &[
    "collect sources",
    "summarize findings",
    "compute totals",
    "draft answer",
    "verify citations",
];
const KNOWLEDGE_BASES: &[&str] = &["kb://product-docs", "kb://faq", "kb://tickets"];
const PROMPT_NAMES: &[&str] = &["plan", "task", "answer"];
const ROLES: &[&str] = &["researcher", "coder", "analyst"];

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("invalid shape: {0}")]
pub struct InvalidShape(pub String);

#[derive(Debug, Clone, PartialEq)]
pub struct ShapeConfig {
    pub seed: u64,
    pub plans_per_agent: u32,
    pub tasks_per_workflow: u32,
    pub tools_per_task: u32,
    pub llm_calls_per_task: u32,
    pub llm_calls_per_plan: u32,
    pub kb_links: u32,
    pub guardrail_probability: f64,
    pub error_probability: f64,
    pub include_evaluation: bool,
}

impl ShapeConfig {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), InvalidShape> {
        for (name, p) in [
            ("guardrail_probability", self.guardrail_probability),
            ("error_probability", self.error_probability),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(InvalidShape(format!("{name} must be in [0, 1], got {p}")));
            }
        }
        Ok(())
    }
}

impl Default for ShapeConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            plans_per_agent: 1,
            tasks_per_workflow: 3,
            tools_per_task: 1,
            llm_calls_per_task: 1,
            llm_calls_per_plan: 1,
            kb_links: 1,
            guardrail_probability: 0.2,
            error_probability: 0.1,
            include_evaluation: true,
        }
    }
}

/// Generates the records of one trace, in emission order.
pub fn generate(shape: &ShapeConfig) -> Result<Vec<Record>, InvalidShape> {
    shape.validate()?;
    let mut g = Generator::new(shape);
    g.run();
    Ok(g.records)
}

/// Seed of the `index`-th trace of a corpus rooted at `seed` (splitmix64).
pub fn corpus_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Generates `traces` traces, one record list each.
pub fn generate_corpus(
    shape: &ShapeConfig,
    traces: u64,
    exec: Execution,
) -> Result<Vec<Vec<Record>>, InvalidShape> {
    shape.validate()?;
    Ok(exec.map_range(traces, |i| {
        let shape = ShapeConfig {
            seed: corpus_seed(shape.seed, i),
            ..shape.clone()
        };
        generate(&shape).expect("shape validated above")
    }))
}

struct Generator<'a> {
    shape: &'a ShapeConfig,
    rng: ChaCha8Rng,
    trace_id: TraceId,
    clock: u64,
    used: HashSet<SpanId>,
    records: Vec<Record>,
}

impl<'a> Generator<'a> {
    fn new(shape: &'a ShapeConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(shape.seed);
        let trace_id = TraceId::random(&mut rng);
        let clock = BASE_EPOCH_NS + rng.random_range(0..30 * 86_400 * 1_000_000_000u64);
        Self {
            shape,
            rng,
            trace_id,
            clock,
            used: HashSet::new(),
            records: Vec::new(),
        }
    }

    fn new_id(&mut self) -> SpanId {
        loop {
            let id = SpanId::random(&mut self.rng);
            if self.used.insert(id) {
                return id;
            }
        }
    }

    /// Small gap between consecutive operations.
    fn tick(&mut self) -> u64 {
        self.clock += self.rng.random_range(10_000..500_000);
        self.clock
    }

    /// Time spent doing leaf work.
    fn work(&mut self) -> u64 {
        self.clock += self.rng.random_range(1_000_000..40_000_000);
        self.clock
    }

    fn pick<T: Copy>(&mut self, items: &[T]) -> T {
        *items.choose(&mut self.rng).expect("non-empty vocabulary")
    }

    fn open(
        &mut self,
        id: SpanId,
        parent: Option<SpanId>,
        name: &str,
        payload: KindPayload,
        inputs: Option<Value>,
    ) {
        let start = self.tick();
        self.records.push(Record::SpanStart(SpanStart {
            trace_id: self.trace_id,
            span_id: id,
            parent_id: parent,
            name: name.to_string(),
            kind: payload.kind(),
            start_time_unix_ns: start,
            inputs,
            payload,
            extra: Map::new(),
        }));
    }

    fn close(
        &mut self,
        id: SpanId,
        error: Option<ErrorInfo>,
        metrics: &[(&str, u64)],
        outputs: Option<Value>,
    ) {
        let end = self.tick();
        self.records.push(Record::SpanEnd(SpanEnd {
            trace_id: self.trace_id,
            span_id: id,
            end_time_unix_ns: end,
            status: if error.is_some() {
                Status::Error
            } else {
                Status::Ok
            },
            error,
            metrics: metrics
                .iter()
                .map(|(k, v)| (k.to_string(), Number::from(*v)))
                .collect(),
            outputs,
            extra: Map::new(),
        }));
    }

    fn link(&mut self, from: SpanId, target: LinkTarget, relation: Relation) {
        self.records.push(Record::Link(LinkRecord {
            trace_id: self.trace_id,
            span_id: from,
            target,
            relation,
            extra: Map::new(),
        }));
    }

    fn status_event(&mut self, task: SpanId, status: TaskStatus) {
        let time = self.tick();
        let mut attributes = Map::new();
        attributes.insert(STATUS_EVENT.into(), Value::String(status.as_str().into()));
        self.records.push(Record::Event(EventRecord {
            trace_id: self.trace_id,
            span_id: task,
            time_unix_ns: time,
            name: STATUS_EVENT.into(),
            attributes,
            extra: Map::new(),
        }));
    }

    fn run(&mut self) {
        let agent = self.new_id();
        let role = self.pick(ROLES);
        self.open(
            agent,
            None,
            "agent.run",
            KindPayload::Agent(AgentPayload {
                role: Some(role.into()),
                persona: Some("concise and careful".into()),
                extra: Map::new(),
            }),
            Some(json!({"goal": "answer the user's question"})),
        );
        for i in 0..self.shape.kb_links {
            let kb = KNOWLEDGE_BASES[i as usize % KNOWLEDGE_BASES.len()];
            self.link(
                agent,
                LinkTarget::Resource(kb.into()),
                Relation::UsesKnowledgeBase,
            );
        }

        let mut assessable = vec![agent];
        for plan in 0..self.shape.plans_per_agent {
            let (planning, workflow) = self.plan(agent, plan);
            assessable.push(planning);
            assessable.push(workflow);
        }

        if self.shape.include_evaluation {
            let eval = self.new_id();
            let target = self.pick(&assessable);
            let mode = self.pick(EvalMode::ALL);
            let total = self.rng.random_range(1..=10u64);
            let passed = self.rng.random_range(0..=total);
            let mut metrics = std::collections::BTreeMap::new();
            metrics.insert("passed".to_string(), Number::from(passed));
            metrics.insert("total".to_string(), Number::from(total));
            self.open(
                eval,
                Some(agent),
                "evaluate",
                KindPayload::Evaluation(EvaluationPayload {
                    test_cases: vec!["expected answer present".into()],
                    testing_metrics: metrics,
                    testing_results: Some(format!("{passed}/{total} checks passed")),
                    eval_mode: Some(mode),
                    extra: Map::new(),
                }),
                None,
            );
            self.link(eval, LinkTarget::span(target), Relation::Assesses);
            self.work();
            self.close(eval, None, &[], None);
        }

        self.close(agent, None, &[], Some(json!({"answer": "done"})));
    }

    /// Emits reasoning, planning and workflow for one plan; returns the
    /// planning and workflow ids.
    fn plan(&mut self, agent: SpanId, index: u32) -> (SpanId, SpanId) {
        let reasoning = self.new_id();
        self.open(
            reasoning,
            Some(agent),
            "reason",
            KindPayload::Reasoning(ReasoningPayload {
                context: Some(format!("plan {index} context")),
                retrieved_knowledge: Some("relevant passages".into()),
                inference_rules: Some("stay within the product scope".into()),
                outcome: Some("decompose the request".into()),
                extra: Map::new(),
            }),
            None,
        );
        self.work();
        self.close(reasoning, None, &[], None);

        let planning = self.new_id();
        self.open(
            planning,
            Some(agent),
            "plan",
            KindPayload::Planning(PlanningPayload {
                goal: Some("answer the user's question".into()),
                constraints: vec!["budget 10k tokens".into()],
                context: Some(format!("plan {index}")),
                historical_plans: Vec::new(),
                extra: Map::new(),
            }),
            None,
        );
        self.link(reasoning, LinkTarget::span(planning), Relation::Generates);
        for _ in 0..self.shape.llm_calls_per_plan {
            self.llm(planning);
        }
        self.close(planning, None, &[], None);

        let workflow = self.new_id();
        let tasks: Vec<SpanId> = (0..self.shape.tasks_per_workflow)
            .map(|_| self.new_id())
            .collect();
        let task_dependencies = tasks.windows(2).map(|w| (w[0], w[1])).collect();
        self.open(
            workflow,
            Some(agent),
            "workflow",
            KindPayload::Workflow(WorkflowPayload {
                task_dependencies,
                operational_context: Some("sequential execution".into()),
                past_execution_history: Vec::new(),
                extra: Map::new(),
            }),
            None,
        );
        self.link(planning, LinkTarget::span(workflow), Relation::RealizedBy);
        for task in tasks {
            self.task(workflow, task);
        }
        self.close(workflow, None, &[], None);
        (planning, workflow)
    }

    fn task(&mut self, workflow: SpanId, task: SpanId) {
        let failures: Vec<bool> = (0..self.shape.tools_per_task)
            .map(|_| self.rng.random_bool(self.shape.error_probability))
            .collect();
        let failed = failures.iter().any(|f| *f);
        let final_status = if failed {
            TaskStatus::Failed
        } else {
            TaskStatus::Completed
        };
        let description = self.pick(TASK_DESCRIPTIONS);
        self.open(
            task,
            Some(workflow),
            description,
            KindPayload::Task(TaskPayload {
                description: Some(description.into()),
                status: Some(final_status),
                extra: Map::new(),
            }),
            None,
        );
        self.status_event(task, TaskStatus::Pending);
        self.status_event(task, TaskStatus::InProgress);

        let mut failing_tool = None;
        for fails in failures {
            let tool = self.new_id();
            let tool_name = self.pick(TOOL_NAMES);
            let mut configuration = Map::new();
            configuration.insert("timeout_ms".into(), json!(5000));
            self.open(
                tool,
                Some(task),
                tool_name,
                KindPayload::Tool(ToolPayload {
                    tool_name: Some(tool_name.into()),
                    tool_version: Some("1.0".into()),
                    configuration,
                    extra: Map::new(),
                }),
                Some(json!({"query": description})),
            );
            self.work();
            let error = fails.then(|| ErrorInfo {
                error_type: "ToolExecutionError".into(),
                message: format!("{tool_name} failed"),
                traceback: Some(format!("at {tool_name}::call")),
            });
            if fails {
                failing_tool.get_or_insert(tool_name);
            }
            self.close(tool, error, &[], Some(json!({"result": "ok"})));

            if self.rng.random_bool(self.shape.guardrail_probability) {
                self.guardrail(task, tool);
            }
        }
        for _ in 0..self.shape.llm_calls_per_task {
            self.llm(task);
        }

        self.status_event(task, final_status);
        let error = failing_tool.map(|tool| ErrorInfo {
            error_type: "TaskFailed".into(),
            message: format!("tool {tool} failed"),
            traceback: None,
        });
        self.close(task, error, &[], None);
    }

    fn guardrail(&mut self, parent: SpanId, target: SpanId) {
        let guard = self.new_id();
        let action = self.pick(GUARDRAIL_ACTIONS);
        self.open(
            guard,
            Some(parent),
            "guardrail",
            KindPayload::Guardrail(GuardrailPayload {
                actions: vec![action.into()],
                targets: vec![target],
                extra: Map::new(),
            }),
            None,
        );
        self.link(guard, LinkTarget::span(target), Relation::Monitors);
        self.close(guard, None, &[], None);
    }

    fn llm(&mut self, parent: SpanId) {
        let id = self.new_id();
        let model = self.pick(MODEL_NAMES);
        let temperature = self.pick(&[0.0, 0.2, 0.7]);
        let prompt = self.pick(PROMPT_NAMES);
        let prompt_version = self.rng.random_range(1..=3u64);
        let mut parameters = Map::new();
        parameters.insert("temperature".into(), json!(temperature));
        parameters.insert("max_tokens".into(), json!(1024));
        self.open(
            id,
            Some(parent),
            "llm.call",
            KindPayload::Llm(LlmPayload {
                model_name: Some(model.into()),
                model_version: Some("2024-08".into()),
                parameters,
                prompt_name: Some(prompt.into()),
                prompt_version: Some(prompt_version),
                extra: Map::new(),
            }),
            Some(json!({"prompt": format!("{prompt} v{prompt_version}")})),
        );
        self.work();
        let input_tokens = self.rng.random_range(50..4000u64);
        let output_tokens = self.rng.random_range(10..1500u64);
        self.close(
            id,
            None,
            &[
                ("input_tokens", input_tokens),
                ("output_tokens", output_tokens),
            ],
            Some(json!({"completion": "..."})),
        );
    }
}
