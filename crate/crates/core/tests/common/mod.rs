//! Wire-level fixture builder. Records are written as JSON lines and read
//! back through the parser, so fixtures exercise the grammar rather than the
//! Rust structs.

#![allow(dead_code)]

use agenttrace_core::model::{assemble_trace, parse_record, Record, Trace};
use serde_json::{json, Value};

pub const MS: u64 = 1_000_000;
pub const T0: u64 = 1_700_000_000_000_000_000;

pub fn sid(n: u64) -> String {
    format!("{n:016x}")
}

pub fn tid(n: u64) -> String {
    format!("{n:032x}")
}

pub struct Fixture {
    pub trace_id: String,
    pub lines: Vec<Value>,
}

impl Fixture {
    pub fn new(trace: u64) -> Self {
        Self {
            trace_id: tid(trace),
            lines: Vec::new(),
        }
    }

    pub fn start(
        &mut self,
        span: u64,
        parent: Option<u64>,
        kind: &str,
        name: &str,
        at_ms: u64,
        payload: Value,
    ) -> &mut Self {
        self.lines.push(json!({
            "record_type": "span_start",
            "trace_id": self.trace_id,
            "span_id": sid(span),
            "parent_id": parent.map(sid),
            "name": name,
            "kind": kind,
            "start_time_unix_ns": T0 + at_ms * MS,
            "payload": payload,
        }));
        self
    }

    pub fn end(&mut self, span: u64, at_ms: u64, metrics: Value) -> &mut Self {
        self.lines.push(json!({
            "record_type": "span_end",
            "trace_id": self.trace_id,
            "span_id": sid(span),
            "end_time_unix_ns": T0 + at_ms * MS,
            "status": "ok",
            "metrics": metrics,
        }));
        self
    }

    pub fn end_error(&mut self, span: u64, at_ms: u64) -> &mut Self {
        self.lines.push(json!({
            "record_type": "span_end",
            "trace_id": self.trace_id,
            "span_id": sid(span),
            "end_time_unix_ns": T0 + at_ms * MS,
            "status": "error",
            "error": {"type": "ToolError", "message": "failed"},
        }));
        self
    }

    pub fn link(&mut self, from: u64, to: u64, relation: &str) -> &mut Self {
        self.lines.push(json!({
            "record_type": "link",
            "trace_id": self.trace_id,
            "span_id": sid(from),
            "target_span_id": sid(to),
            "relation": relation,
        }));
        self
    }

    pub fn resource(&mut self, from: u64, resource: &str, relation: &str) -> &mut Self {
        self.lines.push(json!({
            "record_type": "link",
            "trace_id": self.trace_id,
            "span_id": sid(from),
            "resource": resource,
            "relation": relation,
        }));
        self
    }

    pub fn status(&mut self, task: u64, at_ms: u64, status: &str) -> &mut Self {
        self.lines.push(json!({
            "record_type": "event",
            "trace_id": self.trace_id,
            "span_id": sid(task),
            "time_unix_ns": T0 + at_ms * MS,
            "name": "status",
            "attributes": {"status": status},
        }));
        self
    }

    pub fn ndjson(&self) -> String {
        self.lines.iter().map(|l| format!("{l}\n")).collect()
    }

    pub fn records(&self) -> Vec<Record> {
        self.lines
            .iter()
            .map(|l| parse_record(&l.to_string()).expect("fixture line parses"))
            .collect()
    }

    pub fn trace(&self) -> Trace {
        assemble_trace(&self.records()).expect("fixture assembles")
    }
}

/// A conforming trace built by hand: one agent with a reasoning, planning
/// and workflow chain, two dependent tasks each with a tool, one llm under
/// the plan and one under a task, a guardrail on the first tool and an
/// evaluation of the agent.
pub fn conforming(trace: u64) -> Fixture {
    let mut f = Fixture::new(trace);
    f.start(
        1,
        None,
        "agent",
        "run",
        0,
        json!({"role": "coder", "persona": "terse"}),
    )
    .resource(1, "kb://docs", "uses_knowledge_base")
    .start(
        2,
        Some(1),
        "reasoning",
        "think",
        1,
        json!({"outcome": "plan it"}),
    )
    .end(2, 5, json!({}))
    .start(3, Some(1), "planning", "plan", 6, json!({"goal": "answer"}))
    .start(
        4,
        Some(3),
        "llm",
        "draft plan",
        7,
        json!({"model_name": "m1"}),
    )
    .end(4, 9, json!({"input_tokens": 1000, "output_tokens": 500}))
    .end(3, 10, json!({}))
    .link(2, 3, "generates")
    .start(
        5,
        Some(1),
        "workflow",
        "wf",
        11,
        json!({"task_dependencies": [[sid(6), sid(7)]]}),
    )
    .link(3, 5, "realized_by")
    .start(
        6,
        Some(5),
        "task",
        "fetch",
        12,
        json!({"description": "fetch", "status": "completed"}),
    )
    .status(6, 12, "in_progress")
    .start(
        8,
        Some(6),
        "tool",
        "search",
        13,
        json!({"tool_name": "search"}),
    )
    .start(
        11,
        Some(6),
        "guardrail",
        "pii",
        14,
        json!({"actions": ["block"], "targets": [sid(8)]}),
    )
    .link(11, 8, "monitors")
    .end(11, 15, json!({}))
    .end(8, 16, json!({}))
    .status(6, 17, "completed")
    .end(6, 18, json!({}))
    .start(
        7,
        Some(5),
        "task",
        "compute",
        19,
        json!({"description": "compute", "status": "completed"}),
    )
    .status(7, 19, "in_progress")
    .start(9, Some(7), "tool", "calc", 20, json!({"tool_name": "calc"}))
    .end(9, 22, json!({}))
    .start(
        10,
        Some(7),
        "llm",
        "answer",
        23,
        json!({"model_name": "m2"}),
    )
    .end(10, 25, json!({"input_tokens": 200, "output_tokens": 100}))
    .status(7, 26, "completed")
    .end(7, 27, json!({}))
    .end(5, 28, json!({}))
    .start(
        12,
        Some(1),
        "evaluation",
        "judge",
        29,
        json!({"eval_mode": "final_response", "testing_metrics": {"passed": 3, "total": 4}}),
    )
    .link(12, 1, "assesses")
    .end(12, 30, json!({}))
    .end(1, 31, json!({}));
    f
}

/// Every metadata field of every kind, populated.
pub fn taxonomy() -> Fixture {
    let mut f = Fixture::new(0x7a);
    f.start(1, None, "agent", "agent", 0, json!({"role": "researcher", "persona": "careful"}))
        .resource(1, "kb://articles", "uses_knowledge_base")
        .start(2, Some(1), "reasoning", "reasoning", 1, json!({
            "context": "question", "retrieved_knowledge": "three articles",
            "inference_rules": "cite sources", "outcome": "needs a plan"}))
        .end(2, 2, json!({}))
        .start(3, Some(1), "planning", "planning", 3, json!({
            "goal": "answer", "constraints": ["under 100 words"], "context": "chat",
            "historical_plans": ["plan v1"]}))
        .link(2, 3, "generates")
        .start(4, Some(3), "llm", "llm", 4, json!({
            "model_name": "m1", "model_version": "2024-01", "parameters": {"temperature": 0, "max_tokens": 256},
            "prompt_name": "plan", "prompt_version": 2}))
        .end(4, 5, json!({"input_tokens": 10, "output_tokens": 5}))
        .end(3, 6, json!({}))
        .start(5, Some(1), "workflow", "workflow", 7, json!({
            "task_dependencies": [], "operational_context": "batch",
            "past_execution_history": ["run 1"]}))
        .link(3, 5, "realized_by")
        .start(6, Some(5), "task", "task", 8, json!({"description": "look up", "status": "completed"}))
        .status(6, 8, "in_progress")
        .start(7, Some(6), "tool", "tool", 9, json!({
            "tool_name": "search", "tool_version": "1.2", "configuration": {"timeout_ms": 100}}))
        .start(8, Some(6), "guardrail", "guardrail", 10, json!({
            "actions": ["block", "validation", "filter"], "targets": [sid(7)]}))
        .link(8, 7, "monitors")
        .end(8, 11, json!({}))
        .end(7, 12, json!({}))
        .status(6, 13, "completed")
        .end(6, 14, json!({}))
        .end(5, 15, json!({}))
        .start(9, Some(1), "evaluation", "evaluation", 16, json!({
            "test_cases": ["case 1"], "testing_metrics": {"accuracy": 1},
            "testing_results": "pass", "eval_mode": "trajectory"}))
        .link(9, 5, "assesses")
        .end(9, 17, json!({}))
        .end(1, 18, json!({}));
    f
}
