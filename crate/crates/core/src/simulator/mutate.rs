//! One targeted edit per rule. Applied to a conforming trace, each edit
//! makes strict validation (default configuration) report exactly the
//! rules listed by [`expected_violations`]:
//!
//! | rule | edit                                                                      | expected |
//! |------|---------------------------------------------------------------------------|----------|
//! | R01  | re-root an evaluation or guardrail span, else add a second agent root     | R01      |
//! | R02  | point a non-task span's parent_id at a span that does not exist            | R02      |
//! | R03  | move a span's end 1 ms past its parent's end plus the default epsilon      | R03      |
//! | R04  | lift a tool (else task-level llm) span from its task to the workflow        | R04      |
//! | R05  | delete a reasoning span's generates link                                   | R05      |
//! | R06  | delete a planning span's realized_by link                                  | R06      |
//! | R07  | add the reverse of a task dependency (self-loop if there is none)          | R07      |
//! | R08  | drop input_tokens or output_tokens from an llm span_end                    | R08      |
//! | R09  | delete a guardrail span's monitors link                                    | R09      |
//! | R10  | rewrite a task's last status event to pending                              | R10      |
//! | R11  | delete an evaluation span's assesses link                                  | R11      |
//! | R12  | delete one span_end                                                        | R12      |
//! | R13  | add a foreign metadata field to a span payload                             | R13      |
//!
//! No edit cascades into a second rule, so every row expects only its own.

use std::collections::BTreeSet;

use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{Map, Value};

use crate::model::{
    assemble_trace, AgentPayload, AssemblyError, KindPayload, Record, Relation, SpanEnd, SpanId,
    SpanKind, SpanStart, Status, Trace,
};
use crate::validator::{RuleId, UnknownRule, DEFAULT_EPSILON_NS, STATUS_EVENT};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MutateError {
    #[error(transparent)]
    UnknownRule(#[from] UnknownRule),
    #[error("{rule} is not applicable: {reason}")]
    NotApplicable { rule: RuleId, reason: &'static str },
    #[error("input is not a single assemblable trace: {0}")]
    Assembly(#[from] AssemblyError),
}

/// Rules a mutation for `rule` is expected to trigger.
pub fn expected_violations(rule: RuleId) -> BTreeSet<RuleId> {
    [rule].into()
}

/// Applies the documented edit for `rule_id` to a conforming trace.
pub fn mutate(records: &[Record], rule_id: &str, seed: u64) -> Result<Vec<Record>, MutateError> {
    let rule: RuleId = rule_id.parse()?;
    let trace = assemble_trace(records)?;
    let mut m = Mutator {
        trace: &trace,
        records: records.to_vec(),
        rng: ChaCha8Rng::seed_from_u64(seed),
        rule,
    };
    m.apply()?;
    Ok(m.records)
}

struct Mutator<'a> {
    trace: &'a Trace,
    records: Vec<Record>,
    rng: ChaCha8Rng,
    rule: RuleId,
}

impl Mutator<'_> {
    fn not_applicable(&self, reason: &'static str) -> MutateError {
        MutateError::NotApplicable {
            rule: self.rule,
            reason,
        }
    }

    fn choose(
        &mut self,
        candidates: &[SpanId],
        reason: &'static str,
    ) -> Result<SpanId, MutateError> {
        candidates
            .choose(&mut self.rng)
            .copied()
            .ok_or_else(|| self.not_applicable(reason))
    }

    fn spans_where(&self, pred: impl Fn(&crate::model::Span) -> bool) -> Vec<SpanId> {
        self.trace
            .spans
            .values()
            .filter(|s| pred(s))
            .map(|s| s.span_id)
            .collect()
    }

    fn start_mut(&mut self, id: SpanId) -> &mut SpanStart {
        self.records
            .iter_mut()
            .find_map(|r| match r {
                Record::SpanStart(s) if s.span_id == id => Some(s),
                _ => None,
            })
            .expect("span_start exists for assembled span")
    }

    fn end_mut(&mut self, id: SpanId) -> &mut SpanEnd {
        self.records
            .iter_mut()
            .find_map(|r| match r {
                Record::SpanEnd(e) if e.span_id == id => Some(e),
                _ => None,
            })
            .expect("span_end exists for ended span")
    }

    fn fresh_id(&mut self) -> SpanId {
        loop {
            let id = SpanId::random(&mut self.rng);
            if !self.trace.spans.contains_key(&id) {
                return id;
            }
        }
    }

    /// Removes the first link of `relation` leaving `span`.
    fn drop_link(&mut self, span: SpanId, relation: Relation) {
        let index = self
            .records
            .iter()
            .position(
                |r| matches!(r, Record::Link(l) if l.span_id == span && l.relation == relation),
            )
            .expect("link exists");
        self.records.remove(index);
    }

    fn with_link(&self, kind: SpanKind, relation: Relation) -> Vec<SpanId> {
        self.spans_where(|s| s.kind == kind && s.links_with(relation).next().is_some())
    }

    fn apply(&mut self) -> Result<(), MutateError> {
        match self.rule {
            RuleId::R01 => {
                let mut candidates =
                    self.spans_where(|s| s.kind == SpanKind::Evaluation && s.parent_id.is_some());
                if candidates.is_empty() {
                    candidates = self
                        .spans_where(|s| s.kind == SpanKind::Guardrail && s.parent_id.is_some());
                }
                if candidates.is_empty() {
                    self.add_second_root();
                } else {
                    let id = self.choose(&candidates, "")?;
                    self.start_mut(id).parent_id = None;
                }
            }
            RuleId::R02 => {
                let candidates =
                    self.spans_where(|s| s.parent_id.is_some() && s.kind != SpanKind::Task);
                let id = self.choose(&candidates, "no non-root span outside a workflow's tasks")?;
                let missing = self.fresh_id();
                self.start_mut(id).parent_id = Some(missing);
            }
            RuleId::R03 => {
                let candidates = self.spans_where(|s| {
                    s.is_ended()
                        && s.parent_id
                            .and_then(|p| self.trace.span(p))
                            .is_some_and(|p| p.is_ended())
                });
                let id = self.choose(&candidates, "no ended span with an ended parent")?;
                let parent = self.trace.spans[&id]
                    .parent_id
                    .expect("candidate has a parent");
                let parent_end = self.trace.spans[&parent]
                    .end_time_unix_ns
                    .expect("candidate parent ended");
                self.end_mut(id).end_time_unix_ns = parent_end + DEFAULT_EPSILON_NS + 1_000_000;
            }
            RuleId::R04 => {
                let under_task_in_workflow = |kind: SpanKind| {
                    self.spans_where(|s| {
                        s.kind == kind
                            && s.parent_id
                                .and_then(|p| self.trace.span(p))
                                .is_some_and(|task| {
                                    task.kind == SpanKind::Task
                                        && task
                                            .parent_id
                                            .and_then(|w| self.trace.span(w))
                                            .is_some_and(|w| w.kind == SpanKind::Workflow)
                                })
                    })
                };
                let mut candidates = under_task_in_workflow(SpanKind::Tool);
                if candidates.is_empty() {
                    candidates = under_task_in_workflow(SpanKind::Llm);
                }
                let id = self.choose(&candidates, "no tool or llm span under a workflow task")?;
                let task = self.trace.spans[&id].parent_id.expect("has task parent");
                let workflow = self.trace.spans[&task].parent_id;
                self.start_mut(id).parent_id = workflow;
            }
            RuleId::R05 => {
                let candidates = self.with_link(SpanKind::Reasoning, Relation::Generates);
                let id = self.choose(&candidates, "no reasoning span")?;
                self.drop_link(id, Relation::Generates);
            }
            RuleId::R06 => {
                let candidates = self.with_link(SpanKind::Planning, Relation::RealizedBy);
                let id = self.choose(&candidates, "no planning span")?;
                self.drop_link(id, Relation::RealizedBy);
            }
            RuleId::R07 => {
                let children = self.trace.children();
                let candidates = self.spans_where(|s| {
                    s.kind == SpanKind::Workflow
                        && children.get(&s.span_id).is_some_and(|kids| {
                            kids.iter()
                                .any(|k| self.trace.spans[k].kind == SpanKind::Task)
                        })
                });
                let id = self.choose(&candidates, "no workflow with tasks")?;
                let first_task = children[&id]
                    .iter()
                    .copied()
                    .find(|k| self.trace.spans[k].kind == SpanKind::Task)
                    .expect("workflow has a task");
                let KindPayload::Workflow(payload) = &mut self.start_mut(id).payload else {
                    return Err(self.not_applicable("workflow payload has another variant"));
                };
                let edge = match payload.task_dependencies.first() {
                    Some(&(a, b)) => (b, a),
                    None => (first_task, first_task),
                };
                payload.task_dependencies.push(edge);
            }
            RuleId::R08 => {
                let candidates = self.spans_where(|s| s.kind == SpanKind::Llm && s.is_ended());
                let id = self.choose(&candidates, "no ended llm span")?;
                let metric = *["input_tokens", "output_tokens"]
                    .choose(&mut self.rng)
                    .expect("two metrics");
                self.end_mut(id).metrics.remove(metric);
            }
            RuleId::R09 => {
                let candidates = self.with_link(SpanKind::Guardrail, Relation::Monitors);
                let id = self.choose(&candidates, "trace has no guardrail span")?;
                self.drop_link(id, Relation::Monitors);
            }
            RuleId::R10 => {
                let candidates = self.spans_where(|s| {
                    s.kind == SpanKind::Task
                        && s.events.iter().filter(|e| e.name == STATUS_EVENT).count() >= 2
                });
                let id = self.choose(&candidates, "no task with status transitions")?;
                let last = self
                    .records
                    .iter_mut()
                    .filter_map(|r| match r {
                        Record::Event(e) if e.span_id == id && e.name == STATUS_EVENT => Some(e),
                        _ => None,
                    })
                    .max_by_key(|e| e.time_unix_ns)
                    .expect("status events exist");
                last.attributes
                    .insert(STATUS_EVENT.into(), Value::String("pending".into()));
            }
            RuleId::R11 => {
                let candidates = self.with_link(SpanKind::Evaluation, Relation::Assesses);
                let id = self.choose(&candidates, "trace has no evaluation span")?;
                self.drop_link(id, Relation::Assesses);
            }
            RuleId::R12 => {
                let candidates = self.spans_where(|s| s.is_ended());
                let id = self.choose(&candidates, "no ended span")?;
                self.records
                    .retain(|r| !matches!(r, Record::SpanEnd(e) if e.span_id == id));
            }
            RuleId::R13 => {
                let candidates = self.spans_where(|_| true);
                let id = self.choose(&candidates, "empty trace")?;
                let start = self.start_mut(id);
                let foreign = if start.kind == SpanKind::Agent {
                    "tool_name"
                } else {
                    "role"
                };
                start
                    .payload
                    .extra_mut()
                    .insert(foreign.into(), Value::String("intruder".into()));
            }
        }
        Ok(())
    }

    fn add_second_root(&mut self) {
        let root = self
            .trace
            .primary_root()
            .expect("assembled trace has a span");
        let (start, end) = (root.start_time_unix_ns, root.end_time_unix_ns);
        let id = self.fresh_id();
        let trace_id = self.trace.trace_id;
        self.records.push(Record::SpanStart(SpanStart {
            trace_id,
            span_id: id,
            parent_id: None,
            name: "agent.shadow".into(),
            kind: SpanKind::Agent,
            start_time_unix_ns: start,
            inputs: None,
            payload: KindPayload::Agent(AgentPayload::default()),
            extra: Map::new(),
        }));
        self.records.push(Record::SpanEnd(SpanEnd {
            trace_id,
            span_id: id,
            end_time_unix_ns: end.unwrap_or(start),
            status: Status::Ok,
            error: None,
            metrics: Default::default(),
            outputs: None,
            extra: Map::new(),
        }));
    }
}
