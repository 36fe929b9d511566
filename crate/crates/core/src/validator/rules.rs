use std::collections::{BTreeMap, BTreeSet};

use serde_json::Value;

use super::{Mode, RuleId, ValidatorConfig, Violation, STATUS_EVENT};
use crate::model::{KindPayload, LinkTarget, Relation, Span, SpanId, SpanKind, TaskStatus, Trace};

pub(super) struct Context<'a> {
    trace: &'a Trace,
    config: &'a ValidatorConfig,
}

fn violation(rule_id: RuleId, span_ids: Vec<SpanId>, message: String) -> Violation {
    Violation {
        rule_id,
        span_ids,
        message,
    }
}

/// Cardinality check shared by the link rules: strict wants exactly one,
/// lenient at most one.
fn cardinality_ok(mode: Mode, count: usize) -> bool {
    match mode {
        Mode::Strict => count == 1,
        Mode::Lenient => count <= 1,
    }
}

fn expectation(mode: Mode) -> &'static str {
    match mode {
        Mode::Strict => "exactly one",
        Mode::Lenient => "at most one",
    }
}

fn kind_label(kind: Option<SpanKind>) -> &'static str {
    kind.map_or("none", SpanKind::as_str)
}

impl<'a> Context<'a> {
    pub(super) fn new(trace: &'a Trace, config: &'a ValidatorConfig) -> Self {
        Self { trace, config }
    }

    pub(super) fn check(&self, rule: RuleId) -> Vec<Violation> {
        match rule {
            RuleId::R01 => self.single_root(),
            RuleId::R02 => self.parent_tree(),
            RuleId::R03 => self.time_containment(),
            RuleId::R04 => self.kind_nesting(),
            RuleId::R05 => self.reasoning_generates(),
            RuleId::R06 => self.plan_realization(),
            RuleId::R07 => self.task_dependencies(),
            RuleId::R08 => self.token_metrics(),
            RuleId::R09 => self.guardrail_monitoring(),
            RuleId::R10 => self.task_transitions(),
            RuleId::R11 => self.evaluation_target(),
            RuleId::R12 => self.completion(),
            RuleId::R13 => self.payload_schema(),
        }
    }

    fn spans(&self) -> impl Iterator<Item = &'a Span> {
        self.trace.spans.values()
    }

    fn kind_of(&self, id: SpanId) -> Option<SpanKind> {
        self.trace.spans.get(&id).map(|s| s.kind)
    }

    /// Parent span when it resolves.
    fn parent(&self, span: &Span) -> Option<&'a Span> {
        span.parent_id.and_then(|p| self.trace.spans.get(&p))
    }

    fn single_root(&self) -> Vec<Violation> {
        let roots = &self.trace.root_span_ids;
        if roots.len() == 1 {
            return Vec::new();
        }
        let mut ids = roots.clone();
        ids.sort();
        vec![violation(
            RuleId::R01,
            ids,
            format!("expected exactly one root span, found {}", roots.len()),
        )]
    }

    fn parent_tree(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        for span in self.spans() {
            if let Some(parent) = span.parent_id {
                if !self.trace.spans.contains_key(&parent) {
                    out.push(violation(
                        RuleId::R02,
                        vec![span.span_id, parent],
                        format!("parent {parent} of span {} does not exist", span.span_id),
                    ));
                }
            }
        }

        // Walk each parent chain once; a chain that runs back into the
        // current path closes a cycle.
        let mut finished: BTreeSet<SpanId> = BTreeSet::new();
        for start in self.trace.spans.keys() {
            if finished.contains(start) {
                continue;
            }
            let mut path: Vec<SpanId> = Vec::new();
            let mut on_path: BTreeSet<SpanId> = BTreeSet::new();
            let mut current = Some(*start);
            while let Some(id) = current {
                if finished.contains(&id) {
                    break;
                }
                if on_path.contains(&id) {
                    let begin = path.iter().position(|p| *p == id).unwrap_or(0);
                    let mut cycle: Vec<SpanId> = path[begin..].to_vec();
                    cycle.sort();
                    out.push(violation(
                        RuleId::R02,
                        cycle.clone(),
                        format!("parent links form a cycle through {} spans", cycle.len()),
                    ));
                    break;
                }
                path.push(id);
                on_path.insert(id);
                current = self
                    .trace
                    .spans
                    .get(&id)
                    .and_then(|s| s.parent_id)
                    .filter(|p| self.trace.spans.contains_key(p));
            }
            finished.extend(path);
        }
        out
    }

    fn time_containment(&self) -> Vec<Violation> {
        let eps = self.config.containment_epsilon_ns as i128;
        let mut out = Vec::new();
        for span in self.spans() {
            let Some(parent) = self.parent(span) else {
                continue;
            };
            let start = span.start_time_unix_ns as i128;
            let parent_start = parent.start_time_unix_ns as i128;
            if start < parent_start - eps {
                out.push(violation(
                    RuleId::R03,
                    vec![span.span_id, parent.span_id],
                    format!(
                        "span {} starts {} ns before its parent (epsilon {eps} ns)",
                        span.span_id,
                        parent_start - start
                    ),
                ));
            }
            if let (Some(end), Some(parent_end)) = (span.end_time_unix_ns, parent.end_time_unix_ns)
            {
                let (end, parent_end) = (end as i128, parent_end as i128);
                if end > parent_end + eps {
                    out.push(violation(
                        RuleId::R03,
                        vec![span.span_id, parent.span_id],
                        format!(
                            "span {} ends {} ns after its parent (epsilon {eps} ns)",
                            span.span_id,
                            end - parent_end
                        ),
                    ));
                }
            }
        }
        out
    }

    fn allowed_parents(&self, kind: SpanKind) -> Option<BTreeSet<Option<SpanKind>>> {
        let agent = Some(SpanKind::Agent);
        Some(match kind {
            SpanKind::Agent => self.config.agent_parent_kinds.clone(),
            SpanKind::Reasoning | SpanKind::Planning | SpanKind::Workflow => [agent].into(),
            SpanKind::Task => [Some(SpanKind::Workflow)].into(),
            SpanKind::Tool => [Some(SpanKind::Task)].into(),
            SpanKind::Llm => self.config.llm_parent_kinds.clone(),
            SpanKind::Evaluation => [None, agent].into(),
            SpanKind::Guardrail => return None,
        })
    }

    fn kind_nesting(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        for span in self.spans() {
            let Some(allowed) = self.allowed_parents(span.kind) else {
                continue;
            };
            let parent_kind = match span.parent_id {
                None => None,
                Some(p) => match self.kind_of(p) {
                    Some(k) => Some(k),
                    // unresolved parents belong to R02
                    None => continue,
                },
            };
            if !allowed.contains(&parent_kind) {
                let allowed: Vec<&str> = allowed.iter().map(|k| kind_label(*k)).collect();
                let mut ids = vec![span.span_id];
                ids.extend(span.parent_id);
                out.push(violation(
                    RuleId::R04,
                    ids,
                    format!(
                        "{} span {} has parent kind {}, allowed: {}",
                        span.kind,
                        span.span_id,
                        kind_label(parent_kind),
                        allowed.join("|")
                    ),
                ));
            }
        }
        out
    }

    /// Checks every link of `relation`: the source must be `source` and the
    /// local target one of `targets`. Cross-trace targets are accepted when
    /// `allow_remote` is set. Returns the violations and, per source span,
    /// the number of well-formed links.
    fn directed_links(
        &self,
        rule: RuleId,
        relation: Relation,
        source: SpanKind,
        targets: &[SpanKind],
        allow_remote: bool,
    ) -> (
        Vec<Violation>,
        BTreeMap<SpanId, usize>,
        BTreeMap<SpanId, usize>,
    ) {
        let mut out = Vec::new();
        let mut outgoing: BTreeMap<SpanId, usize> = BTreeMap::new();
        let mut incoming: BTreeMap<SpanId, usize> = BTreeMap::new();
        let target_names: Vec<&str> = targets.iter().map(|k| k.as_str()).collect();
        for span in self.spans() {
            for link in span.links_with(relation) {
                if span.kind != source {
                    out.push(violation(
                        rule,
                        vec![span.span_id],
                        format!(
                            "{relation} link must originate from a {source} span, not {} span {}",
                            span.kind, span.span_id
                        ),
                    ));
                    continue;
                }
                match link.target.local_span(self.trace.trace_id) {
                    Some(target) => match self.kind_of(target) {
                        Some(kind) if targets.contains(&kind) => {
                            *outgoing.entry(span.span_id).or_default() += 1;
                            *incoming.entry(target).or_default() += 1;
                        }
                        Some(kind) => out.push(violation(
                            rule,
                            vec![span.span_id, target],
                            format!(
                                "{relation} link from {} targets {kind} span {target}, expected {}",
                                span.span_id,
                                target_names.join("|")
                            ),
                        )),
                        None => out.push(violation(
                            rule,
                            vec![span.span_id, target],
                            format!(
                                "{relation} link from {} targets missing span {target}",
                                span.span_id
                            ),
                        )),
                    },
                    None if allow_remote && !matches!(link.target, LinkTarget::Resource(_)) => {
                        *outgoing.entry(span.span_id).or_default() += 1;
                    }
                    None => out.push(violation(
                        rule,
                        vec![span.span_id],
                        format!(
                            "{relation} link from {} must target a span in this trace",
                            span.span_id
                        ),
                    )),
                }
            }
        }
        (out, outgoing, incoming)
    }

    fn per_span_cardinality(
        &self,
        rule: RuleId,
        kind: SpanKind,
        counts: &BTreeMap<SpanId, usize>,
        what: &str,
    ) -> Vec<Violation> {
        let mode = self.config.mode;
        self.trace
            .spans_of_kind(kind)
            .filter_map(|span| {
                let n = counts.get(&span.span_id).copied().unwrap_or(0);
                (!cardinality_ok(mode, n)).then(|| {
                    violation(
                        rule,
                        vec![span.span_id],
                        format!(
                            "{kind} span {} has {n} {what}, expected {}",
                            span.span_id,
                            expectation(mode)
                        ),
                    )
                })
            })
            .collect()
    }

    fn reasoning_generates(&self) -> Vec<Violation> {
        let (mut out, outgoing, _) = self.directed_links(
            RuleId::R05,
            Relation::Generates,
            SpanKind::Reasoning,
            &[SpanKind::Planning],
            false,
        );
        out.extend(self.per_span_cardinality(
            RuleId::R05,
            SpanKind::Reasoning,
            &outgoing,
            "generates links to a planning span",
        ));
        out
    }

    fn plan_realization(&self) -> Vec<Violation> {
        let (mut out, outgoing, incoming) = self.directed_links(
            RuleId::R06,
            Relation::RealizedBy,
            SpanKind::Planning,
            &[SpanKind::Workflow],
            false,
        );
        out.extend(self.per_span_cardinality(
            RuleId::R06,
            SpanKind::Planning,
            &outgoing,
            "realized_by links to a workflow",
        ));
        out.extend(self.per_span_cardinality(
            RuleId::R06,
            SpanKind::Workflow,
            &incoming,
            "incoming realized_by links",
        ));
        out
    }

    fn evaluation_target(&self) -> Vec<Violation> {
        let (mut out, outgoing, _) = self.directed_links(
            RuleId::R11,
            Relation::Assesses,
            SpanKind::Evaluation,
            &[SpanKind::Agent, SpanKind::Planning, SpanKind::Workflow],
            true,
        );
        out.extend(self.per_span_cardinality(
            RuleId::R11,
            SpanKind::Evaluation,
            &outgoing,
            "assesses links to an agent, planning or workflow span",
        ));
        out
    }

    fn task_dependencies(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        for workflow in self.trace.spans_of_kind(SpanKind::Workflow) {
            let KindPayload::Workflow(payload) = &workflow.payload else {
                continue;
            };
            let mut edges = Vec::new();
            let mut nodes = BTreeSet::new();
            for &(prerequisite, dependent) in &payload.task_dependencies {
                let mut sound = true;
                for id in [prerequisite, dependent] {
                    let is_child_task = self.trace.spans.get(&id).is_some_and(|s| {
                        s.kind == SpanKind::Task && s.parent_id == Some(workflow.span_id)
                    });
                    if !is_child_task {
                        sound = false;
                        out.push(violation(
                            RuleId::R07,
                            vec![workflow.span_id, id],
                            format!(
                                "dependency of workflow {} references {id}, which is not one of its tasks",
                                workflow.span_id
                            ),
                        ));
                    }
                }
                if sound {
                    nodes.insert(prerequisite);
                    nodes.insert(dependent);
                    edges.push((prerequisite, dependent));
                }
            }
            let cyclic = cyclic_nodes(&nodes, &edges);
            if !cyclic.is_empty() {
                let mut ids = vec![workflow.span_id];
                ids.extend(cyclic.iter().copied());
                out.push(violation(
                    RuleId::R07,
                    ids,
                    format!(
                        "task dependencies of workflow {} contain a cycle over {} tasks",
                        workflow.span_id,
                        cyclic.len()
                    ),
                ));
            }
        }
        out
    }

    fn token_metrics(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        for span in self
            .trace
            .spans_of_kind(SpanKind::Llm)
            .filter(|s| s.is_ended())
        {
            for metric in ["input_tokens", "output_tokens"] {
                let problem = match span.metrics.get(metric) {
                    None => Some("is missing".to_string()),
                    Some(n) if n.as_u64().is_some() => None,
                    Some(n) => Some(format!("must be a non-negative integer, got {n}")),
                };
                if let Some(problem) = problem {
                    out.push(violation(
                        RuleId::R08,
                        vec![span.span_id],
                        format!("llm span {} metric {metric} {problem}", span.span_id),
                    ));
                }
            }
        }
        out
    }

    fn guardrail_monitoring(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        for span in self.spans() {
            let monitors: Vec<_> = span.links_with(Relation::Monitors).collect();
            if span.kind != SpanKind::Guardrail {
                if !monitors.is_empty() {
                    out.push(violation(
                        RuleId::R09,
                        vec![span.span_id],
                        format!(
                            "monitors link must originate from a guardrail span, not {} span {}",
                            span.kind, span.span_id
                        ),
                    ));
                }
                continue;
            }
            if monitors.is_empty() {
                out.push(violation(
                    RuleId::R09,
                    vec![span.span_id],
                    format!("guardrail span {} has no monitors link", span.span_id),
                ));
            }
            for link in monitors {
                if let Some(target) = link.target.local_span(self.trace.trace_id) {
                    if !self.trace.spans.contains_key(&target) {
                        out.push(violation(
                            RuleId::R09,
                            vec![span.span_id, target],
                            format!(
                                "guardrail span {} monitors missing span {target}",
                                span.span_id
                            ),
                        ));
                    }
                }
            }
            if let KindPayload::Guardrail(payload) = &span.payload {
                for target in &payload.targets {
                    if !self.trace.spans.contains_key(target) {
                        out.push(violation(
                            RuleId::R09,
                            vec![span.span_id, *target],
                            format!(
                                "guardrail span {} lists target {target} which does not exist",
                                span.span_id
                            ),
                        ));
                    }
                }
            }
        }
        out
    }

    fn task_transitions(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        for task in self.trace.spans_of_kind(SpanKind::Task) {
            let mut fail = |msg: String| {
                out.push(violation(RuleId::R10, vec![task.span_id], msg));
            };
            let mut states = Vec::new();
            for event in task.events.iter().filter(|e| e.name == STATUS_EVENT) {
                match event.attributes.get(STATUS_EVENT) {
                    Some(Value::String(s)) => match s.parse::<TaskStatus>() {
                        Ok(status) => states.push(status),
                        Err(e) => fail(format!("task {}: {e}", task.span_id)),
                    },
                    _ => fail(format!(
                        "task {} has a status event without a status attribute",
                        task.span_id
                    )),
                }
            }
            let Some(&last) = states.last() else { continue };
            if states.first() != Some(&TaskStatus::Pending) {
                states.insert(0, TaskStatus::Pending);
            }
            for pair in states.windows(2) {
                let legal = matches!(
                    (pair[0], pair[1]),
                    (TaskStatus::Pending, TaskStatus::InProgress)
                        | (TaskStatus::InProgress, TaskStatus::Completed)
                        | (TaskStatus::InProgress, TaskStatus::Failed)
                );
                if !legal {
                    fail(format!(
                        "task {} moves from {} to {}",
                        task.span_id, pair[0], pair[1]
                    ));
                }
            }
            if let KindPayload::Task(payload) = &task.payload {
                if let Some(declared) = payload.status {
                    if declared != last {
                        fail(format!(
                            "task {} declares status {declared} but its last transition is {last}",
                            task.span_id
                        ));
                    }
                }
            }
        }
        out
    }

    fn completion(&self) -> Vec<Violation> {
        if !self.config.require_completion {
            return Vec::new();
        }
        self.spans()
            .filter(|s| !s.is_ended())
            .map(|s| {
                violation(
                    RuleId::R12,
                    vec![s.span_id],
                    format!("{} span {} has no span_end", s.kind, s.span_id),
                )
            })
            .collect()
    }

    fn payload_schema(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        for span in self.spans() {
            let variant = span.payload.kind();
            if variant != span.kind {
                out.push(violation(
                    RuleId::R13,
                    vec![span.span_id],
                    format!(
                        "{} span {} carries a {variant} payload",
                        span.kind, span.span_id
                    ),
                ));
                continue;
            }
            for field in span.payload.missing_required() {
                out.push(violation(
                    RuleId::R13,
                    vec![span.span_id],
                    format!(
                        "{} span {} is missing required payload field {field}",
                        span.kind, span.span_id
                    ),
                ));
            }
            if self.config.mode == Mode::Strict && !span.payload.extra().is_empty() {
                let keys: Vec<&str> = span.payload.extra().keys().map(String::as_str).collect();
                out.push(violation(
                    RuleId::R13,
                    vec![span.span_id],
                    format!(
                        "{} span {} has payload fields not defined for its kind: {}",
                        span.kind,
                        span.span_id,
                        keys.join(", ")
                    ),
                ));
            }
        }
        out
    }
}

/// Nodes left over after Kahn's algorithm, i.e. those on or behind a cycle.
fn cyclic_nodes(nodes: &BTreeSet<SpanId>, edges: &[(SpanId, SpanId)]) -> BTreeSet<SpanId> {
    let mut indegree: BTreeMap<SpanId, usize> = nodes.iter().map(|n| (*n, 0)).collect();
    let mut successors: BTreeMap<SpanId, Vec<SpanId>> = BTreeMap::new();
    for &(from, to) in edges {
        *indegree.entry(to).or_default() += 1;
        successors.entry(from).or_default().push(to);
    }
    let mut ready: Vec<SpanId> = indegree
        .iter()
        .filter(|(_, d)| **d == 0)
        .map(|(n, _)| *n)
        .collect();
    while let Some(node) = ready.pop() {
        indegree.remove(&node);
        for next in successors.get(&node).into_iter().flatten() {
            if let Some(d) = indegree.get_mut(next) {
                *d -= 1;
                if *d == 0 {
                    ready.push(*next);
                }
            }
        }
    }
    indegree.into_keys().collect()
}
