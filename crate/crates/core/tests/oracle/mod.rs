//! Brute-force reference implementations of the analytics, computed from the
//! raw JSON of each record. Nothing here goes through the typed model.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use serde_json::Value;

#[derive(Debug, Default, Clone, PartialEq)]
pub struct Tallies {
    /// model -> (input tokens, output tokens, cost)
    pub per_model: BTreeMap<String, (u64, u64, f64)>,
    pub total_cost: f64,
    pub input_tokens: u64,
    pub output_tokens: u64,
    /// Root span durations of ended traces, ascending.
    pub root_durations: Vec<u64>,
    pub traces: usize,
    pub erroring: usize,
    pub trajectories: BTreeMap<String, Vec<String>>,
    pub guardrails: u64,
    pub actions: BTreeMap<String, u64>,
    pub target_kinds: BTreeMap<String, u64>,
    pub outcomes: BTreeMap<String, u64>,
}

fn s<'a>(v: &'a Value, key: &str) -> Option<&'a str> {
    v.get(key).and_then(Value::as_str)
}

fn n(v: &Value, key: &str) -> u64 {
    v.get(key).and_then(Value::as_u64).unwrap_or(0)
}

fn bump(m: &mut BTreeMap<String, u64>, k: &str) {
    *m.entry(k.to_string()).or_insert(0) += 1;
}

/// Tallies over every trace in `lines`. Panics on a model missing from
/// `prices`.
pub fn tally(lines: &[Value], prices: &Value) -> Tallies {
    let mut by_trace: BTreeMap<&str, Vec<&Value>> = BTreeMap::new();
    for l in lines {
        by_trace
            .entry(s(l, "trace_id").unwrap())
            .or_default()
            .push(l);
    }
    let mut t = Tallies::default();
    for (trace_id, records) in by_trace {
        let of = |ty: &'static str| {
            records
                .iter()
                .copied()
                .filter(move |r| s(r, "record_type") == Some(ty))
        };
        let starts: BTreeMap<&str, &Value> = of("span_start")
            .map(|r| (s(r, "span_id").unwrap(), r))
            .collect();
        if starts.is_empty() {
            continue;
        }
        let ends: BTreeMap<&str, &Value> = of("span_end")
            .map(|r| (s(r, "span_id").unwrap(), r))
            .collect();
        t.traces += 1;

        for (id, start) in &starts {
            if s(start, "kind") != Some("llm") {
                continue;
            }
            let model = start["payload"]["model_name"].as_str().unwrap_or("");
            let metrics = ends.get(id).map(|e| &e["metrics"]);
            let input = metrics.map_or(0, |m| n(m, "input_tokens"));
            let output = metrics.map_or(0, |m| n(m, "output_tokens"));
            let price = &prices["models"][model];
            assert!(price.is_object(), "no price for {model}");
            let cost = input as f64 * price["input_per_1k"].as_f64().unwrap() / 1000.0
                + output as f64 * price["output_per_1k"].as_f64().unwrap() / 1000.0;
            let e = t.per_model.entry(model.to_string()).or_default();
            e.0 += input;
            e.1 += output;
            e.2 += cost;
            t.input_tokens += input;
            t.output_tokens += output;
            t.total_cost += cost;
        }

        let root = starts
            .values()
            .filter(|r| r["parent_id"].is_null())
            .min_by_key(|r| (n(r, "start_time_unix_ns"), s(r, "span_id")))
            .unwrap();
        if let Some(end) = ends.get(s(root, "span_id").unwrap()) {
            t.root_durations
                .push(n(end, "end_time_unix_ns") - n(root, "start_time_unix_ns"));
        }
        if ends.values().any(|e| s(e, "status") == Some("error")) {
            t.erroring += 1;
        }

        let mut tools: Vec<(u64, &str, String)> = starts
            .iter()
            .filter(|(id, r)| s(r, "kind") == Some("tool") && under_workflow(&starts, id))
            .map(|(id, r)| {
                let name = r["payload"]["tool_name"]
                    .as_str()
                    .or(s(r, "name"))
                    .unwrap()
                    .to_string();
                (n(r, "start_time_unix_ns"), *id, name)
            })
            .collect();
        tools.sort();
        t.trajectories.insert(
            trace_id.to_string(),
            tools.into_iter().map(|(_, _, name)| name).collect(),
        );

        for (id, start) in &starts {
            if s(start, "kind") != Some("guardrail") {
                continue;
            }
            t.guardrails += 1;
            for a in start["payload"]["actions"].as_array().into_iter().flatten() {
                bump(&mut t.actions, a.as_str().unwrap());
            }
            let outcome = ends.get(id).and_then(|e| s(e, "status")).unwrap_or("open");
            bump(&mut t.outcomes, outcome);
            let mut targets: BTreeSet<(bool, String)> = BTreeSet::new();
            for target in start["payload"]["targets"].as_array().into_iter().flatten() {
                targets.insert((true, target.as_str().unwrap().to_string()));
            }
            for link in of("link") {
                if s(link, "span_id") != Some(id) || s(link, "relation") != Some("monitors") {
                    continue;
                }
                if let Some(target) = s(link, "target_span_id") {
                    let local = s(link, "target_trace_id").is_none_or(|x| x == trace_id);
                    targets.insert((local, target.to_string()));
                }
            }
            for (local, target) in targets {
                let kind = if !local {
                    "external"
                } else {
                    starts
                        .get(target.as_str())
                        .and_then(|r| s(r, "kind"))
                        .unwrap_or("unresolved")
                };
                bump(&mut t.target_kinds, kind);
            }
        }
    }
    t.root_durations.sort();
    t
}

fn under_workflow<'a>(starts: &BTreeMap<&'a str, &'a Value>, mut id: &'a str) -> bool {
    let mut hops = 0;
    while let Some(parent) = starts.get(id).and_then(|r| s(r, "parent_id")) {
        if starts.get(parent).and_then(|r| s(r, "kind")) == Some("workflow") {
            return true;
        }
        id = parent;
        hops += 1;
        if hops > starts.len() {
            return false;
        }
    }
    false
}

/// Smallest 1-based rank k with k/n >= p/100, by search.
pub fn percentile(sorted: &[u64], p: u64) -> u64 {
    let n = sorted.len() as u64;
    let k = (1..=n).find(|k| k * 100 >= p * n).unwrap();
    sorted[(k - 1) as usize]
}

/// Full-matrix edit distance.
pub fn levenshtein<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut d = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for (i, row) in d.iter_mut().enumerate() {
        row[0] = i;
    }
    for (j, cell) in d[0].iter_mut().enumerate() {
        *cell = j;
    }
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            let sub = d[i - 1][j - 1] + usize::from(a[i - 1] != b[j - 1]);
            d[i][j] = sub.min(d[i - 1][j] + 1).min(d[i][j - 1] + 1);
        }
    }
    d[a.len()][b.len()]
}

pub fn close(a: f64, b: f64) -> bool {
    a == b || (a - b).abs() <= 1e-9 * a.abs().max(b.abs())
}
