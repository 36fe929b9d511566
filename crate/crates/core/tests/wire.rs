mod common;

use agenttrace_core::model::{
    assemble_trace, canonical_serialize, parse_record, KindPayload, Record, SpanKind,
};
use agenttrace_core::simulator::{generate, ShapeConfig};
use agenttrace_core::validator::{validate, ValidatorConfig};
use common::{sid, taxonomy, tid};
use proptest::prelude::*;
use proptest::sample::select;
use serde_json::{json, Map, Value};

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn trace_id() -> impl Strategy<Value = String> {
    any::<[u8; 16]>()
        .prop_filter("non-zero", |b| b.iter().any(|x| *x != 0))
        .prop_map(|b| hex(&b))
}

fn span_id() -> impl Strategy<Value = String> {
    any::<[u8; 8]>()
        .prop_filter("non-zero", |b| b.iter().any(|x| *x != 0))
        .prop_map(|b| hex(&b))
}

fn text() -> impl Strategy<Value = String> {
    "[a-zA-Z0-9 _\\-\"\\\\é\u{1F600}]{0,12}"
}

fn leaf() -> impl Strategy<Value = Value> {
    prop_oneof![
        Just(Value::Null),
        any::<bool>().prop_map(Value::from),
        any::<i64>().prop_map(Value::from),
        any::<u64>().prop_map(Value::from),
        select(vec![0.5, -2.25, 1e-7, 3.0e10, 0.1]).prop_map(Value::from),
        text().prop_map(Value::from),
    ]
}

fn value() -> impl Strategy<Value = Value> {
    leaf().prop_recursive(3, 16, 4, |inner| {
        prop_oneof![
            prop::collection::vec(inner.clone(), 0..4).prop_map(Value::from),
            prop::collection::btree_map("[a-z_]{1,6}", inner, 0..4)
                .prop_map(|m| Value::Object(m.into_iter().collect())),
        ]
    })
}

fn object() -> impl Strategy<Value = Map<String, Value>> {
    prop::collection::btree_map("[a-z_]{1,6}", value(), 0..3).prop_map(|m| m.into_iter().collect())
}

fn numbers() -> impl Strategy<Value = Value> {
    prop::collection::btree_map("[a-z_]{1,8}", any::<u32>(), 0..4).prop_map(|m| json!(m))
}

fn texts() -> impl Strategy<Value = Value> {
    prop::collection::vec(text(), 0..3).prop_map(Value::from)
}

fn opt<S: Strategy<Value = Value>>(s: S) -> impl Strategy<Value = Value> {
    prop::option::of(s).prop_map(|v| v.unwrap_or(Value::Null))
}

/// A payload of `kind` with random values in every field, plus maybe a
/// field the kind does not define.
fn payload(kind: SpanKind) -> BoxedStrategy<Value> {
    let t = || opt(text().prop_map(Value::from));
    let fields: BoxedStrategy<Value> = match kind {
        SpanKind::Agent => (t(), t())
            .prop_map(|(a, b)| json!({"role": a, "persona": b}))
            .boxed(),
        SpanKind::Reasoning => (t(), t(), t(), t())
            .prop_map(|(a, b, c, d)| {
                json!({"context": a, "retrieved_knowledge": b, "inference_rules": c, "outcome": d})
            })
            .boxed(),
        SpanKind::Planning => (text(), texts(), t(), texts())
            .prop_map(|(a, b, c, d)| {
                json!({"goal": a, "constraints": b, "context": c, "historical_plans": d})
            })
            .boxed(),
        SpanKind::Workflow => (
            prop::collection::vec((span_id(), span_id()), 0..3),
            t(),
            texts(),
        )
            .prop_map(|(deps, b, c)| {
                let deps: Vec<Value> = deps.into_iter().map(|(x, y)| json!([x, y])).collect();
                json!({"task_dependencies": deps, "operational_context": b, "past_execution_history": c})
            })
            .boxed(),
        SpanKind::Task => (
            text(),
            opt(select(vec!["pending", "in_progress", "completed", "failed"]).prop_map(Value::from)),
        )
            .prop_map(|(a, b)| json!({"description": a, "status": b}))
            .boxed(),
        SpanKind::Tool => (text(), t(), object())
            .prop_map(|(a, b, c)| json!({"tool_name": a, "tool_version": b, "configuration": c}))
            .boxed(),
        SpanKind::Evaluation => (
            texts(),
            numbers(),
            t(),
            opt(select(vec!["final_response", "single_step", "trajectory"]).prop_map(Value::from)),
        )
            .prop_map(|(a, b, c, d)| {
                json!({"test_cases": a, "testing_metrics": b, "testing_results": c, "eval_mode": d})
            })
            .boxed(),
        SpanKind::Guardrail => (texts(), prop::collection::vec(span_id(), 0..3))
            .prop_map(|(a, b)| json!({"actions": a, "targets": b}))
            .boxed(),
        SpanKind::Llm => (text(), t(), object(), t(), opt(any::<u32>().prop_map(Value::from)))
            .prop_map(|(a, b, c, d, e)| {
                json!({"model_name": a, "model_version": b, "parameters": c, "prompt_name": d, "prompt_version": e})
            })
            .boxed(),
    };
    (fields, prop::option::of(("zz_[a-z]{1,4}", value())))
        .prop_map(|(mut p, extra)| {
            if let Some((k, v)) = extra {
                p[k] = v;
            }
            p
        })
        .boxed()
}

fn span_start() -> impl Strategy<Value = Value> {
    select(SpanKind::ALL.to_vec()).prop_flat_map(|kind| {
        (
            trace_id(),
            span_id(),
            prop::option::of(span_id()),
            text(),
            any::<u64>(),
            opt(value()),
            payload(kind),
        )
            .prop_map(move |(t, s, p, name, at, inputs, payload)| {
                json!({"record_type": "span_start", "trace_id": t, "span_id": s, "parent_id": p,
                       "name": name, "kind": kind.as_str(), "start_time_unix_ns": at,
                       "inputs": inputs, "payload": payload})
            })
    })
}

fn span_end() -> impl Strategy<Value = Value> {
    (
        trace_id(),
        span_id(),
        any::<u64>(),
        any::<bool>(),
        text(),
        numbers(),
        opt(value()),
    )
        .prop_map(|(t, s, at, failed, msg, metrics, outputs)| {
            let (status, error) = if failed {
                (
                    "error",
                    json!({"type": "E", "message": format!("m{msg}"), "traceback": msg}),
                )
            } else {
                ("ok", Value::Null)
            };
            json!({"record_type": "span_end", "trace_id": t, "span_id": s, "end_time_unix_ns": at,
                   "status": status, "error": error, "metrics": metrics, "outputs": outputs})
        })
}

fn event() -> impl Strategy<Value = Value> {
    (trace_id(), span_id(), any::<u64>(), text(), object()).prop_map(|(t, s, at, name, attrs)| {
        json!({"record_type": "event", "trace_id": t, "span_id": s, "time_unix_ns": at,
               "name": name, "attributes": attrs})
    })
}

fn link() -> impl Strategy<Value = Value> {
    let relation = select(vec![
        "generates",
        "realized_by",
        "assesses",
        "monitors",
        "uses_knowledge_base",
        "calls",
    ]);
    let target = prop_oneof![
        (prop::option::of(trace_id()), span_id())
            .prop_map(|(t, s)| json!({"target_trace_id": t, "target_span_id": s})),
        text().prop_map(|r| json!({"resource": r})),
    ];
    (trace_id(), span_id(), target, relation).prop_map(|(t, s, mut target, rel)| {
        target["record_type"] = json!("link");
        target["trace_id"] = json!(t);
        target["span_id"] = json!(s);
        target["relation"] = json!(rel);
        target
    })
}

fn feedback() -> impl Strategy<Value = Value> {
    let v = prop_oneof![
        any::<i32>().prop_map(Value::from),
        text().prop_map(Value::from)
    ];
    (
        trace_id(),
        prop::option::of(span_id()),
        select(vec!["explicit", "implicit"]),
        text(),
        v,
        prop::option::of(text()),
        any::<u64>(),
    )
        .prop_map(|(t, s, src, name, value, comment, at)| {
            json!({"record_type": "feedback", "trace_id": t, "span_id": s, "source": src,
                   "name": name, "value": value, "comment": comment, "time_unix_ns": at})
        })
}

fn with_unknown_top_level(s: impl Strategy<Value = Value>) -> impl Strategy<Value = Value> {
    (s, prop::option::of(value())).prop_map(|(mut v, extra)| {
        if let Some(extra) = extra {
            v["x_vendor"] = extra;
        }
        v
    })
}

fn any_record_line() -> impl Strategy<Value = Value> {
    with_unknown_top_level(prop_oneof![
        span_start(),
        span_end(),
        event(),
        link(),
        feedback()
    ])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn parse_inverts_canonical_serialize(line in any_record_line()) {
        let record = parse_record(&line.to_string()).unwrap();
        let text = canonical_serialize(&record);
        let again = parse_record(&text).unwrap();
        prop_assert_eq!(&again, &record);
        prop_assert_eq!(canonical_serialize(&again), text);
    }

    #[test]
    fn key_order_does_not_change_bytes(line in any_record_line()) {
        let Value::Object(map) = line else { unreachable!() };
        let reversed: Map<String, Value> = map.clone().into_iter().rev().collect();
        let a = parse_record(&Value::Object(map).to_string()).unwrap();
        let b = parse_record(&Value::Object(reversed).to_string()).unwrap();
        prop_assert_eq!(canonical_serialize(&a), canonical_serialize(&b));
    }

    #[test]
    fn assembly_ignores_record_order(seed in any::<u64>(), shuffle in any::<u64>()) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let records = generate(&ShapeConfig::new(seed)).unwrap();
        let mut shuffled = records.clone();
        shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(shuffle));
        let a = assemble_trace(&records).unwrap();
        let b = assemble_trace(&shuffled).unwrap();
        prop_assert_eq!(canonical_serialize(&a), canonical_serialize(&b));
    }

    #[test]
    fn durations_are_exact(seed in any::<u64>()) {
        let trace = assemble_trace(&generate(&ShapeConfig::new(seed)).unwrap()).unwrap();
        for span in trace.spans.values() {
            let end = span.end_time_unix_ns.unwrap();
            prop_assert_eq!(span.duration_ns, Some(end - span.start_time_unix_ns));
        }
    }
}

#[test]
fn simulator_records_round_trip() {
    let mut count = 0;
    for seed in 0..100 {
        for record in generate(&ShapeConfig::new(seed)).unwrap() {
            let text = canonical_serialize(&record);
            assert_eq!(parse_record(&text).unwrap(), record);
            count += 1;
        }
    }
    assert!(count > 1000);
}

#[test]
fn empty_collections_are_always_emitted() {
    let line = json!({"record_type": "span_end", "trace_id": tid(1), "span_id": sid(1),
                      "end_time_unix_ns": 5, "status": "ok"});
    let text = canonical_serialize(&parse_record(&line.to_string()).unwrap());
    assert!(text.contains(r#""metrics":{}"#), "{text}");
    assert!(text.contains(r#""error":null"#), "{text}");
    assert!(!text.contains(' '));
}

#[test]
fn span_start_example_parses() {
    let line = format!(
        r#"{{"record_type":"span_start","trace_id":"{}","span_id":"{}","parent_id":null,"name":"run","kind":"agent","start_time_unix_ns":1000,"payload":{{"role":"coder"}}}}"#,
        "a".repeat(32),
        "b".repeat(16)
    );
    match parse_record(&line).unwrap() {
        Record::SpanStart(s) => {
            assert_eq!(s.kind, SpanKind::Agent);
            assert_eq!(s.parent_id, None);
        }
        other => panic!("{other:?}"),
    }
    let hug = format!(r#"{{"record_type":"hug","trace_id":"{}"}}"#, "a".repeat(32));
    assert!(parse_record(&hug).is_err());
}

#[test]
fn taxonomy_every_kind_every_field() {
    let f = taxonomy();
    let records = f.records();
    for record in &records {
        let text = canonical_serialize(record);
        assert_eq!(canonical_serialize(&parse_record(&text).unwrap()), text);
    }
    let trace = assemble_trace(&records).unwrap();
    for &kind in SpanKind::ALL {
        let span = trace.spans_of_kind(kind).next().expect("kind present");
        let payload = serde_json::to_value(&span.payload).unwrap();
        for field in KindPayload::field_names(kind) {
            let v = &payload[*field];
            let populated = match v {
                Value::Null => false,
                Value::Array(a) => !a.is_empty() || *field == "task_dependencies",
                Value::Object(o) => !o.is_empty(),
                _ => true,
            };
            assert!(populated, "{kind}.{field} is empty");
        }
        assert!(span.payload.extra().is_empty());
    }
    let report = validate(&trace, &ValidatorConfig::strict());
    assert!(report.is_conforming(), "{:#?}", report.violations);
}
