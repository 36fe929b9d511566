//! Typed extraction from a JSON object, leaving unknown keys behind.

use std::collections::BTreeMap;
use std::str::FromStr;

use serde_json::{Map, Number, Value};

use super::ids::{SpanId, TraceId};

pub(crate) type FieldResult<T> = Result<T, String>;

/// Wraps a JSON object; every known key is removed as it is read so that
/// whatever remains can be kept as unknown fields.
pub(crate) struct Fields {
    map: Map<String, Value>,
    context: &'static str,
}

impl Fields {
    pub(crate) fn new(value: Value, context: &'static str) -> FieldResult<Self> {
        match value {
            Value::Object(map) => Ok(Self { map, context }),
            other => Err(format!(
                "{context} must be an object, got {}",
                type_name(&other)
            )),
        }
    }

    pub(crate) fn empty(context: &'static str) -> Self {
        Self {
            map: Map::new(),
            context,
        }
    }

    fn take(&mut self, key: &str) -> Option<Value> {
        match self.map.remove(key) {
            None | Some(Value::Null) => None,
            Some(v) => Some(v),
        }
    }

    fn missing(&self, key: &str) -> String {
        format!("missing required field {}.{key}", self.context)
    }

    fn wrong(&self, key: &str, expected: &str, got: &Value) -> String {
        format!(
            "field {}.{key} must be {expected}, got {}",
            self.context,
            type_name(got)
        )
    }

    pub(crate) fn opt_string(&mut self, key: &str) -> FieldResult<Option<String>> {
        match self.take(key) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s)),
            Some(v) => Err(self.wrong(key, "a string", &v)),
        }
    }

    pub(crate) fn string(&mut self, key: &str) -> FieldResult<String> {
        self.opt_string(key)?.ok_or_else(|| self.missing(key))
    }

    pub(crate) fn opt_u64(&mut self, key: &str) -> FieldResult<Option<u64>> {
        match self.take(key) {
            None => Ok(None),
            Some(Value::Number(n)) => match n.as_u64() {
                Some(v) => Ok(Some(v)),
                None => Err(format!(
                    "field {}.{key} must be a non-negative integer, got {n}",
                    self.context
                )),
            },
            Some(v) => Err(self.wrong(key, "an integer", &v)),
        }
    }

    pub(crate) fn u64(&mut self, key: &str) -> FieldResult<u64> {
        self.opt_u64(key)?.ok_or_else(|| self.missing(key))
    }

    pub(crate) fn opt_parsed<T>(&mut self, key: &str) -> FieldResult<Option<T>>
    where
        T: FromStr,
        T::Err: std::fmt::Display,
    {
        match self.opt_string(key)? {
            None => Ok(None),
            Some(s) => s
                .parse()
                .map(Some)
                .map_err(|e| format!("field {}.{key}: {e}", self.context)),
        }
    }

    pub(crate) fn parsed<T>(&mut self, key: &str) -> FieldResult<T>
    where
        T: FromStr,
        T::Err: std::fmt::Display,
    {
        self.opt_parsed(key)?.ok_or_else(|| self.missing(key))
    }

    pub(crate) fn trace_id(&mut self, key: &str) -> FieldResult<TraceId> {
        self.parsed(key)
    }

    pub(crate) fn span_id(&mut self, key: &str) -> FieldResult<SpanId> {
        self.parsed(key)
    }

    pub(crate) fn opt_span_id(&mut self, key: &str) -> FieldResult<Option<SpanId>> {
        self.opt_parsed(key)
    }

    pub(crate) fn opt_value(&mut self, key: &str) -> Option<Value> {
        self.take(key)
    }

    pub(crate) fn object(&mut self, key: &str) -> FieldResult<Map<String, Value>> {
        match self.take(key) {
            None => Ok(Map::new()),
            Some(Value::Object(m)) => Ok(m),
            Some(v) => Err(self.wrong(key, "an object", &v)),
        }
    }

    pub(crate) fn number_map(&mut self, key: &str) -> FieldResult<BTreeMap<String, Number>> {
        let context = self.context;
        self.object(key)?
            .into_iter()
            .map(|(k, v)| match v {
                Value::Number(n) => Ok((k, n)),
                other => Err(format!(
                    "field {context}.{key}.{k} must be a number, got {}",
                    type_name(&other)
                )),
            })
            .collect()
    }

    fn array(&mut self, key: &str) -> FieldResult<Vec<Value>> {
        match self.take(key) {
            None => Ok(Vec::new()),
            Some(Value::Array(a)) => Ok(a),
            Some(v) => Err(self.wrong(key, "an array", &v)),
        }
    }

    pub(crate) fn string_list(&mut self, key: &str) -> FieldResult<Vec<String>> {
        let context = self.context;
        self.array(key)?
            .into_iter()
            .map(|v| match v {
                Value::String(s) => Ok(s),
                other => Err(format!(
                    "field {context}.{key} must hold strings, got {}",
                    type_name(&other)
                )),
            })
            .collect()
    }

    pub(crate) fn span_id_list(&mut self, key: &str) -> FieldResult<Vec<SpanId>> {
        let context = self.context;
        self.string_list(key)?
            .iter()
            .map(|s| s.parse().map_err(|e| format!("field {context}.{key}: {e}")))
            .collect()
    }

    pub(crate) fn span_id_pairs(&mut self, key: &str) -> FieldResult<Vec<(SpanId, SpanId)>> {
        let context = self.context;
        let bad =
            || format!("field {context}.{key} must hold [prerequisite, dependent] span id pairs");
        self.array(key)?
            .into_iter()
            .map(|v| {
                let Value::Array(pair) = v else {
                    return Err(bad());
                };
                match pair.as_slice() {
                    [Value::String(a), Value::String(b)] => {
                        let a = a.parse().map_err(|e| format!("{}: {e}", bad()))?;
                        let b = b.parse().map_err(|e| format!("{}: {e}", bad()))?;
                        Ok((a, b))
                    }
                    _ => Err(bad()),
                }
            })
            .collect()
    }

    pub(crate) fn into_rest(self) -> Map<String, Value> {
        self.map
    }
}

pub(crate) fn type_name(v: &Value) -> &'static str {
    match v {
        Value::Null => "null",
        Value::Bool(_) => "a boolean",
        Value::Number(_) => "a number",
        Value::String(_) => "a string",
        Value::Array(_) => "an array",
        Value::Object(_) => "an object",
    }
}
