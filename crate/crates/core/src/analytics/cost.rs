use std::collections::BTreeMap;
use std::str::FromStr;

use rust_decimal::prelude::ToPrimitive;
use rust_decimal::Decimal;
use serde::{Deserialize, Serialize, Serializer};
use serde_json::{Number, Value};

use crate::exec::Execution;
use crate::model::{KindPayload, SpanKind, Trace};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CostError {
    #[error("no price for model {model:?}")]
    MissingPrice { model: String },
    #[error("invalid price table: {0}")]
    InvalidPriceTable(String),
    #[error("cost of model {model:?} overflows")]
    Overflow { model: String },
    #[error("cannot merge {0} and {1} costs")]
    CurrencyMismatch(String, String),
}

/// Prices per 1000 tokens, held as exact decimals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ModelPrice {
    #[serde(serialize_with = "decimal_as_number")]
    pub input_per_1k: Decimal,
    #[serde(serialize_with = "decimal_as_number")]
    pub output_per_1k: Decimal,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PriceTable {
    pub currency: String,
    pub models: BTreeMap<String, ModelPrice>,
}

#[derive(Deserialize)]
struct RawPrice {
    input_per_1k: Number,
    output_per_1k: Number,
}

#[derive(Deserialize)]
struct RawTable {
    currency: String,
    models: BTreeMap<String, RawPrice>,
}

/// Reads a JSON number as the decimal it was written as. Floats arrive as
/// their shortest round-trip text, which reproduces the literal for any
/// price written with up to 17 significant digits.
fn exact_decimal(n: &Number) -> Option<Decimal> {
    let text = n.to_string();
    Decimal::from_str(&text)
        .or_else(|_| Decimal::from_scientific(&text))
        .ok()
}

fn decimal_as_number<S: Serializer>(d: &Decimal, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_f64(d.to_f64().unwrap_or(f64::NAN))
}

impl PriceTable {
    pub fn from_json(text: &str) -> Result<Self, CostError> {
        let raw: RawTable =
            serde_json::from_str(text).map_err(|e| CostError::InvalidPriceTable(e.to_string()))?;
        let mut models = BTreeMap::new();
        for (name, price) in raw.models {
            let parse = |field: &str, n: &Number| {
                let d = exact_decimal(n).ok_or_else(|| {
                    CostError::InvalidPriceTable(format!(
                        "{name}.{field}: {n} is not representable"
                    ))
                })?;
                if d.is_sign_negative() && !d.is_zero() {
                    return Err(CostError::InvalidPriceTable(format!(
                        "{name}.{field}: negative price {n}"
                    )));
                }
                Ok(d)
            };
            let input_per_1k = parse("input_per_1k", &price.input_per_1k)?;
            let output_per_1k = parse("output_per_1k", &price.output_per_1k)?;
            models.insert(
                name,
                ModelPrice {
                    input_per_1k,
                    output_per_1k,
                },
            );
        }
        Ok(Self {
            currency: raw.currency,
            models,
        })
    }

    pub fn from_value(value: &Value) -> Result<Self, CostError> {
        Self::from_json(&value.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ModelCost {
    pub input_tokens: u64,
    pub output_tokens: u64,
    #[serde(serialize_with = "decimal_as_number")]
    pub cost: Decimal,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CostBreakdown {
    pub currency: String,
    pub per_model: BTreeMap<String, ModelCost>,
    #[serde(serialize_with = "decimal_as_number")]
    pub total_cost: Decimal,
}

impl CostBreakdown {
    pub fn empty(currency: &str) -> Self {
        Self {
            currency: currency.to_string(),
            per_model: BTreeMap::new(),
            total_cost: Decimal::ZERO,
        }
    }

    pub fn total_cost_f64(&self) -> f64 {
        self.total_cost.to_f64().unwrap_or(f64::NAN)
    }

    /// Sums two breakdowns of the same currency.
    pub fn merge(mut self, other: CostBreakdown) -> Result<Self, CostError> {
        if self.currency != other.currency {
            return Err(CostError::CurrencyMismatch(self.currency, other.currency));
        }
        for (model, cost) in other.per_model {
            accumulate(&mut self.per_model, model, cost)?;
        }
        self.total_cost = total(&self.per_model)?;
        Ok(self)
    }
}

fn accumulate(
    per_model: &mut BTreeMap<String, ModelCost>,
    model: String,
    add: ModelCost,
) -> Result<(), CostError> {
    let entry = per_model.entry(model.clone()).or_insert(ModelCost {
        input_tokens: 0,
        output_tokens: 0,
        cost: Decimal::ZERO,
    });
    let sum = (
        entry.input_tokens.checked_add(add.input_tokens),
        entry.output_tokens.checked_add(add.output_tokens),
        entry.cost.checked_add(add.cost),
    );
    match sum {
        (Some(i), Some(o), Some(c)) => {
            *entry = ModelCost {
                input_tokens: i,
                output_tokens: o,
                cost: c,
            };
            Ok(())
        }
        _ => Err(CostError::Overflow { model }),
    }
}

fn total(per_model: &BTreeMap<String, ModelCost>) -> Result<Decimal, CostError> {
    per_model
        .values()
        .try_fold(Decimal::ZERO, |acc, m| acc.checked_add(m.cost))
        .ok_or(CostError::Overflow {
            model: String::new(),
        })
}

fn span_cost(
    price: &ModelPrice,
    model: &str,
    input_tokens: u64,
    output_tokens: u64,
) -> Result<Decimal, CostError> {
    let per_1k = Decimal::from(1000);
    let part = |tokens: u64, rate: Decimal| {
        Decimal::from(tokens)
            .checked_mul(rate)
            .and_then(|d| d.checked_div(per_1k))
    };
    part(input_tokens, price.input_per_1k)
        .zip(part(output_tokens, price.output_per_1k))
        .and_then(|(a, b)| a.checked_add(b))
        .ok_or_else(|| CostError::Overflow {
            model: model.to_string(),
        })
}

/// Cost of every llm span in `trace`. Spans without a model name are
/// priced under the empty name; missing token metrics count as zero.
pub fn compute_cost(trace: &Trace, prices: &PriceTable) -> Result<CostBreakdown, CostError> {
    let mut per_model: BTreeMap<String, ModelCost> = BTreeMap::new();
    for span in trace.spans_of_kind(SpanKind::Llm) {
        let model = match &span.payload {
            KindPayload::Llm(p) => p.model_name.clone().unwrap_or_default(),
            _ => String::new(),
        };
        let price = prices
            .models
            .get(&model)
            .ok_or_else(|| CostError::MissingPrice {
                model: model.clone(),
            })?;
        let input = span.metric_u64("input_tokens").unwrap_or(0);
        let output = span.metric_u64("output_tokens").unwrap_or(0);
        let cost = span_cost(price, &model, input, output)?;
        accumulate(
            &mut per_model,
            model,
            ModelCost {
                input_tokens: input,
                output_tokens: output,
                cost,
            },
        )?;
    }
    let total_cost = total(&per_model)?;
    Ok(CostBreakdown {
        currency: prices.currency.clone(),
        per_model,
        total_cost,
    })
}

/// Combined cost over many traces.
pub fn compute_corpus_cost(
    traces: &[Trace],
    prices: &PriceTable,
    exec: Execution,
) -> Result<CostBreakdown, CostError> {
    exec.map_reduce(
        traces,
        |t| compute_cost(t, prices),
        || Ok(CostBreakdown::empty(&prices.currency)),
        |a, b| a?.merge(b?),
    )
}
