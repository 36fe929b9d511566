//! Core of the agenttrace observability stack: the span taxonomy and wire
//! grammar, a structural rule validator, an append-only record store,
//! analytics over assembled traces, and a seeded trace simulator.

pub mod analytics;
pub mod exec;
pub mod model;
pub mod simulator;
pub mod store;
pub mod validator;

pub use exec::Execution;
pub use model::*;
