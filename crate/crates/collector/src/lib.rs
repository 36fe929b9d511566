//! Ingestion service: NDJSON bodies arrive over HTTP, each line is screened
//! by the record parser, and accepted records are appended to the store
//! before the response is sent.
//!
//! Endpoints:
//!
//! - `POST /v1/traces` with an NDJSON body. Replies 200 with an
//!   [`IngestSummary`] in canonical JSON, or 413 when the body is over the
//!   limit. Bad lines are reported, never fatal.
//! - `GET /healthz` replies `ok`.

mod ingest;
mod server;

pub use ingest::{
    ingest, screen, IngestError, IngestLimits, IngestSummary, LineReject, DEFAULT_MAX_BODY_BYTES,
    DEFAULT_MAX_LINE_BYTES,
};
pub use server::{
    router, serve, Collector, CollectorConfig, CollectorError, DATA_DIR_ENV, DEFAULT_DATA_DIR,
    DEFAULT_PORT, PORT_ENV,
};
