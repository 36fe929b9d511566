use std::net::SocketAddr;
use std::sync::Arc;

use agenttrace_collector::{
    ingest, Collector, CollectorConfig, CollectorError, IngestLimits, IngestSummary,
};
use agenttrace_core::model::canonical_serialize;
use agenttrace_core::simulator::{generate_corpus, ShapeConfig};
use agenttrace_core::store::Store;
use agenttrace_core::Execution;
use reqwest::blocking::Client;
use reqwest::StatusCode;
use tokio::runtime::Runtime;
use tokio::sync::oneshot;

/// A collector serving on a free loopback port until dropped.
struct Running {
    addr: SocketAddr,
    store: Arc<Store>,
    stop: Option<oneshot::Sender<()>>,
    _rt: Runtime,
    _dir: tempfile::TempDir,
}

impl Running {
    fn start(limits: IngestLimits) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let config = CollectorConfig {
            port: 0,
            data_dir: dir.path().to_path_buf(),
            limits,
            ..Default::default()
        };
        let rt = Runtime::new().unwrap();
        let collector = rt.block_on(Collector::bind(&config)).unwrap();
        let addr = collector.local_addr().unwrap();
        let store = collector.store();
        let (stop, stopped) = oneshot::channel();
        rt.spawn(collector.run(async {
            let _ = stopped.await;
        }));
        Self {
            addr,
            store,
            stop: Some(stop),
            _rt: rt,
            _dir: dir,
        }
    }

    fn url(&self, path: &str) -> String {
        format!("http://{}{}", self.addr, path)
    }

    fn post(&self, body: impl Into<reqwest::blocking::Body>) -> (StatusCode, String) {
        let resp = Client::new()
            .post(self.url("/v1/traces"))
            .header("content-type", "application/x-ndjson")
            .body(body)
            .send()
            .unwrap();
        (resp.status(), resp.text().unwrap())
    }
}

impl Drop for Running {
    fn drop(&mut self) {
        if let Some(stop) = self.stop.take() {
            let _ = stop.send(());
        }
    }
}

fn corpus_ndjson(seed: u64, traces: u64) -> String {
    generate_corpus(&ShapeConfig::new(seed), traces, Execution::Sequential)
        .unwrap()
        .into_iter()
        .flatten()
        .map(|r| canonical_serialize(&r) + "\n")
        .collect()
}

fn summary(text: &str) -> IngestSummary {
    serde_json::from_str(text).unwrap()
}

fn two_lines() -> Vec<String> {
    corpus_ndjson(1, 1)
        .lines()
        .take(2)
        .map(String::from)
        .collect()
}

#[test]
fn healthz_is_ok() {
    let c = Running::start(IngestLimits::default());
    let resp = reqwest::blocking::get(c.url("/healthz")).unwrap();
    assert_eq!(resp.status(), StatusCode::OK);
    assert_eq!(resp.text().unwrap(), "ok");
}

#[test]
fn valid_lines_are_accepted() {
    let c = Running::start(IngestLimits::default());
    let lines = two_lines();
    let (status, text) = c.post(format!("{}\n{}\n", lines[0], lines[1]));
    assert_eq!(status, StatusCode::OK);
    let s = summary(&text);
    assert_eq!((s.accepted, s.rejected), (2, 0));
    // the response is itself canonical
    let value: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(canonical_serialize(&value), text);
    assert_eq!(c.store.record_count(), 2);
}

#[test]
fn malformed_line_is_reported_not_fatal() {
    let c = Running::start(IngestLimits::default());
    let lines = two_lines();
    let (status, text) = c.post(format!("{}\n{{\"record_type\": \"span_start\"\n", lines[0]));
    assert_eq!(status, StatusCode::OK);
    let s = summary(&text);
    assert_eq!((s.accepted, s.rejected), (1, 1));
    assert_eq!(s.rejects[0].line_number, 2);
    assert_eq!(c.store.record_count(), 1);
}

#[test]
fn empty_body_accepts_nothing() {
    let c = Running::start(IngestLimits::default());
    let (status, text) = c.post("");
    assert_eq!(status, StatusCode::OK);
    assert_eq!(summary(&text), IngestSummary::default());
}

#[test]
fn oversized_body_is_413() {
    let c = Running::start(IngestLimits {
        max_body_bytes: 1024,
        max_line_bytes: 1024,
    });
    let body = corpus_ndjson(2, 2);
    assert!(body.len() > 1024);
    let (status, _) = c.post(body);
    assert_eq!(status, StatusCode::PAYLOAD_TOO_LARGE);
    assert_eq!(c.store.record_count(), 0);
}

#[test]
fn concurrent_clients_lose_nothing() {
    let c = Running::start(IngestLimits::default());
    let bodies: Vec<String> = (0..8).map(|i| corpus_ndjson(100 + i, 5)).collect();
    let expected: usize = bodies.iter().map(|b| b.lines().count()).sum();
    std::thread::scope(|scope| {
        for body in &bodies {
            let c = &c;
            scope.spawn(move || {
                let lines: Vec<&str> = body.lines().collect();
                for chunk in lines.chunks(10) {
                    let (status, text) = c.post(chunk.join("\n"));
                    assert_eq!(status, StatusCode::OK);
                    assert_eq!(summary(&text).accepted, chunk.len());
                }
            });
        }
    });
    assert_eq!(c.store.record_count(), expected);
    assert_eq!(c.store.traces().len(), 40);
}

#[test]
fn http_and_file_ingest_store_the_same_records() {
    let c = Running::start(IngestLimits::default());
    let body = corpus_ndjson(9, 20);
    let (status, _) = c.post(body.clone());
    assert_eq!(status, StatusCode::OK);

    let dir = tempfile::tempdir().unwrap();
    let direct = Store::open(dir.path()).unwrap();
    ingest(&direct, body.as_bytes(), &IngestLimits::for_files()).unwrap();

    let lines =
        |s: &Store| -> Vec<String> { s.records().iter().map(canonical_serialize).collect() };
    assert_eq!(lines(&c.store), lines(&direct));
    assert_eq!(
        canonical_serialize(&c.store.summaries()),
        canonical_serialize(&direct.summaries())
    );
    // and the store survives a reopen
    let reopened = Store::open(c.store.root()).unwrap();
    assert_eq!(lines(&reopened), lines(&direct));
}

#[test]
fn unwritable_data_dir_fails_to_start() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("not-a-dir");
    std::fs::write(&file, b"x").unwrap();
    let config = CollectorConfig {
        port: 0,
        data_dir: file,
        ..Default::default()
    };
    let rt = Runtime::new().unwrap();
    assert!(matches!(
        rt.block_on(Collector::bind(&config)),
        Err(CollectorError::DataDirUnwritable { .. })
    ));
}

#[test]
fn port_in_use_fails_to_bind() {
    let c = Running::start(IngestLimits::default());
    let dir = tempfile::tempdir().unwrap();
    let config = CollectorConfig {
        port: c.addr.port(),
        data_dir: dir.path().to_path_buf(),
        ..Default::default()
    };
    let rt = Runtime::new().unwrap();
    assert!(matches!(
        rt.block_on(Collector::bind(&config)),
        Err(CollectorError::BindFailure { .. })
    ));
}

#[test]
fn zero_limits_are_invalid() {
    let dir = tempfile::tempdir().unwrap();
    let config = CollectorConfig {
        port: 0,
        data_dir: dir.path().to_path_buf(),
        limits: IngestLimits {
            max_body_bytes: 0,
            max_line_bytes: 1,
        },
        ..Default::default()
    };
    let rt = Runtime::new().unwrap();
    assert!(matches!(
        rt.block_on(Collector::bind(&config)),
        Err(CollectorError::InvalidConfig(_))
    ));
}
