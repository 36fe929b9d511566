use std::future::Future;
use std::io;
use std::net::{IpAddr, Ipv4Addr, SocketAddr};
use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use tokio::net::TcpListener;

use agenttrace_core::model::canonical_serialize;
use agenttrace_core::store::{Store, StoreError};

use crate::ingest::{ingest, IngestError, IngestLimits};

pub const DEFAULT_PORT: u16 = 4318;
pub const DATA_DIR_ENV: &str = "AGENTTRACE_DATA_DIR";
pub const PORT_ENV: &str = "AGENTTRACE_PORT";
pub const DEFAULT_DATA_DIR: &str = ".agenttrace";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CollectorConfig {
    pub bind: IpAddr,
    /// 0 picks a free port.
    pub port: u16,
    pub data_dir: PathBuf,
    pub limits: IngestLimits,
}

impl Default for CollectorConfig {
    fn default() -> Self {
        Self {
            bind: IpAddr::V4(Ipv4Addr::LOCALHOST),
            port: DEFAULT_PORT,
            data_dir: PathBuf::from(DEFAULT_DATA_DIR),
            limits: IngestLimits::default(),
        }
    }
}

impl CollectorConfig {
    /// Defaults with `AGENTTRACE_DATA_DIR` and `AGENTTRACE_PORT` applied.
    pub fn from_env() -> Result<Self, CollectorError> {
        let mut config = Self::default();
        if let Ok(dir) = std::env::var(DATA_DIR_ENV) {
            config.data_dir = PathBuf::from(dir);
        }
        if let Ok(port) = std::env::var(PORT_ENV) {
            config.port = port
                .parse()
                .map_err(|_| CollectorError::InvalidConfig(format!("{PORT_ENV}={port:?}")))?;
        }
        Ok(config)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CollectorError {
    #[error("invalid collector configuration: {0}")]
    InvalidConfig(String),
    #[error("data directory {} is not writable: {source}", path.display())]
    DataDirUnwritable { path: PathBuf, source: StoreError },
    #[error("cannot bind {addr}: {source}")]
    BindFailure { addr: SocketAddr, source: io::Error },
    #[error("server failure: {0}")]
    Serve(io::Error),
}

#[derive(Clone)]
struct AppState {
    store: Arc<Store>,
    limits: IngestLimits,
}

/// The HTTP routes over an already opened store.
pub fn router(store: Arc<Store>, limits: IngestLimits) -> Router {
    Router::new()
        .route("/v1/traces", post(post_traces))
        .route("/healthz", get(healthz))
        .layer(DefaultBodyLimit::max(limits.max_body_bytes))
        .with_state(AppState { store, limits })
}

async fn healthz() -> &'static str {
    "ok"
}

fn json(status: StatusCode, body: String) -> Response {
    (status, [(header::CONTENT_TYPE, "application/json")], body).into_response()
}

async fn post_traces(State(state): State<AppState>, body: Bytes) -> Response {
    let store = state.store.clone();
    let limits = state.limits;
    let result = tokio::task::spawn_blocking(move || ingest(&store, &body, &limits)).await;
    match result {
        Ok(Ok(summary)) => {
            tracing::debug!(
                accepted = summary.accepted,
                rejected = summary.rejected,
                "ingested"
            );
            json(StatusCode::OK, canonical_serialize(&summary))
        }
        Ok(Err(IngestError::BodyTooLarge { .. })) => {
            (StatusCode::PAYLOAD_TOO_LARGE, "body too large").into_response()
        }
        Ok(Err(IngestError::Store(StoreError::StorageFull))) => {
            (StatusCode::INSUFFICIENT_STORAGE, "storage full").into_response()
        }
        Ok(Err(e)) => {
            tracing::error!(error = %e, "append failed");
            (StatusCode::INTERNAL_SERVER_ERROR, e.to_string()).into_response()
        }
        Err(e) => (StatusCode::INTERNAL_SERVER_ERROR, e.to_string()).into_response(),
    }
}

/// A bound, not yet serving collector.
pub struct Collector {
    listener: TcpListener,
    store: Arc<Store>,
    limits: IngestLimits,
}

impl Collector {
    /// Opens the store under `config.data_dir` and binds the listener.
    pub async fn bind(config: &CollectorConfig) -> Result<Self, CollectorError> {
        if config.limits.max_body_bytes == 0 || config.limits.max_line_bytes == 0 {
            return Err(CollectorError::InvalidConfig(
                "size limits must be positive".into(),
            ));
        }
        let store = open_writable(&config.data_dir)?;
        Self::bind_store(Arc::new(store), config).await
    }

    /// Binds a listener in front of a store the caller already holds.
    pub async fn bind_store(
        store: Arc<Store>,
        config: &CollectorConfig,
    ) -> Result<Self, CollectorError> {
        let addr = SocketAddr::new(config.bind, config.port);
        let listener = TcpListener::bind(addr)
            .await
            .map_err(|source| CollectorError::BindFailure { addr, source })?;
        Ok(Self {
            listener,
            store,
            limits: config.limits,
        })
    }

    pub fn local_addr(&self) -> io::Result<SocketAddr> {
        self.listener.local_addr()
    }

    pub fn store(&self) -> Arc<Store> {
        self.store.clone()
    }

    /// Serves until `shutdown` resolves, then drains in-flight requests.
    pub async fn run<F>(self, shutdown: F) -> Result<(), CollectorError>
    where
        F: Future<Output = ()> + Send + 'static,
    {
        let app = router(self.store, self.limits);
        axum::serve(self.listener, app)
            .with_graceful_shutdown(shutdown)
            .await
            .map_err(CollectorError::Serve)
    }
}

/// Opens the store and proves the directory accepts writes.
fn open_writable(dir: &std::path::Path) -> Result<Store, CollectorError> {
    let unwritable = |source| CollectorError::DataDirUnwritable {
        path: dir.to_path_buf(),
        source,
    };
    let store = Store::open(dir).map_err(unwritable)?;
    let probe = dir.join(".write-probe");
    std::fs::write(&probe, b"")
        .and_then(|_| std::fs::remove_file(&probe))
        .map_err(|e| unwritable(StoreError::Io(e)))?;
    Ok(store)
}

/// Binds per `config` and serves until Ctrl-C.
pub async fn serve(config: CollectorConfig) -> Result<(), CollectorError> {
    let collector = Collector::bind(&config).await?;
    if let Ok(addr) = collector.local_addr() {
        tracing::info!(%addr, data_dir = %config.data_dir.display(), "collector listening");
    }
    collector
        .run(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
