//! HTTP service: datasets, sessions with per-category opacity state, queries,
//! SVG rendering and 3D scene export.

mod api;
mod error;
mod state;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use vividmap_core::{load_ontology, IconRegistry};

pub use api::router;
pub use error::ApiError;
pub use state::{AppState, Session, SnapshotError};

pub const DEFAULT_MAX_BODY_BYTES: usize = 50 * 1024 * 1024;

#[derive(Debug, Clone)]
pub struct Config {
    pub host: String,
    pub port: u16,
    pub max_body_bytes: usize,
    pub ontology_path: PathBuf,
    /// Directory served under `/icons/`.
    pub icon_dir: Option<PathBuf>,
    /// Prefix used for icon references in scene exports.
    pub icon_base: String,
    pub snapshot_path: Option<PathBuf>,
}

impl Config {
    pub fn new(ontology_path: impl Into<PathBuf>) -> Self {
        Self {
            host: "127.0.0.1".into(),
            port: 8080,
            max_body_bytes: DEFAULT_MAX_BODY_BYTES,
            ontology_path: ontology_path.into(),
            icon_dir: None,
            icon_base: "/icons".into(),
            snapshot_path: None,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error("cannot read ontology {path}: {source}")]
    OntologyIo {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Ontology(#[from] vividmap_core::OntologyError),
    #[error(transparent)]
    Snapshot(#[from] SnapshotError),
    #[error("invalid listen address: {0}")]
    Address(String),
    #[error("server I/O: {0}")]
    Io(#[from] std::io::Error),
}

/// Loads the ontology and any existing snapshot into a fresh state.
pub fn build_state(config: &Config) -> Result<Arc<AppState>, ServeError> {
    let text = std::fs::read_to_string(&config.ontology_path).map_err(|source| {
        ServeError::OntologyIo {
            path: config.ontology_path.clone(),
            source,
        }
    })?;
    let ontology = Arc::new(load_ontology(&text)?);
    let icons = IconRegistry::new(config.icon_base.clone());
    let state = Arc::new(AppState::new(ontology, icons, config.icon_dir.clone()));
    if let Some(path) = &config.snapshot_path {
        if path.exists() {
            let sessions = state.load_snapshot(path)?;
            tracing::info!(path = %path.display(), sessions, "snapshot restored");
        }
    }
    Ok(state)
}

/// Runs until Ctrl-C, then writes the snapshot if one is configured.
pub async fn serve(config: Config) -> Result<(), ServeError> {
    let state = build_state(&config)?;
    let addr: SocketAddr = format!("{}:{}", config.host, config.port)
        .parse()
        .map_err(|_| ServeError::Address(format!("{}:{}", config.host, config.port)))?;
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    let app = router(Arc::clone(&state), config.max_body_bytes);
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    if let Some(path) = &config.snapshot_path {
        state.save_snapshot(path)?;
        tracing::info!(path = %path.display(), "snapshot written");
    }
    Ok(())
}
