use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use vividmap_core::geo::{parse_feature_collection, to_feature_collection};
use vividmap_core::{ingest, CatalogError, Dataset, IconRegistry, Ontology, ParseError, ViewState};

/// One user's live view of a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub id: String,
    pub dataset_id: String,
    pub view_state: ViewState,
}

/// Shared server state. Datasets are immutable once stored; each session
/// sits behind its own mutex so read-modify-write updates serialize.
pub struct AppState {
    ontology: Arc<Ontology>,
    icons: IconRegistry,
    icon_dir: Option<PathBuf>,
    datasets: RwLock<HashMap<String, Arc<Dataset>>>,
    sessions: RwLock<HashMap<String, Arc<Mutex<Session>>>>,
    next_id: AtomicU64,
}

#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error("snapshot I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("snapshot JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("snapshot dataset `{id}`: {source}")]
    Parse { id: String, source: ParseError },
    #[error("snapshot dataset: {0}")]
    Catalog(#[from] CatalogError),
}

#[derive(Debug, Serialize, Deserialize)]
struct SnapshotDataset {
    id: String,
    geojson: Value,
}

#[derive(Debug, Serialize, Deserialize)]
struct Snapshot {
    datasets: Vec<SnapshotDataset>,
    sessions: Vec<Session>,
}

fn numeric_suffix(id: &str) -> u64 {
    id.trim_start_matches(|c: char| !c.is_ascii_digit())
        .parse()
        .unwrap_or(0)
}

impl AppState {
    pub fn new(ontology: Arc<Ontology>, icons: IconRegistry, icon_dir: Option<PathBuf>) -> Self {
        Self {
            ontology,
            icons,
            icon_dir,
            datasets: RwLock::new(HashMap::new()),
            sessions: RwLock::new(HashMap::new()),
            next_id: AtomicU64::new(1),
        }
    }

    pub fn ontology(&self) -> &Arc<Ontology> {
        &self.ontology
    }

    pub fn icons(&self) -> &IconRegistry {
        &self.icons
    }

    pub fn icon_dir(&self) -> Option<&Path> {
        self.icon_dir.as_deref()
    }

    fn fresh_id(&self, prefix: &str) -> String {
        format!("{prefix}{}", self.next_id.fetch_add(1, Ordering::Relaxed))
    }

    pub fn add_dataset(
        &self,
        features: Vec<vividmap_core::Feature>,
    ) -> Result<Arc<Dataset>, CatalogError> {
        let id = self.fresh_id("d");
        let dataset = Arc::new(ingest(
            features,
            Arc::clone(&self.ontology),
            Some(id.clone()),
        )?);
        self.datasets
            .write()
            .unwrap()
            .insert(id, Arc::clone(&dataset));
        Ok(dataset)
    }

    pub fn dataset(&self, id: &str) -> Option<Arc<Dataset>> {
        self.datasets.read().unwrap().get(id).cloned()
    }

    pub fn add_session(&self, dataset_id: &str, view_state: ViewState) -> Session {
        let session = Session {
            id: self.fresh_id("s"),
            dataset_id: dataset_id.to_string(),
            view_state,
        };
        self.sessions
            .write()
            .unwrap()
            .insert(session.id.clone(), Arc::new(Mutex::new(session.clone())));
        session
    }

    pub fn session(&self, id: &str) -> Option<Arc<Mutex<Session>>> {
        self.sessions.read().unwrap().get(id).cloned()
    }

    /// Applies `update` to a session's view atomically and returns the new
    /// session value.
    pub fn update_view<E>(
        &self,
        id: &str,
        update: impl FnOnce(&ViewState) -> Result<ViewState, E>,
    ) -> Option<Result<Session, E>> {
        let handle = self.session(id)?;
        let mut session = handle.lock().unwrap();
        Some(update(&session.view_state).map(|next| {
            session.view_state = next;
            session.clone()
        }))
    }

    fn to_snapshot(&self) -> Snapshot {
        let mut datasets: Vec<SnapshotDataset> = self
            .datasets
            .read()
            .unwrap()
            .values()
            .map(|d| SnapshotDataset {
                id: d.id().to_string(),
                geojson: to_feature_collection(d.features()),
            })
            .collect();
        datasets.sort_by(|a, b| a.id.cmp(&b.id));
        let mut sessions: Vec<Session> = self
            .sessions
            .read()
            .unwrap()
            .values()
            .map(|s| s.lock().unwrap().clone())
            .collect();
        sessions.sort_by(|a, b| a.id.cmp(&b.id));
        Snapshot { datasets, sessions }
    }

    pub fn save_snapshot(&self, path: &Path) -> Result<(), SnapshotError> {
        let text = serde_json::to_string_pretty(&self.to_snapshot())?;
        std::fs::write(path, text)?;
        Ok(())
    }

    /// Loads datasets and sessions saved by [`AppState::save_snapshot`].
    /// Sessions whose dataset is missing are dropped.
    pub fn load_snapshot(&self, path: &Path) -> Result<usize, SnapshotError> {
        let snapshot: Snapshot = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        let mut max_id = 0;
        let mut datasets = self.datasets.write().unwrap();
        for d in snapshot.datasets {
            let features = parse_feature_collection(&d.geojson.to_string()).map_err(|source| {
                SnapshotError::Parse {
                    id: d.id.clone(),
                    source,
                }
            })?;
            max_id = max_id.max(numeric_suffix(&d.id));
            let dataset = ingest(features, Arc::clone(&self.ontology), Some(d.id.clone()))?;
            datasets.insert(d.id, Arc::new(dataset));
        }
        let mut sessions = self.sessions.write().unwrap();
        let mut restored = 0;
        for s in snapshot.sessions {
            if !datasets.contains_key(&s.dataset_id) {
                continue;
            }
            max_id = max_id.max(numeric_suffix(&s.id));
            sessions.insert(s.id.clone(), Arc::new(Mutex::new(s)));
            restored += 1;
        }
        self.next_id.fetch_max(max_id + 1, Ordering::Relaxed);
        Ok(restored)
    }
}
