//! In-memory session state with optional write-through to a directory.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use admissible_core::Table;
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JobState {
    Queued,
    Running,
    Done,
    Failed,
}

impl JobState {
    fn is_final(self) -> bool {
        matches!(self, JobState::Done | JobState::Failed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JobKind {
    Infogram,
    Alfa,
    Model,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobRecord {
    pub id: String,
    pub kind: JobKind,
    pub state: JobState,
    pub dataset: String,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<Value>,
}

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },
}

#[derive(Default)]
struct Inner {
    datasets: BTreeMap<String, Arc<Table>>,
    jobs: BTreeMap<String, JobRecord>,
    next_dataset: u64,
    next_job: u64,
}

/// Datasets and jobs of one service instance. Cloning shares the store.
#[derive(Clone, Default)]
pub struct SessionStore {
    inner: Arc<RwLock<Inner>>,
    dir: Option<Arc<PathBuf>>,
}

fn numeric_suffix(id: &str, prefix: &str) -> u64 {
    id.strip_prefix(prefix).and_then(|n| n.parse().ok()).unwrap_or(0)
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, StoreError> {
    let text = fs::read_to_string(path).map_err(|source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| StoreError::Json {
        path: path.to_path_buf(),
        source,
    })
}

fn json_files(dir: &Path) -> Result<Vec<PathBuf>, StoreError> {
    let entries = fs::read_dir(dir).map_err(|source| StoreError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut files: Vec<PathBuf> = entries
        .flatten()
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    files.sort();
    Ok(files)
}

impl SessionStore {
    pub fn in_memory() -> Self {
        SessionStore::default()
    }

    /// Opens a store backed by `dir`, reloading datasets and finished jobs
    /// written by an earlier instance. Jobs that had not finished are marked
    /// failed.
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let dir = dir.into();
        let mut inner = Inner::default();
        for sub in ["datasets", "jobs"] {
            let path = dir.join(sub);
            fs::create_dir_all(&path).map_err(|source| StoreError::Io { path, source })?;
        }
        for path in json_files(&dir.join("datasets"))? {
            let id = path.file_stem().unwrap_or_default().to_string_lossy().into_owned();
            let table: Table = read_json(&path)?;
            inner.next_dataset = inner.next_dataset.max(numeric_suffix(&id, "ds"));
            inner.datasets.insert(id, Arc::new(table));
        }
        for path in json_files(&dir.join("jobs"))? {
            let mut job: JobRecord = read_json(&path)?;
            if !job.state.is_final() {
                job.state = JobState::Failed;
                job.error = Some("interrupted by a service restart".into());
            }
            inner.next_job = inner.next_job.max(numeric_suffix(&job.id, "job"));
            inner.jobs.insert(job.id.clone(), job);
        }
        Ok(SessionStore {
            inner: Arc::new(RwLock::new(inner)),
            dir: Some(Arc::new(dir)),
        })
    }

    fn persist<T: Serialize>(&self, sub: &str, id: &str, value: &T) {
        let Some(dir) = &self.dir else { return };
        let path = dir.join(sub).join(format!("{id}.json"));
        let text = serde_json::to_string(value).expect("store records serialize");
        // Write-through is best effort; the in-memory state stays authoritative.
        if let Err(e) = fs::write(&path, text) {
            eprintln!("warning: could not write {}: {e}", path.display());
        }
    }

    pub fn add_dataset(&self, table: Table) -> (String, Arc<Table>) {
        let table = Arc::new(table);
        let id = {
            let mut inner = self.inner.write().expect("store lock");
            inner.next_dataset += 1;
            let id = format!("ds{}", inner.next_dataset);
            inner.datasets.insert(id.clone(), table.clone());
            id
        };
        self.persist("datasets", &id, table.as_ref());
        (id, table)
    }

    pub fn dataset(&self, id: &str) -> Option<Arc<Table>> {
        self.inner.read().expect("store lock").datasets.get(id).cloned()
    }

    pub fn dataset_ids(&self) -> Vec<String> {
        self.inner.read().expect("store lock").datasets.keys().cloned().collect()
    }

    pub fn create_job(&self, kind: JobKind, dataset: &str, seed: u64) -> JobRecord {
        let job = {
            let mut inner = self.inner.write().expect("store lock");
            inner.next_job += 1;
            let job = JobRecord {
                id: format!("job{}", inner.next_job),
                kind,
                state: JobState::Queued,
                dataset: dataset.to_string(),
                seed,
                error: None,
                result: None,
            };
            inner.jobs.insert(job.id.clone(), job.clone());
            job
        };
        self.persist("jobs", &job.id, &job);
        job
    }

    pub fn job(&self, id: &str) -> Option<JobRecord> {
        self.inner.read().expect("store lock").jobs.get(id).cloned()
    }

    /// Moves a job forward; backward or repeated transitions out of a final
    /// state are ignored so results stay immutable once published.
    fn transition(&self, id: &str, state: JobState, result: Option<Value>, error: Option<String>) {
        let snapshot = {
            let mut inner = self.inner.write().expect("store lock");
            let Some(job) = inner.jobs.get_mut(id) else { return };
            if job.state.is_final() || state <= job.state {
                return;
            }
            job.state = state;
            job.result = result;
            job.error = error;
            job.clone()
        };
        if snapshot.state.is_final() {
            self.persist("jobs", id, &snapshot);
        }
    }

    pub fn start(&self, id: &str) {
        self.transition(id, JobState::Running, None, None);
    }

    pub fn finish(&self, id: &str, result: Value) {
        self.transition(id, JobState::Done, Some(result), None);
    }

    pub fn fail(&self, id: &str, error: String) {
        self.transition(id, JobState::Failed, None, Some(error));
    }
}
