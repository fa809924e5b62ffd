//! File-backed experiment store.
//!
//! ```text
//! <root>/<id>/spec.json     ExperimentSpec as submitted
//! <root>/<id>/status.json   StatusDocument, rewritten on every transition
//! <root>/<id>/results.json  canonical results (see `export`)
//! <root>/<id>/results.csv   one row per deviation record
//! ```
//!
//! Every file is replaced by writing a temporary sibling and renaming it over
//! the target. Results are committed before the status flips to a terminal
//! state, and a Completed status whose results cannot be read is reported as
//! Failed on load.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use forte_core::{ExperimentResults, ExperimentSpec, ExperimentStatus};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::export;
use crate::timefmt::now_rfc3339;

pub const STATUS_SCHEMA_VERSION: u32 = 1;
pub const UNCOMMITTED_RESULTS: &str = "run was interrupted before its results were committed";

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("storage error at {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("experiment `{0}` not found")]
    NotFound(String),
    #[error("corrupt file {path}: {message}")]
    Corrupt { path: String, message: String },
    #[error("experiment `{0}` is completed and can no longer change")]
    Immutable(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |source| StoreError::Io { path: path.display().to_string(), source }
}

/// Writes `bytes` to a temporary file next to `path`, syncs it and renames it
/// into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("file");
    let tmp = dir.join(format!(".{name}.{:08x}.tmp", rand::rng().random::<u32>()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatusDocument {
    pub schema_version: u32,
    pub id: String,
    pub name: String,
    pub created_at: String,
    pub updated_at: String,
    pub status: ExperimentStatus,
    pub progress: f64,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StoredExperiment {
    pub id: String,
    pub created_at: String,
    pub spec: ExperimentSpec,
    pub status: ExperimentStatus,
    pub progress: f64,
    pub error: Option<String>,
    pub results: Option<ExperimentResults>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub id: String,
    pub name: String,
    pub created_at: String,
    pub status: ExperimentStatus,
    pub progress: f64,
}

#[derive(Clone, Debug)]
pub struct ExperimentStore {
    root: PathBuf,
}

impl ExperimentStore {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(io_err(&root))?;
        Ok(ExperimentStore { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn dir(&self, id: &str) -> PathBuf {
        self.root.join(id)
    }

    fn existing_dir(&self, id: &str) -> Result<PathBuf, StoreError> {
        let valid = !id.is_empty() && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-');
        let dir = self.dir(id);
        if valid && dir.join("status.json").is_file() {
            Ok(dir)
        } else {
            Err(StoreError::NotFound(id.to_string()))
        }
    }

    fn write(&self, path: &Path, bytes: &[u8]) -> Result<(), StoreError> {
        write_atomic(path, bytes).map_err(io_err(path))
    }

    fn new_id() -> String {
        let now = chrono::Utc::now().format("%Y%m%dT%H%M%S%3fZ");
        format!("{now}-{:08x}", rand::rng().random::<u32>())
    }

    /// Persists a new Queued experiment and returns its id.
    pub fn save(&self, spec: &ExperimentSpec) -> Result<String, StoreError> {
        let id = loop {
            let id = Self::new_id();
            let dir = self.dir(&id);
            match fs::create_dir(&dir) {
                Ok(()) => break id,
                Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
                Err(e) => return Err(io_err(&dir)(e)),
            }
        };
        let dir = self.dir(&id);
        self.write(&dir.join("spec.json"), export::spec_json(spec).as_bytes())?;
        let now = now_rfc3339();
        let status = StatusDocument {
            schema_version: STATUS_SCHEMA_VERSION,
            id: id.clone(),
            name: spec.name.clone(),
            created_at: now.clone(),
            updated_at: now,
            status: ExperimentStatus::Queued,
            progress: 0.0,
            error: None,
        };
        self.write_status(&dir, &status)?;
        Ok(id)
    }

    fn write_status(&self, dir: &Path, status: &StatusDocument) -> Result<(), StoreError> {
        let text = serde_json::to_string_pretty(status).expect("status serializes");
        self.write(&dir.join("status.json"), text.as_bytes())
    }

    fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, StoreError> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        serde_json::from_str(&text)
            .map_err(|e| StoreError::Corrupt { path: path.display().to_string(), message: e.to_string() })
    }

    pub fn status(&self, id: &str) -> Result<StatusDocument, StoreError> {
        Self::read_json(&self.existing_dir(id)?.join("status.json"))
    }

    /// Moves a non-completed experiment to `status`.
    pub fn set_status(
        &self,
        id: &str,
        status: ExperimentStatus,
        progress: f64,
        error: Option<String>,
    ) -> Result<(), StoreError> {
        let dir = self.existing_dir(id)?;
        let mut doc: StatusDocument = Self::read_json(&dir.join("status.json"))?;
        if doc.status == ExperimentStatus::Completed {
            return Err(StoreError::Immutable(id.to_string()));
        }
        doc.status = status;
        doc.progress = progress;
        doc.error = error;
        doc.updated_at = now_rfc3339();
        self.write_status(&dir, &doc)
    }

    /// First half of a commit: results.json and results.csv.
    pub fn write_results(&self, id: &str, results: &ExperimentResults) -> Result<(), StoreError> {
        let dir = self.existing_dir(id)?;
        if self.status(id)?.status == ExperimentStatus::Completed {
            return Err(StoreError::Immutable(id.to_string()));
        }
        self.write(&dir.join("results.json"), export::results_json(results).as_bytes())?;
        self.write(&dir.join("results.csv"), export::results_csv(results).as_bytes())
    }

    /// Writes the results, then flips the status to match them.
    pub fn commit_results(&self, id: &str, results: &ExperimentResults) -> Result<(), StoreError> {
        self.write_results(id, results)?;
        self.set_status(id, results.status, results.progress, results.error.clone())
    }

    fn read_results(dir: &Path) -> Option<Result<ExperimentResults, String>> {
        let path = dir.join("results.json");
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return None,
            Err(e) => return Some(Err(e.to_string())),
        };
        Some(export::parse_results_json(&text))
    }

    pub fn load(&self, id: &str) -> Result<StoredExperiment, StoreError> {
        let dir = self.existing_dir(id)?;
        let status: StatusDocument = Self::read_json(&dir.join("status.json"))?;
        let spec: ExperimentSpec = Self::read_json(&dir.join("spec.json"))?;
        let mut out = StoredExperiment {
            id: status.id,
            created_at: status.created_at,
            spec,
            status: status.status,
            progress: status.progress,
            error: status.error,
            results: None,
        };
        match Self::read_results(&dir) {
            Some(Ok(r)) if !(out.status == ExperimentStatus::Completed && r.status != ExperimentStatus::Completed) => {
                out.results = Some(r)
            }
            _ if out.status == ExperimentStatus::Completed => {
                out.status = ExperimentStatus::Failed;
                out.error = Some(UNCOMMITTED_RESULTS.to_string());
            }
            _ => {}
        }
        Ok(out)
    }

    /// Summaries, newest first.
    pub fn list(&self) -> Result<Vec<ExperimentSummary>, StoreError> {
        let mut out = Vec::new();
        for entry in fs::read_dir(&self.root).map_err(io_err(&self.root))? {
            let entry = entry.map_err(io_err(&self.root))?;
            let Some(id) = entry.file_name().to_str().map(str::to_string) else { continue };
            let Ok(exp) = self.load(&id) else { continue };
            out.push(ExperimentSummary {
                id: exp.id,
                name: exp.spec.name,
                created_at: exp.created_at,
                status: exp.status,
                progress: exp.progress,
            });
        }
        out.sort_by(|a, b| b.created_at.cmp(&a.created_at).then_with(|| b.id.cmp(&a.id)));
        Ok(out)
    }

    pub fn delete(&self, id: &str) -> Result<(), StoreError> {
        let dir = self.existing_dir(id)?;
        fs::remove_dir_all(&dir).map_err(io_err(&dir))
    }

    /// Ids left Queued or Running by a previous process, oldest first.
    pub fn unfinished(&self) -> Result<Vec<String>, StoreError> {
        let mut ids: Vec<String> = self
            .list()?
            .into_iter()
            .filter(|s| !s.status.is_terminal())
            .map(|s| s.id)
            .collect();
        ids.reverse();
        Ok(ids)
    }
}
