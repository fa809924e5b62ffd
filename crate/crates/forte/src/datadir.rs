//! Layout of a Forte data directory.
//!
//! ```text
//! <data_dir>/dataset.csv                       ingested dataset
//! <data_dir>/models/<penetration>-<horizon>.json
//! <data_dir>/experiments/                      see `store`
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use forte_core::{Dataset, ForecasterModel, Horizon, Penetration};

use crate::csv_io::{self, IngestError};
use crate::model_io::{self, ModelIoError};
use crate::store::{ExperimentStore, StoreError};

#[derive(Debug, thiserror::Error)]
pub enum DataDirError {
    #[error("no dataset has been ingested into {0} (run `forte ingest` first)")]
    NoDataset(String),
    #[error("no fitted model for {penetration}/{horizon} (run `forte fit`)")]
    NoModel { penetration: Penetration, horizon: Horizon },
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Model(#[from] ModelIoError),
    #[error(transparent)]
    Store(#[from] StoreError),
}

pub type ModelKey = (Penetration, Horizon);

/// Fitted models by (penetration, horizon).
pub type ModelRegistry = BTreeMap<ModelKey, Arc<ForecasterModel>>;

#[derive(Clone, Debug)]
pub struct DataDir {
    root: PathBuf,
}

impl DataDir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        DataDir { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn dataset_path(&self) -> PathBuf {
        self.root.join("dataset.csv")
    }

    pub fn models_dir(&self) -> PathBuf {
        self.root.join("models")
    }

    pub fn model_path(&self, penetration: Penetration, horizon: Horizon) -> PathBuf {
        self.models_dir().join(format!("p{}-{}.json", penetration.percent(), horizon.name()))
    }

    pub fn experiments(&self) -> Result<ExperimentStore, DataDirError> {
        Ok(ExperimentStore::open(self.root.join("experiments"))?)
    }

    fn io(path: &Path) -> impl FnOnce(std::io::Error) -> DataDirError + '_ {
        move |source| DataDirError::Io { path: path.display().to_string(), source }
    }

    pub fn has_dataset(&self) -> bool {
        self.dataset_path().is_file()
    }

    /// Stores `dataset` in canonical CSV form and drops models fitted on any
    /// previous dataset. Returns how many models were removed.
    pub fn store_dataset(&self, dataset: &Dataset) -> Result<usize, DataDirError> {
        fs::create_dir_all(&self.root).map_err(Self::io(&self.root))?;
        let mut buf = Vec::new();
        csv_io::write_dataset(&mut buf, dataset).map_err(|e| DataDirError::Ingest(e.into()))?;
        let path = self.dataset_path();
        crate::store::write_atomic(&path, &buf).map_err(Self::io(&path))?;
        let mut removed = 0;
        if let Ok(entries) = fs::read_dir(self.models_dir()) {
            for entry in entries.flatten() {
                if entry.path().extension().is_some_and(|e| e == "json") && fs::remove_file(entry.path()).is_ok() {
                    removed += 1;
                }
            }
        }
        Ok(removed)
    }

    pub fn load_dataset(&self) -> Result<Dataset, DataDirError> {
        let path = self.dataset_path();
        if !path.is_file() {
            return Err(DataDirError::NoDataset(self.root.display().to_string()));
        }
        let file = fs::File::open(&path).map_err(Self::io(&path))?;
        Ok(csv_io::read_dataset(std::io::BufReader::new(file))?)
    }

    pub fn save_model(&self, model: &ForecasterModel) -> Result<PathBuf, DataDirError> {
        let dir = self.models_dir();
        fs::create_dir_all(&dir).map_err(Self::io(&dir))?;
        let path = self.model_path(model.penetration, model.horizon);
        model_io::save(&path, model)?;
        Ok(path)
    }

    pub fn load_model(&self, penetration: Penetration, horizon: Horizon) -> Result<ForecasterModel, DataDirError> {
        let path = self.model_path(penetration, horizon);
        if !path.is_file() {
            return Err(DataDirError::NoModel { penetration, horizon });
        }
        Ok(model_io::load(&path)?)
    }

    /// Every model present on disk. Unreadable files are returned as errors
    /// rather than skipped.
    pub fn load_models(&self) -> Result<ModelRegistry, DataDirError> {
        let mut out = ModelRegistry::new();
        for p in Penetration::ALL {
            for h in Horizon::ALL {
                match self.load_model(p, h) {
                    Ok(m) => {
                        out.insert((p, h), Arc::new(m));
                    }
                    Err(DataDirError::NoModel { .. }) => {}
                    Err(e) => return Err(e),
                }
            }
        }
        Ok(out)
    }
}
