//! Versioned JSON documents for fitted reference models.

use std::fs;
use std::path::Path;

use forte_core::forecast::ForecastError;
use forte_core::ForecasterModel;
use serde::{Deserialize, Serialize};

pub const MODEL_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum ModelIoError {
    #[error("model file {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("model file is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("model schema version {found} is not supported (expected {MODEL_SCHEMA_VERSION})")]
    Version { found: u32 },
    #[error(transparent)]
    Invalid(#[from] ForecastError),
}

#[derive(Serialize, Deserialize)]
struct ModelDocument {
    schema_version: u32,
    model: ForecasterModel,
}

#[derive(Deserialize)]
struct VersionProbe {
    schema_version: u32,
}

pub fn to_json(model: &ForecasterModel) -> String {
    let doc = ModelDocument { schema_version: MODEL_SCHEMA_VERSION, model: model.clone() };
    serde_json::to_string_pretty(&doc).expect("model serializes")
}

pub fn from_json(text: &str) -> Result<ForecasterModel, ModelIoError> {
    let probe: VersionProbe = serde_json::from_str(text)?;
    if probe.schema_version != MODEL_SCHEMA_VERSION {
        return Err(ModelIoError::Version { found: probe.schema_version });
    }
    let doc: ModelDocument = serde_json::from_str(text)?;
    doc.model.validate()?;
    Ok(doc.model)
}

pub fn save(path: &Path, model: &ForecasterModel) -> Result<(), ModelIoError> {
    crate::store::write_atomic(path, to_json(model).as_bytes())
        .map_err(|source| ModelIoError::Io { path: path.display().to_string(), source })
}

pub fn load(path: &Path) -> Result<ForecasterModel, ModelIoError> {
    let text = fs::read_to_string(path).map_err(|source| ModelIoError::Io { path: path.display().to_string(), source })?;
    from_json(&text)
}
