//! Canonical encodings of experiment specs and results.
//!
//! Field order follows the struct definitions and floats use shortest
//! round-trip formatting, so equal results always encode to equal bytes.

use forte_core::{ExperimentResults, ExperimentSpec};
use serde::{Deserialize, Serialize};

pub const RESULTS_SCHEMA_VERSION: u32 = 1;

pub const RESULTS_CSV_HEADER: [&str; 5] = ["month", "noise_level", "observation", "mae_dev", "mape_dev"];

#[derive(Serialize, Deserialize)]
struct ResultsDocument {
    schema_version: u32,
    results: ExperimentResults,
}

pub fn results_json(results: &ExperimentResults) -> String {
    let doc = ResultsDocument { schema_version: RESULTS_SCHEMA_VERSION, results: results.clone() };
    let mut s = serde_json::to_string_pretty(&doc).expect("results serialize");
    s.push('\n');
    s
}

pub fn parse_results_json(text: &str) -> Result<ExperimentResults, String> {
    let doc: ResultsDocument = serde_json::from_str(text).map_err(|e| e.to_string())?;
    if doc.schema_version != RESULTS_SCHEMA_VERSION {
        return Err(format!("unsupported results schema version {}", doc.schema_version));
    }
    Ok(doc.results)
}

/// One row per deviation record; undefined MAPE deviations are empty cells.
pub fn results_csv(results: &ExperimentResults) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(RESULTS_CSV_HEADER).expect("in-memory write");
    for r in &results.records {
        w.write_record([
            r.month.to_string(),
            r.noise_level.to_string(),
            r.observation.to_string(),
            r.mae_dev.to_string(),
            r.mape_dev.map(|v| v.to_string()).unwrap_or_default(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
}

pub fn spec_json(spec: &ExperimentSpec) -> String {
    serde_json::to_string_pretty(spec).expect("spec serializes")
}

/// Parses a spec, reporting the JSON path of the first offending field.
pub fn parse_spec(text: &str) -> Result<ExperimentSpec, (String, String)> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        (if path == "." { "body".to_string() } else { path }, e.into_inner().to_string())
    })
}
