//! Dataset CSV format: one row per 15-minute step, ISO-8601 UTC timestamps,
//! empty cells for missing samples.

use std::io::{Read, Write};

use forte_core::calendar::CADENCE_SECS;
use forte_core::{Channel, ChannelKind, Dataset, Penetration, SampleQuality, SeriesError};

use crate::timefmt::{format_timestamp, parse_timestamp};

pub const HEADER: [&str; 9] = [
    "timestamp",
    "temperature_f",
    "humidity_pct",
    "apparent_power_kva",
    "solar_irradiance_wm2",
    "netload_kw_p0",
    "netload_kw_p20",
    "netload_kw_p30",
    "netload_kw_p50",
];

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("bad header: expected `{expected}`, found `{found}`", expected = HEADER.join(","), found = .0)]
    Header(String),
    #[error("row {row}: {message}")]
    Row { row: u64, message: String },
    #[error("file has no data rows")]
    Empty,
    #[error("invalid dataset: {0}")]
    Series(#[from] SeriesError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl IngestError {
    /// 1-based line number of the offending row, when there is one.
    pub fn row(&self) -> Option<u64> {
        match self {
            IngestError::Row { row, .. } => Some(*row),
            _ => None,
        }
    }
}

fn cell(raw: &str, row: u64, column: &str) -> Result<Option<f64>, IngestError> {
    let raw = raw.trim();
    if raw.is_empty() {
        return Ok(None);
    }
    match raw.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(Some(v)),
        _ => Err(IngestError::Row { row, message: format!("{column}: `{raw}` is not a number") }),
    }
}

pub fn read_dataset<R: Read>(reader: R) -> Result<Dataset, IngestError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.iter().map(str::trim).ne(HEADER) {
        return Err(IngestError::Header(header.iter().collect::<Vec<_>>().join(",")));
    }
    let mut columns: Vec<Vec<Option<f64>>> = vec![Vec::new(); 8];
    let mut start = None;
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        let row = record.position().map_or(i as u64 + 2, |p| p.line());
        if record.len() != HEADER.len() {
            return Err(IngestError::Row {
                row,
                message: format!("expected {} fields, found {}", HEADER.len(), record.len()),
            });
        }
        let ts = parse_timestamp(record[0].trim())
            .map_err(|e| IngestError::Row { row, message: format!("timestamp: {e}") })?;
        let t0 = *start.get_or_insert(ts);
        let expected = t0 + i as i64 * CADENCE_SECS;
        if ts != expected {
            return Err(IngestError::Row {
                row,
                message: format!(
                    "timestamp {} breaks the 15-minute cadence (expected {})",
                    format_timestamp(ts),
                    format_timestamp(expected)
                ),
            });
        }
        for (c, column) in columns.iter_mut().enumerate() {
            column.push(cell(&record[c + 1], row, HEADER[c + 1])?);
        }
    }
    let start = start.ok_or(IngestError::Empty)?;
    if start % CADENCE_SECS != 0 {
        return Err(IngestError::Row { row: 2, message: "first timestamp is not on a 15-minute boundary".into() });
    }
    let weather = ChannelKind::WEATHER.iter().zip(&columns[..4]).map(|(k, v)| Channel::from_options(*k, v)).collect();
    let netload = columns[4..].iter().map(|v| Channel::from_options(ChannelKind::NetLoadActual, v)).collect();
    Ok(Dataset::new(start, weather, netload)?)
}

pub fn write_dataset<W: Write>(writer: W, ds: &Dataset) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(HEADER)?;
    let mut channels: Vec<&Channel> = ds.weather_channels().iter().collect();
    channels.extend(Penetration::ALL.iter().map(|p| ds.netload(*p)));
    let mut row: Vec<String> = Vec::with_capacity(HEADER.len());
    for i in 0..ds.len() {
        row.clear();
        row.push(format_timestamp(ds.timestamp(i)));
        for c in &channels {
            row.push(c.value(i).map(|v| v.to_string()).unwrap_or_default());
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Marks every non-Missing sample as observed data, so a dataset written and
/// read back compares equal to what ingestion produces.
pub fn as_observed(ds: &Dataset) -> Dataset {
    let reset = |c: &Channel| {
        let opts: Vec<Option<f64>> = (0..c.len())
            .map(|i| if c.quality()[i] == SampleQuality::Missing { None } else { c.value(i) })
            .collect();
        Channel::from_options(c.kind(), &opts)
    };
    Dataset::new(
        ds.start(),
        ds.weather_channels().iter().map(reset).collect(),
        Penetration::ALL.iter().map(|p| reset(ds.netload(*p))).collect(),
    )
    .expect("same shape as a valid dataset")
}
