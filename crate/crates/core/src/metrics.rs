//! Forecast error metrics and baseline deviations.

use serde::{Deserialize, Serialize};

/// Samples with |actual| below this (kW) are left out of MAPE.
pub const MAPE_MIN_ACTUAL_KW: f64 = 0.01;

#[derive(Clone, Copy, Debug, PartialEq, Eq, thiserror::Error)]
pub enum MetricsError {
    #[error("series lengths differ ({0} vs {1})")]
    ShapeMismatch(usize, usize),
    #[error("metric over an empty series")]
    EmptyInput,
    #[error("metric sets were computed over different samples")]
    BaselineMismatch,
}

fn check(actual: &[f64], predicted: &[f64]) -> Result<(), MetricsError> {
    if actual.len() != predicted.len() {
        return Err(MetricsError::ShapeMismatch(actual.len(), predicted.len()));
    }
    if actual.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    Ok(())
}

pub fn mae(actual: &[f64], predicted: &[f64]) -> Result<f64, MetricsError> {
    check(actual, predicted)?;
    let sum: f64 = actual.iter().zip(predicted).map(|(a, p)| libm::fabs(a - p)).sum();
    Ok(sum / actual.len() as f64)
}

/// MAPE in percent plus the number of excluded near-zero actuals. `None`
/// when every sample was excluded.
pub fn mape(actual: &[f64], predicted: &[f64]) -> Result<(Option<f64>, usize), MetricsError> {
    check(actual, predicted)?;
    let (mut sum, mut used) = (0.0, 0usize);
    for (a, p) in actual.iter().zip(predicted) {
        if libm::fabs(*a) >= MAPE_MIN_ACTUAL_KW {
            sum += libm::fabs(a - p) / libm::fabs(*a);
            used += 1;
        }
    }
    let excluded = actual.len() - used;
    Ok(((used > 0).then(|| 100.0 * sum / used as f64), excluded))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    /// kW.
    pub mae: f64,
    /// Percent; `None` if every actual was near zero.
    pub mape: Option<f64>,
    /// Samples included in MAPE.
    pub n_used: usize,
    pub n_excluded_mape: usize,
}

impl MetricSet {
    pub fn compute(actual: &[f64], predicted: &[f64]) -> Result<MetricSet, MetricsError> {
        let mae = mae(actual, predicted)?;
        let (mape, excluded) = mape(actual, predicted)?;
        Ok(MetricSet { mae, mape, n_used: actual.len() - excluded, n_excluded_mape: excluded })
    }

    pub fn len(&self) -> usize {
        self.n_used + self.n_excluded_mape
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Signed `metric - baseline` for MAE (kW) and MAPE (percent points).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Deviation {
    pub mae_dev: f64,
    pub mape_dev: Option<f64>,
}

pub fn deviation(metric: &MetricSet, baseline: &MetricSet) -> Result<Deviation, MetricsError> {
    if metric.n_used != baseline.n_used || metric.n_excluded_mape != baseline.n_excluded_mape {
        return Err(MetricsError::BaselineMismatch);
    }
    let mape_dev = match (metric.mape, baseline.mape) {
        (Some(m), Some(b)) => Some(m - b),
        _ => None,
    };
    Ok(Deviation { mae_dev: metric.mae - baseline.mae, mape_dev })
}

/// Fraction of actuals inside their closed interval.
pub fn interval_coverage(actual: &[f64], lower: &[f64], upper: &[f64]) -> Result<f64, MetricsError> {
    check(actual, lower)?;
    check(actual, upper)?;
    let inside = actual
        .iter()
        .zip(lower.iter().zip(upper))
        .filter(|(a, (lo, hi))| *lo <= *a && *a <= *hi)
        .count();
    Ok(inside as f64 / actual.len() as f64)
}
