//! Noise-sensitivity experiments: definition, per-cell evaluation against a
//! zero-noise baseline, result assembly and aggregation.
//!
//! A spec expands into cells `(month, level, observation)`. Each cell perturbs
//! the chosen variable over the month's whole context and target window,
//! forecasts, scores against actuals and records the signed deviation from
//! that month's baseline. Cells are independent and individually seeded, so
//! any scheduler that evaluates them and hands the records to [`assemble`]
//! produces the same results.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::ops::Range;

use serde::{Deserialize, Serialize};

use crate::calendar::{days_in_month, midnight, STEPS_PER_DAY};
use crate::dataset::Dataset;
use crate::forecast::{ForecastError, Forecaster, Horizon};
use crate::metrics::{deviation, MetricSet, MetricsError};
use crate::noise::{perturb_frame, Direction, NoiseError, NoiseMode, NoisePerturbation, MAX_LEVEL_PERCENT};
use crate::rng::derive_seed;
use crate::timeseries::{ChannelKind, Penetration, TimeSeriesFrame};

/// Per-forecast latency assumed when no warm-up calibration exists.
pub const DEFAULT_FORECAST_LATENCY_SECS: f64 = 0.05;
pub const ESTIMATE_SAFETY_FACTOR: f64 = 1.2;
pub const MIN_CALIBRATION_SAMPLES: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Month {
    Jan,
    Feb,
    Mar,
    Apr,
    May,
    Jun,
    Jul,
    Aug,
    Sep,
    Oct,
    Nov,
    Dec,
}

impl Month {
    pub const ALL: [Month; 12] = [
        Month::Jan,
        Month::Feb,
        Month::Mar,
        Month::Apr,
        Month::May,
        Month::Jun,
        Month::Jul,
        Month::Aug,
        Month::Sep,
        Month::Oct,
        Month::Nov,
        Month::Dec,
    ];

    /// 1-based calendar number.
    pub fn number(self) -> u32 {
        self as u32 + 1
    }

    pub fn from_number(n: u32) -> Option<Month> {
        Month::ALL.get(n.checked_sub(1)? as usize).copied()
    }
}

impl fmt::Display for Month {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Inclusive day-of-month range applied in every chosen month.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DayWindow {
    pub start: u32,
    pub end: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub variable: ChannelKind,
    pub penetration: Penetration,
    pub horizon: Horizon,
    pub months: Vec<Month>,
    pub day_window: DayWindow,
    /// Percent levels in (0, 30]; the 0% baseline is implicit.
    pub noise_levels: Vec<f64>,
    pub mode: NoiseMode,
    pub direction: Direction,
    pub observations: u32,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldError {
    pub field: String,
    pub message: String,
}

impl FieldError {
    fn new(field: &str, message: impl Into<String>) -> Self {
        FieldError { field: field.to_string(), message: message.into() }
    }
}

impl fmt::Display for FieldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum ExperimentError {
    #[error("invalid experiment spec: {}", join_fields(.0))]
    InvalidSpec(Vec<FieldError>),
    #[error("experiment setup failed: {0}")]
    Setup(String),
    #[error("experiment results are not ready")]
    NotReady,
    #[error(transparent)]
    Forecast(#[from] ForecastError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Noise(#[from] NoiseError),
}

fn join_fields(errors: &[FieldError]) -> String {
    let parts: Vec<String> = errors.iter().map(|e| alloc::format!("{e}")).collect();
    parts.join("; ")
}

impl ExperimentSpec {
    /// Checks every field and reports all problems at once. Day windows are
    /// checked against a leap year; [`plan_months`] re-checks against the
    /// dataset's actual year.
    pub fn validate(&self) -> Result<(), Vec<FieldError>> {
        let mut errs = Vec::new();
        if self.name.trim().is_empty() {
            errs.push(FieldError::new("name", "must not be empty"));
        }
        if !self.variable.is_weather() {
            errs.push(FieldError::new("variable", "must be a weather input, not net load"));
        }
        if self.months.is_empty() {
            errs.push(FieldError::new("months", "select at least one month"));
        }
        for (i, m) in self.months.iter().enumerate() {
            if self.months[..i].contains(m) {
                errs.push(FieldError::new("months", alloc::format!("{m} listed twice")));
            }
        }
        let DayWindow { start, end } = self.day_window;
        if start < 1 || start > end {
            errs.push(FieldError::new("day_window", alloc::format!("invalid range {start}..={end}")));
        } else {
            for m in &self.months {
                let max = days_in_month(2020, m.number()).expect("valid month");
                if end > max {
                    errs.push(FieldError::new("day_window", alloc::format!("day {end} does not exist in {m}")));
                }
            }
        }
        for (i, level) in self.noise_levels.iter().enumerate() {
            if !(level.is_finite() && *level > 0.0 && *level <= MAX_LEVEL_PERCENT) {
                errs.push(FieldError::new("noise_levels", alloc::format!("{level} is outside (0, 30]")));
            } else if self.noise_levels[..i].contains(level) {
                errs.push(FieldError::new("noise_levels", alloc::format!("{level} listed twice")));
            }
        }
        if self.observations < 1 {
            errs.push(FieldError::new("observations", "must be at least 1"));
        }
        if self.mode == NoiseMode::ConstantBias && self.direction == Direction::Both {
            errs.push(FieldError::new("direction", "constant bias needs a single direction (add or subtract)"));
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(errs)
        }
    }

    /// Forecasts needed: one baseline per month plus every observation.
    pub fn forecast_count(&self) -> usize {
        self.months.len() * (1 + self.noise_levels.len() * self.observations as usize)
    }

    pub fn record_count(&self) -> usize {
        self.months.len() * self.noise_levels.len() * self.observations as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ExperimentStatus {
    Queued,
    Running,
    Completed,
    Failed,
}

impl ExperimentStatus {
    pub fn is_terminal(self) -> bool {
        matches!(self, ExperimentStatus::Completed | ExperimentStatus::Failed)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonthBaseline {
    pub month: Month,
    pub metrics: MetricSet,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeviationRecord {
    pub month: Month,
    pub noise_level: f64,
    pub observation: u32,
    /// kW, noisy MAE minus baseline MAE.
    pub mae_dev: f64,
    /// Percent points; `None` when either MAPE was undefined.
    pub mape_dev: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellAggregate {
    pub month: Month,
    pub noise_level: f64,
    pub mean_mae_dev: f64,
    pub mean_mape_dev: Option<f64>,
}

/// Mean MAE deviation, rows are months and columns noise levels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Heatmap {
    pub months: Vec<Month>,
    pub levels: Vec<f64>,
    pub mae_dev: Vec<Vec<f64>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScatterPoint {
    pub level: f64,
    pub dev: f64,
}

/// Raw per-observation deviations of one month, one series per metric.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonthScatter {
    pub month: Month,
    pub mae: Vec<ScatterPoint>,
    pub mape: Vec<ScatterPoint>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregation {
    pub cells: Vec<CellAggregate>,
    pub heatmap: Heatmap,
    pub scatter: Vec<MonthScatter>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResults {
    pub spec: ExperimentSpec,
    pub status: ExperimentStatus,
    pub progress: f64,
    pub baseline: Vec<MonthBaseline>,
    pub records: Vec<DeviationRecord>,
    pub aggregates: Vec<CellAggregate>,
    pub heatmap: Option<Heatmap>,
    pub error: Option<String>,
}

impl ExperimentResults {
    pub fn pending(spec: ExperimentSpec) -> Self {
        ExperimentResults {
            spec,
            status: ExperimentStatus::Queued,
            progress: 0.0,
            baseline: Vec::new(),
            records: Vec::new(),
            aggregates: Vec::new(),
            heatmap: None,
            error: None,
        }
    }
}

/// Context plus target window of one month, already gap-filled.
#[derive(Clone, Debug)]
pub struct MonthPlan {
    pub month: Month,
    pub frame: TimeSeriesFrame,
    pub target: Range<usize>,
}

/// Slices the dataset into one window per chosen month. The context reaches
/// `context_days` back from the target, clipped at the start of the data, and
/// must hold at least `required_history` steps.
pub fn plan_months(
    spec: &ExperimentSpec,
    dataset: &Dataset,
    context_days: u32,
    required_history: usize,
) -> Result<Vec<MonthPlan>, ExperimentError> {
    spec.validate().map_err(ExperimentError::InvalidSpec)?;
    let year = dataset.year();
    let setup = |msg: String| ExperimentError::Setup(msg);
    spec.months
        .iter()
        .map(|&month| {
            let DayWindow { start, end } = spec.day_window;
            let first = midnight(year, month.number(), start)
                .ok_or_else(|| setup(alloc::format!("{month} {start} does not exist in {year}")))?;
            let last = midnight(year, month.number(), end)
                .ok_or_else(|| setup(alloc::format!("{month} {end} does not exist in {year}")))?;
            let t0 = dataset
                .index_of(first)
                .filter(|&i| i < dataset.len())
                .ok_or_else(|| setup(alloc::format!("{month} {start} {year} is outside the dataset")))?;
            let t1 = t0 + (end - start + 1) as usize * STEPS_PER_DAY;
            if dataset.index_of(last).is_none() || t1 > dataset.len() {
                return Err(setup(alloc::format!("{month} {end} {year} is outside the dataset")));
            }
            let c0 = t0.saturating_sub(context_days as usize * STEPS_PER_DAY);
            if t0 - c0 < required_history {
                return Err(setup(alloc::format!(
                    "{month} {start}: only {} steps of history available, forecaster needs {required_history}",
                    t0 - c0
                )));
            }
            let frame = dataset
                .frame(spec.penetration, c0..t1)
                .and_then(|f| f.interpolated_all())
                .map_err(|e| setup(alloc::format!("{month}: {e}")))?;
            Ok(MonthPlan { month, frame, target: (t0 - c0)..(t1 - c0) })
        })
        .collect()
}

pub fn check_forecaster(spec: &ExperimentSpec, forecaster: &dyn Forecaster) -> Result<(), ExperimentError> {
    if forecaster.penetration() != spec.penetration || forecaster.horizon() != spec.horizon {
        return Err(ExperimentError::Setup(alloc::format!(
            "forecaster serves {}/{} but the experiment asks for {}/{}",
            forecaster.penetration(),
            forecaster.horizon(),
            spec.penetration,
            spec.horizon
        )));
    }
    Ok(())
}

fn score(plan: &MonthPlan, frame: &TimeSeriesFrame, forecaster: &dyn Forecaster) -> Result<MetricSet, ExperimentError> {
    let forecast = forecaster.forecast(frame, plan.target.clone())?;
    let actual = &frame.channel(ChannelKind::NetLoadActual).map_err(ForecastError::from)?.raw_values()[plan.target.clone()];
    Ok(MetricSet::compute(actual, &forecast.point)?)
}

pub fn month_baseline(plan: &MonthPlan, forecaster: &dyn Forecaster) -> Result<MonthBaseline, ExperimentError> {
    Ok(MonthBaseline { month: plan.month, metrics: score(plan, &plan.frame, forecaster)? })
}

/// One unit of work. For constant bias every observation is the same draw, so
/// only observation 0 is evaluated and [`assemble`] replicates it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Cell {
    pub month_index: usize,
    pub level_index: usize,
    pub observation: u32,
}

pub fn cells(spec: &ExperimentSpec) -> Vec<Cell> {
    let effective = match spec.mode {
        NoiseMode::ConstantBias => 1,
        NoiseMode::UniformRandom => spec.observations,
    };
    let mut out = Vec::with_capacity(spec.months.len() * spec.noise_levels.len() * effective as usize);
    for month_index in 0..spec.months.len() {
        for level_index in 0..spec.noise_levels.len() {
            for observation in 0..effective {
                out.push(Cell { month_index, level_index, observation });
            }
        }
    }
    out
}

/// Seed of one record, derived from the experiment seed so a single record can be
/// recomputed in isolation.
pub fn record_seed(spec_seed: u64, month: Month, level: f64, observation: u32) -> u64 {
    let level_bp = libm::round(level * 100.0) as u64 & 0xffff;
    let key = (u64::from(month.number()) << 48) | (level_bp << 32) | u64::from(observation);
    derive_seed(spec_seed, key)
}

pub fn evaluate_cell(
    spec: &ExperimentSpec,
    plan: &MonthPlan,
    baseline: &MonthBaseline,
    forecaster: &dyn Forecaster,
    cell: Cell,
) -> Result<DeviationRecord, ExperimentError> {
    let level = spec.noise_levels[cell.level_index];
    let perturbation = NoisePerturbation {
        variable: spec.variable,
        mode: spec.mode,
        direction: spec.direction,
        level,
        seed: record_seed(spec.seed, plan.month, level, cell.observation),
    };
    let noisy = perturb_frame(&plan.frame, &perturbation)?;
    let metrics = score(plan, &noisy, forecaster)?;
    let dev = deviation(&metrics, &baseline.metrics)?;
    Ok(DeviationRecord {
        month: plan.month,
        noise_level: level,
        observation: cell.observation,
        mae_dev: dev.mae_dev,
        mape_dev: dev.mape_dev,
    })
}

fn order_key(spec: &ExperimentSpec, r: &DeviationRecord) -> (usize, usize, u32) {
    let m = spec.months.iter().position(|m| *m == r.month).unwrap_or(usize::MAX);
    let l = spec.noise_levels.iter().position(|l| *l == r.noise_level).unwrap_or(usize::MAX);
    (m, l, r.observation)
}

fn sorted_records(spec: &ExperimentSpec, mut records: Vec<DeviationRecord>) -> Vec<DeviationRecord> {
    records.sort_by_key(|r| order_key(spec, r));
    records
}

/// Builds Completed results from baselines and evaluated cells, in any order.
pub fn assemble(spec: &ExperimentSpec, baseline: Vec<MonthBaseline>, computed: Vec<DeviationRecord>) -> ExperimentResults {
    let mut records = sorted_records(spec, computed);
    if spec.mode == NoiseMode::ConstantBias {
        records = records
            .into_iter()
            .flat_map(|r| (0..spec.observations).map(move |o| DeviationRecord { observation: o, ..r }))
            .collect();
    }
    let mut baseline = baseline;
    baseline.sort_by_key(|b| spec.months.iter().position(|m| *m == b.month));
    let mut results = ExperimentResults {
        spec: spec.clone(),
        status: ExperimentStatus::Completed,
        progress: 1.0,
        baseline,
        records,
        aggregates: Vec::new(),
        heatmap: None,
        error: None,
    };
    let agg = aggregate(&results).expect("completed results aggregate");
    results.aggregates = agg.cells;
    results.heatmap = Some(agg.heatmap);
    results
}

/// Failed results that keep whatever was computed before the failure.
pub fn failed(
    spec: &ExperimentSpec,
    baseline: Vec<MonthBaseline>,
    partial: Vec<DeviationRecord>,
    progress: f64,
    error: String,
) -> ExperimentResults {
    ExperimentResults {
        spec: spec.clone(),
        status: ExperimentStatus::Failed,
        progress,
        baseline,
        records: sorted_records(spec, partial),
        aggregates: Vec::new(),
        heatmap: None,
        error: Some(error),
    }
}

/// Per-(month, level) means, the month x level heatmap and scatter payloads.
pub fn aggregate(results: &ExperimentResults) -> Result<Aggregation, ExperimentError> {
    if results.status != ExperimentStatus::Completed {
        return Err(ExperimentError::NotReady);
    }
    let spec = &results.spec;
    let mut cells = Vec::new();
    let mut grid = Vec::new();
    let mut scatter = Vec::new();
    for &month in &spec.months {
        let mut row = Vec::new();
        let month_records: Vec<&DeviationRecord> = results.records.iter().filter(|r| r.month == month).collect();
        for &level in &spec.noise_levels {
            let matching: Vec<&&DeviationRecord> = month_records.iter().filter(|r| r.noise_level == level).collect();
            let n = matching.len() as f64;
            let mean_mae_dev = if matching.is_empty() { 0.0 } else { matching.iter().map(|r| r.mae_dev).sum::<f64>() / n };
            let mean_mape_dev = if matching.is_empty() {
                None
            } else {
                matching.iter().map(|r| r.mape_dev).sum::<Option<f64>>().map(|s| s / n)
            };
            cells.push(CellAggregate { month, noise_level: level, mean_mae_dev, mean_mape_dev });
            row.push(mean_mae_dev);
        }
        grid.push(row);
        scatter.push(MonthScatter {
            month,
            mae: month_records.iter().map(|r| ScatterPoint { level: r.noise_level, dev: r.mae_dev }).collect(),
            mape: month_records
                .iter()
                .filter_map(|r| r.mape_dev.map(|dev| ScatterPoint { level: r.noise_level, dev }))
                .collect(),
        });
    }
    Ok(Aggregation {
        cells,
        heatmap: Heatmap { months: spec.months.clone(), levels: spec.noise_levels.clone(), mae_dev: grid },
        scatter,
    })
}

/// Evaluates every cell in order on the calling thread.
pub fn run_serial(
    spec: &ExperimentSpec,
    dataset: &Dataset,
    forecaster: &dyn Forecaster,
    context_days: u32,
) -> Result<ExperimentResults, ExperimentError> {
    check_forecaster(spec, forecaster)?;
    let plans = plan_months(spec, dataset, context_days, forecaster.required_history())?;
    let baseline = plans.iter().map(|p| month_baseline(p, forecaster)).collect::<Result<Vec<_>, _>>()?;
    let mut records = Vec::new();
    for cell in cells(spec) {
        let i = cell.month_index;
        records.push(evaluate_cell(spec, &plans[i], &baseline[i], forecaster, cell)?);
    }
    Ok(assemble(spec, baseline, records))
}

/// Median per-forecast latency from a warm-up run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub median_latency_secs: f64,
    pub samples: usize,
}

impl Calibration {
    /// Needs at least [`MIN_CALIBRATION_SAMPLES`] timings.
    pub fn from_latencies(latencies: &[f64]) -> Option<Calibration> {
        if latencies.len() < MIN_CALIBRATION_SAMPLES {
            return None;
        }
        let mut sorted = latencies.to_vec();
        sorted.sort_by(f64::total_cmp);
        let mid = sorted.len() / 2;
        let median = if sorted.len() % 2 == 0 { (sorted[mid - 1] + sorted[mid]) / 2.0 } else { sorted[mid] };
        Some(Calibration { median_latency_secs: median, samples: sorted.len() })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DurationEstimate {
    pub seconds: f64,
    pub calibrated: bool,
}

pub fn estimate_duration(spec: &ExperimentSpec, calibration: Option<&Calibration>) -> DurationEstimate {
    let (latency, calibrated) = match calibration {
        Some(c) => (c.median_latency_secs, true),
        None => (DEFAULT_FORECAST_LATENCY_SECS, false),
    };
    DurationEstimate { seconds: spec.forecast_count() as f64 * latency * ESTIMATE_SAFETY_FACTOR, calibrated }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    pub(crate) fn spec() -> ExperimentSpec {
        ExperimentSpec {
            name: "temp".into(),
            description: String::new(),
            variable: ChannelKind::Temperature,
            penetration: Penetration::P50,
            horizon: Horizon::Min15,
            months: vec![Month::Jan, Month::Jul],
            day_window: DayWindow { start: 3, end: 4 },
            noise_levels: vec![5.0, 10.0, 30.0],
            mode: NoiseMode::UniformRandom,
            direction: Direction::Both,
            observations: 50,
            seed: 9,
        }
    }

    #[test]
    fn valid_spec_passes() {
        assert_eq!(spec().validate(), Ok(()));
        assert_eq!(spec().record_count(), 300);
    }

    #[test]
    fn field_errors_are_collected() {
        let mut s = spec();
        s.name = "  ".into();
        s.months = vec![Month::Apr, Month::Apr];
        s.day_window = DayWindow { start: 30, end: 31 };
        s.noise_levels = vec![0.0, 31.0];
        s.observations = 0;
        s.mode = NoiseMode::ConstantBias;
        let errs = s.validate().unwrap_err();
        let fields: Vec<&str> = errs.iter().map(|e| e.field.as_str()).collect();
        for f in ["name", "months", "day_window", "noise_levels", "observations", "direction"] {
            assert!(fields.contains(&f), "missing {f} in {errs:?}");
        }
        let mut s = spec();
        s.variable = ChannelKind::NetLoadActual;
        assert_eq!(s.validate().unwrap_err()[0].field, "variable");
    }

    #[test]
    fn month_numbers() {
        assert_eq!(Month::Jan.number(), 1);
        assert_eq!(Month::from_number(12), Some(Month::Dec));
        assert_eq!(Month::from_number(0), None);
        assert_eq!(Month::from_number(13), None);
    }

    #[test]
    fn duration_estimates() {
        let cal = |secs: f64| Calibration::from_latencies(&[secs; 5]).unwrap();
        let mut s = spec();
        s.months = vec![Month::Jan];
        s.noise_levels = vec![5.0];
        s.observations = 1;
        let e = estimate_duration(&s, Some(&cal(0.1)));
        assert!((e.seconds - 0.24).abs() < 1e-12 && e.calibrated);

        let mut s = spec();
        s.months = vec![Month::Jan, Month::Feb, Month::Apr, Month::May, Month::Jul, Month::Aug, Month::Oct, Month::Nov];
        s.noise_levels = vec![1.0, 5.0, 10.0, 15.0, 20.0, 30.0];
        s.observations = 50;
        let e = estimate_duration(&s, Some(&cal(0.05)));
        assert!((e.seconds - 8.0 * 301.0 * 0.05 * 1.2).abs() < 1e-9);
        assert!((e.seconds - 144.48).abs() < 1e-9);

        s.noise_levels.clear();
        assert_eq!(s.forecast_count(), 8);
        let e = estimate_duration(&s, None);
        assert!(!e.calibrated);
        assert!((e.seconds - 8.0 * DEFAULT_FORECAST_LATENCY_SECS * 1.2).abs() < 1e-12);
        assert!(Calibration::from_latencies(&[0.1; 4]).is_none());
        assert_eq!(Calibration::from_latencies(&[5.0, 1.0, 3.0, 2.0, 4.0]).unwrap().median_latency_secs, 3.0);
    }

    fn rec(month: Month, level: f64, observation: u32, mae_dev: f64) -> DeviationRecord {
        DeviationRecord { month, noise_level: level, observation, mae_dev, mape_dev: Some(mae_dev * 10.0) }
    }

    fn baselines(s: &ExperimentSpec) -> Vec<MonthBaseline> {
        s.months
            .iter()
            .map(|&month| MonthBaseline {
                month,
                metrics: MetricSet { mae: 0.3, mape: Some(10.0), n_used: 192, n_excluded_mape: 0 },
            })
            .collect()
    }

    #[test]
    fn aggregation_means_and_heatmap() {
        let mut s = spec();
        s.months = vec![Month::Jan];
        s.noise_levels = vec![5.0];
        s.observations = 2;
        let r = assemble(&s, baselines(&s), vec![rec(Month::Jan, 5.0, 1, 0.3), rec(Month::Jan, 5.0, 0, 0.1)]);
        assert_eq!(r.records[0].observation, 0);
        let agg = aggregate(&r).unwrap();
        assert!((agg.cells[0].mean_mae_dev - 0.2).abs() < 1e-12);
        assert!((agg.cells[0].mean_mape_dev.unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(agg.heatmap.mae_dev, vec![vec![agg.cells[0].mean_mae_dev]]);
        assert_eq!(agg.scatter[0].mae.len(), 2);

        s.observations = 1;
        let r = assemble(&s, baselines(&s), vec![rec(Month::Jan, 5.0, 0, 0.07)]);
        assert_eq!(aggregate(&r).unwrap().cells[0].mean_mae_dev, 0.07);
    }

    #[test]
    fn constant_bias_replicates_single_draw() {
        let mut s = spec();
        s.mode = NoiseMode::ConstantBias;
        s.direction = Direction::Add;
        s.observations = 4;
        let computed: Vec<_> = cells(&s)
            .iter()
            .map(|c| rec(s.months[c.month_index], s.noise_levels[c.level_index], c.observation, 0.0))
            .collect();
        assert_eq!(computed.len(), 6);
        let r = assemble(&s, baselines(&s), computed);
        assert_eq!(r.records.len(), s.record_count());
        assert!(r.heatmap.unwrap().mae_dev.iter().flatten().all(|v| *v == 0.0));
    }

    #[test]
    fn not_ready_until_completed() {
        let r = ExperimentResults::pending(spec());
        assert_eq!(aggregate(&r), Err(ExperimentError::NotReady));
        let f = failed(&spec(), vec![], vec![], 0.5, "boom".into());
        assert_eq!(aggregate(&f), Err(ExperimentError::NotReady));
    }

    #[test]
    fn record_seeds_are_distinct() {
        let a = record_seed(1, Month::Jan, 5.0, 0);
        assert_ne!(a, record_seed(1, Month::Jan, 5.0, 1));
        assert_ne!(a, record_seed(1, Month::Feb, 5.0, 0));
        assert_ne!(a, record_seed(1, Month::Jan, 10.0, 0));
        assert_ne!(a, record_seed(2, Month::Jan, 5.0, 0));
        assert_eq!(a, record_seed(1, Month::Jan, 5.0, 0));
    }
}
