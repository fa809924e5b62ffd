//! Probabilistic net-load forecasting: the [`Forecaster`] interface and the
//! reference ridge model.
//!
//! The reference model z-scores every weather input over the context window it
//! is handed, so a positive affine change of a whole weather channel leaves its
//! forecasts bit-identical. Z-scores are snapped to a 2^-24 grid before use;
//! the floating-point error of rescaling a channel is many orders of magnitude
//! below that grid, which is what makes the invariance exact rather than
//! approximate.

use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::TAU;
use core::fmt;
use core::ops::Range;
use core::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::calendar::{civil, year_fraction, CADENCE_SECS, STEPS_PER_DAY};
use crate::timeseries::{ChannelKind, Penetration, SeriesError, TimeSeriesFrame};

pub const RIDGE_LAMBDA: f64 = 1e-3;
pub const MIN_TRAINING_DAYS: usize = 14;
/// Training z-scores are computed over blocks of this many steps, matching the
/// span of a default 28-day context plus a two-day target.
pub const DEFAULT_NORMALIZATION_BLOCK: usize = 30 * STEPS_PER_DAY;

const Z_GRID: f64 = (1u64 << 24) as f64;

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum ForecastError {
    #[error("training window of {days:.2} days is shorter than the required {MIN_TRAINING_DAYS}")]
    InsufficientTraining { days: f64 },
    #[error("context provides {available} steps of history before the target, {needed} required")]
    InsufficientContext { needed: usize, available: usize },
    #[error("normalization needs at least two samples")]
    DegenerateWindow,
    #[error("model was fitted for {model} but the frame is {frame}")]
    PenetrationMismatch { model: Penetration, frame: Penetration },
    #[error("target range {start}..{end} does not fit a frame of {len} steps")]
    BadTarget { start: usize, end: usize, len: usize },
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("normal equations could not be solved")]
    Singular,
    #[error(transparent)]
    Series(#[from] SeriesError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Horizon {
    Min15,
    Hour24,
}

impl Horizon {
    pub const ALL: [Horizon; 2] = [Horizon::Min15, Horizon::Hour24];

    /// Steps between the newest usable actual and the forecast step.
    pub fn steps(self) -> usize {
        match self {
            Horizon::Min15 => 1,
            Horizon::Hour24 => STEPS_PER_DAY,
        }
    }

    pub fn netload_lags(self) -> &'static [usize] {
        match self {
            Horizon::Min15 => &[1, 2, 3, 96],
            Horizon::Hour24 => &[96, 192, 672],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Horizon::Min15 => "min15",
            Horizon::Hour24 => "hour24",
        }
    }
}

impl fmt::Display for Horizon {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Horizon {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "min15" | "15m" | "15min" => Ok(Horizon::Min15),
            "hour24" | "24h" => Ok(Horizon::Hour24),
            _ => Err(alloc::format!("unknown horizon `{s}` (expected 15min or 24h)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalizationStats {
    pub mean: f64,
    pub std: f64,
    pub degenerate: bool,
}

/// Compensated sum, so that rescaled inputs give rescaled sums to within an ulp.
fn neumaier_sum(values: impl Iterator<Item = f64>) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for v in values {
        let t = sum + v;
        if libm::fabs(sum) >= libm::fabs(v) {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Population z-scores. A window whose spread is negligible relative to its
/// level maps to all zeros and is flagged degenerate.
pub fn normalize(values: &[f64]) -> Result<(Vec<f64>, NormalizationStats), ForecastError> {
    if values.len() < 2 {
        return Err(ForecastError::DegenerateWindow);
    }
    let n = values.len() as f64;
    let mean = neumaier_sum(values.iter().copied()) / n;
    let var = neumaier_sum(values.iter().map(|x| (x - mean) * (x - mean))) / n;
    let std = libm::sqrt(var);
    let degenerate = std <= 1e-12 * libm::fabs(mean).max(1.0);
    let z = if degenerate {
        alloc::vec![0.0; values.len()]
    } else {
        values.iter().map(|x| (x - mean) / std).collect()
    };
    Ok((z, NormalizationStats { mean, std, degenerate }))
}

fn snapped_z(values: &[f64]) -> Result<Vec<f64>, ForecastError> {
    let (mut z, _) = normalize(values)?;
    for v in z.iter_mut() {
        *v = libm::round(*v * Z_GRID) / Z_GRID;
    }
    Ok(z)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Harmonic {
    Sin,
    Cos,
}

impl Harmonic {
    fn eval(self, phase: f64) -> f64 {
        match self {
            Harmonic::Sin => libm::sin(TAU * phase),
            Harmonic::Cos => libm::cos(TAU * phase),
        }
    }
}

/// One regression input. Weather features are z-scored; net-load lags are in kW.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Feature {
    Weather { channel: ChannelKind, lag: usize },
    /// Weather z-score modulated by an annual harmonic, which lets the
    /// temperature response flip sign between heating and cooling seasons.
    SeasonalWeather { channel: ChannelKind, lag: usize, harmonic: Harmonic },
    NetLoadLag { lag: usize },
    TimeOfDay { harmonic: Harmonic },
    DayOfWeek { harmonic: Harmonic },
    DayOfYear { harmonic: Harmonic },
}

impl Feature {
    pub fn lag(&self) -> usize {
        match *self {
            Feature::Weather { lag, .. } | Feature::SeasonalWeather { lag, .. } | Feature::NetLoadLag { lag } => lag,
            _ => 0,
        }
    }

    fn weather_channel(&self) -> Option<ChannelKind> {
        match *self {
            Feature::Weather { channel, .. } | Feature::SeasonalWeather { channel, .. } => Some(channel),
            _ => None,
        }
    }
}

/// Feature set of the reference model. Apparent power is a load measurement,
/// so it is only available `horizon` steps back.
pub fn default_features(horizon: Horizon) -> Vec<Feature> {
    use ChannelKind::*;
    let mut f = Vec::new();
    for channel in [Temperature, Humidity, SolarIrradiance] {
        f.push(Feature::Weather { channel, lag: 0 });
    }
    f.push(Feature::Weather { channel: ApparentPower, lag: horizon.steps() });
    for channel in [Temperature, Humidity, SolarIrradiance] {
        for harmonic in [Harmonic::Cos, Harmonic::Sin] {
            f.push(Feature::SeasonalWeather { channel, lag: 0, harmonic });
        }
    }
    f.extend(horizon.netload_lags().iter().map(|&lag| Feature::NetLoadLag { lag }));
    for harmonic in [Harmonic::Sin, Harmonic::Cos] {
        f.push(Feature::TimeOfDay { harmonic });
        f.push(Feature::DayOfWeek { harmonic });
        f.push(Feature::DayOfYear { harmonic });
    }
    f
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForecastSeries {
    pub start: i64,
    pub cadence_secs: i64,
    pub horizon: Horizon,
    pub point: Vec<f64>,
    pub lower95: Vec<f64>,
    pub upper95: Vec<f64>,
}

impl ForecastSeries {
    pub fn len(&self) -> usize {
        self.point.len()
    }

    pub fn is_empty(&self) -> bool {
        self.point.is_empty()
    }
}

/// Anything that maps a context frame and a target range to a forecast.
pub trait Forecaster: Send + Sync {
    fn horizon(&self) -> Horizon;

    fn penetration(&self) -> Penetration;

    /// Steps of history needed before the first target step.
    fn required_history(&self) -> usize;

    fn forecast(&self, context: &TimeSeriesFrame, target: Range<usize>) -> Result<ForecastSeries, ForecastError>;
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForecasterModel {
    pub horizon: Horizon,
    pub penetration: Penetration,
    pub features: Vec<Feature>,
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub residual_q025: f64,
    pub residual_q975: f64,
    /// UTC epoch seconds, end exclusive.
    pub training_window: (i64, i64),
    pub normalization_block: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitOptions {
    pub ridge_lambda: f64,
    pub normalization_block: usize,
    pub features: Vec<Feature>,
}

impl FitOptions {
    pub fn new(horizon: Horizon) -> Self {
        FitOptions {
            ridge_lambda: RIDGE_LAMBDA,
            normalization_block: DEFAULT_NORMALIZATION_BLOCK,
            features: default_features(horizon),
        }
    }
}

/// Precomputed inputs for building feature rows over one frame.
struct FeatureSource<'a> {
    frame: &'a TimeSeriesFrame,
    /// Snapped z-scores per weather channel, in [`ChannelKind::WEATHER`] order.
    z: [Option<Vec<f64>>; 4],
    netload: &'a [f64],
}

fn weather_slot(kind: ChannelKind) -> usize {
    ChannelKind::WEATHER.iter().position(|k| *k == kind).expect("weather channel")
}

impl<'a> FeatureSource<'a> {
    /// `blocks` partitions the frame into normalization windows.
    fn new(frame: &'a TimeSeriesFrame, features: &[Feature], blocks: &[Range<usize>]) -> Result<Self, ForecastError> {
        let mut z: [Option<Vec<f64>>; 4] = Default::default();
        for kind in features.iter().filter_map(Feature::weather_channel) {
            let slot = weather_slot(kind);
            if z[slot].is_some() {
                continue;
            }
            let raw = frame.channel(kind)?.raw_values();
            let mut col = Vec::with_capacity(raw.len());
            for b in blocks {
                col.extend(snapped_z(&raw[b.clone()])?);
            }
            z[slot] = Some(col);
        }
        let netload = frame.channel(ChannelKind::NetLoadActual)?.raw_values();
        Ok(FeatureSource { frame, z, netload })
    }

    fn row(&self, t: usize, features: &[Feature], out: &mut Vec<f64>) {
        out.clear();
        let ts = self.frame.timestamp(t);
        let c = civil(ts);
        let z = |kind: ChannelKind, idx: usize| self.z[weather_slot(kind)].as_ref().expect("prepared")[idx];
        for f in features {
            let v = match *f {
                Feature::Weather { channel, lag } => z(channel, t - lag),
                Feature::SeasonalWeather { channel, lag, harmonic } => {
                    z(channel, t - lag) * harmonic.eval(year_fraction(ts))
                }
                Feature::NetLoadLag { lag } => self.netload[t - lag],
                Feature::TimeOfDay { harmonic } => {
                    harmonic.eval(f64::from(c.step_of_day) / STEPS_PER_DAY as f64)
                }
                Feature::DayOfWeek { harmonic } => harmonic.eval(f64::from(c.weekday) / 7.0),
                Feature::DayOfYear { harmonic } => harmonic.eval(year_fraction(ts)),
            };
            out.push(v);
        }
    }
}

fn normalization_blocks(len: usize, block: usize) -> Vec<Range<usize>> {
    let block = block.max(2);
    let mut blocks = Vec::new();
    let mut s = 0;
    while s < len {
        let e = (s + block).min(len);
        blocks.push(s..e);
        s = e;
    }
    // Fold a short tail into its predecessor.
    if blocks.len() > 1 && blocks.last().map_or(false, |b| b.len() < block / 2) {
        let tail = blocks.pop().unwrap();
        blocks.last_mut().unwrap().end = tail.end;
    }
    blocks
}

/// Linear-interpolated empirical quantile (`q` in [0, 1]) of sorted data.
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = libm::floor(h) as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn fit(training: &TimeSeriesFrame, horizon: Horizon, penetration: Penetration) -> Result<ForecasterModel, ForecastError> {
    fit_with(training, horizon, penetration, &FitOptions::new(horizon))
}

/// Ridge least squares of net load on the feature set; the intercept is not
/// penalized. Missing samples are interpolated first.
pub fn fit_with(
    training: &TimeSeriesFrame,
    horizon: Horizon,
    penetration: Penetration,
    options: &FitOptions,
) -> Result<ForecasterModel, ForecastError> {
    if training.penetration() != penetration {
        return Err(ForecastError::PenetrationMismatch { model: penetration, frame: training.penetration() });
    }
    if training.len() < MIN_TRAINING_DAYS * STEPS_PER_DAY {
        return Err(ForecastError::InsufficientTraining { days: training.len() as f64 / STEPS_PER_DAY as f64 });
    }
    check_feature_horizon(&options.features, horizon)?;
    let frame = training.interpolated_all()?;
    let history = required_history(&options.features);
    let blocks = normalization_blocks(frame.len(), options.normalization_block);
    let source = FeatureSource::new(&frame, &options.features, &blocks)?;

    let p = options.features.len() + 1;
    let rows = frame.len().saturating_sub(history);
    let mut design = Vec::with_capacity(rows * p);
    let mut targets = Vec::with_capacity(rows);
    let mut row = Vec::with_capacity(p);
    for t in history..frame.len() {
        source.row(t, &options.features, &mut row);
        design.extend_from_slice(&row);
        design.push(1.0);
        targets.push(source.netload[t]);
    }
    let x = DMatrix::from_row_slice(rows, p, &design);
    let y = DVector::from_vec(targets);
    let mut gram = x.tr_mul(&x);
    for i in 0..p - 1 {
        gram[(i, i)] += options.ridge_lambda;
    }
    let rhs = x.tr_mul(&y);
    let solution = gram.cholesky().ok_or(ForecastError::Singular)?.solve(&rhs);

    let fitted = &x * &solution;
    let mut residuals: Vec<f64> = y.iter().zip(fitted.iter()).map(|(a, f)| a - f).collect();
    residuals.sort_by(f64::total_cmp);

    Ok(ForecasterModel {
        horizon,
        penetration,
        features: options.features.clone(),
        weights: solution.as_slice()[..p - 1].to_vec(),
        intercept: solution[p - 1],
        residual_q025: quantile_sorted(&residuals, 0.025),
        residual_q975: quantile_sorted(&residuals, 0.975),
        training_window: (frame.start(), frame.end()),
        normalization_block: options.normalization_block,
    })
}

fn required_history(features: &[Feature]) -> usize {
    features.iter().map(Feature::lag).max().unwrap_or(0)
}

fn check_feature_horizon(features: &[Feature], horizon: Horizon) -> Result<(), ForecastError> {
    let peeks = features.iter().any(|f| match f {
        Feature::NetLoadLag { lag } => *lag < horizon.steps(),
        Feature::Weather { channel: ChannelKind::ApparentPower, lag } => *lag < horizon.steps(),
        _ => false,
    });
    if peeks {
        return Err(ForecastError::InvalidModel(alloc::format!(
            "load features must be at least {} steps old for horizon {horizon}",
            horizon.steps()
        )));
    }
    Ok(())
}

impl ForecasterModel {
    pub fn validate(&self) -> Result<(), ForecastError> {
        if self.weights.len() != self.features.len() {
            return Err(ForecastError::InvalidModel("one weight per feature required".into()));
        }
        if !(self.residual_q025 <= self.residual_q975) {
            return Err(ForecastError::InvalidModel("residual_q025 exceeds residual_q975".into()));
        }
        check_feature_horizon(&self.features, self.horizon)
    }
}

/// Forecasts `target` (indices into `context`), normalizing weather over the
/// whole presented frame.
pub fn predict(model: &ForecasterModel, context: &TimeSeriesFrame, target: Range<usize>) -> Result<ForecastSeries, ForecastError> {
    model.validate()?;
    if context.penetration() != model.penetration {
        return Err(ForecastError::PenetrationMismatch { model: model.penetration, frame: context.penetration() });
    }
    if target.start > target.end || target.end > context.len() {
        return Err(ForecastError::BadTarget { start: target.start, end: target.end, len: context.len() });
    }
    let needed = required_history(&model.features);
    if target.start < needed {
        return Err(ForecastError::InsufficientContext { needed, available: target.start });
    }
    let frame = context.interpolated_all()?;
    let whole = [0..frame.len()];
    let source = FeatureSource::new(&frame, &model.features, &whole)?;

    let n = target.len();
    let (mut point, mut lower95, mut upper95) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    let mut row = Vec::with_capacity(model.features.len());
    for t in target.clone() {
        source.row(t, &model.features, &mut row);
        let y = model.intercept + row.iter().zip(&model.weights).map(|(x, w)| x * w).sum::<f64>();
        point.push(y);
        lower95.push(y + model.residual_q025);
        upper95.push(y + model.residual_q975);
    }
    Ok(ForecastSeries {
        start: context.start() + target.start as i64 * CADENCE_SECS,
        cadence_secs: CADENCE_SECS,
        horizon: model.horizon,
        point,
        lower95,
        upper95,
    })
}

impl Forecaster for ForecasterModel {
    fn horizon(&self) -> Horizon {
        self.horizon
    }

    fn penetration(&self) -> Penetration {
        self.penetration
    }

    fn required_history(&self) -> usize {
        required_history(&self.features)
    }

    fn forecast(&self, context: &TimeSeriesFrame, target: Range<usize>) -> Result<ForecastSeries, ForecastError> {
        predict(self, context, target)
    }
}
