//! REST interface under `/api`.
//!
//! | Method | Path | Success |
//! |---|---|---|
//! | GET | `/api/meta` | 200 coverage, levels, horizons, channels, fitted models |
//! | GET | `/api/series?start&end&penetration&channels` | 200 columnar slice with quality tags |
//! | POST | `/api/forecast` | 200 actual, forecast, metrics |
//! | POST | `/api/experiments` | 202 `{id, eta_seconds, eta_calibrated}` |
//! | GET | `/api/experiments` | 200 summaries, newest first |
//! | GET | `/api/experiments/{id}` | 200 stored experiment with live progress |
//! | GET | `/api/experiments/{id}/aggregate` | 200 means, heatmap and scatter |
//! | GET | `/api/experiments/{id}/results.csv` | 200 `text/csv` |
//! | DELETE | `/api/experiments/{id}` | 204 |
//!
//! Errors are `{code, message, fields}` with status 400, 404, 409 or 422.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, RwLock};

use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use forte_core::calendar::{CADENCE_SECS, STEPS_PER_DAY};
use forte_core::experiment::{self, estimate_duration, Calibration, FieldError};
use forte_core::forecast::ForecastError;
use forte_core::noise::{ad_hoc_noise, AD_HOC_LEVELS};
use forte_core::timeseries::{apply_override, data_quality};
use forte_core::{ChannelKind, Dataset, ForecastSeries, Forecaster, Horizon, MetricSet, Penetration, SampleQuality};
use serde::{Deserialize, Serialize};

use crate::datadir::{ModelKey, ModelRegistry};
use crate::export;
use crate::queue::{JobEnv, JobQueue};
use crate::runner;
use crate::store::{ExperimentStore, StoreError};
use crate::timefmt::{format_timestamp, parse_timestamp};

pub const API_SCHEMA_VERSION: u32 = 1;
const CALIBRATION_SAMPLES: usize = 5;

#[derive(Debug, Serialize)]
pub struct ApiError {
    #[serde(skip)]
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
    pub fields: Vec<FieldError>,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError { status, code, message: message.into(), fields: Vec::new() }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "bad_request", message)
    }

    fn unprocessable(code: &'static str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, code, message)
    }

    fn no_dataset() -> Self {
        Self::new(StatusCode::CONFLICT, "no_dataset", "no dataset has been ingested")
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(&self)).into_response()
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::NotFound(_) => ApiError::new(StatusCode::NOT_FOUND, "not_found", e.to_string()),
            StoreError::Immutable(_) => ApiError::new(StatusCode::CONFLICT, "immutable", e.to_string()),
            _ => ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "storage_error", e.to_string()),
        }
    }
}

type ApiResult<T> = Result<T, ApiError>;

struct Inner {
    dataset: Option<Arc<Dataset>>,
    models: Arc<RwLock<ModelRegistry>>,
    store: ExperimentStore,
    queue: Option<JobQueue>,
    context_days: u32,
    calibrations: Mutex<HashMap<ModelKey, Calibration>>,
}

/// Shared service state. The dataset is held gap-filled, so every endpoint
/// sees the same interpolated values and quality tags.
#[derive(Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

impl AppState {
    pub fn new(
        dataset: Option<Dataset>,
        models: ModelRegistry,
        store: ExperimentStore,
        context_days: u32,
        workers: usize,
    ) -> Result<AppState, forte_core::SeriesError> {
        let dataset = dataset.map(|d| d.interpolated()).transpose()?.map(Arc::new);
        let models = Arc::new(RwLock::new(models));
        let queue = dataset.as_ref().map(|ds| {
            let env = JobEnv { dataset: Arc::clone(ds), models: Arc::clone(&models), context_days, workers };
            JobQueue::start(store.clone(), env)
        });
        if let Some(q) = &queue {
            for id in store.unfinished().unwrap_or_default() {
                q.enqueue(id);
            }
        }
        Ok(AppState {
            inner: Arc::new(Inner { dataset, models, store, queue, context_days, calibrations: Mutex::default() }),
        })
    }

    pub fn store(&self) -> &ExperimentStore {
        &self.inner.store
    }

    pub fn queue(&self) -> Option<&JobQueue> {
        self.inner.queue.as_ref()
    }

    fn dataset(&self) -> ApiResult<&Arc<Dataset>> {
        self.inner.dataset.as_ref().ok_or_else(ApiError::no_dataset)
    }

    fn model(&self, penetration: Penetration, horizon: Horizon) -> ApiResult<Arc<forte_core::ForecasterModel>> {
        self.inner.models.read().expect("model lock").get(&(penetration, horizon)).cloned().ok_or_else(|| {
            ApiError::new(
                StatusCode::CONFLICT,
                "model_not_fitted",
                format!("no fitted model for {penetration}/{}", horizon.name()),
            )
        })
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/api/meta", get(meta))
        .route("/api/series", get(series))
        .route("/api/forecast", post(forecast))
        .route("/api/experiments", post(submit_experiment).get(list_experiments))
        .route("/api/experiments/{id}", get(get_experiment).delete(delete_experiment))
        .route("/api/experiments/{id}/aggregate", get(aggregate_experiment))
        .route("/api/experiments/{id}/results.csv", get(experiment_csv))
        .with_state(state)
}

#[derive(Serialize)]
struct Coverage {
    start: String,
    /// Exclusive.
    end: String,
    steps: usize,
}

#[derive(Serialize)]
struct ChannelMeta {
    name: &'static str,
    unit: &'static str,
    weather: bool,
}

#[derive(Serialize)]
struct ModelStatus {
    penetration: Penetration,
    horizon: Horizon,
    fitted: bool,
}

#[derive(Serialize)]
struct Meta {
    schema_version: u32,
    cadence_secs: i64,
    dataset_loaded: bool,
    coverage: Option<Coverage>,
    penetrations: Vec<u32>,
    horizons: Vec<Horizon>,
    channels: Vec<ChannelMeta>,
    models: Vec<ModelStatus>,
    any_model_fitted: bool,
    context_days: u32,
    ad_hoc_noise_levels: Vec<f64>,
}

async fn meta(State(state): State<AppState>) -> Json<Meta> {
    let fitted = state.inner.models.read().expect("model lock");
    let models: Vec<ModelStatus> = Penetration::ALL
        .iter()
        .flat_map(|&p| Horizon::ALL.iter().map(move |&h| (p, h)))
        .map(|(penetration, horizon)| ModelStatus {
            penetration,
            horizon,
            fitted: fitted.contains_key(&(penetration, horizon)),
        })
        .collect();
    Json(Meta {
        schema_version: API_SCHEMA_VERSION,
        cadence_secs: CADENCE_SECS,
        dataset_loaded: state.inner.dataset.is_some(),
        coverage: state.inner.dataset.as_ref().map(|d| Coverage {
            start: format_timestamp(d.start()),
            end: format_timestamp(d.end()),
            steps: d.len(),
        }),
        penetrations: Penetration::ALL.iter().map(|p| p.percent()).collect(),
        horizons: Horizon::ALL.to_vec(),
        channels: ChannelKind::ALL
            .iter()
            .map(|k| ChannelMeta { name: k.name(), unit: k.unit(), weather: k.is_weather() })
            .collect(),
        any_model_fitted: !fitted.is_empty(),
        models,
        context_days: state.inner.context_days,
        ad_hoc_noise_levels: AD_HOC_LEVELS.to_vec(),
    })
}

fn parse_penetration(raw: Option<&str>) -> ApiResult<Penetration> {
    match raw {
        None => Ok(Penetration::P0),
        Some(s) => s.parse().map_err(ApiError::bad_request),
    }
}

/// Grid indices `[start, end)` of a timestamp range inside the dataset.
fn index_range(ds: &Dataset, start: &str, end: &str) -> ApiResult<(usize, usize)> {
    let t0 = parse_timestamp(start).map_err(|e| ApiError::bad_request(format!("start: {e}")))?;
    let t1 = parse_timestamp(end).map_err(|e| ApiError::bad_request(format!("end: {e}")))?;
    if t1 <= t0 {
        return Err(ApiError::new(StatusCode::BAD_REQUEST, "bad_range", "end must be after start"));
    }
    let out_of_range = || {
        ApiError::new(
            StatusCode::BAD_REQUEST,
            "bad_range",
            format!(
                "range must lie on the 15-minute grid within {} .. {}",
                format_timestamp(ds.start()),
                format_timestamp(ds.end())
            ),
        )
    };
    let i0 = ds.index_of(t0).ok_or_else(out_of_range)?;
    let i1 = ds.index_of(t1).ok_or_else(out_of_range)?;
    Ok((i0, i1))
}

#[derive(Deserialize)]
struct SeriesQuery {
    start: String,
    end: String,
    penetration: Option<String>,
    channels: Option<String>,
}

#[derive(Serialize)]
struct SeriesChannel {
    name: &'static str,
    unit: &'static str,
    values: Vec<Option<f64>>,
    quality: Vec<SampleQuality>,
    /// Percent of samples missing or interpolated.
    data_quality: f64,
}

#[derive(Serialize)]
struct SeriesResponse {
    start: String,
    end: String,
    start_epoch: i64,
    cadence_secs: i64,
    penetration: Penetration,
    channels: Vec<SeriesChannel>,
}

async fn series(State(state): State<AppState>, Query(q): Query<SeriesQuery>) -> ApiResult<Json<SeriesResponse>> {
    let ds = state.dataset()?;
    let penetration = parse_penetration(q.penetration.as_deref())?;
    let kinds: Vec<ChannelKind> = match q.channels.as_deref().map(str::trim).filter(|s| !s.is_empty()) {
        None => ChannelKind::ALL.to_vec(),
        Some(list) => list
            .split(',')
            .map(|name| {
                name.trim().parse::<ChannelKind>().map_err(|_| {
                    ApiError::new(StatusCode::NOT_FOUND, "unknown_channel", format!("unknown channel `{}`", name.trim()))
                })
            })
            .collect::<ApiResult<_>>()?,
    };
    let (i0, i1) = index_range(ds, &q.start, &q.end)?;
    let frame = ds.frame(penetration, i0..i1).map_err(|e| ApiError::bad_request(e.to_string()))?;
    let channels = kinds
        .into_iter()
        .map(|kind| {
            let c = frame.channel(kind).expect("dataset frames carry every channel");
            SeriesChannel {
                name: kind.name(),
                unit: kind.unit(),
                values: (0..c.len()).map(|i| c.value(i)).collect(),
                quality: c.quality().to_vec(),
                data_quality: data_quality(&frame, kind).unwrap_or(0.0),
            }
        })
        .collect();
    Ok(Json(SeriesResponse {
        start: format_timestamp(frame.start()),
        end: format_timestamp(frame.end()),
        start_epoch: frame.start(),
        cadence_secs: CADENCE_SECS,
        penetration,
        channels,
    }))
}

#[derive(Deserialize)]
pub struct OverrideRequest {
    pub channel: String,
    pub timestamp: String,
    pub value: f64,
}

#[derive(Deserialize)]
pub struct AdHocNoiseRequest {
    pub channel: String,
    pub level: f64,
    /// Replays an earlier draw; a fresh seed is generated when absent.
    pub seed: Option<u64>,
}

#[derive(Deserialize)]
pub struct ForecastRequest {
    pub start: String,
    pub end: String,
    pub penetration: String,
    pub horizon: String,
    #[serde(default)]
    pub overrides: Vec<OverrideRequest>,
    pub ad_hoc_noise: Option<AdHocNoiseRequest>,
    /// Display-only; accepted and ignored.
    #[serde(default)]
    pub freeze_axis_hint: Option<serde_json::Value>,
}

#[derive(Serialize)]
struct ForecastResponse {
    start: String,
    end: String,
    context_start: String,
    cadence_secs: i64,
    penetration: Penetration,
    horizon: Horizon,
    actual: Vec<f64>,
    forecast: ForecastSeries,
    metrics: MetricSet,
    noise_seed: Option<u64>,
}

fn json_body<T: for<'de> Deserialize<'de>>(body: &str) -> ApiResult<T> {
    let de = &mut serde_json::Deserializer::from_str(body);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let field = e.path().to_string();
        let message = e.inner().to_string();
        let mut err = ApiError::bad_request(format!("malformed request body: {message}"));
        err.fields.push(FieldError { field: if field == "." { "body".into() } else { field }, message });
        err
    })
}

fn forecast_error(e: ForecastError) -> ApiError {
    match e {
        ForecastError::InsufficientContext { .. } => ApiError::unprocessable("insufficient_context", e.to_string()),
        _ => ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "forecast_failed", e.to_string()),
    }
}

async fn forecast(State(state): State<AppState>, body: String) -> ApiResult<Json<ForecastResponse>> {
    let req: ForecastRequest = json_body(&body)?;
    let penetration: Penetration = req.penetration.parse().map_err(ApiError::bad_request)?;
    let horizon: Horizon = req.horizon.parse().map_err(|e: String| ApiError::bad_request(e))?;
    let ds = Arc::clone(state.dataset()?);
    let (t0, t1) = index_range(&ds, &req.start, &req.end)?;
    let model = state.model(penetration, horizon)?;
    let c0 = t0.saturating_sub(state.inner.context_days as usize * STEPS_PER_DAY);
    if t0 - c0 < model.required_history() {
        return Err(ApiError::unprocessable(
            "insufficient_context",
            format!(
                "forecasting from {} needs {} steps of history, only {} available",
                req.start,
                model.required_history(),
                t0 - c0
            ),
        ));
    }
    let mut frame = ds.frame(penetration, c0..t1).map_err(|e| ApiError::bad_request(e.to_string()))?;
    for (i, o) in req.overrides.iter().enumerate() {
        let field = |name: &str| format!("overrides[{i}].{name}");
        let kind: ChannelKind = o.channel.parse().map_err(|_| {
            let mut e = ApiError::unprocessable("invalid_override", format!("unknown channel `{}`", o.channel));
            e.fields.push(FieldError { field: field("channel"), message: "unknown channel".into() });
            e
        })?;
        if !kind.is_weather() {
            let mut e = ApiError::unprocessable("invalid_override", "only weather inputs can be overridden");
            e.fields.push(FieldError { field: field("channel"), message: "not a weather input".into() });
            return Err(e);
        }
        let index = parse_timestamp(&o.timestamp)
            .ok()
            .and_then(|ts| frame.index_of(ts))
            .filter(|&idx| idx < frame.len())
            .ok_or_else(|| {
                let mut e = ApiError::unprocessable(
                    "override_out_of_window",
                    format!(
                        "override timestamp {} is outside the context/target window {} .. {}",
                        o.timestamp,
                        format_timestamp(frame.start()),
                        format_timestamp(frame.end())
                    ),
                );
                e.fields.push(FieldError { field: field("timestamp"), message: "outside the window".into() });
                e
            })?;
        frame = apply_override(&frame, kind, index, o.value)
            .map_err(|err| ApiError::unprocessable("invalid_override", err.to_string()))?;
    }
    let mut noise_seed = None;
    if let Some(n) = &req.ad_hoc_noise {
        let kind: ChannelKind = n
            .channel
            .parse()
            .map_err(|_| ApiError::unprocessable("invalid_noise", format!("unknown channel `{}`", n.channel)))?;
        let seed = n.seed.unwrap_or_else(rand::random);
        frame = ad_hoc_noise(&frame, kind, n.level, seed).map_err(|e| {
            let mut err = ApiError::unprocessable("invalid_noise", e.to_string());
            err.fields.push(FieldError { field: "ad_hoc_noise.level".into(), message: "must be 5 or 10".into() });
            err
        })?;
        noise_seed = Some(seed);
    }
    let target = (t0 - c0)..(t1 - c0);
    let fc = model.forecast(&frame, target.clone()).map_err(forecast_error)?;
    let actual = frame.channel(ChannelKind::NetLoadActual).expect("netload").raw_values()[target].to_vec();
    let metrics = MetricSet::compute(&actual, &fc.point)
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "metrics_failed", e.to_string()))?;
    Ok(Json(ForecastResponse {
        start: format_timestamp(ds.timestamp(t0)),
        end: format_timestamp(ds.timestamp(t1)),
        context_start: format_timestamp(ds.timestamp(c0)),
        cadence_secs: CADENCE_SECS,
        penetration,
        horizon,
        actual,
        forecast: fc,
        metrics,
        noise_seed,
    }))
}

#[derive(Serialize)]
struct Submitted {
    id: String,
    eta_seconds: f64,
    eta_calibrated: bool,
}

async fn submit_experiment(State(state): State<AppState>, body: String) -> ApiResult<(StatusCode, Json<Submitted>)> {
    let spec = export::parse_spec(&body).map_err(|(field, message)| {
        let mut e = ApiError::bad_request(format!("invalid experiment spec: {message}"));
        e.code = "invalid_spec";
        e.fields.push(FieldError { field, message });
        e
    })?;
    if let Err(fields) = spec.validate() {
        let mut e = ApiError::new(StatusCode::BAD_REQUEST, "invalid_spec", "invalid experiment spec");
        e.fields = fields;
        return Err(e);
    }
    let ds = Arc::clone(state.dataset()?);
    let model = state.model(spec.penetration, spec.horizon)?;
    let context_days = state.inner.context_days;
    experiment::plan_months(&spec, &ds, context_days, model.required_history())
        .map_err(|e| ApiError::unprocessable("experiment_setup", e.to_string()))?;

    let key = (spec.penetration, spec.horizon);
    let cached = state.inner.calibrations.lock().expect("calibration lock").get(&key).copied();
    let calibration = match cached {
        Some(c) => Some(c),
        None => {
            let (spec2, ds2, model2) = (spec.clone(), Arc::clone(&ds), Arc::clone(&model));
            let c = tokio::task::spawn_blocking(move || {
                runner::calibrate(&spec2, &ds2, model2.as_ref(), context_days, CALIBRATION_SAMPLES)
            })
            .await
            .ok()
            .flatten();
            if let Some(c) = c {
                state.inner.calibrations.lock().expect("calibration lock").insert(key, c);
            }
            c
        }
    };
    let eta = estimate_duration(&spec, calibration.as_ref());
    let store = state.inner.store.clone();
    let id = tokio::task::spawn_blocking(move || store.save(&spec))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))??;
    if let Some(q) = state.queue() {
        q.enqueue(id.clone());
    }
    Ok((StatusCode::ACCEPTED, Json(Submitted { id, eta_seconds: eta.seconds, eta_calibrated: eta.calibrated })))
}

async fn list_experiments(State(state): State<AppState>) -> ApiResult<Response> {
    let mut list = state.inner.store.list()?;
    if let Some(q) = state.queue() {
        for s in &mut list {
            if let Some(p) = q.live_progress(&s.id) {
                s.progress = p;
            }
        }
    }
    Ok(Json(list).into_response())
}

async fn get_experiment(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let mut exp = state.inner.store.load(&id)?;
    if let Some(p) = state.queue().and_then(|q| q.live_progress(&id)) {
        exp.progress = p;
    }
    Ok(Json(exp).into_response())
}

async fn aggregate_experiment(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let exp = state.inner.store.load(&id)?;
    let not_ready = || ApiError::new(StatusCode::CONFLICT, "not_ready", format!("experiment `{id}` has not completed"));
    let results = exp.results.ok_or_else(not_ready)?;
    let agg = experiment::aggregate(&results).map_err(|_| not_ready())?;
    Ok(Json(agg).into_response())
}

async fn experiment_csv(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let exp = state.inner.store.load(&id)?;
    let results = exp
        .results
        .ok_or_else(|| ApiError::new(StatusCode::CONFLICT, "not_ready", format!("experiment `{id}` has no results")))?;
    Ok(([(header::CONTENT_TYPE, "text/csv")], export::results_csv(&results)).into_response())
}

async fn delete_experiment(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<StatusCode> {
    let store = state.inner.store.clone();
    let queue = state.inner.queue.clone();
    tokio::task::spawn_blocking(move || match queue {
        Some(q) => q.delete(&id),
        None => store.delete(&id),
    })
    .await
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))??;
    Ok(StatusCode::NO_CONTENT)
}
