//! Parallel experiment runner.
//!
//! Baselines and cells are evaluated on a dedicated rayon pool. Cells are
//! independent and carry their own seeds, and [`experiment::assemble`] orders
//! the records, so the output does not depend on the worker count.

use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::time::Instant;

use forte_core::experiment::{self, Calibration, ExperimentError, MonthBaseline};
use forte_core::{Dataset, DeviationRecord, ExperimentResults, ExperimentSpec, Forecaster};
use rayon::prelude::*;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    /// The spec or dataset coverage was rejected before any forecast ran.
    #[error(transparent)]
    Setup(ExperimentError),
    #[error("experiment was cancelled")]
    Cancelled,
    #[error("worker pool: {0}")]
    Pool(String),
}

/// Shared progress counter and cancellation flag for one run.
#[derive(Debug, Default)]
pub struct RunControl {
    done: AtomicUsize,
    total: AtomicUsize,
    cancelled: AtomicBool,
}

impl RunControl {
    pub fn new() -> Self {
        Self::default()
    }

    /// Fraction of forecasts finished, non-decreasing during a run.
    pub fn progress(&self) -> f64 {
        let total = self.total.load(Ordering::Acquire);
        if total == 0 {
            return 0.0;
        }
        (self.done.load(Ordering::Acquire) as f64 / total as f64).min(1.0)
    }

    pub fn cancel(&self) {
        self.cancelled.store(true, Ordering::Release);
    }

    pub fn is_cancelled(&self) -> bool {
        self.cancelled.load(Ordering::Acquire)
    }

    fn tick(&self) {
        self.done.fetch_add(1, Ordering::AcqRel);
    }
}

enum CellFailure {
    Cancelled,
    Failed(ExperimentError),
}

pub fn run_experiment(
    spec: &ExperimentSpec,
    dataset: &Dataset,
    forecaster: &dyn Forecaster,
    context_days: u32,
    workers: usize,
    control: &RunControl,
) -> Result<ExperimentResults, RunError> {
    experiment::check_forecaster(spec, forecaster).map_err(RunError::Setup)?;
    let plans = experiment::plan_months(spec, dataset, context_days, forecaster.required_history()).map_err(RunError::Setup)?;
    let cells = experiment::cells(spec);
    control.total.store(plans.len() + cells.len(), Ordering::Release);

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| RunError::Pool(e.to_string()))?;

    let baselines: Vec<Result<MonthBaseline, CellFailure>> =
        pool.install(|| plans.par_iter().map(|p| guarded(control, || experiment::month_baseline(p, forecaster))).collect());
    let (baseline, failure) = split(baselines);
    match failure {
        Some(CellFailure::Cancelled) => return Err(RunError::Cancelled),
        Some(CellFailure::Failed(e)) => {
            let done = baseline.len() as f64 / (plans.len() + cells.len()) as f64;
            return Ok(experiment::failed(spec, baseline, Vec::new(), done, e.to_string()));
        }
        None => {}
    }

    let outcomes: Vec<Result<DeviationRecord, CellFailure>> = pool.install(|| {
        cells
            .par_iter()
            .map(|cell| {
                let m = cell.month_index;
                guarded(control, || experiment::evaluate_cell(spec, &plans[m], &baseline[m], forecaster, *cell))
            })
            .collect()
    });
    let (records, failure) = split(outcomes);
    match failure {
        Some(CellFailure::Cancelled) => Err(RunError::Cancelled),
        Some(CellFailure::Failed(e)) => {
            let done = (baseline.len() + records.len()) as f64 / (plans.len() + cells.len()) as f64;
            Ok(experiment::failed(spec, baseline, records, done, e.to_string()))
        }
        None => Ok(experiment::assemble(spec, baseline, records)),
    }
}

fn guarded<T>(control: &RunControl, f: impl FnOnce() -> Result<T, ExperimentError>) -> Result<T, CellFailure> {
    if control.is_cancelled() {
        return Err(CellFailure::Cancelled);
    }
    let out = f().map_err(CellFailure::Failed);
    control.tick();
    out
}

/// Successful values plus the first failure in input order, preferring
/// cancellation.
fn split<T>(outcomes: Vec<Result<T, CellFailure>>) -> (Vec<T>, Option<CellFailure>) {
    let mut ok = Vec::with_capacity(outcomes.len());
    let mut failure = None;
    for o in outcomes {
        match o {
            Ok(v) => ok.push(v),
            Err(CellFailure::Cancelled) => failure = Some(CellFailure::Cancelled),
            Err(e) => {
                if failure.is_none() {
                    failure = Some(e);
                }
            }
        }
    }
    (ok, failure)
}

/// Times warm-up evaluations shaped like the experiment's work, a noise draw plus
/// forecast and scoring, cycling through every planned month so that months
/// with truncated history do not skew the median. At least one sample is
/// taken per month.
pub fn calibrate(
    spec: &ExperimentSpec,
    dataset: &Dataset,
    forecaster: &dyn Forecaster,
    context_days: u32,
    samples: usize,
) -> Option<Calibration> {
    let plans = experiment::plan_months(spec, dataset, context_days, forecaster.required_history()).ok()?;
    let baselines =
        plans.iter().map(|p| experiment::month_baseline(p, forecaster).ok()).collect::<Option<Vec<_>>>()?;
    let cell = experiment::Cell { month_index: 0, level_index: 0, observation: 0 };
    let samples = samples.max(plans.len());
    let mut latencies = Vec::with_capacity(samples);
    for i in 0..samples {
        let (plan, baseline) = (&plans[i % plans.len()], &baselines[i % plans.len()]);
        let t = Instant::now();
        if spec.noise_levels.is_empty() {
            experiment::month_baseline(plan, forecaster).ok()?;
        } else {
            experiment::evaluate_cell(spec, plan, baseline, forecaster, cell).ok()?;
        }
        latencies.push(t.elapsed().as_secs_f64());
    }
    Calibration::from_latencies(&latencies)
}
