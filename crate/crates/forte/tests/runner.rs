mod common;

use std::ops::Range;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use forte::runner::{calibrate, run_experiment, RunControl, RunError};
use forte_core::experiment::{DayWindow, ExperimentError};
use forte_core::forecast::ForecastError;
use forte_core::{
    ExperimentStatus, ForecastSeries, Forecaster, Horizon, Month, NoiseMode, Penetration,
    TimeSeriesFrame,
};

#[test]
fn identical_results_for_any_worker_count() {
    let spec = common::spec(vec![Month::Feb, Month::Aug], vec![5.0, 20.0], 4);
    let ds = common::year_filled();
    let m = common::model_p50_min15();
    let one = run_experiment(&spec, ds, m, 28, 1, &RunControl::new()).unwrap();
    for workers in [2, 3, 8] {
        assert_eq!(run_experiment(&spec, ds, m, 28, workers, &RunControl::new()).unwrap(), one);
    }
    assert_eq!(one.records.len(), 16);
    assert_eq!(one.heatmap.as_ref().unwrap().mae_dev.len(), 2);
}

#[test]
fn record_count_is_months_by_levels_by_observations() {
    let spec = common::spec(vec![Month::Mar, Month::Jun, Month::Sep], vec![1.0, 10.0, 25.0, 30.0, 12.5], 20);
    let r = run_experiment(&spec, common::year_filled(), common::model_p50_min15(), 28, 4, &RunControl::new()).unwrap();
    assert_eq!(r.records.len(), 300);
    assert_eq!(r.aggregates.len(), 15);
    assert_eq!(r.baseline.len(), 3);
    assert_eq!(r.progress, 1.0);
}

#[test]
fn baseline_only_has_no_records() {
    let spec = common::spec(vec![Month::Oct], vec![], 1);
    let r = run_experiment(&spec, common::year_filled(), common::model_p50_min15(), 28, 2, &RunControl::new()).unwrap();
    assert_eq!(r.status, ExperimentStatus::Completed);
    assert!(r.records.is_empty());
    assert_eq!(r.baseline.len(), 1);
    assert!(r.baseline[0].metrics.mae > 0.0);
}

#[test]
fn constant_bias_runs_yield_exact_zeros() {
    let mut spec = common::spec(vec![Month::Jan, Month::Jul], vec![3.0, 30.0], 10);
    spec.mode = NoiseMode::ConstantBias;
    spec.direction = forte_core::Direction::Subtract;
    let r = run_experiment(&spec, common::year_filled(), common::model_p50_min15(), 28, 4, &RunControl::new()).unwrap();
    assert_eq!(r.records.len(), 40);
    assert!(r.records.iter().all(|x| x.mae_dev == 0.0));
}

#[test]
fn setup_errors_surface_before_running() {
    let mut spec = common::spec(vec![Month::Jan], vec![5.0], 1);
    spec.day_window = DayWindow { start: 1, end: 1 };
    let one_day = common::head(common::year_filled(), 2);
    match run_experiment(&spec, &one_day, common::model_p50_min15(), 28, 1, &RunControl::new()) {
        Err(RunError::Setup(ExperimentError::Setup(msg))) => assert!(msg.contains("history"), "{msg}"),
        other => panic!("{other:?}"),
    }
    spec.penetration = Penetration::P20;
    assert!(matches!(
        run_experiment(&spec, common::year_filled(), common::model_p50_min15(), 28, 1, &RunControl::new()),
        Err(RunError::Setup(_))
    ));
}

#[test]
fn cancelled_before_start_is_reported() {
    let spec = common::spec(vec![Month::Jan], vec![5.0], 5);
    let control = RunControl::new();
    control.cancel();
    assert!(matches!(
        run_experiment(&spec, common::year_filled(), common::model_p50_min15(), 28, 2, &control),
        Err(RunError::Cancelled)
    ));
}

/// Delegates to a real model but fails every call after the first `ok_calls`.
struct Flaky {
    calls: AtomicUsize,
    ok_calls: usize,
}

impl Forecaster for Flaky {
    fn horizon(&self) -> Horizon {
        Horizon::Min15
    }
    fn penetration(&self) -> Penetration {
        Penetration::P50
    }
    fn required_history(&self) -> usize {
        common::model_p50_min15().required_history()
    }
    fn forecast(&self, context: &TimeSeriesFrame, target: Range<usize>) -> Result<ForecastSeries, ForecastError> {
        if self.calls.fetch_add(1, Ordering::SeqCst) >= self.ok_calls {
            return Err(ForecastError::InvalidModel("injected failure".into()));
        }
        common::model_p50_min15().forecast(context, target)
    }
}

#[test]
fn forecast_failure_marks_run_failed_with_partial_records() {
    let spec = common::spec(vec![Month::Apr], vec![5.0, 10.0], 10);
    let flaky = Flaky { calls: AtomicUsize::new(0), ok_calls: 6 };
    let r = run_experiment(&spec, common::year_filled(), &flaky, 28, 1, &RunControl::new()).unwrap();
    assert_eq!(r.status, ExperimentStatus::Failed);
    assert!(r.error.as_deref().unwrap().contains("injected failure"));
    assert_eq!(r.records.len(), 5);
    assert!(r.heatmap.is_none());
    assert!(r.progress < 1.0);
}

#[test]
fn progress_reaches_one_and_cancel_mid_run_stops() {
    let spec = common::spec(vec![Month::Jan, Month::Feb, Month::Mar], vec![5.0, 10.0], 30);
    let control = Arc::new(RunControl::new());
    let c2 = Arc::clone(&control);
    let watcher = std::thread::spawn(move || {
        while c2.progress() < 0.2 {
            std::thread::yield_now();
        }
        c2.cancel();
    });
    let r = run_experiment(&spec, common::year_filled(), common::model_p50_min15(), 28, 2, &control);
    watcher.join().unwrap();
    assert!(matches!(r, Err(RunError::Cancelled)));
    assert!(control.progress() < 1.0);
}

#[test]
fn calibration_measures_positive_latency() {
    let spec = common::spec(vec![Month::Jan, Month::Jul], vec![5.0], 1);
    let c = calibrate(&spec, common::year_filled(), common::model_p50_min15(), 28, 5).unwrap();
    assert!(c.median_latency_secs > 0.0);
    assert_eq!(c.samples, 5);
}
