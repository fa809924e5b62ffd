//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

mod common;

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use axum::body::Body;
use axum::http::{Request, StatusCode};
use forte::api::{router, AppState};
use forte::datadir::DataDir;
use forte::runner::{calibrate, run_experiment, RunControl};
use forte::store::ExperimentStore;
use forte_core::calendar::midnight;
use forte_core::experiment::{estimate_duration, DayWindow};
use forte_core::forecast::{fit, predict};
use forte_core::metrics::{interval_coverage, mae, mape, MAPE_MIN_ACTUAL_KW};
use forte_core::noise::{perturb, perturb_frame};
use forte_core::timeseries::{detect_gaps, interpolate_linear};
use forte_core::{
    Channel, ChannelKind, Direction, ExperimentStatus, Forecaster, Horizon, Month, NoiseMode, NoisePerturbation,
    Penetration, SampleQuality, TimeSeriesFrame,
};
use http_body_util::BodyExt;
use rand::{Rng, SeedableRng};
use rand::rngs::StdRng;
use tower::ServiceExt;

/// Criterion 1: wall-clock budget.
const C1_MAX_SECS: f64 = 30.0;
/// Criterion 2: sample count and closeness of the empirical extremes to the
/// band edges, relative to the bound.
const C2_SAMPLES: usize = 10_000;
const C2_EDGE_TOL: f64 = 0.002;
/// Criterion 3: wall-clock budget and accepted estimate ratio.
const C3_MAX_SECS: f64 = 600.0;
const C3_ESTIMATE_FACTOR: f64 = 2.0;
/// Criterion 4: grand-mean MAE deviation band (kW), open below.
const C4_MAX_KW: f64 = 0.5;
/// Criterion 5: pairs and relative tolerance.
const C5_PAIRS: usize = 1000;
const C5_REL_TOL: f64 = 1e-12;
/// Criterion 6: reconstruction tolerance.
const C6_TOL: f64 = 1e-9;
const C6_CASES: usize = 500;
/// Criterion 7: coverage band.
const C7_BAND: (f64, f64) = (0.88, 0.99);

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn criterion_1() -> Outcome {
    let t = Instant::now();
    let ds = common::year_filled();
    let mut details = Vec::new();
    for (horizon, window) in [(Horizon::Min15, DayWindow { start: 3, end: 4 }), (Horizon::Hour24, DayWindow { start: 10, end: 11 })] {
        let model = fit(&ds.full_frame(Penetration::P30), horizon, Penetration::P30).map_err(|e| e.to_string())?;
        for (variable, direction) in
            [(ChannelKind::Temperature, Direction::Add), (ChannelKind::Humidity, Direction::Subtract), (ChannelKind::SolarIrradiance, Direction::Add), (ChannelKind::ApparentPower, Direction::Subtract)]
        {
            let mut spec = common::spec(Month::ALL.to_vec(), vec![1.0, 5.0, 10.0, 20.0, 30.0], 3);
            spec.penetration = Penetration::P30;
            spec.horizon = horizon;
            spec.day_window = window;
            spec.variable = variable;
            spec.mode = NoiseMode::ConstantBias;
            spec.direction = direction;
            let r = run_experiment(&spec, ds, &model, 28, 4, &RunControl::new()).map_err(|e| e.to_string())?;
            let heat = r.heatmap.as_ref().ok_or("no heatmap")?;
            let zero_records = r.records.iter().all(|x| x.mae_dev == 0.0 && x.mape_dev.is_none_or(|m| m == 0.0));
            let zero_heat = heat.mae_dev.iter().flatten().all(|v| *v == 0.0);
            if r.status != ExperimentStatus::Completed || r.records.len() != spec.record_count() || !zero_records || !zero_heat {
                return Err(format!("{horizon:?}/{variable}: non-zero deviations or wrong count"));
            }
            details.push(r.records.len());
        }
        // Forecast vectors themselves are bit-identical.
        let plan_start = ds.index_of(midnight(2020, 7, window.start).unwrap()).unwrap();
        let frame = ds.frame(Penetration::P30, plan_start - 28 * 96..plan_start + 2 * 96).unwrap();
        let base = predict(&model, &frame, 28 * 96..frame.len()).unwrap();
        for level in [1.0, 17.5, 30.0] {
            for direction in [Direction::Add, Direction::Subtract] {
                let p = NoisePerturbation { variable: ChannelKind::Temperature, mode: NoiseMode::ConstantBias, direction, level, seed: 0 };
                let noisy = perturb_frame(&frame, &p).unwrap();
                if predict(&model, &noisy, 28 * 96..frame.len()).unwrap() != base {
                    return Err(format!("{horizon:?}: forecast changed under {level}% bias"));
                }
            }
        }
    }
    let secs = t.elapsed().as_secs_f64();
    check(
        secs < C1_MAX_SECS,
        format!("{} records across 8 constant-bias runs all exactly 0, forecasts bit-identical, {secs:.1}s (< {C1_MAX_SECS}s)", details.iter().sum::<usize>()),
    )
}

fn criterion_2() -> Outcome {
    let mut rng = StdRng::seed_from_u64(2);
    let xs: Vec<f64> = (0..C2_SAMPLES).map(|_| rng.random_range(0.5..120.0)).collect();
    let p = NoisePerturbation { variable: ChannelKind::Temperature, mode: NoiseMode::UniformRandom, direction: Direction::Add, level: 10.0, seed: 60 };
    let ys = perturb(&xs, &p).map_err(|e| e.to_string())?;
    let inside = xs.iter().zip(&ys).all(|(x, y)| *y >= *x && *y <= 1.1 * x);
    let ratios: Vec<f64> = xs.iter().zip(&ys).map(|(x, y)| y / x).collect();
    let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sixty = perturb(&vec![60.0; C2_SAMPLES], &p).map_err(|e| e.to_string())?;
    let sixty_ok = sixty.iter().all(|y| (60.0..=66.0).contains(y));
    let edges = (lo - 1.0).abs() <= C2_EDGE_TOL * 1.0 && (1.1 - hi).abs() <= C2_EDGE_TOL * 1.1;
    check(
        inside && sixty_ok && edges,
        format!("{C2_SAMPLES} samples in [x, 1.1x]; y/x spans [{lo:.6}, {hi:.6}] (edges within {C2_EDGE_TOL} of 1.0 and 1.1); 60F stays in [60, 66]"),
    )
}

struct SeasonalRun {
    per_month: Vec<(Month, f64)>,
    grand_signed: f64,
    secs: f64,
    estimate: f64,
}

fn seasonal_run() -> Result<SeasonalRun, String> {
    let ds = common::year_filled();
    let model = common::model_p50_min15();
    let months = vec![Month::Jan, Month::Feb, Month::Apr, Month::May, Month::Jul, Month::Aug, Month::Oct, Month::Nov];
    let mut spec = common::spec(months.clone(), vec![5.0, 15.0, 30.0], 50);
    spec.seed = 2024;
    let cal = calibrate(&spec, ds, model, 28, 5).ok_or("calibration failed")?;
    let estimate = estimate_duration(&spec, Some(&cal)).seconds;
    let t = Instant::now();
    let r = run_experiment(&spec, ds, model, 28, 1, &RunControl::new()).map_err(|e| e.to_string())?;
    let secs = t.elapsed().as_secs_f64();
    if r.status != ExperimentStatus::Completed {
        return Err(format!("run failed: {:?}", r.error));
    }
    let per_month = months
        .iter()
        .map(|m| {
            let v: Vec<f64> = r.records.iter().filter(|x| x.month == *m).map(|x| x.mae_dev.abs()).collect();
            (*m, v.iter().sum::<f64>() / v.len() as f64)
        })
        .collect();
    let grand_signed = r.records.iter().map(|x| x.mae_dev).sum::<f64>() / r.records.len() as f64;
    Ok(SeasonalRun { per_month, grand_signed, secs, estimate })
}

fn criterion_3(run: &SeasonalRun) -> Outcome {
    let get = |m: Month| run.per_month.iter().find(|(x, _)| *x == m).map(|(_, v)| *v).unwrap();
    let (jan, jul, apr, may) = (get(Month::Jan), get(Month::Jul), get(Month::Apr), get(Month::May));
    let shape = jan.min(jul) > apr.max(may);
    let ratio = run.estimate / run.secs;
    let estimate_ok = (1.0 / C3_ESTIMATE_FACTOR..=C3_ESTIMATE_FACTOR).contains(&ratio);
    let table: Vec<String> = run.per_month.iter().map(|(m, v)| format!("{m}={v:.4}")).collect();
    check(
        shape && run.secs < C3_MAX_SECS && estimate_ok,
        format!(
            "mean|dev| kW {}; min(Jan,Jul)={:.4} > max(Apr,May)={:.4}: {shape}; {:.1}s, estimate {:.1}s (ratio {ratio:.2}, within x{C3_ESTIMATE_FACTOR}: {estimate_ok})",
            table.join(" "),
            jan.min(jul),
            apr.max(may),
            run.secs,
            run.estimate
        ),
    )
}

fn criterion_4(run: &SeasonalRun) -> Outcome {
    let g = run.grand_signed;
    check(g > 0.0 && g <= C4_MAX_KW, format!("grand-mean mae_dev = {g:.5} kW in (0, {C4_MAX_KW}]"))
}

fn oracle_mae(a: &[f64], p: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..a.len() {
        let d = a[i] - p[i];
        s += if d < 0.0 { -d } else { d };
    }
    s / a.len() as f64
}

fn oracle_mape(a: &[f64], p: &[f64]) -> (Option<f64>, usize) {
    let kept: Vec<usize> = (0..a.len()).filter(|&i| !(a[i] > -MAPE_MIN_ACTUAL_KW && a[i] < MAPE_MIN_ACTUAL_KW)).collect();
    if kept.is_empty() {
        return (None, a.len());
    }
    let mut s = 0.0;
    for &i in &kept {
        let d = (a[i] - p[i]).abs();
        s += d / a[i].abs();
    }
    (Some(s * 100.0 / kept.len() as f64), a.len() - kept.len())
}

fn rel_close(x: f64, y: f64) -> bool {
    (x - y).abs() <= C5_REL_TOL * x.abs().max(y.abs()).max(f64::MIN_POSITIVE)
}

fn criterion_5() -> Outcome {
    let mut rng = StdRng::seed_from_u64(5);
    let mut excluded_total = 0;
    for case in 0..C5_PAIRS {
        let n = rng.random_range(1..200);
        let a: Vec<f64> = (0..n)
            .map(|_| if rng.random_bool(0.1) { rng.random_range(-0.012..0.012) } else { rng.random_range(-5.0..8.0) })
            .collect();
        let p: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..8.0)).collect();
        let m = mae(&a, &p).map_err(|e| e.to_string())?;
        if !rel_close(m, oracle_mae(&a, &p)) {
            return Err(format!("case {case}: mae {m} vs oracle {}", oracle_mae(&a, &p)));
        }
        let (got, ex) = mape(&a, &p).map_err(|e| e.to_string())?;
        let (want, want_ex) = oracle_mape(&a, &p);
        let same = match (got, want) {
            (Some(x), Some(y)) => rel_close(x, y),
            (None, None) => true,
            _ => false,
        };
        if !same || ex != want_ex {
            return Err(format!("case {case}: mape {got:?}/{ex} vs oracle {want:?}/{want_ex}"));
        }
        excluded_total += ex;
    }
    check(true, format!("{C5_PAIRS} random pairs match brute force to {C5_REL_TOL} relative; {excluded_total} near-zero actuals excluded as in the hand filter"))
}

fn criterion_6() -> Outcome {
    let mut rng = StdRng::seed_from_u64(6);
    let mut worst: f64 = 0.0;
    for case in 0..C6_CASES {
        let n = rng.random_range(2..400);
        let (slope, icept) = (rng.random_range(-3.0..3.0), rng.random_range(-100.0..100.0));
        let line = |t: usize| slope * t as f64 + icept;
        let mut samples: Vec<Option<f64>> = (0..n).map(|t| (!rng.random_bool(0.35)).then(|| line(t))).collect();
        let keep = rng.random_range(0..n);
        samples[keep] = Some(line(keep));
        let anchors = samples.iter().filter(|s| s.is_some()).count();
        let temp = Channel::from_options(ChannelKind::Temperature, &samples);
        let net = Channel::observed(ChannelKind::NetLoadActual, vec![0.0; n]);
        let frame = TimeSeriesFrame::new(0, Penetration::P0, vec![temp, net]).map_err(|e| e.to_string())?;
        let once = interpolate_linear(&frame, ChannelKind::Temperature).map_err(|e| e.to_string())?;
        let twice = interpolate_linear(&once, ChannelKind::Temperature).map_err(|e| e.to_string())?;
        if once != twice {
            return Err(format!("case {case}: interpolation not idempotent"));
        }
        if !detect_gaps(&once, ChannelKind::Temperature).unwrap().is_empty() {
            return Err(format!("case {case}: gaps remain"));
        }
        let c = once.channel(ChannelKind::Temperature).unwrap();
        let first = samples.iter().position(Option::is_some).unwrap();
        let last = samples.iter().rposition(Option::is_some).unwrap();
        for t in first..=last {
            if c.quality()[t] == SampleQuality::Interpolated {
                let want = line(t);
                let err = (c.value(t).unwrap() - want).abs() / want.abs().max(1.0);
                worst = worst.max(err);
            }
        }
        // One-sided gaps extend the nearest anchor, which is exact only for a
        // single anchor's level; they are checked against that rule instead.
        if anchors > 0 {
            for t in 0..first {
                if c.value(t) != samples[first] {
                    return Err(format!("case {case}: leading extension wrong"));
                }
            }
            for t in last + 1..n {
                if c.value(t) != samples[last] {
                    return Err(format!("case {case}: trailing extension wrong"));
                }
            }
        }
    }
    check(worst < C6_TOL, format!("{C6_CASES} random lines with random gaps: worst interior error {worst:.2e} (< {C6_TOL}), idempotent, no gaps left"))
}

fn criterion_7() -> Outcome {
    let ds = common::year_filled();
    let nov = ds.index_of(midnight(2020, 11, 1).unwrap()).unwrap();
    let dec = ds.index_of(midnight(2020, 12, 1).unwrap()).unwrap();
    let model = fit(&ds.frame(Penetration::P50, 0..nov).unwrap(), Horizon::Hour24, Penetration::P50).map_err(|e| e.to_string())?;
    let ctx = 28 * 96;
    let frame = ds.frame(Penetration::P50, nov - ctx..dec).unwrap();
    let fc = model.forecast(&frame, ctx..frame.len()).map_err(|e| e.to_string())?;
    let actual = &frame.channel(ChannelKind::NetLoadActual).unwrap().raw_values()[ctx..];
    let cov = interval_coverage(actual, &fc.lower95, &fc.upper95).map_err(|e| e.to_string())?;
    check(
        (C7_BAND.0..=C7_BAND.1).contains(&cov),
        format!("P50 24h model fitted Jan-Oct, held-out November coverage {cov:.4} in [{}, {}]", C7_BAND.0, C7_BAND.1),
    )
}

fn forte(data_dir: &Path, args: &[&str]) -> Result<std::process::Output, String> {
    let mut cmd = Command::new(common::forte_bin());
    cmd.current_dir(data_dir).arg("--data-dir").arg(data_dir).args(args);
    for key in ["FORTE_CONFIG", "FORTE_DATA_DIR", "FORTE_WORKERS", "FORTE_CONTEXT_DAYS", "FORTE_PORT", "FORTE_HOST"] {
        cmd.env_remove(key);
    }
    let out = cmd.output().map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("forte {args:?} failed: {}", String::from_utf8_lossy(&out.stderr)));
    }
    Ok(out)
}

async fn service_run(data_dir: &Path, spec_json: &str) -> Result<String, String> {
    let dir = DataDir::new(data_dir);
    let ds = dir.load_dataset().map_err(|e| e.to_string())?;
    let models = dir.load_models().map_err(|e| e.to_string())?;
    let store = dir.experiments().map_err(|e| e.to_string())?;
    let state = AppState::new(Some(ds), models, store.clone(), 28, 3).map_err(|e| e.to_string())?;
    let app = router(state);
    let resp = app
        .clone()
        .oneshot(Request::post("/api/experiments").header("content-type", "application/json").body(Body::from(spec_json.to_string())).unwrap())
        .await
        .map_err(|e| e.to_string())?;
    if resp.status() != StatusCode::ACCEPTED {
        return Err(format!("submit returned {}", resp.status()));
    }
    let body: serde_json::Value = serde_json::from_slice(&resp.into_body().collect().await.unwrap().to_bytes()).unwrap();
    let id = body["id"].as_str().ok_or("no id")?.to_string();
    let deadline = Instant::now() + Duration::from_secs(300);
    loop {
        let resp = app.clone().oneshot(Request::get(format!("/api/experiments/{id}")).body(Body::empty()).unwrap()).await.unwrap();
        let v: serde_json::Value = serde_json::from_slice(&resp.into_body().collect().await.unwrap().to_bytes()).unwrap();
        match v["status"].as_str() {
            Some("Completed") => break,
            Some("Failed") => return Err(format!("service run failed: {}", v["error"])),
            _ if Instant::now() > deadline => return Err("service run timed out".into()),
            _ => tokio::time::sleep(Duration::from_millis(50)).await,
        }
    }
    std::fs::read_to_string(ExperimentStore::dir(&store, &id).join("results.json")).map_err(|e| e.to_string())
}

fn criterion_8() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let root = tmp.path();
    let csv = root.join("year.csv");
    forte(root, &["synth", "--year", "2020", "--seed", "7", "--gap-rate", "0.03", "--out", csv.to_str().unwrap()])?;
    forte(root, &["ingest", csv.to_str().unwrap()])?;
    forte(root, &["fit", "--penetration", "50", "--horizon", "min15"])?;
    let mut spec = common::spec(vec![Month::Mar, Month::Sep], vec![5.0, 30.0], 6);
    spec.variable = ChannelKind::Humidity;
    let spec_json = serde_json::to_string_pretty(&spec).unwrap();
    let spec_path = root.join("spec.json");
    std::fs::write(&spec_path, &spec_json).unwrap();
    let mut outputs = Vec::new();
    for workers in ["1", "4"] {
        let out = root.join(format!("out-{workers}"));
        forte(root, &["--workers", workers, "experiment", "run", spec_path.to_str().unwrap(), "--out", out.to_str().unwrap()])?;
        outputs.push((
            std::fs::read_to_string(out.join("results.json")).map_err(|e| e.to_string())?,
            std::fs::read_to_string(out.join("results.csv")).map_err(|e| e.to_string())?,
        ));
    }
    let rt = tokio::runtime::Runtime::new().map_err(|e| e.to_string())?;
    let service = rt.block_on(service_run(root, &spec_json))?;
    let records = forte::export::parse_results_json(&service)?.records.len();
    let same_workers = outputs[0] == outputs[1];
    let same_service = service == outputs[0].0;
    check(
        same_workers && same_service && records == spec.record_count(),
        format!("{records} records; CLI workers=1 vs 4 identical: {same_workers}; CLI vs service results.json identical: {same_service}"),
    )
}

fn criterion_9() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let store = ExperimentStore::open(tmp.path()).map_err(|e| e.to_string())?;
    let spec = common::spec(vec![Month::Jun], vec![5.0], 2);
    let ds = common::year_filled();
    let results = run_experiment(&spec, ds, common::model_p50_min15(), 28, 2, &RunControl::new()).map_err(|e| e.to_string())?;
    let mut scenarios = 0;
    let verify = |store: &ExperimentStore, id: &str, label: &str| -> Result<(), String> {
        let loaded = store.load(id).map_err(|e| e.to_string())?;
        if loaded.status == ExperimentStatus::Completed {
            let ok = loaded.results.as_ref().is_some_and(|r| r.records.len() == spec.record_count() && r == &results);
            if !ok {
                return Err(format!("{label}: Completed with missing or partial results"));
            }
        }
        let listed = store.list().map_err(|e| e.to_string())?;
        if listed.iter().any(|s| s.id == id && s.status == ExperimentStatus::Completed) && loaded.status != ExperimentStatus::Completed {
            return Err(format!("{label}: list and load disagree"));
        }
        Ok(())
    };
    // Interrupt points along the commit sequence, emulated on disk.
    type Step = fn(&ExperimentStore, &str, &forte_core::ExperimentResults);
    let steps: [(&str, Step); 6] = [
        ("killed before results", |s, id, _| s.set_status(id, ExperimentStatus::Running, 0.5, None).unwrap()),
        ("killed after results.json, before status flip", |s, id, r| {
            s.set_status(id, ExperimentStatus::Running, 0.9, None).unwrap();
            std::fs::write(s.dir(id).join("results.json"), forte::export::results_json(r)).unwrap();
        }),
        ("killed mid-write of temp file", |s, id, r| {
            s.set_status(id, ExperimentStatus::Running, 0.9, None).unwrap();
            let half = forte::export::results_json(r);
            std::fs::write(s.dir(id).join(".results.json.deadbeef.tmp"), &half[..half.len() / 2]).unwrap();
        }),
        ("status flipped with results missing", |s, id, _| {
            s.set_status(id, ExperimentStatus::Completed, 1.0, None).unwrap();
        }),
        ("status flipped with truncated results", |s, id, r| {
            let text = forte::export::results_json(r);
            std::fs::write(s.dir(id).join("results.json"), &text[..text.len() / 3]).unwrap();
            s.set_status(id, ExperimentStatus::Completed, 1.0, None).unwrap();
        }),
        ("normal commit", |s, id, r| s.commit_results(id, r).unwrap()),
    ];
    for (label, step) in steps {
        let id = store.save(&spec).map_err(|e| e.to_string())?;
        step(&store, &id, &results);
        verify(&store, &id, label)?;
        scenarios += 1;
    }
    let last = store.list().map_err(|e| e.to_string())?;
    let completed = last.iter().filter(|s| s.status == ExperimentStatus::Completed).count();
    check(
        completed == 1,
        format!("{scenarios} interrupt scenarios reloaded; only the fully committed run reports Completed ({completed})"),
    )
}

fn main() {
    let mut failed = 0;
    let mut report = |n: u32, outcome: Outcome| {
        let (tag, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("criterion {n}: {tag} - {detail}");
    };
    report(1, criterion_1());
    report(2, criterion_2());
    match seasonal_run() {
        Ok(run) => {
            report(3, criterion_3(&run));
            report(4, criterion_4(&run));
        }
        Err(e) => {
            report(3, Err(e.clone()));
            report(4, Err(e));
        }
    }
    report(5, criterion_5());
    report(6, criterion_6());
    report(7, criterion_7());
    report(8, criterion_8());
    report(9, criterion_9());
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all acceptance criteria passed");
}
