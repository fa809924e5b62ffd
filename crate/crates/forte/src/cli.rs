//! `forte` command line. Exit codes: 0 success, 1 runtime failure, 2 usage or
//! validation error.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, Ordering};
use std::time::Duration;

use clap::{Parser, Subcommand};
use forte_core::forecast::fit;
use forte_core::synth::{generate, SynthConfig};
use forte_core::timeseries::data_quality;
use forte_core::{ChannelKind, ExperimentStatus, Horizon, Penetration};

use crate::api::{router, AppState};
use crate::config::{CliConfig, Overrides};
use crate::datadir::DataDir;
use crate::runner::{run_experiment, RunControl, RunError};
use crate::timefmt::{format_timestamp, parse_timestamp};
use crate::{csv_io, export, store};

#[derive(Parser, Debug)]
#[command(name = "forte", version, about = "Net-load forecast evaluation workbench")]
struct Cli {
    /// TOML config file (default ./forte.toml when present).
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[arg(long, global = true, value_name = "DIR")]
    data_dir: Option<PathBuf>,
    /// Worker threads inside one experiment.
    #[arg(long, global = true, value_name = "N")]
    workers: Option<String>,
    /// Days of history presented to the forecaster.
    #[arg(long, global = true, value_name = "DAYS")]
    context_days: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic dataset CSV.
    Synth {
        #[arg(long, default_value_t = 2020)]
        year: i32,
        #[arg(long, default_value_t = 2020)]
        seed: u64,
        #[arg(long, default_value_t = 0.02)]
        gap_rate: f64,
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
    /// Validate a dataset CSV and store it in the data directory.
    Ingest { file: PathBuf },
    /// Fit and persist the reference forecaster.
    Fit {
        #[arg(long, value_parser = parse_penetration)]
        penetration: Penetration,
        #[arg(long, value_parser = parse_horizon)]
        horizon: Horizon,
        /// First training timestamp (inclusive), ISO-8601.
        #[arg(long)]
        from: Option<String>,
        /// Last training timestamp (exclusive), ISO-8601.
        #[arg(long)]
        to: Option<String>,
    },
    /// Serve the HTTP API until interrupted.
    Serve {
        #[arg(long)]
        host: Option<String>,
        #[arg(long)]
        port: Option<String>,
    },
    /// Headless experiments.
    Experiment {
        #[command(subcommand)]
        command: ExperimentCommand,
    },
}

#[derive(Subcommand, Debug)]
enum ExperimentCommand {
    /// Run SPEC.json synchronously and write results.json and results.csv.
    Run {
        spec: PathBuf,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
}

fn parse_penetration(s: &str) -> Result<Penetration, String> {
    s.parse()
}

fn parse_horizon(s: &str) -> Result<Horizon, String> {
    s.parse()
}

enum Failure {
    Usage(String),
    Runtime(String),
}

impl Failure {
    fn runtime(e: impl std::fmt::Display) -> Self {
        Failure::Runtime(e.to_string())
    }
}

type CliResult = Result<(), Failure>;

pub fn main_with_args(args: impl IntoIterator<Item = OsString>) -> ExitCode {
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let (host, port) = match &cli.command {
        Command::Serve { host, port } => (host.clone(), port.clone()),
        _ => (None, None),
    };
    let overrides = Overrides {
        config: cli.config.clone(),
        data_dir: cli.data_dir.clone(),
        host,
        port,
        workers: cli.workers.clone(),
        context_days: cli.context_days.clone(),
    };
    let config = match CliConfig::resolve(&overrides) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    eprintln!("{}", config.describe());
    let outcome = match cli.command {
        Command::Synth { year, seed, gap_rate, out } => synth(year, seed, gap_rate, &out),
        Command::Ingest { file } => ingest(&config, &file),
        Command::Fit { penetration, horizon, from, to } => fit_model(&config, penetration, horizon, from, to),
        Command::Serve { .. } => serve(&config),
        Command::Experiment { command: ExperimentCommand::Run { spec, out } } => experiment_run(&config, &spec, &out),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn channel_summary(ds: &forte_core::Dataset) -> String {
    let mut out = String::new();
    let mut line = |name: String, c: &forte_core::Channel| {
        let vals: Vec<f64> = (0..c.len()).filter_map(|i| c.value(i)).collect();
        let n = vals.len().max(1) as f64;
        let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
        let max = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mean = vals.iter().sum::<f64>() / n;
        let missing = 100.0 * c.missing_count() as f64 / c.len().max(1) as f64;
        out.push_str(&format!("  {name:<18} min {min:>9.3}  mean {mean:>9.3}  max {max:>9.3}  missing {missing:>6.2}%\n"));
    };
    for c in ds.weather_channels() {
        line(c.kind().name().to_string(), c);
    }
    for p in Penetration::ALL {
        line(format!("netload_{}", p.to_string().to_lowercase()), ds.netload(p));
    }
    out
}

fn synth(year: i32, seed: u64, gap_rate: f64, out: &Path) -> CliResult {
    let cfg = SynthConfig { year, seed, gap_rate, ..SynthConfig::default() };
    cfg.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    let ds = generate(&cfg).map_err(|e| Failure::Usage(e.to_string()))?;
    let mut buf = Vec::new();
    csv_io::write_dataset(&mut buf, &ds).map_err(Failure::runtime)?;
    store::write_atomic(out, &buf).map_err(|e| Failure::Runtime(format!("{}: {e}", out.display())))?;
    println!(
        "wrote {} rows ({} .. {}) to {}",
        ds.len(),
        format_timestamp(ds.start()),
        format_timestamp(ds.end()),
        out.display()
    );
    print!("{}", channel_summary(&ds));
    Ok(())
}

fn ingest(config: &CliConfig, file: &Path) -> CliResult {
    let f = fs::File::open(file).map_err(|e| Failure::Runtime(format!("{}: {e}", file.display())))?;
    let ds = csv_io::read_dataset(std::io::BufReader::new(f)).map_err(|e| Failure::Runtime(format!("{}: {e}", file.display())))?;
    let dir = DataDir::new(&config.data_dir);
    let removed = dir.store_dataset(&ds).map_err(Failure::runtime)?;
    println!(
        "ingested {} rows ({} .. {}) into {}",
        ds.len(),
        format_timestamp(ds.start()),
        format_timestamp(ds.end()),
        dir.dataset_path().display()
    );
    if removed > 0 {
        println!("removed {removed} model(s) fitted on the previous dataset");
    }
    let frame = ds.full_frame(Penetration::P0);
    for kind in ChannelKind::WEATHER {
        println!("  {:<18} {:>6.2}% missing", kind.name(), data_quality(&frame, kind).unwrap_or(0.0));
    }
    Ok(())
}

fn fit_model(config: &CliConfig, penetration: Penetration, horizon: Horizon, from: Option<String>, to: Option<String>) -> CliResult {
    let dir = DataDir::new(&config.data_dir);
    let ds = dir.load_dataset().map_err(Failure::runtime)?.interpolated().map_err(Failure::runtime)?;
    let index = |raw: Option<String>, default: usize, what: &str| -> Result<usize, Failure> {
        match raw {
            None => Ok(default),
            Some(s) => parse_timestamp(&s)
                .ok()
                .and_then(|ts| ds.index_of(ts))
                .ok_or_else(|| Failure::Usage(format!("--{what} `{s}` is not a grid timestamp inside the dataset"))),
        }
    };
    let i0 = index(from, 0, "from")?;
    let i1 = index(to, ds.len(), "to")?;
    if i1 <= i0 {
        return Err(Failure::Usage("--to must be after --from".into()));
    }
    let frame = ds.frame(penetration, i0..i1).map_err(Failure::runtime)?;
    let model = fit(&frame, horizon, penetration).map_err(Failure::runtime)?;
    let path = dir.save_model(&model).map_err(Failure::runtime)?;
    println!(
        "fitted {penetration}/{} on {} .. {}: {} features, residual 95% band [{:.4}, {:.4}] kW -> {}",
        horizon.name(),
        format_timestamp(model.training_window.0),
        format_timestamp(model.training_window.1),
        model.features.len(),
        model.residual_q025,
        model.residual_q975,
        path.display()
    );
    Ok(())
}

fn serve(config: &CliConfig) -> CliResult {
    let dir = DataDir::new(&config.data_dir);
    let dataset = if dir.has_dataset() {
        Some(dir.load_dataset().map_err(Failure::runtime)?)
    } else {
        eprintln!("warning: no dataset in {}; series, forecast and experiment endpoints will answer 409", dir.root().display());
        None
    };
    let models = dir.load_models().map_err(Failure::runtime)?;
    let store = dir.experiments().map_err(Failure::runtime)?;
    let state = AppState::new(dataset, models, store, config.context_days, config.workers).map_err(Failure::runtime)?;
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build().map_err(Failure::runtime)?;
    rt.block_on(async {
        let addr = format!("{}:{}", config.host, config.port);
        let listener = tokio::net::TcpListener::bind(&addr)
            .await
            .map_err(|e| Failure::Runtime(format!("cannot listen on {addr}: {e}")))?;
        eprintln!("listening on http://{}", listener.local_addr().map_err(Failure::runtime)?);
        axum::serve(listener, router(state))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
            .map_err(Failure::runtime)
    })
}

fn experiment_run(config: &CliConfig, spec_path: &Path, out: &Path) -> CliResult {
    let text = fs::read_to_string(spec_path).map_err(|e| Failure::Runtime(format!("{}: {e}", spec_path.display())))?;
    let spec = export::parse_spec(&text).map_err(|(field, msg)| Failure::Usage(format!("invalid spec: {field}: {msg}")))?;
    if let Err(errors) = spec.validate() {
        let lines: Vec<String> = errors.iter().map(|e| format!("  {e}")).collect();
        return Err(Failure::Usage(format!("invalid spec:\n{}", lines.join("\n"))));
    }
    let dir = DataDir::new(&config.data_dir);
    let ds = dir.load_dataset().map_err(Failure::runtime)?.interpolated().map_err(Failure::runtime)?;
    let model = dir.load_model(spec.penetration, spec.horizon).map_err(Failure::runtime)?;

    let control = RunControl::new();
    let finished = AtomicBool::new(false);
    let outcome = std::thread::scope(|s| {
        s.spawn(|| {
            let mut last = -1.0;
            while !finished.load(Ordering::Acquire) {
                let p = control.progress();
                if p > last {
                    eprintln!("progress: {:5.1}%", 100.0 * p);
                    last = p;
                }
                std::thread::sleep(Duration::from_millis(500));
            }
        });
        let r = run_experiment(&spec, &ds, &model, config.context_days, config.workers, &control);
        finished.store(true, Ordering::Release);
        r
    });
    let results = match outcome {
        Ok(r) => r,
        Err(RunError::Setup(e)) => return Err(Failure::Usage(e.to_string())),
        Err(e) => return Err(Failure::runtime(e)),
    };
    eprintln!("progress: 100.0%");
    fs::create_dir_all(out).map_err(|e| Failure::Runtime(format!("{}: {e}", out.display())))?;
    let write = |name: &str, body: String| {
        let path = out.join(name);
        store::write_atomic(&path, body.as_bytes()).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))
    };
    write("results.json", export::results_json(&results))?;
    write("results.csv", export::results_csv(&results))?;
    println!("{} records, status {:?} -> {}", results.records.len(), results.status, out.display());
    if results.status == ExperimentStatus::Failed {
        return Err(Failure::Runtime(results.error.unwrap_or_else(|| "experiment failed".into())));
    }
    Ok(())
}
