//! Layered operator configuration: flags, then `FORTE_*` environment
//! variables, then a TOML config file, then built-in defaults.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::Deserialize;

pub const DEFAULT_CONTEXT_DAYS: u32 = 28;
pub const DEFAULT_PORT: u16 = 8080;
pub const DEFAULT_HOST: &str = "127.0.0.1";
pub const DEFAULT_DATA_DIR: &str = "forte-data";
pub const DEFAULT_CONFIG_FILE: &str = "forte.toml";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Source {
    Flag,
    Env,
    File,
    Default,
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Source::Flag => "flag",
            Source::Env => "env",
            Source::File => "config file",
            Source::Default => "default",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CliConfig {
    pub data_dir: PathBuf,
    pub host: String,
    pub port: u16,
    pub workers: usize,
    pub context_days: u32,
    pub sources: BTreeMap<&'static str, Source>,
}

/// Values supplied on the command line; `None` means not given.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub config: Option<PathBuf>,
    pub data_dir: Option<PathBuf>,
    pub host: Option<String>,
    pub port: Option<String>,
    pub workers: Option<String>,
    pub context_days: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    data_dir: Option<PathBuf>,
    host: Option<String>,
    port: Option<i64>,
    workers: Option<i64>,
    context_days: Option<i64>,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ConfigError {
    #[error("{key} ({origin}): {message}")]
    Invalid { key: &'static str, origin: String, message: String },
    #[error("config file {path}: {message}")]
    File { path: String, message: String },
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

impl CliConfig {
    /// Resolves the configuration from `flags`, the process environment and
    /// the config file.
    pub fn resolve(flags: &Overrides) -> Result<CliConfig, ConfigError> {
        Self::resolve_with(flags, |k| std::env::var(k).ok())
    }

    pub fn resolve_with(flags: &Overrides, env: impl Fn(&str) -> Option<String>) -> Result<CliConfig, ConfigError> {
        let (file_path, explicit) = match (&flags.config, env("FORTE_CONFIG")) {
            (Some(p), _) => (p.clone(), true),
            (None, Some(p)) => (PathBuf::from(p), true),
            (None, None) => (PathBuf::from(DEFAULT_CONFIG_FILE), false),
        };
        let file = read_file(&file_path, explicit)?;
        let mut sources = BTreeMap::new();

        let mut pick = |key: &'static str, flag: Option<String>, file: Option<String>| -> (String, Source) {
            let env_key = format!("FORTE_{}", key.to_ascii_uppercase());
            let (v, s) = if let Some(v) = flag {
                (v, Source::Flag)
            } else if let Some(v) = env(&env_key) {
                (v, Source::Env)
            } else if let Some(v) = file {
                (v, Source::File)
            } else {
                (String::new(), Source::Default)
            };
            sources.insert(key, s);
            (v, s)
        };

        let (data_dir, s) = pick(
            "data_dir",
            flags.data_dir.as_ref().map(|p| p.display().to_string()),
            file.data_dir.map(|p| p.display().to_string()),
        );
        let data_dir = if s == Source::Default { PathBuf::from(DEFAULT_DATA_DIR) } else { PathBuf::from(data_dir) };

        let (host, s) = pick("host", flags.host.clone(), file.host);
        let host = if s == Source::Default { DEFAULT_HOST.to_string() } else { host };

        let (port, s) = pick("port", flags.port.clone(), file.port.map(|v| v.to_string()));
        let port = if s == Source::Default {
            DEFAULT_PORT
        } else {
            parse_ranged("port", &port, s, 1, 65535)? as u16
        };

        let (workers, s) = pick("workers", flags.workers.clone(), file.workers.map(|v| v.to_string()));
        let workers = if s == Source::Default {
            default_workers()
        } else {
            parse_ranged("workers", &workers, s, 1, 1024)? as usize
        };

        let (ctx, s) = pick("context_days", flags.context_days.clone(), file.context_days.map(|v| v.to_string()));
        let context_days = if s == Source::Default {
            DEFAULT_CONTEXT_DAYS
        } else {
            parse_ranged("context_days", &ctx, s, 1, 366)? as u32
        };

        Ok(CliConfig { data_dir, host, port, workers, context_days, sources })
    }

    /// One line per key with the layer it came from.
    pub fn describe(&self) -> String {
        let src = |k: &str| self.sources.get(k).copied().unwrap_or(Source::Default);
        format!(
            "config: data_dir={} ({})\nconfig: host={} ({})\nconfig: port={} ({})\nconfig: workers={} ({})\nconfig: context_days={} ({})",
            self.data_dir.display(),
            src("data_dir"),
            self.host,
            src("host"),
            self.port,
            src("port"),
            self.workers,
            src("workers"),
            self.context_days,
            src("context_days"),
        )
    }
}

fn read_file(path: &Path, explicit: bool) -> Result<FileConfig, ConfigError> {
    match std::fs::read_to_string(path) {
        Ok(text) => toml::from_str(&text)
            .map_err(|e| ConfigError::File { path: path.display().to_string(), message: e.to_string() }),
        Err(e) if !explicit && e.kind() == std::io::ErrorKind::NotFound => Ok(FileConfig::default()),
        Err(e) => Err(ConfigError::File { path: path.display().to_string(), message: e.to_string() }),
    }
}

fn parse_ranged(key: &'static str, raw: &str, source: Source, lo: i64, hi: i64) -> Result<i64, ConfigError> {
    let invalid = |message: String| ConfigError::Invalid { key, origin: source.to_string(), message };
    let v: i64 = raw.trim().parse().map_err(|_| invalid(format!("`{raw}` is not an integer")))?;
    if !(lo..=hi).contains(&v) {
        return Err(invalid(format!("{v} is outside [{lo}, {hi}]")));
    }
    Ok(v)
}
