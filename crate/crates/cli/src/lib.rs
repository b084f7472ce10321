//! Configuration-driven experiments for the `rbsde` library.
//!
//! A run reads one TOML experiment file, executes it and writes
//! `<stem>.json` plus one or more `<stem>*.csv` tables. Exit status: 0 when
//! every check passes (or none was requested), 1 when a check fails, 2 for
//! an invalid configuration and 3 when the library fails at run time.

pub mod config;
pub mod expr;
pub mod registry;
pub mod report;
pub mod run;

use std::path::{Path, PathBuf};

pub use config::{ExperimentConfig, Overrides};
pub use report::{Check, Report};

#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    Parse(String),
    Runtime(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse(_) => 2,
            CliError::Runtime(_) | CliError::Io(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Parse(m) => write!(f, "{m}"),
            CliError::Runtime(m) => write!(f, "{m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl From<run::RunError> for CliError {
    fn from(e: run::RunError) -> Self {
        match e {
            run::RunError::Config(_) => CliError::Parse(e.to_string()),
            run::RunError::Runtime(_) => CliError::Runtime(e.to_string()),
        }
    }
}

pub struct Loaded {
    pub bytes: Vec<u8>,
    pub config: ExperimentConfig,
    pub stem: String,
}

pub fn load(path: &Path, overrides: &Overrides) -> Result<Loaded, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let text = std::str::from_utf8(&bytes).map_err(|e| CliError::Parse(format!("{}: not UTF-8: {e}", path.display())))?;
    let mut config = ExperimentConfig::parse(text).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
    config.apply(overrides);
    let stem = config
        .output
        .name
        .clone()
        .or_else(|| path.file_stem().map(|s| s.to_string_lossy().into_owned()))
        .unwrap_or_else(|| "experiment".into());
    Ok(Loaded { bytes, config, stem })
}

/// Parse and build every component without running anything.
pub fn validate(path: &Path, overrides: &Overrides) -> Result<ExperimentConfig, CliError> {
    let l = load(path, overrides)?;
    run::check_config(&l.config)?;
    Ok(l.config)
}

pub struct Written {
    pub report: Report,
    pub files: Vec<PathBuf>,
}

/// Run, then write the tables and the report atomically into `out_dir`
/// (the configured directory when absent).
pub fn run_experiment(path: &Path, overrides: &Overrides, out_dir: Option<&Path>) -> Result<Written, CliError> {
    let l = load(path, overrides)?;
    let outcome = run::run(&l.config)?;
    let dir = out_dir.map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from(&l.config.output.dir));
    std::fs::create_dir_all(&dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;

    let table_names: Vec<String> = outcome.tables.iter().map(|(suffix, _)| format!("{}{suffix}.csv", l.stem)).collect();
    let report_name = format!("{}.json", l.stem);
    let exploratory = outcome.checks.is_empty();
    let report = Report {
        tool: report::TOOL,
        version: report::VERSION,
        kind: l.config.kind,
        config_hash: report::config_hash(&l.bytes),
        overrides: overrides.clone(),
        seeds: report::Seeds {
            monte_carlo: l.config.monte_carlo.seed,
            apriori: l.config.apriori.seed,
        },
        config: l.config,
        tolerances: outcome.tolerances,
        exploratory,
        passed: outcome.checks.iter().all(|c| c.passed),
        checks: outcome.checks,
        results: outcome.results,
        artifacts: table_names.iter().cloned().chain([report_name.clone()]).collect(),
    };

    let io = |e: std::io::Error| CliError::Io(format!("{}: {e}", dir.display()));
    let mut files = Vec::new();
    for (name, (_, bytes)) in table_names.iter().zip(&outcome.tables) {
        files.push(report::write_atomic(&dir, name, bytes).map_err(io)?);
    }
    let mut json = Vec::new();
    rbsde::io::write_json(&report, &mut json).map_err(io)?;
    files.push(report::write_atomic(&dir, &report_name, &json).map_err(io)?);
    Ok(Written { report, files })
}

/// Exit status for a finished run.
pub fn exit_code(report: &Report) -> i32 {
    if report.passed {
        0
    } else {
        1
    }
}
