//! Shared argument plumbing: simulation parameters, output directory
//! resolution, config hashing, and exit-code mapping.

use std::path::PathBuf;

use serde::Serialize;
use sha2::{Digest, Sha256};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "BROWNSHIFT_OUT";

/// Process exit codes.
pub const EXIT_PASS: i32 = 0;
pub const EXIT_TEST_FAILURE: i32 = 1;
pub const EXIT_CONFIG_ERROR: i32 = 2;
pub const EXIT_RUNTIME_ERROR: i32 = 3;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG_ERROR,
            CliError::Runtime(_) => EXIT_RUNTIME_ERROR,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Runtime(m) => m,
        }
    }
}

impl From<brownshift::Error> for CliError {
    fn from(e: brownshift::Error) -> CliError {
        match e {
            brownshift::Error::InvalidParameter(_) => CliError::Config(e.to_string()),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> CliError {
        CliError::Runtime(e.to_string())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Simulation parameters shared by the path-based subcommands.
#[derive(clap::Args, Debug, Clone, Serialize)]
pub struct SimArgs {
    /// Grid step.
    #[arg(long, default_value_t = 1e-3)]
    pub dt: f64,
    /// Local-time band half-width; defaults to sqrt(dt).
    #[arg(long)]
    pub bandwidth: Option<f64>,
    /// Number of replicates.
    #[arg(long, default_value_t = 100)]
    pub n: u64,
    /// Base RNG seed; replicate streams derive from it.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Initial forward horizon in time units.
    #[arg(long, default_value_t = 8.0)]
    pub base_horizon: f64,
    /// Hard cap on the forward horizon.
    #[arg(long, default_value_t = 1000.0)]
    pub max_horizon: f64,
    /// Output directory; falls back to $BROWNSHIFT_OUT, then the working
    /// directory. Excluded from the config hash: where results are written
    /// is not part of the run's identity.
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

impl SimArgs {
    pub fn bandwidth(&self) -> f64 {
        self.bandwidth.unwrap_or_else(|| self.dt.sqrt())
    }

    pub fn shift_config(&self) -> CliResult<brownshift::shifts::ShiftConfig> {
        if self.n == 0 {
            return Err(CliError::Config("n must be positive".into()));
        }
        Ok(brownshift::shifts::ShiftConfig::new(
            self.dt,
            self.bandwidth(),
            self.base_horizon,
            self.max_horizon,
        )?)
    }
}

pub fn out_dir(explicit: &Option<PathBuf>) -> CliResult<PathBuf> {
    let dir = explicit
        .clone()
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

/// Short hex digest of the canonical JSON form of a resolved configuration.
pub fn config_hash<T: Serialize>(config: &T) -> CliResult<String> {
    let json = serde_json::to_string(config)
        .map_err(|e| CliError::Runtime(format!("config serialization: {e}")))?;
    let mut hasher = Sha256::new();
    hasher.update(json.as_bytes());
    let digest = hasher.finalize();
    Ok(digest
        .iter()
        .take(8)
        .map(|b| format!("{b:02x}"))
        .collect())
}

/// Write a summary JSON file and echo the pass/fail lines to stdout.
pub fn write_summary<T: Serialize>(path: &std::path::Path, summary: &T) -> CliResult<()> {
    let json = serde_json::to_string_pretty(summary)
        .map_err(|e| CliError::Runtime(format!("summary serialization: {e}")))?;
    std::fs::write(path, json)?;
    Ok(())
}

pub fn report_line(report: &brownshift::stats::TestReport) -> String {
    format!(
        "{}: {} (statistic {:.4}, threshold {:.4}, n {})",
        report.name,
        if report.passed() { "pass" } else { "FAIL" },
        report.statistic,
        report.threshold,
        report.n
    )
}
