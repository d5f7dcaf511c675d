//! Run directories: `rounds.csv`, `timings.csv` and `manifest.json`.
//!
//! The manifest is enough to re-run a directory: it echoes the full config
//! as TOML, lists seeds and schemes, and records the sweep, if any.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::Command;

use serde::Serialize;

use super::config::ExperimentConfig;
use super::metrics::{write_rounds, write_timings, RoundMetrics};
use crate::error::Result;

pub const OUTPUT_DIR_ENV: &str = "FEDCPU_OUTPUT_DIR";
pub const ROUNDS_FILE: &str = "rounds.csv";
pub const TIMINGS_FILE: &str = "timings.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Serialize)]
pub struct SweepInfo {
    pub param: String,
    pub values: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config_toml: String,
    pub seeds: Vec<u64>,
    pub schemes: Vec<String>,
    pub sweep: Option<SweepInfo>,
    /// Second moment of the lattice used at each sweep point, in order.
    pub second_moments: Vec<f64>,
    pub rows: usize,
    pub files: Vec<String>,
}

/// Crate version, suffixed with `git describe` output when available.
pub fn version_string() -> String {
    let pkg = env!("CARGO_PKG_VERSION");
    let git = Command::new("git")
        .args(["describe", "--always", "--dirty", "--tags"])
        .output()
        .ok()
        .filter(|o| o.status.success())
        .and_then(|o| String::from_utf8(o.stdout).ok())
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty());
    match git {
        Some(g) => format!("{pkg}+{g}"),
        None => pkg.to_string(),
    }
}

/// Root for run directories: the environment override if set, else the
/// config's `output_dir`.
pub fn output_root(cfg: &ExperimentConfig) -> PathBuf {
    match std::env::var_os(OUTPUT_DIR_ENV) {
        Some(v) if !v.is_empty() => PathBuf::from(v),
        _ => cfg.experiment.output_dir.clone(),
    }
}

pub fn write_run_dir(dir: &Path, rows: &[RoundMetrics], manifest: &Manifest) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_rounds(BufWriter::new(File::create(dir.join(ROUNDS_FILE))?), rows)?;
    write_timings(BufWriter::new(File::create(dir.join(TIMINGS_FILE))?), rows)?;
    let json = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    fs::write(dir.join(MANIFEST_FILE), json + "\n")?;
    Ok(())
}

pub fn manifest_for(
    cfg: &ExperimentConfig,
    command: String,
    sweep: Option<SweepInfo>,
    second_moments: Vec<f64>,
    rows: usize,
) -> Manifest {
    Manifest {
        tool: env!("CARGO_PKG_NAME").to_string(),
        version: version_string(),
        command,
        config_toml: cfg.to_toml_string(),
        seeds: cfg.experiment.seeds.clone(),
        schemes: cfg.experiment.schemes.iter().map(|s| s.to_string()).collect(),
        sweep,
        second_moments,
        rows,
        files: vec![ROUNDS_FILE.into(), TIMINGS_FILE.into()],
    }
}
