//! Experiment configuration.
//!
//! TOML with an `[experiment]` table plus one table per subsystem. Every
//! table and key has a default; `Default` gives the full-scale setting and
//! [`ExperimentConfig::desk`] the reduced one used for quick runs.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fl::experiment::Scheme;
use crate::lattice::{Lattice, HEX_BLOCK};
use crate::rng::{label, StreamFactory};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentTable,
    pub system: SystemTable,
    pub lattice: LatticeTable,
    pub training: TrainingTable,
    pub data: DataTable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentTable {
    pub name: String,
    pub schemes: Vec<Scheme>,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemTable {
    pub devices: usize,
    pub antennas: usize,
    /// Linear SNR; `inf` for a noiseless channel.
    pub snr: f64,
    pub power: f64,
    /// Rate of the exponential law of `|h|^2`.
    pub fading_rate: f64,
    /// Draw channels from this seed instead of the run seed.
    pub channel_seed: Option<u64>,
    /// Fixed channel for every round, `antennas` lines of `devices` re,im pairs.
    pub channel_csv: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LatticeTable {
    /// Row-major 2x2 base generator.
    pub generator: [f64; 4],
    pub rho: f64,
    pub second_moment_samples: usize,
    pub second_moment_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingTable {
    pub tau: usize,
    pub mu: f64,
    pub batch: usize,
    pub rounds: usize,
    /// Hidden width of the classifier; 0 for linear softmax.
    pub hidden: usize,
    pub classes_per_device: usize,
    pub dirichlet_alpha: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    Synthetic,
    Idx,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataTable {
    pub source: DataSource,
    pub classes: usize,
    pub train_samples: usize,
    pub test_samples: usize,
    /// Synthetic blobs only.
    pub dim: usize,
    pub center_spread: f64,
    pub noise: f64,
    /// IDX files only.
    pub train_images: Option<PathBuf>,
    pub train_labels: Option<PathBuf>,
    pub test_images: Option<PathBuf>,
    pub test_labels: Option<PathBuf>,
}

impl Default for ExperimentTable {
    fn default() -> Self {
        Self {
            name: "default".into(),
            schemes: Scheme::ALL.to_vec(),
            seeds: (0..20).collect(),
            output_dir: PathBuf::from("runs"),
        }
    }
}

impl Default for SystemTable {
    fn default() -> Self {
        Self {
            devices: 30,
            antennas: 30,
            snr: 10.0,
            power: 1.0,
            fading_rate: 5.0,
            channel_seed: None,
            channel_csv: None,
        }
    }
}

impl Default for LatticeTable {
    fn default() -> Self {
        let g = HEX_BLOCK;
        Self {
            generator: [g[0][0], g[0][1], g[1][0], g[1][1]],
            rho: 1.0,
            second_moment_samples: 1_000_000,
            second_moment_seed: 1,
        }
    }
}

impl Default for TrainingTable {
    fn default() -> Self {
        Self {
            tau: 3,
            mu: 0.01,
            batch: 100,
            rounds: 100,
            hidden: 32,
            classes_per_device: 2,
            dirichlet_alpha: 1.0,
        }
    }
}

impl Default for DataTable {
    fn default() -> Self {
        Self {
            source: DataSource::Synthetic,
            classes: 10,
            train_samples: 6000,
            test_samples: 1000,
            dim: 64,
            center_spread: 0.3,
            noise: 1.0,
            train_images: None,
            train_labels: None,
            test_images: None,
            test_labels: None,
        }
    }
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: ExperimentTable::default(),
            system: SystemTable::default(),
            lattice: LatticeTable::default(),
            training: TrainingTable::default(),
            data: DataTable::default(),
        }
    }
}

impl ExperimentConfig {
    /// K = 10 devices, M = 10 antennas, T = 30 rounds, 10 seeds, learning
    /// rate 0.1.
    pub fn desk() -> Self {
        let mut c = Self::default();
        c.experiment.name = "desk".into();
        c.experiment.seeds = (0..10).collect();
        c.system.devices = 10;
        c.system.antennas = 10;
        c.training.rounds = 30;
        c.training.mu = 0.1;
        c
    }

    pub fn from_toml_str(src: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(src).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate().map_err(|i| {
            let at = locate_key(src, i.table, i.key).map(|l| format!("line {l}: ")).unwrap_or_default();
            Error::Config(format!("{at}[{}] {}: {}", i.table, i.key, i.message))
        })?;
        Ok(cfg)
    }

    /// Reads and validates a config file; relative data and channel paths
    /// are resolved against the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let src = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml_str(&src).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        if let Some(base) = path.parent() {
            cfg.resolve_paths(base);
        }
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut Option<PathBuf>| {
            if let Some(q) = p {
                if q.is_relative() {
                    *q = base.join(&*q);
                }
            }
        };
        fix(&mut self.system.channel_csv);
        fix(&mut self.data.train_images);
        fix(&mut self.data.train_labels);
        fix(&mut self.data.test_images);
        fix(&mut self.data.test_labels);
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn check(&self) -> Result<()> {
        self.validate()
            .map_err(|i| Error::Config(format!("[{}] {}: {}", i.table, i.key, i.message)))
    }

    fn validate(&self) -> std::result::Result<(), ConfigIssue> {
        let e = &self.experiment;
        let s = &self.system;
        let l = &self.lattice;
        let t = &self.training;
        let d = &self.data;
        let issue = |table, key, message: &str| {
            Err(ConfigIssue {
                table,
                key,
                message: message.to_string(),
            })
        };
        if e.schemes.is_empty() {
            return issue("experiment", "schemes", "at least one scheme is required");
        }
        if e.seeds.is_empty() {
            return issue("experiment", "seeds", "at least one seed is required");
        }
        if s.devices == 0 {
            return issue("system", "devices", "must be positive");
        }
        if s.antennas == 0 {
            return issue("system", "antennas", "must be positive");
        }
        if !(s.snr > 0.0) {
            return issue("system", "snr", "must be positive (inf for noiseless)");
        }
        if !(s.power.is_finite() && s.power > 0.0) {
            return issue("system", "power", "must be positive and finite");
        }
        if !(s.fading_rate.is_finite() && s.fading_rate > 0.0) {
            return issue("system", "fading_rate", "must be positive and finite");
        }
        let g = l.generator;
        if g.iter().any(|v| !v.is_finite()) || (g[0] * g[3] - g[1] * g[2]).abs() <= 1e-12 {
            return issue("lattice", "generator", "must be a finite invertible 2x2 matrix");
        }
        if !(l.rho.is_finite() && l.rho > 0.0) {
            return issue("lattice", "rho", "must be positive and finite");
        }
        if l.second_moment_samples == 0 {
            return issue("lattice", "second_moment_samples", "must be positive");
        }
        if t.tau == 0 {
            return issue("training", "tau", "must be positive");
        }
        if !(t.mu.is_finite() && t.mu > 0.0) {
            return issue("training", "mu", "must be positive and finite");
        }
        if t.batch == 0 {
            return issue("training", "batch", "must be positive");
        }
        if t.rounds == 0 {
            return issue("training", "rounds", "must be positive");
        }
        if d.classes < 2 {
            return issue("data", "classes", "need at least two classes");
        }
        if t.classes_per_device == 0 || t.classes_per_device > d.classes {
            return issue("training", "classes_per_device", "must be between 1 and the class count");
        }
        if !(t.dirichlet_alpha.is_finite() && t.dirichlet_alpha > 0.0) {
            return issue("training", "dirichlet_alpha", "must be positive and finite");
        }
        if d.train_samples == 0 {
            return issue("data", "train_samples", "must be positive");
        }
        if d.test_samples == 0 {
            return issue("data", "test_samples", "must be positive");
        }
        match d.source {
            DataSource::Synthetic => {
                if d.dim == 0 {
                    return issue("data", "dim", "must be positive");
                }
                if !(d.noise.is_finite() && d.noise >= 0.0) {
                    return issue("data", "noise", "must be non-negative");
                }
                if !(d.center_spread.is_finite() && d.center_spread > 0.0) {
                    return issue("data", "center_spread", "must be positive");
                }
            }
            DataSource::Idx => {
                for (key, p) in [
                    ("train_images", &d.train_images),
                    ("train_labels", &d.train_labels),
                    ("test_images", &d.test_images),
                    ("test_labels", &d.test_labels),
                ] {
                    if p.is_none() {
                        return issue("data", key, "required when source = \"idx\"");
                    }
                }
            }
        }
        Ok(())
    }

    pub fn base_block(&self) -> [[f64; 2]; 2] {
        let g = self.lattice.generator;
        [[g[0], g[1]], [g[2], g[3]]]
    }

    /// The configured lattice at block dimension with its second moment
    /// estimated by seeded Monte Carlo.
    pub fn build_lattice(&self) -> Result<Lattice> {
        let mut lat = Lattice::new(self.base_block(), self.lattice.rho, 2)?;
        let mut rng = StreamFactory::new(self.lattice.second_moment_seed).stream(label::SECOND_MOMENT, &[]);
        lat.estimate_second_moment(self.lattice.second_moment_samples, &mut rng)?;
        Ok(lat)
    }
}

struct ConfigIssue {
    table: &'static str,
    key: &'static str,
    message: String,
}

/// 1-based line of `key = ...` inside `[table]`, if written explicitly.
fn locate_key(src: &str, table: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    for (i, line) in src.lines().enumerate() {
        let t = line.trim();
        if let Some(name) = t.strip_prefix('[').and_then(|r| r.split(']').next()) {
            current = name.trim().to_string();
            continue;
        }
        if current == table {
            if let Some((k, _)) = t.split_once('=') {
                if k.trim() == key {
                    return Some(i + 1);
                }
            }
        }
    }
    None
}
