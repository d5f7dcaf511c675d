//! The federated training loop and its per-round metrics.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::aggregators::{ideal_aggregate, orthogonal_quantized_aggregate, over_the_air_aggregate, CoefficientPolicy};
use super::data::{load_idx, synthetic_blobs, BlobSpec, Dataset};
use super::model::{accuracy, MlpShape, ModelParams};
use super::partition::{non_iid_partition, DevicePartition};
use super::train::local_update;
use crate::channel::{draw_channel, ChannelRealization};
use crate::error::{Error, Result};
use crate::harness::config::{DataSource, ExperimentConfig};
use crate::harness::metrics::RoundMetrics;
use crate::lattice::Lattice;
use crate::rng::{label, StreamFactory};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Fedcpu,
    Ideal,
    OrthogonalQuantized,
    BlindEqual,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [Scheme::Ideal, Scheme::OrthogonalQuantized, Scheme::Fedcpu, Scheme::BlindEqual];

    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Fedcpu => "fedcpu",
            Scheme::Ideal => "ideal",
            Scheme::OrthogonalQuantized => "orthogonal_quantized",
            Scheme::BlindEqual => "blind_equal",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|x| x.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown scheme {s:?}")))
    }
}

/// Per-seed state shared by every scheme: data, partition and initial model.
#[derive(Debug, Clone)]
pub struct Workload {
    pub train: Dataset,
    pub test: Dataset,
    pub partition: DevicePartition,
    pub init: ModelParams,
}

/// A validated configuration with its lattice and any file-backed inputs
/// loaded once.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub cfg: ExperimentConfig,
    pub lattice: Lattice,
    files: Option<(Dataset, Dataset)>,
    fixed_channel: Option<ChannelRealization>,
}

impl Experiment {
    pub fn new(cfg: ExperimentConfig) -> Result<Self> {
        cfg.check()?;
        let lattice = cfg.build_lattice()?;
        Self::with_lattice(cfg, lattice)
    }

    /// Skips the second-moment estimate, using the one already on `lattice`.
    pub fn with_lattice(cfg: ExperimentConfig, lattice: Lattice) -> Result<Self> {
        cfg.check()?;
        lattice.second_moment()?;
        let d = &cfg.data;
        let files = match d.source {
            DataSource::Synthetic => None,
            DataSource::Idx => {
                let need = |p: &Option<std::path::PathBuf>| p.clone().ok_or_else(|| Error::Config("missing IDX path".into()));
                let train = load_idx(&need(&d.train_images)?, &need(&d.train_labels)?, d.classes, Some(d.train_samples))?;
                let test = load_idx(&need(&d.test_images)?, &need(&d.test_labels)?, d.classes, Some(d.test_samples))?;
                Some((train, test))
            }
        };
        let fixed_channel = match &cfg.system.channel_csv {
            Some(p) => {
                let ch = ChannelRealization::from_csv(p, cfg.system.snr, cfg.system.power)?;
                if ch.devices() != cfg.system.devices || ch.antennas() != cfg.system.antennas {
                    return Err(Error::Config(format!(
                        "channel file is {}x{}, config asks for {} antennas and {} devices",
                        ch.antennas(),
                        ch.devices(),
                        cfg.system.antennas,
                        cfg.system.devices
                    )));
                }
                Some(ch)
            }
            None => None,
        };
        Ok(Self {
            cfg,
            lattice,
            files,
            fixed_channel,
        })
    }

    pub fn workload(&self, seed: u64) -> Result<Workload> {
        let streams = StreamFactory::new(seed);
        let d = &self.cfg.data;
        let t = &self.cfg.training;
        let (train, test) = match &self.files {
            Some((a, b)) => (a.clone(), b.clone()),
            None => {
                let spec = BlobSpec {
                    dim: d.dim,
                    classes: d.classes,
                    center_spread: d.center_spread,
                    noise: d.noise,
                };
                synthetic_blobs(spec, d.train_samples, d.test_samples, &mut streams.stream(label::DATA, &[]))?
            }
        };
        let partition = non_iid_partition(
            &train.labels,
            d.classes,
            self.cfg.system.devices,
            t.classes_per_device,
            t.dirichlet_alpha,
            &mut streams.stream(label::PARTITION, &[]),
        )?;
        let shape = MlpShape {
            input: train.dim,
            hidden: t.hidden,
            output: d.classes,
        };
        let init = ModelParams::init(shape, &mut streams.stream(label::INIT, &[]));
        Ok(Workload {
            train,
            test,
            partition,
            init,
        })
    }

    fn channel(&self, seed: u64, round: usize, devices: usize) -> Result<ChannelRealization> {
        let s = &self.cfg.system;
        if let Some(ch) = &self.fixed_channel {
            return Ok(ch.clone());
        }
        let streams = StreamFactory::new(s.channel_seed.unwrap_or(seed));
        draw_channel(
            s.antennas,
            devices,
            s.fading_rate,
            s.snr,
            s.power,
            &mut streams.stream(label::CHANNEL, &[round as u64]),
        )
    }

    /// All `T` rounds of one scheme under one seed.
    pub fn run(&self, scheme: Scheme, seed: u64) -> Result<Vec<RoundMetrics>> {
        let w = self.workload(seed)?;
        self.run_with(scheme, seed, &w)
    }

    pub fn run_with(&self, scheme: Scheme, seed: u64, w: &Workload) -> Result<Vec<RoundMetrics>> {
        let t = &self.cfg.training;
        let power = self.cfg.system.power;
        let streams = StreamFactory::new(seed);
        let active: Vec<usize> = (0..w.partition.devices())
            .filter(|&k| {
                let empty = w.partition.shards[k].is_empty();
                if empty {
                    log::warn!("device {k} has an empty shard and is skipped");
                }
                !empty
            })
            .collect();
        if active.is_empty() {
            return Err(Error::InvalidArgument("no device holds any data".into()));
        }
        if self.fixed_channel.is_some() && active.len() != self.cfg.system.devices {
            return Err(Error::InvalidArgument("fixed channel needs every device active".into()));
        }

        let mut model = w.init.clone();
        let mut rows = Vec::with_capacity(t.rounds);
        for round in 0..t.rounds {
            let start = Instant::now();
            let updates = active
                .par_iter()
                .map(|&k| {
                    local_update(
                        &model,
                        &w.train,
                        &w.partition.shards[k],
                        t.tau,
                        t.mu,
                        t.batch,
                        &mut streams.stream(label::SGD, &[k as u64, round as u64]),
                    )
                })
                .collect::<Result<Vec<_>>>()?;
            let ideal = ideal_aggregate(&updates)?;

            let mut row = RoundMetrics {
                scheme: scheme.to_string(),
                seed,
                round,
                antennas: self.cfg.system.antennas,
                rho: self.lattice.scale(),
                a: None,
                b_norm: None,
                eta: None,
                dmse: None,
                qmse: None,
                decode_success: None,
                decode_error: None,
                aggregate_error_norm: 0.0,
                test_accuracy: 0.0,
                wall_time: 0.0,
            };
            let global = match scheme {
                Scheme::Ideal => Some(ideal.clone()),
                Scheme::OrthogonalQuantized => Some(orthogonal_quantized_aggregate(
                    &self.lattice,
                    &updates,
                    power,
                    &streams,
                    round,
                )?),
                Scheme::Fedcpu | Scheme::BlindEqual => {
                    let policy = if scheme == Scheme::Fedcpu {
                        CoefficientPolicy::Optimized
                    } else {
                        CoefficientPolicy::AllOnes
                    };
                    let channel = self.channel(seed, round, active.len())?;
                    let out = over_the_air_aggregate(&self.lattice, &channel, &updates, power, &policy, &streams, round)?;
                    if let Some(plan) = &out.plan {
                        row.a = Some(plan.a.to_string());
                        row.b_norm = Some(plan.b.norm());
                        row.eta = Some(plan.eta);
                        row.dmse = Some(plan.dmse);
                        row.qmse = Some(plan.qmse);
                    }
                    row.decode_success = out.decode_success;
                    row.decode_error = out.decode_error;
                    out.update
                }
            };
            row.aggregate_error_norm = match &global {
                Some(g) => g.iter().zip(&ideal).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt(),
                None => ideal.iter().map(|v| v * v).sum::<f64>().sqrt(),
            };
            if let Some(g) = &global {
                model.add_assign(g)?;
            }
            if !model.is_finite() {
                log::warn!("{scheme} seed {seed} round {round}: model diverged to non-finite values");
            }
            row.test_accuracy = accuracy(&model, &w.test);
            row.wall_time = start.elapsed().as_secs_f64();
            rows.push(row);
        }
        Ok(rows)
    }

    /// Every seed for one scheme, seeds in parallel, rows in seed order.
    pub fn run_seeds(&self, scheme: Scheme, seeds: &[u64]) -> Result<Vec<RoundMetrics>> {
        let per_seed = seeds
            .par_iter()
            .map(|&s| self.run(scheme, s))
            .collect::<Result<Vec<_>>>()?;
        Ok(per_seed.into_iter().flatten().collect())
    }

    /// Every configured scheme and seed. Rows are grouped by scheme in the
    /// configured order, then by seed, then by round.
    pub fn run_all(&self) -> Result<Vec<RoundMetrics>> {
        let seeds = &self.cfg.experiment.seeds;
        let schemes = &self.cfg.experiment.schemes;
        let jobs: Vec<(Scheme, u64)> = schemes.iter().flat_map(|&sc| seeds.iter().map(move |&s| (sc, s))).collect();
        let per_job = jobs
            .par_iter()
            .map(|&(sc, s)| self.run(sc, s))
            .collect::<Result<Vec<_>>>()?;
        Ok(per_job.into_iter().flatten().collect())
    }
}

/// Convenience wrapper: build the experiment and run one scheme over `seeds`.
pub fn run_experiment(cfg: &ExperimentConfig, scheme: Scheme, seeds: &[u64]) -> Result<Vec<RoundMetrics>> {
    Experiment::new(cfg.clone())?.run_seeds(scheme, seeds)
}
