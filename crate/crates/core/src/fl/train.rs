use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::data::Dataset;
use super::model::{loss_and_grad, ModelParams};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Local SGD steps per round, one mini-batch each.
    pub tau: usize,
    pub mu: f64,
    pub batch: usize,
    pub rounds: usize,
    pub devices: usize,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.tau == 0 || self.batch == 0 || self.rounds == 0 || self.devices == 0 {
            return Err(Error::Config("tau, batch, rounds and devices must be positive".into()));
        }
        if !(self.mu.is_finite() && self.mu > 0.0) {
            return Err(Error::Config(format!("learning rate must be positive, got {}", self.mu)));
        }
        Ok(())
    }
}

/// Draws a mini-batch of `batch` indices from `shard`, without replacement
/// when the shard is large enough.
pub fn draw_batch<R: Rng + ?Sized>(shard: &[usize], batch: usize, rng: &mut R) -> Vec<usize> {
    if shard.len() >= batch {
        index::sample(rng, shard.len(), batch)
            .into_iter()
            .map(|i| shard[i])
            .collect()
    } else {
        (0..batch).map(|_| shard[rng.random_range(0..shard.len())]).collect()
    }
}

/// `tau` SGD steps from `model` on the device shard; returns `w_tau - w_0`.
///
/// Any learning rate is accepted here, zero included;
/// [`TrainConfig::validate`] rejects non-positive rates for real runs.
pub fn local_update<R: Rng + ?Sized>(
    model: &ModelParams,
    data: &Dataset,
    shard: &[usize],
    tau: usize,
    mu: f64,
    batch: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if shard.is_empty() {
        return Err(Error::InvalidArgument("empty device shard".into()));
    }
    let mut w = model.clone();
    for _ in 0..tau {
        let idx = draw_batch(shard, batch, rng);
        let (_, grad) = loss_and_grad(&w, data, &idx)?;
        for (p, g) in w.values.iter_mut().zip(&grad) {
            *p -= mu * g;
        }
    }
    Ok(w
        .values
        .iter()
        .zip(&model.values)
        .map(|(a, b)| a - b)
        .collect())
}
