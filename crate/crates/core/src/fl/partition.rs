//! Non-i.i.d. device partitions with a fixed number of classes per device.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Gamma};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct DevicePartition {
    /// Dataset indices owned by each device; disjoint across devices.
    pub shards: Vec<Vec<usize>>,
    /// Classes assigned to each device.
    pub classes: Vec<Vec<usize>>,
    pub classes_per_device: usize,
}

impl DevicePartition {
    pub fn devices(&self) -> usize {
        self.shards.len()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.shards.iter().map(Vec::len).collect()
    }
}

/// Splits samples so that device `k` holds classes `perm[k]` and
/// `perm[k + 1]` (for two classes per device, cyclically over a random class
/// permutation). Each class is divided among its holders with
/// Dirichlet(`alpha`) proportions, every holder receiving at least one sample.
pub fn non_iid_partition<R: Rng + ?Sized>(
    labels: &[usize],
    n_classes: usize,
    devices: usize,
    classes_per_device: usize,
    alpha: f64,
    rng: &mut R,
) -> Result<DevicePartition> {
    if devices == 0 || classes_per_device == 0 || classes_per_device > n_classes {
        return Err(Error::InvalidArgument(format!(
            "cannot give {classes_per_device} of {n_classes} classes to {devices} devices"
        )));
    }
    let gamma = Gamma::new(alpha, 1.0)
        .map_err(|_| Error::InvalidArgument(format!("bad Dirichlet concentration {alpha}")))?;

    let mut perm: Vec<usize> = (0..n_classes).collect();
    perm.shuffle(rng);
    let classes: Vec<Vec<usize>> = (0..devices)
        .map(|k| (0..classes_per_device).map(|j| perm[(k + j) % n_classes]).collect())
        .collect();

    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
    for (i, &l) in labels.iter().enumerate() {
        if l >= n_classes {
            return Err(Error::InvalidArgument(format!("label {l} out of range")));
        }
        by_class[l].push(i);
    }

    let mut shards = vec![Vec::new(); devices];
    for (c, pool) in by_class.iter_mut().enumerate() {
        let holders: Vec<usize> = (0..devices).filter(|&k| classes[k].contains(&c)).collect();
        if holders.is_empty() {
            continue;
        }
        if pool.len() < holders.len() {
            return Err(Error::InvalidArgument(format!(
                "class {c} has {} samples for {} holders",
                pool.len(),
                holders.len()
            )));
        }
        pool.shuffle(rng);
        let weights: Vec<f64> = holders.iter().map(|_| gamma.sample(rng)).collect();
        let counts = split_counts(pool.len(), &weights);
        let mut start = 0;
        for (&k, n) in holders.iter().zip(counts) {
            shards[k].extend_from_slice(&pool[start..start + n]);
            start += n;
        }
    }
    for s in &mut shards {
        s.sort_unstable();
    }
    Ok(DevicePartition {
        shards,
        classes,
        classes_per_device,
    })
}

/// One sample per holder, the rest by largest remainder on `weights`.
fn split_counts(total: usize, weights: &[f64]) -> Vec<usize> {
    let h = weights.len();
    let rest = total - h;
    let sum: f64 = weights.iter().sum();
    let shares: Vec<f64> = weights.iter().map(|w| w / sum * rest as f64).collect();
    let mut counts: Vec<usize> = shares.iter().map(|s| s.floor() as usize).collect();
    let mut left = rest - counts.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..h).collect();
    order.sort_by(|&a, &b| {
        let (fa, fb) = (shares[a] - shares[a].floor(), shares[b] - shares[b].floor());
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for &i in order.iter().cycle() {
        if left == 0 {
            break;
        }
        counts[i] += 1;
        left -= 1;
    }
    counts.iter().map(|c| c + 1).collect()
}
