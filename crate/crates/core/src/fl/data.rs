//! Classification datasets: a synthetic Gaussian-blob generator and an
//! MNIST IDX reader.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::{Error, Result};

const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    /// Row-major `len x dim` feature matrix.
    pub features: Vec<f64>,
    pub labels: Vec<usize>,
    pub dim: usize,
    pub classes: usize,
}

impl Dataset {
    pub fn new(features: Vec<f64>, labels: Vec<usize>, dim: usize, classes: usize) -> Result<Self> {
        if dim == 0 || features.len() != labels.len() * dim {
            return Err(Error::Dataset(format!(
                "{} features do not fit {} samples of dimension {dim}",
                features.len(),
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
            return Err(Error::Dataset(format!("label {bad} out of range for {classes} classes")));
        }
        Ok(Self {
            features,
            labels,
            dim,
            classes,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn sample(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let mut features = Vec::with_capacity(indices.len() * self.dim);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            features.extend_from_slice(self.sample(i));
            labels.push(self.labels[i]);
        }
        Dataset {
            features,
            labels,
            dim: self.dim,
            classes: self.classes,
        }
    }
}

/// Parameters of the synthetic blob task.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlobSpec {
    pub dim: usize,
    pub classes: usize,
    /// Per-coordinate standard deviation of the class centres.
    pub center_spread: f64,
    /// Per-coordinate standard deviation of samples around their centre.
    pub noise: f64,
}

impl Default for BlobSpec {
    fn default() -> Self {
        Self {
            dim: 64,
            classes: 10,
            center_spread: 0.3,
            noise: 1.0,
        }
    }
}

/// Draws balanced train and test sets around shared random class centres.
pub fn synthetic_blobs<R: Rng + ?Sized>(
    spec: BlobSpec,
    n_train: usize,
    n_test: usize,
    rng: &mut R,
) -> Result<(Dataset, Dataset)> {
    if spec.dim == 0 || spec.classes < 2 {
        return Err(Error::Dataset("blobs need dim >= 1 and classes >= 2".into()));
    }
    let centres: Vec<f64> = (0..spec.dim * spec.classes)
        .map(|_| spec.center_spread * Distribution::<f64>::sample(&StandardNormal, rng))
        .collect::<Vec<f64>>();
    let noise = Normal::new(0.0, spec.noise)
        .map_err(|e| Error::Dataset(format!("bad blob noise: {e}")))?;
    let draw = |n: usize, rng: &mut R| {
        let mut labels: Vec<usize> = (0..n).map(|i| i % spec.classes).collect();
        labels.shuffle(rng);
        let mut features = Vec::with_capacity(n * spec.dim);
        for &l in &labels {
            let c = &centres[l * spec.dim..(l + 1) * spec.dim];
            features.extend(c.iter().map(|m| m + noise.sample(rng)));
        }
        Dataset::new(features, labels, spec.dim, spec.classes)
    };
    let train = draw(n_train, rng)?;
    let test = draw(n_test, rng)?;
    Ok((train, test))
}

fn read_u32(bytes: &[u8], at: usize) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::Dataset("truncated IDX header".into()))
}

/// Parses an IDX image file (`0x00000803`, `n x rows x cols` unsigned bytes),
/// returning pixels scaled to `[0, 1]` and the per-image dimension.
pub fn parse_idx_images(bytes: &[u8]) -> Result<(Vec<f64>, usize)> {
    let magic = read_u32(bytes, 0)?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(Error::Dataset(format!("bad IDX image magic {magic:#010x}")));
    }
    let n = read_u32(bytes, 4)? as usize;
    let dim = read_u32(bytes, 8)? as usize * read_u32(bytes, 12)? as usize;
    let body = &bytes[16..];
    if body.len() != n * dim {
        return Err(Error::Dataset(format!(
            "IDX image body has {} bytes, header says {}",
            body.len(),
            n * dim
        )));
    }
    Ok((body.iter().map(|&p| p as f64 / 255.0).collect(), dim))
}

/// Parses an IDX label file (`0x00000801`).
pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<usize>> {
    let magic = read_u32(bytes, 0)?;
    if magic != IDX_LABELS_MAGIC {
        return Err(Error::Dataset(format!("bad IDX label magic {magic:#010x}")));
    }
    let n = read_u32(bytes, 4)? as usize;
    let body = &bytes[8..];
    if body.len() != n {
        return Err(Error::Dataset(format!(
            "IDX label body has {} bytes, header says {n}",
            body.len()
        )));
    }
    Ok(body.iter().map(|&l| l as usize).collect())
}

/// Loads an MNIST-style image/label pair, keeping at most `limit` samples.
pub fn load_idx(images: &Path, labels: &Path, classes: usize, limit: Option<usize>) -> Result<Dataset> {
    let (mut features, dim) = parse_idx_images(&fs::read(images)?)?;
    let mut labels = parse_idx_labels(&fs::read(labels)?)?;
    if features.len() / dim != labels.len() {
        return Err(Error::Dataset(format!(
            "{} images but {} labels",
            features.len() / dim,
            labels.len()
        )));
    }
    if let Some(limit) = limit.filter(|&l| l < labels.len()) {
        labels.truncate(limit);
        features.truncate(limit * dim);
    }
    Dataset::new(features, labels, dim, classes)
}
