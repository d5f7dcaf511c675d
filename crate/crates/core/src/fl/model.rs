//! A small fully connected classifier with a flat parameter vector.
//!
//! `hidden = 0` gives a linear softmax model; otherwise one ReLU hidden
//! layer sits between input and output. Loss is mean cross-entropy.

use rand::Rng;

use super::data::Dataset;
use crate::error::{check_len, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MlpShape {
    pub input: usize,
    pub hidden: usize,
    pub output: usize,
}

impl MlpShape {
    pub fn param_count(&self) -> usize {
        if self.hidden == 0 {
            self.output * self.input + self.output
        } else {
            self.hidden * self.input + self.hidden + self.output * self.hidden + self.output
        }
    }

    /// Lengths of the flattened blocks in storage order.
    fn block_lengths(&self) -> Vec<usize> {
        if self.hidden == 0 {
            vec![self.output * self.input, self.output]
        } else {
            vec![
                self.hidden * self.input,
                self.hidden,
                self.output * self.hidden,
                self.output,
            ]
        }
    }
}

/// Flattened weights. Storage order is `W1, b1, W2, b2` (row-major
/// matrices), or `W, b` for the linear model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub shape: MlpShape,
    pub values: Vec<f64>,
}

impl ModelParams {
    pub fn zeros(shape: MlpShape) -> Self {
        Self {
            shape,
            values: vec![0.0; shape.param_count()],
        }
    }

    /// Uniform Glorot initialization; biases start at zero.
    pub fn init<R: Rng + ?Sized>(shape: MlpShape, rng: &mut R) -> Self {
        let mut p = Self::zeros(shape);
        let layers: Vec<(usize, usize)> = if shape.hidden == 0 {
            vec![(shape.input, shape.output)]
        } else {
            vec![(shape.input, shape.hidden), (shape.hidden, shape.output)]
        };
        let mut offset = 0;
        for (fan_in, fan_out) in layers {
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for v in &mut p.values[offset..offset + fan_in * fan_out] {
                *v = rng.random_range(-limit..limit);
            }
            offset += fan_in * fan_out + fan_out;
        }
        p
    }

    /// Rebuilds parameters from per-layer blocks as returned by [`Self::unflatten`].
    pub fn flatten(shape: MlpShape, blocks: &[Vec<f64>]) -> Result<Self> {
        let lens = shape.block_lengths();
        check_len(lens.len(), blocks.len())?;
        let mut values = Vec::with_capacity(shape.param_count());
        for (b, &l) in blocks.iter().zip(&lens) {
            check_len(l, b.len())?;
            values.extend_from_slice(b);
        }
        Ok(Self { shape, values })
    }

    pub fn unflatten(&self) -> Vec<Vec<f64>> {
        let mut out = Vec::new();
        let mut offset = 0;
        for l in self.shape.block_lengths() {
            out.push(self.values[offset..offset + l].to_vec());
            offset += l;
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn add_assign(&mut self, delta: &[f64]) -> Result<()> {
        check_len(self.values.len(), delta.len())?;
        for (w, d) in self.values.iter_mut().zip(delta) {
            *w += d;
        }
        Ok(())
    }
}

struct Cache {
    hidden: Vec<f64>,
    probs: Vec<f64>,
}

fn softmax_in_place(z: &mut [f64]) {
    let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in z.iter_mut() {
        *v /= sum;
    }
}

fn affine(w: &[f64], b: &[f64], x: &[f64], out: &mut Vec<f64>) {
    out.clear();
    out.extend(b.iter().enumerate().map(|(r, &bias)| {
        let row = &w[r * x.len()..(r + 1) * x.len()];
        bias + row.iter().zip(x).map(|(a, c)| a * c).sum::<f64>()
    }));
}

fn forward(p: &ModelParams, x: &[f64], cache: &mut Cache) {
    let s = p.shape;
    if s.hidden == 0 {
        let (w, b) = p.values.split_at(s.output * s.input);
        affine(w, b, x, &mut cache.probs);
    } else {
        let (w1, rest) = p.values.split_at(s.hidden * s.input);
        let (b1, rest) = rest.split_at(s.hidden);
        let (w2, b2) = rest.split_at(s.output * s.hidden);
        affine(w1, b1, x, &mut cache.hidden);
        for h in &mut cache.hidden {
            *h = h.max(0.0);
        }
        affine(w2, b2, &cache.hidden, &mut cache.probs);
    }
    softmax_in_place(&mut cache.probs);
}

/// Mean cross-entropy over `indices` of `data` and its gradient.
pub fn loss_and_grad(p: &ModelParams, data: &Dataset, indices: &[usize]) -> Result<(f64, Vec<f64>)> {
    let s = p.shape;
    check_len(s.input, data.dim)?;
    if indices.is_empty() {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    let mut grad = vec![0.0; s.param_count()];
    let mut cache = Cache {
        hidden: Vec::with_capacity(s.hidden),
        probs: Vec::with_capacity(s.output),
    };
    let mut loss = 0.0;
    let mut dh = vec![0.0; s.hidden];
    for &i in indices {
        let x = data.sample(i);
        let y = data.labels[i];
        forward(p, x, &mut cache);
        loss -= cache.probs[y].max(1e-300).ln();
        let mut dz = cache.probs.clone();
        dz[y] -= 1.0;

        if s.hidden == 0 {
            let (gw, gb) = grad.split_at_mut(s.output * s.input);
            for (o, &d) in dz.iter().enumerate() {
                gb[o] += d;
                for (g, &xi) in gw[o * s.input..(o + 1) * s.input].iter_mut().zip(x) {
                    *g += d * xi;
                }
            }
            continue;
        }

        let w2 = &p.values[s.hidden * s.input + s.hidden..s.param_count() - s.output];
        let (gw1, rest) = grad.split_at_mut(s.hidden * s.input);
        let (gb1, rest) = rest.split_at_mut(s.hidden);
        let (gw2, gb2) = rest.split_at_mut(s.output * s.hidden);
        dh.iter_mut().for_each(|v| *v = 0.0);
        for (o, &d) in dz.iter().enumerate() {
            gb2[o] += d;
            let row = o * s.hidden..(o + 1) * s.hidden;
            for ((g, &h), (acc, &w)) in gw2[row.clone()]
                .iter_mut()
                .zip(&cache.hidden)
                .zip(dh.iter_mut().zip(&w2[row]))
            {
                *g += d * h;
                *acc += d * w;
            }
        }
        for (j, &h) in cache.hidden.iter().enumerate() {
            if h <= 0.0 {
                continue;
            }
            let d = dh[j];
            gb1[j] += d;
            for (g, &xi) in gw1[j * s.input..(j + 1) * s.input].iter_mut().zip(x) {
                *g += d * xi;
            }
        }
    }
    let n = indices.len() as f64;
    grad.iter_mut().for_each(|g| *g /= n);
    Ok((loss / n, grad))
}

pub fn predict(p: &ModelParams, x: &[f64]) -> usize {
    let mut cache = Cache {
        hidden: Vec::with_capacity(p.shape.hidden),
        probs: Vec::with_capacity(p.shape.output),
    };
    forward(p, x, &mut cache);
    cache
        .probs
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, &v)| if v > best.1 { (i, v) } else { best })
        .0
}

/// Fraction of correctly classified samples.
pub fn accuracy(p: &ModelParams, data: &Dataset) -> f64 {
    if data.is_empty() {
        return 0.0;
    }
    let correct = (0..data.len())
        .filter(|&i| predict(p, data.sample(i)) == data.labels[i])
        .count();
    correct as f64 / data.len() as f64
}
