//! Block-fading Rayleigh multiple-access channel in real-stacked form.
//!
//! Noise is added with variance `sigma_z^2` on every real entry of the
//! stacked output, so that `E|b^T Z|^2 = sigma_z^2 |b|^2` per symbol. This is
//! the reading under which the decoding-MSE expression holds exactly.

use std::f64::consts::TAU;
use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Exp, Normal};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    /// `M x K` complex gains.
    pub complex_gains: DMatrix<Complex64>,
    /// `2M x K`, real parts on top of imaginary parts.
    pub real_stacked: DMatrix<f64>,
    /// Noise variance per real output entry.
    pub noise_var: f64,
    /// `P / sigma_z^2`; infinite for a noiseless channel.
    pub snr: f64,
}

pub fn stack_real(complex_gains: &DMatrix<Complex64>) -> DMatrix<f64> {
    let (m, k) = complex_gains.shape();
    DMatrix::from_fn(2 * m, k, |r, c| {
        if r < m {
            complex_gains[(r, c)].re
        } else {
            complex_gains[(r - m, c)].im
        }
    })
}

impl ChannelRealization {
    /// Wraps known gains. `noise_var = power / snr`; `snr = inf` is noiseless.
    pub fn new(complex_gains: DMatrix<Complex64>, snr: f64, power: f64) -> Result<Self> {
        if !(snr > 0.0) || snr.is_nan() {
            return Err(Error::InvalidArgument(format!("snr must be positive, got {snr}")));
        }
        if !(power.is_finite() && power > 0.0) {
            return Err(Error::InvalidArgument(format!("power must be positive, got {power}")));
        }
        if complex_gains.nrows() == 0 || complex_gains.ncols() == 0 {
            return Err(Error::InvalidArgument("channel needs M, K >= 1".into()));
        }
        let real_stacked = stack_real(&complex_gains);
        Ok(Self {
            complex_gains,
            real_stacked,
            noise_var: power / snr,
            snr,
        })
    }

    /// Builds a realization from an already-stacked `2M x K` real matrix.
    pub fn from_real_stacked(h: DMatrix<f64>, snr: f64, power: f64) -> Result<Self> {
        if h.nrows() % 2 != 0 {
            return Err(Error::InvalidArgument(format!(
                "stacked channel needs an even row count, got {}",
                h.nrows()
            )));
        }
        let m = h.nrows() / 2;
        let hc = DMatrix::from_fn(m, h.ncols(), |r, c| Complex64::new(h[(r, c)], h[(r + m, c)]));
        Self::new(hc, snr, power)
    }

    /// Reads `M` lines of `K` comma-separated `re,im` pairs.
    pub fn from_csv(path: &Path, snr: f64, power: f64) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_path(path)?;
        let mut rows: Vec<Vec<Complex64>> = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            if rec.len() % 2 != 0 {
                return Err(Error::InvalidArgument(format!(
                    "{}: row {} has an odd number of fields",
                    path.display(),
                    line + 1
                )));
            }
            let vals: Vec<f64> = rec
                .iter()
                .map(|f| {
                    f.parse::<f64>().map_err(|e| {
                        Error::InvalidArgument(format!("{}: row {}: {e}", path.display(), line + 1))
                    })
                })
                .collect::<Result<_>>()?;
            rows.push(vals.chunks_exact(2).map(|p| Complex64::new(p[0], p[1])).collect());
        }
        let k = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != k) {
            return Err(Error::InvalidArgument(format!(
                "{}: rows have differing lengths",
                path.display()
            )));
        }
        let hc = DMatrix::from_fn(rows.len(), k, |r, c| rows[r][c]);
        Self::new(hc, snr, power)
    }

    pub fn antennas(&self) -> usize {
        self.complex_gains.nrows()
    }

    pub fn devices(&self) -> usize {
        self.complex_gains.ncols()
    }
}

/// Draws i.i.d. gains with `|h|^2 ~ Exp(fading_rate)` and uniform phase.
pub fn draw_channel<R: Rng + ?Sized>(
    m: usize,
    k: usize,
    fading_rate: f64,
    snr: f64,
    power: f64,
    rng: &mut R,
) -> Result<ChannelRealization> {
    if m == 0 || k == 0 {
        return Err(Error::InvalidArgument("channel needs M, K >= 1".into()));
    }
    let exp = Exp::new(fading_rate)
        .map_err(|_| Error::InvalidArgument(format!("bad fading rate {fading_rate}")))?;
    let mut gains = Vec::with_capacity(m * k);
    for _ in 0..m * k {
        let mag = exp.sample(rng).sqrt();
        let phase = rng.random::<f64>() * TAU;
        gains.push(Complex64::from_polar(mag, phase));
    }
    // row-major draw order
    let hc = DMatrix::from_row_slice(m, k, &gains);
    ChannelRealization::new(hc, snr, power)
}

/// `Y = H X + Z` with `X` holding one device signal per row.
pub fn transmit<R: Rng + ?Sized>(
    ch: &ChannelRealization,
    x: &DMatrix<f64>,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    if x.nrows() != ch.devices() {
        return Err(Error::DimensionMismatch {
            expected: ch.devices(),
            got: x.nrows(),
        });
    }
    let mut y = &ch.real_stacked * x;
    if ch.noise_var > 0.0 {
        let normal = Normal::new(0.0, ch.noise_var.sqrt()).expect("finite noise variance");
        // column-major fill, antenna index fastest
        for v in y.iter_mut() {
            *v += normal.sample(rng);
        }
    }
    Ok(y)
}

/// Stacks device signals into the `K x s` matrix expected by [`transmit`].
pub fn signal_matrix(signals: &[&[f64]]) -> Result<DMatrix<f64>> {
    let s = signals.first().map_or(0, |v| v.len());
    if signals.iter().any(|v| v.len() != s) {
        return Err(Error::InvalidArgument("device signals differ in length".into()));
    }
    Ok(DMatrix::from_fn(signals.len(), s, |r, c| signals[r][c]))
}
