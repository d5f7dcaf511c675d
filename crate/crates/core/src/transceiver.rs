//! Device-side transmitter: normalize, dither, quantize, power-scale.

use rand::Rng;

use crate::error::{check_len, Error, Result};
use crate::lattice::{Lattice, LatticePoint};

/// Below this standard deviation an update is treated as constant.
pub const DEGENERATE_STD: f64 = 1e-12;

/// Per-device mean and (population) standard deviation of the update.
///
/// Sent to the server losslessly over the side channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizationParams {
    pub mean: f64,
    pub std: f64,
}

impl NormalizationParams {
    /// Constant updates carry no shape information and transmit the origin.
    pub fn is_degenerate(&self) -> bool {
        self.std == 0.0
    }

    /// Inverse of [`normalize`].
    pub fn denormalize(&self, normalized: &[f64]) -> Vec<f64> {
        normalized.iter().map(|v| v * self.std + self.mean).collect()
    }
}

#[derive(Debug, Clone)]
pub struct EncodedUpdate {
    pub norm: NormalizationParams,
    pub dither: Vec<f64>,
    pub lattice_point: LatticePoint,
    pub signal: Vec<f64>,
    pub power: f64,
}

impl EncodedUpdate {
    /// Dequantized normalized update, `lattice_point - dither`.
    pub fn dedithered(&self) -> Vec<f64> {
        self.lattice_point
            .coords
            .iter()
            .zip(&self.dither)
            .map(|(p, d)| p - d)
            .collect()
    }

    /// Reconstruction of the original update without any channel.
    pub fn reconstruct(&self) -> Vec<f64> {
        self.norm.denormalize(&self.dedithered())
    }
}

/// Zero-mean, unit-variance normalization with divisor `s`.
pub fn normalize(delta_w: &[f64]) -> Result<(Vec<f64>, NormalizationParams)> {
    if delta_w.is_empty() {
        return Err(Error::InvalidArgument("cannot normalize an empty update".into()));
    }
    let n = delta_w.len() as f64;
    let mean = delta_w.iter().sum::<f64>() / n;
    let var = delta_w.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    if !(std >= DEGENERATE_STD) {
        return Ok((vec![0.0; delta_w.len()], NormalizationParams { mean, std: 0.0 }));
    }
    let normalized = delta_w.iter().map(|v| (v - mean) / std).collect();
    Ok((normalized, NormalizationParams { mean, std }))
}

/// Amplitude factor `sqrt(P / (1 + 2 sigma_q^2))` applied to the lattice point.
pub fn power_scale(power: f64, sigma_q2: f64) -> f64 {
    (power / (1.0 + 2.0 * sigma_q2)).sqrt()
}

/// Runs the full transmitter chain on an update of length `lat.dimension()`.
///
/// `dither_rng` must be the device's shared-randomness stream for the round,
/// so the server can regenerate the same dither.
pub fn encode<R: Rng + ?Sized>(
    lat: &Lattice,
    delta_w: &[f64],
    power: f64,
    dither_rng: &mut R,
) -> Result<EncodedUpdate> {
    check_len(lat.dimension(), delta_w.len())?;
    if !(power.is_finite() && power > 0.0) {
        return Err(Error::InvalidArgument(format!("power must be positive, got {power}")));
    }
    let sigma_q2 = lat.second_moment()?;
    let (normalized, norm) = normalize(delta_w)?;
    let dither = lat.sample_dither(dither_rng);
    let lattice_point = if norm.is_degenerate() {
        lat.origin()
    } else {
        let shifted: Vec<f64> = normalized.iter().zip(&dither).map(|(w, d)| w + d).collect();
        lat.quantize(&shifted)?
    };
    let amp = power_scale(power, sigma_q2);
    let signal = lattice_point.coords.iter().map(|v| amp * v).collect();
    Ok(EncodedUpdate {
        norm,
        dither,
        lattice_point,
        signal,
        power,
    })
}
