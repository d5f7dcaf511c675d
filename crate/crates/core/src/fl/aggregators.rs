//! Server-side aggregation schemes.
//!
//! * ideal: exact mean of the device updates.
//! * orthogonal quantized: each device is dithered-lattice quantized and
//!   reconstructed without interference, then averaged.
//! * over the air: all devices transmit at once; the receiver decodes an
//!   integer combination. Coefficients are either optimized per round or
//!   fixed to all ones (the blind equal-weight baseline).

use nalgebra::DMatrix;

use crate::channel::{signal_matrix, transmit, ChannelRealization};
use crate::error::{check_len, Error, Result};
use crate::lattice::Lattice;
use crate::receiver::{self, select_coefficients, CoefficientVector, ReceiverPlan};
use crate::rng::{label, StreamFactory};
use crate::transceiver::{encode, NormalizationParams};

/// Arithmetic mean of the updates.
pub fn ideal_aggregate(updates: &[Vec<f64>]) -> Result<Vec<f64>> {
    let first = updates
        .first()
        .ok_or_else(|| Error::InvalidArgument("no updates to aggregate".into()))?;
    let mut acc = vec![0.0; first.len()];
    for u in updates {
        check_len(first.len(), u.len())?;
        for (a, v) in acc.iter_mut().zip(u) {
            *a += v;
        }
    }
    let k = updates.len() as f64;
    acc.iter_mut().for_each(|a| *a /= k);
    Ok(acc)
}

fn padded(update: &[f64], dim: usize) -> Vec<f64> {
    let mut v = update.to_vec();
    v.resize(dim, 0.0);
    v
}

fn lattice_for(lat: &Lattice, model_dim: usize) -> Result<Lattice> {
    let dim = Lattice::padded_dimension(model_dim);
    if dim == lat.dimension() {
        Ok(lat.clone())
    } else {
        lat.with_dimension(dim)
    }
}

/// Per-device quantize and reconstruct, then average. No channel.
pub fn orthogonal_quantized_aggregate(
    lat: &Lattice,
    updates: &[Vec<f64>],
    power: f64,
    streams: &StreamFactory,
    round: usize,
) -> Result<Vec<f64>> {
    let d = updates
        .first()
        .ok_or_else(|| Error::InvalidArgument("no updates to aggregate".into()))?
        .len();
    let lat = lattice_for(lat, d)?;
    let recon = updates
        .iter()
        .enumerate()
        .map(|(k, u)| {
            check_len(d, u.len())?;
            let enc = encode(&lat, &padded(u, lat.dimension()), power, &mut streams.dither(k, round))?;
            let mut r = enc.reconstruct();
            r.truncate(d);
            Ok(r)
        })
        .collect::<Result<Vec<_>>>()?;
    ideal_aggregate(&recon)
}

/// How the over-the-air receiver picks its integer coefficients.
#[derive(Debug, Clone, PartialEq)]
pub enum CoefficientPolicy {
    /// Relaxed QP with rounding, re-solved every round.
    Optimized,
    /// `a = 1`, no adaptation.
    AllOnes,
    Fixed(CoefficientVector),
}

#[derive(Debug, Clone)]
pub struct OtaOutcome {
    /// `None` when every weighted device was degenerate and the round was skipped.
    pub update: Option<Vec<f64>>,
    pub plan: Option<ReceiverPlan>,
    /// Whether the decoded point equals the true integer combination.
    /// Simulation-only ground truth, never fed back into the receiver.
    pub decode_success: Option<bool>,
    /// Per-dimension squared distance between the decoded and true
    /// combinations.
    pub decode_error: Option<f64>,
}

/// One over-the-air round: encode every device, superpose through `channel`,
/// and reconstruct at the server from the shared dither streams.
///
/// On a noiseless channel (`snr = inf`) the receiver zero-forces and the
/// optimized policy falls back to all ones.
pub fn over_the_air_aggregate(
    lat: &Lattice,
    channel: &ChannelRealization,
    updates: &[Vec<f64>],
    power: f64,
    policy: &CoefficientPolicy,
    streams: &StreamFactory,
    round: usize,
) -> Result<OtaOutcome> {
    let k = updates.len();
    check_len(channel.devices(), k)?;
    let d = updates
        .first()
        .ok_or_else(|| Error::InvalidArgument("no updates to aggregate".into()))?
        .len();
    let lat = lattice_for(lat, d)?;
    let sigma_q2 = lat.second_moment()?;

    // Devices.
    let encoded = updates
        .iter()
        .enumerate()
        .map(|(dev, u)| {
            check_len(d, u.len())?;
            encode(&lat, &padded(u, lat.dimension()), power, &mut streams.dither(dev, round))
        })
        .collect::<Result<Vec<_>>>()?;
    let signals: Vec<&[f64]> = encoded.iter().map(|e| e.signal.as_slice()).collect();
    let x: DMatrix<f64> = signal_matrix(&signals)?;
    let y = transmit(channel, &x, &mut streams.stream(label::NOISE, &[round as u64]))?;

    // Server: dithers from shared randomness, scalars from the side channel.
    let dithers: Vec<Vec<f64>> = (0..k)
        .map(|dev| lat.sample_dither(&mut streams.dither(dev, round)))
        .collect();
    let norms: Vec<NormalizationParams> = encoded.iter().map(|e| e.norm).collect();
    let sigmas: Vec<f64> = norms.iter().map(|n| n.std).collect();

    let h = &channel.real_stacked;
    let noiseless = channel.snr.is_infinite();
    let a = match policy {
        CoefficientPolicy::Optimized if noiseless => CoefficientVector::ones(k),
        CoefficientPolicy::Optimized => select_coefficients(h, channel.snr)?.a,
        CoefficientPolicy::AllOnes => CoefficientVector::ones(k),
        CoefficientPolicy::Fixed(a) => a.clone(),
    };
    let plan = if noiseless {
        ReceiverPlan::zero_forcing(h, a, &sigmas, sigma_q2)
    } else {
        ReceiverPlan::new(h, channel.snr, a, &sigmas, sigma_q2)
    };
    let plan = match plan {
        Ok(p) => p,
        Err(Error::DegenerateRound) => {
            log::warn!("round {round}: all weighted devices degenerate, skipping aggregation");
            return Ok(OtaOutcome {
                update: None,
                plan: None,
                decode_success: None,
                decode_error: None,
            });
        }
        Err(e) => return Err(e),
    };
    let agg = receiver::aggregate(&lat, &y, &plan, &dithers, &norms, power, d)?;

    let points: Vec<_> = encoded.iter().map(|e| &e.lattice_point).collect();
    let truth = lat.integer_combination(plan.a.as_slice(), &points)?;
    let decode_error = agg
        .decoded
        .coords
        .iter()
        .zip(&truth.coords)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        / lat.dimension() as f64;
    Ok(OtaOutcome {
        update: Some(agg.update),
        decode_success: Some(agg.decoded.integer_rep == truth.integer_rep),
        decode_error: Some(decode_error),
        plan: Some(plan),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::HEX_BLOCK_SECOND_MOMENT;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn updates(k: usize, d: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..k)
            .map(|i| {
                (0..d)
                    .map(|_| 0.01 * (i as f64 + 1.0) * Distribution::<f64>::sample(&StandardNormal, &mut rng))
                    .collect()
            })
            .collect()
    }

    #[test]
    fn ideal_symmetry_and_idempotence() {
        let v = vec![1.0, -2.0, 0.5];
        let neg: Vec<f64> = v.iter().map(|x| -x).collect();
        assert_eq!(ideal_aggregate(&[v.clone(), neg]).unwrap(), vec![0.0; 3]);
        assert_eq!(ideal_aggregate(&vec![v.clone(); 4]).unwrap(), v);
        assert!(ideal_aggregate(&[]).is_err());
    }

    #[test]
    fn vanishing_quantization_matches_ideal() {
        let lat = Lattice::hexagonal(1e-6, 2)
            .unwrap()
            .with_second_moment(HEX_BLOCK_SECOND_MOMENT * 1e-12)
            .unwrap();
        let u = updates(4, 101, 1);
        let ideal = ideal_aggregate(&u).unwrap();
        let q = orthogonal_quantized_aggregate(&lat, &u, 1.0, &StreamFactory::new(5), 0).unwrap();
        assert_eq!(q.len(), 101);
        let err: f64 = q.iter().zip(&ideal).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let norm: f64 = ideal.iter().map(|a| a * a).sum::<f64>().sqrt();
        assert!(err / norm < 1e-3);
    }

    #[test]
    fn blind_equals_fixed_ones_bitwise() {
        let lat = Lattice::hexagonal(1.0, 2).unwrap().with_second_moment(HEX_BLOCK_SECOND_MOMENT).unwrap();
        let u = updates(3, 40, 2);
        let ch = crate::channel::draw_channel(4, 3, 5.0, 10.0, 1.0, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let s = StreamFactory::new(9);
        let a = over_the_air_aggregate(&lat, &ch, &u, 1.0, &CoefficientPolicy::AllOnes, &s, 4).unwrap();
        let b = over_the_air_aggregate(
            &lat,
            &ch,
            &u,
            1.0,
            &CoefficientPolicy::Fixed(CoefficientVector::ones(3)),
            &s,
            4,
        )
        .unwrap();
        assert_eq!(a.update, b.update);
    }

    #[test]
    fn all_degenerate_round_is_skipped() {
        let lat = Lattice::hexagonal(1.0, 2).unwrap().with_second_moment(HEX_BLOCK_SECOND_MOMENT).unwrap();
        let u = vec![vec![0.3; 10], vec![-0.1; 10]];
        let ch = crate::channel::draw_channel(2, 2, 5.0, 10.0, 1.0, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let out = over_the_air_aggregate(&lat, &ch, &u, 1.0, &CoefficientPolicy::AllOnes, &StreamFactory::new(1), 0)
            .unwrap();
        assert!(out.update.is_none());
    }
}
