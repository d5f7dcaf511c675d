//! Two-layer server receiver.
//!
//! Layer one equalizes the stacked antenna outputs with `b` and decodes an
//! integer combination `a^T W` of the devices' lattice points. Layer two
//! removes the dithers, rescales by `1 / (eta * 1^T a)` and restores the
//! weighted device means.
//!
//! All MSE quantities here are per dimension.

mod selection;

pub use selection::{select_coefficients, Selection, SelectionOptions};

use nalgebra::{DMatrix, DVector};

use crate::error::{check_len, Error, Result};
use crate::lattice::{Lattice, LatticePoint};
use crate::linalg::{gram_regularized, spd_solve};
use crate::transceiver::NormalizationParams;

/// Non-negative integer aggregation weights, not all zero.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CoefficientVector(Vec<i64>);

impl CoefficientVector {
    pub fn new(a: Vec<i64>) -> Result<Self> {
        if a.is_empty() {
            return Err(Error::InvalidArgument("coefficient vector is empty".into()));
        }
        if a.iter().any(|&x| x < 0) {
            return Err(Error::InvalidArgument(format!("negative coefficient in {a:?}")));
        }
        if a.iter().all(|&x| x == 0) {
            return Err(Error::InvalidArgument("all-zero coefficient vector".into()));
        }
        Ok(Self(a))
    }

    pub fn ones(k: usize) -> Self {
        Self(vec![1; k.max(1)])
    }

    pub fn as_slice(&self) -> &[i64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `1^T a`.
    pub fn sum(&self) -> i64 {
        self.0.iter().sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.0.iter().map(|&x| (x * x) as f64).sum()
    }

    pub fn to_dvector(&self) -> DVector<f64> {
        DVector::from_iterator(self.0.len(), self.0.iter().map(|&x| x as f64))
    }

    /// Whether every entry is at least one (the relaxed-selection domain).
    pub fn all_positive(&self) -> bool {
        self.0.iter().all(|&x| x >= 1)
    }
}

impl std::fmt::Display for CoefficientVector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.0.iter().map(i64::to_string).collect();
        f.write_str(&parts.join(";"))
    }
}

fn check_snr(snr: f64) -> Result<()> {
    if snr.is_finite() && snr > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("snr must be positive and finite, got {snr}")))
    }
}

/// MMSE equalizer `b = ((1/SNR) I + H H^T)^{-1} H a`.
pub fn optimal_b(h: &DMatrix<f64>, snr: f64, a: &CoefficientVector) -> Result<DVector<f64>> {
    check_snr(snr)?;
    check_len(h.ncols(), a.len())?;
    let rows = h.nrows();
    let s = DMatrix::identity(rows, rows) / snr + h * h.transpose();
    spd_solve(s, &(h * a.to_dvector()))
}

/// Decoding MSE for an arbitrary equalizer:
/// `(1 + 2 sigma_q^2) (|H^T b - a|^2 + |b|^2 / SNR)`.
pub fn equalizer_mse(
    h: &DMatrix<f64>,
    snr: f64,
    a: &CoefficientVector,
    b: &DVector<f64>,
    sigma_q2: f64,
) -> f64 {
    let residual = h.transpose() * b - a.to_dvector();
    let noise = if snr.is_infinite() { 0.0 } else { b.norm_squared() / snr };
    (1.0 + 2.0 * sigma_q2) * (residual.norm_squared() + noise)
}

/// Decoding MSE at the optimal equalizer,
/// `(1 + 2 sigma_q^2) a^T (I + SNR H^T H)^{-1} a`.
pub fn dmse(h: &DMatrix<f64>, snr: f64, a: &CoefficientVector, sigma_q2: f64) -> Result<f64> {
    check_snr(snr)?;
    check_len(h.ncols(), a.len())?;
    let av = a.to_dvector();
    let x = spd_solve(gram_regularized(h, snr), &av)?;
    Ok((1.0 + 2.0 * sigma_q2) * av.dot(&x))
}

/// The same quantity before the matrix inversion lemma is applied,
/// `(1 + 2 sigma_q^2) a^T [I - H^T ((1/SNR) I + H H^T)^{-1} H] a`.
pub fn dmse_unreduced(
    h: &DMatrix<f64>,
    snr: f64,
    a: &CoefficientVector,
    sigma_q2: f64,
) -> Result<f64> {
    check_snr(snr)?;
    check_len(h.ncols(), a.len())?;
    let av = a.to_dvector();
    let rows = h.nrows();
    let s = DMatrix::identity(rows, rows) / snr + h * h.transpose();
    let ha = h * &av;
    let x = spd_solve(s, &ha)?;
    Ok((1.0 + 2.0 * sigma_q2) * (av.norm_squared() - ha.dot(&x)))
}

/// `eta = (1 + sigma_q^2) |a|^2 / (a^T diag(sigma) a)`.
pub fn optimal_eta(a: &CoefficientVector, sigmas: &[f64], sigma_q2: f64) -> Result<f64> {
    check_len(a.len(), sigmas.len())?;
    let weighted: f64 = a
        .as_slice()
        .iter()
        .zip(sigmas)
        .map(|(&ak, &s)| (ak * ak) as f64 * s)
        .sum();
    if !(weighted > 0.0) {
        return Err(Error::DegenerateRound);
    }
    Ok((1.0 + sigma_q2) * a.norm_sq() / weighted)
}

/// Quantization MSE at the optimal normalizing factor,
/// `(a^T diag(sigma^2) a - (a^T diag(sigma) a)^2 / ((1 + sigma_q^2) |a|^2)) / (1^T a)^2`.
///
/// Evaluated through the Lagrange identity
/// `|a|^2 a^T diag(sigma^2) a - (a^T diag(sigma) a)^2
///   = 1/2 sum_{k,j} a_k^2 a_j^2 (sigma_k - sigma_j)^2`,
/// which is non-negative term by term and exactly zero for equal sigmas.
pub fn qmse(a: &CoefficientVector, sigmas: &[f64], sigma_q2: f64) -> Result<f64> {
    check_len(a.len(), sigmas.len())?;
    let total = a.sum() as f64;
    let norm_sq = a.norm_sq();
    let a2: Vec<f64> = a.as_slice().iter().map(|&x| (x * x) as f64).collect();
    let mut spread = 0.0;
    for (i, (&wi, &si)) in a2.iter().zip(sigmas).enumerate() {
        for (&wj, &sj) in a2[i + 1..].iter().zip(&sigmas[i + 1..]) {
            spread += wi * wj * (si - sj).powi(2);
        }
    }
    let quad: f64 = a2.iter().zip(sigmas).map(|(w, s)| w * s * s).sum();
    let numer = spread + sigma_q2 * norm_sq * quad;
    Ok(numer / ((1.0 + sigma_q2) * norm_sq * total * total))
}

/// Quantization MSE for an arbitrary normalizing factor:
/// `(|(I/eta - diag(sigma)) a|^2 + |a|^2 sigma_q^2 / eta^2) / (1^T a)^2`.
pub fn qmse_with_eta(a: &CoefficientVector, sigmas: &[f64], sigma_q2: f64, eta: f64) -> Result<f64> {
    check_len(a.len(), sigmas.len())?;
    let total = a.sum() as f64;
    let bias: f64 = a
        .as_slice()
        .iter()
        .zip(sigmas)
        .map(|(&ak, &s)| (ak as f64 * (1.0 / eta - s)).powi(2))
        .sum();
    Ok((bias + a.norm_sq() * sigma_q2 / (eta * eta)) / (total * total))
}

/// Scaled equalizer output `sqrt((1 + 2 sigma_q^2) / P) b^T Y`, one entry per symbol.
pub fn equalize(y: &DMatrix<f64>, b: &DVector<f64>, sigma_q2: f64, power: f64) -> Result<Vec<f64>> {
    check_len(y.nrows(), b.len())?;
    let gain = ((1.0 + 2.0 * sigma_q2) / power).sqrt();
    Ok((y.transpose() * b).iter().map(|v| gain * v).collect())
}

/// Quantizes the scaled equalizer output to the nearest lattice point.
///
/// A wrong lattice point is not an error: it shows up as additive error in
/// the aggregate.
pub fn decode_combination(
    lat: &Lattice,
    y: &DMatrix<f64>,
    b: &DVector<f64>,
    sigma_q2: f64,
    power: f64,
) -> Result<LatticePoint> {
    lat.quantize(&equalize(y, b, sigma_q2, power)?)
}

/// Everything the receiver needs for one round.
#[derive(Debug, Clone, PartialEq)]
pub struct ReceiverPlan {
    pub a: CoefficientVector,
    pub b: DVector<f64>,
    pub eta: f64,
    pub dmse: f64,
    pub qmse: f64,
}

impl ReceiverPlan {
    /// Plan with the optimal equalizer and optimal normalizing factor for `a`.
    pub fn new(
        h: &DMatrix<f64>,
        snr: f64,
        a: CoefficientVector,
        sigmas: &[f64],
        sigma_q2: f64,
    ) -> Result<Self> {
        let b = optimal_b(h, snr, &a)?;
        let dmse = dmse(h, snr, &a, sigma_q2)?;
        Self::assemble(a, b, dmse, sigmas, sigma_q2)
    }

    /// Plan with a caller-chosen equalizer (used for zero-forcing fixtures).
    pub fn with_equalizer(
        h: &DMatrix<f64>,
        snr: f64,
        a: CoefficientVector,
        b: DVector<f64>,
        sigmas: &[f64],
        sigma_q2: f64,
    ) -> Result<Self> {
        check_len(h.nrows(), b.len())?;
        check_len(h.ncols(), a.len())?;
        let dmse = equalizer_mse(h, snr, &a, &b, sigma_q2);
        Self::assemble(a, b, dmse, sigmas, sigma_q2)
    }

    /// Noiseless-channel plan with `b = H (H^T H)^{-1} a`, so `b^T H = a^T`.
    /// Needs `H` to have full column rank.
    pub fn zero_forcing(
        h: &DMatrix<f64>,
        a: CoefficientVector,
        sigmas: &[f64],
        sigma_q2: f64,
    ) -> Result<Self> {
        check_len(h.ncols(), a.len())?;
        let b = h * spd_solve(h.transpose() * h, &a.to_dvector())?;
        let dmse = equalizer_mse(h, f64::INFINITY, &a, &b, sigma_q2);
        Self::assemble(a, b, dmse, sigmas, sigma_q2)
    }

    fn assemble(
        a: CoefficientVector,
        b: DVector<f64>,
        dmse: f64,
        sigmas: &[f64],
        sigma_q2: f64,
    ) -> Result<Self> {
        let eta = optimal_eta(&a, sigmas, sigma_q2)?;
        let qmse = qmse(&a, sigmas, sigma_q2)?;
        Ok(Self { a, b, eta, dmse, qmse })
    }
}

/// Receiver output for one round.
#[derive(Debug, Clone)]
pub struct Aggregate {
    /// Estimated global update, truncated to the model dimension.
    pub update: Vec<f64>,
    /// The decoded integer combination.
    pub decoded: LatticePoint,
}

/// Reconstructs the global update from the received block `y`.
///
/// `dithers` are regenerated by the server from the shared streams and
/// `norms` arrive over the side channel.
pub fn aggregate(
    lat: &Lattice,
    y: &DMatrix<f64>,
    plan: &ReceiverPlan,
    dithers: &[Vec<f64>],
    norms: &[NormalizationParams],
    power: f64,
    model_dim: usize,
) -> Result<Aggregate> {
    let k = plan.a.len();
    check_len(k, dithers.len())?;
    check_len(k, norms.len())?;
    if model_dim > lat.dimension() {
        return Err(Error::DimensionMismatch {
            expected: lat.dimension(),
            got: model_dim,
        });
    }
    let sigma_q2 = lat.second_moment()?;
    let decoded = decode_combination(lat, y, &plan.b, sigma_q2, power)?;

    let total = plan.a.sum() as f64;
    let scale = 1.0 / (plan.eta * total);
    let mean: f64 = plan
        .a
        .as_slice()
        .iter()
        .zip(norms)
        .map(|(&ak, n)| ak as f64 * n.mean)
        .sum::<f64>()
        / total;

    let mut update: Vec<f64> = decoded.coords[..model_dim].to_vec();
    for (&ak, d) in plan.a.as_slice().iter().zip(dithers) {
        if ak == 0 {
            continue;
        }
        check_len(lat.dimension(), d.len())?;
        let w = ak as f64;
        for (u, di) in update.iter_mut().zip(d) {
            *u -= w * di;
        }
    }
    for u in &mut update {
        *u = *u * scale + mean;
    }
    Ok(Aggregate { update, decoded })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn random_h(rows: usize, k: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        DMatrix::from_fn(rows, k, |_, _| StandardNormal.sample(rng))
    }

    #[test]
    fn coefficient_vector_validation() {
        assert!(CoefficientVector::new(vec![0, 0]).is_err());
        assert!(CoefficientVector::new(vec![1, -1]).is_err());
        assert!(CoefficientVector::new(vec![]).is_err());
        let a = CoefficientVector::new(vec![0, 2, 1]).unwrap();
        assert_eq!((a.sum(), a.norm_sq(), a.all_positive()), (3, 5.0, false));
        assert_eq!(a.to_string(), "0;2;1");
    }

    #[test]
    fn scalar_channel_equalizer() {
        let (h, snr) = (0.7, 10.0);
        // M = K = 1 with a real gain: stacked H = [h; 0].
        let hm = DMatrix::from_column_slice(2, 1, &[h, 0.0]);
        let b = optimal_b(&hm, snr, &CoefficientVector::ones(1)).unwrap();
        assert!((b[0] - h / (1.0 / snr + h * h)).abs() < 1e-12);
        assert_eq!(b[1], 0.0);
    }

    #[test]
    fn zero_forcing_limit() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let h = random_h(4, 4, &mut rng);
        let a = CoefficientVector::new(vec![1, 2, 3, 1]).unwrap();
        let b = optimal_b(&h, 1e12, &a).unwrap();
        let bh = h.transpose() * b;
        for (x, &y) in bh.iter().zip(a.as_slice()) {
            assert!((x - y as f64).abs() < 1e-6);
        }
    }

    #[test]
    fn dmse_without_signal_path() {
        let h = DMatrix::zeros(6, 3);
        let a = CoefficientVector::new(vec![1, 2, 2]).unwrap();
        let v = dmse(&h, 10.0, &a, 0.01).unwrap();
        assert!((v - 1.02 * 9.0).abs() < 1e-12);
    }

    #[test]
    fn dmse_forms_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let (m, k) = (rng.random_range(1..8), rng.random_range(1..8));
            let h = random_h(2 * m, k, &mut rng) * 0.3;
            let a = CoefficientVector::new((0..k).map(|_| rng.random_range(1..4)).collect()).unwrap();
            let snr = 10f64.powf(rng.random_range(-1.0..2.0));
            let x = dmse(&h, snr, &a, 0.005).unwrap();
            let y = dmse_unreduced(&h, snr, &a, 0.005).unwrap();
            let z = equalizer_mse(&h, snr, &a, &optimal_b(&h, snr, &a).unwrap(), 0.005);
            assert!((x - y).abs() <= 1e-9 * x, "{x} vs {y}");
            assert!((x - z).abs() <= 1e-9 * x, "{x} vs {z}");
        }
    }

    #[test]
    fn dmse_non_increasing_in_snr() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let h = random_h(6, 4, &mut rng) * 0.3;
        let a = CoefficientVector::ones(4);
        let mut prev = f64::INFINITY;
        for i in 0..40 {
            let snr = 10f64.powf(-2.0 + 0.1 * i as f64);
            let v = dmse(&h, snr, &a, 0.0).unwrap();
            assert!(v <= prev * (1.0 + 1e-12));
            prev = v;
        }
    }

    #[test]
    fn eta_equal_sigmas() {
        let a = CoefficientVector::new(vec![1, 3, 2]).unwrap();
        let eta = optimal_eta(&a, &[0.4; 3], 0.0).unwrap();
        assert!((eta - 2.5).abs() < 1e-12);
        assert_eq!(qmse(&a, &[0.4; 3], 0.0).unwrap(), 0.0);
    }

    #[test]
    fn eta_degenerate_round() {
        let a = CoefficientVector::new(vec![1, 0]).unwrap();
        assert!(matches!(optimal_eta(&a, &[0.0, 1.0], 0.1), Err(Error::DegenerateRound)));
        // a device with a zero coefficient does not rescue the round, a
        // non-degenerate device with a positive one does
        let a = CoefficientVector::new(vec![1, 1]).unwrap();
        assert!(optimal_eta(&a, &[0.0, 1.0], 0.1).is_ok());
    }

    #[test]
    fn qmse_closed_form_matches_general_form() {
        let a = CoefficientVector::new(vec![1, 1]).unwrap();
        let (s, q) = ([1.0, 2.0], 0.1);
        let eta = optimal_eta(&a, &s, q).unwrap();
        // hand evaluation: |a|^2 = 2, a'diag(s)a = 3, a'diag(s^2)a = 5
        let closed = (5.0 - 9.0 / (1.1 * 2.0)) / 4.0;
        assert!((qmse(&a, &s, q).unwrap() - closed).abs() < 1e-12);
        assert!((qmse_with_eta(&a, &s, q, eta).unwrap() - closed).abs() < 1e-12);
    }

    #[test]
    fn qmse_homogeneous_in_a() {
        let a = CoefficientVector::new(vec![1, 2, 5]).unwrap();
        let a2 = CoefficientVector::new(vec![2, 4, 10]).unwrap();
        let s = [0.3, 1.1, 0.7];
        let (x, y) = (qmse(&a, &s, 0.02).unwrap(), qmse(&a2, &s, 0.02).unwrap());
        assert!((x - y).abs() < 1e-15 * x.max(1.0));
    }

    #[test]
    fn eta_stationarity() {
        let a = CoefficientVector::new(vec![3, 1, 2]).unwrap();
        let (s, q) = ([0.2, 0.9, 0.5], 0.03);
        let eta = optimal_eta(&a, &s, q).unwrap();
        let lin: f64 = a.as_slice().iter().zip(&s).map(|(&x, y)| (x * x) as f64 * y).sum();
        assert!(((1.0 + q) * a.norm_sq() / eta - lin).abs() < 1e-12);
    }

    #[test]
    fn clean_single_device_decode() {
        let lat = Lattice::hexagonal(1.0, 8).unwrap();
        let pt = lat.point_from_integers(vec![3, -1, 0, 2, 5, 5, -4, 0]).unwrap();
        let (power, q) = (1.0f64, 0.005);
        let amp = (power / (1.0 + 2.0 * q)).sqrt();
        // M = 4 antennas all with unit gain, noiseless.
        let h = DMatrix::from_fn(8, 1, |r, _| if r < 4 { 1.0 } else { 0.0 });
        let x = DMatrix::from_fn(1, 8, |_, c| amp * pt.coords[c]);
        let y = &h * x;
        let b = optimal_b(&h, 1e9, &CoefficientVector::ones(1)).unwrap();
        let dec = decode_combination(&lat, &y, &b, q, power).unwrap();
        assert_eq!(dec.integer_rep, pt.integer_rep);
    }
}
