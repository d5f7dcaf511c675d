//! Built-in self-check suite behind `fedcpu validate`.
//!
//! Quick oracle comparisons that can run on any machine in a few seconds.
//! The full statistical suite lives in the test targets.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::Result;
use crate::lattice::{Lattice, HEX_BLOCK_SECOND_MOMENT};
use crate::receiver::{dmse, dmse_unreduced, equalizer_mse, optimal_b, optimal_eta, qmse, qmse_with_eta, CoefficientVector};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn gaussian(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal))
}

fn random_a(k: usize, rng: &mut ChaCha8Rng) -> CoefficientVector {
    loop {
        let a: Vec<i64> = (0..k).map(|_| rng.random_range(0..5)).collect();
        if let Ok(a) = CoefficientVector::new(a) {
            return a;
        }
    }
}

fn nearest_point(lat: &Lattice) -> Result<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let g = lat.block_generator();
    let mut mismatches = 0;
    for _ in 0..1000 {
        let y = [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)];
        let q = lat.quantize(&y)?;
        let mut best = f64::INFINITY;
        for i in -40..=40 {
            for j in -40..=40 {
                let p = [g[0][0] * i as f64 + g[0][1] * j as f64, g[1][0] * i as f64 + g[1][1] * j as f64];
                best = best.min((y[0] - p[0]).powi(2) + (y[1] - p[1]).powi(2));
            }
        }
        let got = (y[0] - q.coords[0]).powi(2) + (y[1] - q.coords[1]).powi(2);
        if got > best + 1e-12 {
            mismatches += 1;
        }
    }
    Ok(Check {
        name: "nearest-point search",
        passed: mismatches == 0,
        detail: format!("{mismatches} mismatches in 1000 inputs"),
    })
}

fn dither_moment(lat: &Lattice) -> Result<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let n = 200_000;
    let mut acc = 0.0;
    for _ in 0..n {
        let d = lat.sample_dither_block(&mut rng);
        acc += (d[0] * d[0] + d[1] * d[1]) / 2.0;
    }
    let est = acc / n as f64;
    let exact = HEX_BLOCK_SECOND_MOMENT * lat.scale().powi(2);
    let rel = (est - exact).abs() / exact;
    Ok(Check {
        name: "dither second moment",
        passed: rel < 0.02,
        detail: format!("estimate {est:.6e}, hexagonal-cell value {exact:.6e}, rel {rel:.2e}"),
    })
}

fn dmse_forms() -> Result<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let k = rng.random_range(1..=12);
        let m = rng.random_range(1..=12);
        let h = gaussian(2 * m, k, &mut rng) * 0.45;
        let snr = 10f64.powf(rng.random_range(-1.0..3.0));
        let a = random_a(k, &mut rng);
        let s2 = HEX_BLOCK_SECOND_MOMENT;
        let x = dmse(&h, snr, &a, s2)?;
        let y = dmse_unreduced(&h, snr, &a, s2)?;
        let b = optimal_b(&h, snr, &a)?;
        let z = equalizer_mse(&h, snr, &a, &b, s2);
        worst = worst.max((x - y).abs() / y).max((x - z).abs() / z);
    }
    Ok(Check {
        name: "decoding MSE closed forms",
        passed: worst <= 1e-9,
        detail: format!("worst relative gap {worst:.2e}"),
    })
}

fn equalizer_optimality() -> Result<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..20 {
        let k = rng.random_range(1..=8);
        let h = gaussian(2 * rng.random_range(1..=8), k, &mut rng) * 0.45;
        let a = random_a(k, &mut rng);
        let b = optimal_b(&h, 10.0, &a)?;
        let f0 = equalizer_mse(&h, 10.0, &a, &b, HEX_BLOCK_SECOND_MOMENT);
        for _ in 0..100 {
            let d = DVector::from_fn(b.len(), |_, _| rng.sample::<f64, _>(StandardNormal));
            let p = &b + d.normalize() * 0.01;
            let f = equalizer_mse(&h, 10.0, &a, &p, HEX_BLOCK_SECOND_MOMENT);
            worst = worst.max(f0 - f);
        }
    }
    Ok(Check {
        name: "equalizer optimality",
        passed: worst <= 1e-10,
        detail: format!("largest decrease under perturbation {worst:.2e}"),
    })
}

fn eta_optimality() -> Result<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..20 {
        let k = rng.random_range(1..=10);
        let a = random_a(k, &mut rng);
        let sig: Vec<f64> = (0..k).map(|_| rng.random_range(0.01..2.0)).collect();
        let s2 = rng.random_range(1e-4..0.1);
        let q0 = qmse(&a, &sig, s2)?;
        let eta = optimal_eta(&a, &sig, s2)?;
        for i in 0..1000 {
            let e = eta * 10f64.powf(-3.0 + 6.0 * i as f64 / 999.0);
            worst = worst.max(q0 - qmse_with_eta(&a, &sig, s2, e)?);
        }
    }
    Ok(Check {
        name: "normalizing factor optimality",
        passed: worst <= 1e-12,
        detail: format!("largest grid improvement {worst:.2e}"),
    })
}

/// Runs the suite on the lattice at scale `rho`.
pub fn run_checks(rho: f64) -> Result<Vec<Check>> {
    let lat = Lattice::hexagonal(rho, 2)?;
    Ok(vec![
        nearest_point(&lat)?,
        dither_moment(&lat)?,
        dmse_forms()?,
        equalizer_optimality()?,
        eta_optimality()?,
    ])
}
