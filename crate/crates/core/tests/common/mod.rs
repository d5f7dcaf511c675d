//! Shared fixtures and independent oracles for the integration tests.
#![allow(dead_code)]

use fedcpu::lattice::{Lattice, HEX_BLOCK_SECOND_MOMENT};
use fedcpu::receiver::CoefficientVector;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

/// Hexagonal-cell second moment of the default block at unit scale,
/// recomputed here from the cell vertices with the shoelace-style polygon
/// moment formula rather than taken from the library.
pub fn hexagon_second_moment() -> f64 {
    let v = [
        (0.15625, 0.0),
        (0.09375, 0.125),
        (-0.09375, 0.125),
        (-0.15625, 0.0),
        (-0.09375, -0.125),
        (0.09375, -0.125),
    ];
    let (mut area2, mut ixx, mut iyy) = (0.0, 0.0, 0.0);
    for i in 0..v.len() {
        let (x0, y0) = v[i];
        let (x1, y1) = v[(i + 1) % v.len()];
        let c = x0 * y1 - x1 * y0;
        area2 += c;
        ixx += c * (y0 * y0 + y0 * y1 + y1 * y1);
        iyy += c * (x0 * x0 + x0 * x1 + x1 * x1);
    }
    let area = area2 / 2.0;
    (ixx + iyy) / 12.0 / area / 2.0
}

pub fn hex_lattice(rho: f64, dim: usize) -> Lattice {
    Lattice::hexagonal(rho, dim)
        .unwrap()
        .with_second_moment(HEX_BLOCK_SECOND_MOMENT * rho * rho)
        .unwrap()
}

/// Nearest point by exhaustive search over `integer_rep` in `[-r, r]^2`.
pub fn exhaustive_nearest(g: [[f64; 2]; 2], x: [f64; 2], r: i64) -> ([f64; 2], [i64; 2], f64) {
    let mut best = ([0.0; 2], [0; 2], f64::INFINITY);
    for i in -r..=r {
        for j in -r..=r {
            let p = [
                g[0][0] * i as f64 + g[0][1] * j as f64,
                g[1][0] * i as f64 + g[1][1] * j as f64,
            ];
            let d = (x[0] - p[0]).powi(2) + (x[1] - p[1]).powi(2);
            if d < best.2 {
                best = (p, [i, j], d);
            }
        }
    }
    best
}

pub fn gaussian_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, std: f64, rng: &mut R) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| std * rng.sample::<f64, _>(StandardNormal))
}

pub fn gaussian_vec<R: Rng + ?Sized>(n: usize, std: f64, rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| std * rng.sample::<f64, _>(StandardNormal)).collect()
}

/// Random coefficient vector with entries in `0..=max`, not all zero.
pub fn random_coefficients<R: Rng + ?Sized>(k: usize, max: i64, rng: &mut R) -> CoefficientVector {
    loop {
        let a: Vec<i64> = (0..k).map(|_| rng.random_range(0..=max)).collect();
        if let Ok(a) = CoefficientVector::new(a) {
            return a;
        }
    }
}

/// Decoding MSE through an explicit dense inverse, a route independent of
/// the library's Cholesky solves.
pub fn dmse_dense(h: &DMatrix<f64>, snr: f64, a: &[i64], sigma_q2: f64) -> f64 {
    let k = h.ncols();
    let av = DVector::from_iterator(k, a.iter().map(|&x| x as f64));
    let m = DMatrix::identity(k, k) + h.transpose() * h * snr;
    let inv = m.try_inverse().expect("invertible");
    (1.0 + 2.0 * sigma_q2) * av.dot(&(inv * &av))
}

pub fn mean_and_stderr(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

/// Two-sample Kolmogorov-Smirnov statistic.
pub fn ks_statistic(a: &mut [f64], b: &mut [f64]) -> f64 {
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Asymptotic p-value of the two-sample KS statistic.
pub fn ks_p_value(d: f64, n: usize, m: usize) -> f64 {
    let ne = (n * m) as f64 / (n + m) as f64;
    let lambda = (ne.sqrt() + 0.12 + 0.11 / ne.sqrt()) * d;
    let mut p = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = 2.0 * (-1f64).powi(k - 1) * (-2.0 * kf * kf * lambda * lambda).exp();
        p += term;
        if term.abs() < 1e-12 {
            break;
        }
    }
    p.clamp(0.0, 1.0)
}
