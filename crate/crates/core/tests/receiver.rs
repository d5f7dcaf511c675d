mod common;

use common::{dmse_dense, gaussian_matrix, random_coefficients};
use fedcpu::lattice::HEX_BLOCK_SECOND_MOMENT as SQ;
use fedcpu::receiver::{
    dmse, equalizer_mse, optimal_b, optimal_eta, qmse, qmse_with_eta, select_coefficients, CoefficientVector,
};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

#[test]
fn closed_form_agrees_with_dense_inverse() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..100 {
        let k = rng.random_range(1..=30);
        let m = rng.random_range(1..=30);
        let h = gaussian_matrix(2 * m, k, 0.3, &mut rng);
        let snr = 10f64.powf(rng.random_range(-1.0..2.0));
        let a = random_coefficients(k, 6, &mut rng);
        let x = dmse(&h, snr, &a, SQ).unwrap();
        let y = dmse_dense(&h, snr, a.as_slice(), SQ);
        assert!((x - y).abs() <= 1e-9 * y, "{x} vs {y}");
    }
}

#[test]
fn optimal_b_is_locally_optimal() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..20 {
        let k = rng.random_range(1..=10);
        let h = gaussian_matrix(2 * rng.random_range(1..=10), k, 0.45, &mut rng);
        let a = random_coefficients(k, 4, &mut rng);
        let b = optimal_b(&h, 10.0, &a).unwrap();
        let f0 = equalizer_mse(&h, 10.0, &a, &b, SQ);
        assert!((f0 - dmse(&h, 10.0, &a, SQ).unwrap()).abs() < 1e-10 * f0.max(1.0));
        for _ in 0..200 {
            let d = DVector::from_fn(b.len(), |_, _| rng.sample::<f64, _>(StandardNormal)).normalize() * 0.01;
            assert!(equalizer_mse(&h, 10.0, &a, &(&b + d), SQ) >= f0 - 1e-10);
        }
    }
}

#[test]
fn equalizer_definition_by_monte_carlo() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (m, k, snr) = (3, 4, 10.0);
    let h = gaussian_matrix(2 * m, k, 0.45, &mut rng);
    let a = CoefficientVector::new(vec![1, 2, 1, 1]).unwrap();
    let b = optimal_b(&h, snr, &a).unwrap();
    let r = h.transpose() * &b - a.to_dvector();
    let trials = 20_000;
    let mut acc = 0.0;
    for _ in 0..trials {
        let x = DVector::from_fn(k, |_, _| rng.sample::<f64, _>(StandardNormal));
        let z = DVector::from_fn(2 * m, |_, _| rng.sample::<f64, _>(StandardNormal) / snr.sqrt());
        acc += (r.dot(&x) + b.dot(&z)).powi(2);
    }
    let mc = (1.0 + 2.0 * SQ) * acc / trials as f64;
    let cf = dmse(&h, snr, &a, SQ).unwrap();
    assert!((mc / cf - 1.0).abs() < 0.03, "{mc} vs {cf}");
}

#[test]
fn more_antennas_never_hurt() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..50 {
        let k = rng.random_range(1..=8);
        let big = gaussian_matrix(20, k, 0.45, &mut rng);
        let a = random_coefficients(k, 3, &mut rng);
        let mut prev = f64::INFINITY;
        for rows in 1..=20 {
            let h = big.rows(0, rows).into_owned();
            let v = dmse(&h, 10.0, &a, SQ).unwrap();
            assert!(v <= prev * (1.0 + 1e-12));
            prev = v;
        }
    }
}

#[test]
fn eta_beats_log_grid() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..100 {
        let k = rng.random_range(1..=10);
        let a = random_coefficients(k, 5, &mut rng);
        let sig: Vec<f64> = (0..k).map(|_| rng.random_range(0.001..1.0)).collect();
        let s2 = rng.random_range(0.0..0.2);
        let eta = optimal_eta(&a, &sig, s2).unwrap();
        let q0 = qmse(&a, &sig, s2).unwrap();
        assert!((q0 - qmse_with_eta(&a, &sig, s2, eta).unwrap()).abs() < 1e-12 * q0.max(1e-6));
        for i in 0..10_000 {
            let e = eta * 10f64.powf(-2.0 + 4.0 * i as f64 / 9999.0);
            assert!(qmse_with_eta(&a, &sig, s2, e).unwrap() >= q0 - 1e-12);
        }
    }
}

fn exhaustive_best(h: &DMatrix<f64>, snr: f64, lo: i64, hi: i64) -> f64 {
    let k = h.ncols();
    let mut best = f64::INFINITY;
    let mut a = vec![lo; k];
    loop {
        if a.iter().any(|&x| x != 0) {
            best = best.min(dmse_dense(h, snr, &a, SQ));
        }
        let mut i = 0;
        loop {
            if i == k {
                return best;
            }
            a[i] += 1;
            if a[i] <= hi {
                break;
            }
            a[i] = lo;
            i += 1;
        }
    }
}

#[test]
fn selection_matches_exhaustive_on_fixture() {
    let h = DMatrix::from_row_slice(2, 2, &[1.0, 2.02, 0.05, 0.0]);
    let sel = select_coefficients(&h, 1000.0).unwrap();
    let v = dmse(&h, 1000.0, &sel.a, SQ).unwrap();
    assert!((v - exhaustive_best(&h, 1000.0, 1, 8)).abs() < 1e-12);
    assert_eq!(sel.a.as_slice(), &[1, 2]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn selection_never_worse_than_ones(seed in any::<u64>(), k in 1usize..6, m in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = gaussian_matrix(2 * m, k, 0.45, &mut rng);
        let sel = select_coefficients(&h, 10.0).unwrap();
        prop_assert!(sel.a.as_slice().iter().all(|&x| x >= 1));
        let ones = dmse(&h, 10.0, &CoefficientVector::ones(k), SQ).unwrap();
        prop_assert!(dmse(&h, 10.0, &sel.a, SQ).unwrap() <= ones + 1e-12);
    }

    #[test]
    fn qmse_is_degree_zero_in_a(seed in any::<u64>(), k in 1usize..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_coefficients(k, 5, &mut rng);
        let a2 = CoefficientVector::new(a.as_slice().iter().map(|x| 2 * x).collect()).unwrap();
        let sig: Vec<f64> = (0..k).map(|_| rng.random_range(0.01..1.0)).collect();
        let q1 = qmse(&a, &sig, SQ).unwrap();
        let q2 = qmse(&a2, &sig, SQ).unwrap();
        prop_assert!((q1 - q2).abs() <= 1e-12 * q1.max(1e-12));
        prop_assert!(q1 >= 0.0);
    }

    #[test]
    fn dmse_decreases_with_snr(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = gaussian_matrix(6, 4, 0.45, &mut rng);
        let a = random_coefficients(4, 3, &mut rng);
        let mut prev = f64::INFINITY;
        for e in -20..=30 {
            let v = dmse(&h, 10f64.powf(e as f64 / 10.0), &a, SQ).unwrap();
            prop_assert!(v <= prev * (1.0 + 1e-12));
            prev = v;
        }
    }
}
