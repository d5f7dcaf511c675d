mod common;

use common::{exhaustive_nearest, hexagon_second_moment, ks_p_value, ks_statistic};
use fedcpu::lattice::{Lattice, HEX_BLOCK, HEX_BLOCK_SECOND_MOMENT};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

#[test]
fn golden_second_moment_matches_cell_geometry() {
    assert!((hexagon_second_moment() - HEX_BLOCK_SECOND_MOMENT).abs() < 1e-15);
}

#[test]
fn monte_carlo_estimate_hits_golden_value() {
    let mut lat = Lattice::hexagonal(1.0, 2).unwrap();
    let est = lat
        .estimate_second_moment(1_000_000, &mut ChaCha8Rng::seed_from_u64(2024))
        .unwrap();
    assert!((est / HEX_BLOCK_SECOND_MOMENT - 1.0).abs() < 0.01, "{est}");
    assert_eq!(lat.second_moment().unwrap(), est);
}

#[test]
fn second_moment_scales_quadratically() {
    let mut a = Lattice::hexagonal(1.0, 2).unwrap();
    let mut b = Lattice::hexagonal(2.0, 2).unwrap();
    let ea = a.estimate_second_moment(300_000, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    let eb = b.estimate_second_moment(300_000, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
    assert!((eb / ea / 4.0 - 1.0).abs() < 0.02, "{}", eb / ea);
}

#[test]
fn nearest_point_fixture_from_exhaustive_search() {
    let lat = Lattice::hexagonal(1.0, 2).unwrap();
    let (p, _, d) = exhaustive_nearest(HEX_BLOCK, [0.30, 0.0], 6);
    let q = lat.quantize(&[0.30, 0.0]).unwrap();
    let got = (0.30 - q.coords[0]).powi(2) + q.coords[1].powi(2);
    assert!((got - d).abs() < 1e-15);
    // Two points tie here; the search keeps the lexicographically smaller rep.
    assert_eq!(q.integer_rep, vec![1, -1]);
    assert!((p[0] - 0.25).abs() < 1e-15);
}

#[test]
fn blocks_are_quantized_independently() {
    let lat = Lattice::hexagonal(1.0, 6).unwrap();
    let x = [0.3, -0.2, 1.7, 0.05, -0.9, 0.6];
    let q = lat.quantize(&x).unwrap();
    let single = Lattice::hexagonal(1.0, 2).unwrap();
    for b in 0..3 {
        let qb = single.quantize(&x[2 * b..2 * b + 2]).unwrap();
        assert_eq!(&q.integer_rep[2 * b..2 * b + 2], qb.integer_rep.as_slice());
    }
}

#[test]
fn dither_law_is_mean_zero_with_golden_second_moment() {
    let lat = Lattice::hexagonal(1.0, 2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let n = 1_000_000;
    let (mut s, mut s2, mut e2) = ([0.0; 2], [0.0; 2], 0.0);
    for _ in 0..n {
        let d = lat.sample_dither_block(&mut rng);
        for c in 0..2 {
            s[c] += d[c];
            s2[c] += d[c] * d[c];
        }
        e2 += (d[0] * d[0] + d[1] * d[1]) / 2.0;
    }
    for c in 0..2 {
        let mean = s[c] / n as f64;
        let var = s2[c] / n as f64 - mean * mean;
        let se = (var / n as f64).sqrt();
        assert!(mean.abs() < 4.0 * se, "coordinate {c}: mean {mean}, se {se}");
    }
    let m = e2 / n as f64;
    assert!((m / HEX_BLOCK_SECOND_MOMENT - 1.0).abs() < 0.01, "{m}");
}

#[test]
fn subtractive_dither_error_is_cell_uniform() {
    let lat = Lattice::hexagonal(1.0, 2).unwrap();
    let n = 100_000;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let x = [0.4137, -1.2291];
    let mut err = [Vec::with_capacity(n), Vec::with_capacity(n)];
    let mut reference = [Vec::with_capacity(n), Vec::with_capacity(n)];
    let mut e2 = 0.0;
    for _ in 0..n {
        let d = lat.sample_dither_block(&mut rng);
        let (p, _) = lat.quantize_block([x[0] + d[0], x[1] + d[1]]);
        let e = [p[0] - d[0] - x[0], p[1] - d[1] - x[1]];
        e2 += (e[0] * e[0] + e[1] * e[1]) / 2.0;
        let r = lat.sample_dither_block(&mut rng);
        for c in 0..2 {
            err[c].push(e[c]);
            reference[c].push(r[c]);
        }
    }
    for c in 0..2 {
        let d = ks_statistic(&mut err[c], &mut reference[c]);
        let p = ks_p_value(d, n, n);
        assert!(p > 0.01, "coordinate {c}: KS D = {d}, p = {p}");
    }
    assert!((e2 / n as f64 / HEX_BLOCK_SECOND_MOMENT - 1.0).abs() < 0.01);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn quantize_matches_exhaustive_search(x0 in -6.0f64..6.0, x1 in -6.0f64..6.0) {
        let lat = Lattice::hexagonal(1.0, 2).unwrap();
        let q = lat.quantize(&[x0, x1]).unwrap();
        let (_, _, best) = exhaustive_nearest(HEX_BLOCK, [x0, x1], 40);
        let got = (x0 - q.coords[0]).powi(2) + (x1 - q.coords[1]).powi(2);
        prop_assert!(got <= best + 1e-12);
    }

    #[test]
    fn coords_are_generator_times_integers(x in proptest::collection::vec(-5.0f64..5.0, 8), rho in 0.1f64..3.0) {
        let lat = Lattice::hexagonal(rho, 8).unwrap();
        let q = lat.quantize(&x).unwrap();
        let g = lat.block_generator();
        for b in 0..4 {
            let (i, j) = (q.integer_rep[2 * b] as f64, q.integer_rep[2 * b + 1] as f64);
            prop_assert!((q.coords[2 * b] - (g[0][0] * i + g[0][1] * j)).abs() < 1e-9);
            prop_assert!((q.coords[2 * b + 1] - (g[1][0] * i + g[1][1] * j)).abs() < 1e-9);
        }
    }

    #[test]
    fn closure_under_addition(p in proptest::collection::vec(-50i64..50, 4), q in proptest::collection::vec(-50i64..50, 4)) {
        let lat = Lattice::hexagonal(1.0, 4).unwrap();
        let a = lat.point_from_integers(p.clone()).unwrap();
        let b = lat.point_from_integers(q.clone()).unwrap();
        let sum: Vec<f64> = a.coords.iter().zip(&b.coords).map(|(x, y)| x + y).collect();
        let r = lat.quantize(&sum).unwrap();
        let expected: Vec<i64> = p.iter().zip(&q).map(|(x, y)| x + y).collect();
        prop_assert_eq!(r.integer_rep, expected);
    }

    #[test]
    fn shift_invariance(x in proptest::collection::vec(-3.0f64..3.0, 4), s in proptest::collection::vec(-20i64..20, 4)) {
        let lat = Lattice::hexagonal(1.0, 4).unwrap();
        let shift = lat.point_from_integers(s.clone()).unwrap();
        let base = lat.quantize(&x).unwrap();
        let moved: Vec<f64> = x.iter().zip(&shift.coords).map(|(a, b)| a + b).collect();
        let q = lat.quantize(&moved).unwrap();
        let expected: Vec<i64> = base.integer_rep.iter().zip(&s).map(|(a, b)| a + b).collect();
        prop_assert_eq!(q.integer_rep, expected);
    }

    #[test]
    fn dither_always_quantizes_to_origin(seed in any::<u64>(), rho in 0.05f64..4.0) {
        let lat = Lattice::hexagonal(rho, 2).unwrap();
        let d = lat.sample_dither(&mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert!(lat.quantize(&d).unwrap().is_origin());
    }
}

#[test]
fn nearest_point_oracle_on_wide_gaussian_inputs() {
    let lat = Lattice::hexagonal(1.0, 2).unwrap();
    let g = HEX_BLOCK;
    let norm = (g.iter().flatten().map(|v| v * v).sum::<f64>()).sqrt();
    let law = Normal::new(0.0, 2.0 * norm).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..1000 {
        let x = [law.sample(&mut rng), law.sample(&mut rng)];
        let q = lat.quantize(&x).unwrap();
        let (_, rep, best) = exhaustive_nearest(g, x, 20);
        let got = (x[0] - q.coords[0]).powi(2) + (x[1] - q.coords[1]).powi(2);
        assert!((got - best).abs() < 1e-12 && q.integer_rep == rep.to_vec(), "{x:?}");
    }
}
