mod common;

use common::{cov_stderr, hurst, sample_cov};
use proptest::prelude::*;
use regfbm_core::fbm::{
    fbm_covariance, fgn_autocovariance, sample_fbm_exact_small, sample_fgn, sample_two_sided_fbm,
    ExactFbmSampler, FbmPathSampler, FgnGenerator,
};
use regfbm_core::linalg::{symmetric_eigenvalues, Matrix};
use regfbm_core::stats::Moments;
use regfbm_core::{RngSeed, TimeGrid};

proptest! {
    #[test]
    fn covariance_is_symmetric(t in -50.0f64..50.0, s in -50.0f64..50.0, h in 0.01f64..0.99) {
        let h = hurst(h);
        prop_assert_eq!(fbm_covariance(t, s, h), fbm_covariance(s, t, h));
    }

    #[test]
    fn covariance_matrices_are_psd(
        times in prop::collection::vec(-20.0f64..20.0, 2..64),
        h in 0.05f64..0.95,
    ) {
        let h = hurst(h);
        let m = Matrix::from_fn(times.len(), times.len(), |i, j| fbm_covariance(times[i], times[j], h));
        let ev = symmetric_eigenvalues(&m);
        let max = ev.iter().cloned().fold(0.0f64, f64::max);
        let min = ev.iter().cloned().fold(f64::INFINITY, f64::min);
        prop_assert!(min >= -1e-8 * max, "min {} max {}", min, max);
    }

    #[test]
    fn fgn_is_a_pure_function_of_the_seed(seed in any::<u64>(), stream in 0u64..1000, n in 1usize..300) {
        let h = hurst(0.7);
        let a = sample_fgn(n, 0.1, h, RngSeed::new(seed, stream)).unwrap();
        let b = sample_fgn(n, 0.1, h, RngSeed::new(seed, stream)).unwrap();
        prop_assert_eq!(a, b);
    }
}

#[test]
fn single_increment_is_standard_normal() {
    let mut m = Moments::default();
    for i in 0..20_000 {
        m.push(sample_fgn(1, 1.0, hurst(0.75), RngSeed::new(1, i)).unwrap()[0]);
    }
    assert!(m.mean().abs() < 5.0 * m.stderr());
    // var of the sample variance of N(0,1) is 2/n
    assert!((m.variance() - 1.0).abs() < 5.0 * (2.0f64 / 20_000.0).sqrt());
}

#[test]
fn fgn_autocovariance_by_monte_carlo() {
    let h = hurst(0.75);
    let n = 64;
    let draws = 20_000;
    let mut gen = FgnGenerator::new(n, 1.0, h).unwrap();
    let mut acc = vec![Moments::default(); 21];
    let mut x = vec![0.0; n];
    for i in 0..draws {
        gen.sample_into(&mut RngSeed::new(9, i).rng(), &mut x);
        for (k, m) in acc.iter_mut().enumerate() {
            m.push(x[0] * x[k]);
        }
    }
    for (k, m) in acc.iter().enumerate() {
        let exact = fgn_autocovariance(k as i64, 1.0, h).unwrap();
        assert!(
            (m.mean() - exact).abs() < 5.0 * m.stderr(),
            "lag {k}: {} vs {exact}",
            m.mean()
        );
    }
}

#[test]
fn exact_sampler_on_origin_is_zero() {
    let grid = TimeGrid::new(0.0, 1.0, 1).unwrap();
    for h in [0.3, 0.5, 0.8] {
        let p = sample_fbm_exact_small(grid, hurst(h), RngSeed::new(1, 0)).unwrap();
        assert_eq!(p.values(), &[0.0]);
    }
}

#[test]
fn exact_sampler_brownian_covariance() {
    let grid = TimeGrid::new(1.0, 1.0, 2).unwrap();
    let sampler = ExactFbmSampler::new(grid, hurst(0.5)).unwrap();
    let n = 100_000;
    let (mut a, mut b) = (Vec::with_capacity(n), Vec::with_capacity(n));
    for i in 0..n {
        let p = sampler.sample(&mut RngSeed::new(2, i as u64).rng());
        a.push(p.values()[0]);
        b.push(p.values()[1]);
    }
    let exact = [[1.0, 1.0], [1.0, 2.0]];
    let series = [&a, &b];
    for i in 0..2 {
        for j in 0..2 {
            let c = sample_cov(series[i], series[j]);
            let se = cov_stderr(exact[i][i], exact[j][j], exact[i][j], n);
            assert!((c - exact[i][j]).abs() < 5.0 * se, "({i},{j}) {c}");
        }
    }
}

#[test]
fn two_sided_cross_covariance() {
    let n = 20_000;
    for (h, exact) in [(0.5, 0.0), (0.75, 0.5 * (2.0 - 2f64.powf(1.5)))] {
        let mut s = FbmPathSampler::two_sided(1.0, 1.0, 0.25, hurst(h)).unwrap();
        let grid = *s.grid();
        let (lo, hi, o) = (
            grid.index_of(-1.0).unwrap(),
            grid.index_of(1.0).unwrap(),
            s.origin(),
        );
        let (mut a, mut b) = (Vec::new(), Vec::new());
        for i in 0..n {
            let p = s.sample(&mut RngSeed::new(3, i).rng());
            assert_eq!(p.values()[o], 0.0);
            a.push(p.values()[lo]);
            b.push(p.values()[hi]);
        }
        let c = sample_cov(&a, &b);
        assert!(
            (c - exact).abs() < 5.0 * cov_stderr(1.0, 1.0, exact, n as usize),
            "H={h}: {c}"
        );
    }
}

#[test]
fn two_sided_anchor_is_exact() {
    let p = sample_two_sided_fbm(3.0, 2.0, 0.01, hurst(0.7), RngSeed::new(4, 0)).unwrap();
    assert_eq!(p.value_near(0.0), Some(0.0));
    assert!(sample_two_sided_fbm(1.0, 1.0, 0.3, hurst(0.7), RngSeed::new(4, 0)).is_err());
}

#[test]
fn self_similarity_and_stationary_increments() {
    let h = hurst(0.7);
    let n_paths = 20_000;
    let mut s = FbmPathSampler::from_origin(8.0, 0.25, h).unwrap();
    let grid = *s.grid();
    let idx = |t: f64| grid.index_of(t).unwrap();
    let mut var = [Moments::default(), Moments::default(), Moments::default()];
    let mut inc = [Moments::default(), Moments::default()];
    for i in 0..n_paths {
        let p = s.sample(&mut RngSeed::new(5, i).rng());
        let z = p.values();
        for (m, t) in var.iter_mut().zip([1.0, 2.0, 4.0]) {
            m.push(z[idx(t)] * z[idx(t)]);
        }
        inc[0].push((z[idx(1.5)] - z[idx(0.5)]).powi(2));
        inc[1].push((z[idx(7.5)] - z[idx(6.5)]).powi(2));
    }
    for (k, a) in [(1, 2.0f64), (2, 4.0)] {
        let expected = a.powf(1.4);
        assert!(
            (var[k].mean() - expected).abs() < 5.0 * var[k].stderr(),
            "a={a}: {}",
            var[k].mean()
        );
    }
    for m in &inc {
        assert!((m.mean() - 1.0).abs() < 5.0 * m.stderr());
    }
}

#[test]
fn circulant_and_dense_factorization_agree() {
    let h = hurst(0.75);
    let n = 16;
    let dt = 0.5;
    let draws = 40_000;
    let grid = TimeGrid::new(dt, dt, n).unwrap();
    let dense = ExactFbmSampler::new(grid, h).unwrap();
    let mut gen = FgnGenerator::new(n, dt, h).unwrap();
    let mut a = vec![Vec::new(); n];
    let mut b = vec![Vec::new(); n];
    let mut inc = vec![0.0; n];
    for i in 0..draws {
        gen.sample_into(&mut RngSeed::new(6, i).rng(), &mut inc);
        let mut z = 0.0;
        for (k, d) in inc.iter().enumerate() {
            z += d;
            a[k].push(z);
        }
        let p = dense.sample(&mut RngSeed::new(7, i).rng());
        for (k, v) in p.values().iter().enumerate() {
            b[k].push(*v);
        }
    }
    for i in (0..n).step_by(3) {
        for j in (i..n).step_by(4) {
            let exact = fbm_covariance(grid.time(i), grid.time(j), h);
            let vi = fbm_covariance(grid.time(i), grid.time(i), h);
            let vj = fbm_covariance(grid.time(j), grid.time(j), h);
            let se = cov_stderr(vi, vj, exact, draws as usize) * 2f64.sqrt();
            let diff = sample_cov(&a[i], &a[j]) - sample_cov(&b[i], &b[j]);
            assert!(diff.abs() < 5.0 * se, "({i},{j}) diff {diff}");
        }
    }
}
