mod common;

use common::hurst;
use regfbm_core::constants::{hp_tail, limit_constants, normal_cdf, t_star, TailModel};
use regfbm_core::experiments::{
    clump_level, cond_mean_given_netput, endpoint_conditioned_ensemble, endpoint_netput_means,
    exponential_ks, hitting_concentration, limit_process_ensemble, mean_path_check, overshoot_test,
    rejection_conditional_ensemble, tail_probability_estimate, EnsembleOptions, ExperimentConfig,
    SamplerKind,
};
use regfbm_core::stats::{EmpiricalDistribution, Moments, Z95};
use regfbm_core::{ModelParams, RngSeed};

fn cfg(h: f64, b_grid: Vec<f64>, n: usize, seed: u64) -> ExperimentConfig {
    let p = ModelParams::with_drift(hurst(h), 1.0, 1.0).unwrap();
    ExperimentConfig::new(p, b_grid, n, RngSeed::new(seed, 0)).unwrap()
}

fn exp_samples(n: usize, rate: f64, seed: u64) -> Vec<f64> {
    use rand_core::RngCore;
    let mut rng = RngSeed::new(seed, 0).rng();
    (0..n)
        .map(|_| {
            let u = ((rng.next_u64() >> 11) as f64 + 0.5) / (1u64 << 53) as f64;
            -u.ln() / rate
        })
        .collect()
}

#[test]
fn brownian_acceptance_rate() {
    let c = cfg(0.5, vec![1.0], 100, 1);
    let r = tail_probability_estimate(1.0, &c, 10_000).unwrap();
    let exact = (-2.0f64).exp();
    assert!((r.estimate - exact).abs() < 3.0 * r.stderr, "{r:?}");
    assert!(r.n_accepted <= r.n_proposed);
}

#[test]
fn brownian_overshoot_is_exponential() {
    let c = cfg(0.5, vec![1.0], 2000, 2);
    let t = overshoot_test(1.0, &c).unwrap();
    assert!(t.ks.p_value > 0.01, "{:?}", t.ks);
    assert!(!t.approximate);
}

#[test]
fn ks_null_calibration_and_power() {
    let passes = (0..100)
        .filter(|&s| {
            exponential_ks(exp_samples(500, 0.77, s), 0.77)
                .unwrap()
                .0
                .p_value
                > 0.01
        })
        .count();
    assert!(passes >= 98, "{passes}");
    let shifted: Vec<f64> = exp_samples(2000, 0.77, 500)
        .iter()
        .map(|x| x + 0.5 / 0.77)
        .collect();
    assert!(exponential_ks(shifted, 0.77).unwrap().0.p_value < 1e-3);
}

#[test]
fn accepted_paths_respect_the_contract() {
    let c = cfg(0.7, vec![2.0], 200, 3);
    let opts = EnsembleOptions {
        keep_paths: false,
        two_sided: true,
    };
    let e = rejection_conditional_ensemble(2.0, &c, opts).unwrap();
    assert_eq!(e.samples.len(), 200);
    for s in &e.samples {
        assert!(s.w0 > 2.0 && s.overshoot > 0.0);
        let cyc = s.cycle.unwrap();
        assert!(cyc.tau_l <= 0.0 && 0.0 <= cyc.tau_r);
        assert!(cyc.v_b >= 0.0 && cyc.v_b <= cyc.tau_r - cyc.tau_l + 1e-12);
        if !cyc.censored_left && !cyc.censored_right {
            assert!(cyc.v_b > 0.0);
        }
    }
}

fn median_stderr(d: &EmpiricalDistribution) -> f64 {
    let (lo, hi) = d.median_ci();
    (hi - lo) / (2.0 * Z95)
}

#[test]
fn samplers_agree_at_moderate_level() {
    let mut c = cfg(0.6, vec![2.0], 1000, 4);
    let exact = rejection_conditional_ensemble(2.0, &c, EnsembleOptions::default()).unwrap();
    c.sampler = SamplerKind::EndpointConditioned;
    let approx = endpoint_conditioned_ensemble(2.0, &c, EnsembleOptions::default()).unwrap();
    assert!(approx.approximate && !exact.approximate);
    let a = EmpiricalDistribution::new(exact.scaled_overshoots(&c.params)).unwrap();
    let b = EmpiricalDistribution::new(approx.scaled_overshoots(&c.params)).unwrap();
    let se = median_stderr(&a).hypot(median_stderr(&b));
    assert!(
        (a.median() - b.median()).abs() < 3.0 * se,
        "{} vs {} (se {se})",
        a.median(),
        b.median()
    );
}

/// `P(|T - b/mu| > tol)` for the inverse Gaussian passage time of a Brownian
/// motion with drift `mu` and unit variance to level `b`.
fn inverse_gaussian_miss(b: f64, mu: f64, tol: f64) -> f64 {
    let (m, lambda) = (b / mu, b * b);
    let cdf = |t: f64| {
        if t <= 0.0 {
            return 0.0;
        }
        let a = (lambda / t).sqrt();
        normal_cdf(a * (t / m - 1.0)) + (2.0 * lambda / m).exp() * normal_cdf(-a * (t / m + 1.0))
    };
    cdf(m - tol) + 1.0 - cdf(m + tol)
}

#[test]
fn brownian_passage_time_concentrates() {
    let c = cfg(0.5, vec![4.0], 400, 5);
    let row = hitting_concentration(&c, 3.0).unwrap()[0];
    let tol = 3.0 * 4f64.powf(0.5 + c.r);
    let oracle = inverse_gaussian_miss(4.0, 1.0, tol);
    assert!(oracle < 0.02, "{oracle}");
    let se = (oracle * (1.0 - oracle) / row.n_accepted as f64).sqrt();
    assert!(
        (row.fraction - oracle).abs() <= 3.0 * se,
        "{row:?} vs {oracle}"
    );
    assert_eq!(row.t_star, t_star(4.0, &c.params).unwrap());
}

#[test]
fn endpoint_mean_tracks_its_closed_form() {
    let mut c = cfg(0.75, vec![8.0], 400, 6);
    c.sampler = SamplerKind::EndpointConditioned;
    let times = [-0.5, 0.5, 1.0];
    let ts = t_star(8.0, &c.params).unwrap();
    let means = endpoint_netput_means(8.0, &c, &times).unwrap();
    for (&s, &(m, se)) in times.iter().zip(&means) {
        let target = cond_mean_given_netput(s, 8.0, &c.params, ts, -8.0);
        assert!(
            (m - target).abs() < 3.0 * se,
            "s={s}: {m} vs {target} (se {se})"
        );
    }
}

#[test]
fn brownian_future_ignores_the_pin() {
    let mut c = cfg(0.5, vec![4.0], 400, 7);
    c.sampler = SamplerKind::EndpointConditioned;
    let times = [0.5, 1.0, 2.0];
    let means = endpoint_netput_means(4.0, &c, &times).unwrap();
    for (&s, &(m, se)) in times.iter().zip(&means) {
        assert!((m + s).abs() < 3.0 * se, "s={s}: {m} (se {se})");
    }
}

#[test]
fn limit_process_matches_its_definition() {
    let c = cfg(0.75, vec![1.0], 2000, 8);
    let k = limit_constants(&c.params).unwrap();
    let e = limit_process_ensemble(&c, 4.0, &[-1.0, 1.0]).unwrap();
    let y0 = Moments::from_slice(&e.samples.iter().map(|s| s.y0).collect::<Vec<_>>());
    assert!((y0.mean() - 1.0 / k.kappa2).abs() < 3.0 * y0.stderr());
    for (j, _) in e.probe_times.iter().enumerate() {
        let d = Moments::from_slice(
            &e.samples
                .iter()
                .map(|s| s.increments[j])
                .collect::<Vec<_>>(),
        );
        assert!(
            (d.mean() + k.kappa1).abs() < 3.0 * d.stderr(),
            "{}",
            d.mean()
        );
    }
    assert!(e.samples.iter().all(|s| s.v > 0.0));
    let v = Moments::from_slice(&e.samples.iter().map(|s| s.v).collect::<Vec<_>>());
    assert!(v.mean().is_finite() && v.mean() > 0.0);
}

#[test]
fn mean_path_table_shape() {
    let mut c = cfg(0.75, vec![4.0], 100, 9);
    c.sampler = SamplerKind::EndpointConditioned;
    let m = mean_path_check(4.0, &c, &[-1.0, -0.25, 0.0, 0.25, 1.0]).unwrap();
    assert_eq!(m.rows[2].ensemble_mean, 0.0);
    assert_eq!(m.rows[2].target, 0.0);
    assert_eq!(m.rows[0].target, m.rows[4].target);
    assert_eq!(m.rows[1].target, m.rows[3].target);
}

#[test]
fn tail_shape_is_consistent_across_levels() {
    // With the exponent and power of the asymptotic tail fixed, fitting the
    // prefactor separately at b and 2b gives the same value within error.
    let c = cfg(0.7, vec![1.0, 2.0], 100, 10);
    let unit = TailModel::user_supplied(1.0).unwrap();
    let k: Vec<(f64, f64)> = [1.0, 2.0]
        .iter()
        .map(|&b| {
            let r = tail_probability_estimate(b, &c, 40_000).unwrap();
            let shape = hp_tail(b, &c.params, &unit).unwrap().simplified_form;
            ((r.estimate / shape).ln(), r.stderr / r.estimate)
        })
        .collect();
    let diff = (k[0].0 - k[1].0).abs();
    let se = k[0].1.hypot(k[1].1);
    assert!(diff < 3.0 * se, "{k:?}");
}

#[test]
fn reports_are_deterministic() {
    let c = cfg(0.7, vec![1.0], 150, 11);
    assert_eq!(clump_level(1.0, &c).unwrap(), clump_level(1.0, &c).unwrap());
    assert_eq!(
        tail_probability_estimate(1.0, &c, 3000).unwrap(),
        tail_probability_estimate(1.0, &c, 3000).unwrap()
    );
    let mut d = c.clone();
    d.seed = RngSeed::new(12, 0);
    assert_ne!(
        tail_probability_estimate(1.0, &c, 3000).unwrap().estimate,
        tail_probability_estimate(1.0, &d, 3000).unwrap().estimate
    );
}
