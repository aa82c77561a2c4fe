//! One function per subcommand, each turning a validated configuration into
//! tables and a summary.

use regfbm_core::conditioning::{
    cond_cov_given_history, cond_mean_one_endpoint, limit_cov, ObservationSet, SigmaField,
};
use regfbm_core::constants::{
    hp_tail, limit_constants, proof_params_feasible, t_star, window_geometry, TailModel,
};
use regfbm_core::experiments::{
    clump_scaling_regression, conditional_ensemble, hitting_concentration, limit_process_ensemble,
    mean_path_check, overshoot_test, tail_probability_estimate, EnsembleOptions,
};
use regfbm_core::stats::Moments;
use regfbm_core::{Result, SamplePath};
use serde_json::json;

use crate::config::RunConfig;
use crate::output::{Cell, Report, Table};

/// Passage-time tolerance multiplier used by `verify-hitting`.
pub const HITTING_EPS: f64 = 1.0;
/// Horizon of the first limit-process attempt, in scaled time units.
pub const LIMIT_HORIZON: f64 = 4.0;
/// Paths written by `sample`.
pub const SAMPLE_PATHS: usize = 10;
/// Largest number of grid values `sample` holds in memory for path output.
const SAMPLE_PATH_BUDGET: f64 = 3.2e7;

const COV_PAIRS: [(f64, f64); 3] = [(1.0, 1.0), (1.0, -1.0), (0.5, 1.0)];
const MEAN_TIMES: [f64; 6] = [-1.0, -0.5, -0.25, 0.25, 0.5, 1.0];

pub fn constants(cfg: &RunConfig) -> Result<Report> {
    let p = &cfg.params;
    let c = limit_constants(p)?;
    let mut table = Table::new(
        "constants",
        &["b", "t_star", "t_L", "t_R", "time_scale", "space_scale"],
    );
    let mut stars = Vec::new();
    let mut windows = Vec::new();
    for &b in &cfg.experiment.b_grid {
        let ts = t_star(b, p)?;
        stars.push(ts);
        let (t_l, t_r) = match window_geometry(b, cfg.experiment.r, p) {
            Ok(w) => (Some(w.t_l), Some(w.t_r)),
            Err(_) => (None, None),
        };
        windows.push(json!({ "t_L": t_l, "t_R": t_r }));
        table.push(vec![
            b.into(),
            ts.into(),
            t_l.into(),
            t_r.into(),
            p.time_scale(b).into(),
            p.space_scale(b).into(),
        ]);
    }
    let summary = json!({
        "kappa1": c.kappa1,
        "kappa2": c.kappa2,
        "kappa3": c.kappa3,
        "mu": p.mu(),
        "b_grid": cfg.experiment.b_grid,
        "t_star": stars,
        "window": windows,
        "r": cfg.experiment.r,
        "feasible": proof_params_feasible(p.h).ok().map(|f| f.is_feasible()),
    });
    Ok(Report {
        tables: vec![table],
        summary,
    })
}

pub fn sample(cfg: &RunConfig) -> Result<Report> {
    let e = &cfg.experiment;
    let p = &cfg.params;
    let mut samples = Table::new(
        "samples",
        &[
            "b",
            "index",
            "w0",
            "scaled_overshoot",
            "hitting_time",
            "tau_L",
            "tau_R",
            "overshoot",
            "V_b",
            "censored_L",
            "censored_R",
        ],
    );
    let mut paths = Table::new("paths", &["b", "path", "t", "W"]);
    let (mut accepted, mut proposed) = (0, 0);
    let mut paths_written = true;
    for &b in &e.b_grid {
        let points = 2.0 * e.window(b) / e.dt(b) * e.n_target as f64;
        let keep_paths = points <= SAMPLE_PATH_BUDGET;
        paths_written &= keep_paths;
        let ens = conditional_ensemble(
            b,
            e,
            EnsembleOptions {
                keep_paths,
                two_sided: true,
            },
        )?;
        accepted += ens.n_accepted();
        proposed += ens.n_proposed;
        let scale = p.space_scale(b);
        for (i, s) in ens.samples.iter().enumerate() {
            let cyc = s.cycle;
            samples.push(vec![
                b.into(),
                i.into(),
                s.w0.into(),
                (scale * s.overshoot).into(),
                s.hitting_time.into(),
                cyc.map(|c| c.tau_l).into(),
                cyc.map(|c| c.tau_r).into(),
                s.overshoot.into(),
                cyc.map(|c| c.v_b).into(),
                flag(cyc.map(|c| c.censored_left)),
                flag(cyc.map(|c| c.censored_right)),
            ]);
        }
        for (i, path) in ens.paths.iter().take(SAMPLE_PATHS).enumerate() {
            push_path(&mut paths, b, i, path);
        }
    }
    let summary = json!({
        "n_accepted": accepted,
        "n_proposed": proposed,
        "paths_written": paths_written,
    });
    Ok(Report {
        tables: vec![samples.with_counts(accepted, proposed), paths],
        summary,
    })
}

fn flag(v: Option<bool>) -> Cell {
    v.map_or(Cell::Empty, Cell::Bool)
}

fn push_path(table: &mut Table, b: f64, index: usize, path: &SamplePath) {
    for (t, w) in path.points() {
        table.push(vec![b.into(), index.into(), t.into(), w.into()]);
    }
}

pub fn tail(cfg: &RunConfig) -> Result<Report> {
    let e = &cfg.experiment;
    let p = &cfg.params;
    let mut estimates = Vec::new();
    let (mut accepted, mut proposed) = (0, 0);
    for &b in &e.b_grid {
        let r = tail_probability_estimate(b, e, e.n_target as u64)?;
        accepted += r.n_accepted;
        proposed += r.n_proposed;
        estimates.push((b, r));
    }
    let model = if p.h.is_brownian() {
        Some(TailModel::exact_brownian(p)?)
    } else {
        let points: Vec<(f64, f64, f64)> = estimates
            .iter()
            .map(|(b, r)| (*b, r.estimate, r.stderr))
            .collect();
        TailModel::calibrated(p, &points).ok()
    };
    let mut table = Table::new(
        "tail",
        &[
            "b",
            "estimate",
            "stderr",
            "n_accepted",
            "n_proposed",
            "hp_exact",
            "hp_simplified",
        ],
    );
    for (b, r) in &estimates {
        let hp = match &model {
            Some(m) => Some(hp_tail(*b, p, m)?),
            None => None,
        };
        table.push(vec![
            (*b).into(),
            r.estimate.into(),
            r.stderr.into(),
            r.n_accepted.into(),
            r.n_proposed.into(),
            hp.map(|h| h.exact_form).into(),
            hp.map(|h| h.simplified_form).into(),
        ]);
    }
    let summary = json!({
        "prefactor": model.map(|m| m.k),
        "prefactor_source": model.map(|m| format!("{:?}", m.source).to_lowercase()),
    });
    Ok(Report {
        tables: vec![table.with_counts(accepted, proposed)],
        summary,
    })
}

pub fn verify_overshoot(cfg: &RunConfig) -> Result<Report> {
    let e = &cfg.experiment;
    let c = limit_constants(&cfg.params)?;
    let mut levels = Table::new(
        "overshoot",
        &[
            "b",
            "n_accepted",
            "n_proposed",
            "mean",
            "stderr",
            "limit_mean",
            "ks_statistic",
            "p_value",
            "approximate",
        ],
    );
    let mut ecdf = Table::new("overshoot_ecdf", &["b", "x", "ecdf", "limit_cdf"]);
    let (mut accepted, mut proposed) = (0, 0);
    for &b in &e.b_grid {
        let t = overshoot_test(b, e)?;
        let xs = t.distribution.samples();
        let m = Moments::from_slice(xs);
        accepted += xs.len() as u64;
        proposed += t.n_proposed;
        levels.push(vec![
            b.into(),
            xs.len().into(),
            t.n_proposed.into(),
            m.mean().into(),
            m.stderr().into(),
            (1.0 / c.kappa2).into(),
            t.ks.statistic.into(),
            t.ks.p_value.into(),
            t.approximate.into(),
        ]);
        let n = xs.len() as f64;
        for (i, &x) in xs.iter().enumerate() {
            ecdf.push(vec![
                b.into(),
                x.into(),
                ((i + 1) as f64 / n).into(),
                (-(-c.kappa2 * x).exp_m1()).into(),
            ]);
        }
    }
    let summary = json!({ "kappa2": c.kappa2, "limit_mean": 1.0 / c.kappa2 });
    Ok(Report {
        tables: vec![levels.with_counts(accepted, proposed), ecdf],
        summary,
    })
}

pub fn verify_clump(cfg: &RunConfig) -> Result<Report> {
    let report = clump_scaling_regression(&cfg.experiment)?;
    let mut table = Table::new(
        "clump",
        &[
            "b",
            "median",
            "median_lo",
            "median_hi",
            "n_uncensored",
            "censored_fraction",
            "n_proposed",
            "approximate",
        ],
    );
    let mut proposed = 0;
    let mut uncensored = 0;
    for l in &report.levels {
        proposed += l.n_proposed;
        uncensored += l.n_uncensored as u64;
        table.push(vec![
            l.b.into(),
            l.median.into(),
            l.median_ci.0.into(),
            l.median_ci.1.into(),
            l.n_uncensored.into(),
            l.censored_fraction.into(),
            l.n_proposed.into(),
            l.approximate.into(),
        ]);
    }
    let g = &report.regression;
    let summary = json!({
        "slope": g.slope,
        "intercept": g.intercept,
        "slope_ci": [g.slope_ci.0, g.slope_ci.1],
        "target_slope": report.target_slope,
    });
    Ok(Report {
        tables: vec![table.with_counts(uncensored, proposed)],
        summary,
    })
}

pub fn verify_hitting(cfg: &RunConfig) -> Result<Report> {
    let rows = hitting_concentration(&cfg.experiment, HITTING_EPS)?;
    let mut table = Table::new(
        "hitting",
        &[
            "b",
            "t_star",
            "fraction",
            "stderr",
            "n_accepted",
            "n_proposed",
            "approximate",
        ],
    );
    let (mut accepted, mut proposed) = (0, 0);
    for r in &rows {
        accepted += r.n_accepted;
        proposed += r.n_proposed;
        table.push(vec![
            r.b.into(),
            r.t_star.into(),
            r.fraction.into(),
            r.stderr.into(),
            r.n_accepted.into(),
            r.n_proposed.into(),
            r.approximate.into(),
        ]);
    }
    let decreasing = rows.windows(2).all(|w| {
        let slack = 2.0 * (w[0].stderr * w[0].stderr + w[1].stderr * w[1].stderr).sqrt();
        w[1].fraction < w[0].fraction + slack
    });
    let summary = json!({
        "eps": HITTING_EPS,
        "r": cfg.experiment.r,
        "decreasing_within_2_stderr": decreasing,
    });
    Ok(Report {
        tables: vec![table.with_counts(accepted, proposed)],
        summary,
    })
}

pub fn verify_conditioning(cfg: &RunConfig) -> Result<Report> {
    let e = &cfg.experiment;
    let p = &cfg.params;
    let mut cov = Table::new(
        "conditional_cov",
        &["b", "s", "t", "cond_cov", "limit_cov", "abs_diff"],
    );
    let mut means = Table::new(
        "conditional_mean",
        &["b", "s", "closed_form", "oracle", "abs_err", "rel_err"],
    );
    let mut drift = Table::new(
        "mean_path",
        &["b", "t", "ensemble_mean", "stderr", "limit_drift"],
    );
    let (mut accepted, mut proposed) = (0, 0);
    for &b in &e.b_grid {
        for &(s, t) in &COV_PAIRS {
            let cc = cond_cov_given_history(s, t, b, p, e.r)?;
            let lc = limit_cov(s, t, p);
            cov.push(vec![
                b.into(),
                s.into(),
                t.into(),
                cc.into(),
                lc.into(),
                (cc - lc).abs().into(),
            ]);
        }
        let w = window_geometry(b, e.r, p)?;
        let x_obs = -b;
        let obs = ObservationSet::new(
            vec![-w.t_l],
            vec![(x_obs - p.mu() * w.t_l) / p.theta],
            SigmaField::OneEndpoint,
        )?;
        for &s in &MEAN_TIMES {
            let closed = cond_mean_one_endpoint(s, b, p, e.r, x_obs)?;
            let u = p.time_scale(b) * s;
            let z = obs.condition_fbm(&[u], p.h)?.mean[0];
            let oracle = p.space_scale(b) * (p.theta * z - p.mu() * u);
            let abs_err = (closed - oracle).abs();
            means.push(vec![
                b.into(),
                s.into(),
                closed.into(),
                oracle.into(),
                abs_err.into(),
                (abs_err / oracle.abs()).into(),
            ]);
        }
        let check = mean_path_check(b, e, &MEAN_TIMES)?;
        accepted += check.n_accepted;
        proposed += check.n_proposed;
        for row in &check.rows {
            drift.push(vec![
                b.into(),
                row.t.into(),
                row.ensemble_mean.into(),
                row.stderr.into(),
                row.target.into(),
            ]);
        }
    }
    let summary = json!({ "r": e.r, "covariance_pairs": COV_PAIRS, "mean_times": MEAN_TIMES });
    Ok(Report {
        tables: vec![cov, means, drift.with_counts(accepted, proposed)],
        summary,
    })
}

pub fn limit_process(cfg: &RunConfig) -> Result<Report> {
    let e = &cfg.experiment;
    let c = limit_constants(&cfg.params)?;
    let probes = [-1.0, 1.0];
    let ens = limit_process_ensemble(e, LIMIT_HORIZON, &probes)?;
    let mut table = Table::new(
        "limit_samples",
        &["index", "y0", "v", "increment_minus_1", "increment_plus_1"],
    );
    let mut y0 = Moments::default();
    let mut inc = [Moments::default(); 2];
    let mut v_min = f64::INFINITY;
    for (i, s) in ens.samples.iter().enumerate() {
        y0.push(s.y0);
        inc[0].push(s.increments[0]);
        inc[1].push(s.increments[1]);
        v_min = v_min.min(s.v);
        table.push(vec![
            i.into(),
            s.y0.into(),
            s.v.into(),
            s.increments[0].into(),
            s.increments[1].into(),
        ]);
    }
    let n = ens.samples.len() as u64;
    let summary = json!({
        "mean_y0": y0.mean(),
        "stderr_y0": y0.stderr(),
        "limit_mean_y0": 1.0 / c.kappa2,
        "mean_increment": [inc[0].mean(), inc[1].mean()],
        "stderr_increment": [inc[0].stderr(), inc[1].stderr()],
        "limit_drift": -c.kappa1,
        "min_v": v_min,
        "horizon": ens.horizon,
        "dt": ens.dt,
        "negative_end_fraction": ens.negative_end_fraction,
    });
    Ok(Report {
        tables: vec![table.with_counts(n, n)],
        summary,
    })
}
