//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use regfbm_core::constants::ProofParams;
use regfbm_core::fbm::{fbm_covariance, fgn_autocovariance, FgnGenerator};
use regfbm_core::linalg::levinson_solve;
use regfbm_core::{HurstParam, RngSeed, SamplePath, TimeGrid};

pub fn hurst(h: f64) -> HurstParam {
    HurstParam::new(h).unwrap()
}

/// Discrete history of `n` fGN cells on `[-d, 0]` and the exact Gaussian
/// projection of future values `Z(u)` on it.
pub struct HistoryOracle {
    pub h: HurstParam,
    pub d: f64,
    pub n: usize,
    toeplitz: Vec<f64>,
}

impl HistoryOracle {
    pub fn new(h: HurstParam, d: f64, n: usize) -> Self {
        let dt = d / n as f64;
        let toeplitz = (0..n as i64)
            .map(|k| fgn_autocovariance(k, dt, h).unwrap())
            .collect();
        Self { h, d, n, toeplitz }
    }

    /// `cov(Z(u), Z(v_{k+1}) - Z(v_k))` for every history cell.
    pub fn cross(&self, u: f64) -> Vec<f64> {
        let dt = self.d / self.n as f64;
        (0..self.n)
            .map(|k| {
                let lo = -self.d + k as f64 * dt;
                let hi = lo + dt;
                fbm_covariance(u, hi, self.h) - fbm_covariance(u, lo, self.h)
            })
            .collect()
    }

    /// `Gamma^{-1} cov(increments, Z(u))`, the regression weights of `Z(u)`.
    pub fn weights(&self, u: f64) -> Vec<f64> {
        levinson_solve(&self.toeplitz, &self.cross(u)).unwrap()
    }

    /// `E(Z(u) | history)` given the history's increments.
    pub fn predict(&self, u: f64, increments: &[f64]) -> f64 {
        dot(&self.weights(u), increments)
    }

    /// `cov(E(Z(a) | history), E(Z(b) | history))`.
    pub fn prediction_cov(&self, a: f64, b: f64) -> f64 {
        dot(&self.weights(a), &self.cross(b))
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// A seeded fBM history on `[-d, 0]` with `n` cells, anchored at 0.
pub fn seeded_history(h: HurstParam, d: f64, n: usize, seed: u64) -> SamplePath {
    let dt = d / n as f64;
    let mut gen = FgnGenerator::new(n, dt, h).unwrap();
    let inc = gen.sample(&mut RngSeed::new(seed, 0).rng());
    let mut values = vec![0.0; n + 1];
    for k in (0..n).rev() {
        values[k] = values[k + 1] - inc[k];
    }
    SamplePath::new(TimeGrid::new(-d, dt, n + 1).unwrap(), values).unwrap()
}

/// Every `step`-th point of a path.
pub fn coarsen(path: &SamplePath, step: usize) -> SamplePath {
    let g = path.grid();
    let values: Vec<f64> = path.values().iter().step_by(step).copied().collect();
    SamplePath::new(
        TimeGrid::new(g.t_start(), g.dt() * step as f64, values.len()).unwrap(),
        values,
    )
    .unwrap()
}

pub fn increments(path: &SamplePath) -> Vec<f64> {
    path.values().windows(2).map(|w| w[1] - w[0]).collect()
}

/// Tanh-sinh quadrature on `[a, b]`, refined by halving the step until two
/// levels agree to `rel`.
pub fn tanh_sinh(f: impl Fn(f64) -> f64, a: f64, b: f64, rel: f64) -> f64 {
    use std::f64::consts::FRAC_PI_2;
    let c = 0.5 * (b - a);
    let eval = |t: f64| {
        let s = FRAC_PI_2 * t.sinh();
        // distance of the node from the nearer endpoint, free of cancellation
        let comp = 1.0 / (s.abs().exp() * s.cosh());
        if comp == 0.0 {
            return 0.0;
        }
        let x = if s >= 0.0 { b - c * comp } else { a + c * comp };
        let w = FRAC_PI_2 * t.cosh() / (s.cosh() * s.cosh());
        c * w * f(x)
    };
    let t_max = 6.5;
    let mut h = 0.5;
    let mut sum = eval(0.0);
    let mut k = 1;
    while k as f64 * h <= t_max {
        sum += eval(k as f64 * h) + eval(-(k as f64) * h);
        k += 1;
    }
    let mut prev = sum * h;
    for _ in 0..12 {
        h *= 0.5;
        let mut k = 1;
        while k as f64 * h <= t_max {
            sum += eval(k as f64 * h) + eval(-(k as f64) * h);
            k += 2;
        }
        let cur = sum * h;
        if (cur - prev).abs() <= rel * cur.abs() {
            return cur;
        }
        prev = cur;
    }
    prev
}

/// The prediction kernel by tanh-sinh quadrature, as a second scheme.
pub fn kernel_oracle(h: f64, d: f64, u: f64, v: f64) -> f64 {
    let c_h = (std::f64::consts::PI * (h - 0.5)).sin() / std::f64::consts::PI;
    let a = h - 0.5;
    let f = |w: f64| w.powf(a) * (w + d).powf(a) / (w + v);
    let split = v.min(u);
    let mut inner = tanh_sinh(f, 0.0, split, 1e-14);
    if u > split {
        inner += tanh_sinh(f, split, u, 1e-14);
    }
    c_h * (d - v).powf(-a) * v.powf(-a) * inner
}

/// Open intervals for `gamma`, `eta3`, `delta` at fixed `(r, eta1)`.
pub fn proof_intervals(h: f64, r: f64, eta1: f64) -> [(f64, f64); 3] {
    let q = (1.0 - h) * (1.0 - h) * (1.0 + h) / h;
    [
        ((h + r - (h - 0.5) * (1.0 - h - r)).max(0.0), h + r),
        (
            (h * h + r * h + (1.0 - h + r) / 2.0).max(0.0),
            h * h + q + r * (2.0 * h - 1.0),
        ),
        (
            ((1.0 - h + r) / 2.0).max(0.0),
            q - (1.0 - h) * (r + eta1) + r * eta1,
        ),
    ]
}

/// Scans `(r, eta1)` over `(0, 1)^2` at resolution `step` and, where all
/// three remaining intervals are open, returns their midpoints.
pub fn brute_force_feasible(h: f64, step: f64) -> Option<ProofParams> {
    let n = (1.0 / step).round() as usize;
    for i in 1..n {
        let r = i as f64 * step;
        if r >= (1.0 - h) * (1.0 - h) / h {
            break;
        }
        for j in 1..n {
            let eta1 = j as f64 * step;
            let iv = proof_intervals(h, r, eta1);
            if iv.iter().all(|(lo, hi)| lo < hi && *lo < 1.0) {
                let mid = |k: usize| 0.5 * (iv[k].0 + iv[k].1.min(1.0));
                let p = ProofParams {
                    r,
                    gamma: mid(0),
                    eta1,
                    eta3: mid(1),
                    delta: mid(2),
                };
                if p.satisfies(h) {
                    return Some(p);
                }
            }
        }
    }
    None
}

/// Sample covariance of two equally long series.
pub fn sample_cov(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    x.iter()
        .zip(y)
        .map(|(a, b)| (a - mx) * (b - my))
        .sum::<f64>()
        / (n - 1.0)
}

/// Standard error of the sample covariance of a bivariate normal pair.
pub fn cov_stderr(var_x: f64, var_y: f64, cov: f64, n: usize) -> f64 {
    ((var_x * var_y + cov * cov) / n as f64).sqrt()
}
