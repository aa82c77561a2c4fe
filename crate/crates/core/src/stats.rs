//! Small statistics toolbox: running moments, binomial errors, the
//! one-sample Kolmogorov–Smirnov test, sample medians with order-statistic
//! intervals and least-squares lines.

use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Two-sided 95% standard normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Running mean and variance (Welford).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Moments {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn from_slice(xs: &[f64]) -> Self {
        let mut m = Self::default();
        for &x in xs {
            m.push(x);
        }
        m
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    /// Standard error of the mean.
    pub fn stderr(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            libm::sqrt(self.variance() / self.n as f64)
        }
    }
}

/// Standard error of a binomial proportion `k / n`.
pub fn binomial_stderr(k: u64, n: u64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let p = k as f64 / n as f64;
    libm::sqrt(p * (1.0 - p) / n as f64)
}

/// Sample sorted ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalDistribution {
    samples: Vec<f64>,
}

impl EmpiricalDistribution {
    pub fn new(mut samples: Vec<f64>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::TooFewSamples { needed: 1, got: 0 });
        }
        if samples.iter().any(|x| x.is_nan()) {
            return Err(crate::error::invalid("samples", "contains NaN"));
        }
        samples.sort_by(f64::total_cmp);
        Ok(Self { samples })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn mean(&self) -> f64 {
        Moments::from_slice(&self.samples).mean()
    }

    /// Linear-interpolated quantile, `p` in `[0, 1]`.
    pub fn quantile(&self, p: f64) -> f64 {
        let n = self.samples.len();
        let x = p.clamp(0.0, 1.0) * (n - 1) as f64;
        let lo = libm::floor(x) as usize;
        let hi = (lo + 1).min(n - 1);
        let frac = x - lo as f64;
        self.samples[lo] + frac * (self.samples[hi] - self.samples[lo])
    }

    pub fn median(&self) -> f64 {
        self.quantile(0.5)
    }

    /// Distribution-free 95% interval for the median from order statistics.
    pub fn median_ci(&self) -> (f64, f64) {
        let n = self.samples.len();
        let half = 0.5 * Z95 * libm::sqrt(n as f64);
        let lo = libm::floor(0.5 * n as f64 - half).max(0.0) as usize;
        let hi = (libm::ceil(0.5 * n as f64 + half) as usize).min(n - 1);
        (self.samples[lo], self.samples[hi])
    }
}

/// One-sample Kolmogorov–Smirnov result.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// Kolmogorov–Smirnov test of sorted `samples` against the continuous
/// distribution function `cdf`, with the asymptotic p-value (Stephens'
/// finite-sample adjustment of the argument).
pub fn ks_test(dist: &EmpiricalDistribution, cdf: impl Fn(f64) -> f64) -> KsResult {
    let xs = dist.samples();
    let n = xs.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    let en = libm::sqrt(n);
    KsResult {
        statistic: d,
        p_value: kolmogorov_sf((en + 0.12 + 0.11 / en) * d),
    }
}

/// `P(K > x)` for the Kolmogorov distribution.
pub fn kolmogorov_sf(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x < 1.0 {
        // P(K <= x) = sqrt(2 pi) / x * sum exp(-(2k-1)^2 pi^2 / (8 x^2)).
        let pi = core::f64::consts::PI;
        let mut s = 0.0;
        for k in 1..=20 {
            let m = (2 * k - 1) as f64;
            s += libm::exp(-m * m * pi * pi / (8.0 * x * x));
        }
        (1.0 - libm::sqrt(2.0 * pi) / x * s).clamp(0.0, 1.0)
    } else {
        let mut s = 0.0;
        for k in 1..=100 {
            let kf = k as f64;
            let term = libm::exp(-2.0 * kf * kf * x * x);
            s += if k % 2 == 1 { term } else { -term };
            if term < 1e-18 {
                break;
            }
        }
        (2.0 * s).clamp(0.0, 1.0)
    }
}

/// Least-squares line with a 95% slope interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegressionReport {
    pub slope: f64,
    pub intercept: f64,
    /// `(lower, upper)` 95% interval for the slope.
    pub slope_ci: (f64, f64),
}

/// Ordinary least squares of `y` on `x`. When per-point standard errors of
/// `y` are given, the slope interval propagates them through the (linear)
/// estimator; otherwise it uses the residual variance.
pub fn ols(x: &[f64], y: &[f64], y_stderr: Option<&[f64]>) -> Result<RegressionReport> {
    let n = x.len();
    if n < 2 || y.len() != n {
        return Err(Error::TooFewSamples {
            needed: 2,
            got: n.min(y.len()),
        });
    }
    let xm = x.iter().sum::<f64>() / n as f64;
    let ym = y.iter().sum::<f64>() / n as f64;
    let sxx: f64 = x.iter().map(|&a| (a - xm) * (a - xm)).sum();
    if !(sxx > 0.0) {
        return Err(crate::error::invalid(
            "x",
            "needs at least two distinct values",
        ));
    }
    let sxy: f64 = x.iter().zip(y).map(|(&a, &b)| (a - xm) * (b - ym)).sum();
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    let se = match y_stderr {
        Some(se) => libm::sqrt(
            x.iter()
                .zip(se)
                .map(|(&a, &s)| {
                    let c = (a - xm) / sxx;
                    c * c * s * s
                })
                .sum::<f64>(),
        ),
        None if n > 2 => {
            let rss: f64 = x
                .iter()
                .zip(y)
                .map(|(&a, &b)| {
                    let e = b - intercept - slope * a;
                    e * e
                })
                .sum();
            libm::sqrt(rss / (n - 2) as f64 / sxx)
        }
        None => 0.0,
    };
    Ok(RegressionReport {
        slope,
        intercept,
        slope_ci: (slope - Z95 * se, slope + Z95 * se),
    })
}
