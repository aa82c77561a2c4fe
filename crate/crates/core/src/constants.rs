//! Closed-form quantities of the conditional limit theory: the constants
//! `kappa_1..3`, the most likely passage time, the window around it, the
//! Hüsler–Piterbarg tail, Borell bounds and the proof-parameter region.

use alloc::format;

use crate::error::{invalid, Error, Result};
use crate::fbm::{HurstParam, RngSeed};
use crate::storage::ModelParams;

/// `(sqrt(17) - 1) / 4`, the largest Hurst index for which the proof
/// parameters can be chosen.
pub const FEASIBILITY_THRESHOLD: f64 = 0.780_776_406_404_415_1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimitConstants {
    /// Drift coefficient of the limit process.
    pub kappa1: f64,
    /// Rate of the exponential overshoot.
    pub kappa2: f64,
    /// `sqrt(kappa2 / (1 - H))`.
    pub kappa3: f64,
}

pub fn limit_constants(params: &ModelParams) -> Result<LimitConstants> {
    let h = params.h.require_limit_range()?.value();
    let mu = params.mu();
    let kappa1 = libm::pow(mu * (1.0 - h) / h, 2.0 * h) / (2.0 * (1.0 - h));
    let kappa2 = libm::pow(mu, 2.0 * h) * libm::pow(1.0 - h, 2.0 * h - 1.0)
        / (params.theta * params.theta * libm::pow(h, 2.0 * h));
    let kappa3 = libm::sqrt(kappa2 / (1.0 - h));
    Ok(LimitConstants {
        kappa1,
        kappa2,
        kappa3,
    })
}

/// Most likely passage time `t* = b H / (mu (1 - H))`.
pub fn t_star(b: f64, params: &ModelParams) -> Result<f64> {
    if !(b > 0.0) {
        return Err(invalid("b", format!("must be positive, got {b}")));
    }
    let h = params.hurst();
    Ok(b * h / (params.mu() * (1.0 - h)))
}

/// The interval `[t_L, t_R] = t* -/+ b^{H+r}` around the most likely passage
/// time, and its rescaled left end.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowGeometry {
    pub t_star: f64,
    pub t_l: f64,
    pub t_r: f64,
    pub d: f64,
    /// `t_L / b^{2 - 1/H}`.
    pub t_tilde_l: f64,
}

pub fn window_geometry(b: f64, r: f64, params: &ModelParams) -> Result<WindowGeometry> {
    let t_star = t_star(b, params)?;
    if !r.is_finite() {
        return Err(invalid("r", "must be finite"));
    }
    let half = libm::pow(b, params.hurst() + r);
    if !(half < t_star) {
        return Err(Error::WindowTooShort(format!(
            "b^(H+r) = {half} is not below t* = {t_star}; increase b or decrease r"
        )));
    }
    let t_l = t_star - half;
    Ok(WindowGeometry {
        t_star,
        t_l,
        t_r: t_star + half,
        d: 2.0 * half,
        t_tilde_l: t_l / params.time_scale(b),
    })
}

/// Limit of `P(Y^b(0) > x | W(0) > b)`, namely `exp(-kappa2 x)`.
pub fn overshoot_tail_limit(x: f64, params: &ModelParams) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(invalid("x", format!("must be nonnegative, got {x}")));
    }
    Ok(libm::exp(-limit_constants(params)?.kappa2 * x))
}

/// Standard normal upper tail `1 - Phi(x)`.
pub fn normal_sf(x: f64) -> f64 {
    0.5 * libm::erfc(x * core::f64::consts::FRAC_1_SQRT_2)
}

/// `ln(1 - Phi(x))`, finite far beyond the underflow of `normal_sf`.
pub fn log_normal_sf(x: f64) -> f64 {
    if x < 30.0 {
        return libm::log(normal_sf(x));
    }
    // Mills ratio series, truncation error below 1e-13 for x >= 30
    let y = 1.0 / (x * x);
    let series = 1.0 - y * (1.0 - 3.0 * y * (1.0 - 5.0 * y * (1.0 - 7.0 * y * (1.0 - 9.0 * y))));
    -0.5 * x * x - libm::log(x) - 0.5 * libm::log(2.0 * core::f64::consts::PI) + libm::log(series)
}

/// Standard normal distribution function.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * core::f64::consts::FRAC_1_SQRT_2)
}

/// Where the tail prefactor `K` came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TailSource {
    ExactBrownian,
    UserSupplied,
    Calibrated,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailModel {
    pub k: f64,
    pub source: TailSource,
}

impl TailModel {
    pub fn user_supplied(k: f64) -> Result<Self> {
        if !(k > 0.0) || !k.is_finite() {
            return Err(invalid("K", format!("must be positive, got {k}")));
        }
        Ok(Self {
            k,
            source: TailSource::UserSupplied,
        })
    }

    /// The prefactor for which the simplified form is exactly
    /// `exp(-2 mu b / theta^2)` at `H = 1/2`.
    pub fn exact_brownian(params: &ModelParams) -> Result<Self> {
        if !params.h.is_brownian() {
            return Err(invalid("H", "exact Brownian prefactor requires H = 1/2"));
        }
        let c = limit_constants(params)?;
        Ok(Self {
            k: c.kappa3 * libm::sqrt(2.0 * core::f64::consts::PI),
            source: TailSource::ExactBrownian,
        })
    }

    /// Least-squares fit of `log K` to Monte Carlo tail estimates
    /// `(b, p_hat, stderr)`, weighting each level by its inverse relative
    /// variance.
    pub fn calibrated(params: &ModelParams, estimates: &[(f64, f64, f64)]) -> Result<Self> {
        let unit = TailModel {
            k: 1.0,
            source: TailSource::Calibrated,
        };
        let mut num = 0.0;
        let mut den = 0.0;
        for &(b, p, se) in estimates {
            if !(p > 0.0) || !(se > 0.0) {
                continue;
            }
            let shape = hp_tail(b, params, &unit)?.simplified_form;
            let rel = se / p;
            let w = 1.0 / (rel * rel);
            num += w * libm::log(p / shape);
            den += w;
        }
        if den == 0.0 {
            return Err(invalid(
                "estimates",
                "no level with a positive estimate and stderr",
            ));
        }
        Ok(Self {
            k: libm::exp(num / den),
            source: TailSource::Calibrated,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HpTail {
    /// `K b^{(1-H)^2/H} (1 - Phi(kappa3 b^{1-H}))`.
    pub exact_form: f64,
    /// `K / (kappa3 sqrt(2 pi)) b^{-(1-H)(2-1/H)} exp(-(kappa3^2/2) b^{2(1-H)})`.
    pub simplified_form: f64,
    /// Natural logarithms of the two forms, usable where they underflow.
    pub log_exact_form: f64,
    pub log_simplified_form: f64,
}

/// Both forms of the Hüsler–Piterbarg asymptotic for `P(W(0) > b)`.
pub fn hp_tail(b: f64, params: &ModelParams, model: &TailModel) -> Result<HpTail> {
    if !(b > 0.0) {
        return Err(invalid("b", format!("must be positive, got {b}")));
    }
    let h = params.hurst();
    let c = limit_constants(params)?;
    let x = c.kappa3 * libm::pow(b, 1.0 - h);
    let ln_b = libm::log(b);
    let ln_k = libm::log(model.k);
    let log_exact_form = ln_k + (1.0 - h) * (1.0 - h) / h * ln_b + log_normal_sf(x);
    let log_simplified_form = ln_k
        - libm::log(c.kappa3 * libm::sqrt(2.0 * core::f64::consts::PI))
        - (1.0 - h) * (2.0 - 1.0 / h) * ln_b
        - 0.5 * x * x;
    Ok(HpTail {
        exact_form: libm::exp(log_exact_form),
        simplified_form: libm::exp(log_simplified_form),
        log_exact_form,
        log_simplified_form,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BorellBound {
    pub bound: f64,
    /// Set when `lambda <= t^H C` and the trivial bound 1 is returned.
    pub trivial: bool,
}

/// `P(sup_{[0,t]} Z > lambda) <= 2 exp(-(lambda - t^H C)^2 / (2 t^{2H}))`.
pub fn borell_sup_bound(lambda: f64, t: f64, h: HurstParam, c_est: f64) -> BorellBound {
    let th = libm::pow(t, h.value());
    let excess = lambda - th * c_est;
    if !(excess > 0.0) || !(t > 0.0) {
        return BorellBound {
            bound: 1.0,
            trivial: true,
        };
    }
    let z = excess / th;
    BorellBound {
        bound: (2.0 * libm::exp(-0.5 * z * z)).min(1.0),
        trivial: false,
    }
}

/// Monte Carlo estimate of `C = E sup_{[0,1]} Z` scaled to `[0, t]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupEstimate {
    pub c_est: f64,
    /// Half-width of the 95% normal confidence interval.
    pub ci_halfwidth: f64,
}

impl SupEstimate {
    pub fn upper(&self) -> f64 {
        self.c_est + self.ci_halfwidth
    }
}

/// Steps of the grid on `[0, 1]` used by [`sup_expectation_estimate`].
pub const SUP_GRID_STEPS: usize = 4096;

/// Estimates `E sup_{[0,t]} Z` from `n` paths on a grid of
/// [`SUP_GRID_STEPS`] steps over `[0, 1]`, scaled by `t^H`. The grid
/// maximum underestimates the continuous supremum.
pub fn sup_expectation_estimate(
    h: HurstParam,
    t: f64,
    n: usize,
    seed: RngSeed,
) -> Result<SupEstimate> {
    if n < 1000 {
        return Err(Error::TooFewSamples {
            needed: 1000,
            got: n,
        });
    }
    if !(t > 0.0) {
        return Err(invalid("t", "must be positive"));
    }
    let mut generator =
        crate::fbm::FgnGenerator::new(SUP_GRID_STEPS, 1.0 / SUP_GRID_STEPS as f64, h)?;
    let mut increments = alloc::vec![0.0; SUP_GRID_STEPS];
    let mut acc = crate::stats::Moments::default();
    for i in 0..n {
        let mut rng = seed.stream(i as u64).rng();
        generator.sample_into(&mut rng, &mut increments);
        let mut z = 0.0;
        let mut best = 0.0f64;
        for dz in &increments {
            z += dz;
            best = best.max(z);
        }
        acc.push(best);
    }
    let scale = libm::pow(t, h.value());
    Ok(SupEstimate {
        c_est: scale * acc.mean(),
        ci_halfwidth: scale * 1.959_963_984_540_054 * acc.stderr(),
    })
}

/// A point of the proof-parameter region.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProofParams {
    pub r: f64,
    pub gamma: f64,
    pub eta1: f64,
    pub eta3: f64,
    pub delta: f64,
}

impl ProofParams {
    /// Whether every constraint holds strictly at this point.
    pub fn satisfies(&self, h: f64) -> bool {
        let q = (1.0 - h) * (1.0 - h) * (1.0 + h) / h;
        let ProofParams {
            r,
            gamma,
            eta1,
            eta3,
            delta,
        } = *self;
        let positive = r > 0.0 && gamma > 0.0 && eta1 > 0.0 && eta3 > 0.0 && delta > 0.0;
        positive
            && gamma < h + r
            && r < (1.0 - h) * (1.0 - h) / h
            && eta3 < h * h + q + r * (2.0 * h - 1.0)
            && delta < q - (1.0 - h) * (r + eta1) + r * eta1
            && gamma > h + r - (h - 0.5) * (1.0 - h - r)
            && eta3 > h * h + r * h + (1.0 - h + r) / 2.0
            && delta > (1.0 - h + r) / 2.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Feasibility {
    Feasible(ProofParams),
    Infeasible,
}

impl Feasibility {
    pub fn is_feasible(&self) -> bool {
        matches!(self, Feasibility::Feasible(_))
    }
}

/// Searches for a strictly interior point of the proof-parameter region.
///
/// With `r` and `eta1` fixed the remaining constraints are intervals for
/// `gamma`, `eta3` and `delta`, each of which widens as `r, eta1 -> 0+`. The
/// search therefore shrinks `r = eta1` geometrically and returns interval
/// midpoints at the first size where all three intervals are nonempty.
pub fn proof_params_feasible(h: HurstParam) -> Result<Feasibility> {
    let hv = h.value();
    if !(hv > 0.5) {
        return Err(Error::HurstOutsideProofRange(hv));
    }
    let q = (1.0 - hv) * (1.0 - hv) * (1.0 + hv) / hv;
    let r_max = (1.0 - hv) * (1.0 - hv) / hv;
    let mut eps = 0.25 * r_max.min(1.0);
    for _ in 0..60 {
        let (r, eta1) = (eps, eps);
        let gamma = ((hv + r - (hv - 0.5) * (1.0 - hv - r)).max(0.0), hv + r);
        let eta3 = (
            hv * hv + r * hv + (1.0 - hv + r) / 2.0,
            hv * hv + q + r * (2.0 * hv - 1.0),
        );
        let delta = ((1.0 - hv + r) / 2.0, q - (1.0 - hv) * (r + eta1) + r * eta1);
        if r < r_max && gamma.0 < gamma.1 && eta3.0 < eta3.1 && delta.0 < delta.1 {
            let p = ProofParams {
                r,
                gamma: 0.5 * (gamma.0 + gamma.1),
                eta1,
                eta3: 0.5 * (eta3.0 + eta3.1),
                delta: 0.5 * (delta.0 + delta.1),
            };
            if p.satisfies(hv) {
                return Ok(Feasibility::Feasible(p));
            }
        }
        eps *= 0.5;
    }
    Ok(Feasibility::Infeasible)
}
