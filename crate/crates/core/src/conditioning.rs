//! Conditional Gaussian machinery for the scaled netput `b^{1-2H} X(b^{2-1/H} s)`:
//! conditional means given one or two past values, the Gripenberg–Norros
//! prediction kernel, covariances given a whole history segment, and a
//! dense conditioning oracle everything else is checked against.

use alloc::format;
use alloc::vec::Vec;

use crate::constants::window_geometry;
use crate::error::{invalid, Error, Result};
use crate::fbm::{abs_pow, fbm_covariance, HurstParam, SamplePath};
use crate::linalg::{cholesky_solve, cholesky_with_jitter, Matrix};
use crate::quadrature::{integrate, integrate_left_power, integrate_two_sided_power, Tolerance};
use crate::storage::ModelParams;

/// Relative tolerance of the kernel's inner integral.
pub const KERNEL_TOLERANCE: f64 = 1e-10;
/// Relative tolerance of the outer integral in [`cov_fn_f`].
pub const COVARIANCE_TOLERANCE: f64 = 1e-8;
/// Fewest history cells accepted by [`predict_from_history`].
pub const MIN_HISTORY_CELLS: usize = 64;

/// Conditional mean and covariance of a Gaussian vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Conditional {
    pub mean: Vec<f64>,
    pub cov: Matrix,
}

/// Conditions a zero-mean Gaussian vector with covariance `cov` on the
/// coordinates `observed_idx` taking `observed_values`, returning the law
/// of the coordinates `target_idx`.
pub fn gaussian_condition_oracle(
    cov: &Matrix,
    observed_idx: &[usize],
    observed_values: &[f64],
    target_idx: &[usize],
) -> Result<Conditional> {
    if !cov.is_square() {
        return Err(invalid("cov", "must be square"));
    }
    if observed_idx.len() != observed_values.len() {
        return Err(invalid("observed_values", "length must match observed_idx"));
    }
    let n = cov.rows();
    if let Some(&k) = observed_idx.iter().chain(target_idx).find(|&&k| k >= n) {
        return Err(invalid(
            "index",
            format!("{k} out of range for dimension {n}"),
        ));
    }
    let s11 = cov.select(target_idx, target_idx);
    if observed_idx.is_empty() {
        return Ok(Conditional {
            mean: alloc::vec![0.0; target_idx.len()],
            cov: s11,
        });
    }
    let s22 = cov.select(observed_idx, observed_idx);
    let s12 = cov.select(target_idx, observed_idx);
    let l = cholesky_with_jitter(&s22)?;
    let alpha = cholesky_solve(&l, observed_values);
    let mean = s12.mul_vec(&alpha);
    // Columns of S22^{-1} S21, one per target.
    let solved: Vec<Vec<f64>> = (0..target_idx.len())
        .map(|i| cholesky_solve(&l, s12.row(i)))
        .collect();
    let cond = Matrix::from_fn(target_idx.len(), target_idx.len(), |i, j| {
        s11[(i, j)] - crate::linalg::dot(s12.row(i), &solved[j])
    });
    Ok(Conditional { mean, cov: cond })
}

/// Which past information a set of observations represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SigmaField {
    /// The netput at the left end of the window.
    OneEndpoint,
    /// The netput at both ends of the window.
    TwoEndpoints,
    /// The netput over the whole window.
    FullHistory,
}

/// Observed values of an fBM at strictly increasing times.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSet {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub field: SigmaField,
}

impl ObservationSet {
    pub fn new(times: Vec<f64>, values: Vec<f64>, field: SigmaField) -> Result<Self> {
        if times.len() != values.len() {
            return Err(invalid("values", "length must match times"));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(invalid("times", "must be strictly increasing"));
        }
        Ok(Self {
            times,
            values,
            field,
        })
    }

    /// Law of `Z(targets)` given these observations of the fBM `Z`.
    pub fn condition_fbm(&self, targets: &[f64], h: HurstParam) -> Result<Conditional> {
        let all: Vec<f64> = self.times.iter().chain(targets).copied().collect();
        let cov = Matrix::from_fn(all.len(), all.len(), |i, j| {
            fbm_covariance(all[i], all[j], h)
        });
        let m = self.times.len();
        let obs: Vec<usize> = (0..m).collect();
        let tgt: Vec<usize> = (m..all.len()).collect();
        gaussian_condition_oracle(&cov, &obs, &self.values, &tgt)
    }
}

/// `E(Ŷ^b(s) | X(-t_L) = x_obs)` for the window with exponent offset `r`.
pub fn cond_mean_one_endpoint(
    s: f64,
    b: f64,
    params: &ModelParams,
    r: f64,
    x_obs: f64,
) -> Result<f64> {
    let w = window_geometry(b, r, params)?;
    let h = params.h;
    let beta = params.time_scale(b);
    let u = beta * s;
    let mu = params.mu();
    let ratio = fbm_covariance(-w.t_l, u, h) / fbm_covariance(-w.t_l, -w.t_l, h);
    Ok(params.space_scale(b) * ((x_obs - mu * w.t_l) * ratio - mu * u))
}

/// `E(Ŷ^b(s) | X(-t_L) = x_l, X(-t_R) = x_r)`: the one-endpoint mean plus a
/// correction proportional to the part of `Z(-t_R)` not explained by
/// `Z(-t_L)`.
pub fn cond_mean_two_endpoints(
    s: f64,
    b: f64,
    params: &ModelParams,
    r: f64,
    x_l: f64,
    x_r: f64,
) -> Result<f64> {
    let w = window_geometry(b, r, params)?;
    let h = params.h;
    let beta = params.time_scale(b);
    let u = beta * s;
    let (mu, theta) = (params.mu(), params.theta);
    let (tl, tr) = (-w.t_l, -w.t_r);
    let var_l = fbm_covariance(tl, tl, h);
    let var_r = fbm_covariance(tr, tr, h);
    let c_lr = fbm_covariance(tl, tr, h);
    let c_lu = fbm_covariance(tl, u, h);
    let c_ru = fbm_covariance(tr, u, h);
    let det = var_l * var_r - c_lr * c_lr;
    if !(det > 0.0) {
        return Err(Error::NotPositiveDefinite);
    }
    let z_l = (x_l - mu * w.t_l) / theta;
    let z_r = (x_r - mu * w.t_r) / theta;
    let residual = z_r - c_lr / var_l * z_l;
    let correction = (var_l * c_ru - c_lu * c_lr) / det * residual;
    let one = cond_mean_one_endpoint(s, b, params, r, x_l)?;
    Ok(one + params.space_scale(b) * theta * correction)
}

/// Window length and Hurst index of the prediction kernel, with
/// `C_H = sin(pi (H - 1/2)) / pi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelParams {
    pub d: f64,
    pub h: HurstParam,
    pub c_h: f64,
}

impl KernelParams {
    pub fn new(d: f64, h: HurstParam) -> Result<Self> {
        if !(d > 0.0) || !d.is_finite() {
            return Err(invalid("D", format!("must be positive, got {d}")));
        }
        let c_h = if h.is_brownian() {
            0.0
        } else {
            libm::sin(core::f64::consts::PI * (h.value() - 0.5)) / core::f64::consts::PI
        };
        Ok(Self { d, h, c_h })
    }
}

fn check_kernel_args(kp: &KernelParams, u: f64, v: f64) -> Result<()> {
    if !(u >= 0.0) {
        return Err(invalid("u", format!("must be nonnegative, got {u}")));
    }
    if !(v > 0.0 && v < kp.d) {
        return Err(invalid(
            "v",
            format!("must lie in (0, D) = (0, {}), got {v}", kp.d),
        ));
    }
    Ok(())
}

/// `int_0^u w^{H-1/2} (w + D)^{H-1/2} / (w + v)^power dw`.
fn kernel_integral(kp: &KernelParams, u: f64, v: f64, power: i32, rel: f64) -> Result<f64> {
    let a = kp.h.value() - 0.5;
    let d = kp.d;
    let f = |w: f64| {
        let den = if power == 1 { w + v } else { (w + v) * (w + v) };
        abs_pow(w, a) * libm::pow(w + d, a) / den
    };
    let tol = Tolerance::relative(rel);
    let split = v.min(u);
    let mut total = integrate_left_power(f, 0.0, split, a, tol)?;
    if u > split {
        total += integrate(f, split, u, tol)?;
    }
    Ok(total)
}

/// The prediction kernel `g(D, u, -v)` for `u >= 0`, `0 < v < D`.
pub fn gn_kernel(kp: &KernelParams, u: f64, v: f64) -> Result<f64> {
    gn_kernel_with_tolerance(kp, u, v, KERNEL_TOLERANCE)
}

/// [`gn_kernel`] with an explicit relative tolerance for the inner integral.
pub fn gn_kernel_with_tolerance(kp: &KernelParams, u: f64, v: f64, rel: f64) -> Result<f64> {
    check_kernel_args(kp, u, v)?;
    if kp.c_h == 0.0 || u == 0.0 {
        return Ok(0.0);
    }
    let a = 0.5 - kp.h.value();
    let inner = kernel_integral(kp, u, v, 1, rel)?;
    Ok(kp.c_h * libm::pow(kp.d - v, a) * libm::pow(v, a) * inner)
}

/// Derivative of the kernel in `v`.
pub fn gn_kernel_deriv(kp: &KernelParams, u: f64, v: f64) -> Result<f64> {
    gn_kernel_deriv_with_tolerance(kp, u, v, KERNEL_TOLERANCE)
}

/// [`gn_kernel_deriv`] with an explicit relative tolerance.
pub fn gn_kernel_deriv_with_tolerance(kp: &KernelParams, u: f64, v: f64, rel: f64) -> Result<f64> {
    check_kernel_args(kp, u, v)?;
    if kp.c_h == 0.0 || u == 0.0 {
        return Ok(0.0);
    }
    let hm = kp.h.value() - 0.5;
    let g = gn_kernel_with_tolerance(kp, u, v, rel)?;
    let inner = kernel_integral(kp, u, v, 2, rel)?;
    Ok(-hm * g * (1.0 / v - 1.0 / (kp.d - v))
        - kp.c_h * libm::pow(v, -hm) * libm::pow(kp.d - v, -hm) * inner)
}

/// Prediction of `Z̃(u)` from a history together with the magnitude of the
/// two singular boundary cells' contribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistoryPrediction {
    pub value: f64,
    pub boundary_contribution: f64,
}

/// `E(Z̃(u) | Z̃ on [-D, 0]) = int_{-D}^0 g(D, u, v) dZ̃(v)` as a Stieltjes sum
/// over the history cells.
///
/// Interior cells use the kernel at the cell midpoint; the two end cells,
/// where the kernel has an integrable power singularity, use the average of
/// the leading power over the cell matched to the midpoint value.
pub fn predict_from_history(
    history: &SamplePath,
    u: f64,
    kp: &KernelParams,
) -> Result<HistoryPrediction> {
    let grid = history.grid();
    let cells = grid.n_points().saturating_sub(1);
    if cells < MIN_HISTORY_CELLS {
        return Err(invalid(
            "history",
            format!("needs at least {MIN_HISTORY_CELLS} cells, got {cells}"),
        ));
    }
    let tol = 1e-9 * kp.d;
    if libm::fabs(grid.t_start() + kp.d) > tol || libm::fabs(grid.t_end()) > tol {
        return Err(Error::GridMisaligned(format!(
            "history must cover [-D, 0] = [{}, 0], got [{}, {}]",
            -kp.d,
            grid.t_start(),
            grid.t_end()
        )));
    }
    if !(u >= 0.0) {
        return Err(invalid("u", format!("must be nonnegative, got {u}")));
    }
    if kp.c_h == 0.0 || u == 0.0 {
        return Ok(HistoryPrediction {
            value: 0.0,
            boundary_contribution: 0.0,
        });
    }
    let z = history.values();
    let dt = grid.dt();
    let a = 0.5 - kp.h.value();
    let edge_factor = libm::pow(2.0, a) / (1.0 + a);
    let mut value = 0.0;
    let mut boundary = 0.0;
    for k in 0..cells {
        let v_mid = kp.d - (k as f64 + 0.5) * dt;
        let mut g = gn_kernel(kp, u, v_mid)?;
        let dz = z[k + 1] - z[k];
        if k == 0 || k == cells - 1 {
            g *= edge_factor;
            boundary += libm::fabs(g * dz);
        }
        value += g * dz;
    }
    Ok(HistoryPrediction {
        value,
        boundary_contribution: boundary,
    })
}

/// `v(x) = (1 + (1 + x)^{2H} - |x|^{2H}) / 2` for `|x| < 1`.
pub fn v_fn(x: f64, h: HurstParam) -> Result<f64> {
    if !(libm::fabs(x) < 1.0) {
        return Err(invalid("x", format!("requires |x| < 1, got {x}")));
    }
    let two_h = 2.0 * h.value();
    Ok(0.5 * (1.0 + libm::pow(1.0 + x, two_h) - abs_pow(x, two_h)))
}

/// `f(d, w, x) = H int_0^d g(d, 1 + w, -u) [(1 + w + x + u)^{2H-1} - u^{2H-1}] du`.
pub fn cov_fn_f(d: f64, w: f64, x: f64, h: HurstParam) -> Result<f64> {
    let kp = KernelParams::new(d, h)?;
    if kp.c_h == 0.0 {
        return Ok(0.0);
    }
    if !(1.0 + w >= 0.0) || !(1.0 + w + x > 0.0) {
        return Err(invalid(
            "w, x",
            format!("requires 1 + w >= 0 and 1 + w + x > 0, got w = {w}, x = {x}"),
        ));
    }
    let hv = h.value();
    let p = 2.0 * hv - 1.0;
    let mut failure = None;
    let integrand = |u: f64| {
        if !(u > 0.0 && u < d) {
            return 0.0;
        }
        match gn_kernel(&kp, 1.0 + w, u) {
            Ok(g) => g * (libm::pow(1.0 + w + x + u, p) - libm::pow(u, p)),
            Err(e) => {
                failure.get_or_insert(e);
                0.0
            }
        }
    };
    let a = 0.5 - hv;
    let value = integrate_two_sided_power(
        integrand,
        0.0,
        d,
        a,
        a,
        Tolerance::relative(COVARIANCE_TOLERANCE),
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(hv * value)
}

/// `cov(Ŷ^b(s), Ŷ^b(t) | netput on [-t_R, -t_L])`.
pub fn cond_cov_given_history(s: f64, t: f64, b: f64, params: &ModelParams, r: f64) -> Result<f64> {
    let h = params.h;
    if h.is_brownian() {
        return Ok(limit_cov(s, t, params));
    }
    let w = window_geometry(b, r, params)?;
    let tt = w.t_tilde_l;
    let (sp, tp) = (s / tt, t / tt);
    if !(libm::fabs(sp) < 1.0 && libm::fabs(tp) < 1.0) {
        return Err(invalid(
            "s, t",
            format!("must lie inside the scaled window (-{tt}, {tt}), got s = {s}, t = {t}"),
        ));
    }
    let d = w.d / w.t_l;
    let two_h = 2.0 * h.value();
    let f00 = cov_fn_f(d, 0.0, 0.0, h)?;
    let vs = v_fn(sp, h)? - cov_fn_f(d, 0.0, sp, h)?;
    let vt = v_fn(tp, h)? - cov_fn_f(d, 0.0, tp, h)?;
    let prior =
        0.5 * (libm::pow(1.0 + sp, two_h) + libm::pow(1.0 + tp, two_h) - abs_pow(tp - sp, two_h));
    let bracket = prior - cov_fn_f(d, sp, tp - sp, h)? - vs * vt / (1.0 - f00);
    Ok(params.theta * params.theta * libm::pow(tt, two_h) * bracket)
}

/// `theta^2 (|t|^{2H} + |s|^{2H} - |t - s|^{2H}) / 2`.
pub fn limit_cov(s: f64, t: f64, params: &ModelParams) -> f64 {
    params.theta * params.theta * fbm_covariance(s, t, params.h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn h(v: f64) -> HurstParam {
        HurstParam::new(v).unwrap()
    }

    fn params(hv: f64) -> ModelParams {
        ModelParams::with_drift(h(hv), 1.0, 1.0).unwrap()
    }

    #[test]
    fn oracle_trivial_cases() {
        let cov = Matrix::from_fn(2, 2, |i, j| {
            fbm_covariance((i + 1) as f64, (j + 1) as f64, h(0.7))
        });
        let c = gaussian_condition_oracle(&cov, &[], &[], &[0, 1]).unwrap();
        assert_eq!(c.mean, vec![0.0, 0.0]);
        assert_eq!(c.cov, cov);
        let c = gaussian_condition_oracle(&cov, &[1], &[0.3], &[1]).unwrap();
        assert!((c.mean[0] - 0.3).abs() < 1e-14);
        assert!(c.cov[(0, 0)].abs() < 1e-12);
    }

    #[test]
    fn brownian_bridge_midpoint() {
        let mut cov = Matrix::zeros(2, 2);
        cov[(0, 0)] = 0.5;
        cov[(0, 1)] = 0.5;
        cov[(1, 0)] = 0.5;
        cov[(1, 1)] = 1.0;
        let c = gaussian_condition_oracle(&cov, &[1], &[0.0], &[0]).unwrap();
        assert_eq!(c.mean[0], 0.0);
        assert!((c.cov[(0, 0)] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn observation_set_validation() {
        assert!(
            ObservationSet::new(vec![1.0, 1.0], vec![0.0, 0.0], SigmaField::TwoEndpoints).is_err()
        );
        assert!(ObservationSet::new(vec![1.0], vec![0.0, 0.0], SigmaField::OneEndpoint).is_err());
    }

    #[test]
    fn one_endpoint_trivial() {
        let p = params(0.75);
        assert_eq!(
            cond_mean_one_endpoint(0.0, 16.0, &p, 0.05, -16.0).unwrap(),
            0.0
        );
        let pb = params(0.5);
        for x in [-3.0, 0.0, 5.0] {
            let m = cond_mean_one_endpoint(0.7, 9.0, &pb, 0.05, x).unwrap();
            assert!((m + 0.7).abs() < 1e-12);
        }
    }

    #[test]
    fn two_endpoint_reduces_without_residual() {
        let p = params(0.75);
        let (b, r) = (16.0, 0.05);
        let w = window_geometry(b, r, &p).unwrap();
        let hv = p.h;
        let x_l = -b;
        let z_l = (x_l - w.t_l) / p.theta;
        let z_r = fbm_covariance(-w.t_l, -w.t_r, hv) / fbm_covariance(-w.t_l, -w.t_l, hv) * z_l;
        let x_r = w.t_r + p.theta * z_r;
        for s in [-0.5, 0.3, 1.0] {
            let one = cond_mean_one_endpoint(s, b, &p, r, x_l).unwrap();
            let two = cond_mean_two_endpoints(s, b, &p, r, x_l, x_r).unwrap();
            assert!((one - two).abs() < 1e-10 * one.abs().max(1.0));
        }
        let pb = params(0.5);
        let m = cond_mean_two_endpoints(0.4, 9.0, &pb, 0.05, -2.0, 1.0).unwrap();
        assert!((m + 0.4).abs() < 1e-12);
    }

    #[test]
    fn kernel_trivial_cases() {
        let kp = KernelParams::new(1.0, h(0.5)).unwrap();
        assert_eq!(kp.c_h, 0.0);
        assert_eq!(gn_kernel(&kp, 1.0, 0.3).unwrap(), 0.0);
        assert_eq!(gn_kernel_deriv(&kp, 1.0, 0.3).unwrap(), 0.0);
        let kp = KernelParams::new(1.0, h(0.75)).unwrap();
        assert_eq!(gn_kernel(&kp, 0.0, 0.3).unwrap(), 0.0);
        assert!(gn_kernel(&kp, 1.0, 0.5).unwrap() > 0.0);
        assert!(gn_kernel(&kp, 1.0, 0.0).is_err());
        assert!(gn_kernel(&kp, 1.0, 1.0).is_err());
        assert!(gn_kernel_deriv(&kp, 1.0, 1e-3).unwrap() < 0.0);
    }

    #[test]
    fn v_fn_examples() {
        let hv = h(0.75);
        assert_eq!(v_fn(0.0, hv).unwrap(), 1.0);
        let expected = 0.5 * (1.0 + 1.999f64.powf(1.5) - 0.999f64.powf(1.5));
        assert!((v_fn(0.999, hv).unwrap() - expected).abs() < 1e-15);
        assert!((v_fn(0.999, hv).unwrap() - 1.415).abs() < 2e-3);
        assert!(v_fn(1.0, hv).is_err());
        for x in [1e-3, 1e-4] {
            let slope = (v_fn(x, hv).unwrap() - 1.0) / x;
            assert!((slope - 0.75).abs() < 2.0 * x.sqrt());
        }
    }

    #[test]
    fn f_degenerate_and_proper_fraction() {
        assert_eq!(cov_fn_f(0.5, 0.0, 0.0, h(0.5)).unwrap(), 0.0);
        for d in [0.1, 0.3, 0.5] {
            let f = cov_fn_f(d, 0.0, 0.0, h(0.75)).unwrap();
            assert!(f > 0.0 && f < 1.0, "f({d}, 0, 0) = {f}");
        }
    }

    #[test]
    fn brownian_history_covariance_is_the_limit() {
        let p = params(0.5);
        for (s, t) in [(1.0, 1.0), (1.0, -1.0), (0.5, 1.0)] {
            assert_eq!(
                cond_cov_given_history(s, t, 16.0, &p, 0.05).unwrap(),
                limit_cov(s, t, &p)
            );
        }
    }

    #[test]
    fn limit_cov_examples() {
        let p = params(0.75);
        assert_eq!(limit_cov(1.0, 1.0, &p), 1.0);
        assert!(limit_cov(1.0, -1.0, &params(0.5)).abs() < 1e-15);
        assert!((limit_cov(1.0, -1.0, &p) - (2.0 - 2f64.powf(1.5)) / 2.0).abs() < 1e-15);
    }
}
