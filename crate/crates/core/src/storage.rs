//! The fluid queue: netput, workload by reflection, and the rare-event
//! statistics of a single path (passage times, busy cycle, sojourn above a
//! level, scaled deviations).

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand_core::RngCore;

use crate::constants::borell_sup_bound;
use crate::error::{invalid, Error, Result};
use crate::fbm::{HurstParam, SamplePath, TimeGrid};

/// Queue primitives: arrivals `A(t) = lambda t + theta Z(t)` served at rate
/// `c`, with drift `mu = c - lambda`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub h: HurstParam,
    pub theta: f64,
    pub lambda_rate: f64,
    pub service_rate: f64,
    mu: f64,
}

impl ModelParams {
    pub fn new(h: HurstParam, theta: f64, lambda_rate: f64, service_rate: f64) -> Result<Self> {
        if !(theta > 0.0) || !theta.is_finite() {
            return Err(invalid("theta", format!("requires theta > 0, got {theta}")));
        }
        if !lambda_rate.is_finite() || !service_rate.is_finite() {
            return Err(invalid("lambda", "rates must be finite"));
        }
        if !(service_rate > lambda_rate) {
            return Err(invalid(
                "c",
                format!("requires c > λ (μ > 0), got c = {service_rate}, λ = {lambda_rate}"),
            ));
        }
        Ok(Self {
            h,
            theta,
            lambda_rate,
            service_rate,
            mu: service_rate - lambda_rate,
        })
    }

    /// Parameters specified by drift directly (`lambda = 0`, `c = mu`).
    pub fn with_drift(h: HurstParam, theta: f64, mu: f64) -> Result<Self> {
        Self::new(h, theta, 0.0, mu)
    }

    #[inline]
    pub fn mu(&self) -> f64 {
        self.mu
    }

    #[inline]
    pub fn hurst(&self) -> f64 {
        self.h.value()
    }

    /// Time scale `b^{2 - 1/H}` of the conditional limit.
    pub fn time_scale(&self, b: f64) -> f64 {
        libm::pow(b, 2.0 - 1.0 / self.hurst())
    }

    /// Space scale `b^{1 - 2H}` of the conditional limit.
    pub fn space_scale(&self, b: f64) -> f64 {
        libm::pow(b, 1.0 - 2.0 * self.hurst())
    }
}

/// `X(t) = -mu t + theta Z(t)` on the grid of `z`.
pub fn netput_path(z: &SamplePath, params: &ModelParams) -> SamplePath {
    netput_with_drift(z, params.theta, params.mu())
}

/// Netput with an explicit drift, which may be zero or negative.
pub fn netput_with_drift(z: &SamplePath, theta: f64, mu: f64) -> SamplePath {
    z.map(|t, v| -mu * t + theta * v)
}

/// Lindley recursion `W_{k+1} = max(W_k + X_{k+1} - X_k, 0)` from `W_0 = w_init`.
pub fn reflect(x: &SamplePath, w_init: f64) -> Result<SamplePath> {
    if !(w_init >= 0.0) {
        return Err(invalid(
            "w_init",
            format!("must be nonnegative, got {w_init}"),
        ));
    }
    let xs = x.values();
    let mut w = Vec::with_capacity(xs.len());
    let mut cur = w_init;
    w.push(cur);
    for pair in xs.windows(2) {
        cur = (cur + (pair[1] - pair[0])).max(0.0);
        w.push(cur);
    }
    Ok(SamplePath::from_parts(*x.grid(), w))
}

/// Workload at the origin from a reversed-time path, with a certificate for
/// the part of the supremum cut off by the finite window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StationaryStart {
    pub w0: f64,
    /// Upper bound on the probability that `sup_{t > T} (theta Z(t) - mu t)`
    /// exceeds `w0`.
    pub truncation_bound: f64,
}

/// `W(0) = sup_{t in [0, T]} (theta Z(t) - mu t)` for `z` sampled on `[0, T]`
/// in reversed time.
///
/// The omitted tail is bounded by applying Borell's inequality on the dyadic
/// blocks `[T 2^k, T 2^{k+1}]`, with `sup_constant` an upper estimate of
/// `E sup_{[0,1]} Z`. If `budget` is given and the bound exceeds it, the
/// window is reported as too short.
pub fn stationary_workload_origin(
    z: &SamplePath,
    params: &ModelParams,
    sup_constant: f64,
    budget: Option<f64>,
) -> Result<StationaryStart> {
    let grid = z.grid();
    if libm::fabs(grid.t_start()) > 1e-9 * grid.dt() {
        return Err(invalid("z", "reversed-time path must start at t = 0"));
    }
    let w0 = z
        .points()
        .map(|(t, v)| params.theta * v - params.mu() * t)
        .fold(f64::NEG_INFINITY, f64::max)
        .max(0.0);
    let truncation_bound = truncation_bound(w0, grid.t_end(), params, sup_constant);
    if let Some(budget) = budget {
        if truncation_bound > budget {
            return Err(Error::WindowTooShort(format!(
                "truncation bound {truncation_bound:.3e} exceeds budget {budget:.3e} at T = {}",
                grid.t_end()
            )));
        }
    }
    Ok(StationaryStart {
        w0,
        truncation_bound,
    })
}

/// Borell bound on `P(sup_{t > T} (theta Z(t) - mu t) > level)`.
pub fn truncation_bound(level: f64, t_window: f64, params: &ModelParams, sup_constant: f64) -> f64 {
    if !(t_window > 0.0) {
        return 1.0;
    }
    let mut total = 0.0;
    let mut lo = t_window;
    for _ in 0..128 {
        let hi = 2.0 * lo;
        let lambda = (level + params.mu() * lo) / params.theta;
        let term = borell_sup_bound(lambda, hi, params.h, sup_constant).bound;
        total += term;
        if total >= 1.0 {
            return 1.0;
        }
        if term < 1e-18 * total.max(1e-300) || term == 0.0 {
            break;
        }
        lo = hi;
    }
    total
}

/// Supremum of the netput between grid points for a Brownian netput.
///
/// Each cell is a Brownian bridge with variance `theta^2 dt`; its maximum is
/// drawn exactly given the endpoint values, so the result has the law of the
/// continuous-time supremum given the skeleton.
pub fn brownian_bridge_supremum<R: RngCore + ?Sized>(
    x: &[f64],
    theta: f64,
    dt: f64,
    rng: &mut R,
) -> f64 {
    bridge_supremum_and_hit(x, theta, dt, f64::INFINITY, rng).0
}

/// Bridge supremum together with the first grid index at the right end of
/// a cell whose maximum reaches `b` (or index 0 if `x[0] >= b`).
pub(crate) fn bridge_supremum_and_hit<R: RngCore + ?Sized>(
    x: &[f64],
    theta: f64,
    dt: f64,
    b: f64,
    rng: &mut R,
) -> (f64, Option<usize>) {
    let var = theta * theta * dt;
    let mut best = x[0];
    let mut hit = if x[0] >= b { Some(0) } else { None };
    for (j, pair) in x.windows(2).enumerate() {
        let (a, c) = (pair[0], pair[1]);
        let d = c - a;
        let m = 0.5 * (a + c + libm::sqrt(d * d - 2.0 * var * libm::log(open_unit(rng))));
        if hit.is_none() && m >= b {
            hit = Some(j + 1);
        }
        best = best.max(m);
    }
    (best, hit)
}

/// Uniform draw in `(0, 1]`.
pub(crate) fn open_unit<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 1.0) * (1.0 / (1u64 << 53) as f64)
}

/// First grid time with `X >= b`, or `None` if the level is never reached.
pub fn hitting_time(x: &SamplePath, b: f64) -> Option<f64> {
    x.values()
        .iter()
        .position(|&v| v >= b)
        .map(|k| x.grid().time(k))
}

/// Maximal interval around the origin on which the workload is positive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BusyCycle {
    pub tau_l: f64,
    pub tau_r: f64,
    pub censored_left: bool,
    pub censored_right: bool,
}

impl BusyCycle {
    pub fn duration(&self) -> f64 {
        self.tau_r - self.tau_l
    }
}

/// Busy cycle of `w` around `t = 0`. Zeros of the Lindley recursion are
/// exact, so the endpoints are the nearest grid points with `W == 0`; when
/// the window edge is reached first, the edge time is returned and flagged.
pub fn busy_cycle(w: &SamplePath) -> Result<BusyCycle> {
    let grid = w.grid();
    let origin = grid
        .index_of(0.0)
        .ok_or_else(|| Error::GridMisaligned("t = 0 is not a grid point".into()))?;
    let (l, r, cl, cr) = cycle_indices(w.values(), origin);
    Ok(BusyCycle {
        tau_l: grid.time(l),
        tau_r: grid.time(r),
        censored_left: cl,
        censored_right: cr,
    })
}

pub(crate) fn cycle_indices(w: &[f64], origin: usize) -> (usize, usize, bool, bool) {
    let left = w[..=origin].iter().rposition(|&v| v == 0.0);
    let right = w[origin..]
        .iter()
        .position(|&v| v == 0.0)
        .map(|k| k + origin);
    (
        left.unwrap_or(0),
        right.unwrap_or(w.len() - 1),
        left.is_none(),
        right.is_none(),
    )
}

/// `dt` times the number of grid points in `[tau_l, tau_r)` with `W > b`.
pub fn sojourn_above(w: &SamplePath, b: f64, tau_l: f64, tau_r: f64) -> Result<f64> {
    let grid = w.grid();
    let l = grid
        .index_of(tau_l)
        .ok_or_else(|| Error::GridMisaligned(format!("tau_L = {tau_l} is not a grid point")))?;
    let r = grid
        .index_of(tau_r)
        .ok_or_else(|| Error::GridMisaligned(format!("tau_R = {tau_r} is not a grid point")))?;
    Ok(sojourn_indices(w.values(), b, l, r) as f64 * grid.dt())
}

pub(crate) fn sojourn_indices(w: &[f64], b: f64, l: usize, r: usize) -> usize {
    w[l..r].iter().filter(|&&v| v > b).count()
}

/// Per-path rare-event statistics at level `b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CycleStats {
    pub tau_l: f64,
    pub tau_r: f64,
    pub overshoot: f64,
    pub v_b: f64,
    pub censored_left: bool,
    pub censored_right: bool,
}

impl CycleStats {
    /// Statistics of a two-sided workload path at level `b`.
    pub fn from_workload(w: &SamplePath, b: f64) -> Result<Self> {
        let grid = w.grid();
        let origin = grid
            .index_of(0.0)
            .ok_or_else(|| Error::GridMisaligned("t = 0 is not a grid point".into()))?;
        Ok(Self::from_values(w.values(), origin, grid, b))
    }

    pub(crate) fn from_values(w: &[f64], origin: usize, grid: &TimeGrid, b: f64) -> Self {
        let (l, r, cl, cr) = cycle_indices(w, origin);
        Self {
            tau_l: grid.time(l),
            tau_r: grid.time(r),
            overshoot: w[origin] - b,
            v_b: sojourn_indices(w, b, l, r) as f64 * grid.dt(),
            censored_left: cl,
            censored_right: cr,
        }
    }

    pub fn is_censored(&self) -> bool {
        self.censored_left || self.censored_right
    }

    pub const CSV_HEADER: &'static str = "tau_L,tau_R,overshoot,V_b,censored_L,censored_R";

    /// One CSV row in the column order of [`CycleStats::CSV_HEADER`].
    pub fn csv_row(&self) -> String {
        format!(
            "{:.16e},{:.16e},{:.16e},{:.16e},{},{}",
            self.tau_l,
            self.tau_r,
            self.overshoot,
            self.v_b,
            self.censored_left,
            self.censored_right
        )
    }
}

/// Workload path as CSV with header `t,W`.
pub fn workload_csv(w: &SamplePath) -> String {
    w.to_csv_as("W")
}

/// Which deviation path to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeviationKind {
    /// `Y^b(t) = b^{1-2H} (W(t b^{2-1/H}) - b)`.
    Workload,
    /// `b^{1-2H} X(t b^{2-1/H})`.
    Netput,
}

/// Scaled deviation on the natural rescaled grid (every source point kept,
/// times divided by `b^{2-1/H}`).
pub fn scaled_deviation_path(
    source: &SamplePath,
    b: f64,
    params: &ModelParams,
    kind: DeviationKind,
) -> Result<SamplePath> {
    if !(b > 0.0) {
        return Err(invalid("b", format!("must be positive, got {b}")));
    }
    let beta = params.time_scale(b);
    let grid = source.grid();
    let scaled = TimeGrid::new(grid.t_start() / beta, grid.dt() / beta, grid.n_points())?;
    let values = source
        .values()
        .iter()
        .map(|&v| deviation(v, b, params, kind))
        .collect();
    Ok(SamplePath::from_parts(scaled, values))
}

/// Scaled deviation resampled (nearest source point) onto `target`, a grid
/// in scaled time.
pub fn scaled_deviation_on(
    source: &SamplePath,
    b: f64,
    params: &ModelParams,
    kind: DeviationKind,
    target: TimeGrid,
) -> Result<SamplePath> {
    if !(b > 0.0) {
        return Err(invalid("b", format!("must be positive, got {b}")));
    }
    let beta = params.time_scale(b);
    let src = source.grid();
    let mut values = Vec::with_capacity(target.n_points());
    for t in target.times() {
        let k = src.nearest_index(t * beta).ok_or_else(|| {
            Error::WindowTooShort(format!(
                "scaled time {t} maps to {} outside the source window [{}, {}]",
                t * beta,
                src.t_start(),
                src.t_end()
            ))
        })?;
        values.push(deviation(source.values()[k], b, params, kind));
    }
    Ok(SamplePath::from_parts(target, values))
}

#[inline]
fn deviation(v: f64, b: f64, params: &ModelParams, kind: DeviationKind) -> f64 {
    let s = params.space_scale(b);
    match kind {
        DeviationKind::Workload => s * (v - b),
        DeviationKind::Netput => s * v,
    }
}
