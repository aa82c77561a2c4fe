//! Conditional Monte Carlo on the rare event `{W(0) > b}`.
//!
//! Two samplers are provided. Rejection draws stationary paths and keeps
//! those exceeding `b`; it is exact up to discretization and window
//! truncation. The endpoint-conditioned sampler pins the netput to `-b` at
//! `-t*` (a Gaussian conditioning, always accepted) and is only an
//! approximation of the rare-event law, flagged as such in its output.
//!
//! Every proposal `i` at level `b` is a pure function of
//! `(seed, b, i)`, so results do not depend on evaluation order.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::constants::{limit_constants, sup_expectation_estimate, t_star};
use crate::error::{invalid, Error, Result};
use crate::fbm::{fbm_covariance, FbmPathSampler, FgnGenerator, RngSeed, SamplePath, TimeGrid};
use crate::stats::{
    binomial_stderr, ks_test, ols, EmpiricalDistribution, KsResult, Moments, RegressionReport,
};
use crate::storage::{bridge_supremum_and_hit, truncation_bound, CycleStats, ModelParams};

/// Default smallest acceptance probability for which rejection is attempted.
pub const DEFAULT_ACCEPTANCE_FLOOR: f64 = 1e-5;
/// Largest path grid any sampler will allocate.
pub const MAX_GRID_POINTS: usize = 1 << 22;
/// Largest fraction of censored cycles tolerated by the clump regression.
pub const MAX_CENSORED_FRACTION: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplerKind {
    Rejection,
    EndpointConditioned,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub params: ModelParams,
    /// Ascending positive levels.
    pub b_grid: Vec<f64>,
    /// Accepted samples wanted per level.
    pub n_target: usize,
    /// Step as a fraction of the time scale `b^{2-1/H}`.
    pub dt_rule: f64,
    /// Window half-length in multiples of `t*(b)`.
    pub window_rule: f64,
    pub sampler: SamplerKind,
    pub seed: RngSeed,
    /// Exponent offset of the window `t* -/+ b^{H+r}`.
    pub r: f64,
    /// Lower bound on every window half-length, in time units.
    pub window_floor: f64,
    pub acceptance_floor: f64,
    pub max_proposals: u64,
}

impl ExperimentConfig {
    pub fn new(
        params: ModelParams,
        b_grid: Vec<f64>,
        n_target: usize,
        seed: RngSeed,
    ) -> Result<Self> {
        let cfg = Self {
            params,
            b_grid,
            n_target,
            dt_rule: 0.01,
            window_rule: 4.0,
            sampler: SamplerKind::Rejection,
            seed,
            r: 0.05,
            window_floor: 16.0,
            acceptance_floor: DEFAULT_ACCEPTANCE_FLOOR,
            max_proposals: 200_000_000,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.b_grid.is_empty() {
            return Err(invalid("b_grid", "must not be empty"));
        }
        if self.b_grid.iter().any(|&b| !(b > 0.0) || !b.is_finite()) {
            return Err(invalid("b_grid", "levels must be positive and finite"));
        }
        if self.b_grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(invalid("b_grid", "levels must be strictly ascending"));
        }
        if self.n_target < 100 {
            return Err(invalid(
                "n_target",
                format!("requires n_target >= 100, got {}", self.n_target),
            ));
        }
        if !(self.dt_rule > 0.0 && self.dt_rule <= 0.1) {
            return Err(invalid(
                "dt_rule",
                format!("requires 0 < dt_rule <= 0.1, got {}", self.dt_rule),
            ));
        }
        if !(self.window_rule > 0.0) || !self.window_rule.is_finite() {
            return Err(invalid("window_rule", "must be positive"));
        }
        if !self.r.is_finite() {
            return Err(invalid("r", "must be finite"));
        }
        if !(self.window_floor >= 0.0)
            || !(self.acceptance_floor > 0.0 && self.acceptance_floor < 1.0)
        {
            return Err(invalid("acceptance_floor", "must lie in (0, 1)"));
        }
        Ok(())
    }

    /// Grid step at level `b`.
    pub fn dt(&self, b: f64) -> f64 {
        if b > 0.0 {
            self.dt_rule * self.params.time_scale(b)
        } else {
            self.dt_rule
        }
    }

    /// Window half-length at level `b`.
    pub fn window(&self, b: f64) -> f64 {
        let ts = if b > 0.0 {
            t_star(b, &self.params).unwrap_or(0.0)
        } else {
            0.0
        };
        (self.window_rule * ts).max(self.window_floor)
    }

    fn level_seed(&self, b: f64) -> RngSeed {
        self.seed.derive(b.to_bits())
    }
}

/// Monte Carlo point estimate with its provenance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorReport {
    pub estimate: f64,
    pub stderr: f64,
    pub n_accepted: u64,
    pub n_proposed: u64,
    pub seed: RngSeed,
}

/// One accepted (or pinned) sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionedSample {
    pub w0: f64,
    pub overshoot: f64,
    /// First time the reversed netput reaches `b`.
    pub hitting_time: Option<f64>,
    /// Busy-cycle statistics; only available from two-sided paths.
    pub cycle: Option<CycleStats>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    pub b: f64,
    pub samples: Vec<ConditionedSample>,
    /// Workload paths, when requested.
    pub paths: Vec<SamplePath>,
    pub n_proposed: u64,
    pub dt: f64,
    /// Length of the past covered by each path.
    pub window: f64,
    /// Borell bound on the probability that the part of the past cut off by
    /// the window would have pushed the workload above `b`.
    pub truncation_bound: f64,
    /// Set for the endpoint-conditioned sampler.
    pub approximate: bool,
}

impl Ensemble {
    pub fn n_accepted(&self) -> u64 {
        self.samples.len() as u64
    }

    /// Scaled overshoots `b^{1-2H} (W(0) - b)`.
    pub fn scaled_overshoots(&self, params: &ModelParams) -> Vec<f64> {
        let s = params.space_scale(self.b);
        self.samples.iter().map(|x| s * x.overshoot).collect()
    }
}

/// A two-sided path passed to observers.
pub struct PathView<'a> {
    pub grid: &'a TimeGrid,
    pub origin: usize,
    pub netput: &'a [f64],
    pub workload: &'a [f64],
}

#[derive(Debug, Clone, Copy)]
enum Budget {
    Accepted(usize),
    Proposals(u64),
}

/// `E sup_{[0,1]} Z`, exact for Brownian motion and otherwise an upper
/// confidence value from a small pilot.
fn sup_constant(cfg: &ExperimentConfig) -> Result<f64> {
    let h = cfg.params.h;
    if h.is_brownian() {
        return Ok(libm::sqrt(2.0 / core::f64::consts::PI));
    }
    Ok(sup_expectation_estimate(h, 1.0, 1000, cfg.seed.derive(0x5u64))?.upper())
}

fn steps(length: f64, dt: f64) -> Result<usize> {
    let n = libm::ceil(length / dt - 1e-9).max(1.0);
    if n >= MAX_GRID_POINTS as f64 {
        return Err(Error::MemoryCap(format!(
            "{n} grid steps exceed the cap {MAX_GRID_POINTS}"
        )));
    }
    Ok(n as usize)
}

struct Counter<'a> {
    cfg: &'a ExperimentConfig,
    budget: Budget,
    proposed: u64,
    accepted: u64,
}

impl<'a> Counter<'a> {
    fn new(cfg: &'a ExperimentConfig, budget: Budget) -> Self {
        Self {
            cfg,
            budget,
            proposed: 0,
            accepted: 0,
        }
    }

    fn pilot(&self) -> u64 {
        libm::ceil(2.0 / self.cfg.acceptance_floor) as u64
    }

    fn more(&self) -> bool {
        match self.budget {
            Budget::Accepted(n) => {
                self.accepted < n as u64 && self.proposed < self.cfg.max_proposals
            }
            Budget::Proposals(n) => self.proposed < n,
        }
    }

    fn record(&mut self, accepted: bool, level: f64) -> Result<()> {
        self.proposed += 1;
        if accepted {
            self.accepted += 1;
        }
        if self.proposed == self.pilot() {
            let p = self.accepted as f64 / self.proposed as f64;
            let finishing = matches!(self.budget, Budget::Accepted(n) if self.accepted >= n as u64);
            if p < self.cfg.acceptance_floor && !finishing {
                return Err(Error::AcceptanceFloor {
                    level,
                    estimate: p,
                    floor: self.cfg.acceptance_floor,
                });
            }
        }
        Ok(())
    }
}

/// Rejection on the reversed netput `X̃(u) = theta Z(u) - mu u` over the past
/// window only, which is all the workload at the origin depends on. For
/// `H = 1/2` the supremum between grid points is drawn exactly from the
/// Brownian bridge law.
fn run_past_only(
    b: f64,
    cfg: &ExperimentConfig,
    budget: Budget,
    mut visit: impl FnMut(ConditionedSample),
) -> Result<(u64, f64, f64, usize)> {
    let p = &cfg.params;
    let dt = cfg.dt(b);
    let window = cfg.window(b);
    let n = steps(window, dt)?;
    let brownian = p.h.is_brownian();
    let mut generator = FgnGenerator::new(n, dt, p.h)?;
    let mut inc = vec![0.0; n];
    let mut x = vec![0.0; n + 1];
    let seed = cfg.level_seed(b);
    let mut counter = Counter::new(cfg, budget);
    while counter.more() {
        let mut rng = seed.stream(counter.proposed).rng();
        generator.sample_into(&mut rng, &mut inc);
        let mut z = 0.0;
        for (j, dz) in inc.iter().enumerate() {
            z += dz;
            x[j + 1] = p.theta * z - p.mu() * (j + 1) as f64 * dt;
        }
        let (sup, hit) = if brownian {
            bridge_supremum_and_hit(&x, p.theta, dt, b, &mut rng)
        } else {
            let mut best = 0.0f64;
            let mut hit = None;
            for (j, &v) in x.iter().enumerate() {
                if v >= b && hit.is_none() {
                    hit = Some(j);
                }
                best = best.max(v);
            }
            (best, hit)
        };
        let accepted = sup > b;
        if accepted {
            visit(ConditionedSample {
                w0: sup,
                overshoot: sup - b,
                hitting_time: hit.map(|j| j as f64 * dt),
                cycle: None,
            });
        }
        counter.record(accepted, b)?;
    }
    Ok((counter.proposed, dt, window, n))
}

struct TwoSidedLayout {
    dt: f64,
    n_minus: usize,
    n_plus: usize,
}

fn process_two_sided(
    z: &[f64],
    grid: &TimeGrid,
    params: &ModelParams,
    x: &mut Vec<f64>,
    w: &mut Vec<f64>,
) {
    x.clear();
    w.clear();
    let mut cur = 0.0;
    for (k, &zk) in z.iter().enumerate() {
        let xk = -params.mu() * grid.time(k) + params.theta * zk;
        if k > 0 {
            cur = (cur + xk - x[k - 1]).max(0.0);
        }
        x.push(xk);
        w.push(cur);
    }
}

fn hitting_from_two_sided(x: &[f64], origin: usize, dt: f64, b: f64) -> Option<f64> {
    (0..=origin)
        .find(|&j| -x[origin - j] >= b)
        .map(|j| j as f64 * dt)
}

fn run_two_sided_rejection(
    b: f64,
    cfg: &ExperimentConfig,
    budget: Budget,
    mut visit: impl FnMut(ConditionedSample, &PathView<'_>),
) -> Result<(u64, TwoSidedLayout)> {
    let p = &cfg.params;
    let dt = cfg.dt(b);
    let half = steps(cfg.window(b), dt)?;
    let mut sampler = FbmPathSampler::from_steps(half, half, dt, p.h)?;
    let grid = *sampler.grid();
    let origin = sampler.origin();
    let seed = cfg.level_seed(b).derive(2);
    let (mut z, mut x, mut w) = (Vec::new(), Vec::new(), Vec::new());
    let mut counter = Counter::new(cfg, budget);
    while counter.more() {
        let mut rng = seed.stream(counter.proposed).rng();
        sampler.sample_values(&mut rng, &mut z);
        process_two_sided(&z, &grid, p, &mut x, &mut w);
        let accepted = w[origin] > b;
        if accepted {
            let s = ConditionedSample {
                w0: w[origin],
                overshoot: w[origin] - b,
                hitting_time: hitting_from_two_sided(&x, origin, dt, b),
                cycle: Some(CycleStats::from_values(&w, origin, &grid, b)),
            };
            let view = PathView {
                grid: &grid,
                origin,
                netput: &x,
                workload: &w,
            };
            visit(s, &view);
        }
        counter.record(accepted, b)?;
    }
    Ok((
        counter.proposed,
        TwoSidedLayout {
            dt,
            n_minus: half,
            n_plus: half,
        },
    ))
}

fn run_endpoint(
    b: f64,
    cfg: &ExperimentConfig,
    n: usize,
    mut visit: impl FnMut(ConditionedSample, &PathView<'_>),
) -> Result<TwoSidedLayout> {
    let p = &cfg.params;
    let ts = t_star(b, p)?;
    let k_star = steps(ts, cfg.dt(b))?;
    let dt = ts / k_star as f64;
    let half = steps(cfg.window(b), dt)?.max(k_star);
    let mut sampler = FbmPathSampler::from_steps(half, half, dt, p.h)?;
    let grid = *sampler.grid();
    let origin = sampler.origin();
    let pin = origin - k_star;
    let t_pin = grid.time(pin);
    let var = fbm_covariance(t_pin, t_pin, p.h);
    let gain: Vec<f64> = grid
        .times()
        .map(|t| fbm_covariance(t, t_pin, p.h) / var)
        .collect();
    let z_pin = (-b - p.mu() * ts) / p.theta;
    let seed = cfg.level_seed(b).derive(3);
    let (mut z, mut x, mut w) = (Vec::new(), Vec::new(), Vec::new());
    for i in 0..n {
        let mut rng = seed.stream(i as u64).rng();
        sampler.sample_values(&mut rng, &mut z);
        let shift = z_pin - z[pin];
        for (zk, g) in z.iter_mut().zip(&gain) {
            *zk += g * shift;
        }
        z[pin] = z_pin;
        z[origin] = 0.0;
        process_two_sided(&z, &grid, p, &mut x, &mut w);
        let s = ConditionedSample {
            w0: w[origin],
            overshoot: w[origin] - b,
            hitting_time: hitting_from_two_sided(&x, origin, dt, b),
            cycle: Some(CycleStats::from_values(&w, origin, &grid, b)),
        };
        let view = PathView {
            grid: &grid,
            origin,
            netput: &x,
            workload: &w,
        };
        visit(s, &view);
    }
    Ok(TwoSidedLayout {
        dt,
        n_minus: half,
        n_plus: half,
    })
}

/// Options controlling what an ensemble records.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EnsembleOptions {
    /// Keep every workload path (memory grows with `n_target * grid`).
    pub keep_paths: bool,
    /// Draw two-sided paths so busy-cycle statistics are available; the
    /// rejection sampler otherwise only simulates the past.
    pub two_sided: bool,
}

#[allow(clippy::too_many_arguments)]
fn finish_ensemble(
    b: f64,
    cfg: &ExperimentConfig,
    samples: Vec<ConditionedSample>,
    paths: Vec<SamplePath>,
    n_proposed: u64,
    dt: f64,
    window: f64,
    approximate: bool,
) -> Result<Ensemble> {
    let c = sup_constant(cfg)?;
    Ok(Ensemble {
        b,
        samples,
        paths,
        n_proposed,
        dt,
        window,
        truncation_bound: truncation_bound(b, window, &cfg.params, c),
        approximate,
    })
}

/// Exact conditioning on `{W(0) > b}` by rejection, stopping at
/// `cfg.n_target` accepted samples.
pub fn rejection_conditional_ensemble(
    b: f64,
    cfg: &ExperimentConfig,
    opts: EnsembleOptions,
) -> Result<Ensemble> {
    rejection_ensemble_with(b, cfg, opts, Budget::Accepted(cfg.n_target))
}

/// Rejection with a fixed number of proposals.
pub fn rejection_ensemble_from_proposals(
    b: f64,
    cfg: &ExperimentConfig,
    opts: EnsembleOptions,
    n_proposals: u64,
) -> Result<Ensemble> {
    rejection_ensemble_with(b, cfg, opts, Budget::Proposals(n_proposals))
}

fn rejection_ensemble_with(
    b: f64,
    cfg: &ExperimentConfig,
    opts: EnsembleOptions,
    budget: Budget,
) -> Result<Ensemble> {
    cfg.validate()?;
    if !(b >= 0.0) {
        return Err(invalid("b", format!("must be nonnegative, got {b}")));
    }
    let mut samples = Vec::new();
    let mut paths = Vec::new();
    if opts.two_sided || opts.keep_paths {
        let (n_proposed, layout) = run_two_sided_rejection(b, cfg, budget, |s, view| {
            samples.push(s);
            if opts.keep_paths {
                paths.push(SamplePath::from_parts(*view.grid, view.workload.to_vec()));
            }
        })?;
        let window = layout.n_minus as f64 * layout.dt;
        let _ = layout.n_plus;
        finish_ensemble(b, cfg, samples, paths, n_proposed, layout.dt, window, false)
    } else {
        let (n_proposed, dt, _, n) = run_past_only(b, cfg, budget, |s| samples.push(s))?;
        finish_ensemble(b, cfg, samples, paths, n_proposed, dt, n as f64 * dt, false)
    }
}

/// Paths pinned to `X(-t*) = -b` by exact Gaussian conditioning. Always
/// two-sided; the result is flagged approximate.
pub fn endpoint_conditioned_ensemble(
    b: f64,
    cfg: &ExperimentConfig,
    opts: EnsembleOptions,
) -> Result<Ensemble> {
    cfg.validate()?;
    let mut samples = Vec::with_capacity(cfg.n_target);
    let mut paths = Vec::new();
    let layout = run_endpoint(b, cfg, cfg.n_target, |s, view| {
        samples.push(s);
        if opts.keep_paths {
            paths.push(SamplePath::from_parts(*view.grid, view.workload.to_vec()));
        }
    })?;
    let n = samples.len() as u64;
    finish_ensemble(
        b,
        cfg,
        samples,
        paths,
        n,
        layout.dt,
        layout.n_minus as f64 * layout.dt,
        true,
    )
}

/// Ensemble at `b` using the configured sampler; with the rejection sampler
/// an infeasible level falls back to endpoint conditioning.
pub fn conditional_ensemble(
    b: f64,
    cfg: &ExperimentConfig,
    opts: EnsembleOptions,
) -> Result<Ensemble> {
    match cfg.sampler {
        SamplerKind::EndpointConditioned => endpoint_conditioned_ensemble(b, cfg, opts),
        SamplerKind::Rejection => match rejection_conditional_ensemble(b, cfg, opts) {
            Err(Error::AcceptanceFloor { .. }) => endpoint_conditioned_ensemble(b, cfg, opts),
            other => other,
        },
    }
}

/// One draw of the limit process.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitSample {
    pub y0: f64,
    /// Time spent above zero.
    pub v: f64,
    /// `Y(t) - Y(0)` at the requested probe times.
    pub increments: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LimitEnsemble {
    pub samples: Vec<LimitSample>,
    pub probe_times: Vec<f64>,
    /// Horizon actually used (after any extension).
    pub horizon: f64,
    pub dt: f64,
    /// Fraction of samples with `Y(-T) < 0` and `Y(T) < 0`.
    pub negative_end_fraction: f64,
}

/// Required fraction of limit paths that end below zero on both sides.
pub const LIMIT_END_FRACTION: f64 = 0.999;

/// Samples `Y(t) = Y(0) - kappa1 |t|^{2H} + theta Z(t)` on `[-T, T]` with
/// `Y(0) ~ Exp(kappa2)` independent of `Z`, doubling `T` until both ends are
/// negative in at least 99.9% of the paths.
pub fn limit_process_ensemble(
    cfg: &ExperimentConfig,
    horizon: f64,
    probe_times: &[f64],
) -> Result<LimitEnsemble> {
    cfg.validate()?;
    let p = &cfg.params;
    let c = limit_constants(p)?;
    if !(horizon > 0.0) {
        return Err(invalid("T", "horizon must be positive"));
    }
    let dt = cfg.dt_rule;
    let mut t_end = horizon;
    loop {
        let half = steps(t_end, dt)?;
        if 2 * half + 1 > MAX_GRID_POINTS {
            return Err(Error::MemoryCap(format!(
                "horizon {t_end} needs {} grid points",
                2 * half + 1
            )));
        }
        let mut sampler = FbmPathSampler::from_steps(half, half, dt, p.h)?;
        let grid = *sampler.grid();
        let origin = sampler.origin();
        let probes: Vec<usize> = probe_times
            .iter()
            .map(|&t| {
                grid.index_of(t).ok_or_else(|| {
                    Error::GridMisaligned(format!("probe time {t} is not on the grid"))
                })
            })
            .collect::<Result<_>>()?;
        let drift: Vec<f64> = grid
            .times()
            .map(|t| c.kappa1 * crate::fbm::abs_pow(t, 2.0 * p.hurst()))
            .collect();
        let seed = cfg.seed.derive(0x11);
        let mut z = Vec::new();
        let mut samples = Vec::with_capacity(cfg.n_target);
        let mut negative_ends = 0usize;
        for i in 0..cfg.n_target {
            let mut rng = seed.stream(i as u64).rng();
            let y0 = -libm::log(crate::storage::open_unit(&mut rng)) / c.kappa2;
            sampler.sample_values(&mut rng, &mut z);
            let y = |k: usize| y0 - drift[k] + p.theta * z[k];
            let above = (0..z.len()).filter(|&k| y(k) > 0.0).count();
            if y(0) < 0.0 && y(z.len() - 1) < 0.0 {
                negative_ends += 1;
            }
            samples.push(LimitSample {
                y0,
                v: above as f64 * dt,
                increments: probes.iter().map(|&k| y(k) - y(origin)).collect(),
            });
        }
        let fraction = negative_ends as f64 / cfg.n_target as f64;
        if fraction >= LIMIT_END_FRACTION {
            return Ok(LimitEnsemble {
                samples,
                probe_times: probe_times.to_vec(),
                horizon: t_end,
                dt,
                negative_end_fraction: fraction,
            });
        }
        t_end *= 2.0;
    }
}

/// Kolmogorov–Smirnov comparison of scaled overshoots with `Exp(kappa2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct OvershootTest {
    pub ks: KsResult,
    pub distribution: EmpiricalDistribution,
    pub n_proposed: u64,
    pub approximate: bool,
}

/// One-sample KS test of `samples` against `Exp(rate)`.
pub fn exponential_ks(samples: Vec<f64>, rate: f64) -> Result<(KsResult, EmpiricalDistribution)> {
    if samples.len() < 100 {
        return Err(Error::TooFewSamples {
            needed: 100,
            got: samples.len(),
        });
    }
    let dist = EmpiricalDistribution::new(samples)?;
    let ks = ks_test(&dist, |x| {
        if x <= 0.0 {
            0.0
        } else {
            -libm::expm1(-rate * x)
        }
    });
    Ok((ks, dist))
}

/// Tests the scaled overshoot at level `b` against its exponential limit.
pub fn overshoot_test(b: f64, cfg: &ExperimentConfig) -> Result<OvershootTest> {
    let e = conditional_ensemble(b, cfg, EnsembleOptions::default())?;
    overshoot_test_on(&e, cfg)
}

/// [`overshoot_test`] on an ensemble that is already available.
pub fn overshoot_test_on(e: &Ensemble, cfg: &ExperimentConfig) -> Result<OvershootTest> {
    let kappa2 = limit_constants(&cfg.params)?.kappa2;
    let (ks, distribution) = exponential_ks(e.scaled_overshoots(&cfg.params), kappa2)?;
    Ok(OvershootTest {
        ks,
        distribution,
        n_proposed: e.n_proposed,
        approximate: e.approximate,
    })
}

/// Median sojourn above the level at one `b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClumpLevel {
    pub b: f64,
    pub median: f64,
    pub median_ci: (f64, f64),
    pub n_uncensored: usize,
    pub censored_fraction: f64,
    pub n_proposed: u64,
    pub approximate: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClumpReport {
    pub levels: Vec<ClumpLevel>,
    pub regression: RegressionReport,
    /// `2 - 1/H`.
    pub target_slope: f64,
}

/// Median of `V^b` over uncensored cycles at one level.
pub fn clump_level(b: f64, cfg: &ExperimentConfig) -> Result<ClumpLevel> {
    let opts = EnsembleOptions {
        keep_paths: false,
        two_sided: true,
    };
    let e = conditional_ensemble(b, cfg, opts)?;
    let total = e.samples.len();
    let v: Vec<f64> = e
        .samples
        .iter()
        .filter_map(|s| s.cycle)
        .filter(|c| !c.is_censored())
        .map(|c| c.v_b)
        .collect();
    let censored_fraction = if total == 0 {
        1.0
    } else {
        1.0 - v.len() as f64 / total as f64
    };
    if censored_fraction > MAX_CENSORED_FRACTION {
        return Err(Error::CensoredFraction {
            level: b,
            fraction: censored_fraction,
            limit: MAX_CENSORED_FRACTION,
        });
    }
    let n_uncensored = v.len();
    let dist = EmpiricalDistribution::new(v)?;
    Ok(ClumpLevel {
        b,
        median: dist.median(),
        median_ci: dist.median_ci(),
        n_uncensored,
        censored_fraction,
        n_proposed: e.n_proposed,
        approximate: e.approximate,
    })
}

/// Regression of `log median V^b` on `log b` over `cfg.b_grid`. The
/// expected slope is `2 - 1/H`.
pub fn clump_scaling_regression(cfg: &ExperimentConfig) -> Result<ClumpReport> {
    cfg.validate()?;
    if cfg.b_grid.len() < 3 {
        return Err(invalid(
            "b_grid",
            "clump regression needs at least 3 levels",
        ));
    }
    let levels = cfg
        .b_grid
        .iter()
        .map(|&b| clump_level(b, cfg))
        .collect::<Result<Vec<_>>>()?;
    clump_regression_from_levels(levels, cfg.params.hurst())
}

/// Fits the regression to already computed levels.
pub fn clump_regression_from_levels(levels: Vec<ClumpLevel>, h: f64) -> Result<ClumpReport> {
    if levels.iter().any(|l| !(l.median > 0.0)) {
        return Err(invalid(
            "levels",
            "medians must be positive to take logarithms",
        ));
    }
    let x: Vec<f64> = levels.iter().map(|l| libm::log(l.b)).collect();
    let y: Vec<f64> = levels.iter().map(|l| libm::log(l.median)).collect();
    let se: Vec<f64> = levels
        .iter()
        .map(|l| {
            let lo = libm::log(l.median_ci.0.max(f64::MIN_POSITIVE));
            let hi = libm::log(l.median_ci.1.max(f64::MIN_POSITIVE));
            (hi - lo) / (2.0 * crate::stats::Z95)
        })
        .collect();
    let regression = ols(&x, &y, Some(&se))?;
    Ok(ClumpReport {
        levels,
        regression,
        target_slope: 2.0 - 1.0 / h,
    })
}

/// Fraction of conditioned paths whose passage time misses `t*` by more
/// than `eps b^{H+r}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HittingRow {
    pub b: f64,
    pub t_star: f64,
    pub fraction: f64,
    pub stderr: f64,
    pub n_accepted: u64,
    pub n_proposed: u64,
    pub approximate: bool,
}

pub fn hitting_concentration(cfg: &ExperimentConfig, eps: f64) -> Result<Vec<HittingRow>> {
    cfg.validate()?;
    if !(eps > 0.0) {
        return Err(invalid("eps", "must be positive"));
    }
    let p = &cfg.params;
    cfg.b_grid
        .iter()
        .map(|&b| {
            let e = conditional_ensemble(b, cfg, EnsembleOptions::default())?;
            let ts = t_star(b, p)?;
            let tol = eps * libm::pow(b, p.hurst() + cfg.r);
            let n = e.samples.len() as u64;
            let misses = e
                .samples
                .iter()
                .filter(|s| s.hitting_time.is_none_or(|t| libm::fabs(t - ts) > tol))
                .count() as u64;
            Ok(HittingRow {
                b,
                t_star: ts,
                fraction: if n == 0 {
                    0.0
                } else {
                    misses as f64 / n as f64
                },
                stderr: binomial_stderr(misses, n),
                n_accepted: n,
                n_proposed: e.n_proposed,
                approximate: e.approximate,
            })
        })
        .collect()
}

/// Crude Monte Carlo estimate of `P(W(0) > b)` from `n_proposals` stationary
/// paths.
pub fn tail_probability_estimate(
    b: f64,
    cfg: &ExperimentConfig,
    n_proposals: u64,
) -> Result<EstimatorReport> {
    let e = rejection_ensemble_from_proposals(b, cfg, EnsembleOptions::default(), n_proposals)?;
    let k = e.n_accepted();
    let n = e.n_proposed;
    Ok(EstimatorReport {
        estimate: k as f64 / n as f64,
        stderr: binomial_stderr(k, n),
        n_accepted: k,
        n_proposed: n,
        seed: cfg.level_seed(b),
    })
}

/// One row of the mean deviation table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanPathRow {
    pub t: f64,
    pub ensemble_mean: f64,
    pub target: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeanPathCheck {
    pub rows: Vec<MeanPathRow>,
    pub n_accepted: u64,
    pub n_proposed: u64,
    pub approximate: bool,
}

impl MeanPathCheck {
    pub fn max_abs_deviation(&self, t_max: f64) -> f64 {
        self.rows
            .iter()
            .filter(|r| libm::fabs(r.t) <= t_max)
            .map(|r| libm::fabs(r.ensemble_mean - r.target))
            .fold(0.0, f64::max)
    }
}

/// Ensemble mean of `Y^b(t) - Y^b(0)` at the scaled times `times` against
/// the limit drift `-kappa1 |t|^{2H}`.
pub fn mean_path_check(b: f64, cfg: &ExperimentConfig, times: &[f64]) -> Result<MeanPathCheck> {
    cfg.validate()?;
    let p = &cfg.params;
    let c = limit_constants(p)?;
    let beta = p.time_scale(b);
    let scale = p.space_scale(b);
    let mut acc = vec![Moments::default(); times.len()];
    let mut index: Option<Vec<usize>> = None;
    let mut failure = None;
    let mut visit = |_: ConditionedSample, view: &PathView<'_>| {
        if index.is_none() {
            let idx: Option<Vec<usize>> = times
                .iter()
                .map(|&t| view.grid.nearest_index(t * beta))
                .collect();
            match idx {
                Some(v) => index = Some(v),
                None => {
                    failure.get_or_insert(Error::WindowTooShort(format!(
                        "scaled times up to {} exceed the path window",
                        times.iter().fold(0.0f64, |m, t| m.max(libm::fabs(*t)))
                    )));
                    index = Some(Vec::new());
                }
            }
        }
        let idx = index.as_ref().unwrap();
        let w0 = view.workload[view.origin];
        for (m, &k) in acc.iter_mut().zip(idx) {
            m.push(scale * (view.workload[k] - w0));
        }
    };
    let (n_accepted, n_proposed, approximate) = match cfg.sampler {
        SamplerKind::EndpointConditioned => {
            run_endpoint(b, cfg, cfg.n_target, &mut visit)?;
            (cfg.n_target as u64, cfg.n_target as u64, true)
        }
        SamplerKind::Rejection => {
            let mut accepted = 0u64;
            let (n, _) =
                run_two_sided_rejection(b, cfg, Budget::Accepted(cfg.n_target), |s, v| {
                    accepted += 1;
                    visit(s, v)
                })?;
            (accepted, n, false)
        }
    };
    if let Some(e) = failure {
        return Err(e);
    }
    let rows = times
        .iter()
        .zip(&acc)
        .map(|(&t, m)| MeanPathRow {
            t,
            ensemble_mean: m.mean(),
            target: -c.kappa1 * crate::fbm::abs_pow(t, 2.0 * p.hurst()),
            stderr: m.stderr(),
        })
        .collect();
    Ok(MeanPathCheck {
        rows,
        n_accepted,
        n_proposed,
        approximate,
    })
}

/// `E(Ŷ^b(s) | X(-t_obs) = x_obs)` for an arbitrary observation time.
pub fn cond_mean_given_netput(s: f64, b: f64, params: &ModelParams, t_obs: f64, x_obs: f64) -> f64 {
    let u = params.time_scale(b) * s;
    let ratio = fbm_covariance(-t_obs, u, params.h) / fbm_covariance(-t_obs, -t_obs, params.h);
    params.space_scale(b) * ((x_obs - params.mu() * t_obs) * ratio - params.mu() * u)
}

/// Ensemble mean and standard error of the scaled netput `Ŷ^b(s)` at the
/// scaled times `times`, from the endpoint-conditioned sampler.
pub fn endpoint_netput_means(
    b: f64,
    cfg: &ExperimentConfig,
    times: &[f64],
) -> Result<Vec<(f64, f64)>> {
    cfg.validate()?;
    let p = &cfg.params;
    let beta = p.time_scale(b);
    let scale = p.space_scale(b);
    let mut acc = vec![Moments::default(); times.len()];
    let mut idx: Vec<usize> = Vec::new();
    let mut missing = false;
    run_endpoint(b, cfg, cfg.n_target, |_, view| {
        if idx.is_empty() {
            for &t in times {
                match view.grid.nearest_index(t * beta) {
                    Some(k) => idx.push(k),
                    None => missing = true,
                }
            }
        }
        if missing {
            return;
        }
        for (m, &k) in acc.iter_mut().zip(&idx) {
            m.push(scale * view.netput[k]);
        }
    })?;
    if missing {
        return Err(Error::WindowTooShort(
            "scaled times exceed the path window".into(),
        ));
    }
    Ok(acc.iter().map(|m| (m.mean(), m.stderr())).collect())
}
