//! Fractional Brownian motion: covariance primitives, exact fractional
//! Gaussian noise synthesis by circulant embedding, and a dense-factorization
//! sampler used as the reference generator on small grids.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, Error, Result};
use crate::fft::{Complex, Fft};
use crate::linalg::{cholesky_with_jitter, Matrix};

/// Largest grid accepted by the dense exact sampler by default.
pub const EXACT_SAMPLER_CAP: usize = 4096;

/// Relative size of a negative circulant eigenvalue that is treated as
/// round-off and clamped to zero.
const EIGENVALUE_TOLERANCE: f64 = 1e-10;

/// Hurst (self-similarity) index, `0 < H < 1`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct HurstParam(f64);

impl HurstParam {
    pub fn new(h: f64) -> Result<Self> {
        if h > 0.0 && h < 1.0 {
            Ok(Self(h))
        } else {
            Err(Error::InvalidHurst(h))
        }
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }

    /// Checks `1/2 <= H < 1`, the range on which the limit-theorem
    /// quantities are defined (with `H = 1/2` the Brownian reduction).
    pub fn require_limit_range(self) -> Result<Self> {
        if self.0 >= 0.5 {
            Ok(self)
        } else {
            Err(Error::HurstOutsideLimitRange(self.0))
        }
    }

    /// Whether this is the Brownian case `H = 1/2`.
    pub fn is_brownian(self) -> bool {
        self.0 == 0.5
    }
}

/// Uniform time grid `t_start + k * dt`, `k = 0..n_points`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    t_start: f64,
    dt: f64,
    n_points: usize,
}

impl TimeGrid {
    pub fn new(t_start: f64, dt: f64, n_points: usize) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(invalid(
                "dt",
                format!("must be positive and finite, got {dt}"),
            ));
        }
        if n_points == 0 {
            return Err(invalid("n_points", "must be at least 1"));
        }
        if !t_start.is_finite() {
            return Err(invalid("t_start", "must be finite"));
        }
        Ok(Self {
            t_start,
            dt,
            n_points,
        })
    }

    #[inline]
    pub fn t_start(&self) -> f64 {
        self.t_start
    }

    #[inline]
    pub fn dt(&self) -> f64 {
        self.dt
    }

    #[inline]
    pub fn n_points(&self) -> usize {
        self.n_points
    }

    #[inline]
    pub fn time(&self, k: usize) -> f64 {
        self.t_start + k as f64 * self.dt
    }

    pub fn t_end(&self) -> f64 {
        self.time(self.n_points - 1)
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_points).map(move |k| self.time(k))
    }

    /// Index of the grid point closest to `t`, or `None` if `t` lies more
    /// than half a step outside the grid.
    pub fn nearest_index(&self, t: f64) -> Option<usize> {
        let x = (t - self.t_start) / self.dt;
        let k = libm::round(x);
        if k < 0.0 || k > (self.n_points - 1) as f64 {
            return None;
        }
        Some(k as usize)
    }

    /// Index of the grid point equal to `t` up to `1e-9` of a step.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let k = self.nearest_index(t)?;
        if libm::fabs(self.time(k) - t) <= 1e-9 * self.dt {
            Some(k)
        } else {
            None
        }
    }
}

/// A real-valued function sampled on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePath {
    grid: TimeGrid,
    values: Vec<f64>,
}

impl SamplePath {
    pub fn new(grid: TimeGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_points() {
            return Err(invalid(
                "values",
                format!(
                    "length {} does not match grid size {}",
                    values.len(),
                    grid.n_points()
                ),
            ));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(invalid("values", format!("non-finite value at index {k}")));
        }
        Ok(Self { grid, values })
    }

    pub(crate) fn from_parts(grid: TimeGrid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.n_points());
        Self { grid, values }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `(t, value)` pairs in grid order.
    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.values
            .iter()
            .enumerate()
            .map(move |(k, &v)| (self.grid.time(k), v))
    }

    /// Value at the grid point nearest to `t`.
    pub fn value_near(&self, t: f64) -> Option<f64> {
        self.grid.nearest_index(t).map(|k| self.values[k])
    }

    /// Applies `f(t, value)` pointwise on the same grid.
    pub fn map(&self, mut f: impl FnMut(f64, f64) -> f64) -> SamplePath {
        let values = self.points().map(|(t, v)| f(t, v)).collect();
        SamplePath::from_parts(self.grid, values)
    }

    /// CSV with header `t,value` and 17 significant digits per float.
    pub fn to_csv(&self) -> String {
        self.to_csv_as("value")
    }

    /// CSV with header `t,<column>`.
    pub fn to_csv_as(&self, column: &str) -> String {
        use core::fmt::Write;
        let mut out = format!("t,{column}\n");
        for (t, v) in self.points() {
            let _ = writeln!(out, "{t:.16e},{v:.16e}");
        }
        out
    }
}

/// Seed plus stream index for the counter-based generator: the output is a
/// pure function of the pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct RngSeed {
    pub seed: u64,
    pub stream_index: u64,
}

impl RngSeed {
    pub const fn new(seed: u64, stream_index: u64) -> Self {
        Self { seed, stream_index }
    }

    /// ChaCha8 keyed by `seed`, positioned on stream `stream_index`.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_index);
        rng
    }

    /// Same key, different stream.
    pub const fn stream(self, stream_index: u64) -> Self {
        Self {
            seed: self.seed,
            stream_index,
        }
    }

    /// Independent key derived from this one and a tag (e.g. a level index).
    pub fn derive(self, tag: u64) -> Self {
        Self {
            seed: splitmix64(self.seed ^ splitmix64(tag.wrapping_add(0x5851_f42d_4c95_7f2d))),
            stream_index: self.stream_index,
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[inline]
pub(crate) fn std_normal<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// `E Z(t) Z(s) = (|t|^{2H} + |s|^{2H} - |t - s|^{2H}) / 2`.
pub fn fbm_covariance(t: f64, s: f64, h: HurstParam) -> f64 {
    let two_h = 2.0 * h.value();
    0.5 * (abs_pow(t, two_h) + abs_pow(s, two_h) - abs_pow(t - s, two_h))
}

#[inline]
pub(crate) fn abs_pow(x: f64, p: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        libm::pow(libm::fabs(x), p)
    }
}

/// Autocovariance of fractional Gaussian noise with step `dt` at lag `k`.
pub fn fgn_autocovariance(k: i64, dt: f64, h: HurstParam) -> Result<f64> {
    if k < 0 {
        return Err(Error::NegativeLag(k));
    }
    Ok(libm::pow(dt, 2.0 * h.value()) * unit_fgn_autocovariance(k as u64, h))
}

fn unit_fgn_autocovariance(k: u64, h: HurstParam) -> f64 {
    let two_h = 2.0 * h.value();
    let k = k as f64;
    0.5 * (abs_pow(k + 1.0, two_h) + abs_pow(k - 1.0, two_h) - 2.0 * abs_pow(k, two_h))
}

/// Exact fractional Gaussian noise of fixed length.
///
/// For `H != 1/2` this is the circulant embedding (Davies–Harte / Wood–Chan)
/// of the autocovariance, with the square-root eigenvalues cached so repeated
/// draws cost one FFT each. For `H = 1/2` the increments are independent and
/// are drawn directly.
#[derive(Debug, Clone)]
pub struct FgnGenerator {
    n: usize,
    scale: f64,
    method: Method,
}

#[derive(Debug, Clone)]
enum Method {
    Independent,
    Circulant {
        sqrt_eigen: Vec<f64>,
        fft: Fft,
        buf: Vec<Complex>,
    },
}

impl FgnGenerator {
    pub fn new(n: usize, dt: f64, h: HurstParam) -> Result<Self> {
        if n == 0 {
            return Err(invalid("n", "must be at least 1"));
        }
        if !(dt > 0.0) {
            return Err(invalid("dt", format!("must be positive, got {dt}")));
        }
        let scale = libm::pow(dt, h.value());
        if h.is_brownian() {
            return Ok(Self {
                n,
                scale,
                method: Method::Independent,
            });
        }
        let half = n.next_power_of_two().max(1);
        let m = 2 * half;
        let mut row = vec![Complex::default(); m];
        for (j, slot) in row.iter_mut().enumerate() {
            let lag = if j <= half { j } else { m - j };
            slot.re = unit_fgn_autocovariance(lag as u64, h);
        }
        let fft = Fft::new(m);
        fft.forward(&mut row);
        let max = row.iter().fold(0.0f64, |acc, c| acc.max(c.re));
        let mut sqrt_eigen = Vec::with_capacity(m);
        for c in &row {
            let lambda = c.re;
            if lambda < 0.0 {
                if -lambda > EIGENVALUE_TOLERANCE * max {
                    return Err(Error::NegativeEigenvalue {
                        value: lambda,
                        relative: -lambda / max,
                    });
                }
                sqrt_eigen.push(0.0);
            } else {
                sqrt_eigen.push(libm::sqrt(lambda / m as f64));
            }
        }
        Ok(Self {
            n,
            scale,
            method: Method::Circulant {
                sqrt_eigen,
                fft,
                buf: vec![Complex::default(); m],
            },
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Fills `out` (of length `n`) with one draw.
    pub fn sample_into<R: RngCore + ?Sized>(&mut self, rng: &mut R, out: &mut [f64]) {
        assert_eq!(out.len(), self.n);
        let scale = self.scale;
        match &mut self.method {
            Method::Independent => {
                for x in out.iter_mut() {
                    *x = scale * std_normal(rng);
                }
            }
            Method::Circulant {
                sqrt_eigen,
                fft,
                buf,
            } => {
                let m = buf.len();
                let half = m / 2;
                buf[0] = Complex::new(sqrt_eigen[0] * std_normal(rng), 0.0);
                buf[half] = Complex::new(sqrt_eigen[half] * std_normal(rng), 0.0);
                for k in 1..half {
                    let s = sqrt_eigen[k] * core::f64::consts::FRAC_1_SQRT_2;
                    let re = s * std_normal(rng);
                    let im = s * std_normal(rng);
                    buf[k] = Complex::new(re, im);
                    buf[m - k] = Complex::new(re, -im);
                }
                fft.forward(buf);
                for (x, c) in out.iter_mut().zip(buf.iter()) {
                    *x = scale * c.re;
                }
            }
        }
    }

    pub fn sample<R: RngCore + ?Sized>(&mut self, rng: &mut R) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        self.sample_into(rng, &mut out);
        out
    }
}

/// `n` fractional Gaussian noise increments with step `dt`, determined by
/// `seed`.
pub fn sample_fgn(n: usize, dt: f64, h: HurstParam, seed: RngSeed) -> Result<Vec<f64>> {
    let mut generator = FgnGenerator::new(n, dt, h)?;
    Ok(generator.sample(&mut seed.rng()))
}

/// fBM on an arbitrary uniform grid by dense Cholesky factorization of the
/// covariance. Grid points at `t = 0` are pinned to zero.
#[derive(Debug, Clone)]
pub struct ExactFbmSampler {
    grid: TimeGrid,
    free: Vec<usize>,
    factor: Matrix,
}

impl ExactFbmSampler {
    pub fn new(grid: TimeGrid, h: HurstParam) -> Result<Self> {
        Self::with_cap(grid, h, EXACT_SAMPLER_CAP)
    }

    pub fn with_cap(grid: TimeGrid, h: HurstParam, cap: usize) -> Result<Self> {
        if grid.n_points() > cap {
            return Err(Error::GridTooLarge {
                n: grid.n_points(),
                cap,
            });
        }
        let free: Vec<usize> = (0..grid.n_points())
            .filter(|&k| libm::fabs(grid.time(k)) > 1e-12 * grid.dt())
            .collect();
        let cov = Matrix::from_fn(free.len(), free.len(), |i, j| {
            fbm_covariance(grid.time(free[i]), grid.time(free[j]), h)
        });
        let factor = cholesky_with_jitter(&cov)?;
        Ok(Self { grid, free, factor })
    }

    pub fn sample<R: RngCore + ?Sized>(&self, rng: &mut R) -> SamplePath {
        let m = self.free.len();
        let z: Vec<f64> = (0..m).map(|_| std_normal(rng)).collect();
        let mut values = vec![0.0; self.grid.n_points()];
        for (i, &k) in self.free.iter().enumerate() {
            let row = self.factor.row(i);
            values[k] = crate::linalg::dot(&row[..=i], &z[..=i]);
        }
        SamplePath::from_parts(self.grid, values)
    }
}

/// Exact fBM on `grid` (at most [`EXACT_SAMPLER_CAP`] points).
pub fn sample_fbm_exact_small(grid: TimeGrid, h: HurstParam, seed: RngSeed) -> Result<SamplePath> {
    Ok(ExactFbmSampler::new(grid, h)?.sample(&mut seed.rng()))
}

/// fBM on `[-t_minus, t_plus]` built from one contiguous fGN sequence and
/// re-anchored so the value at `t = 0` is exactly zero. This keeps the
/// cross-covariance between past and future values.
#[derive(Debug, Clone)]
pub struct FbmPathSampler {
    grid: TimeGrid,
    origin: usize,
    generator: FgnGenerator,
    increments: Vec<f64>,
}

impl FbmPathSampler {
    /// Two-sided window; both half-lengths must be positive multiples of `dt`.
    pub fn two_sided(t_minus: f64, t_plus: f64, dt: f64, h: HurstParam) -> Result<Self> {
        if !(t_minus > 0.0) || !(t_plus > 0.0) {
            return Err(invalid("window", "T_minus and T_plus must be positive"));
        }
        let n_minus = aligned_steps(t_minus, dt, "T_minus")?;
        let n_plus = aligned_steps(t_plus, dt, "T_plus")?;
        Self::from_steps(n_minus, n_plus, dt, h)
    }

    /// One-sided window `[0, t_end]`.
    pub fn from_origin(t_end: f64, dt: f64, h: HurstParam) -> Result<Self> {
        if !(t_end > 0.0) {
            return Err(invalid("t_end", "must be positive"));
        }
        let n = aligned_steps(t_end, dt, "t_end")?;
        Self::from_steps(0, n, dt, h)
    }

    /// Window of `n_minus` steps before and `n_plus` steps after the origin.
    pub fn from_steps(n_minus: usize, n_plus: usize, dt: f64, h: HurstParam) -> Result<Self> {
        let n = n_minus + n_plus;
        if n == 0 {
            return Err(invalid("window", "needs at least one step"));
        }
        let grid = TimeGrid::new(-(n_minus as f64) * dt, dt, n + 1)?;
        Ok(Self {
            grid,
            origin: n_minus,
            generator: FgnGenerator::new(n, dt, h)?,
            increments: vec![0.0; n],
        })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    /// Grid index of `t = 0`.
    pub fn origin(&self) -> usize {
        self.origin
    }

    /// One path written into `values` (resized to the grid).
    pub fn sample_values<R: RngCore + ?Sized>(&mut self, rng: &mut R, values: &mut Vec<f64>) {
        self.generator.sample_into(rng, &mut self.increments);
        values.clear();
        values.reserve(self.increments.len() + 1);
        let mut acc = 0.0;
        values.push(0.0);
        for dz in &self.increments {
            acc += dz;
            values.push(acc);
        }
        let anchor = values[self.origin];
        for v in values.iter_mut() {
            *v -= anchor;
        }
        values[self.origin] = 0.0;
    }

    pub fn sample<R: RngCore + ?Sized>(&mut self, rng: &mut R) -> SamplePath {
        let mut values = Vec::new();
        self.sample_values(rng, &mut values);
        SamplePath::from_parts(self.grid, values)
    }
}

pub(crate) fn aligned_steps(length: f64, dt: f64, name: &'static str) -> Result<usize> {
    if !(dt > 0.0) {
        return Err(invalid("dt", format!("must be positive, got {dt}")));
    }
    let x = length / dt;
    let k = libm::round(x);
    if libm::fabs(x - k) > 1e-9 * x.max(1.0) {
        return Err(Error::GridMisaligned(format!(
            "{name} = {length} is not an integer multiple of dt = {dt}"
        )));
    }
    Ok(k as usize)
}

/// Two-sided fBM on `[-t_minus, t_plus]` with step `dt`.
pub fn sample_two_sided_fbm(
    t_minus: f64,
    t_plus: f64,
    dt: f64,
    h: HurstParam,
    seed: RngSeed,
) -> Result<SamplePath> {
    Ok(FbmPathSampler::two_sided(t_minus, t_plus, dt, h)?.sample(&mut seed.rng()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn h(v: f64) -> HurstParam {
        HurstParam::new(v).unwrap()
    }

    #[test]
    fn hurst_bounds() {
        assert!(HurstParam::new(0.0).is_err());
        assert!(HurstParam::new(1.0).is_err());
        assert!(HurstParam::new(f64::NAN).is_err());
        assert!(h(0.3).require_limit_range().is_err());
        assert!(h(0.5).require_limit_range().is_ok());
    }

    #[test]
    fn covariance_examples() {
        assert!((fbm_covariance(1.0, 1.0, h(0.75)) - 1.0).abs() < 1e-15);
        assert!((fbm_covariance(2.0, 1.0, h(0.5)) - 1.0).abs() < 1e-15);
        assert!(fbm_covariance(1.0, -1.0, h(0.5)).abs() < 1e-15);
    }

    #[test]
    fn fgn_autocovariance_examples() {
        assert!((fgn_autocovariance(0, 1.0, h(0.3)).unwrap() - 1.0).abs() < 1e-15);
        assert!(fgn_autocovariance(1, 1.0, h(0.5)).unwrap().abs() < 1e-15);
        // 0.5 * (2^1.5 - 2), evaluated independently at high precision.
        assert!(
            (fgn_autocovariance(1, 1.0, h(0.75)).unwrap() - 0.414_213_562_373_095_1).abs() < 1e-12
        );
        assert_eq!(
            fgn_autocovariance(-1, 1.0, h(0.75)),
            Err(Error::NegativeLag(-1))
        );
    }

    #[test]
    fn fgn_is_deterministic_per_seed() {
        let a = sample_fgn(100, 0.1, h(0.7), RngSeed::new(3, 1)).unwrap();
        let b = sample_fgn(100, 0.1, h(0.7), RngSeed::new(3, 1)).unwrap();
        let c = sample_fgn(100, 0.1, h(0.7), RngSeed::new(3, 2)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn single_increment_has_unit_variance() {
        let n = 20_000;
        let mut g = FgnGenerator::new(1, 1.0, h(0.75)).unwrap();
        let mut rng = RngSeed::new(11, 0).rng();
        let mut s2 = 0.0;
        for _ in 0..n {
            let x = g.sample(&mut rng)[0];
            s2 += x * x;
        }
        let var = s2 / n as f64;
        // Var of the sample variance of N(0,1) is 2/n.
        assert!((var - 1.0).abs() < 5.0 * (2.0 / n as f64).sqrt());
    }

    #[test]
    fn grid_helpers() {
        let g = TimeGrid::new(-1.0, 0.25, 9).unwrap();
        assert_eq!(g.index_of(0.0), Some(4));
        assert_eq!(g.index_of(0.1), None);
        assert_eq!(g.nearest_index(0.1), Some(4));
        assert_eq!(g.nearest_index(1.2), None);
        assert!((g.t_end() - 1.0).abs() < 1e-15);
        assert!(TimeGrid::new(0.0, 0.0, 3).is_err());
        assert!(TimeGrid::new(0.0, 1.0, 0).is_err());
    }

    #[test]
    fn sample_path_validation() {
        let g = TimeGrid::new(0.0, 1.0, 3).unwrap();
        assert!(SamplePath::new(g, vec![0.0, 1.0]).is_err());
        assert!(SamplePath::new(g, vec![0.0, f64::NAN, 1.0]).is_err());
        assert!(SamplePath::new(g, vec![0.0, 2.0, 1.0]).is_ok());
    }

    #[test]
    fn exact_sampler_pins_origin() {
        let g = TimeGrid::new(0.0, 1.0, 1).unwrap();
        let p = sample_fbm_exact_small(g, h(0.8), RngSeed::new(1, 0)).unwrap();
        assert_eq!(p.values(), &[0.0]);
        let g = TimeGrid::new(-2.0, 0.5, 9).unwrap();
        let p = sample_fbm_exact_small(g, h(0.8), RngSeed::new(1, 0)).unwrap();
        assert_eq!(p.values()[4], 0.0);
    }

    #[test]
    fn exact_sampler_cap() {
        let g = TimeGrid::new(0.0, 1.0, 10).unwrap();
        assert_eq!(
            ExactFbmSampler::with_cap(g, h(0.6), 5).unwrap_err(),
            Error::GridTooLarge { n: 10, cap: 5 }
        );
    }

    #[test]
    fn two_sided_anchor_and_alignment() {
        let p = sample_two_sided_fbm(2.0, 3.0, 0.25, h(0.7), RngSeed::new(5, 0)).unwrap();
        assert_eq!(p.grid().n_points(), 21);
        let k = p.grid().index_of(0.0).unwrap();
        assert_eq!(p.values()[k], 0.0);
        assert!(matches!(
            sample_two_sided_fbm(2.1, 3.0, 0.25, h(0.7), RngSeed::new(5, 0)),
            Err(Error::GridMisaligned(_))
        ));
    }

    #[test]
    fn derived_seeds_differ() {
        let s = RngSeed::new(7, 0);
        assert_ne!(s.derive(1), s.derive(2));
        assert_eq!(s.derive(1), s.derive(1));
        assert_ne!(s.rng().next_u64(), s.stream(1).rng().next_u64());
    }
}
