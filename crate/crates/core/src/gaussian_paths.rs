//! Exact fractional Brownian motion sampling.
//!
//! Two samplers are provided: a Cholesky factorization of the covariance
//! kernel for arbitrary grids (O(n^3), capped), and circulant embedding of
//! the stationary increment covariance for uniform grids (O(n log n)).
//! Both are exact in distribution and deterministic for a fixed seed.

use std::io::Write;
use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::{num_complex::Complex, Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::rng::path_rng;

/// Default cap on grid size for the O(n^3) Cholesky sampler.
pub const CHOLESKY_GRID_CAP: usize = 4096;

/// Relative diagonal jitter added before Cholesky factorization. Grids with
/// near-duplicate points otherwise fail spuriously.
const CHOLESKY_JITTER: f64 = 1e-12;

/// Relative tolerance for negative circulant eigenvalues before the
/// embedding is doubled.
const CIRCULANT_EIG_TOL: f64 = 1e-9;

/// Maximum number of embedding-size doublings before giving up.
const CIRCULANT_MAX_DOUBLINGS: usize = 5;

/// Hurst index `H` with `0 < H < 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HurstIndex(f64);

impl HurstIndex {
    pub fn new(h: f64) -> Result<Self> {
        if !(h > 0.0 && h < 1.0) {
            return Err(Error::invalid(format!(
                "Hurst index must satisfy 0 < H < 1, got {h}"
            )));
        }
        Ok(HurstIndex(h))
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }
}

/// Strictly increasing time points, first point >= 0.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    points: Vec<f64>,
}

impl TimeGrid {
    pub fn new(points: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::invalid("time grid must be nonempty"));
        }
        if points[0] < 0.0 {
            return Err(Error::invalid(format!(
                "time grid must start at a nonnegative time, got {}",
                points[0]
            )));
        }
        if points.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("time grid must be strictly increasing"));
        }
        Ok(TimeGrid { points })
    }

    /// Uniform grid `{ i * t_max / n : i = 0..=n }` (n intervals, n+1 points).
    pub fn uniform(n: usize, t_max: f64) -> Result<Self> {
        if n == 0 || t_max <= 0.0 {
            return Err(Error::invalid("uniform grid needs n >= 1 and t_max > 0"));
        }
        let dt = t_max / n as f64;
        TimeGrid::new((0..=n).map(|i| i as f64 * dt).collect())
    }

    #[inline]
    pub fn points(&self) -> &[f64] {
        &self.points
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.points.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Index of an exact time value, if present.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        self.points
            .binary_search_by(|p| p.partial_cmp(&t).unwrap())
            .ok()
    }
}

/// A stochastic process realization on a grid.
#[derive(Debug, Clone)]
pub struct SamplePath {
    pub grid: TimeGrid,
    pub values: Vec<f64>,
    /// Opaque RNG provenance tag.
    pub seed_tag: String,
}

impl SamplePath {
    pub fn new(grid: TimeGrid, values: Vec<f64>, seed_tag: impl Into<String>) -> Result<Self> {
        if grid.len() != values.len() {
            return Err(Error::invalid(format!(
                "grid has {} points but {} values supplied",
                grid.len(),
                values.len()
            )));
        }
        Ok(SamplePath {
            grid,
            values,
            seed_tag: seed_tag.into(),
        })
    }

    /// Value at an exact grid time. No interpolation is ever performed.
    pub fn value_at(&self, t: f64) -> Result<f64> {
        self.grid
            .index_of(t)
            .map(|i| self.values[i])
            .ok_or_else(|| Error::invalid(format!("time {t} is not on the path grid")))
    }

    /// Pointwise map of the values onto the same grid.
    pub fn map(&self, f: impl Fn(f64) -> f64, tag: impl Into<String>) -> SamplePath {
        SamplePath {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
            seed_tag: tag.into(),
        }
    }

    /// Writes the path as CSV `t,value` with 17-significant-digit floats.
    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "t,value")?;
        for (t, v) in self.grid.points().iter().zip(&self.values) {
            writeln!(w, "{:.16e},{:.16e}", t, v)?;
        }
        Ok(())
    }
}

/// Covariance `cov(B_H(s), B_H(t)) = (t^{2H} + s^{2H} - |t-s|^{2H}) / 2`.
pub fn fbm_covariance(s: f64, t: f64, h: HurstIndex) -> Result<f64> {
    if s < 0.0 || t < 0.0 {
        return Err(Error::invalid(format!(
            "fbm_covariance requires nonnegative times, got ({s}, {t})"
        )));
    }
    let (s, t) = if s <= t { (s, t) } else { (t, s) };
    let hh = 2.0 * h.value();
    Ok(0.5 * (t.powf(hh) + s.powf(hh) - (t - s).powf(hh)))
}

/// Lower-triangular Cholesky factor of a symmetric matrix stored row-major.
/// Returns the offending pivot index on failure.
fn cholesky_in_place(a: &mut [f64], n: usize) -> std::result::Result<(), usize> {
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= a[j * n + k] * a[j * n + k];
        }
        if d <= 0.0 || !d.is_finite() {
            return Err(j);
        }
        let d = d.sqrt();
        a[j * n + j] = d;
        for i in (j + 1)..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = s / d;
        }
    }
    // Zero the strict upper triangle so the factor can be used directly.
    for i in 0..n {
        for j in (i + 1)..n {
            a[i * n + j] = 0.0;
        }
    }
    Ok(())
}

/// Precomputed Cholesky factor of the fBm kernel on a grid. Reusable across
/// Monte Carlo draws.
pub struct CholeskyFbm {
    grid: TimeGrid,
    h: HurstIndex,
    /// Lower-triangular factor for the strictly positive grid times.
    factor: Vec<f64>,
    /// Number of positive-time points (grid may start at t = 0 where the
    /// path is pinned to zero).
    n_pos: usize,
    /// Whether the first grid point is t = 0.
    starts_at_zero: bool,
}

impl CholeskyFbm {
    pub fn new(grid: TimeGrid, h: HurstIndex) -> Result<Self> {
        Self::with_cap(grid, h, CHOLESKY_GRID_CAP)
    }

    pub fn with_cap(grid: TimeGrid, h: HurstIndex, cap: usize) -> Result<Self> {
        if grid.len() > cap {
            return Err(Error::invalid(format!(
                "grid size {} exceeds the Cholesky sampler cap {}",
                grid.len(),
                cap
            )));
        }
        let starts_at_zero = grid.points()[0] == 0.0;
        let pos: &[f64] = if starts_at_zero {
            &grid.points()[1..]
        } else {
            grid.points()
        };
        let n = pos.len();
        let mut a = vec![0.0; n * n];
        let mut max_diag = 0.0f64;
        for i in 0..n {
            for j in 0..=i {
                let c = fbm_covariance(pos[j], pos[i], h)?;
                a[i * n + j] = c;
                a[j * n + i] = c;
            }
            max_diag = max_diag.max(a[i * n + i]);
        }
        let jitter = CHOLESKY_JITTER * max_diag;
        for i in 0..n {
            a[i * n + i] += jitter;
        }
        cholesky_in_place(&mut a, n).map_err(|pivot| {
            Error::numerical(format!(
                "fBm covariance matrix is not positive definite after jitter: pivot {pivot} \
                 (grid time {})",
                pos[pivot]
            ))
        })?;
        Ok(CholeskyFbm {
            grid,
            h,
            factor: a,
            n_pos: n,
            starts_at_zero,
        })
    }

    /// One exact draw using the supplied stream RNG.
    pub fn sample(&self, rng: &mut ChaCha8Rng, seed_tag: impl Into<String>) -> SamplePath {
        let n = self.n_pos;
        let z: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let mut vals = Vec::with_capacity(self.grid.len());
        if self.starts_at_zero {
            vals.push(0.0);
        }
        for i in 0..n {
            let row = &self.factor[i * n..i * n + i + 1];
            vals.push(row.iter().zip(&z).map(|(l, zk)| l * zk).sum());
        }
        SamplePath {
            grid: self.grid.clone(),
            values: vals,
            seed_tag: seed_tag.into(),
        }
    }

    pub fn hurst(&self) -> HurstIndex {
        self.h
    }
}

/// One exact fBm draw on an arbitrary grid via Cholesky factorization.
pub fn generate_cholesky(grid: &TimeGrid, h: HurstIndex, seed: u64) -> Result<SamplePath> {
    let sampler = CholeskyFbm::new(grid.clone(), h)?;
    let mut rng = path_rng(seed, 0);
    Ok(sampler.sample(&mut rng, format!("chol:seed={seed}")))
}

/// Circulant-embedding sampler for fBm on the uniform grid
/// `{ i * t_max / n : i = 0..=n }`. Exact in distribution.
pub struct CirculantFbm {
    n: usize,
    t_max: f64,
    h: HurstIndex,
    /// sqrt(eigenvalue / (2m)) per embedding frequency.
    scale: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
    grid: TimeGrid,
}

impl CirculantFbm {
    pub fn new(n: usize, t_max: f64, h: HurstIndex) -> Result<Self> {
        if n < 1 {
            return Err(Error::invalid("circulant sampler needs n >= 1"));
        }
        if t_max <= 0.0 {
            return Err(Error::invalid("t_max must be positive"));
        }
        let dt = t_max / n as f64;
        let hh = 2.0 * h.value();
        // Autocovariance of the unit-step fractional Gaussian noise, scaled
        // by dt^{2H}.
        let gamma = |k: usize| -> f64 {
            let k = k as f64;
            0.5 * dt.powf(hh)
                * ((k + 1.0).powf(hh) - 2.0 * k.powf(hh) + (k - 1.0).abs().powf(hh))
        };

        let mut planner = FftPlanner::new();
        let mut m = n.next_power_of_two();
        for doubling in 0.. {
            let size = 2 * m;
            let mut row: Vec<Complex<f64>> = Vec::with_capacity(size);
            for k in 0..=m {
                row.push(Complex::new(gamma(k), 0.0));
            }
            for k in (1..m).rev() {
                row.push(Complex::new(gamma(k), 0.0));
            }
            let fft = planner.plan_fft_forward(size);
            fft.process(&mut row);
            let max_eig = row.iter().fold(0.0f64, |acc, c| acc.max(c.re));
            let min_eig = row.iter().fold(f64::INFINITY, |acc, c| acc.min(c.re));
            if min_eig >= -CIRCULANT_EIG_TOL * max_eig {
                let scale = row
                    .iter()
                    .map(|c| (c.re.max(0.0) / size as f64).sqrt())
                    .collect();
                return Ok(CirculantFbm {
                    n,
                    t_max,
                    h,
                    scale,
                    fft,
                    grid: TimeGrid::uniform(n, t_max)?,
                });
            }
            if doubling >= CIRCULANT_MAX_DOUBLINGS {
                return Err(Error::numerical(format!(
                    "circulant embedding stayed indefinite after {CIRCULANT_MAX_DOUBLINGS} \
                     doublings (min eigenvalue {min_eig:e})"
                )));
            }
            m *= 2;
        }
        unreachable!()
    }

    /// One exact draw using the supplied stream RNG.
    pub fn sample(&self, rng: &mut ChaCha8Rng, seed_tag: impl Into<String>) -> SamplePath {
        let size = self.scale.len();
        let m = size / 2;
        let mut v: Vec<Complex<f64>> = vec![Complex::new(0.0, 0.0); size];
        // Hermitian-symmetric Gaussian spectrum: real at frequencies 0 and m,
        // complex conjugate pairs elsewhere.
        let z0: f64 = rng.sample(StandardNormal);
        let zm: f64 = rng.sample(StandardNormal);
        v[0] = Complex::new(self.scale[0] * z0 * std::f64::consts::SQRT_2, 0.0);
        v[m] = Complex::new(self.scale[m] * zm * std::f64::consts::SQRT_2, 0.0);
        for k in 1..m {
            let a: f64 = rng.sample(StandardNormal);
            let b: f64 = rng.sample(StandardNormal);
            v[k] = Complex::new(self.scale[k] * a, self.scale[k] * b);
            v[size - k] = v[k].conj();
        }
        self.fft.process(&mut v);
        // The first n real components are one fGn draw (scaling folded into
        // `scale`, factor 1/sqrt(2) restores unit variance of the pairs).
        let mut vals = Vec::with_capacity(self.n + 1);
        vals.push(0.0);
        let mut acc = 0.0;
        for item in v.iter().take(self.n) {
            acc += item.re / std::f64::consts::SQRT_2;
            vals.push(acc);
        }
        SamplePath {
            grid: self.grid.clone(),
            values: vals,
            seed_tag: seed_tag.into(),
        }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn hurst(&self) -> HurstIndex {
        self.h
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }
}

/// One exact fBm draw on the uniform grid `{ i * t_max / n }` via circulant
/// embedding.
pub fn generate_circulant(n: usize, t_max: f64, h: HurstIndex, seed: u64) -> Result<SamplePath> {
    let sampler = CirculantFbm::new(n, t_max, h)?;
    let mut rng = path_rng(seed, 0);
    Ok(sampler.sample(&mut rng, format!("circ:seed={seed}")))
}
