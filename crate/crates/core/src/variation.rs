//! Exact φ-variation of grid-sampled functions over sub-partitions of the
//! grid, and the divergence experiment for the indicator process of an fBm.
//!
//! The grid-restricted variation is a lower bound for the continuum
//! supremum; all experiment outputs label it as such.

use crate::error::{Error, Result};
use crate::gaussian_paths::{CirculantFbm, HurstIndex, TimeGrid};
use crate::rng::path_rng;
use crate::young_functional::PhiFunction;

/// Default cap on grid size for the O(n^2) dynamic program. Inputs with few
/// distinct values use an exact O(n·k) compression instead and are not
/// subject to the cap.
pub const DP_GRID_CAP: usize = 1 << 15;

/// Distinct-value count up to which the compressed DP is used.
const VALUE_COMPRESSION_CAP: usize = 32;

/// A function sampled on a grid.
#[derive(Debug, Clone)]
pub struct GridFunction {
    pub grid: TimeGrid,
    pub values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: TimeGrid, values: Vec<f64>) -> Result<Self> {
        if grid.len() != values.len() {
            return Err(Error::invalid("grid and value lengths differ"));
        }
        if values.len() < 2 {
            return Err(Error::invalid("grid function needs at least 2 points"));
        }
        Ok(GridFunction { grid, values })
    }
}

/// Exact supremum of `∑ phi(|f(t_i) - f(t_{i-1})|)` over all sub-partitions
/// of the grid that contain both endpoints.
///
/// Dynamic program `best[j] = max_{i<j} best[i] + phi(|v_j - v_i|)`, O(n^2);
/// when the values take few distinct levels the recursion collapses to an
/// exact O(n·k) form over the level set.
pub fn phi_variation_grid(f: &GridFunction, phi: &PhiFunction) -> Result<f64> {
    let v = &f.values;
    let n = v.len();

    let mut levels: Vec<f64> = v.clone();
    levels.sort_by(|a, b| a.partial_cmp(b).unwrap());
    levels.dedup();

    if levels.len() <= VALUE_COMPRESSION_CAP {
        return Ok(compressed_dp(v, &levels, phi));
    }
    if n > DP_GRID_CAP {
        return Err(Error::invalid(format!(
            "grid size {n} exceeds the O(n^2) variation cap {DP_GRID_CAP}"
        )));
    }
    let mut best = vec![0.0f64; n];
    for j in 1..n {
        let mut m = f64::NEG_INFINITY;
        for i in 0..j {
            let c = best[i] + phi.forward((v[j] - v[i]).abs());
            if c > m {
                m = c;
            }
        }
        best[j] = m;
    }
    Ok(best[n - 1])
}

fn compressed_dp(v: &[f64], levels: &[f64], phi: &PhiFunction) -> f64 {
    let k = levels.len();
    let slot = |x: f64| levels.partition_point(|&l| l < x);
    // phi(|levels[a] - levels[b]|), precomputed.
    let mut cost = vec![0.0f64; k * k];
    for a in 0..k {
        for b in 0..k {
            cost[a * k + b] = phi.forward((levels[a] - levels[b]).abs());
        }
    }
    // Running max of best[i] per level of v_i.
    let mut level_best = vec![f64::NEG_INFINITY; k];
    level_best[slot(v[0])] = 0.0;
    let mut best_j = 0.0;
    for &vj in &v[1..] {
        let sj = slot(vj);
        let mut m = f64::NEG_INFINITY;
        for (w, &lb) in level_best.iter().enumerate() {
            if lb > f64::NEG_INFINITY {
                let c = lb + cost[sj * k + w];
                if c > m {
                    m = c;
                }
            }
        }
        best_j = m;
        if m > level_best[sj] {
            level_best[sj] = m;
        }
    }
    best_j
}

/// One row of the indicator-variation depth sweep.
#[derive(Debug, Clone, serde::Serialize)]
pub struct DepthRow {
    pub depth: u32,
    pub n_grid: usize,
    /// Grid-restricted variation (a lower bound for the continuum value),
    /// averaged over paths.
    pub mean_variation: f64,
    pub std_variation: f64,
    pub paths: usize,
}

/// Ensemble mean/std of the grid φ-variation of `X(t) = 1(B_H(t) > 0)` on
/// nested dyadic grids of `[0,1]` (grid size `2^depth + 1`).
///
/// Grids are nested path-by-path, so the per-path variation is
/// non-decreasing in depth by construction.
pub fn indicator_variation_experiment(
    h: HurstIndex,
    phi: &PhiFunction,
    depths: &[u32],
    paths: usize,
    seed: u64,
) -> Result<Vec<DepthRow>> {
    if h.value() <= 0.5 {
        return Err(Error::invalid(format!(
            "indicator variation experiment requires H > 1/2, got {}",
            h.value()
        )));
    }
    if depths.is_empty() || depths.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("depths must be nonempty and increasing"));
    }
    if paths < 100 {
        return Err(Error::invalid("need at least 100 paths"));
    }
    let max_depth = *depths.last().unwrap();
    if max_depth > 15 {
        return Err(Error::invalid("depths above 15 exceed the variation cap"));
    }
    let n_max = 1usize << max_depth;
    let sampler = CirculantFbm::new(n_max, 1.0, h)?;

    let grids: Vec<TimeGrid> = depths
        .iter()
        .map(|&d| TimeGrid::uniform(1 << d, 1.0))
        .collect::<Result<_>>()?;

    let mut sums = vec![0.0f64; depths.len()];
    let mut sumsq = vec![0.0f64; depths.len()];
    for i in 0..paths {
        let mut rng = path_rng(seed, i as u64);
        let path = sampler.sample(&mut rng, format!("var:{seed}:{i}"));
        let indicator: Vec<f64> = path
            .values
            .iter()
            .map(|&x| if x > 0.0 { 1.0 } else { 0.0 })
            .collect();
        for (di, &depth) in depths.iter().enumerate() {
            let stride = 1usize << (max_depth - depth);
            let sub: Vec<f64> = indicator.iter().step_by(stride).copied().collect();
            let gf = GridFunction::new(grids[di].clone(), sub)?;
            let v = phi_variation_grid(&gf, phi)?;
            sums[di] += v;
            sumsq[di] += v * v;
        }
    }
    let nf = paths as f64;
    Ok(depths
        .iter()
        .enumerate()
        .map(|(di, &depth)| {
            let mean = sums[di] / nf;
            let var = (sumsq[di] / nf - mean * mean).max(0.0) * nf / (nf - 1.0);
            DepthRow {
                depth,
                n_grid: (1usize << depth) + 1,
                mean_variation: mean,
                std_variation: var.sqrt(),
                paths,
            }
        })
        .collect())
}
