//! Forward and general Riemann-Stieltjes integral sums, the certified
//! `8·I_f` / `92·I_g` error bounds, norm diagnostics, and the
//! convergence-rate experiment against closed-form references.

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fbm_bounds::MonotoneDriver;
use crate::gaussian_paths::{CirculantFbm, HurstIndex, SamplePath};
use crate::rng::{path_rng, substream_rng};
use crate::young_functional::{
    eval_if, eval_ig_truncated, DominatingFunction, QuadConfig,
};

/// Constant in the centered-sum inequality `‖∑(Y(t_{i-1})-Y(t_0))ΔX‖ <= 8 I_f`.
pub const CENTERED_SUM_CONSTANT: f64 = 8.0;

/// Constant in the forward-sum error bound `‖∫YdX - ∑YΔX‖ <= 92 I_g`.
pub const FORWARD_ERROR_CONSTANT: f64 = 92.0;

/// A partition `a = t_0 < t_1 < ... < t_n = b` with its mesh cached.
#[derive(Debug, Clone)]
pub struct Partition {
    points: Vec<f64>,
    mesh: f64,
}

impl Partition {
    pub fn new(points: Vec<f64>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::invalid("partition needs at least two points"));
        }
        if points.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("partition must be strictly increasing"));
        }
        let mesh = points
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(0.0f64, f64::max);
        Ok(Partition { points, mesh })
    }

    pub fn uniform(a: f64, b: f64, n: usize) -> Result<Self> {
        if n == 0 || !(a < b) {
            return Err(Error::invalid("uniform partition needs a < b and n >= 1"));
        }
        let step = (b - a) / n as f64;
        let mut pts: Vec<f64> = (0..=n).map(|i| a + i as f64 * step).collect();
        // Pin the endpoint exactly.
        *pts.last_mut().unwrap() = b;
        Partition::new(pts)
    }

    #[inline]
    pub fn points(&self) -> &[f64] {
        &self.points
    }

    #[inline]
    pub fn mesh(&self) -> f64 {
        self.mesh
    }

    pub fn a(&self) -> f64 {
        self.points[0]
    }

    pub fn b(&self) -> f64 {
        *self.points.last().unwrap()
    }

    pub fn n_intervals(&self) -> usize {
        self.points.len() - 1
    }
}

/// Where the integrand is evaluated inside each partition interval.
#[derive(Debug, Clone)]
pub enum EvalRule {
    /// `s_i = t_{i-1}` (forward sums).
    Forward,
    Midpoint,
    /// `s_i` uniform on `[t_{i-1}, t_i]`, drawn from a tagged substream.
    RandomUniform { seed: u64 },
    /// Explicit `s_i`, one per interval, each in `[t_{i-1}, t_i]`.
    Custom(Vec<f64>),
}

impl EvalRule {
    /// Evaluation points `s_i`, one per partition interval.
    pub fn eval_points(&self, part: &Partition) -> Result<Vec<f64>> {
        let pts = part.points();
        match self {
            EvalRule::Forward => Ok(pts[..pts.len() - 1].to_vec()),
            EvalRule::Midpoint => Ok(pts.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()),
            EvalRule::RandomUniform { seed } => {
                let mut rng = substream_rng(*seed, 0, 1);
                Ok(pts
                    .windows(2)
                    .map(|w| w[0] + rng.gen::<f64>() * (w[1] - w[0]))
                    .collect())
            }
            EvalRule::Custom(s) => {
                if s.len() != pts.len() - 1 {
                    return Err(Error::invalid(format!(
                        "custom rule needs {} evaluation points, got {}",
                        pts.len() - 1,
                        s.len()
                    )));
                }
                for (i, w) in pts.windows(2).enumerate() {
                    if !(s[i] >= w[0] && s[i] <= w[1]) {
                        return Err(Error::invalid(format!(
                            "evaluation point {} lies outside [{}, {}]",
                            s[i], w[0], w[1]
                        )));
                    }
                }
                Ok(s.clone())
            }
        }
    }
}

/// `∑ Y(s_i) (X(t_i) - X(t_{i-1}))`. The paths must already be sampled on
/// grids containing every partition and evaluation time; nothing is
/// interpolated.
pub fn rs_sum(x: &SamplePath, y: &SamplePath, part: &Partition, rule: &EvalRule) -> Result<f64> {
    let s = rule.eval_points(part)?;
    let pts = part.points();
    let mut sum = 0.0;
    let mut x_prev = x.value_at(pts[0])?;
    for i in 1..pts.len() {
        let x_cur = x.value_at(pts[i])?;
        sum += y.value_at(s[i - 1])? * (x_cur - x_prev);
        x_prev = x_cur;
    }
    Ok(sum)
}

/// Norm used for Monte Carlo error estimates.
#[derive(Debug, Clone, Copy)]
pub enum NormSpec {
    /// `(E|ξ|^p)^{1/p}`, `p >= 1`.
    Lp(f64),
    /// `E[|ξ|/(1+|ξ|)]`, the subadditive functional metrizing convergence
    /// in probability.
    ZeroNorm,
}

/// Norm estimate and its standard error from per-sample values. For `Lp`
/// the standard error comes from the delta method applied to the mean of
/// `|ξ|^p`.
pub fn norm_from_samples(samples: &[f64], norm: NormSpec) -> Result<(f64, f64)> {
    if samples.is_empty() {
        return Err(Error::invalid("norm estimate needs at least one sample"));
    }
    let n = samples.len() as f64;
    match norm {
        NormSpec::Lp(p) => {
            if !(p >= 1.0) {
                return Err(Error::invalid(format!("Lp norm requires p >= 1, got {p}")));
            }
            let powered: Vec<f64> = samples.iter().map(|e| e.abs().powf(p)).collect();
            let m = powered.iter().sum::<f64>() / n;
            let var = powered.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0).max(1.0);
            let est = m.powf(1.0 / p);
            let se_m = (var / n).sqrt();
            let se = if m > 0.0 {
                m.powf(1.0 / p - 1.0) * se_m / p
            } else {
                0.0
            };
            Ok((est, se))
        }
        NormSpec::ZeroNorm => {
            let g: Vec<f64> = samples.iter().map(|e| e.abs() / (1.0 + e.abs())).collect();
            let m = g.iter().sum::<f64>() / n;
            let var = g.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0).max(1.0);
            Ok((m, (var / n).sqrt()))
        }
    }
}

/// Fraction of non-finite per-path errors beyond which the estimate aborts.
const NONFINITE_ABORT_FRACTION: f64 = 0.001;

/// Monte Carlo estimate of `‖rs_sum - reference‖` under the chosen norm.
///
/// `make_paths(seed, path_index)` must return `(X, Y)` sampled on grids
/// containing all partition and evaluation points; `reference` is the
/// per-path limit functional (e.g. a closed-form primitive of the driver).
pub fn estimate_error_norm(
    make_paths: impl Fn(u64, u64) -> Result<(SamplePath, SamplePath)>,
    part: &Partition,
    rule: &EvalRule,
    reference: impl Fn(&SamplePath, &SamplePath) -> f64,
    norm: NormSpec,
    paths: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if paths < 100 {
        return Err(Error::invalid("estimate_error_norm needs paths >= 100"));
    }
    let mut errors = Vec::with_capacity(paths);
    let mut non_finite = 0usize;
    for i in 0..paths {
        let (x, y) = make_paths(seed, i as u64)?;
        let e = rs_sum(&x, &y, part, rule)? - reference(&x, &y);
        if e.is_finite() {
            errors.push(e);
        } else {
            non_finite += 1;
        }
    }
    if non_finite as f64 > NONFINITE_ABORT_FRACTION * paths as f64 {
        return Err(Error::numerical(format!(
            "{non_finite} of {paths} per-path errors were non-finite"
        )));
    }
    norm_from_samples(&errors, norm)
}

/// `8 · I_f(t_0, t_n)`, the certified bound on the centered sum
/// `∑ (Y(t_{i-1}) - Y(t_0)) ΔX(t_i)`.
pub fn thm2_bound(f: &DominatingFunction, part: &Partition, cfg: &QuadConfig) -> Result<f64> {
    Ok(CENTERED_SUM_CONSTANT * eval_if(f, part.a(), part.b(), cfg)?)
}

/// `92 · I_g(t_0, t_n)` with `g(s,t) = f(s,t)·1(t < s + 3·mesh)`, the
/// certified bound on `|∫YdX - forward sum|`.
pub fn thm1_error_bound(f: &DominatingFunction, part: &Partition, cfg: &QuadConfig) -> Result<f64> {
    Ok(FORWARD_ERROR_CONSTANT * eval_ig_truncated(f, part.a(), part.b(), part.mesh(), cfg)?)
}

/// One mesh level of a rate experiment.
#[derive(Debug, Clone, Serialize)]
pub struct RateRow {
    pub mesh: f64,
    pub n_intervals: usize,
    pub error: f64,
    pub stderr: f64,
    /// Certified error-bound curve `92·I_g` with the empirically calibrated
    /// front constant.
    pub bound92: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RateVerdict {
    Fitted,
    /// Every per-path error was exactly zero; no slope can be fitted.
    ZeroError,
}

/// Mesh ladder, fitted log-log error slope with bootstrap CI, and the
/// certified bound curve.
#[derive(Debug, Clone, Serialize)]
pub struct RateReport {
    pub rows: Vec<RateRow>,
    pub fitted_slope: f64,
    pub slope_ci: (f64, f64),
    /// `H/q + H - 1`, the decay exponent of the certified bound.
    pub theoretical_slope: f64,
    pub verdict: RateVerdict,
}

impl RateReport {
    /// CSV `d,n_intervals,error,stderr,bound92` with shortest round-trip
    /// floats.
    pub fn write_csv(&self, mut w: impl std::io::Write) -> std::io::Result<()> {
        writeln!(w, "d,n_intervals,error,stderr,bound92")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{}",
                r.mesh, r.n_intervals, r.error, r.stderr, r.bound92
            )?;
        }
        Ok(())
    }

    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::json!({
            "slope": self.fitted_slope,
            "ci_lo": self.slope_ci.0,
            "ci_hi": self.slope_ci.1,
            "theoretical_slope": self.theoretical_slope,
        })
    }
}

/// Number of bootstrap resamples for the slope CI.
const BOOTSTRAP_RESAMPLES: usize = 1_000;

fn weighted_ols_slope(xs: &[f64], ys: &[f64], ws: &[f64]) -> f64 {
    let sw: f64 = ws.iter().sum();
    let mx: f64 = xs.iter().zip(ws).map(|(x, w)| x * w).sum::<f64>() / sw;
    let my: f64 = ys.iter().zip(ws).map(|(y, w)| y * w).sum::<f64>() / sw;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for i in 0..xs.len() {
        sxx += ws[i] * (xs[i] - mx) * (xs[i] - mx);
        sxy += ws[i] * (xs[i] - mx) * (ys[i] - my);
    }
    sxy / sxx
}

/// Convergence-rate experiment for forward sums of `F(B_H)` against `ΔB_H`
/// on uniform partitions of `[0, t_total]`.
///
/// For each mesh `d` it generates fBm paths on the `t_total/d`-interval
/// grid, evaluates the forward sum of `Y = F(B_H)`, compares against the
/// closed-form per-path reference `∫_0^{B_H(T)} F(x) dx`, and reports the
/// `L_p` error with a bootstrap slope CI plus the calibrated `92·I_g`
/// bound curve.
#[allow(clippy::too_many_arguments)]
pub fn theorem3_experiment(
    driver: &MonotoneDriver,
    h: HurstIndex,
    t_total: f64,
    p: f64,
    q: f64,
    mesh_ladder: &[f64],
    paths: usize,
    seed: u64,
    cfg: &QuadConfig,
) -> Result<RateReport> {
    let hv = h.value();
    if !(hv > 0.5 && hv < 1.0) {
        return Err(Error::invalid(format!(
            "rate experiment requires 1/2 < H < 1, got {hv}"
        )));
    }
    let q_sup = hv / (1.0 - hv);
    if !(p >= 1.0 && p < q_sup) || !(q > p && q < q_sup) {
        return Err(Error::invalid(format!(
            "norm exponents must satisfy p∈[1,H/(1-H)) and q∈(p,H/(1-H)); \
             got p = {p}, q = {q}, H/(1-H) = {q_sup}"
        )));
    }
    if mesh_ladder.len() < 4 {
        return Err(Error::invalid("mesh ladder needs at least 4 levels"));
    }
    if mesh_ladder.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::invalid("mesh ladder must be strictly decreasing"));
    }
    if paths < 100 {
        return Err(Error::invalid("rate experiment needs paths >= 100"));
    }
    let mut counts = Vec::with_capacity(mesh_ladder.len());
    for &d in mesh_ladder {
        let ratio = t_total / d;
        let n = ratio.round();
        if !(d > 0.0) || (ratio - n).abs() > 1e-9 || n < 1.0 {
            return Err(Error::invalid(format!(
                "mesh {d} does not divide t_total = {t_total} into whole intervals"
            )));
        }
        counts.push(n as usize);
    }

    // Per-path |error|^p matrix, rows = paths, columns = meshes. Kept so the
    // bootstrap can resample whole paths.
    let n_meshes = mesh_ladder.len();
    let mut powered = vec![0.0f64; paths * n_meshes];
    let mut all_zero = true;
    for (j, (&d, &n)) in mesh_ladder.iter().zip(&counts).enumerate() {
        let sampler = CirculantFbm::new(n, t_total, h)?;
        let part = Partition::new(sampler.grid().points().to_vec())?;
        for i in 0..paths {
            let stream = ((j as u64) << 32) | i as u64;
            let mut rng = path_rng(seed, stream);
            let x = sampler.sample(&mut rng, format!("rate:{seed}:{stream}"));
            let y = x.map(|v| driver.eval(v), "F(B)");
            let sum = rs_sum(&x, &y, &part, &EvalRule::Forward)?;
            let reference = driver.primitive(*x.values.last().unwrap());
            let e = (sum - reference).abs();
            if e != 0.0 {
                all_zero = false;
            }
            powered[i * n_meshes + j] = e.powf(p);
        }
        debug_assert!(d > 0.0);
    }

    // Certified bound with the front constant calibrated on the coarsest
    // mesh and tested on the finer ones.
    let f_unit = DominatingFunction::power_law(1.0, hv / q + hv, hv / q)?;
    let unit_bounds: Vec<f64> = mesh_ladder
        .iter()
        .map(|&d| {
            eval_ig_truncated(&f_unit, 0.0, t_total, d, cfg)
                .map(|v| FORWARD_ERROR_CONSTANT * v)
        })
        .collect::<Result<_>>()?;

    let nf = paths as f64;
    let mut errors = Vec::with_capacity(n_meshes);
    let mut stderrs = Vec::with_capacity(n_meshes);
    for j in 0..n_meshes {
        let col: Vec<f64> = (0..paths).map(|i| powered[i * n_meshes + j]).collect();
        let m = col.iter().sum::<f64>() / nf;
        let var = col.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (nf - 1.0);
        let est = m.powf(1.0 / p);
        let se = if m > 0.0 {
            m.powf(1.0 / p - 1.0) * (var / nf).sqrt() / p
        } else {
            0.0
        };
        errors.push(est);
        stderrs.push(se);
    }

    let theoretical_slope = hv / q + hv - 1.0;
    if all_zero {
        let rows = mesh_ladder
            .iter()
            .zip(&counts)
            .map(|(&d, &n)| RateRow {
                mesh: d,
                n_intervals: n,
                error: 0.0,
                stderr: 0.0,
                bound92: 0.0,
            })
            .collect();
        return Ok(RateReport {
            rows,
            fitted_slope: f64::NAN,
            slope_ci: (f64::NAN, f64::NAN),
            theoretical_slope,
            verdict: RateVerdict::ZeroError,
        });
    }

    let calibration = errors[0] / unit_bounds[0];
    let bounds: Vec<f64> = unit_bounds.iter().map(|b| calibration * b).collect();

    let xs: Vec<f64> = mesh_ladder.iter().map(|d| d.ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    // Weight of ln(err) is the inverse variance of the log, err/stderr squared.
    let ws: Vec<f64> = errors
        .iter()
        .zip(&stderrs)
        .map(|(e, s)| if *s > 0.0 { (e / s) * (e / s) } else { 1.0 })
        .collect();
    let fitted_slope = weighted_ols_slope(&xs, &ys, &ws);

    // Nonparametric bootstrap over paths.
    let mut boot_rng = substream_rng(seed, 0, 7);
    let mut slopes = Vec::with_capacity(BOOTSTRAP_RESAMPLES);
    let mut sum = vec![0.0f64; n_meshes];
    let mut sumsq = vec![0.0f64; n_meshes];
    for _ in 0..BOOTSTRAP_RESAMPLES {
        sum.iter_mut().for_each(|v| *v = 0.0);
        sumsq.iter_mut().for_each(|v| *v = 0.0);
        for _ in 0..paths {
            let i = boot_rng.gen_range(0..paths);
            let row = &powered[i * n_meshes..(i + 1) * n_meshes];
            for j in 0..n_meshes {
                sum[j] += row[j];
                sumsq[j] += row[j] * row[j];
            }
        }
        let mut bys = Vec::with_capacity(n_meshes);
        let mut bws = Vec::with_capacity(n_meshes);
        let mut ok = true;
        for j in 0..n_meshes {
            let m = sum[j] / nf;
            if !(m > 0.0) {
                ok = false;
                break;
            }
            let var = (sumsq[j] / nf - m * m).max(0.0) * nf / (nf - 1.0);
            let est = m.powf(1.0 / p);
            let se = m.powf(1.0 / p - 1.0) * (var / nf).sqrt() / p;
            bys.push(est.ln());
            bws.push(if se > 0.0 { (est / se) * (est / se) } else { 1.0 });
        }
        if ok {
            slopes.push(weighted_ols_slope(&xs, &bys, &bws));
        }
    }
    slopes.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let ci = if slopes.len() >= 40 {
        let lo = slopes[(0.025 * slopes.len() as f64).floor() as usize];
        let hi = slopes[((0.975 * slopes.len() as f64).floor() as usize).min(slopes.len() - 1)];
        (lo, hi)
    } else {
        (f64::NAN, f64::NAN)
    };

    let rows = mesh_ladder
        .iter()
        .zip(&counts)
        .enumerate()
        .map(|(j, (&d, &n))| RateRow {
            mesh: d,
            n_intervals: n,
            error: errors[j],
            stderr: stderrs[j],
            bound92: bounds[j],
        })
        .collect();
    Ok(RateReport {
        rows,
        fitted_slope,
        slope_ci: ci,
        theoretical_slope,
        verdict: RateVerdict::Fitted,
    })
}
