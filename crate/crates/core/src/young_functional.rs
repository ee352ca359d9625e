//! The Young-type functional
//!
//! ```text
//! I_f(a,b) = ∬_{a<=s<=t<=b} f(s,t)/(t-s)^2 dt ds
//!          + ∫_a^b f(a,t)/(t-a) dt + ∫_a^b f(s,b)/(b-s) ds + f(a,b)
//! ```
//!
//! evaluated by graded tensor quadrature with dyadic bands refined toward the
//! diagonal `t = s`, plus its mesh-truncated variant where `f` is replaced by
//! `g(s,t) = f(s,t)·1(t < s + 3d)`.

use std::sync::Arc;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::gaussian_paths::HurstIndex;
use crate::quadrature::{gauss_legendre, integrate_gl};

/// Bivariate dominating bound `f(s,t)`, non-increasing in `s`,
/// non-decreasing in `t`, with `f(t,t) = 0`.
#[derive(Clone)]
pub enum DominatingKind {
    /// `f(s,t) = k (t-s)^alpha t^{-beta}`
    PowerLaw { k: f64, alpha: f64, beta: f64 },
    /// `f(s,t) = k (t-s)^alpha`
    SimplePower { k: f64, alpha: f64 },
    Custom(Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>),
}

#[derive(Clone)]
pub struct DominatingFunction {
    pub kind: DominatingKind,
    pub declared_monotone: bool,
}

impl DominatingFunction {
    pub fn power_law(k: f64, alpha: f64, beta: f64) -> Result<Self> {
        if k < 0.0 {
            return Err(Error::invalid(format!("power_law needs K >= 0, got {k}")));
        }
        if alpha <= 0.0 {
            return Err(Error::invalid(format!(
                "power_law needs alpha > 0 so that f(t,t) = 0, got {alpha}"
            )));
        }
        Ok(DominatingFunction {
            kind: DominatingKind::PowerLaw { k, alpha, beta },
            declared_monotone: true,
        })
    }

    pub fn simple_power(k: f64, alpha: f64) -> Result<Self> {
        if k < 0.0 {
            return Err(Error::invalid(format!(
                "simple_power needs K >= 0, got {k}"
            )));
        }
        if alpha <= 0.0 {
            return Err(Error::invalid(format!(
                "simple_power needs alpha > 0 so that f(t,t) = 0, got {alpha}"
            )));
        }
        Ok(DominatingFunction {
            kind: DominatingKind::SimplePower { k, alpha },
            declared_monotone: true,
        })
    }

    /// User-supplied `f`. Checks `f(t,t) == 0` on a probe grid; if
    /// `declared_monotone`, spot-checks monotonicity on >= 100 random pairs
    /// drawn from `(0, probe_span]`.
    pub fn custom(
        eval: Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>,
        declared_monotone: bool,
        probe_span: f64,
    ) -> Result<Self> {
        if probe_span <= 0.0 {
            return Err(Error::invalid("probe_span must be positive"));
        }
        for i in 0..=20 {
            let t = probe_span * i as f64 / 20.0;
            let v = eval(t, t);
            if v.abs() > 1e-9 * (1.0 + eval(0.0, probe_span).abs()) {
                return Err(Error::invalid(format!(
                    "custom dominating function must vanish on the diagonal: f({t},{t}) = {v}"
                )));
            }
        }
        if declared_monotone {
            let mut rng = ChaCha8Rng::seed_from_u64(0x0d0_11a7e);
            for _ in 0..128 {
                let mut s: f64 = rng.gen::<f64>() * probe_span;
                let mut t: f64 = rng.gen::<f64>() * probe_span;
                if s > t {
                    std::mem::swap(&mut s, &mut t);
                }
                let ds = rng.gen::<f64>() * s;
                let dt = rng.gen::<f64>() * (probe_span - t);
                let base = eval(s, t);
                if eval(s - ds, t) < base - 1e-12 || eval(s, t + dt) < base - 1e-12 {
                    return Err(Error::invalid(
                        "custom dominating function declared monotone but a probe pair violates \
                         monotonicity",
                    ));
                }
            }
        }
        Ok(DominatingFunction {
            kind: DominatingKind::Custom(eval),
            declared_monotone,
        })
    }

    #[inline]
    pub fn eval(&self, s: f64, t: f64) -> f64 {
        match &self.kind {
            DominatingKind::PowerLaw { k, alpha, beta } => k * (t - s).powf(*alpha) * t.powf(-beta),
            DominatingKind::SimplePower { k, alpha } => k * (t - s).powf(*alpha),
            DominatingKind::Custom(f) => f(s, t),
        }
    }
}

/// Graded-quadrature configuration.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct QuadConfig {
    /// Number of dyadic bands refined toward the diagonal.
    pub graded_levels: usize,
    /// Gauss-Legendre points per band per axis.
    pub gauss_points: usize,
    /// Innermost band width relative to `b - a`; what lies below is bounded
    /// analytically for power-law kinds and dropped for custom `f`.
    pub diagonal_cutoff: f64,
}

impl QuadConfig {
    pub fn new(graded_levels: usize, gauss_points: usize, diagonal_cutoff: f64) -> Result<Self> {
        if graded_levels < 4 {
            return Err(Error::invalid("graded_levels must be >= 4"));
        }
        if gauss_points < 4 {
            return Err(Error::invalid("gauss_points must be >= 4"));
        }
        if !(diagonal_cutoff > 0.0 && diagonal_cutoff < 1e-3) {
            return Err(Error::invalid(
                "diagonal_cutoff must lie in (0, 1e-3) relative to b - a",
            ));
        }
        Ok(QuadConfig {
            graded_levels,
            gauss_points,
            diagonal_cutoff,
        })
    }
}

impl Default for QuadConfig {
    fn default() -> Self {
        QuadConfig {
            graded_levels: 44,
            gauss_points: 16,
            diagonal_cutoff: 1e-10,
        }
    }
}

/// The four terms of `I_f` (or truncated `I_g`), in definition order.
#[derive(Debug, Clone, Copy)]
pub struct IfParts {
    pub double_term: f64,
    pub left_term: f64,
    pub right_term: f64,
    pub corner_term: f64,
}

impl IfParts {
    pub fn total(&self) -> f64 {
        self.double_term + self.left_term + self.right_term + self.corner_term
    }
}

/// Dyadic bands `[U·2^{-k-1}, U·2^{-k}]` for `k = 0..`, stopping at the
/// configured level count or the absolute cutoff, whichever comes first.
fn dyadic_bands(u_max: f64, cutoff_abs: f64, levels: usize) -> (Vec<(f64, f64)>, f64) {
    let mut bands = Vec::new();
    let mut hi = u_max;
    for _ in 0..=levels {
        let lo = 0.5 * hi;
        bands.push((lo, hi));
        hi = lo;
        if hi <= cutoff_abs {
            break;
        }
    }
    (bands, hi)
}

/// Checks the divergence heuristic: the innermost three band contributions
/// failing to decay means the band series does not converge.
fn bands_diverge(contribs: &[f64]) -> bool {
    let n = contribs.len();
    n >= 6 && contribs[n - 3] <= contribs[n - 2] && contribs[n - 2] <= contribs[n - 1]
}

/// Evaluates `I_g(a,b)` where `g(s,t) = f(s,t)·1(t < s + band_width)`, with
/// `band_width = b - a` recovering the untruncated `I_f`.
fn eval_banded(
    f: &DominatingFunction,
    a: f64,
    b: f64,
    band_width: f64,
    cfg: &QuadConfig,
) -> Result<IfParts> {
    if a >= b {
        return Err(Error::invalid(format!(
            "integration interval needs a < b, got [{a}, {b}]"
        )));
    }
    let delta = b - a;
    let u_max = band_width.min(delta);

    // Analytic divergence screens for the power-law kinds.
    match &f.kind {
        DominatingKind::PowerLaw { alpha, beta, .. } => {
            if *alpha <= 1.0 || (a == 0.0 && *beta >= 1.0) {
                return Ok(IfParts {
                    double_term: f64::INFINITY,
                    left_term: f64::INFINITY,
                    right_term: 0.0,
                    corner_term: 0.0,
                });
            }
        }
        DominatingKind::SimplePower { alpha, .. } => {
            if *alpha <= 1.0 {
                return Ok(IfParts {
                    double_term: f64::INFINITY,
                    left_term: 0.0,
                    right_term: 0.0,
                    corner_term: 0.0,
                });
            }
        }
        DominatingKind::Custom(_) => {}
    }

    let (nodes, weights) = gauss_legendre(cfg.gauss_points);
    let cutoff_abs = cfg.diagonal_cutoff * delta;
    let (bands, u_min) = dyadic_bands(u_max, cutoff_abs, cfg.graded_levels);

    // Term 1: ∬ f(s, s+u)/u^2 over s in [a, b-u], u in (0, u_max].
    // The s-integral is paneled geometrically away from s = a so that the
    // t^{-beta}-type behavior at scale u is resolved.
    let inner_s = |u: f64| -> f64 {
        let s_hi = b - u;
        let mut sum = 0.0;
        let mut lo = a;
        let mut width = u;
        while lo < s_hi {
            let hi = (lo + width).min(s_hi);
            sum += integrate_gl(|s| f.eval(s, s + u), lo, hi, &nodes, &weights);
            lo = hi;
            width *= 2.0;
        }
        sum
    };
    let mut double_term = 0.0;
    let mut contribs = Vec::with_capacity(bands.len());
    for &(lo, hi) in &bands {
        let c = integrate_gl(|u| inner_s(u) / (u * u), lo, hi, &nodes, &weights);
        contribs.push(c);
        double_term += c;
    }
    if bands_diverge(&contribs) {
        double_term = f64::INFINITY;
    }
    // Analytic sliver below u_min from the local power behavior.
    double_term += match &f.kind {
        DominatingKind::SimplePower { k, alpha } => {
            // exact: ∫_0^{u_min} k u^{alpha-2} (b - a - u) du
            k * (delta * u_min.powf(alpha - 1.0) / (alpha - 1.0) - u_min.powf(*alpha) / alpha)
        }
        DominatingKind::PowerLaw { k, alpha, beta } => {
            // ∫_0^{u_min} u^{alpha-2} du times the full t-integral of t^{-beta}
            let t_int = if (beta - 1.0).abs() < 1e-12 {
                (b / a).ln()
            } else {
                (b.powf(1.0 - beta) - a.powf(1.0 - beta)) / (1.0 - beta)
            };
            k * t_int * u_min.powf(alpha - 1.0) / (alpha - 1.0)
        }
        DominatingKind::Custom(_) => 0.0,
    };

    // Term 2: ∫ f(a, a+u)/u du over u in (0, u_max].
    let mut left_term = 0.0;
    contribs.clear();
    for &(lo, hi) in &bands {
        let c = integrate_gl(|u| f.eval(a, a + u) / u, lo, hi, &nodes, &weights);
        contribs.push(c);
        left_term += c;
    }
    if bands_diverge(&contribs) {
        left_term = f64::INFINITY;
    }
    left_term += match &f.kind {
        DominatingKind::SimplePower { k, alpha } => k * u_min.powf(*alpha) / alpha,
        DominatingKind::PowerLaw { k, alpha, beta } => {
            if a == 0.0 {
                // f(0, u)/u = k u^{alpha - beta - 1}, exact
                k * u_min.powf(alpha - beta) / (alpha - beta)
            } else {
                k * a.powf(-beta) * u_min.powf(*alpha) / alpha
            }
        }
        DominatingKind::Custom(_) => 0.0,
    };

    // Term 3: ∫ f(b-u, b)/u du over u in (0, u_max].
    let mut right_term = 0.0;
    contribs.clear();
    for &(lo, hi) in &bands {
        let c = integrate_gl(|u| f.eval(b - u, b) / u, lo, hi, &nodes, &weights);
        contribs.push(c);
        right_term += c;
    }
    if bands_diverge(&contribs) {
        right_term = f64::INFINITY;
    }
    right_term += match &f.kind {
        DominatingKind::SimplePower { k, alpha } => k * u_min.powf(*alpha) / alpha,
        DominatingKind::PowerLaw { k, alpha, beta } => {
            k * b.powf(-beta) * u_min.powf(*alpha) / alpha
        }
        DominatingKind::Custom(_) => 0.0,
    };

    // Term 4: f(a,b), zero when the truncation band excludes the corner.
    let corner_term = if delta < band_width { f.eval(a, b) } else { 0.0 };

    Ok(IfParts {
        double_term,
        left_term,
        right_term,
        corner_term,
    })
}

/// `I_f(a,b)` by graded tensor quadrature. Returns `+∞` when the band series
/// fails the convergence heuristic or the power-law parameters make the
/// functional divergent (`beta >= 1` with `a = 0`).
pub fn eval_if(f: &DominatingFunction, a: f64, b: f64, cfg: &QuadConfig) -> Result<f64> {
    eval_if_parts(f, a, b, cfg).map(|p| p.total())
}

/// Term-by-term variant of [`eval_if`].
pub fn eval_if_parts(f: &DominatingFunction, a: f64, b: f64, cfg: &QuadConfig) -> Result<IfParts> {
    eval_banded(f, a, b, f64::INFINITY, cfg)
}

/// `I_g(a,b)` for `g(s,t) = f(s,t)·1(t < s + 3d)`: the integration domains
/// are clipped to the band `t - s < 3d` before quadrature.
pub fn eval_ig_truncated(
    f: &DominatingFunction,
    a: f64,
    b: f64,
    d: f64,
    cfg: &QuadConfig,
) -> Result<f64> {
    eval_ig_truncated_parts(f, a, b, d, cfg).map(|p| p.total())
}

/// Term-by-term variant of [`eval_ig_truncated`].
pub fn eval_ig_truncated_parts(
    f: &DominatingFunction,
    a: f64,
    b: f64,
    d: f64,
    cfg: &QuadConfig,
) -> Result<IfParts> {
    if d <= 0.0 {
        return Err(Error::invalid(format!("mesh d must be positive, got {d}")));
    }
    eval_banded(f, a, b, 3.0 * d, cfg)
}

/// Closed-form upper bounds for the three integral terms of the truncated
/// functional `I_g(0,T)` in the power-law regime
/// `f(s,t) = K (t-s)^{H/q+H} t^{-H/q}`, plus their sum.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct PowerLawBound {
    pub term1: f64,
    pub term2: f64,
    pub term3: f64,
    /// Corner remainder `g(0,T)`; zero whenever `T >= 3d`.
    pub remainder: f64,
    pub total: f64,
}

/// Evaluates the closed-form bounds
///
/// ```text
/// term1 = K T^{1-H/q} (3d)^{H/q+H-1} / ((1-H/q)(H/q+H-1))
/// term2 = term3 = K (3d)^H (T/d)^{1-H/q} / H
/// ```
///
/// valid in the regime `H/q < 1`, `H/q + H > 1`, `d <= T/3`.
pub fn power_law_bound(
    k: f64,
    h: HurstIndex,
    q: f64,
    t_total: f64,
    d: f64,
) -> Result<PowerLawBound> {
    let hv = h.value();
    let hq = hv / q;
    if !(hq < 1.0) {
        return Err(Error::invalid(format!(
            "power_law_bound requires H/q < 1, got H/q = {hq}"
        )));
    }
    if !(hq + hv > 1.0) {
        return Err(Error::invalid(format!(
            "power_law_bound requires H/q + H > 1, got H/q + H = {}",
            hq + hv
        )));
    }
    if !(t_total > 0.0) {
        return Err(Error::invalid("power_law_bound requires t_total > 0"));
    }
    if !(d > 0.0 && d <= t_total / 3.0) {
        return Err(Error::invalid(format!(
            "power_law_bound requires 0 < d <= t_total/3, got d = {d}"
        )));
    }
    let term1 =
        k * t_total.powf(1.0 - hq) * (3.0 * d).powf(hq + hv - 1.0) / ((1.0 - hq) * (hq + hv - 1.0));
    let edge = k * (3.0 * d).powf(hv) * (t_total / d).powf(1.0 - hq) / hv;
    // g(0, t_total) = 0 once t_total >= 3d, which the preconditions force.
    let remainder = if t_total < 3.0 * d {
        k * (3.0 * d).powf(hq + hv) * (3.0 * d).powf(-hq)
    } else {
        0.0
    };
    Ok(PowerLawBound {
        term1,
        term2: edge,
        term3: edge,
        remainder,
        total: term1 + 2.0 * edge + remainder,
    })
}

/// An element of the class of continuous strictly increasing bijections of
/// the nonnegative half-line, given by forward and inverse maps.
#[derive(Clone)]
pub struct PhiFunction {
    forward: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    inverse: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    pub label: String,
}

impl PhiFunction {
    pub fn new(
        label: impl Into<String>,
        forward: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
        inverse: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    ) -> Result<Self> {
        let label = label.into();
        if forward(0.0).abs() > 1e-12 {
            return Err(Error::invalid(format!(
                "phi({label}) must satisfy phi(0) = 0, got {}",
                forward(0.0)
            )));
        }
        let probes: Vec<f64> = (-12..=4).map(|e| 10f64.powi(e)).collect();
        let mut prev = 0.0;
        for &x in &probes {
            let y = forward(x);
            if y <= prev {
                return Err(Error::invalid(format!(
                    "phi({label}) must be strictly increasing, fails near x = {x}"
                )));
            }
            prev = y;
            let back = forward(inverse(y));
            if (back - y).abs() > 1e-10 * y.abs().max(1e-300) {
                return Err(Error::invalid(format!(
                    "phi({label}): forward(inverse(u)) != u at u = {y}"
                )));
            }
        }
        Ok(PhiFunction {
            forward,
            inverse,
            label,
        })
    }

    /// `phi(x) = x^p`.
    pub fn power(p: f64) -> Result<Self> {
        if !(p > 0.0) {
            return Err(Error::invalid(format!("power exponent must be > 0: {p}")));
        }
        PhiFunction::new(
            format!("x^{p}"),
            Arc::new(move |x: f64| x.powf(p)),
            Arc::new(move |u: f64| u.powf(1.0 / p)),
        )
    }

    #[inline]
    pub fn forward(&self, x: f64) -> f64 {
        (self.forward)(x)
    }

    #[inline]
    pub fn inverse(&self, u: f64) -> f64 {
        (self.inverse)(u)
    }
}

/// Verdict of the series convergence test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Converges,
    Diverges,
    Inconclusive,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Verdict::Converges => write!(f, "converges"),
            Verdict::Diverges => write!(f, "diverges"),
            Verdict::Inconclusive => write!(f, "inconclusive"),
        }
    }
}

/// Tail-slope margin around the boundary slope -1 below/above which the
/// verdict stays inconclusive.
const VERDICT_SLOPE_MARGIN: f64 = 0.05;

/// Partial sum of `∑ phi^{-1}(1/n) psi^{-1}(1/n)` together with a
/// convergence verdict from a log-log fit of the tail increments.
pub fn young_convergence_test(
    phi: &PhiFunction,
    psi: &PhiFunction,
    n_terms: usize,
) -> Result<(f64, Verdict)> {
    if n_terms < 1_000 {
        return Err(Error::invalid("young_convergence_test needs n_terms >= 1000"));
    }
    // Re-probe inverse monotonicity on the 1/n scale actually used.
    for f in [phi, psi] {
        let mut prev = f.inverse(1.0 / n_terms as f64);
        let mut n = n_terms / 2;
        while n >= 1 {
            let cur = f.inverse(1.0 / n as f64);
            if cur <= prev {
                return Err(Error::invalid(format!(
                    "inverse map of {} is not increasing on the probe set",
                    f.label
                )));
            }
            prev = cur;
            n /= 2;
        }
    }
    let term = |n: usize| {
        let u = 1.0 / n as f64;
        phi.inverse(u) * psi.inverse(u)
    };
    let mut partial = 0.0;
    for n in 1..=n_terms {
        partial += term(n);
    }
    // Geometric checkpoints across the last ~2.5 decades of the tail.
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut mark = n_terms as f64;
    for _ in 0..17 {
        let n = mark.round() as usize;
        if n < 8 {
            break;
        }
        let t = term(n);
        if !(t > 0.0) {
            return Ok((partial, Verdict::Inconclusive));
        }
        xs.push((n as f64).ln());
        ys.push(t.ln());
        mark /= std::f64::consts::SQRT_2;
    }
    let slope = ols_slope(&xs, &ys);
    let verdict = if slope < -1.0 - VERDICT_SLOPE_MARGIN {
        Verdict::Converges
    } else if slope >= -1.0 + VERDICT_SLOPE_MARGIN {
        Verdict::Diverges
    } else {
        Verdict::Inconclusive
    };
    Ok((partial, verdict))
}

fn ols_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    sxy / sxx
}
