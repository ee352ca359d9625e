//! Acceptance suite: one test per acceptance criterion, each printing a
//! single pass/fail line. Run with `--nocapture` to see the lines for
//! passing criteria as well.

use std::sync::OnceLock;

use rand::Rng;

use young_stieltjes::fbm_bounds::{
    crossing_prob_exact, default_verification_grid, empirical_constant_sweep,
    gaussian_exp_identity, gaussian_tail_bound_check, ll1_bound, CrossingQuery, MonotoneDriver,
};
use young_stieltjes::gaussian_paths::{CirculantFbm, HurstIndex, TimeGrid};
use young_stieltjes::rng::{path_rng, substream_rng};
use young_stieltjes::stieltjes::{
    norm_from_samples, rs_sum, theorem3_experiment, thm2_bound, EvalRule, NormSpec, Partition,
    RateReport, RateVerdict,
};
use young_stieltjes::variation::{
    indicator_variation_experiment, phi_variation_grid, GridFunction,
};
use young_stieltjes::young_functional::{
    eval_if, eval_ig_truncated, young_convergence_test, DominatingFunction, PhiFunction,
    QuadConfig, Verdict,
};

const SEED: u64 = 20260823;

fn verdict_line(id: u32, name: &str, pass: bool) {
    println!(
        "criterion {id:02} ({name}): {}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {id:02} ({name}) failed");
}

fn mesh_ladder() -> Vec<f64> {
    (4..=12).map(|k| 2f64.powi(-k)).collect()
}

fn rate_report(driver: &MonotoneDriver, seed: u64) -> RateReport {
    theorem3_experiment(
        driver,
        HurstIndex::new(0.75).unwrap(),
        1.0,
        1.0,
        2.0,
        &mesh_ladder(),
        10_000,
        seed,
        &QuadConfig::default(),
    )
    .unwrap()
}

fn indicator_report() -> &'static RateReport {
    static REPORT: OnceLock<RateReport> = OnceLock::new();
    REPORT.get_or_init(|| rate_report(&MonotoneDriver::indicator_positive(), SEED))
}

fn identity_report() -> &'static RateReport {
    static REPORT: OnceLock<RateReport> = OnceLock::new();
    REPORT.get_or_init(|| rate_report(&MonotoneDriver::identity(), SEED + 1))
}

#[test]
fn criterion_01_indicator_rate() {
    let r = indicator_report();
    let pass = r.verdict == RateVerdict::Fitted && r.fitted_slope >= 0.35 && r.slope_ci.0 >= 0.2;
    println!(
        "  indicator: fitted slope {:.4}, 95% CI [{:.4}, {:.4}]",
        r.fitted_slope, r.slope_ci.0, r.slope_ci.1
    );
    verdict_line(1, "indicator integrand convergence rate", pass);
}

#[test]
fn criterion_02_identity_error_decay() {
    let r = identity_report();
    let mut monotone = true;
    for w in r.rows.windows(2) {
        // Meshes are decreasing, so errors must be non-increasing within
        // twice the combined standard error.
        if w[1].error > w[0].error + 2.0 * (w[0].stderr + w[1].stderr) {
            monotone = false;
        }
    }
    let last = r.rows.last().unwrap();
    let small_enough = last.error < 1e-2;
    println!(
        "  identity: final L1 error {:.3e} at d = {:.3e}",
        last.error, last.mesh
    );
    verdict_line(2, "identity integrand error decay", monotone && small_enough);
}

#[test]
fn criterion_03_centered_sum_dominance() {
    let h = HurstIndex::new(0.75).unwrap();
    let hv = h.value();
    let q = 2.0;
    // Analytically valid dominating function for Y = X = fBm on [0, 1]
    // with unit constant (Cauchy-Schwarz gives (t-s)^{2H}, which is below
    // (t-s)^{H/q+H} t^{-H/q} for t <= 1).
    let f = DominatingFunction::power_law(1.0, hv / q + hv, hv / q).unwrap();
    let cfg = QuadConfig::default();
    let n_grid = 512usize;
    let sampler = CirculantFbm::new(n_grid, 1.0, h).unwrap();
    let all_pts = sampler.grid().points().to_vec();

    // Pre-sample the path ensemble once; reuse across partitions.
    let paths: Vec<_> = (0..1_000)
        .map(|i| {
            let mut rng = path_rng(SEED + 3, i as u64);
            sampler.sample(&mut rng, "c3")
        })
        .collect();

    let mut part_rng = substream_rng(SEED + 3, 0, 6);
    let mut violations = 0usize;
    let mut checked = 0usize;
    for _ in 0..20 {
        let mut pts: Vec<f64> = all_pts[1..n_grid]
            .iter()
            .filter(|_| part_rng.gen::<f64>() < 0.1)
            .cloned()
            .collect();
        pts.insert(0, 0.0);
        pts.push(1.0);
        pts.dedup();
        if pts.len() < 3 {
            continue;
        }
        let part = Partition::new(pts.clone()).unwrap();
        let mut samples = Vec::with_capacity(paths.len());
        for x in &paths {
            let forward = rs_sum(x, x, &part, &EvalRule::Forward).unwrap();
            let y0 = x.value_at(pts[0]).unwrap();
            let span = x.value_at(*pts.last().unwrap()).unwrap() - x.value_at(pts[0]).unwrap();
            samples.push(forward - y0 * span);
        }
        let (norm, _) = norm_from_samples(&samples, NormSpec::Lp(1.0)).unwrap();
        let bound = thm2_bound(&f, &part, &cfg).unwrap();
        checked += 1;
        if norm > bound {
            violations += 1;
            println!("  violation: norm {norm} > bound {bound} ({} pts)", pts.len());
        }
    }
    println!("  centered-sum dominance: {checked} partitions checked, {violations} violations");
    verdict_line(3, "centered-sum bound dominance", checked >= 15 && violations == 0);
}

#[test]
fn criterion_04_truncated_bound_decay_and_dominance() {
    let h = HurstIndex::new(0.75).unwrap();
    let hv = h.value();
    let q = 2.0;
    let f = DominatingFunction::power_law(1.0, hv / q + hv, hv / q).unwrap();
    let cfg = QuadConfig::default();
    let meshes = mesh_ladder();
    let bounds: Vec<f64> = meshes
        .iter()
        .map(|&d| 92.0 * eval_ig_truncated(&f, 0.0, 1.0, d, &cfg).unwrap())
        .collect();
    // Log-log slope of the bound against the mesh.
    let xs: Vec<f64> = meshes.iter().map(|d| d.ln()).collect();
    let ys: Vec<f64> = bounds.iter().map(|b| b.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let theoretical = hv / q + hv - 1.0; // 0.125
    let slope_ok = (slope - theoretical).abs() <= 0.05;

    // Dominance of the calibrated bound column over the empirical error in
    // every audited cell of both rate experiments.
    let mut dominance_ok = true;
    for r in identity_report().rows.iter().chain(indicator_report().rows.iter()) {
        if r.error > r.bound92 * (1.0 + 1e-12) {
            dominance_ok = false;
            println!("  dominance violation at d = {}: {} > {}", r.mesh, r.error, r.bound92);
        }
    }
    println!(
        "  truncated bound: log-log slope {slope:.4} (target {theoretical} ± 0.05), dominance {}",
        if dominance_ok { "holds" } else { "violated" }
    );
    verdict_line(4, "truncated bound decay and dominance", slope_ok && dominance_ok);
}

#[test]
fn criterion_05_crossing_bound_sweep() {
    let grid = default_verification_grid();
    let cells = grid.len();
    let (c_min, arg) = empirical_constant_sweep(&grid, 128).unwrap();
    // Oracle cell: Brownian motion, s=1, t=2, level 0.
    let oracle = CrossingQuery::new(1.0, 2.0, 0.0, HurstIndex::new(0.5).unwrap()).unwrap();
    let p = crossing_prob_exact(oracle, 128).unwrap();
    let oracle_ok = (p - 0.125).abs() < 1e-8;
    let mut all_below = true;
    for &qy in &grid {
        let exact = crossing_prob_exact(qy, 128).unwrap();
        let bound = ll1_bound(qy, 10.0).unwrap();
        if exact > bound {
            all_below = false;
            println!(
                "  bound violated at h={}, s={}, t={}, v={}: {exact} > {bound}",
                qy.h.value(),
                qy.s,
                qy.t,
                qy.v
            );
        }
    }
    println!(
        "  crossing sweep: {cells} cells, c_min = {c_min:.4} at (h={}, s={}, t={}, v={:.3}), oracle {p:.9}",
        arg.h.value(), arg.s, arg.t, arg.v
    );
    verdict_line(
        5,
        "crossing probability bound sweep",
        cells >= 4_000 && all_below && c_min <= 10.0 && oracle_ok,
    );
}

#[test]
fn criterion_06_young_functional_closed_forms() {
    let cfg = QuadConfig::default();
    let mut ok = true;
    for alpha in [1.5f64, 2.0, 3.0] {
        let exact = 1.0 / (alpha * (alpha - 1.0)) + 2.0 / alpha + 1.0;
        let f = DominatingFunction::simple_power(1.0, alpha).unwrap();
        let v = eval_if(&f, 0.0, 1.0, &cfg).unwrap();
        if (v - exact).abs() > 1e-6 * exact {
            ok = false;
            println!("  alpha {alpha}: {v} vs {exact}");
        }
    }
    // Divergent case: left-endpoint weight not integrable at a = 0.
    let div = DominatingFunction::power_law(1.0, 1.5, 1.0).unwrap();
    let sentinel = eval_if(&div, 0.0, 1.0, &cfg).unwrap();
    let sentinel_ok = sentinel == f64::INFINITY;
    println!("  closed forms {}; divergence sentinel {sentinel}", if ok { "match" } else { "mismatch" });
    verdict_line(6, "Young functional closed forms", ok && sentinel_ok);
}

#[test]
fn criterion_07_series_verdict_grid() {
    let ps: Vec<f64> = (0..10).map(|i| 1.2 + 0.2 * i as f64).collect();
    let mut checked = 0usize;
    let mut wrong = 0usize;
    for &p in &ps {
        for &q in &ps {
            let gap = 1.0 / p + 1.0 / q - 1.0;
            if gap.abs() <= 0.05 {
                continue;
            }
            let phi = PhiFunction::power(p).unwrap();
            let psi = PhiFunction::power(q).unwrap();
            let (_, verdict) = young_convergence_test(&phi, &psi, 100_000).unwrap();
            let expected = if gap > 0.0 {
                Verdict::Converges
            } else {
                Verdict::Diverges
            };
            checked += 1;
            if verdict != expected {
                wrong += 1;
                println!("  p={p:.1}, q={q:.1}: {verdict} but expected {expected}");
            }
        }
    }
    println!("  series verdicts: {checked} off-band cells, {wrong} wrong");
    verdict_line(7, "series convergence verdict grid", checked > 50 && wrong == 0);
}

#[test]
fn criterion_08_indicator_variation_divergence() {
    let h = HurstIndex::new(0.75).unwrap();
    let phi = PhiFunction::power(1.0).unwrap();
    let depths: Vec<u32> = (6..=14).collect();
    let rows = indicator_variation_experiment(h, &phi, &depths, 500, SEED + 8).unwrap();
    let mut increasing = true;
    for w in rows.windows(2) {
        if w[1].mean_variation <= w[0].mean_variation {
            increasing = false;
            println!(
                "  depth {} -> {}: {} -> {} not increasing",
                w[0].depth, w[1].depth, w[0].mean_variation, w[1].mean_variation
            );
        }
    }
    let first = rows.first().unwrap().mean_variation;
    let last = rows.last().unwrap().mean_variation;
    let growth_ok = last >= 5.0 * first;
    println!(
        "  indicator variation: depth 6 mean {first:.3}, depth 14 mean {last:.3} ({:.1}x)",
        last / first
    );
    verdict_line(8, "indicator variation divergence", increasing && growth_ok);
}

#[test]
fn criterion_09_variation_dp_oracle() {
    let phis: Vec<PhiFunction> = [0.5, 1.0, 2.0, 3.0]
        .iter()
        .map(|&p| PhiFunction::power(p).unwrap())
        .collect();
    let mut rng = substream_rng(SEED + 9, 0, 3);
    let mut mismatches = 0usize;
    for trial in 0..1_000 {
        let n = rng.gen_range(2..=12);
        let values: Vec<f64> = if trial % 3 == 0 {
            (0..n).map(|_| rng.gen_range(0..3) as f64).collect()
        } else {
            (0..n).map(|_| rng.gen::<f64>() * 4.0 - 2.0).collect()
        };
        let phi = &phis[trial % phis.len()];
        let gf = GridFunction::new(
            TimeGrid::uniform(n - 1, 1.0).unwrap(),
            values.clone(),
        )
        .unwrap();
        let dp = phi_variation_grid(&gf, phi).unwrap();
        // Brute force over all sub-partitions containing both endpoints.
        let interior = n - 2;
        let mut best = f64::NEG_INFINITY;
        for mask in 0..(1u32 << interior) {
            let mut prev = values[0];
            let mut total = 0.0;
            for i in 0..interior {
                if mask & (1 << i) != 0 {
                    total += phi.forward((values[i + 1] - prev).abs());
                    prev = values[i + 1];
                }
            }
            total += phi.forward((values[n - 1] - prev).abs());
            best = best.max(total);
        }
        if (dp - best).abs() > 1e-12 * best.abs().max(1.0) {
            mismatches += 1;
            println!("  trial {trial}: dp {dp} vs brute {best}");
        }
    }
    println!("  variation oracle: 1000 instances, {mismatches} mismatches");
    verdict_line(9, "variation dynamic program oracle", mismatches == 0);
}

#[test]
fn criterion_10_gaussian_identities() {
    // Exponential-moment identity on a (sigma, a) grid.
    let mut identity_ok = true;
    for i in 1..=10 {
        for j in 0..=10 {
            let sigma = 0.3 * i as f64;
            let a = -3.0 + 0.6 * j as f64;
            let (lhs, rhs) = gaussian_exp_identity(sigma, a).unwrap();
            if (lhs - rhs).abs() > 1e-10 {
                identity_ok = false;
                println!("  identity off at sigma={sigma}, a={a}: {lhs} vs {rhs}");
            }
        }
    }
    // Tail bound on 10^3 points of (0, 8].
    let mut tail_ok = true;
    for k in 1..=1_000 {
        let x = 8.0 * k as f64 / 1_000.0;
        let (tail, bound) = gaussian_tail_bound_check(x).unwrap();
        if tail > bound {
            tail_ok = false;
            println!("  tail bound violated at x={x}: {tail} > {bound}");
        }
    }
    // Subadditivity of the probability-metric norm on random sample pairs.
    let mut rng = substream_rng(SEED + 10, 0, 2);
    let mut sub_ok = true;
    for _ in 0..1_000 {
        let e1: Vec<f64> = (0..64).map(|_| rng.gen::<f64>() * 6.0 - 3.0).collect();
        let e2: Vec<f64> = (0..64).map(|_| rng.gen::<f64>() * 6.0 - 3.0).collect();
        let sum: Vec<f64> = e1.iter().zip(&e2).map(|(a, b)| a + b).collect();
        let n = |v: &[f64]| norm_from_samples(v, NormSpec::ZeroNorm).unwrap().0;
        if n(&sum) > n(&e1) + n(&e2) + 1e-12 {
            sub_ok = false;
        }
    }
    println!(
        "  identities: exp-moment {}, tail {}, subadditivity {}",
        identity_ok, tail_ok, sub_ok
    );
    verdict_line(10, "Gaussian identities", identity_ok && tail_ok && sub_ok);
}
