//! Closed-form and property tests for the Young-type functional, its
//! truncated variant, the power-law bounds, and the series convergence test.

use proptest::prelude::*;

use young_stieltjes::gaussian_paths::HurstIndex;
use young_stieltjes::young_functional::{
    eval_if, eval_if_parts, eval_ig_truncated, power_law_bound, young_convergence_test,
    DominatingFunction, PhiFunction, QuadConfig, Verdict,
};

fn cfg() -> QuadConfig {
    QuadConfig::default()
}

/// `I_f(0,1)` for `f(s,t) = (t-s)^alpha`:
/// `1/(alpha(alpha-1)) + 2/alpha + 1`.
fn simple_power_closed_form(alpha: f64) -> f64 {
    1.0 / (alpha * (alpha - 1.0)) + 2.0 / alpha + 1.0
}

#[test]
fn simple_power_probes_match_closed_forms() {
    for alpha in [1.5, 2.0, 3.0] {
        let f = DominatingFunction::simple_power(1.0, alpha).unwrap();
        let v = eval_if(&f, 0.0, 1.0, &cfg()).unwrap();
        let exact = simple_power_closed_form(alpha);
        assert!(
            (v - exact).abs() <= 1e-6 * exact,
            "alpha = {alpha}: {v} vs {exact}"
        );
    }
    // Spot values: 2.5 at alpha = 2 and 11/6 at alpha = 3.
    assert!((simple_power_closed_form(2.0) - 2.5).abs() < 1e-15);
    assert!((simple_power_closed_form(3.0) - 11.0 / 6.0).abs() < 1e-15);
}

#[test]
fn power_law_on_unit_interval_matches_closed_form() {
    // f(s,t) = (t-s)^alpha t^{-beta} on [0,1]:
    // I_f = 1/((alpha-1)(alpha-beta)) + 1/(alpha-beta) + 1/alpha + 1.
    let (alpha, beta) = (1.2, 0.5);
    let exact = 1.0 / ((alpha - 1.0) * (alpha - beta)) + 1.0 / (alpha - beta) + 1.0 / alpha + 1.0;
    let f = DominatingFunction::power_law(1.0, alpha, beta).unwrap();
    let v = eval_if(&f, 0.0, 1.0, &cfg()).unwrap();
    assert!((v - exact).abs() <= 1e-6 * exact, "{v} vs {exact}");
}

#[test]
fn divergent_cases_return_infinity() {
    // Nonintegrable t^{-beta} at the left endpoint.
    let f = DominatingFunction::power_law(1.0, 1.5, 1.0).unwrap();
    assert_eq!(eval_if(&f, 0.0, 1.0, &cfg()).unwrap(), f64::INFINITY);
    // Same f away from zero is finite.
    assert!(eval_if(&f, 0.5, 1.0, &cfg()).unwrap().is_finite());
    // Diagonal singularity too strong.
    let g = DominatingFunction::simple_power(1.0, 1.0).unwrap();
    assert_eq!(eval_if(&g, 0.0, 1.0, &cfg()).unwrap(), f64::INFINITY);
    // alpha > 1 restores integrability.
    let ok = DominatingFunction::simple_power(1.0, 1.01).unwrap();
    assert!(eval_if(&ok, 0.0, 1.0, &cfg()).unwrap().is_finite());
}

#[test]
fn custom_dominating_function_matches_builtin() {
    let custom = DominatingFunction::custom(
        std::sync::Arc::new(|s: f64, t: f64| (t - s) * (t - s)),
        true,
        1.0,
    )
    .unwrap();
    let builtin = DominatingFunction::simple_power(1.0, 2.0).unwrap();
    let a = eval_if(&custom, 0.0, 1.0, &cfg()).unwrap();
    let b = eval_if(&builtin, 0.0, 1.0, &cfg()).unwrap();
    // Custom kinds drop the analytic sliver below the cutoff, which is
    // O(cutoff^{alpha-1}) here — far below the comparison tolerance.
    assert!((a - b).abs() < 1e-7 * b, "{a} vs {b}");
}

#[test]
fn custom_validation_rejects_bad_functions() {
    // Nonzero on the diagonal.
    assert!(DominatingFunction::custom(std::sync::Arc::new(|_s, _t| 1.0), true, 1.0).is_err());
    // Declared monotone but decreasing in t.
    assert!(DominatingFunction::custom(
        std::sync::Arc::new(|s: f64, t: f64| (t - s) * (2.0 - t).max(0.0)),
        true,
        1.5,
    )
    .is_err());
    // Same function accepted when not declared monotone.
    assert!(DominatingFunction::custom(
        std::sync::Arc::new(|s: f64, t: f64| (t - s) * (2.0 - t).max(0.0)),
        false,
        1.5,
    )
    .is_ok());
}

#[test]
fn truncated_functional_is_monotone_in_mesh() {
    let f = DominatingFunction::power_law(1.0, 1.125, 0.375).unwrap();
    let mut prev = 0.0;
    for k in (2..9).rev() {
        let d = 2f64.powi(-k);
        let v = eval_ig_truncated(&f, 0.0, 1.0, d, &cfg()).unwrap();
        assert!(v >= prev - 1e-12, "d = {d}: {v} < {prev}");
        prev = v;
    }
    // Truncation inactive once 3d >= b - a.
    let full = eval_if(&f, 0.0, 1.0, &cfg()).unwrap();
    let coarse = eval_ig_truncated(&f, 0.0, 1.0, 0.4, &cfg()).unwrap();
    assert!((coarse - full).abs() <= 1e-9 * full);
}

#[test]
fn truncated_bound_is_dominated_by_closed_form() {
    let h = HurstIndex::new(0.75).unwrap();
    let q = 2.0;
    let (alpha, beta) = (h.value() / q + h.value(), h.value() / q);
    let f = DominatingFunction::power_law(1.0, alpha, beta).unwrap();
    for k in 2..9 {
        let d = 2f64.powi(-k);
        let quad = eval_ig_truncated(&f, 0.0, 1.0, d, &cfg()).unwrap();
        let closed = power_law_bound(1.0, h, q, 1.0, d).unwrap();
        assert!(
            quad <= closed.total * (1.0 + 1e-9),
            "d = {d}: quadrature {quad} exceeds closed-form bound {}",
            closed.total
        );
    }
}

#[test]
fn closed_form_bound_example_values() {
    let h = HurstIndex::new(0.75).unwrap();
    let b = power_law_bound(1.0, h, 2.0, 1.0, 1.0 / 64.0).unwrap();
    // term1 = (3/64)^{1/8} / ((1 - 3/8)(1/8)) = 12.8 (3/64)^{0.125}.
    let term1 = 12.8 * (3.0f64 / 64.0).powf(0.125);
    assert!((b.term1 - term1).abs() < 1e-12 * term1, "{} vs {term1}", b.term1);
    assert!((term1 - 8.7314).abs() < 1e-3);
    assert_eq!(b.remainder, 0.0);
    assert!((b.total - (b.term1 + b.term2 + b.term3)).abs() < 1e-12 * b.total);
    // Regime violations name the failed inequality.
    let err = power_law_bound(1.0, HurstIndex::new(0.6).unwrap(), 4.0, 1.0, 0.01).unwrap_err();
    assert!(err.to_string().contains("H/q + H > 1"), "got {err}");
    let err = power_law_bound(1.0, h, 2.0, 1.0, 0.5).unwrap_err();
    assert!(err.to_string().contains("d <= t_total/3"), "got {err}");
}

#[test]
fn young_series_partial_sum_matches_zeta() {
    // phi = psi = x^{3/2}: terms n^{-4/3}, sum zeta(4/3) = 3.600937750458862.
    let phi = PhiFunction::power(1.5).unwrap();
    let n_terms = 2_000_000usize;
    let (partial, verdict) = young_convergence_test(&phi, &phi, n_terms).unwrap();
    // Euler-Maclaurin tail: sum_{n>N} n^{-4/3} = 3 N^{-1/3} - N^{-4/3}/2 + O(N^{-7/3}).
    let nf = n_terms as f64;
    let tail = 3.0 * nf.powf(-1.0 / 3.0) - 0.5 * nf.powf(-4.0 / 3.0);
    let zeta_43 = 3.600937750458862;
    assert!(
        (partial + tail - zeta_43).abs() < 1e-7,
        "partial {partial} + tail {tail} vs {zeta_43}"
    );
    assert_eq!(verdict, Verdict::Converges);
}

#[test]
fn young_verdicts_follow_the_exponent() {
    let cases = [
        (1.2, 1.2, Verdict::Converges),   // 1/p + 1/q = 1.667
        (1.5, 1.5, Verdict::Converges),   // 1.333
        (2.0, 2.5, Verdict::Diverges),    // 0.9
        (3.0, 3.0, Verdict::Diverges),    // 0.667
        (2.0, 2.0, Verdict::Inconclusive) // exactly 1: boundary band
    ];
    for (p, q, expect) in cases {
        let phi = PhiFunction::power(p).unwrap();
        let psi = PhiFunction::power(q).unwrap();
        let (_, verdict) = young_convergence_test(&phi, &psi, 100_000).unwrap();
        assert_eq!(verdict, expect, "p = {p}, q = {q}");
    }
}

#[test]
fn phi_validation_rejects_broken_maps() {
    use std::sync::Arc;
    // phi(0) != 0.
    assert!(PhiFunction::new("shift", Arc::new(|x| x + 1.0), Arc::new(|u| u - 1.0)).is_err());
    // Not increasing.
    assert!(PhiFunction::new("flat", Arc::new(|_| 0.0), Arc::new(|_| 0.0)).is_err());
    // Wrong inverse.
    assert!(PhiFunction::new("mismatch", Arc::new(|x| x), Arc::new(|u| 2.0 * u)).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    /// Dilation: for f(s,t) = (t-s)^alpha, I_f(0, lambda) = lambda^alpha I_f(0,1).
    #[test]
    fn simple_power_dilation_scaling(
        alpha in 1.2f64..3.0,
        lambda in 0.25f64..4.0,
    ) {
        let f = DominatingFunction::simple_power(1.0, alpha).unwrap();
        let unit = eval_if(&f, 0.0, 1.0, &cfg()).unwrap();
        let scaled = eval_if(&f, 0.0, lambda, &cfg()).unwrap();
        let expected = lambda.powf(alpha) * unit;
        prop_assert!((scaled - expected).abs() < 1e-6 * expected,
            "lambda {lambda}: {scaled} vs {expected}");
    }

    /// Superadditivity bracket: splitting the interval can only lose the
    /// cross terms, so I_f(a,b) + I_f(b,c) <= I_f(a,c).
    #[test]
    fn interval_splitting_is_superadditive(
        alpha in 1.2f64..2.5,
        split in 0.2f64..0.8,
    ) {
        let f = DominatingFunction::simple_power(1.0, alpha).unwrap();
        let whole = eval_if(&f, 0.0, 1.0, &cfg()).unwrap();
        let left = eval_if(&f, 0.0, split, &cfg()).unwrap();
        let right = eval_if(&f, split, 1.0, &cfg()).unwrap();
        prop_assert!(left + right <= whole * (1.0 + 1e-9),
            "{left} + {right} > {whole}");
    }

    /// Doubling the quadrature resolution moves the value by < 1e-6 relative.
    #[test]
    fn quadrature_is_converged_at_default_resolution(
        alpha in 1.3f64..2.5,
        beta in 0.0f64..0.7,
    ) {
        let f = DominatingFunction::power_law(1.0, alpha, beta).unwrap();
        let base = eval_if_parts(&f, 0.0, 1.0, &cfg()).unwrap().total();
        let fine = QuadConfig::new(60, 32, 1e-12).unwrap();
        let refined = eval_if_parts(&f, 0.0, 1.0, &fine).unwrap().total();
        prop_assert!((base - refined).abs() < 1e-6 * refined.abs(),
            "{base} vs {refined}");
    }
}
