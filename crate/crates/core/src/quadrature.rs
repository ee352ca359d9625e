//! Gauss-Legendre and Gauss-Hermite nodes computed by Newton iteration.

use std::f64::consts::PI;

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `[-1, 1]`.
///
/// Exact for polynomials of degree `2n - 1`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = (n + 1) / 2;
    for i in 0..m {
        // Chebyshev-like initial guess.
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = 1.0;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = ((2.0 * jf + 1.0) * z * p2 - jf * p3) / (jf + 1.0);
            }
            pp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        let w = 2.0 / ((1.0 - z * z) * pp * pp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Integrates `f` over `[a, b]` with an `n`-point Gauss-Legendre rule.
pub fn integrate_gl(f: impl Fn(f64) -> f64, a: f64, b: f64, nodes: &[f64], weights: &[f64]) -> f64 {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut sum = 0.0;
    for (&x, &w) in nodes.iter().zip(weights) {
        sum += w * f(mid + half * x);
    }
    half * sum
}

/// Nodes and weights of the `n`-point Gauss-Hermite rule with weight
/// `exp(-x^2)` on the real line. Weights sum to `sqrt(pi)`.
///
/// Computed by the Golub-Welsch method: the nodes are the eigenvalues of
/// the Jacobi matrix of the orthonormal Hermite recurrence (zero diagonal,
/// off-diagonal `sqrt(j/2)`), and each weight is `sqrt(pi)` times the
/// squared first component of the corresponding eigenvector. Robust for
/// node counts in the hundreds, where Newton iteration from extrapolated
/// initial guesses can jump between roots.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    if n == 1 {
        return (vec![0.0], vec![PI.sqrt()]);
    }
    let mut jacobi = nalgebra::DMatrix::<f64>::zeros(n, n);
    for j in 1..n {
        let b = (j as f64 / 2.0).sqrt();
        jacobi[(j - 1, j)] = b;
        jacobi[(j, j - 1)] = b;
    }
    let eig = nalgebra::SymmetricEigen::new(jacobi);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|k| {
            let v0 = eig.eigenvectors[(0, k)];
            (eig.eigenvalues[k], PI.sqrt() * v0 * v0)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    // Symmetrize: the rule is exactly even, so average the mirrored halves
    // and pin the central node of odd rules to zero.
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n / 2 {
        let x = 0.5 * (pairs[n - 1 - i].0 - pairs[i].0);
        let w = 0.5 * (pairs[n - 1 - i].1 + pairs[i].1);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        weights[n / 2] = pairs[n / 2].1;
    }
    (nodes, weights)
}
