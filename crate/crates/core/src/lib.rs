//! Numerical toolkit for Riemann-Stieltjes integrals `∫ Y dX` driven by
//! fractional Brownian motion with Hurst index `H > 1/2`.
//!
//! The crate is organized around five subsystems:
//!
//! - [`gaussian_paths`]: exact fBm sampling (Cholesky and circulant embedding)
//!   plus the fBm covariance kernel.
//! - [`young_functional`]: the Young-type functional `I_f(a,b)`, its
//!   mesh-truncated variant, closed-form power-law bounds, and the classical
//!   series convergence test for `∑ φ⁻¹(1/n)ψ⁻¹(1/n)`.
//! - [`variation`]: exact grid-restricted φ-variation by dynamic programming
//!   and the indicator-process divergence experiment.
//! - [`stieltjes`]: forward/general integral sums, the certified `8·I_f` and
//!   `92·I_g` error bounds, norm diagnostics, and the convergence-rate
//!   experiment against the closed-form primitive reference.
//! - [`fbm_bounds`]: Gaussian crossing-probability bounds with an exact
//!   quadrature oracle, tail and exponential-moment identities, and
//!   integrability checks for monotone drivers.

pub mod error;
pub mod fbm_bounds;
pub mod gaussian_paths;
pub mod quadrature;
pub mod rng;
pub mod stieltjes;
pub mod variation;
pub mod young_functional;

pub use error::{Error, Result};
pub use gaussian_paths::{HurstIndex, SamplePath, TimeGrid};
