//! Singular Hessian valuations (functional intrinsic volumes) of convex
//! functions, together with the calculus they are built from: Legendre
//! transforms, Moreau–Yosida envelopes, Hessian measures, the η/ρ calculus
//! of radial weights, Abel transforms and intrinsic volumes of bodies.

pub mod convexfun;
pub mod error;
pub mod geometry;
pub mod hessmeasure;
pub mod linalg;
pub mod mc;
pub mod quad;
pub mod selfcheck;
pub mod transforms;
pub mod valuations;
pub mod zetaspace;

pub use error::{Error, Result};

/// Volume of the unit ball in ℝⁿ, `π^{n/2} / Γ(n/2 + 1)`, evaluated through
/// the recurrence `κ_n = 2π κ_{n-2} / n` so that small `n` are exact.
pub fn kappa(n: usize) -> f64 {
    match n {
        0 => 1.0,
        1 => 2.0,
        _ => 2.0 * std::f64::consts::PI / n as f64 * kappa(n - 2),
    }
}

/// Surface area of the unit sphere `S^{n-1}`, `n κ_n`.
pub fn omega(n: usize) -> f64 {
    n as f64 * kappa(n)
}

/// Binomial coefficient as a float; zero outside `0 <= k <= n`.
pub fn binom(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn ball_constants() {
        assert!((kappa(1) - 2.0).abs() < 1e-14);
        assert!((kappa(2) - PI).abs() < 1e-14);
        assert!((kappa(3) - 4.0 * PI / 3.0).abs() < 1e-14);
        assert!((omega(2) - 2.0 * PI).abs() < 1e-14);
        assert!((kappa(0) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn binomials() {
        assert_eq!(binom(5, 2), 10.0);
        assert_eq!(binom(3, 0), 1.0);
        assert_eq!(binom(2, 3), 0.0);
    }
}
