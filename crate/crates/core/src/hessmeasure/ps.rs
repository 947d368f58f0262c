//! Monte-Carlo volumes of `P_s(u, A×ℝⁿ) = {x + s·y : x ∈ A, y ∈ ∂u(x)}`.
//!
//! A point `z` lies in `P_s` exactly when the proximal point
//! `x = (I + s∂u)⁻¹(z)` lies in `A`, so membership needs only the prox map.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::convexfun::{ConvexFunction, RadialProfile};
use crate::error::{Error, Result};
use crate::linalg::poly_fit;
use crate::mc::{hit_count, volume_from_hits};

pub const DEFAULT_S_GRID: [f64; 10] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0];

/// The x-part `A` of the region `A × ℝⁿ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BaseSet {
    Ball { center: Vec<f64>, radius: f64 },
    /// The sphere `radius·S^{n−1}` about the origin.
    Sphere { dim: usize, radius: f64 },
    Box { lo: Vec<f64>, hi: Vec<f64> },
}

impl BaseSet {
    pub fn dim(&self) -> usize {
        match self {
            BaseSet::Ball { center, .. } => center.len(),
            BaseSet::Sphere { dim, .. } => *dim,
            BaseSet::Box { lo, .. } => lo.len(),
        }
    }

    fn contains(&self, x: &[f64]) -> bool {
        match self {
            BaseSet::Ball { center, radius } => {
                x.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() <= radius * radius
            }
            BaseSet::Sphere { radius, .. } => {
                let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                (r - radius).abs() <= 1e-12 * radius.max(1.0)
            }
            BaseSet::Box { lo, hi } => x.iter().zip(lo).zip(hi).all(|((v, a), b)| v >= a && v <= b),
        }
    }

    fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            BaseSet::Ball { center, radius } => {
                (center.iter().map(|c| c - radius).collect(), center.iter().map(|c| c + radius).collect())
            }
            BaseSet::Sphere { dim, radius } => (vec![-radius; *dim], vec![*radius; *dim]),
            BaseSet::Box { lo, hi } => (lo.clone(), hi.clone()),
        }
    }

    /// Largest distance from the origin over the set.
    fn reach(&self) -> f64 {
        let (lo, hi) = self.bounds();
        lo.iter().zip(&hi).map(|(a, b)| a.abs().max(b.abs()).powi(2)).sum::<f64>().sqrt()
    }
}

/// `x ↦ (I + s∂f)⁻¹` prepared for one value of `s`.
enum Prox {
    Linear { inv: DMatrix<f64>, shift: DVector<f64> },
    Kink { center: Vec<f64>, half: f64 },
    ConeV { t: f64, step: f64 },
    ConeU { t: f64, radius: f64, s: f64 },
    Radial { profile: RadialProfile, s: f64 },
}

impl Prox {
    fn new(f: &ConvexFunction, s: f64) -> Result<Self> {
        Ok(match f {
            ConvexFunction::Quadratic(q) => {
                let n = q.dim();
                let m = DMatrix::identity(n, n) + q.matrix() * s;
                let inv = m.try_inverse().ok_or(Error::SingularHessian)?;
                let shift = -(&inv * q.vector()) * s;
                Prox::Linear { inv, shift }
            }
            ConvexFunction::KinkSum { center, .. } => Prox::Kink { center: center.clone(), half: 0.5 * s },
            ConvexFunction::RadialConeV { t, scale, .. } => Prox::ConeV { t: *t, step: s * scale },
            ConvexFunction::RadialConeU { t, radius, .. } => Prox::ConeU { t: *t, radius: *radius, s },
            ConvexFunction::RadialProfile(p) => Prox::Radial { profile: p.clone(), s },
            other => {
                return Err(Error::UnsupportedVariant(format!("no prox map for {}", other.variant_name())))
            }
        })
    }

    fn apply(&self, z: &[f64], out: &mut [f64]) {
        let r = z.iter().map(|v| v * v).sum::<f64>().sqrt();
        let radial = |out: &mut [f64], target: f64| {
            let k = if r > 0.0 { target / r } else { 0.0 };
            for (o, v) in out.iter_mut().zip(z) {
                *o = v * k;
            }
        };
        match self {
            Prox::Linear { inv, shift } => {
                for (i, o) in out.iter_mut().enumerate() {
                    *o = shift[i] + (0..z.len()).map(|k| inv[(i, k)] * z[k]).sum::<f64>();
                }
            }
            Prox::Kink { center, half } => {
                out.copy_from_slice(z);
                for (i, c) in center.iter().enumerate() {
                    let w = z[i] - c;
                    out[i] = c + w.signum() * (w.abs() - half).max(0.0);
                }
            }
            Prox::ConeV { t, step } => {
                let target = if r <= *t {
                    r
                } else if r <= t + step {
                    *t
                } else {
                    r - step
                };
                radial(out, target);
            }
            Prox::ConeU { t, radius, s } => radial(out, (r - s * t).clamp(0.0, *radius)),
            Prox::Radial { profile, s } => {
                let top = profile.radius();
                let g = |x: f64| x + s * profile.jet(x).1;
                let target = if top.is_finite() && g(top * (1.0 - 1e-14)) <= r {
                    top
                } else {
                    let (mut lo, mut hi) = (0.0, r.min(top));
                    for _ in 0..100 {
                        let mid = 0.5 * (lo + hi);
                        if g(mid) < r {
                            lo = mid;
                        } else {
                            hi = mid;
                        }
                    }
                    0.5 * (lo + hi)
                };
                radial(out, target);
            }
        }
    }
}

/// Upper bound on `|∂f|` over the base set, per coordinate.
fn slope_bound(f: &ConvexFunction, base: &BaseSet) -> Result<f64> {
    let reach = base.reach();
    Ok(match f {
        ConvexFunction::Quadratic(q) => {
            let m = q.matrix();
            let op = m.clone().symmetric_eigen().eigenvalues.amax();
            op * reach + q.vector().norm()
        }
        ConvexFunction::KinkSum { .. } => 0.5,
        ConvexFunction::RadialConeV { scale, .. } => *scale,
        ConvexFunction::RadialConeU { .. } | ConvexFunction::RadialProfile(_) => {
            return Err(Error::UnsupportedVariant(
                "bounded-domain radial functions have unbounded subgradients on the boundary".into(),
            ))
        }
        other => return Err(Error::UnsupportedVariant(format!("no prox map for {}", other.variant_name()))),
    })
}

/// `(H^n(P_s(f, A×ℝⁿ)), standard error)` from `samples` uniform points.
pub fn ps_volume(f: &ConvexFunction, base: &BaseSet, s: f64, samples: usize, seed: u64) -> Result<(f64, f64)> {
    f.validate()?;
    let n = f.dim();
    if base.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, found: base.dim() });
    }
    if s < 0.0 {
        return Err(Error::NonpositiveScale(s));
    }
    if samples == 0 {
        return Err(Error::InvalidInput("need at least one sample".into()));
    }
    let grow = s * slope_bound(f, base)?;
    let (lo, hi) = base.bounds();
    let lo: Vec<f64> = lo.iter().map(|v| v - grow).collect();
    let hi: Vec<f64> = hi.iter().map(|v| v + grow).collect();
    let box_volume: f64 = lo.iter().zip(&hi).map(|(a, b)| b - a).product();
    let prox = Prox::new(f, s)?;
    let hits = hit_count(seed, samples, n, |u| {
        let mut z = [0.0; 8];
        let mut x = [0.0; 8];
        for k in 0..n {
            z[k] = lo[k] + (hi[k] - lo[k]) * u[k];
        }
        prox.apply(&z[..n], &mut x[..n]);
        base.contains(&x[..n])
    });
    Ok(volume_from_hits(hits, samples, box_volume))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaFit {
    /// `coefficients[j]` multiplies `s^j` and estimates `Θ^n_{n−j}(f, A×ℝⁿ) = Φ_j(f, A)`.
    pub coefficients: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub condition: f64,
    pub s: Vec<f64>,
    pub volumes: Vec<f64>,
    pub volume_errors: Vec<f64>,
}

/// Fits the degree-`n` polynomial `s ↦ H^n(P_s)` through Monte-Carlo volumes
/// on `s_grid`, weighting each node by its standard error. Node `k` draws
/// from seed `seed + k·0x9E3779B97F4A7C15` so node errors are independent.
pub fn theta_coefficients(
    f: &ConvexFunction,
    base: &BaseSet,
    s_grid: &[f64],
    samples: usize,
    seed: u64,
) -> Result<ThetaFit> {
    let n = f.dim();
    let mut volumes = Vec::with_capacity(s_grid.len());
    let mut errors = Vec::with_capacity(s_grid.len());
    for (k, &s) in s_grid.iter().enumerate() {
        let node_seed = seed.wrapping_add((k as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let (v, e) = ps_volume(f, base, s, samples, node_seed)?;
        volumes.push(v);
        errors.push(e);
    }
    let fit = poly_fit(s_grid, &volumes, Some(&errors), n)?;
    Ok(ThetaFit {
        coefficients: fit.coefficients,
        std_errors: fit.std_errors,
        condition: fit.condition,
        s: s_grid.to_vec(),
        volumes,
        volume_errors: errors,
    })
}
