//! Rotational epi-symmetrization: the radial function whose conjugate is
//! the rotation average of `u*`.

use super::legendre::{conjugate, conjugate_1d, conjugate_at, quaternion_matrix};
use crate::convexfun::{ConvexFunction, ProfileShape, RadialProfile, INF};
use crate::error::{Error, Result};

const SLOPE_SAMPLES: usize = 4001;
const RADIUS_SAMPLES: usize = 401;

/// Unit directions `ϑ⁻¹e₁` for the sampled rotations: equispaced angles in
/// the plane, and Shoemake quaternions driven by a low-discrepancy
/// sequence in 3-D.
pub fn rotation_directions(dim: usize, m: usize) -> Result<Vec<Vec<f64>>> {
    match dim {
        2 => Ok((0..m)
            .map(|k| {
                let a = 2.0 * std::f64::consts::PI * k as f64 / m as f64;
                vec![a.cos(), a.sin()]
            })
            .collect()),
        3 => {
            // additive recurrence with the generalized golden ratio
            let phi: f64 = 1.220_744_084_605_759_5;
            let alpha = [1.0 / phi, 1.0 / (phi * phi), 1.0 / (phi * phi * phi)];
            Ok((0..m)
                .map(|k| {
                    let u: Vec<f64> = alpha.iter().map(|a| (0.5 + a * (k + 1) as f64).fract()).collect();
                    let (s1, s2) = ((1.0 - u[0]).sqrt(), u[0].sqrt());
                    let tau = 2.0 * std::f64::consts::PI;
                    let q = [s2 * (tau * u[2]).cos(), s1 * (tau * u[1]).sin(), s1 * (tau * u[1]).cos(), s2 * (tau * u[2]).sin()];
                    let r = quaternion_matrix(q);
                    // ϑ⁻¹ e₁ = ϑᵀ e₁, the first row of ϑ
                    (0..3).map(|j| r[(0, j)]).collect()
                })
                .collect())
        }
        _ => Err(Error::InvalidInput(format!("episymmetrization needs n in {{2, 3}}, got {dim}"))),
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Support function of the effective domain in direction `theta`.
fn domain_support(f: &ConvexFunction, theta: &[f64]) -> Result<f64> {
    Ok(match f {
        ConvexFunction::Grid(g) => (0..g.len())
            .filter(|&i| g.values()[i] < INF)
            .map(|i| dot(theta, &g.node(i)))
            .fold(f64::NEG_INFINITY, f64::max),
        ConvexFunction::RadialConeU { radius, .. } => *radius,
        ConvexFunction::RadialProfile(p) if p.radius().is_finite() => p.radius(),
        ConvexFunction::IndicatorLinear { polytope, .. } => polytope.support(theta),
        ConvexFunction::PiecewiseAffine(p) => p
            .pieces
            .iter()
            .map(|q| q.polytope.support(theta))
            .fold(f64::NEG_INFINITY, f64::max),
        _ => return Err(Error::UnboundedDomain),
    })
}

/// Rough bound on `|∇u|` over the domain, used to size the slope axis.
fn slope_bound(f: &ConvexFunction) -> f64 {
    match f {
        ConvexFunction::Grid(g) => {
            let strides = g.strides();
            let mut best: f64 = 0.0;
            for k in 0..g.dim() {
                let h = g.spacing(k);
                if h == 0.0 {
                    continue;
                }
                for flat in 0..g.len() {
                    if g.unravel(flat)[k] + 1 < g.shape()[k] {
                        let (a, b) = (g.values()[flat], g.values()[flat + strides[k]]);
                        if a < INF && b < INF {
                            best = best.max(((b - a) / h).abs());
                        }
                    }
                }
            }
            best * (g.dim() as f64).sqrt()
        }
        ConvexFunction::RadialConeU { t, .. } => *t,
        ConvexFunction::RadialProfile(p) => p.jet(p.radius()).1.abs(),
        ConvexFunction::IndicatorLinear { slope, .. } => dot(slope, slope).sqrt(),
        ConvexFunction::PiecewiseAffine(p) => p
            .pieces
            .iter()
            .map(|q| dot(&q.slope, &q.slope).sqrt())
            .fold(0.0, f64::max),
        _ => 1.0,
    }
}

/// `s ↦ u*(sθ)` on the slope axis.
fn ray_conjugate(f: &ConvexFunction, closed: Option<&ConvexFunction>, theta: &[f64], s: &[f64]) -> Result<Vec<f64>> {
    if let ConvexFunction::Grid(g) = f {
        // project the finite nodes on θ and take the 1-D conjugate of the
        // lower envelope of (⟨θ, x⟩, u(x))
        let mut pts: Vec<(f64, f64)> = (0..g.len())
            .filter(|&i| g.values()[i] < INF)
            .map(|i| (dot(theta, &g.node(i)), g.values()[i]))
            .collect();
        pts.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.partial_cmp(&b.1).unwrap()));
        pts.dedup_by(|b, a| (a.0 - b.0).abs() <= 1e-12 * (1.0 + a.0.abs()));
        let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
        let vs: Vec<f64> = pts.iter().map(|p| p.1).collect();
        return Ok(conjugate_1d(&xs, &vs, s));
    }
    s.iter()
        .map(|&si| {
            let y: Vec<f64> = theta.iter().map(|t| t * si).collect();
            match closed {
                Some(c) => c.evaluate(&y),
                None => conjugate_at(f, &y),
            }
        })
        .collect()
}

/// Approximates `u⋆` by averaging `u*` over `m` sampled rotations and
/// conjugating the resulting radial function back. The output is a sampled
/// radial profile on the averaged domain radius.
pub fn rotational_episymmetrize(f: &ConvexFunction, m: usize) -> Result<ConvexFunction> {
    let dim = f.dim();
    if m == 0 {
        return Err(Error::InvalidInput("need at least one rotation".into()));
    }
    let dirs = rotation_directions(dim, m)?;
    let closed = conjugate(f);
    let smax = 2.0 * slope_bound(f) + 1.0;
    let s: Vec<f64> = (0..SLOPE_SAMPLES)
        .map(|i| smax * i as f64 / (SLOPE_SAMPLES - 1) as f64)
        .collect();
    let mut w = vec![0.0; s.len()];
    let mut radius = 0.0;
    for theta in &dirs {
        let ray = ray_conjugate(f, closed.as_ref(), theta, &s)?;
        for (acc, v) in w.iter_mut().zip(&ray) {
            *acc += v / m as f64;
        }
        radius += domain_support(f, theta)? / m as f64;
    }
    if !radius.is_finite() {
        return Err(Error::UnboundedDomain);
    }
    if radius <= 0.0 {
        // the averaged domain is a point
        let r = vec![0.0, 1e-12];
        let v = -w[0];
        return Ok(ConvexFunction::RadialProfile(RadialProfile {
            dim,
            shape: ProfileShape::Sampled { r, values: vec![v, v] },
        }));
    }
    let r: Vec<f64> = (0..RADIUS_SAMPLES)
        .map(|i| radius * i as f64 / (RADIUS_SAMPLES - 1) as f64)
        .collect();
    let values = conjugate_1d(&s, &w, &r);
    Ok(ConvexFunction::RadialProfile(RadialProfile { dim, shape: ProfileShape::Sampled { r, values } }))
}
