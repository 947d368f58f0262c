//! Hessian measures `Φ_j^n`, `Ψ_j^n` and the polynomial `s ↦ H^n(P_s(u, A))`
//! whose coefficients are `Θ_{n−j}^n`.

mod ps;

pub use ps::{ps_volume, theta_coefficients, BaseSet, ThetaFit, DEFAULT_S_GRID};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::convexfun::{combinations, ConvexFunction, ProfileShape, RadialProfile};
use crate::error::{Error, Result};
use crate::linalg::det;
use crate::quad::{gauss_legendre, integrate_tol, sphere_rule};
use crate::transforms::conjugate;
use crate::zetaspace::ZetaProfile;
use crate::{binom, kappa, omega};

const ABS_TOL: f64 = 1e-12;
const REL_TOL: f64 = 1e-10;
const SPHERE_RES: usize = 48;

/// `[A]_k`: the sum of the `k×k` principal minors, `[A]_0 = 1`.
pub fn elementary_symmetric(a: &DMatrix<f64>, k: usize) -> Result<f64> {
    let n = a.nrows();
    if k > n {
        return Err(Error::IndexOutOfRange { index: k, max: n });
    }
    if k == 0 {
        return Ok(1.0);
    }
    let mut total = 0.0;
    combinations(n, k, |idx| {
        let minor = DMatrix::from_fn(k, k, |r, c| a[(idx[r], idx[c])]);
        total += det(&minor);
    });
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    /// `Φ_j^n`, a measure in x.
    #[default]
    Primal,
    /// `Ψ_j^n`, a measure in y.
    Dual,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    pub location: Vec<f64>,
    pub weight: f64,
}

/// Uniform mass on the sphere `center + radius·S^{n−1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpherePart {
    pub center: Vec<f64>,
    pub radius: f64,
    pub mass: f64,
}

/// `weight · H^{n−k}` on the flat where the listed coordinates are fixed.
#[derive(Debug, Clone, PartialEq)]
pub struct FlatPart {
    pub fixed: Vec<(usize, f64)>,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DensityPart {
    /// `[D²f]_j` with respect to Lebesgue measure.
    Hessian { function: ConvexFunction },
    /// `coeff·|x − center|^{−power}` outside the ball of the given radius.
    RadialExterior { center: Vec<f64>, radius: f64, coeff: f64, power: i32 },
    /// Constant density.
    Constant(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct HessianMeasure {
    pub dim: usize,
    pub j: usize,
    pub side: Side,
    pub atoms: Vec<Atom>,
    pub spheres: Vec<SpherePart>,
    pub flats: Vec<FlatPart>,
    pub densities: Vec<DensityPart>,
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// `[D²u]_j` at `x` for radial profiles, from the radial and tangential
/// eigenvalues.
pub(crate) fn radial_density(p: &RadialProfile, r: f64, j: usize) -> f64 {
    let n = p.dim;
    let (_, d1, d2) = p.jet(r);
    if j == 0 {
        return 1.0;
    }
    let tang = d1 / r;
    binom(n - 1, j) * tang.powi(j as i32) + binom(n - 1, j - 1) * d2 * tang.powi(j as i32 - 1)
}

/// `[D²f(x)]_j`, or `None` where `f` is not twice differentiable or is `+∞`.
pub fn hessian_density(f: &ConvexFunction, x: &[f64], j: usize) -> Option<f64> {
    if let ConvexFunction::RadialProfile(p) = f {
        let r = norm(x);
        if r > 0.0 && r < p.radius() {
            return Some(radial_density(p, r, j));
        }
    }
    let h = f.hessian(x).ok()?;
    elementary_symmetric(&h, j).ok()
}

impl HessianMeasure {
    fn empty(dim: usize, j: usize, side: Side) -> Self {
        HessianMeasure { dim, j, side, atoms: vec![], spheres: vec![], flats: vec![], densities: vec![] }
    }

    /// Every atom weight, sphere mass and flat weight.
    pub fn weights(&self) -> Vec<f64> {
        self.atoms
            .iter()
            .map(|a| a.weight)
            .chain(self.spheres.iter().map(|s| s.mass))
            .chain(self.flats.iter().map(|f| f.weight))
            .collect()
    }

    /// `∫ ζ(|x|) dμ(x)`.
    pub fn integrate_radial(&self, zeta: &ZetaProfile) -> Result<f64> {
        let n = self.dim;
        let top = zeta.support();
        let cuts = zeta.breakpoints();
        let mut total = 0.0;
        for a in &self.atoms {
            total += a.weight * zeta.eval(norm(&a.location));
        }
        for s in &self.spheres {
            if norm(&s.center) == 0.0 || s.radius == 0.0 {
                total += s.mass * zeta.eval((norm(&s.center) + s.radius).max(0.0));
            } else {
                let rule = sphere_rule(n, SPHERE_RES);
                let area: f64 = rule.iter().map(|(_, w)| w).sum();
                let avg: f64 = rule
                    .iter()
                    .map(|(th, w)| {
                        let p: Vec<f64> = s.center.iter().zip(th).map(|(c, t)| c + s.radius * t).collect();
                        w * zeta.eval(norm(&p))
                    })
                    .sum::<f64>()
                    / area;
                total += s.mass * avg;
            }
        }
        for f in &self.flats {
            let d = f.fixed.iter().map(|(_, c)| c * c).sum::<f64>().sqrt();
            let free = n - f.fixed.len();
            if free == 0 {
                total += f.weight * zeta.eval(d);
            } else if d < top {
                let reach = (top * top - d * d).sqrt();
                let rc: Vec<f64> = cuts.iter().filter(|b| **b > d).map(|b| (b * b - d * d).sqrt()).collect();
                let g = |p: f64| p.powi(free as i32 - 1) * zeta.eval((p * p + d * d).sqrt());
                total += f.weight * omega(free) * integrate_tol(g, 0.0, reach, &rc, ABS_TOL, REL_TOL).value;
            }
        }
        for part in &self.densities {
            total += match part {
                DensityPart::Constant(c) => c * omega(n) * zeta.moment(n as i32 - 1, 0.0),
                DensityPart::RadialExterior { center, radius, coeff, power } => {
                    if norm(center) != 0.0 {
                        return Err(Error::UnsupportedVariant("off-centre exterior density".into()));
                    }
                    let g = |r: f64| r.powi(n as i32 - 1 - power) * zeta.eval(r);
                    if *radius >= top {
                        0.0
                    } else {
                        coeff * omega(n) * integrate_tol(g, *radius, top, &cuts, ABS_TOL, REL_TOL).value
                    }
                }
                DensityPart::Hessian { function } => self.hessian_radial(function, zeta)?,
            };
        }
        Ok(total)
    }

    /// `∫ ζ(|x|) [D²f(x)]_j dx` in polar coordinates about the origin.
    fn hessian_radial(&self, f: &ConvexFunction, zeta: &ZetaProfile) -> Result<f64> {
        let n = self.dim;
        let j = self.j;
        let top = zeta.support();
        let mut cuts = zeta.breakpoints();
        if let ConvexFunction::RadialProfile(p) = f {
            cuts.extend(p.breakpoints());
            let reach = top.min(p.radius());
            let g = |r: f64| r.powi(n as i32 - 1) * zeta.eval(r) * radial_density(p, r, j);
            return Ok(omega(n) * integrate_tol(g, 0.0, reach, &cuts, ABS_TOL, REL_TOL).value);
        }
        if let ConvexFunction::Quadratic(q) = f {
            // constant density
            let c = elementary_symmetric(&q.matrix(), j)?;
            return Ok(c * omega(n) * zeta.moment(n as i32 - 1, 0.0));
        }
        let rule = sphere_rule(n, SPHERE_RES);
        let mut total = 0.0;
        for (theta, w) in &rule {
            let g = |r: f64| {
                let x: Vec<f64> = theta.iter().map(|t| t * r).collect();
                r.powi(n as i32 - 1) * zeta.eval(r) * hessian_density(f, &x, j).unwrap_or(0.0)
            };
            total += w * integrate_tol(g, 0.0, top, &cuts, 1e-10, 1e-8).value;
        }
        Ok(total)
    }

    /// `μ(B)` for the box `[lo, hi]`.
    pub fn mass_in_box(&self, lo: &[f64], hi: &[f64]) -> Result<f64> {
        let n = self.dim;
        if lo.len() != n || hi.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: lo.len() });
        }
        let inside = |x: &[f64]| x.iter().zip(lo).zip(hi).all(|((v, a), b)| *v >= *a && *v <= *b);
        let vol: f64 = lo.iter().zip(hi).map(|(a, b)| (b - a).max(0.0)).product();
        let mut total = 0.0;
        for a in &self.atoms {
            if inside(&a.location) {
                total += a.weight;
            }
        }
        for s in &self.spheres {
            let rule = sphere_rule(n, SPHERE_RES);
            let area: f64 = rule.iter().map(|(_, w)| w).sum();
            let frac: f64 = rule
                .iter()
                .filter(|(th, _)| {
                    let p: Vec<f64> = s.center.iter().zip(th).map(|(c, t)| c + s.radius * t).collect();
                    inside(&p)
                })
                .map(|(_, w)| w)
                .sum::<f64>()
                / area;
            total += s.mass * frac;
        }
        for f in &self.flats {
            if f.fixed.iter().all(|(i, c)| *c >= lo[*i] && *c <= hi[*i]) {
                let free: f64 = (0..n)
                    .filter(|i| !f.fixed.iter().any(|(k, _)| k == i))
                    .map(|i| hi[i] - lo[i])
                    .product();
                total += f.weight * free;
            }
        }
        for part in &self.densities {
            total += match part {
                DensityPart::Constant(c) => c * vol,
                DensityPart::RadialExterior { center, radius, coeff, power } => box_quadrature(lo, hi, 16, |x| {
                    let r = norm(&x.iter().zip(center).map(|(a, b)| a - b).collect::<Vec<_>>());
                    if r > *radius {
                        coeff * r.powi(-power)
                    } else {
                        0.0
                    }
                }),
                DensityPart::Hessian { function } => {
                    let j = self.j;
                    if let ConvexFunction::Quadratic(q) = function {
                        elementary_symmetric(&q.matrix(), j)? * vol
                    } else {
                        let (blo, bhi) = match function.domain_box() {
                            Some((a, b)) => (
                                lo.iter().zip(&a).map(|(x, y)| x.max(*y)).collect::<Vec<_>>(),
                                hi.iter().zip(&b).map(|(x, y)| x.min(*y)).collect::<Vec<_>>(),
                            ),
                            None => (lo.to_vec(), hi.to_vec()),
                        };
                        if blo.iter().zip(&bhi).any(|(a, b)| a >= b) {
                            0.0
                        } else {
                            box_quadrature(&blo, &bhi, 8, |x| hessian_density(function, x, j).unwrap_or(0.0))
                        }
                    }
                }
            };
        }
        Ok(total)
    }
}

/// Tensor Gauss–Legendre rule with `cells` cells of 8 nodes per axis.
fn box_quadrature(lo: &[f64], hi: &[f64], cells: usize, f: impl Fn(&[f64]) -> f64) -> f64 {
    let n = lo.len();
    let (xs, ws) = gauss_legendre(8);
    let mut nodes: Vec<Vec<(f64, f64)>> = Vec::with_capacity(n);
    for k in 0..n {
        let h = (hi[k] - lo[k]) / cells as f64;
        let mut axis = Vec::with_capacity(cells * 8);
        for c in 0..cells {
            let mid = lo[k] + (c as f64 + 0.5) * h;
            for (x, w) in xs.iter().zip(&ws) {
                axis.push((mid + 0.5 * h * x, 0.5 * h * w));
            }
        }
        nodes.push(axis);
    }
    let m = nodes[0].len();
    let total_pts = m.pow(n as u32);
    let mut x = vec![0.0; n];
    let mut total = 0.0;
    for flat in 0..total_pts {
        let mut rem = flat;
        let mut w = 1.0;
        for k in (0..n).rev() {
            let (p, wk) = nodes[k][rem % m];
            rem /= m;
            x[k] = p;
            w *= wk;
        }
        total += w * f(&x);
    }
    total
}

/// `Φ_j^n(f, ·)`: a Hessian density for C² inputs, flats and atoms for the
/// kink family, and sphere mass plus exterior density for `RadialConeV`.
pub fn phi_measure(f: &ConvexFunction, j: usize) -> Result<HessianMeasure> {
    f.validate()?;
    let n = f.dim();
    if j > n {
        return Err(Error::IndexOutOfRange { index: j, max: n });
    }
    let mut m = HessianMeasure::empty(n, j, Side::Primal);
    if j == 0 {
        m.densities.push(DensityPart::Constant(1.0));
        return Ok(m);
    }
    match f {
        ConvexFunction::Quadratic(_) | ConvexFunction::RadialProfile(_) | ConvexFunction::Grid(_) => {
            m.densities.push(DensityPart::Hessian { function: f.clone() });
        }
        ConvexFunction::KinkSum { center, .. } => {
            combinations(center.len(), j, |idx| {
                let fixed: Vec<(usize, f64)> = idx.iter().map(|&i| (i, center[i])).collect();
                if j == n {
                    let mut p = vec![0.0; n];
                    for &(i, c) in &fixed {
                        p[i] = c;
                    }
                    m.atoms.push(Atom { location: p, weight: 1.0 });
                } else {
                    m.flats.push(FlatPart { fixed, weight: 1.0 });
                }
            });
        }
        ConvexFunction::RadialConeV { t, scale, .. } => {
            let sj = scale.powi(j as i32);
            let mass = kappa(n) * binom(n, j) * t.powi((n - j) as i32) * sj;
            if *t == 0.0 {
                if j == n {
                    m.atoms.push(Atom { location: vec![0.0; n], weight: mass });
                }
            } else {
                m.spheres.push(SpherePart { center: vec![0.0; n], radius: *t, mass });
            }
            if j < n {
                m.densities.push(DensityPart::RadialExterior {
                    center: vec![0.0; n],
                    radius: *t,
                    coeff: binom(n - 1, j) * sj,
                    power: j as i32,
                });
            }
        }
        other => {
            return Err(Error::UnsupportedVariant(format!(
                "Hessian measure of {} is not implemented",
                other.variant_name()
            )))
        }
    }
    Ok(m)
}

/// `∫ ζ(|y|) dΨ_j^n(f, y)`, evaluated as `∫ ζ(|x|) dΦ_j^n(f*, x)`.
pub fn psi_via_conjugate(f: &ConvexFunction, j: usize, zeta: &ZetaProfile) -> Result<f64> {
    let star = conjugate(f).ok_or_else(|| {
        Error::UnsupportedVariant(format!("no closed-form conjugate for {}", f.variant_name()))
    })?;
    let mut m = phi_measure(&star, j)?;
    m.side = Side::Dual;
    m.integrate_radial(zeta)
}

/// `Φ_l^n(v_E + v_F, B)` for `B = B_E × B_F`, assembled from the factor
/// measures as `Σ_i Φ_i^k(v_E, B_E) Φ_{l−i}^{n−k}(v_F, B_F)`.
pub fn product_decompose(
    v_e: &ConvexFunction,
    e_axes: &[usize],
    v_f: &ConvexFunction,
    f_axes: &[usize],
    l: usize,
    lo: &[f64],
    hi: &[f64],
) -> Result<f64> {
    let n = e_axes.len() + f_axes.len();
    let mut seen = vec![false; n];
    for &a in e_axes.iter().chain(f_axes) {
        if a >= n || seen[a] {
            return Err(Error::NonAlignedSubspaces);
        }
        seen[a] = true;
    }
    let k = e_axes.len();
    if v_e.dim() != k {
        return Err(Error::DimensionMismatch { expected: k, found: v_e.dim() });
    }
    if v_f.dim() != n - k {
        return Err(Error::DimensionMismatch { expected: n - k, found: v_f.dim() });
    }
    if lo.len() != n || hi.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: lo.len() });
    }
    if l > n {
        return Err(Error::IndexOutOfRange { index: l, max: n });
    }
    let pick = |axes: &[usize], v: &[f64]| axes.iter().map(|&a| v[a]).collect::<Vec<_>>();
    let (le, he) = (pick(e_axes, lo), pick(e_axes, hi));
    let (lf, hf) = (pick(f_axes, lo), pick(f_axes, hi));
    let start = (l + k).saturating_sub(n);
    let mut total = 0.0;
    for i in start..=k.min(l) {
        let a = phi_measure(v_e, i)?.mass_in_box(&le, &he)?;
        let b = phi_measure(v_f, l - i)?.mass_in_box(&lf, &hf)?;
        total += a * b;
    }
    Ok(total)
}

pub(crate) fn as_radial(f: &ConvexFunction) -> Result<RadialProfile> {
    match f {
        ConvexFunction::RadialProfile(p) => Ok(p.clone()),
        ConvexFunction::Quadratic(q) => {
            let m = q.matrix();
            let c = m[(0, 0)];
            let iso = DMatrix::identity(q.dim(), q.dim()) * c;
            if (m - iso).abs().max() > 1e-14 || q.b.iter().any(|v| *v != 0.0) {
                return Err(Error::NonRadial);
            }
            Ok(RadialProfile { dim: q.dim(), shape: ProfileShape::Power { c: 0.5 * c, p: 2.0 } })
        }
        _ => Err(Error::NonRadial),
    }
}

/// `τ_i(u, x) = C(n−1, i)/|x|^i`, the i-th elementary symmetric function of
/// the principal curvatures of the level sphere through `x`.
pub fn level_set_curvature(f: &ConvexFunction, x: &[f64], i: usize) -> Result<f64> {
    let p = as_radial(f)?;
    let n = p.dim;
    if i >= n {
        return Err(Error::IndexOutOfRange { index: i, max: n - 1 });
    }
    let r = norm(x);
    if r == 0.0 {
        return Err(Error::OriginSingularity);
    }
    Ok(binom(n - 1, i) / r.powi(i as i32))
}

/// Radius of the sublevel ball `{u ≤ t}`.
pub fn sublevel_radius(f: &ConvexFunction, t: f64) -> Result<f64> {
    let p = as_radial(f)?;
    let phi0 = p.phi(0.0);
    if t < phi0 {
        return Err(Error::EmptyDomain);
    }
    let mut hi = p.radius();
    if !hi.is_finite() {
        hi = 1.0;
        while p.phi(hi) < t {
            hi *= 2.0;
        }
    } else if p.phi(hi) <= t {
        return Ok(hi);
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if p.phi(mid) <= t {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `Lip(u, t)`: the Lipschitz constant of `u` on `{u ≤ t}`, which is
/// `φ′(r(t))` for increasing radial profiles.
pub fn lipschitz_on_sublevel(f: &ConvexFunction, t: f64) -> Result<f64> {
    let p = as_radial(f)?;
    let r = sublevel_radius(f, t)?;
    Ok(p.jet(r.min(p.radius())).1)
}
