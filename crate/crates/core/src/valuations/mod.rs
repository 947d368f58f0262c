//! The valuations `Z_{j,ζ}(u) = ∫ ζ(|∇u|) [D²u]_{n−j} dx` on super-coercive
//! functions and `Z*_{j,ζ}(v) = ∫ ζ(|x|) [D²v]_j dx` on finite ones.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::convexfun::{
    epi_multiply, pointwise_max, pointwise_min, AffinePiece, ConvexFunction, PiecewiseAffine, PiecewiseQuadratic,
    RadialProfile,
};
use crate::error::{Error, Result};
use crate::hessmeasure::{
    as_radial, elementary_symmetric, level_set_curvature, lipschitz_on_sublevel, phi_measure, psi_via_conjugate,
    radial_density, sublevel_radius, Side,
};
use crate::linalg::{det, solve_pivoted};
use crate::quad::integrate_tol;
use crate::transforms::moreau_yosida;
use crate::zetaspace::{certify_class, eta, rho, ZetaProfile};
use crate::{binom, kappa, omega};

const ABS_TOL: f64 = 1e-12;
const REL_TOL: f64 = 1e-10;
/// Vandermonde solves above this condition number are refused.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Route {
    #[default]
    Quadrature,
    ClosedForm,
    /// Envelopes `M_λu` for each λ, then the Vandermonde combination.
    /// Defaults to `λ = 1, …, j+1`.
    Moreau {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        lambdas: Option<Vec<f64>>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValuationSpec {
    pub dim: usize,
    pub j: usize,
    pub zeta: ZetaProfile,
    #[serde(default)]
    pub side: Side,
    #[serde(default)]
    pub route: Route,
}

impl ValuationSpec {
    pub fn new(dim: usize, j: usize, zeta: ZetaProfile) -> Self {
        ValuationSpec { dim, j, zeta, side: Side::Primal, route: Route::Quadrature }
    }

    pub fn dual(mut self) -> Self {
        self.side = Side::Dual;
        self
    }

    pub fn with_route(mut self, route: Route) -> Self {
        self.route = route;
        self
    }

    pub fn with_j(&self, j: usize) -> Self {
        ValuationSpec { j, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::InvalidInput("dimension must be positive".into()));
        }
        if self.j > self.dim {
            return Err(Error::IndexOutOfRange { index: self.j, max: self.dim });
        }
        self.zeta.validate()?;
        if let Some([cj, cn]) = self.zeta.class {
            if cj != self.j || cn != self.dim {
                return Err(Error::ClassViolation(format!(
                    "ζ is tagged H_{cj}^{cn} but the valuation has degree {} in dimension {}",
                    self.j, self.dim
                )));
            }
        }
        if let Route::Moreau { lambdas: Some(l) } = &self.route {
            if l.iter().any(|x| !(*x > 0.0) || !x.is_finite()) {
                return Err(Error::NonpositiveScale(l.iter().copied().find(|x| !(*x > 0.0)).unwrap_or(f64::NAN)));
            }
        }
        Ok(())
    }

    fn check_fn(&self, f: &ConvexFunction) -> Result<()> {
        self.validate()?;
        f.validate()?;
        if f.dim() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: f.dim() });
        }
        Ok(())
    }
}

/// `Z_0 = ω_n ∫_0^∞ r^{n−1} ζ(r) dr`, the same for every function.
pub fn degree_zero_constant(zeta: &ZetaProfile, n: usize) -> f64 {
    omega(n) * zeta.moment(n as i32 - 1, 0.0)
}

/// Evaluates the valuation along the route named in the spec.
pub fn valuate(spec: &ValuationSpec, f: &ConvexFunction) -> Result<f64> {
    match &spec.route {
        Route::Quadrature => valuate_smooth(spec, f),
        Route::ClosedForm => valuate_closed_form(spec, f),
        Route::Moreau { .. } => valuate_moreau(spec, f).map(|m| m.value),
    }
}

/// Direct evaluation of the defining integral.
///
/// Primal side: quadratics through `y = ∇u(x)`, radial profiles and 1-D
/// piecewise quadratics by 1-D quadrature, grids by a node sum, and the
/// remaining variants through `∫ ζ dΦ_j(u*)` when `u*` has a closed form.
/// Dual side: the Hessian measure `Φ_j(v)` integrated against `ζ(|x|)`.
pub fn valuate_smooth(spec: &ValuationSpec, f: &ConvexFunction) -> Result<f64> {
    spec.check_fn(f)?;
    let (n, j) = (spec.dim, spec.j);
    let zeta = &spec.zeta;
    if j == 0 {
        return Ok(degree_zero_constant(zeta, n));
    }
    match spec.side {
        Side::Primal => primal(f, n, j, zeta),
        Side::Dual => match f {
            ConvexFunction::PiecewiseQuadratic(p) => Ok(dual_pwq(p, zeta)),
            _ => phi_measure(f, j)?.integrate_radial(zeta),
        },
    }
}

fn primal(f: &ConvexFunction, n: usize, j: usize, zeta: &ZetaProfile) -> Result<f64> {
    match f {
        ConvexFunction::Quadratic(q) => {
            let m = q.matrix();
            let eig = m.clone().symmetric_eigen().eigenvalues;
            if eig.min() <= 1e-12 * eig.amax().max(1e-300) {
                return Err(Error::SingularHessian);
            }
            // y = Qx + b is a bijection with constant Jacobian det Q
            Ok(elementary_symmetric(&m, n - j)? / det(&m) * degree_zero_constant(zeta, n))
        }
        ConvexFunction::RadialProfile(p) => primal_radial(p, j, zeta),
        ConvexFunction::PiecewiseQuadratic(p) => primal_pwq(p, zeta),
        ConvexFunction::Grid(g) => {
            let cell: f64 = (0..n).map(|k| g.spacing(k)).product();
            let mut total = 0.0;
            for flat in 0..g.len() {
                let idx = g.unravel(flat);
                if idx.iter().zip(g.shape()).any(|(i, s)| *i == 0 || *i + 1 >= *s) {
                    continue;
                }
                let x = g.node(flat);
                let (Ok(grad), Ok(h)) = (f.gradient(&x), f.hessian(&x)) else { continue };
                let norm = grad.iter().map(|v| v * v).sum::<f64>().sqrt();
                total += zeta.eval(norm) * elementary_symmetric(&h, n - j)? * cell;
            }
            Ok(total)
        }
        ConvexFunction::PiecewiseAffine(_) | ConvexFunction::IndicatorLinear { .. } if j == n => {
            Ok(pwa_pieces(f)?.iter().map(|p| zeta.eval(norm(&p.slope)) * p.polytope.volume()).sum())
        }
        _ => psi_via_conjugate(f, j, zeta),
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn pwa_pieces(f: &ConvexFunction) -> Result<Vec<AffinePiece>> {
    match f {
        ConvexFunction::PiecewiseAffine(p) => Ok(p.pieces.clone()),
        ConvexFunction::IndicatorLinear { polytope, slope, offset } => {
            Ok(vec![AffinePiece { slope: slope.clone(), offset: *offset, polytope: polytope.clone() }])
        }
        other => Err(Error::UnsupportedVariant(format!("{} is not piecewise affine", other.variant_name()))),
    }
}

/// `ω_n ∫ r^{n−1} ζ(φ′(r)) [D²u]_{n−j}(r) dr` up to the radius where `φ′`
/// leaves the support of ζ.
fn primal_radial(p: &RadialProfile, j: usize, zeta: &ZetaProfile) -> Result<f64> {
    let n = p.dim;
    let top = zeta.support();
    let reach = p.inverse_slope(top);
    if !reach.is_finite() {
        return Err(Error::UnboundedResult);
    }
    if p.radius().is_finite() && reach >= p.radius() && p.jet(p.radius() * (1.0 - 1e-12)).1 < top {
        return Err(Error::UnsupportedVariant(
            "the gradient image stops short of the support of ζ at the domain boundary".into(),
        ));
    }
    let mut cuts = p.breakpoints();
    cuts.extend(zeta.breakpoints().into_iter().filter(|b| *b < top).map(|b| p.inverse_slope(b)));
    cuts.extend([1e-4, 1e-2].map(|c| c * reach));
    cuts.retain(|c| *c > 0.0 && *c < reach);
    let g = |r: f64| r.powi(n as i32 - 1) * zeta.eval(p.jet(r).1) * radial_density(p, r, n - j);
    Ok(omega(n) * integrate_tol(g, 0.0, reach, &cuts, ABS_TOL, REL_TOL).value)
}

/// Pieces of a 1-D piecewise quadratic as `(lo, hi, [a, b, c])`.
fn pwq_pieces(p: &PiecewiseQuadratic) -> Vec<(f64, f64, [f64; 3])> {
    let mut edges = vec![f64::NEG_INFINITY];
    edges.extend(&p.knots);
    edges.push(f64::INFINITY);
    p.pieces.iter().enumerate().map(|(i, c)| (edges[i], edges[i + 1], *c)).collect()
}

/// `∫ ζ(|u′(x)|) dx`, the degree-1 primal valuation in dimension one.
fn primal_pwq(p: &PiecewiseQuadratic, zeta: &ZetaProfile) -> Result<f64> {
    let top = zeta.support();
    let mut total = 0.0;
    for (lo, hi, [_, b, c]) in pwq_pieces(p) {
        if c == 0.0 {
            if b.abs() >= top {
                continue;
            }
            if !(hi - lo).is_finite() {
                return Err(Error::UnboundedResult);
            }
            total += zeta.eval(b.abs()) * (hi - lo);
            continue;
        }
        // |b + c x| < S on an interval around −b/c
        let (e0, e1) = ((-top - b) / c, (top - b) / c);
        let (a, z) = (lo.max(e0.min(e1)), hi.min(e0.max(e1)));
        if a >= z {
            continue;
        }
        let mut cuts: Vec<f64> = zeta.breakpoints().iter().flat_map(|s| [(s - b) / c, (-s - b) / c]).collect();
        cuts.push(-b / c);
        total += integrate_tol(|x| zeta.eval((b + c * x).abs()), a, z, &cuts, ABS_TOL, REL_TOL).value;
    }
    Ok(total)
}

/// `∫ ζ(|x|) v″(x) dx` plus the slope jumps at the knots.
fn dual_pwq(p: &PiecewiseQuadratic, zeta: &ZetaProfile) -> f64 {
    let top = zeta.support();
    let mut cuts = zeta.breakpoints();
    cuts.extend(zeta.breakpoints().iter().map(|b| -b));
    cuts.push(0.0);
    let mut total = 0.0;
    for (lo, hi, [_, _, c]) in pwq_pieces(p) {
        let (a, z) = (lo.max(-top), hi.min(top));
        if a < z && c != 0.0 {
            total += c * integrate_tol(|x| zeta.eval(x.abs()), a, z, &cuts, ABS_TOL, REL_TOL).value;
        }
    }
    for (k, x) in p.knots.iter().enumerate() {
        let (l, r) = (p.pieces[k], p.pieces[k + 1]);
        let jump = (r[1] + r[2] * x) - (l[1] + l[2] * x);
        total += zeta.eval(x.abs()) * jump;
    }
    total
}

/// `κ_n C(n,j) ρ(t)`, the value on `u_t` (primal) and on `v_t` (dual).
pub fn valuate_cone(spec: &ValuationSpec, t: f64) -> Result<f64> {
    spec.validate()?;
    let (n, j) = (spec.dim, spec.j);
    if t < 0.0 {
        return Err(Error::InvalidInput(format!("cone parameter must be non-negative, got {t}")));
    }
    certify_class(&spec.zeta, j, n)?;
    Ok(kappa(n) * binom(n, j) * rho(&spec.zeta, j, n, t)?)
}

/// Closed forms: quadratics on either side, `u_t = t|x| + I_{RB}` on the
/// primal side and `v_t = s·max(0, |x| − t)` on the dual side.
pub fn valuate_closed_form(spec: &ValuationSpec, f: &ConvexFunction) -> Result<f64> {
    spec.check_fn(f)?;
    let (n, j) = (spec.dim, spec.j);
    let zeta = &spec.zeta;
    let cone = |t: f64, scale: f64| -> Result<f64> {
        match j {
            0 => Ok(degree_zero_constant(zeta, n)),
            _ if j == n => Ok(kappa(n) * zeta.eval(t) * scale.powi(n as i32)),
            _ => Ok(valuate_cone(spec, t)? * scale.powi(j as i32)),
        }
    };
    match (spec.side, f) {
        (_, ConvexFunction::Quadratic(q)) => {
            let m = q.matrix();
            match spec.side {
                Side::Primal => primal(f, n, j, zeta),
                Side::Dual => Ok(elementary_symmetric(&m, j)? * degree_zero_constant(zeta, n)),
            }
        }
        (Side::Primal, ConvexFunction::RadialConeU { t, radius, .. }) => cone(*t, *radius),
        (Side::Dual, ConvexFunction::RadialConeV { t, scale, .. }) => cone(*t, *scale),
        (side, other) => Err(Error::UnsupportedVariant(format!(
            "no closed form for {} on the {:?} side",
            other.variant_name(),
            side
        ))),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MoreauValuation {
    pub value: f64,
    pub condition: f64,
    pub lambdas: Vec<f64>,
    /// `Z_{j,ζ}(M_λ u)` for each λ.
    pub envelope_values: Vec<f64>,
    /// `Z_{i,ζ}(u)` for `i = 0, …, j` from the solve.
    pub components: Vec<f64>,
}

/// `Z_{j,ζ,λ}(u) = Z_{j,ζ}(M_λ u)` by quadrature on the envelope.
pub fn envelope_valuation(spec: &ValuationSpec, u: &ConvexFunction, lambda: f64) -> Result<f64> {
    let env = moreau_yosida(u, lambda)?;
    let direct = ValuationSpec { side: Side::Primal, route: Route::Quadrature, ..spec.clone() };
    valuate_smooth(&direct, &env)
}

/// Solves `Z_{j,ζ,λ}(u) = Σ_{i≤j} C(n−i, j−i) λ^{j−i} Z_{i,ζ}(u)` over the
/// λ-list and returns the degree-`j` unknown.
pub fn valuate_moreau(spec: &ValuationSpec, u: &ConvexFunction) -> Result<MoreauValuation> {
    spec.check_fn(u)?;
    if spec.side != Side::Primal {
        return Err(Error::UnsupportedVariant("the Moreau route evaluates primal valuations".into()));
    }
    let (n, j) = (spec.dim, spec.j);
    let lambdas = match &spec.route {
        Route::Moreau { lambdas: Some(l) } => l.clone(),
        _ => (1..=j + 1).map(|k| k as f64).collect(),
    };
    if lambdas.len() != j + 1 {
        return Err(Error::InvalidInput(format!("the Moreau route needs {} values of λ", j + 1)));
    }
    let envelope_values =
        lambdas.iter().map(|&l| envelope_valuation(spec, u, l)).collect::<Result<Vec<f64>>>()?;
    let a = DMatrix::from_fn(j + 1, j + 1, |k, i| {
        if i <= j {
            binom(n - i, j - i) * lambdas[k].powi((j - i) as i32)
        } else {
            0.0
        }
    });
    let solved = solve_pivoted(&a, &DVector::from_column_slice(&envelope_values))?;
    if !(solved.condition <= MAX_CONDITION) {
        return Err(Error::IllConditionedVandermonde { condition: solved.condition });
    }
    let components: Vec<f64> = solved.x.iter().copied().collect();
    Ok(MoreauValuation { value: components[j], condition: solved.condition, lambdas, envelope_values, components })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Components {
    /// `Z_0(u), …, Z_n(u)`.
    pub values: Vec<f64>,
    pub condition: f64,
    /// `|Σ Z_i(u) − Z(u)|`.
    pub sum_residual: f64,
}

/// Splits `Z(u)` into epi-homogeneous parts from `Z(λ∘u) = Σ λ^i Z_i(u)` at
/// `λ = 1, …, n+1`.
pub fn homogeneous_components<F>(z: F, u: &ConvexFunction, n: usize) -> Result<Components>
where
    F: Fn(&ConvexFunction) -> Result<f64>,
{
    let lambdas: Vec<f64> = (1..=n + 1).map(|k| k as f64).collect();
    let values = lambdas
        .iter()
        .map(|&l| if l == 1.0 { z(u) } else { z(&epi_multiply(u, l)?) })
        .collect::<Result<Vec<f64>>>()?;
    let a = DMatrix::from_fn(n + 1, n + 1, |k, i| lambdas[k].powi(i as i32));
    let solved = solve_pivoted(&a, &DVector::from_column_slice(&values))?;
    if !(solved.condition <= MAX_CONDITION) {
        return Err(Error::IllConditionedVandermonde { condition: solved.condition });
    }
    let parts: Vec<f64> = solved.x.iter().copied().collect();
    let sum_residual = (parts.iter().sum::<f64>() - values[0]).abs();
    Ok(Components { values: parts, condition: solved.condition, sum_residual })
}

/// `|Z(u) + Z(v) − Z(u∨v) − Z(u∧v)|`.
pub fn valuation_property_check(spec: &ValuationSpec, u: &ConvexFunction, v: &ConvexFunction) -> Result<f64> {
    let hi = pointwise_max(u, v)?;
    let lo = pointwise_min(u, v)?;
    let z = |f: &ConvexFunction| valuate(spec, f);
    Ok((z(u)? + z(v)? - z(&hi)? - z(&lo)?).abs())
}

/// `|Z(u) − Σ Z(ℓ_i + I_{P_i})|` for a dissection of a piecewise-affine `u`
/// into affine pieces.
pub fn dissection_residual(spec: &ValuationSpec, u: &ConvexFunction, pieces: &[AffinePiece]) -> Result<f64> {
    let whole = valuate(spec, u)?;
    let mut parts = 0.0;
    for p in pieces {
        let f = ConvexFunction::IndicatorLinear { polytope: p.polytope.clone(), slope: p.slope.clone(), offset: p.offset };
        parts += valuate(spec, &f)?;
    }
    Ok((whole - parts).abs())
}

/// Builds the piecewise-affine function with the given pieces, checking
/// convexity.
pub fn piecewise_affine(dim: usize, pieces: Vec<AffinePiece>) -> Result<ConvexFunction> {
    Ok(ConvexFunction::PiecewiseAffine(PiecewiseAffine::new(dim, pieces)?))
}

/// Largest change of `Z` under `u ↦ u(· − x0) + α` and `u ↦ u ∘ ϑ⁻¹` on the
/// primal side; on the dual side the translation becomes adding
/// `⟨x0, ·⟩ + α`.
pub fn invariance_check(
    spec: &ValuationSpec,
    u: &ConvexFunction,
    x0: &[f64],
    alpha: f64,
    rot: &DMatrix<f64>,
) -> Result<f64> {
    let base = valuate(spec, u)?;
    let moved = match spec.side {
        Side::Primal => u.translate(x0, alpha)?,
        Side::Dual => match u {
            ConvexFunction::Quadratic(q) => {
                let mut q = q.clone();
                q.b.iter_mut().zip(x0).for_each(|(b, s)| *b += s);
                q.c += alpha;
                ConvexFunction::Quadratic(q)
            }
            other => {
                return Err(Error::UnsupportedVariant(format!(
                    "adding a linear term to {} is not representable",
                    other.variant_name()
                )))
            }
        },
    };
    let shifted = valuate(spec, &moved)?;
    let turned = valuate(spec, &u.rotate(rot)?)?;
    Ok((shifted - base).abs().max((turned - base).abs()))
}

/// The five integrals of the integration-by-parts identity on
/// `{t₁ < u ≤ t₂}` for a radial `u`, with the a-priori bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReillyCheck {
    /// `∫ ζ(|∇u|) [D²u]_{n−j} dx`.
    pub lhs: f64,
    /// `∫ ρ(|∇u|) τ_{n−j} dx`.
    pub bulk: f64,
    /// `∫_{u=t₂} η(|∇u|) τ_{n−j−1} dH^{n−1}`.
    pub outer: f64,
    /// `∫_{u=t₁} η(|∇u|) τ_{n−j−1} dH^{n−1}`.
    pub inner: f64,
    pub residual: f64,
    /// `α V_j({u ≤ t₂}) (max|ρ| + max|η|)` over `[0, Lip(u, t₂)]`.
    pub bound: f64,
}

/// `j`-th intrinsic volume of the ball of radius `r`.
pub fn ball_intrinsic_volume(n: usize, j: usize, r: f64) -> f64 {
    binom(n, j) * kappa(n) / kappa(n - j) * r.powi(j as i32)
}

pub fn reilly_identity_check(
    zeta: &ZetaProfile,
    j: usize,
    u: &ConvexFunction,
    t1: f64,
    t2: f64,
) -> Result<ReillyCheck> {
    let p = as_radial(u)?;
    let n = p.dim;
    if j == 0 || j >= n {
        return Err(Error::IndexOutOfRange { index: j, max: n - 1 });
    }
    if !(t1 > 0.0) || t2 < t1 {
        return Err(Error::InvalidInput("levels must satisfy 0 < t₁ ≤ t₂".into()));
    }
    let (r1, r2) = (sublevel_radius(u, t1)?, sublevel_radius(u, t2)?);
    let on_ray = |r: f64| {
        let mut x = vec![0.0; n];
        x[0] = r;
        x
    };
    let w = omega(n);
    let mut cuts = p.breakpoints();
    cuts.extend(zeta.breakpoints().into_iter().map(|b| p.inverse_slope(b)));
    let lhs_f = |r: f64| r.powi(n as i32 - 1) * zeta.eval(p.jet(r).1) * radial_density(&p, r, n - j);
    let lhs = w * integrate_tol(lhs_f, r1, r2, &cuts, ABS_TOL, REL_TOL).value;
    let tau = |r: f64, i: usize| level_set_curvature(u, &on_ray(r), i);
    let bulk_f = |r: f64| {
        r.powi(n as i32 - 1) * rho(zeta, j, n, p.jet(r).1).unwrap_or(f64::NAN) * tau(r, n - j).unwrap_or(f64::NAN)
    };
    let bulk = if r2 > r1 { w * integrate_tol(bulk_f, r1, r2, &cuts, ABS_TOL, REL_TOL).value } else { 0.0 };
    let boundary = |r: f64| -> Result<f64> {
        Ok(w * r.powi(n as i32 - 1) * eta(zeta, j, n, p.jet(r).1)? * tau(r, n - j - 1)?)
    };
    let outer = boundary(r2)?;
    let inner = boundary(r1)?;
    if bulk.is_nan() {
        return Err(Error::OriginSingularity);
    }
    let residual = (lhs - (bulk - outer + inner)).abs();

    // τ-integrals over balls: κ_{n−j} on the bulk, (n−j)κ_{n−j} per boundary
    let alpha = kappa(n - j).max(2.0 * (n - j) as f64 * kappa(n - j));
    let lip = lipschitz_on_sublevel(u, t2)?;
    let (mut mr, mut me) = (0.0f64, 0.0f64);
    for k in 0..=400 {
        let s = lip * k as f64 / 400.0;
        mr = mr.max(rho(zeta, j, n, s)?.abs());
        me = me.max(eta(zeta, j, n, s)?.abs());
    }
    let bound = alpha * ball_intrinsic_volume(n, j, r2) * (mr + me);
    Ok(ReillyCheck { lhs, bulk, outer, inner, residual, bound })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convexfun::{Polytope, Quadratic};
    use crate::quad::sphere_rule;
    use crate::zetaspace::ZetaShape;
    use std::f64::consts::PI;

    fn hat() -> ZetaProfile {
        ZetaProfile::hat(1.0)
    }

    fn bump() -> ZetaProfile {
        ZetaProfile::new(ZetaShape::Bump { center: 0.6, half_width: 0.5 }).unwrap()
    }

    fn aniso(n: usize) -> Quadratic {
        if n == 2 {
            Quadratic::new(vec![vec![2.0, 0.5], vec![0.5, 1.0]], vec![0.3, -0.1], 0.7).unwrap()
        } else {
            Quadratic::new(
                vec![vec![2.0, 0.5, 0.0], vec![0.5, 1.0, 0.2], vec![0.0, 0.2, 1.5]],
                vec![0.3, -0.1, 0.2],
                0.0,
            )
            .unwrap()
        }
    }

    /// Polar quadrature about the minimizer: every ray carries
    /// `∫ r^{n−1} ζ(r|Qθ|) [Q]_{n−j} dr`.
    fn polar_oracle(q: &Quadratic, j: usize, zeta: &ZetaProfile) -> f64 {
        let n = q.dim();
        let m = q.matrix();
        let c = elementary_symmetric(&m, n - j).unwrap();
        sphere_rule(n, 400)
            .iter()
            .map(|(th, w)| {
                let g = (&m * DVector::from_column_slice(th)).norm();
                let top = zeta.support() / g;
                let cuts: Vec<f64> = zeta.breakpoints().iter().map(|b| b / g).collect();
                w * c * integrate_tol(|r| r.powi(n as i32 - 1) * zeta.eval(r * g), 0.0, top, &cuts, 1e-13, 1e-12).value
            })
            .sum()
    }

    #[test]
    fn paraboloid_example() {
        let v = valuate_smooth(&ValuationSpec::new(2, 1, hat()), &ConvexFunction::isotropic(2, 1.0)).unwrap();
        assert!((v - 2.0 * PI / 3.0).abs() < 1e-12);
    }

    #[test]
    fn quadratic_primal_matches_polar_quadrature() {
        for n in [2, 3] {
            let q = aniso(n);
            for j in 0..=n {
                for z in [hat(), bump()] {
                    let v = valuate_smooth(&ValuationSpec::new(n, j, z.clone()), &ConvexFunction::Quadratic(q.clone()))
                        .unwrap();
                    let o = polar_oracle(&q, j, &z);
                    assert!((v - o).abs() <= 1e-6 * o.abs(), "n={n} j={j}: {v} {o}");
                }
            }
        }
    }

    #[test]
    fn degree_zero_does_not_see_the_function() {
        let spec = ValuationSpec::new(2, 0, bump());
        let want = 2.0 * PI * bump().moment(1, 0.0);
        for f in [
            ConvexFunction::isotropic(2, 1.0),
            ConvexFunction::Quadratic(aniso(2)),
            ConvexFunction::cone_u(2, 0.4),
            ConvexFunction::RadialProfile(RadialProfile::power(2, 1.0, 3.0)),
        ] {
            assert!((valuate_smooth(&spec, &f).unwrap() - want).abs() < 1e-12);
        }
    }

    #[test]
    fn radial_and_quadratic_routes_agree() {
        for n in [2, 3] {
            for j in 1..=n {
                let spec = ValuationSpec::new(n, j, bump());
                let a = valuate_smooth(&spec, &ConvexFunction::isotropic(n, 1.7)).unwrap();
                let b = valuate_smooth(&spec, &ConvexFunction::RadialProfile(RadialProfile::power(n, 0.85, 2.0)))
                    .unwrap();
                assert!((a - b).abs() <= 1e-9 * a.abs(), "{n} {j}: {a} {b}");
            }
        }
    }

    #[test]
    fn primal_equals_dual_on_the_conjugate() {
        for n in [2, 3] {
            let q = aniso(n);
            let u = ConvexFunction::Quadratic(q.clone());
            let us = crate::transforms::conjugate(&u).unwrap();
            for j in 0..=n {
                let spec = ValuationSpec::new(n, j, bump());
                let p = valuate_smooth(&spec, &u).unwrap();
                let d = valuate_smooth(&spec.clone().dual(), &us).unwrap();
                assert!((p - d).abs() <= 1e-9 * p.abs(), "{n} {j}");
            }
            // self-dual paraboloid
            let half = ConvexFunction::isotropic(n, 1.0);
            for j in 0..=n {
                let spec = ValuationSpec::new(n, j, hat());
                let p = valuate_smooth(&spec, &half).unwrap();
                assert!((p - valuate_smooth(&spec.clone().dual(), &half).unwrap()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn cone_examples() {
        let spec = ValuationSpec::new(2, 1, hat());
        assert!((valuate_cone(&spec, 0.5).unwrap() - 2.0 * PI * 0.375).abs() < 1e-12);
        let at0 = kappa(2) * binom(2, 1) * eta(&hat(), 1, 2, 0.0).unwrap();
        assert!((valuate_cone(&spec, 0.0).unwrap() - at0).abs() < 1e-12);
        assert_eq!(valuate_cone(&spec, 1.0).unwrap(), 0.0);
        assert_eq!(valuate_cone(&spec, 3.0).unwrap(), 0.0);
    }

    #[test]
    fn cone_closed_form_matches_measure_route() {
        for n in [2, 3] {
            for j in 1..n {
                for t in [0.0, 0.3, 0.7] {
                    let spec = ValuationSpec::new(n, j, bump());
                    let closed = valuate_cone(&spec, t).unwrap();
                    let ut = ConvexFunction::cone_u(n, t);
                    let primal = valuate_smooth(&spec, &ut).unwrap();
                    let dual = valuate_smooth(&spec.clone().dual(), &ConvexFunction::cone_v(n, t)).unwrap();
                    for v in [primal, dual] {
                        assert!((v - closed).abs() <= 1e-4 * closed.abs().max(1e-12), "{n} {j} {t}: {v} {closed}");
                    }
                }
            }
        }
    }

    #[test]
    fn moreau_route_recovers_cone_values() {
        for n in [2, 3] {
            for j in 1..n {
                for t in [0.2, 0.6] {
                    let spec = ValuationSpec::new(n, j, hat());
                    let closed = valuate_cone(&spec, t).unwrap();
                    let m = valuate_moreau(&spec, &ConvexFunction::cone_u(n, t)).unwrap();
                    assert!((m.value - closed).abs() <= 1e-4 * closed.abs(), "{n} {j} {t}: {} {closed}", m.value);
                }
            }
        }
    }

    #[test]
    fn moreau_route_on_quadratics() {
        for n in [2, 3] {
            let u = ConvexFunction::Quadratic(aniso(n));
            for j in 0..=n {
                let spec = ValuationSpec::new(n, j, bump());
                let direct = valuate_smooth(&spec, &u).unwrap();
                let m = valuate_moreau(&spec, &u).unwrap();
                assert!((m.value - direct).abs() <= 1e-4 * direct.abs(), "{n} {j}");
                // expansion at a fixed λ
                let lam = 2.5;
                let lhs = envelope_valuation(&spec, &u, lam).unwrap();
                let rhs: f64 = (0..=j)
                    .map(|i| {
                        binom(n - i, j - i) * lam.powi((j - i) as i32) * valuate_smooth(&spec.with_j(i), &u).unwrap()
                    })
                    .sum();
                assert!((lhs - rhs).abs() <= 1e-6 * rhs.abs().max(1.0));
            }
        }
        // the point indicator has finite envelope values
        let spec = ValuationSpec::new(2, 1, hat());
        let delta = ConvexFunction::point_indicator(vec![0.2, 0.1]);
        for lam in [1.0, 2.0, 5.0] {
            assert!(envelope_valuation(&spec, &delta, lam).unwrap().is_finite());
        }
        // Z_1(I_{p}) vanishes: the conjugate is linear
        assert!(valuate_moreau(&spec, &delta).unwrap().value.abs() < 1e-10);
    }

    #[test]
    fn epi_homogeneity() {
        for n in [2, 3] {
            for j in 0..=n {
                let spec = ValuationSpec::new(n, j, bump());
                let q = ConvexFunction::Quadratic(aniso(n));
                let base = valuate_smooth(&spec, &q).unwrap();
                for lam in [0.5, 2.0, 3.0] {
                    let v = valuate_smooth(&spec, &epi_multiply(&q, lam).unwrap()).unwrap();
                    assert!((v - lam.powi(j as i32) * base).abs() <= 1e-4 * v.abs().max(1e-12));
                }
                if (1..n).contains(&j) {
                    let cone = ConvexFunction::cone_u(n, 0.4);
                    let base = valuate_closed_form(&spec, &cone).unwrap();
                    for lam in [0.5, 2.0, 3.0] {
                        let scaled = epi_multiply(&cone, lam).unwrap();
                        let closed = valuate_closed_form(&spec, &scaled).unwrap();
                        let measured = valuate_smooth(&spec, &scaled).unwrap();
                        let want = lam.powi(j as i32) * base;
                        assert!((closed - want).abs() <= 1e-4 * want.abs());
                        assert!((measured - want).abs() <= 1e-4 * want.abs());
                    }
                }
            }
        }
    }

    #[test]
    fn components_of_pure_and_mixed_valuations() {
        let n = 2;
        let u = ConvexFunction::isotropic(n, 1.0);
        let s1 = ValuationSpec::new(n, 1, bump());
        let c = homogeneous_components(|f| valuate_smooth(&s1, f), &u, n).unwrap();
        let z1 = valuate_smooth(&s1, &u).unwrap();
        assert!((c.values[1] - z1).abs() < 1e-8 * z1);
        assert!(c.values[0].abs() < 1e-8 * z1 && c.values[2].abs() < 1e-8 * z1);
        assert!(c.sum_residual < 1e-8 * z1);

        let konst = homogeneous_components(|_| Ok(4.5), &u, n).unwrap();
        assert!((konst.values[0] - 4.5).abs() < 1e-10);
        assert!(konst.values[1..].iter().all(|v| v.abs() < 1e-10));

        let s2 = ValuationSpec::new(n, 2, hat());
        let mix = homogeneous_components(|f| Ok(valuate_smooth(&s1, f)? + valuate_smooth(&s2, f)?), &u, n).unwrap();
        let z2 = valuate_smooth(&s2, &u).unwrap();
        assert!((mix.values[1] - z1).abs() <= 1e-4 * z1);
        assert!((mix.values[2] - z2).abs() <= 1e-4 * z2);
        assert!(mix.values[0].abs() <= 1e-4 * z1);
    }

    fn pwq(pieces: Vec<[f64; 3]>, knots: Vec<f64>) -> ConvexFunction {
        ConvexFunction::PiecewiseQuadratic(PiecewiseQuadratic::new(knots, pieces).unwrap())
    }

    #[test]
    fn valuation_property_in_one_dimension() {
        // u = x²/2 + ½max(0, x−0.3)², v = x²/2 + ½max(0, −x)²
        let u = pwq(vec![[0.0, 0.0, 1.0], [0.045, -0.3, 2.0]], vec![0.3]);
        let v = pwq(vec![[0.0, 0.0, 2.0], [0.0, 0.0, 1.0]], vec![0.0]);
        for j in 0..=1 {
            for spec in [ValuationSpec::new(1, j, bump()), ValuationSpec::new(1, j, bump()).dual()] {
                assert_eq!(valuation_property_check(&spec, &u, &u).unwrap(), 0.0);
                let r = valuation_property_check(&spec, &u, &v).unwrap();
                assert!(r <= 1e-4, "j={j} {:?}: {r}", spec.side);
            }
        }
        // the pair x²/2, (x−0.3)²/2 has a non-convex minimum
        let a = pwq(vec![[0.0, 0.0, 1.0]], vec![]);
        let b = pwq(vec![[0.045, -0.3, 1.0]], vec![]);
        assert_eq!(valuation_property_check(&ValuationSpec::new(1, 1, bump()), &a, &b), Err(Error::NonConvexMin));
    }

    #[test]
    fn one_dimensional_oracles() {
        // primal Z_1(x²/2) = ∫ζ(|x|)dx = 2∫ζ; dual Z*_1 = same with v″ = 1
        let z = bump();
        let q = pwq(vec![[0.0, 0.0, 1.0]], vec![]);
        let want = 2.0 * z.moment(0, 0.0);
        assert!((valuate_smooth(&ValuationSpec::new(1, 1, z.clone()), &q).unwrap() - want).abs() < 1e-10);
        assert!((valuate_smooth(&ValuationSpec::new(1, 1, z.clone()).dual(), &q).unwrap() - want).abs() < 1e-10);
        // a kink at 0.5 of size 1 adds ζ(0.5) on the dual side
        let k = pwq(vec![[0.0, 0.0, 0.0], [-0.5, 1.0, 0.0]], vec![0.5]);
        assert!((valuate_smooth(&ValuationSpec::new(1, 1, z.clone()).dual(), &k).unwrap() - z.eval(0.5)).abs() < 1e-14);
    }

    #[test]
    fn affine_dissection_is_additive() {
        let z = bump();
        let spec = ValuationSpec::new(2, 2, z.clone());
        let left = Polytope::from_box(&[0.0, 0.0], &[1.0, 1.0]).unwrap();
        let right = Polytope::from_box(&[1.0, 0.0], &[2.0, 1.0]).unwrap();
        let whole = Polytope::from_box(&[0.0, 0.0], &[2.0, 1.0]).unwrap();
        let l1 = (vec![0.2, 0.0], 0.0);
        let pieces = vec![
            AffinePiece { slope: l1.0.clone(), offset: l1.1, polytope: left },
            AffinePiece { slope: vec![0.5, 0.0], offset: -0.3, polytope: right },
        ];
        // max of the two affine functions on the rectangle, built by the lattice
        let a = ConvexFunction::IndicatorLinear { polytope: whole.clone(), slope: l1.0, offset: l1.1 };
        let b = ConvexFunction::IndicatorLinear { polytope: whole, slope: vec![0.5, 0.0], offset: -0.3 };
        let u = pointwise_max(&a, &b).unwrap();
        assert!(dissection_residual(&spec, &u, &pieces).unwrap() <= 1e-6);
        let want = z.eval(0.2) + z.eval(0.5);
        assert!((valuate_smooth(&spec, &u).unwrap() - want).abs() < 1e-12);
    }

    #[test]
    fn invariance_under_rigid_motions() {
        let id = DMatrix::<f64>::identity(2, 2);
        let spec = ValuationSpec::new(2, 1, bump());
        let u = ConvexFunction::isotropic(2, 1.0);
        assert_eq!(invariance_check(&spec, &u, &[0.0, 0.0], 0.0, &id).unwrap(), 0.0);
        assert!(invariance_check(&spec, &u, &[0.4, -0.2], 3.0, &id).unwrap() <= 1e-4);
        let th = PI / 6.0;
        let rot = DMatrix::from_row_slice(2, 2, &[th.cos(), -th.sin(), th.sin(), th.cos()]);
        let q = ConvexFunction::Quadratic(Quadratic::new(vec![vec![1.0, 0.0], vec![0.0, 4.0]], vec![0.0; 2], 0.0).unwrap());
        for j in 0..=2 {
            assert!(invariance_check(&spec.with_j(j), &q, &[0.4, -0.2], 3.0, &rot).unwrap() <= 1e-4);
            assert!(invariance_check(&spec.with_j(j).dual(), &q, &[0.4, -0.2], 3.0, &rot).unwrap() <= 1e-4);
        }
    }

    #[test]
    fn kink_family_dual_top_degree_is_exact() {
        let z = hat();
        let c = vec![0.3, -0.4];
        let v = ConvexFunction::KinkSum { dim: 2, center: c.clone() };
        let got = valuate_smooth(&ValuationSpec::new(2, 2, z.clone()).dual(), &v).unwrap();
        assert_eq!(got, z.eval(0.5));
    }

    #[test]
    fn reilly_identity_on_radial_functions() {
        let u = ConvexFunction::isotropic(2, 1.0);
        let r = reilly_identity_check(&hat(), 1, &u, 0.5, 2.0).unwrap();
        assert!(r.residual <= 1e-5, "{r:?}");
        assert!(r.lhs.abs() <= r.bound);
        let same = reilly_identity_check(&hat(), 1, &u, 0.8, 0.8).unwrap();
        assert_eq!(same.lhs, 0.0);
        assert_eq!(same.bulk, 0.0);
        assert!((same.inner - same.outer).abs() < 1e-15);
        let cubic = ConvexFunction::RadialProfile(RadialProfile::power(3, 1.0, 3.0));
        for j in 1..3 {
            for z in [hat(), bump()] {
                let r = reilly_identity_check(&z, j, &cubic, 0.01, 0.3).unwrap();
                assert!(r.residual <= 1e-6 * r.lhs.abs().max(1.0), "{j}: {r:?}");
                assert!(r.lhs.abs() <= r.bound);
            }
        }
        assert_eq!(
            reilly_identity_check(&hat(), 1, &ConvexFunction::cone_v(2, 0.5), 0.5, 1.0).map(|_| ()),
            Err(Error::NonRadial)
        );
    }

    #[test]
    fn spec_round_trips_through_json() {
        let spec = ValuationSpec::new(3, 2, hat()).with_route(Route::Moreau { lambdas: Some(vec![1.0, 2.0, 3.0]) });
        let text = serde_json::to_string(&spec).unwrap();
        assert_eq!(serde_json::from_str::<ValuationSpec>(&text).unwrap(), spec);
        let bare: ValuationSpec =
            serde_json::from_str(r#"{"dim":2,"j":1,"zeta":{"kind":"hat","width":1.0}}"#).unwrap();
        assert_eq!(bare.side, Side::Primal);
        assert_eq!(bare.route, Route::Quadrature);
    }
}
