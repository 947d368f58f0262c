//! Convex functions on ℝⁿ and the epi-calculus on them.
//!
//! `+∞` is represented by `f64::INFINITY` with the usual extended-real rules:
//! `+∞ + a = +∞` and `min(+∞, a) = a`.

mod grid;
mod ops;
mod polytope;
mod pwq;
mod radial;

pub use grid::{ExtReal, Grid};
pub use ops::{epi_multiply, inf_convolve, pointwise_max, pointwise_min};
pub use polytope::{Halfspace, Polytope};
pub(crate) use polytope::combinations;
pub use pwq::PiecewiseQuadratic;
pub use radial::{ProfileShape, RadialProfile};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const INF: f64 = f64::INFINITY;

/// `½ xᵀQx + bᵀx + c` with `Q` symmetric positive semi-definite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Quadratic {
    pub q: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    #[serde(default)]
    pub c: f64,
}

impl Quadratic {
    pub fn new(q: Vec<Vec<f64>>, b: Vec<f64>, c: f64) -> Result<Self> {
        let quad = Quadratic { q, b, c };
        quad.validate()?;
        Ok(quad)
    }

    /// `c|x|²/2`.
    pub fn isotropic(dim: usize, c: f64) -> Self {
        Quadratic::from_matrix(&(DMatrix::identity(dim, dim) * c), &DVector::zeros(dim), 0.0)
    }

    pub fn from_matrix(q: &DMatrix<f64>, b: &DVector<f64>, c: f64) -> Self {
        Quadratic {
            q: (0..q.nrows()).map(|i| q.row(i).iter().copied().collect()).collect(),
            b: b.iter().copied().collect(),
            c,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.b.len();
        if self.q.len() != n || self.q.iter().any(|r| r.len() != n) {
            return Err(Error::DimensionMismatch { expected: n, found: self.q.len() });
        }
        let m = self.matrix();
        let scale = m.amax().max(1.0);
        if (&m - m.transpose()).amax() > 1e-12 * scale {
            return Err(Error::InvalidInput("quadratic matrix must be symmetric".into()));
        }
        if m.symmetric_eigen().eigenvalues.min() < -1e-10 * scale {
            return Err(Error::InvalidInput("quadratic matrix must be positive semi-definite".into()));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.b.len()
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        let n = self.b.len();
        DMatrix::from_fn(n, n, |i, j| self.q[i][j])
    }

    pub fn vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.b)
    }

    pub fn evaluate(&self, x: &[f64]) -> f64 {
        let n = self.b.len();
        let mut v = self.c;
        for i in 0..n {
            v += self.b[i] * x[i];
            for j in 0..n {
                v += 0.5 * x[i] * self.q[i][j] * x[j];
            }
        }
        v
    }

    /// Minimizer `−Q⁻¹b`, when `Q` is invertible.
    pub fn minimizer(&self) -> Option<Vec<f64>> {
        let m = self.matrix();
        m.cholesky()
            .map(|c| c.solve(&(-self.vector())).iter().copied().collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffinePiece {
    pub slope: Vec<f64>,
    #[serde(default)]
    pub offset: f64,
    pub polytope: Polytope,
}

impl AffinePiece {
    pub fn value(&self, x: &[f64]) -> f64 {
        self.offset + self.slope.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
    }
}

/// `u = ℓ_i` on `P_i`, `+∞` off `⋃ P_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseAffine {
    pub dim: usize,
    pub pieces: Vec<AffinePiece>,
}

impl PiecewiseAffine {
    /// Builds and checks the glued function: pieces must have disjoint
    /// interiors and agree with a convex max-affine function on their union.
    pub fn new(dim: usize, pieces: Vec<AffinePiece>) -> Result<Self> {
        let f = PiecewiseAffine { dim, pieces };
        for p in &f.pieces {
            if p.slope.len() != dim || p.polytope.dim() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: p.slope.len() });
            }
        }
        for (i, a) in f.pieces.iter().enumerate() {
            for b in &f.pieces[i + 1..] {
                if a.polytope.intersect(&b.polytope).is_some() {
                    return Err(Error::InvalidInput("affine pieces overlap".into()));
                }
            }
        }
        if !f.is_convex() {
            return Err(Error::InvalidInput("piecewise-affine function is not convex".into()));
        }
        Ok(f)
    }

    pub(crate) fn unchecked(dim: usize, pieces: Vec<AffinePiece>) -> Self {
        PiecewiseAffine { dim, pieces }
    }

    fn scale(&self) -> f64 {
        self.pieces
            .iter()
            .flat_map(|p| p.polytope.vertices().iter().map(move |v| p.value(v).abs()))
            .fold(1.0, f64::max)
    }

    /// Convexity via max-consistency at every vertex (each affine function
    /// is a minorant of the glued function) plus convexity of the domain
    /// (the pieces tile their convex hull).
    pub fn convexity_violation(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for p in &self.pieces {
            for v in p.polytope.vertices() {
                let here = p.value(v);
                for q in &self.pieces {
                    worst = worst.max(q.value(v) - here);
                }
            }
        }
        let all: Vec<Vec<f64>> = self
            .pieces
            .iter()
            .flat_map(|p| p.polytope.vertices().to_vec())
            .collect();
        if let Ok(hull) = Polytope::from_vertices(self.dim, &all) {
            let covered: f64 = self.pieces.iter().map(|p| p.polytope.volume()).sum();
            let gap = hull.volume() - covered;
            if gap > 1e-9 * hull.volume().max(1.0) {
                return INF;
            }
        }
        worst
    }

    pub fn is_convex(&self) -> bool {
        self.convexity_violation() <= 1e-9 + 1e-6 * self.scale()
    }

    pub fn evaluate(&self, x: &[f64]) -> f64 {
        self.pieces
            .iter()
            .filter(|p| p.polytope.contains(x))
            .map(|p| p.value(x))
            .fold(INF, |m, v| if m == INF { v } else { m.max(v) })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ConvexFunction {
    Grid(Grid),
    PiecewiseAffine(PiecewiseAffine),
    Quadratic(Quadratic),
    /// `t|x| + I_{R·B}` (the cone `u_t` for `R = 1`).
    RadialConeU {
        dim: usize,
        t: f64,
        #[serde(default = "one")]
        radius: f64,
    },
    /// `s·max(0, |x| − t)` (the function `v_t` for `s = 1`).
    RadialConeV {
        dim: usize,
        t: f64,
        #[serde(default = "one")]
        scale: f64,
    },
    RadialProfile(RadialProfile),
    /// `⟨y, x⟩ + α + I_P(x)`.
    IndicatorLinear {
        polytope: Polytope,
        slope: Vec<f64>,
        #[serde(default)]
        offset: f64,
    },
    /// `½ Σ_{i < m} |x_i − x̄_i|` in ℝⁿ with `m = center.len() <= n`.
    KinkSum { dim: usize, center: Vec<f64> },
    /// One-dimensional piecewise quadratic.
    PiecewiseQuadratic(PiecewiseQuadratic),
}

fn one() -> f64 {
    1.0
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

impl ConvexFunction {
    pub fn cone_u(dim: usize, t: f64) -> Self {
        ConvexFunction::RadialConeU { dim, t, radius: 1.0 }
    }

    pub fn cone_v(dim: usize, t: f64) -> Self {
        ConvexFunction::RadialConeV { dim, t, scale: 1.0 }
    }

    /// `c|x|²/2`.
    pub fn isotropic(dim: usize, c: f64) -> Self {
        ConvexFunction::Quadratic(Quadratic::isotropic(dim, c))
    }

    /// Indicator of the single point `p`.
    pub fn point_indicator(p: Vec<f64>) -> Self {
        let dim = p.len();
        ConvexFunction::IndicatorLinear { polytope: Polytope::point(p), slope: vec![0.0; dim], offset: 0.0 }
    }

    pub fn dim(&self) -> usize {
        match self {
            ConvexFunction::Grid(g) => g.dim(),
            ConvexFunction::PiecewiseAffine(p) => p.dim,
            ConvexFunction::Quadratic(q) => q.dim(),
            ConvexFunction::RadialConeU { dim, .. }
            | ConvexFunction::RadialConeV { dim, .. }
            | ConvexFunction::KinkSum { dim, .. } => *dim,
            ConvexFunction::RadialProfile(r) => r.dim,
            ConvexFunction::IndicatorLinear { polytope, .. } => polytope.dim(),
            ConvexFunction::PiecewiseQuadratic(_) => 1,
        }
    }

    pub fn variant_name(&self) -> &'static str {
        match self {
            ConvexFunction::Grid(_) => "grid",
            ConvexFunction::PiecewiseAffine(_) => "piecewise_affine",
            ConvexFunction::Quadratic(_) => "quadratic",
            ConvexFunction::RadialConeU { .. } => "radial_cone_u",
            ConvexFunction::RadialConeV { .. } => "radial_cone_v",
            ConvexFunction::RadialProfile(_) => "radial_profile",
            ConvexFunction::IndicatorLinear { .. } => "indicator_linear",
            ConvexFunction::KinkSum { .. } => "kink_sum",
            ConvexFunction::PiecewiseQuadratic(_) => "piecewise_quadratic",
        }
    }

    /// Structural checks for deserialized input (dimensions, PSD, convexity).
    pub fn validate(&self) -> Result<()> {
        match self {
            ConvexFunction::Quadratic(q) => q.validate(),
            ConvexFunction::RadialProfile(r) => r.validate(),
            ConvexFunction::RadialConeU { t, radius, .. } => {
                if *t < 0.0 || *radius <= 0.0 {
                    return Err(Error::InvalidInput("cone needs t >= 0 and radius > 0".into()));
                }
                Ok(())
            }
            ConvexFunction::RadialConeV { t, scale, .. } => {
                if *t < 0.0 || *scale <= 0.0 {
                    return Err(Error::InvalidInput("cone needs t >= 0 and scale > 0".into()));
                }
                Ok(())
            }
            ConvexFunction::KinkSum { dim, center } => {
                if center.len() > *dim {
                    return Err(Error::DimensionMismatch { expected: *dim, found: center.len() });
                }
                Ok(())
            }
            ConvexFunction::IndicatorLinear { polytope, slope, .. } => {
                if slope.len() != polytope.dim() {
                    return Err(Error::DimensionMismatch { expected: polytope.dim(), found: slope.len() });
                }
                Ok(())
            }
            ConvexFunction::PiecewiseAffine(p) => {
                PiecewiseAffine::new(p.dim, p.pieces.clone()).map(|_| ())
            }
            ConvexFunction::PiecewiseQuadratic(p) => {
                let checked = PiecewiseQuadratic::new(p.knots.clone(), p.pieces.clone())?;
                if !checked.is_convex() {
                    return Err(Error::InvalidInput("piecewise quadratic is not convex".into()));
                }
                Ok(())
            }
            ConvexFunction::Grid(_) => Ok(()),
        }
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: x.len() });
        }
        Ok(())
    }

    /// `u(x)`, possibly `+∞`.
    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        Ok(match self {
            ConvexFunction::Grid(g) => g.evaluate(x),
            ConvexFunction::PiecewiseAffine(p) => p.evaluate(x),
            ConvexFunction::Quadratic(q) => q.evaluate(x),
            ConvexFunction::RadialConeU { t, radius, .. } => {
                let r = norm(x);
                if r <= *radius {
                    t * r
                } else {
                    INF
                }
            }
            ConvexFunction::RadialConeV { t, scale, .. } => scale * (norm(x) - t).max(0.0),
            ConvexFunction::RadialProfile(p) => p.phi(norm(x)),
            ConvexFunction::IndicatorLinear { polytope, slope, offset } => {
                if polytope.contains(x) {
                    offset + slope.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
                } else {
                    INF
                }
            }
            ConvexFunction::KinkSum { center, .. } => {
                0.5 * center.iter().zip(x).map(|(c, v)| (v - c).abs()).sum::<f64>()
            }
            ConvexFunction::PiecewiseQuadratic(p) => p.evaluate(x[0]),
        })
    }

    /// `∇u(x)`. Grids use central differences with the grid spacing.
    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        let not_diff = |why: &str| Err(Error::NotDifferentiable(why.to_string()));
        match self {
            ConvexFunction::Quadratic(q) => {
                let g = q.matrix() * DVector::from_column_slice(x) + q.vector();
                Ok(g.iter().copied().collect())
            }
            ConvexFunction::Grid(g) => grid_gradient(g, x),
            ConvexFunction::RadialConeU { t, radius, .. } => {
                let r = norm(x);
                if r == 0.0 {
                    return not_diff("cone apex");
                }
                if r >= *radius {
                    return not_diff("outside the open domain");
                }
                Ok(x.iter().map(|v| t * v / r).collect())
            }
            ConvexFunction::RadialConeV { t, scale, .. } => {
                let r = norm(x);
                if r == *t {
                    return not_diff("on the sphere |x| = t");
                }
                if r < *t {
                    return Ok(vec![0.0; x.len()]);
                }
                Ok(x.iter().map(|v| scale * v / r).collect())
            }
            ConvexFunction::RadialProfile(p) => {
                let r = norm(x);
                if r >= p.radius() {
                    return not_diff("outside the open domain");
                }
                let (_, d1, _) = p.jet(r);
                if r == 0.0 {
                    if d1 != 0.0 {
                        return not_diff("profile has a kink at the origin");
                    }
                    return Ok(vec![0.0; x.len()]);
                }
                Ok(x.iter().map(|v| d1 * v / r).collect())
            }
            ConvexFunction::PiecewiseAffine(p) => {
                let tol = 1e-12;
                match p.pieces.iter().find(|q| q.polytope.interior_contains(x, tol)) {
                    Some(q) => Ok(q.slope.clone()),
                    None => not_diff("on a breakpoint or outside the domain"),
                }
            }
            ConvexFunction::IndicatorLinear { polytope, slope, .. } => {
                if polytope.interior_contains(x, 1e-12) {
                    Ok(slope.clone())
                } else {
                    not_diff("outside the interior of the domain")
                }
            }
            ConvexFunction::KinkSum { center, .. } => {
                let mut g = vec![0.0; x.len()];
                for (i, c) in center.iter().enumerate() {
                    if x[i] == *c {
                        return not_diff("on a kink hyperplane");
                    }
                    g[i] = 0.5 * (x[i] - c).signum();
                }
                Ok(g)
            }
            ConvexFunction::PiecewiseQuadratic(p) => Ok(vec![p.derivative(x[0])?]),
        }
    }

    /// `D²u(x)`.
    pub fn hessian(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        self.check_dim(x)?;
        let n = x.len();
        let radial = |r: f64, d1: f64, d2: f64| {
            let mut h = DMatrix::identity(n, n) * (d1 / r);
            for i in 0..n {
                for j in 0..n {
                    h[(i, j)] += (d2 - d1 / r) * x[i] * x[j] / (r * r);
                }
            }
            h
        };
        match self {
            ConvexFunction::Quadratic(q) => Ok(q.matrix()),
            ConvexFunction::Grid(g) => grid_hessian(g, x),
            ConvexFunction::RadialConeU { t, .. } => {
                self.gradient(x)?;
                Ok(radial(norm(x), *t, 0.0))
            }
            ConvexFunction::RadialConeV { t, scale, .. } => {
                self.gradient(x)?;
                let r = norm(x);
                if r < *t {
                    Ok(DMatrix::zeros(n, n))
                } else {
                    Ok(radial(r, *scale, 0.0))
                }
            }
            ConvexFunction::RadialProfile(p) => {
                self.gradient(x)?;
                let r = norm(x);
                let (_, d1, d2) = p.jet(r);
                if r == 0.0 {
                    if !d2.is_finite() {
                        return Err(Error::NotDifferentiable("curvature blows up at the origin".into()));
                    }
                    return Ok(DMatrix::identity(n, n) * d2);
                }
                Ok(radial(r, d1, d2))
            }
            ConvexFunction::PiecewiseAffine(_)
            | ConvexFunction::IndicatorLinear { .. }
            | ConvexFunction::KinkSum { .. } => {
                self.gradient(x)?;
                Ok(DMatrix::zeros(n, n))
            }
            ConvexFunction::PiecewiseQuadratic(p) => {
                Ok(DMatrix::from_element(1, 1, p.second_derivative(x[0])?))
            }
        }
    }

    /// Minimizer, when it is known in closed form.
    pub fn minimizer(&self) -> Option<Vec<f64>> {
        match self {
            ConvexFunction::Quadratic(q) => q.minimizer(),
            ConvexFunction::RadialConeU { dim, .. }
            | ConvexFunction::RadialConeV { dim, .. }
            | ConvexFunction::RadialProfile(RadialProfile { dim, .. }) => Some(vec![0.0; *dim]),
            ConvexFunction::KinkSum { dim, center } => {
                let mut m = vec![0.0; *dim];
                m[..center.len()].copy_from_slice(center);
                Some(m)
            }
            _ => None,
        }
    }

    /// `u(· − x0) + α`.
    pub fn translate(&self, x0: &[f64], alpha: f64) -> Result<ConvexFunction> {
        self.check_dim(x0)?;
        match self {
            ConvexFunction::Quadratic(q) => {
                let m = q.matrix();
                let s = DVector::from_column_slice(x0);
                let b = q.vector() - &m * &s;
                let c = q.c + 0.5 * s.dot(&(&m * &s)) - q.vector().dot(&s) + alpha;
                Ok(ConvexFunction::Quadratic(Quadratic::from_matrix(&m, &b, c)))
            }
            ConvexFunction::Grid(g) => Ok(ConvexFunction::Grid(Grid::new(
                g.lo().iter().zip(x0).map(|(a, b)| a + b).collect(),
                g.hi().iter().zip(x0).map(|(a, b)| a + b).collect(),
                g.shape().to_vec(),
                g.values().iter().map(|v| v + alpha).collect(),
            )?)),
            ConvexFunction::PiecewiseAffine(p) => Ok(ConvexFunction::PiecewiseAffine(PiecewiseAffine::unchecked(
                p.dim,
                p.pieces
                    .iter()
                    .map(|q| AffinePiece {
                        slope: q.slope.clone(),
                        offset: q.offset + alpha - q.slope.iter().zip(x0).map(|(a, b)| a * b).sum::<f64>(),
                        polytope: q.polytope.translate(x0),
                    })
                    .collect(),
            ))),
            ConvexFunction::IndicatorLinear { polytope, slope, offset } => Ok(ConvexFunction::IndicatorLinear {
                polytope: polytope.translate(x0),
                slope: slope.clone(),
                offset: offset + alpha - slope.iter().zip(x0).map(|(a, b)| a * b).sum::<f64>(),
            }),
            ConvexFunction::PiecewiseQuadratic(p) => {
                Ok(ConvexFunction::PiecewiseQuadratic(p.translated(x0[0], alpha)))
            }
            ConvexFunction::KinkSum { dim, center } if alpha == 0.0 && x0[center.len()..].iter().all(|v| *v == 0.0) => {
                Ok(ConvexFunction::KinkSum {
                    dim: *dim,
                    center: center.iter().zip(x0).map(|(c, s)| c + s).collect(),
                })
            }
            other => Err(Error::UnsupportedVariant(format!(
                "translation of {} is not representable",
                other.variant_name()
            ))),
        }
    }

    /// `u ∘ ϑ⁻¹` for an orthogonal matrix `ϑ`.
    pub fn rotate(&self, rot: &DMatrix<f64>) -> Result<ConvexFunction> {
        let n = self.dim();
        if rot.nrows() != n || rot.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, found: rot.nrows() });
        }
        if (rot * rot.transpose() - DMatrix::identity(n, n)).amax() > 1e-10 {
            return Err(Error::InvalidInput("rotation matrix must be orthogonal".into()));
        }
        let rows: Vec<Vec<f64>> = (0..n).map(|i| rot.row(i).iter().copied().collect()).collect();
        let apply = |v: &[f64]| -> Vec<f64> { (rot * DVector::from_column_slice(v)).iter().copied().collect() };
        match self {
            ConvexFunction::Quadratic(q) => {
                let m = rot * q.matrix() * rot.transpose();
                let m = (&m + m.transpose()) * 0.5;
                Ok(ConvexFunction::Quadratic(Quadratic::from_matrix(&m, &(rot * q.vector()), q.c)))
            }
            ConvexFunction::RadialConeU { .. }
            | ConvexFunction::RadialConeV { .. }
            | ConvexFunction::RadialProfile(_) => Ok(self.clone()),
            ConvexFunction::PiecewiseAffine(p) => Ok(ConvexFunction::PiecewiseAffine(PiecewiseAffine::unchecked(
                p.dim,
                p.pieces
                    .iter()
                    .map(|q| AffinePiece {
                        slope: apply(&q.slope),
                        offset: q.offset,
                        polytope: q.polytope.rotate(&rows),
                    })
                    .collect(),
            ))),
            ConvexFunction::IndicatorLinear { polytope, slope, offset } => Ok(ConvexFunction::IndicatorLinear {
                polytope: polytope.rotate(&rows),
                slope: apply(slope),
                offset: *offset,
            }),
            other => Err(Error::UnsupportedVariant(format!(
                "rotation of {} is not representable",
                other.variant_name()
            ))),
        }
    }

    /// Samples the function on a grid.
    pub fn to_grid(&self, lo: &[f64], hi: &[f64], shape: &[usize]) -> Result<Grid> {
        if lo.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: lo.len() });
        }
        Grid::sample(lo, hi, shape, |x| self.evaluate(x).unwrap_or(INF))
    }

    /// A box containing the effective domain, if it is bounded.
    pub fn domain_box(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        let n = self.dim();
        match self {
            ConvexFunction::Grid(g) => Some((g.lo().to_vec(), g.hi().to_vec())),
            ConvexFunction::RadialConeU { radius, .. } => Some((vec![-radius; n], vec![*radius; n])),
            ConvexFunction::RadialProfile(p) if p.radius().is_finite() => {
                Some((vec![-p.radius(); n], vec![p.radius(); n]))
            }
            ConvexFunction::IndicatorLinear { polytope, .. } => Some(polytope.bounding_box()),
            ConvexFunction::PiecewiseAffine(p) => {
                let mut lo = vec![INF; n];
                let mut hi = vec![-INF; n];
                for q in &p.pieces {
                    let (l, h) = q.polytope.bounding_box();
                    for k in 0..n {
                        lo[k] = lo[k].min(l[k]);
                        hi[k] = hi[k].max(h[k]);
                    }
                }
                Some((lo, hi))
            }
            _ => None,
        }
    }

    /// Convexity check for the representation (grids: discrete midpoint
    /// test; piecewise families: slope/max consistency; closed forms are
    /// convex by construction once validated).
    pub fn is_convex(&self) -> bool {
        match self {
            ConvexFunction::Grid(g) => g.is_convex(),
            ConvexFunction::PiecewiseAffine(p) => p.is_convex(),
            ConvexFunction::PiecewiseQuadratic(p) => p.is_convex(),
            other => other.validate().is_ok(),
        }
    }
}

/// Central-difference step on a grid; refuses stencils touching `+∞` or
/// leaving the box.
fn grid_stencil(g: &Grid, x: &[f64], offsets: &[(usize, f64)]) -> Result<f64> {
    let mut p = x.to_vec();
    for &(axis, steps) in offsets {
        p[axis] += steps * g.spacing(axis);
    }
    let v = g.evaluate(&p);
    if v == INF {
        return Err(Error::NotDifferentiable("grid stencil touches +inf or leaves the box".into()));
    }
    Ok(v)
}

fn grid_gradient(g: &Grid, x: &[f64]) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(x.len());
    for k in 0..x.len() {
        let h = g.spacing(k);
        if h == 0.0 {
            return Err(Error::NotDifferentiable("degenerate grid axis".into()));
        }
        let plus = grid_stencil(g, x, &[(k, 1.0)])?;
        let minus = grid_stencil(g, x, &[(k, -1.0)])?;
        out.push((plus - minus) / (2.0 * h));
    }
    Ok(out)
}

fn grid_hessian(g: &Grid, x: &[f64]) -> Result<DMatrix<f64>> {
    let n = x.len();
    let mut h = DMatrix::zeros(n, n);
    let centre = grid_stencil(g, x, &[])?;
    for i in 0..n {
        let hi = g.spacing(i);
        if hi == 0.0 {
            return Err(Error::NotDifferentiable("degenerate grid axis".into()));
        }
        let p = grid_stencil(g, x, &[(i, 1.0)])?;
        let m = grid_stencil(g, x, &[(i, -1.0)])?;
        h[(i, i)] = (p - 2.0 * centre + m) / (hi * hi);
        for j in i + 1..n {
            let hj = g.spacing(j);
            let pp = grid_stencil(g, x, &[(i, 1.0), (j, 1.0)])?;
            let pm = grid_stencil(g, x, &[(i, 1.0), (j, -1.0)])?;
            let mp = grid_stencil(g, x, &[(i, -1.0), (j, 1.0)])?;
            let mm = grid_stencil(g, x, &[(i, -1.0), (j, -1.0)])?;
            let v = (pp - pm - mp + mm) / (4.0 * hi * hj);
            h[(i, j)] = v;
            h[(j, i)] = v;
        }
    }
    Ok(h)
}
