//! Epi-calculus: infimal convolution, epi-multiplication and the lattice
//! operations.

use rayon::prelude::*;

use super::{AffinePiece, ConvexFunction, Grid, PiecewiseAffine, Polytope, INF};
use crate::error::{Error, Result};

/// Infimal convolution `(u □ v)(x) = inf_{y+z=x} u(y) + v(z)` of two grids
/// with matching node spacing, by brute force over node pairs. The result
/// lives on the Minkowski sum of the two boxes. Limited to `n <= 2`; in 3-D
/// only the separable Moreau–Yosida case is available.
pub fn inf_convolve(u: &Grid, v: &Grid) -> Result<Grid> {
    let dim = u.dim();
    if v.dim() != dim {
        return Err(Error::DimensionMismatch { expected: dim, found: v.dim() });
    }
    if dim > 2 {
        return Err(Error::UnsupportedVariant(
            "grid infimal convolution in 3-D is only available through moreau_yosida".into(),
        ));
    }
    for k in 0..dim {
        let (hu, hv) = (u.spacing(k), v.spacing(k));
        if hu > 0.0 && hv > 0.0 && (hu - hv).abs() > 1e-9 * hu.max(hv) {
            return Err(Error::InvalidInput(format!(
                "grid spacings differ on axis {k}: {hu} vs {hv}"
            )));
        }
    }
    let lo: Vec<f64> = u.lo().iter().zip(v.lo()).map(|(a, b)| a + b).collect();
    let hi: Vec<f64> = u.hi().iter().zip(v.hi()).map(|(a, b)| a + b).collect();
    let shape: Vec<usize> = u.shape().iter().zip(v.shape()).map(|(a, b)| a + b - 1).collect();
    let out_len: usize = shape.iter().product();
    let skeleton = Grid::new(lo.clone(), hi.clone(), shape.clone(), vec![0.0; out_len])?;

    let finite_u: Vec<(Vec<usize>, f64)> = (0..u.len())
        .filter(|&i| u.values()[i] < INF)
        .map(|i| (u.unravel(i), u.values()[i]))
        .collect();
    let values: Vec<f64> = (0..out_len)
        .into_par_iter()
        .map(|o| {
            let m = skeleton.unravel(o);
            let mut best = INF;
            let mut k = vec![0usize; dim];
            'pairs: for (i, ui) in &finite_u {
                for a in 0..dim {
                    if m[a] < i[a] || m[a] - i[a] >= v.shape()[a] {
                        continue 'pairs;
                    }
                    k[a] = m[a] - i[a];
                }
                let s = ui + v.value_at(&k);
                if s < best {
                    best = s;
                }
            }
            best
        })
        .collect();
    if values.iter().any(|x| x.is_nan() || *x == f64::NEG_INFINITY) {
        return Err(Error::UnboundedResult);
    }
    Grid::new(lo, hi, shape, values)
}

/// Epi-multiplication `(λ∘u)(x) = λ u(x/λ)`.
pub fn epi_multiply(f: &ConvexFunction, lambda: f64) -> Result<ConvexFunction> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::NonpositiveScale(lambda));
    }
    Ok(match f {
        ConvexFunction::Grid(g) => ConvexFunction::Grid(Grid::new(
            g.lo().iter().map(|x| x * lambda).collect(),
            g.hi().iter().map(|x| x * lambda).collect(),
            g.shape().to_vec(),
            g.values().iter().map(|v| v * lambda).collect(),
        )?),
        ConvexFunction::PiecewiseAffine(p) => ConvexFunction::PiecewiseAffine(PiecewiseAffine::unchecked(
            p.dim,
            p.pieces
                .iter()
                .map(|q| AffinePiece {
                    slope: q.slope.clone(),
                    offset: q.offset * lambda,
                    polytope: q.polytope.scale_by(lambda),
                })
                .collect(),
        )),
        ConvexFunction::Quadratic(q) => {
            let mut out = q.clone();
            out.q.iter_mut().flatten().for_each(|x| *x /= lambda);
            out.c *= lambda;
            ConvexFunction::Quadratic(out)
        }
        ConvexFunction::RadialConeU { dim, t, radius } => {
            ConvexFunction::RadialConeU { dim: *dim, t: *t, radius: radius * lambda }
        }
        ConvexFunction::RadialConeV { dim, t, scale } => {
            ConvexFunction::RadialConeV { dim: *dim, t: t * lambda, scale: *scale }
        }
        ConvexFunction::RadialProfile(p) => ConvexFunction::RadialProfile(p.epi_scaled(lambda)),
        ConvexFunction::IndicatorLinear { polytope, slope, offset } => ConvexFunction::IndicatorLinear {
            polytope: polytope.scale_by(lambda),
            slope: slope.clone(),
            offset: offset * lambda,
        },
        ConvexFunction::KinkSum { dim, center } => ConvexFunction::KinkSum {
            dim: *dim,
            center: center.iter().map(|c| c * lambda).collect(),
        },
        ConvexFunction::PiecewiseQuadratic(p) => ConvexFunction::PiecewiseQuadratic(p.epi_scaled(lambda)),
    })
}

fn as_pwa(f: &ConvexFunction) -> Option<PiecewiseAffine> {
    match f {
        ConvexFunction::PiecewiseAffine(p) => Some(p.clone()),
        ConvexFunction::IndicatorLinear { polytope, slope, offset } if !polytope.is_point() => {
            Some(PiecewiseAffine::unchecked(
                polytope.dim(),
                vec![AffinePiece { slope: slope.clone(), offset: *offset, polytope: polytope.clone() }],
            ))
        }
        _ => None,
    }
}

/// Splits `cell` where `p` and `q` cross and keeps the winning piece on
/// each side.
fn lattice_cell(p: &AffinePiece, q: &AffinePiece, cell: Polytope, take_max: bool, out: &mut Vec<AffinePiece>) {
    let normal: Vec<f64> = p.slope.iter().zip(&q.slope).map(|(a, b)| a - b).collect();
    let offset = q.offset - p.offset;
    let pick = |p_wins: bool| if p_wins { p } else { q };
    if normal.iter().all(|x| x.abs() < 1e-14) {
        let w = pick((p.offset >= q.offset) == take_max);
        out.push(AffinePiece { polytope: cell, ..w.clone() });
        return;
    }
    // below: ℓ_p <= ℓ_q
    let (below, above) = cell.split(&normal, offset);
    if let Some(b) = below {
        out.push(AffinePiece { polytope: b, ..pick(!take_max).clone() });
    }
    if let Some(a) = above {
        out.push(AffinePiece { polytope: a, ..pick(take_max).clone() });
    }
}

fn pwa_lattice(u: &PiecewiseAffine, v: &PiecewiseAffine, take_max: bool) -> PiecewiseAffine {
    let mut out = Vec::new();
    for p in &u.pieces {
        for q in &v.pieces {
            if let Some(cell) = p.polytope.intersect(&q.polytope) {
                lattice_cell(p, q, cell, take_max, &mut out);
            }
        }
    }
    if !take_max {
        // on dom u \ dom v the minimum is u, and symmetrically
        for (a, b) in [(u, v), (v, u)] {
            for p in &a.pieces {
                let mut parts = vec![p.polytope.clone()];
                for q in &b.pieces {
                    parts = parts.iter().flat_map(|r| r.difference(&q.polytope)).collect();
                }
                out.extend(parts.into_iter().map(|r| AffinePiece { polytope: r, ..p.clone() }));
            }
        }
    }
    PiecewiseAffine::unchecked(u.dim, out)
}

fn lattice(u: &ConvexFunction, v: &ConvexFunction, take_max: bool) -> Result<ConvexFunction> {
    if u.dim() != v.dim() {
        return Err(Error::DimensionMismatch { expected: u.dim(), found: v.dim() });
    }
    if u == v {
        return Ok(u.clone());
    }
    let out = match (u, v) {
        (ConvexFunction::Grid(a), ConvexFunction::Grid(b)) => {
            if !a.same_layout(b) {
                return Err(Error::InvalidInput("lattice operations need grids with one layout".into()));
            }
            let values = a
                .values()
                .iter()
                .zip(b.values())
                .map(|(x, y)| if take_max { x.max(*y) } else { x.min(*y) })
                .collect();
            ConvexFunction::Grid(a.with_values(values)?)
        }
        (ConvexFunction::PiecewiseQuadratic(a), ConvexFunction::PiecewiseQuadratic(b)) => {
            ConvexFunction::PiecewiseQuadratic(a.lattice(b, take_max))
        }
        _ => match (as_pwa(u), as_pwa(v)) {
            (Some(a), Some(b)) => ConvexFunction::PiecewiseAffine(pwa_lattice(&a, &b, take_max)),
            _ => {
                return Err(Error::UnsupportedVariant(format!(
                    "lattice operations on {} and {}",
                    u.variant_name(),
                    v.variant_name()
                )))
            }
        },
    };
    if !take_max && !out.is_convex() {
        return Err(Error::NonConvexMin);
    }
    Ok(out)
}

/// `u ∨ v`.
pub fn pointwise_max(u: &ConvexFunction, v: &ConvexFunction) -> Result<ConvexFunction> {
    lattice(u, v, true)
}

/// `u ∧ v`; fails with `NonConvexMin` when the minimum is not convex.
pub fn pointwise_min(u: &ConvexFunction, v: &ConvexFunction) -> Result<ConvexFunction> {
    lattice(u, v, false)
}
