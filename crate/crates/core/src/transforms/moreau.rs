//! Moreau–Yosida envelopes `M_λu = u □ |·|²/2λ`.

use nalgebra::DMatrix;

use super::legendre::map_axis;
use crate::convexfun::{ConvexFunction, Grid, ProfileShape, Quadratic, RadialProfile, INF};
use crate::error::{Error, Result};

/// `M_λu`, in closed form for quadratics, point indicators, the cones and
/// power profiles, and by separable per-axis minimization for grids.
pub fn moreau_yosida(u: &ConvexFunction, lambda: f64) -> Result<ConvexFunction> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::NonpositiveScale(lambda));
    }
    match u {
        ConvexFunction::Quadratic(q) => Ok(ConvexFunction::Quadratic(quadratic_envelope(q, lambda))),
        ConvexFunction::IndicatorLinear { polytope, slope, offset } if polytope.is_point() => {
            let p = &polytope.vertices()[0];
            let n = p.len();
            let pp: f64 = p.iter().map(|x| x * x).sum();
            let base: f64 = slope.iter().zip(p).map(|(a, b)| a * b).sum::<f64>() + offset;
            Ok(ConvexFunction::Quadratic(Quadratic::from_matrix(
                &(DMatrix::identity(n, n) / lambda),
                &nalgebra::DVector::from_iterator(n, p.iter().map(|x| -x / lambda)),
                base + pp / (2.0 * lambda),
            )))
        }
        ConvexFunction::RadialConeU { dim, t, radius } => {
            // prox of the cone moves x radially by λt, clamped to the ball
            let (t, r, l) = (*t, *radius, lambda);
            Ok(ConvexFunction::RadialProfile(RadialProfile {
                dim: *dim,
                shape: ProfileShape::PiecewiseQuadratic {
                    knots: vec![l * t, r + l * t],
                    coeffs: vec![
                        [0.0, 0.0, 1.0 / l],
                        [-0.5 * l * t * t, t, 0.0],
                        [t * r + r * r / (2.0 * l), -r / l, 1.0 / l],
                    ],
                    radius: None,
                },
            }))
        }
        ConvexFunction::RadialConeV { dim, t, scale } => {
            let (t, s, l) = (*t, *scale, lambda);
            Ok(ConvexFunction::RadialProfile(RadialProfile {
                dim: *dim,
                shape: ProfileShape::PiecewiseQuadratic {
                    knots: vec![t, t + l * s],
                    coeffs: vec![
                        [0.0, 0.0, 0.0],
                        [t * t / (2.0 * l), -t / l, 1.0 / l],
                        [-s * t - 0.5 * l * s * s, s, 0.0],
                    ],
                    radius: None,
                },
            }))
        }
        ConvexFunction::RadialProfile(RadialProfile { dim, shape: ProfileShape::Power { c, p } }) if *p == 2.0 => {
            Ok(ConvexFunction::RadialProfile(RadialProfile::power(*dim, c / (1.0 + 2.0 * lambda * c), 2.0)))
        }
        ConvexFunction::Grid(g) => Ok(ConvexFunction::Grid(grid_envelope(g, lambda)?)),
        other => Err(Error::UnsupportedVariant(format!(
            "Moreau envelope of {} is not implemented",
            other.variant_name()
        ))),
    }
}

/// `Q′ = Q(I+λQ)⁻¹`, `b′ = (I+λQ)⁻¹b`, `c′ = c − λ/2 · bᵀ(I+λQ)⁻¹b`.
pub fn quadratic_envelope(q: &Quadratic, lambda: f64) -> Quadratic {
    let n = q.dim();
    let m = q.matrix();
    let shift = DMatrix::identity(n, n) + &m * lambda;
    let inv = shift.clone().try_inverse().expect("I + λQ is positive definite");
    let qn = &m * &inv;
    let qn = (&qn + qn.transpose()) * 0.5;
    let b = q.vector();
    let bn = &inv * &b;
    let c = q.c - 0.5 * lambda * b.dot(&bn);
    Quadratic::from_matrix(&qn, &bn, c)
}

/// Largest finite-difference slope magnitude between finite neighbours.
fn max_slope(g: &Grid) -> f64 {
    let strides = g.strides();
    let mut best: f64 = 0.0;
    for k in 0..g.dim() {
        let h = g.spacing(k);
        if h == 0.0 {
            continue;
        }
        for flat in 0..g.len() {
            if g.unravel(flat)[k] + 1 >= g.shape()[k] {
                continue;
            }
            let (a, b) = (g.values()[flat], g.values()[flat + strides[k]]);
            if a < INF && b < INF {
                best = best.max(((b - a) / h).abs());
            }
        }
    }
    best
}

/// Separable envelope of a grid function on the box enlarged by
/// `λ·(max slope)`, rounded up to whole nodes so the input nodes are kept.
pub fn grid_envelope(g: &Grid, lambda: f64) -> Result<Grid> {
    if g.values().iter().all(|v| *v == INF) {
        return Err(Error::EmptyDomain);
    }
    let n = g.dim();
    let slope = max_slope(g);
    let mut lo = g.lo().to_vec();
    let mut hi = g.hi().to_vec();
    let mut shape = g.shape().to_vec();
    for k in 0..n {
        let h = g.spacing(k);
        if h == 0.0 {
            continue;
        }
        let extra = (lambda * slope / h).ceil() as usize;
        lo[k] -= extra as f64 * h;
        hi[k] += extra as f64 * h;
        shape[k] += 2 * extra;
    }
    let mut data = g.values().to_vec();
    let mut cur = g.shape().to_vec();
    for axis in 0..n {
        let h = g.spacing(axis);
        let zs: Vec<f64> = (0..g.shape()[axis]).map(|i| g.coord(axis, i)).collect();
        let xs: Vec<f64> = (0..shape[axis]).map(|i| lo[axis] + i as f64 * h).collect();
        let (d, s) = map_axis(&data, &cur, axis, xs.len(), |line| {
            xs.iter()
                .map(|x| {
                    line.iter()
                        .zip(&zs)
                        .filter(|(w, _)| **w < INF)
                        .map(|(w, z)| w + (x - z) * (x - z) / (2.0 * lambda))
                        .fold(INF, f64::min)
                })
                .collect()
        });
        data = d;
        cur = s;
    }
    Grid::new(lo, hi, shape, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convexfun::inf_convolve;
    use crate::transforms::legendre::grid_conjugate;

    #[test]
    fn quadratic_envelope_closed_form() {
        let u = ConvexFunction::isotropic(3, 1.0);
        let m = moreau_yosida(&u, 1.0).unwrap();
        assert_eq!(m, ConvexFunction::isotropic(3, 0.5));
        let p = moreau_yosida(&ConvexFunction::point_indicator(vec![0.0, 0.0]), 1.0).unwrap();
        assert!((p.evaluate(&[1.0, 2.0]).unwrap() - 2.5).abs() < 1e-15);
        assert_eq!(moreau_yosida(&u, -1.0), Err(Error::NonpositiveScale(-1.0)));
    }

    #[test]
    fn grid_envelope_matches_inf_convolution() {
        let u = ConvexFunction::isotropic(2, 1.0).to_grid(&[-1.0, -1.0], &[1.0, 1.0], &[21, 21]).unwrap();
        let kernel = ConvexFunction::isotropic(2, 1.0).to_grid(&[-2.0, -2.0], &[2.0, 2.0], &[41, 41]).unwrap();
        let direct = inf_convolve(&u, &kernel).unwrap();
        let env = grid_envelope(&u, 1.0).unwrap();
        for i in 0..env.len() {
            let x = env.node(i);
            assert!((env.values()[i] - direct.evaluate(&x)).abs() < 1e-12);
            // and the continuous |x|²/4 up to the grid error
            let exact = 0.25 * (x[0] * x[0] + x[1] * x[1]);
            assert!((env.values()[i] - exact).abs() < 0.01);
        }
    }

    #[test]
    fn envelope_conjugate_adds_quadratic() {
        let u = ConvexFunction::isotropic(1, 2.0).to_grid(&[-1.0], &[1.0], &[201]).unwrap();
        let lam = 0.5;
        let m = grid_envelope(&u, lam).unwrap();
        let ys = (&[-1.5], &[1.5], &[31]);
        let us = grid_conjugate(&u, ys.0, ys.1, ys.2).unwrap();
        let ms = grid_conjugate(&m, ys.0, ys.1, ys.2).unwrap();
        for i in 0..us.len() {
            let y = us.node(i)[0];
            assert!((ms.values()[i] - us.values()[i] - 0.5 * lam * y * y).abs() < 1e-3);
        }
    }

    #[test]
    fn cone_envelopes_are_continuous() {
        for f in [ConvexFunction::cone_u(3, 0.4), ConvexFunction::cone_v(3, 0.4)] {
            let ConvexFunction::RadialProfile(p) = moreau_yosida(&f, 0.7).unwrap() else { panic!() };
            let ProfileShape::PiecewiseQuadratic { knots, .. } = &p.shape else { panic!() };
            for &k in knots {
                let (a, b) = (p.jet(k - 1e-12), p.jet(k + 1e-12));
                assert!((a.0 - b.0).abs() < 1e-10 && (a.1 - b.1).abs() < 1e-10);
            }
            // envelope below the function, and matches brute force at a point
            let x = [0.9, 0.0, 0.0];
            let brute = (0..=4000)
                .map(|i| -2.0 + i as f64 * 1e-3)
                .map(|z| f.evaluate(&[z, 0.0, 0.0]).unwrap() + (0.9 - z) * (0.9 - z) / 1.4)
                .fold(INF, f64::min);
            assert!((p.phi(0.9) - brute).abs() < 1e-6, "{} vs {brute}", p.phi(0.9));
            assert!(p.phi(0.9) <= f.evaluate(&x).unwrap() + 1e-15);
        }
    }
}
