//! Legendre–Fenchel conjugates: closed forms, pointwise evaluation, and the
//! separable discrete transform on grids.

use nalgebra::DMatrix;

use crate::convexfun::{ConvexFunction, Grid, ProfileShape, Quadratic, RadialProfile, INF};
use crate::error::{Error, Result};

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Discrete conjugate `max_i (y·x_i − g_i)` at every `y` in `ys`, through the
/// lower convex hull of the points `(x_i, g_i)`. `xs` and `ys` must be
/// increasing; `+∞` values of `g` are skipped. Returns `−∞` everywhere when
/// every `g_i` is `+∞`.
pub(crate) fn conjugate_1d(xs: &[f64], g: &[f64], ys: &[f64]) -> Vec<f64> {
    let mut hull: Vec<(f64, f64)> = Vec::with_capacity(xs.len());
    for (&x, &v) in xs.iter().zip(g) {
        if v == INF {
            continue;
        }
        while hull.len() >= 2 {
            let (x1, v1) = hull[hull.len() - 2];
            let (x2, v2) = hull[hull.len() - 1];
            // drop the middle point when it lies on or above the chord
            if (v2 - v1) * (x - x1) >= (v - v1) * (x2 - x1) {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push((x, v));
    }
    if hull.is_empty() {
        return vec![f64::NEG_INFINITY; ys.len()];
    }
    let mut k = 0;
    ys.iter()
        .map(|&y| {
            while k + 1 < hull.len() {
                let slope = (hull[k + 1].1 - hull[k].1) / (hull[k + 1].0 - hull[k].0);
                if slope < y {
                    k += 1;
                } else {
                    break;
                }
            }
            y * hull[k].0 - hull[k].1
        })
        .collect()
}

/// Applies `op` to every line of `data` along `axis`, replacing that axis
/// by one of length `new_len`.
pub(crate) fn map_axis<F>(data: &[f64], shape: &[usize], axis: usize, new_len: usize, op: F) -> (Vec<f64>, Vec<usize>)
where
    F: Fn(&[f64]) -> Vec<f64> + Sync,
{
    use rayon::prelude::*;
    let outer: usize = shape[..axis].iter().product();
    let inner: usize = shape[axis + 1..].iter().product();
    let len = shape[axis];
    let mut new_shape = shape.to_vec();
    new_shape[axis] = new_len;
    let lines: Vec<Vec<f64>> = (0..outer * inner)
        .into_par_iter()
        .map(|l| {
            let (o, i) = (l / inner, l % inner);
            let line: Vec<f64> = (0..len).map(|k| data[(o * len + k) * inner + i]).collect();
            op(&line)
        })
        .collect();
    let mut out = vec![0.0; outer * new_len * inner];
    for (l, line) in lines.iter().enumerate() {
        let (o, i) = (l / inner, l % inner);
        for (k, v) in line.iter().enumerate() {
            out[(o * new_len + k) * inner + i] = *v;
        }
    }
    (out, new_shape)
}

fn axis_nodes(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let h = (hi - lo) / (n - 1) as f64;
    (0..n).map(|i| lo + i as f64 * h).collect()
}

/// Discrete conjugate of a grid function on the dual grid, one axis at a
/// time: `u*(y) = max_{x_1} (y_1 x_1 + max_{x_2} (y_2 x_2 + … − u(x)))`.
pub fn grid_conjugate(g: &Grid, dual_lo: &[f64], dual_hi: &[f64], dual_shape: &[usize]) -> Result<Grid> {
    let n = g.dim();
    if dual_lo.len() != n || dual_hi.len() != n || dual_shape.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: dual_lo.len() });
    }
    if g.values().iter().all(|v| *v == INF) {
        return Err(Error::EmptyDomain);
    }
    // w holds max over the processed axes of (⟨y, x⟩ − u)
    let mut data: Vec<f64> = g.values().iter().map(|v| -v).collect();
    let mut shape = g.shape().to_vec();
    for axis in (0..n).rev() {
        let xs = axis_nodes(g.lo()[axis], g.hi()[axis], g.shape()[axis]);
        let ys = axis_nodes(dual_lo[axis], dual_hi[axis], dual_shape[axis]);
        let (d, s) = map_axis(&data, &shape, axis, ys.len(), |line| {
            let neg: Vec<f64> = line.iter().map(|w| -w).collect();
            conjugate_1d(&xs, &neg, &ys)
        });
        data = d;
        shape = s;
    }
    Grid::new(dual_lo.to_vec(), dual_hi.to_vec(), dual_shape.to_vec(), data)
}

/// Per-axis range of finite-difference slopes between finite neighbours,
/// rounded outward to multiples of the primal spacing (so that dual nodes
/// line up with primal nodes) and widened by one node on each side.
pub fn auto_dual_box(g: &Grid) -> (Vec<f64>, Vec<f64>, Vec<usize>) {
    let n = g.dim();
    let strides = g.strides();
    let mut lo = vec![0.0; n];
    let mut hi = vec![0.0; n];
    let mut shape = vec![1; n];
    for k in 0..n {
        let h = g.spacing(k);
        if h == 0.0 {
            continue;
        }
        let (mut smin, mut smax) = (INF, -INF);
        for flat in 0..g.len() {
            let idx = g.unravel(flat);
            if idx[k] + 1 >= g.shape()[k] {
                continue;
            }
            let (a, b) = (g.values()[flat], g.values()[flat + strides[k]]);
            if a < INF && b < INF {
                let s = (b - a) / h;
                smin = smin.min(s);
                smax = smax.max(s);
            }
        }
        if smin > smax {
            smin = 0.0;
            smax = 0.0;
        }
        let i_lo = (smin / h).floor() as i64 - 1;
        let i_hi = (smax / h).ceil() as i64 + 1;
        lo[k] = i_lo as f64 * h;
        hi[k] = i_hi as f64 * h;
        shape[k] = (i_hi - i_lo) as usize + 1;
    }
    (lo, hi, shape)
}

/// `sup_u ⟨y, x⟩ − f(x)` at a single point.
pub fn conjugate_at(f: &ConvexFunction, y: &[f64]) -> Result<f64> {
    let n = f.dim();
    if y.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: y.len() });
    }
    Ok(match f {
        ConvexFunction::Quadratic(q) => quadratic_conjugate_at(q, y),
        ConvexFunction::RadialConeU { t, radius, .. } => radius * (norm(y) - t).max(0.0),
        ConvexFunction::RadialConeV { t, scale, .. } => {
            if norm(y) <= scale * (1.0 + 1e-14) {
                t * norm(y)
            } else {
                INF
            }
        }
        ConvexFunction::RadialProfile(p) => profile_conjugate(p, norm(y)),
        ConvexFunction::IndicatorLinear { polytope, slope, offset } => {
            let d: Vec<f64> = y.iter().zip(slope).map(|(a, b)| a - b).collect();
            polytope.support(&d) - offset
        }
        ConvexFunction::PiecewiseAffine(p) => p
            .pieces
            .iter()
            .map(|q| {
                let d: Vec<f64> = y.iter().zip(&q.slope).map(|(a, b)| a - b).collect();
                q.polytope.support(&d) - q.offset
            })
            .fold(f64::NEG_INFINITY, f64::max),
        ConvexFunction::KinkSum { center, .. } => {
            let m = center.len();
            let tol = 1e-12;
            if y[..m].iter().any(|v| v.abs() > 0.5 + tol) || y[m..].iter().any(|v| v.abs() > tol) {
                INF
            } else {
                dot(&y[..m], center)
            }
        }
        ConvexFunction::PiecewiseQuadratic(p) => {
            let mut bounds = vec![-INF];
            bounds.extend(&p.knots);
            bounds.push(INF);
            p.pieces
                .iter()
                .zip(bounds.windows(2))
                .map(|(&[a, b, c], w)| concave_quadratic_max(y[0] - b, -a, c, w[0], w[1]))
                .fold(f64::NEG_INFINITY, f64::max)
        }
        ConvexFunction::Grid(g) => (0..g.len())
            .filter(|&i| g.values()[i] < INF)
            .map(|i| dot(y, &g.node(i)) - g.values()[i])
            .fold(f64::NEG_INFINITY, f64::max),
    })
}

/// `max_{x ∈ [lo, hi]} s·x + a0 − c x²/2` with `c >= 0`.
fn concave_quadratic_max(s: f64, a0: f64, c: f64, lo: f64, hi: f64) -> f64 {
    let val = |x: f64| s * x + a0 - 0.5 * c * x * x;
    if c > 0.0 {
        val((s / c).clamp(lo, hi))
    } else if s > 0.0 {
        if hi.is_finite() {
            val(hi)
        } else {
            INF
        }
    } else if s < 0.0 {
        if lo.is_finite() {
            val(lo)
        } else {
            INF
        }
    } else {
        a0
    }
}

fn quadratic_conjugate_at(q: &Quadratic, y: &[f64]) -> f64 {
    let eig = q.matrix().symmetric_eigen();
    let w: Vec<f64> = (0..y.len())
        .map(|i| {
            let v = eig.eigenvectors.column(i);
            (0..y.len()).map(|k| v[k] * (y[k] - q.b[k])).sum()
        })
        .collect();
    let scale = eig.eigenvalues.amax().max(1e-300);
    let mut total = -q.c;
    for (i, wi) in w.iter().enumerate() {
        let lam = eig.eigenvalues[i];
        if lam > 1e-12 * scale {
            total += wi * wi / (2.0 * lam);
        } else if wi.abs() > 1e-12 * (1.0 + norm(y)) {
            return INF;
        }
    }
    total
}

/// `sup_{r >= 0} s·r − φ(r)`.
fn profile_conjugate(p: &RadialProfile, s: f64) -> f64 {
    match &p.shape {
        ProfileShape::Power { c, p: e } => {
            if *e == 1.0 {
                if s <= *c * (1.0 + 1e-14) {
                    0.0
                } else {
                    INF
                }
            } else if *c == 0.0 {
                if s == 0.0 {
                    0.0
                } else {
                    INF
                }
            } else {
                let q = e / (e - 1.0);
                (e - 1.0) * c * (s / (c * e)).powf(q)
            }
        }
        ProfileShape::PiecewiseQuadratic { knots, coeffs, radius } => {
            let rmax = radius.unwrap_or(INF);
            let mut bounds = vec![0.0];
            bounds.extend(knots.iter().copied().filter(|k| *k > 0.0 && *k < rmax));
            bounds.push(rmax);
            bounds
                .windows(2)
                .map(|w| {
                    let [a, b, c] = coeffs[knots.partition_point(|&k| k <= 0.5 * (w[0] + w[1].min(w[0] + 1.0)))];
                    concave_quadratic_max(s - b, -a, c, w[0], w[1])
                })
                .fold(f64::NEG_INFINITY, f64::max)
        }
        ProfileShape::Sampled { .. } => {
            // the objective is concave in r; golden-section search
            let (mut a, mut b) = (0.0, p.radius());
            let g = 0.5 * (5f64.sqrt() - 1.0);
            let obj = |r: f64| s * r - p.phi(r);
            for _ in 0..200 {
                let c = b - g * (b - a);
                let d = a + g * (b - a);
                if obj(c) >= obj(d) {
                    b = d;
                } else {
                    a = c;
                }
            }
            obj(0.5 * (a + b)).max(obj(0.0)).max(obj(p.radius()))
        }
    }
}

/// Closed-form conjugate where one exists in the same family.
pub fn conjugate(f: &ConvexFunction) -> Option<ConvexFunction> {
    match f {
        ConvexFunction::Quadratic(q) => {
            let inv = q.matrix().cholesky()?.inverse();
            let b = q.vector();
            let nb = -(&inv * &b);
            let c = 0.5 * b.dot(&(&inv * &b)) - q.c;
            Some(ConvexFunction::Quadratic(Quadratic::from_matrix(&inv, &nb, c)))
        }
        ConvexFunction::RadialConeU { dim, t, radius } => {
            Some(ConvexFunction::RadialConeV { dim: *dim, t: *t, scale: *radius })
        }
        ConvexFunction::RadialConeV { dim, t, scale } => {
            Some(ConvexFunction::RadialConeU { dim: *dim, t: *t, radius: *scale })
        }
        ConvexFunction::RadialProfile(RadialProfile { dim, shape: ProfileShape::Power { c, p } })
            if *p > 1.0 && *c > 0.0 =>
        {
            let q = p / (p - 1.0);
            let cs = (p - 1.0) * c * (1.0 / (c * p)).powf(q);
            Some(ConvexFunction::RadialProfile(RadialProfile::power(*dim, cs, q)))
        }
        ConvexFunction::IndicatorLinear { polytope, slope, offset } if polytope.is_point() => {
            let p = &polytope.vertices()[0];
            let n = p.len();
            Some(ConvexFunction::Quadratic(Quadratic {
                q: vec![vec![0.0; n]; n],
                b: p.clone(),
                c: -dot(slope, p) - offset,
            }))
        }
        _ => None,
    }
}

/// Conjugate sampled on the dual grid: separable discrete transform for
/// grids, closed forms or exact vertex enumeration otherwise.
pub fn legendre(f: &ConvexFunction, dual_lo: &[f64], dual_hi: &[f64], dual_shape: &[usize]) -> Result<Grid> {
    match f {
        ConvexFunction::Grid(g) => grid_conjugate(g, dual_lo, dual_hi, dual_shape),
        _ => {
            let closed = conjugate(f);
            let target = closed.as_ref().unwrap_or(f);
            let err = std::sync::Mutex::new(None);
            let out = Grid::sample(dual_lo, dual_hi, dual_shape, |y| {
                let r = match &closed {
                    Some(c) => c.evaluate(y),
                    None => conjugate_at(target, y),
                };
                r.unwrap_or_else(|e| {
                    *err.lock().unwrap() = Some(e);
                    INF
                })
            });
            if let Some(e) = err.into_inner().unwrap() {
                return Err(e);
            }
            let g = out?;
            if g.values().iter().any(|v| *v == f64::NEG_INFINITY) {
                return Err(Error::EmptyDomain);
            }
            Ok(g)
        }
    }
}

/// `max |u** − u|` over the finite nodes of the grid. The dual grid is
/// aligned with the primal spacing, so `|x|²/2` is reproduced exactly; for
/// non-convex data the gap is the distance to the discrete convex envelope.
pub fn biconjugate_check(g: &Grid) -> Result<f64> {
    let (lo, hi, shape) = auto_dual_box(g);
    let star = grid_conjugate(g, &lo, &hi, &shape)?;
    let back = grid_conjugate(&star, g.lo(), g.hi(), g.shape())?;
    Ok(g
        .values()
        .iter()
        .zip(back.values())
        .filter(|(u, _)| **u < INF)
        .map(|(u, b)| (u - b).abs())
        .fold(0.0, f64::max))
}

/// Rotation matrix for a unit quaternion `(w, x, y, z)`.
pub(crate) fn quaternion_matrix(q: [f64; 4]) -> DMatrix<f64> {
    let [w, x, y, z] = q;
    DMatrix::from_row_slice(
        3,
        3,
        &[
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - w * z),
            2.0 * (x * z + w * y),
            2.0 * (x * y + w * z),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - w * x),
            2.0 * (x * z - w * y),
            2.0 * (y * z + w * x),
            1.0 - 2.0 * (x * x + y * y),
        ],
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn paraboloid_grid() -> Grid {
        ConvexFunction::isotropic(2, 1.0)
            .to_grid(&[-2.0, -2.0], &[2.0, 2.0], &[41, 41])
            .unwrap()
    }

    #[test]
    fn hull_conjugate_matches_brute_force() {
        let xs: Vec<f64> = (0..30).map(|i| -1.5 + 0.1 * i as f64).collect();
        let g: Vec<f64> = xs.iter().map(|x| (x * 3.0f64).sin() + x * x).collect();
        let ys: Vec<f64> = (0..50).map(|i| -4.0 + 0.16 * i as f64).collect();
        let fast = conjugate_1d(&xs, &g, &ys);
        for (y, f) in ys.iter().zip(&fast) {
            let brute = xs.iter().zip(&g).map(|(x, v)| y * x - v).fold(f64::NEG_INFINITY, f64::max);
            assert!((brute - f).abs() < 1e-12);
        }
    }

    #[test]
    fn paraboloid_is_self_dual() {
        let g = paraboloid_grid();
        let star = grid_conjugate(&g, &[-2.0, -2.0], &[2.0, 2.0], &[41, 41]).unwrap();
        for (u, v) in g.values().iter().zip(star.values()) {
            assert!((u - v).abs() < 1e-12);
        }
        assert!(biconjugate_check(&g).unwrap() < 1e-12);
    }

    #[test]
    fn cone_u_conjugates_to_cone_v() {
        let u = ConvexFunction::cone_u(2, 0.5);
        let star = legendre(&u, &[-2.0, -2.0], &[2.0, 2.0], &[21, 21]).unwrap();
        let v = ConvexFunction::cone_v(2, 0.5);
        for i in 0..star.len() {
            let y = star.node(i);
            assert!((star.values()[i] - v.evaluate(&y).unwrap()).abs() < 1e-14);
        }
        // and the grid route agrees within the sampling error
        let grid = u.to_grid(&[-1.0, -1.0], &[1.0, 1.0], &[201, 201]).unwrap();
        let gstar = grid_conjugate(&grid, &[-2.0, -2.0], &[2.0, 2.0], &[21, 21]).unwrap();
        for i in 0..gstar.len() {
            let y = gstar.node(i);
            let exact = v.evaluate(&y).unwrap();
            assert!((gstar.values()[i] - exact).abs() < 2e-2 * (1.0 + exact), "{y:?}");
        }
    }

    #[test]
    fn disk_indicator_conjugates_to_norm() {
        let disk = ConvexFunction::RadialConeU { dim: 2, t: 0.0, radius: 1.0 };
        let grid = disk.to_grid(&[-1.0, -1.0], &[1.0, 1.0], &[401, 401]).unwrap();
        let star = grid_conjugate(&grid, &[-2.0, -2.0], &[2.0, 2.0], &[9, 9]).unwrap();
        for i in 0..star.len() {
            let y = star.node(i);
            let brute = conjugate_at(&ConvexFunction::Grid(grid.clone()), &y).unwrap();
            assert!((star.values()[i] - brute).abs() < 1e-12);
            // lattice points of the disk fall short of the circle by at most one cell
            let err = norm(&y) - star.values()[i];
            assert!((0.0..=0.01 * norm(&y) + 1e-12).contains(&err), "{y:?}");
        }
    }

    #[test]
    fn planted_nonconvexity_shows_in_biconjugate() {
        let g = paraboloid_grid();
        let mut v = g.values().to_vec();
        let i = g.ravel(&[20, 20]);
        v[i] = 0.3;
        let gap = biconjugate_check(&g.with_values(v).unwrap()).unwrap();
        // convex envelope at the origin is the average of the neighbours, h²/2
        assert!((gap - (0.3 - 0.005)).abs() < 1e-9, "{gap}");
    }

    #[test]
    fn closed_forms_match_pointwise_suprema() {
        let q = ConvexFunction::Quadratic(
            Quadratic::new(vec![vec![2.0, 0.5], vec![0.5, 1.0]], vec![0.3, -0.1], 0.7).unwrap(),
        );
        let cq = conjugate(&q).unwrap();
        let p = ConvexFunction::RadialProfile(RadialProfile::power(2, 0.3, 3.0));
        let cp = conjugate(&p).unwrap();
        for y in [[0.0, 0.0], [1.0, -0.5], [-2.0, 0.7]] {
            assert!((cq.evaluate(&y).unwrap() - conjugate_at(&q, &y).unwrap()).abs() < 1e-12);
            let s = norm(&y);
            let brute = (0..20001).map(|i| i as f64 * 1e-3).map(|r| s * r - 0.3 * r * r * r).fold(f64::NEG_INFINITY, f64::max);
            assert!((cp.evaluate(&y).unwrap() - brute).abs() < 1e-6);
        }
    }
}
