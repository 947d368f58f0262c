//! Convex bodies: support functions, intrinsic volumes through the Steiner
//! polynomial, and the canonical dissection of orthogonal simplices.

use serde::{Deserialize, Serialize};

use crate::convexfun::Polytope;
use crate::error::{Error, Result};
use crate::hessmeasure::DEFAULT_S_GRID;
use crate::linalg::poly_fit;
use crate::mc::{hit_count, volume_from_hits};
use crate::kappa;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Body {
    Polytope(Polytope),
    Ball { center: Vec<f64>, radius: f64 },
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

impl Body {
    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::NonpositiveScale(radius));
        }
        Ok(Body::Ball { center, radius })
    }

    pub fn dim(&self) -> usize {
        match self {
            Body::Polytope(p) => p.dim(),
            Body::Ball { center, .. } => center.len(),
        }
    }

    /// Volume of the parallel body `K + sBⁿ` where it has a closed form.
    fn parallel_volume_exact(&self, s: f64) -> Option<f64> {
        let n = self.dim();
        match self {
            Body::Ball { radius, .. } => Some(kappa(n) * (radius + s).powi(n as i32)),
            Body::Polytope(p) if n == 2 => {
                let perimeter: f64 = edges(p).iter().map(|(a, b)| dist(a, b)).sum();
                Some(p.volume() + perimeter * s + std::f64::consts::PI * s * s)
            }
            _ => None,
        }
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// `h_K(y) = sup_{x∈K} ⟨x, y⟩`.
pub fn support_function(k: &Body, y: &[f64]) -> Result<f64> {
    if y.len() != k.dim() {
        return Err(Error::DimensionMismatch { expected: k.dim(), found: y.len() });
    }
    Ok(match k {
        Body::Polytope(p) => p.support(y),
        Body::Ball { center, radius } => dot(center, y) + radius * norm(y),
    })
}

/// Vertex pairs that share `n − 1` tight facets, i.e. the edges.
fn edges(p: &Polytope) -> Vec<(Vec<f64>, Vec<f64>)> {
    let n = p.dim();
    let scale = p.vertices().iter().map(|v| norm(v)).fold(1.0, f64::max);
    let tight: Vec<Vec<usize>> = p
        .vertices()
        .iter()
        .map(|v| {
            p.facets()
                .iter()
                .enumerate()
                .filter(|(_, f)| (dot(&f.normal, v) - f.offset).abs() <= 1e-9 * scale)
                .map(|(i, _)| i)
                .collect()
        })
        .collect();
    let vs = p.vertices();
    let mut out = Vec::new();
    for a in 0..vs.len() {
        for b in a + 1..vs.len() {
            let shared = tight[a].iter().filter(|i| tight[b].contains(i)).count();
            if shared >= n - 1 {
                out.push((vs[a].clone(), vs[b].clone()));
            }
        }
    }
    out
}

/// Distance to a polytope from its facets and edges, built once and
/// queried many times.
struct DistanceField {
    poly: Polytope,
    edges: Vec<(Vec<f64>, Vec<f64>)>,
    tol: f64,
}

impl DistanceField {
    fn new(poly: &Polytope) -> Self {
        let scale = poly.vertices().iter().map(|v| norm(v)).fold(1.0, f64::max);
        DistanceField { poly: poly.clone(), edges: edges(poly), tol: 1e-12 * scale }
    }

    fn distance(&self, x: &[f64]) -> f64 {
        let n = x.len();
        let facets = self.poly.facets();
        if facets.iter().all(|f| dot(&f.normal, x) <= f.offset) {
            return 0.0;
        }
        let mut best = f64::INFINITY;
        let mut proj = [0.0; 8];
        for f in facets {
            let gap = dot(&f.normal, x) - f.offset;
            if gap <= 0.0 {
                continue;
            }
            for k in 0..n {
                proj[k] = x[k] - gap * f.normal[k];
            }
            if facets.iter().all(|g| dot(&g.normal, &proj[..n]) <= g.offset + self.tol) {
                best = best.min(gap);
            }
        }
        for (a, b) in &self.edges {
            let mut ab = 0.0;
            let mut ax = 0.0;
            for k in 0..n {
                ab += (b[k] - a[k]) * (b[k] - a[k]);
                ax += (x[k] - a[k]) * (b[k] - a[k]);
            }
            let w = if ab > 0.0 { (ax / ab).clamp(0.0, 1.0) } else { 0.0 };
            let d2: f64 = (0..n).map(|k| (x[k] - a[k] - w * (b[k] - a[k])).powi(2)).sum();
            best = best.min(d2.sqrt());
        }
        best
    }
}

/// Monte-Carlo `H^n(K + sBⁿ)` with its standard error.
pub fn parallel_volume_mc(k: &Body, s: f64, samples: usize, seed: u64) -> Result<(f64, f64)> {
    let n = k.dim();
    if n > 8 {
        return Err(Error::InvalidInput(format!("parallel volumes are sampled up to n = 8, got {n}")));
    }
    match k {
        Body::Ball { .. } => Ok((k.parallel_volume_exact(s).unwrap(), 0.0)),
        Body::Polytope(p) => {
            let field = DistanceField::new(p);
            let (lo, hi) = p.bounding_box();
            let lo: Vec<f64> = lo.iter().map(|v| v - s).collect();
            let hi: Vec<f64> = hi.iter().map(|v| v + s).collect();
            let box_volume: f64 = lo.iter().zip(&hi).map(|(a, b)| b - a).product();
            let hits = hit_count(seed, samples, n, |u| {
                let mut x = [0.0; 8];
                for i in 0..n {
                    x[i] = lo[i] + (hi[i] - lo[i]) * u[i];
                }
                field.distance(&x[..n]) <= s
            });
            Ok(volume_from_hits(hits, samples, box_volume))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntrinsicVolumes {
    /// `V_0, …, V_n`.
    pub values: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub condition: f64,
    pub monte_carlo: bool,
}

/// `V_0(K), …, V_n(K)` from a least-squares fit of
/// `H^n(K + sBⁿ) = Σ_j κ_{n−j} V_j(K) s^{n−j}` on the s-grid. Parallel
/// volumes are exact for balls and planar polygons and Monte-Carlo
/// otherwise.
pub fn intrinsic_volumes(k: &Body, samples: usize, seed: u64) -> Result<IntrinsicVolumes> {
    let n = k.dim();
    if !(2..=3).contains(&n) {
        return Err(Error::InvalidInput(format!("intrinsic volumes are fitted for n = 2, 3, got {n}")));
    }
    if let Body::Polytope(p) = k {
        if p.volume() <= 0.0 {
            return Err(Error::EmptyDomain);
        }
    }
    let s = DEFAULT_S_GRID;
    let mut vols = Vec::with_capacity(s.len());
    let mut errs = Vec::with_capacity(s.len());
    let mut monte_carlo = false;
    for (i, &si) in s.iter().enumerate() {
        match k.parallel_volume_exact(si) {
            Some(v) => {
                vols.push(v);
                errs.push(0.0);
            }
            None => {
                monte_carlo = true;
                let node_seed = seed.wrapping_add((i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
                let (v, e) = parallel_volume_mc(k, si, samples, node_seed)?;
                vols.push(v);
                errs.push(e);
            }
        }
    }
    let fit = poly_fit(&s, &vols, monte_carlo.then_some(errs.as_slice()), n)?;
    let values = (0..=n).map(|j| fit.coefficients[n - j] / kappa(n - j)).collect();
    let std_errors = (0..=n).map(|j| fit.std_errors[n - j] / kappa(n - j)).collect();
    Ok(IntrinsicVolumes { values, std_errors, condition: fit.condition, monte_carlo })
}

/// `⟨x₀; x₁, …, x_n⟩`: the simplex with vertices `p_0 = x₀` and
/// `p_i = p_{i−1} + x_i`, the `x_i` pairwise orthogonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrthogonalSimplex {
    pub base: Vec<f64>,
    pub edges: Vec<Vec<f64>>,
}

impl OrthogonalSimplex {
    pub fn new(base: Vec<f64>, edges: Vec<Vec<f64>>) -> Result<Self> {
        let n = base.len();
        if edges.len() != n || edges.iter().any(|e| e.len() != n) {
            return Err(Error::DimensionMismatch { expected: n, found: edges.len() });
        }
        let scale = edges.iter().map(|e| dot(e, e)).fold(0.0, f64::max);
        if edges.iter().any(|e| dot(e, e) <= 1e-24 * scale.max(1e-300)) {
            return Err(Error::InvalidInput("edge vectors must be non-zero".into()));
        }
        for a in 0..n {
            for b in a + 1..n {
                if dot(&edges[a], &edges[b]).abs() > 1e-10 * scale {
                    return Err(Error::InvalidInput(format!("edges {a} and {b} are not orthogonal")));
                }
            }
        }
        Ok(OrthogonalSimplex { base, edges })
    }

    /// `e_1, …, e_n` from the origin.
    pub fn standard(n: usize) -> Self {
        let edges = (0..n).map(|i| (0..n).map(|k| if k == i { 1.0 } else { 0.0 }).collect()).collect();
        OrthogonalSimplex { base: vec![0.0; n], edges }
    }

    pub fn dim(&self) -> usize {
        self.base.len()
    }

    /// `p_0, …, p_n`.
    pub fn vertices(&self) -> Vec<Vec<f64>> {
        let mut out = vec![self.base.clone()];
        for e in &self.edges {
            let last = out.last().unwrap();
            out.push(last.iter().zip(e).map(|(a, b)| a + b).collect());
        }
        out
    }

    pub fn volume(&self) -> f64 {
        let n = self.dim();
        self.edges.iter().map(|e| norm(e)).product::<f64>() / (1..=n).map(|k| k as f64).product::<f64>()
    }

    pub fn polytope(&self) -> Result<Polytope> {
        Polytope::from_vertices(self.dim(), &self.vertices())
    }
}

/// The pieces `(1−t) S̲_k + t S̄_{n−k}` for `k = 0, …, n`, where `S̲_k` is
/// spanned by `p_0, …, p_k` and `S̄_{n−k}` by `p_k, …, p_n`.
pub fn canonical_dissection(s: &OrthogonalSimplex, t: f64) -> Result<Vec<Polytope>> {
    if !(t > 0.0 && t < 1.0) {
        return Err(Error::InvalidInput(format!("dissection parameter must lie in (0, 1), got {t}")));
    }
    let n = s.dim();
    let p = s.vertices();
    (0..=n)
        .map(|k| {
            let mut pts = Vec::with_capacity((k + 1) * (n - k + 1));
            for a in &p[..=k] {
                for b in &p[k..] {
                    pts.push(a.iter().zip(b).map(|(x, y)| (1.0 - t) * x + t * y).collect());
                }
            }
            Polytope::from_vertices(n, &pts)
        })
        .collect()
}

/// Whether `piece` equals `proj_E(piece) + proj_F(piece)` for `E` spanned
/// by `basis` and `F = E^⊥`, checked on volumes of the vertex hulls.
pub fn is_orthogonal_cylinder(piece: &Polytope, basis: &[Vec<f64>]) -> Result<bool> {
    let n = piece.dim();
    if basis.is_empty() || basis.len() >= n {
        return Ok(false);
    }
    let unit: Vec<Vec<f64>> = gram_schmidt(basis);
    let proj_e = |v: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0; n];
        for b in &unit {
            let c = dot(b, v);
            out.iter_mut().zip(b).for_each(|(o, x)| *o += c * x);
        }
        out
    };
    let mut pts = Vec::new();
    for a in piece.vertices() {
        let ea = proj_e(a);
        for b in piece.vertices() {
            let eb = proj_e(b);
            pts.push((0..n).map(|k| ea[k] + (b[k] - eb[k])).collect::<Vec<f64>>());
        }
    }
    let sum = Polytope::from_vertices(n, &pts)?;
    let (v, w) = (piece.volume(), sum.volume());
    Ok((v - w).abs() <= 1e-9 * v.max(w))
}

fn gram_schmidt(vs: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::new();
    for v in vs {
        let mut w = v.clone();
        for u in &out {
            let c = dot(u, &w);
            w.iter_mut().zip(u).for_each(|(a, b)| *a -= c * b);
        }
        let l = norm(&w);
        if l > 1e-12 {
            out.push(w.iter().map(|x| x / l).collect());
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DissectionSample {
    /// Monte-Carlo volume of the union of the pieces.
    pub union_volume: f64,
    pub union_stderr: f64,
    /// Samples lying in the interior of two or more pieces.
    pub overlaps: usize,
    /// Samples in the simplex but in no piece.
    pub gaps: usize,
}

/// Samples the bounding box of the simplex and counts overlaps between
/// piece interiors and points of the simplex missed by every piece.
pub fn dissection_sample(
    s: &OrthogonalSimplex,
    pieces: &[Polytope],
    samples: usize,
    seed: u64,
) -> Result<DissectionSample> {
    let whole = s.polytope()?;
    let n = s.dim();
    let (lo, hi) = whole.bounding_box();
    let box_volume: f64 = lo.iter().zip(&hi).map(|(a, b)| b - a).product();
    let tol = 1e-12 * hi.iter().chain(&lo).fold(1.0f64, |a, v| a.max(v.abs()));
    let counts = crate::mc::sharded(seed, samples, n, [0usize; 3], |acc, u| {
        let x: Vec<f64> = (0..n).map(|k| lo[k] + (hi[k] - lo[k]) * u[k]).collect();
        let inside = pieces.iter().filter(|p| p.interior_contains(&x, tol)).count();
        let member = pieces.iter().any(|p| p.contains(&x));
        if member {
            acc[0] += 1;
        }
        if inside > 1 {
            acc[1] += 1;
        }
        if !member && whole.interior_contains(&x, tol) {
            acc[2] += 1;
        }
    });
    let total = counts.iter().fold([0usize; 3], |a, c| [a[0] + c[0], a[1] + c[1], a[2] + c[2]]);
    let (union_volume, union_stderr) = volume_from_hits(total[0], samples, box_volume);
    Ok(DissectionSample { union_volume, union_stderr, overlaps: total[1], gaps: total[2] })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mc::DEFAULT_SEED;
    use std::f64::consts::PI;

    fn unit_square() -> Body {
        Body::Polytope(Polytope::from_box(&[0.0, 0.0], &[1.0, 1.0]).unwrap())
    }

    #[test]
    fn support_examples() {
        let b = Body::ball(vec![0.0, 0.0], 1.0).unwrap();
        assert_eq!(support_function(&b, &[3.0, 4.0]).unwrap(), 5.0);
        let sq = unit_square();
        assert_eq!(support_function(&sq, &[1.0, -1.0]).unwrap(), 1.0);
        for k in [&b, &sq] {
            let y = [0.3, -1.7];
            let h = support_function(k, &y).unwrap();
            assert!((support_function(k, &[0.6, -3.4]).unwrap() - 2.0 * h).abs() < 1e-14);
        }
    }

    #[test]
    fn planar_intrinsic_volumes() {
        let v = intrinsic_volumes(&unit_square(), 0, DEFAULT_SEED).unwrap();
        for (got, want) in v.values.iter().zip([1.0, 2.0, 1.0]) {
            assert!((got - want).abs() < 1e-10, "{:?}", v.values);
        }
        let disk = intrinsic_volumes(&Body::ball(vec![0.5, 0.0], 1.0).unwrap(), 0, DEFAULT_SEED).unwrap();
        for (got, want) in disk.values.iter().zip([1.0, PI, PI]) {
            assert!((got - want).abs() < 1e-10);
        }
        assert!(!v.monte_carlo);
    }

    /// `vol + area·s + (Σ ℓ_e (π − θ_e)/2) s² + κ₃ s³` with `θ_e` the
    /// dihedral angle.
    fn steiner3(p: &Polytope, s: f64) -> f64 {
        let facets = p.facets();
        let area: f64 = facets
            .iter()
            .map(|f| {
                let on: Vec<Vec<f64>> =
                    p.vertices().iter().filter(|v| (dot(&f.normal, v) - f.offset).abs() < 1e-9).cloned().collect();
                // fan triangulation after sorting around the centroid
                let c: Vec<f64> = (0..3).map(|k| on.iter().map(|v| v[k]).sum::<f64>() / on.len() as f64).collect();
                let a0: Vec<f64> = (0..3).map(|k| on[0][k] - c[k]).collect();
                let b0 = cross(&f.normal, &a0);
                let mut ring = on.clone();
                ring.sort_by(|x, y| {
                    let ang = |v: &Vec<f64>| {
                        let d: Vec<f64> = (0..3).map(|k| v[k] - c[k]).collect();
                        dot(&d, &b0).atan2(dot(&d, &a0))
                    };
                    ang(x).partial_cmp(&ang(y)).unwrap()
                });
                (0..ring.len())
                    .map(|i| {
                        let a: Vec<f64> = (0..3).map(|k| ring[i][k] - c[k]).collect();
                        let b: Vec<f64> = (0..3).map(|k| ring[(i + 1) % ring.len()][k] - c[k]).collect();
                        0.5 * norm(&cross(&a, &b))
                    })
                    .sum::<f64>()
            })
            .sum();
        let mean: f64 = edges(p)
            .iter()
            .map(|(a, b)| {
                let fs: Vec<&crate::convexfun::Halfspace> = facets
                    .iter()
                    .filter(|f| (dot(&f.normal, a) - f.offset).abs() < 1e-9 && (dot(&f.normal, b) - f.offset).abs() < 1e-9)
                    .collect();
                let ext = dot(&fs[0].normal, &fs[1].normal).clamp(-1.0, 1.0).acos();
                dist(a, b) * ext / 2.0
            })
            .sum();
        p.volume() + area * s + mean * s * s + kappa(3) * s.powi(3)
    }

    fn cross(a: &[f64], b: &[f64]) -> Vec<f64> {
        vec![a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
    }

    #[test]
    fn parallel_volume_mc_matches_steiner_formula() {
        let cube = Polytope::from_box(&[0.0; 3], &[1.0; 3]).unwrap();
        let simplex = OrthogonalSimplex::new(vec![0.1, 0.0, 0.0], vec![vec![1.0, 0.0, 0.0], vec![0.0, 0.8, 0.0], vec![0.0, 0.0, 1.2]])
            .unwrap()
            .polytope()
            .unwrap();
        for p in [cube, simplex] {
            for s in [0.2, 0.7] {
                let (v, e) = parallel_volume_mc(&Body::Polytope(p.clone()), s, 200_000, 5).unwrap();
                let want = steiner3(&p, s);
                assert!((v - want).abs() <= 4.0 * e, "{v} {want} ± {e}");
            }
        }
        // the cube's closed form is 1 + 6s + 3πs² + 4π/3 s³
        let cube = Polytope::from_box(&[0.0; 3], &[1.0; 3]).unwrap();
        assert!((steiner3(&cube, 0.5) - (1.0 + 3.0 + 0.75 * PI + PI / 6.0)).abs() < 1e-12);
    }

    #[test]
    fn distance_field_agrees_with_polytope_distance() {
        let p = OrthogonalSimplex::standard(3).polytope().unwrap();
        let field = DistanceField::new(&p);
        for x in [[2.0, 0.5, 0.3], [-0.3, -0.4, 1.2], [0.5, 0.5, 0.5], [0.2, 0.3, 0.1], [1.5, 1.5, 1.5]] {
            assert!((field.distance(&x) - p.distance(&x)).abs() < 1e-12, "{x:?}");
        }
    }

    #[test]
    fn cube_intrinsic_volumes_by_monte_carlo() {
        let cube = Body::Polytope(Polytope::from_box(&[0.0; 3], &[1.0; 3]).unwrap());
        let v = intrinsic_volumes(&cube, 200_000, DEFAULT_SEED).unwrap();
        assert!(v.monte_carlo);
        for (j, want) in [1.0, 3.0, 3.0, 1.0].iter().enumerate() {
            assert!((v.values[j] - want).abs() <= 4.0 * v.std_errors[j], "V_{j} = {} ± {}", v.values[j], v.std_errors[j]);
        }
        let ball = intrinsic_volumes(&Body::ball(vec![0.0; 3], 1.0).unwrap(), 0, 1).unwrap();
        for (j, want) in [1.0, 4.0, 2.0 * PI, 4.0 * PI / 3.0].iter().enumerate() {
            assert!((ball.values[j] - want).abs() < 1e-9);
        }
    }

    #[test]
    fn intrinsic_volumes_grow_on_nested_boxes() {
        let mut last: Option<Vec<f64>> = None;
        for a in [0.5, 1.0, 1.5, 2.0] {
            let b = Body::Polytope(Polytope::from_box(&[0.0, 0.0], &[a, 0.7 * a]).unwrap());
            let v = intrinsic_volumes(&b, 0, 1).unwrap().values;
            if let Some(prev) = &last {
                for j in 1..=2 {
                    assert!(v[j] >= prev[j]);
                }
            }
            last = Some(v);
        }
    }

    #[test]
    fn planar_dissection_areas() {
        let s = OrthogonalSimplex::standard(2);
        let pieces = canonical_dissection(&s, 0.5).unwrap();
        let areas: Vec<f64> = pieces.iter().map(|p| p.volume()).collect();
        for (a, want) in areas.iter().zip([0.125, 0.25, 0.125]) {
            assert!((a - want).abs() < 1e-12, "{areas:?}");
        }
        assert!((areas.iter().sum::<f64>() - s.volume()).abs() < 1e-12);
    }

    #[test]
    fn dissection_fills_the_simplex_without_overlap() {
        let s = OrthogonalSimplex::new(
            vec![0.2, -0.1, 0.0],
            vec![vec![1.0, 1.0, 0.0], vec![-0.5, 0.5, 0.0], vec![0.0, 0.0, 0.7]],
        )
        .unwrap();
        for t in [0.25, 0.5, 0.75] {
            let pieces = canonical_dissection(&s, t).unwrap();
            let exact: f64 = pieces.iter().map(|p| p.volume()).sum();
            assert!((exact - s.volume()).abs() < 1e-12);
            let mc = dissection_sample(&s, &pieces, 100_000, 11).unwrap();
            assert!((mc.union_volume - s.volume()).abs() <= 4.0 * mc.union_stderr);
            assert_eq!(mc.overlaps, 0);
            assert_eq!(mc.gaps, 0);
        }
    }

    #[test]
    fn middle_pieces_are_orthogonal_cylinders() {
        for n in [2, 3] {
            let s = OrthogonalSimplex::standard(n);
            let pieces = canonical_dissection(&s, 0.4).unwrap();
            for k in 1..n {
                assert!(is_orthogonal_cylinder(&pieces[k], &s.edges[..k]).unwrap(), "n={n} k={k}");
            }
            // the end pieces are simplices, not cylinders
            assert!(!is_orthogonal_cylinder(&pieces[0], &s.edges[..1]).unwrap());
        }
    }

    proptest::proptest! {
        #[test]
        fn support_is_sublinear(
            y in proptest::collection::vec(-3.0f64..3.0, 2),
            z in proptest::collection::vec(-3.0f64..3.0, 2),
            lam in 0.0f64..5.0,
        ) {
            let k = Body::Polytope(Polytope::from_vertices(2, &[vec![0.0, 0.0], vec![2.0, 0.5], vec![0.3, 1.7]]).unwrap());
            let yz: Vec<f64> = y.iter().zip(&z).map(|(a, b)| a + b).collect();
            let h = |v: &[f64]| support_function(&k, v).unwrap();
            proptest::prop_assert!(h(&yz) <= h(&y) + h(&z) + 1e-12);
            let ly: Vec<f64> = y.iter().map(|a| lam * a).collect();
            proptest::prop_assert!((h(&ly) - lam * h(&y)).abs() <= 1e-12 * (1.0 + lam * h(&y).abs()));
        }

        #[test]
        fn dissection_volumes_add_up(t in 0.01f64..0.99, angle in 0.0f64..3.1, a in 0.2f64..2.0, b in 0.2f64..2.0, c in 0.2f64..2.0) {
            let (co, si) = (angle.cos(), angle.sin());
            let s = OrthogonalSimplex::new(
                vec![0.3, -0.2, 0.1],
                vec![vec![a * co, a * si, 0.0], vec![-b * si, b * co, 0.0], vec![0.0, 0.0, c]],
            )
            .unwrap();
            let total: f64 = canonical_dissection(&s, t).unwrap().iter().map(|p| p.volume()).sum();
            proptest::prop_assert!((total - s.volume()).abs() <= 1e-10 * s.volume());
        }
    }

    #[test]
    fn bodies_round_trip_through_json() {
        for b in [unit_square(), Body::ball(vec![1.0, 2.0], 0.5).unwrap()] {
            let text = serde_json::to_string(&b).unwrap();
            assert_eq!(serde_json::from_str::<Body>(&text).unwrap(), b);
        }
        assert!(OrthogonalSimplex::new(vec![0.0; 2], vec![vec![1.0, 0.0], vec![1.0, 1.0]]).is_err());
        assert!(canonical_dissection(&OrthogonalSimplex::standard(2), 1.0).is_err());
    }
}
