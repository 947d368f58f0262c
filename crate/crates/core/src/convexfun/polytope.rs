//! Bounded convex polytopes carried in both vertex and half-space form.
//!
//! Enumeration is brute force over index subsets, which is fine for the
//! small bodies used here (dimension ≤ 3, a few dozen vertices).

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Halfspace {
    /// Unit outer normal.
    pub normal: Vec<f64>,
    /// The half-space is `normal · x <= offset`.
    pub offset: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PolytopeJson", into = "PolytopeJson")]
pub struct Polytope {
    dim: usize,
    vertices: Vec<Vec<f64>>,
    facets: Vec<Halfspace>,
}

#[derive(Serialize, Deserialize)]
struct PolytopeJson {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    vertices: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    halfspaces: Option<Vec<Halfspace>>,
}

impl TryFrom<PolytopeJson> for Polytope {
    type Error = Error;

    fn try_from(j: PolytopeJson) -> Result<Self> {
        match (j.vertices, j.halfspaces) {
            (Some(v), _) => {
                let dim = j.dim.or_else(|| v.first().map(|p| p.len())).unwrap_or(0);
                Polytope::from_vertices(dim, &v)
            }
            (None, Some(h)) => {
                let dim = j.dim.or_else(|| h.first().map(|p| p.normal.len())).unwrap_or(0);
                Polytope::from_halfspaces(dim, &h)
            }
            (None, None) => Err(Error::Parse("polytope needs vertices or halfspaces".into())),
        }
    }
}

impl From<Polytope> for PolytopeJson {
    fn from(p: Polytope) -> Self {
        PolytopeJson {
            dim: Some(p.dim),
            vertices: Some(p.vertices),
            halfspaces: if p.facets.is_empty() { None } else { Some(p.facets) },
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Orthonormalizes `rows`; returns the basis and whether they were independent.
fn gram_schmidt(rows: &[Vec<f64>], tol: f64) -> (Vec<Vec<f64>>, bool) {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut independent = true;
    for r in rows {
        let mut v = r.clone();
        for b in &basis {
            let c = dot(&v, b);
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
        }
        let nv = norm(&v);
        if nv <= tol * (1.0 + norm(r)) {
            independent = false;
            continue;
        }
        v.iter_mut().for_each(|x| *x /= nv);
        basis.push(v);
    }
    (basis, independent)
}

/// Orthonormal completion of `basis` to all of ℝ^dim.
fn complement(basis: &[Vec<f64>], dim: usize) -> Vec<Vec<f64>> {
    let mut all = basis.to_vec();
    let mut out = Vec::new();
    for k in 0..dim {
        let mut e = vec![0.0; dim];
        e[k] = 1.0;
        for b in &all {
            let c = dot(&e, b);
            e.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
        }
        let ne = norm(&e);
        if ne > 1e-6 {
            e.iter_mut().for_each(|x| *x /= ne);
            all.push(e.clone());
            out.push(e);
        }
        if all.len() == dim {
            break;
        }
    }
    out
}

pub(crate) fn combinations(m: usize, k: usize, mut visit: impl FnMut(&[usize])) {
    if k > m {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        visit(&idx);
        let Some(i) = (0..k).rev().find(|&i| idx[i] < m - k + i) else {
            return;
        };
        idx[i] += 1;
        for l in i + 1..k {
            idx[l] = idx[l - 1] + 1;
        }
    }
}

fn dedup_points(points: &[Vec<f64>], tol: f64) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::new();
    for p in points {
        if !out.iter().any(|q| q.iter().zip(p).all(|(a, b)| (a - b).abs() <= tol)) {
            out.push(p.clone());
        }
    }
    out
}

impl Polytope {
    /// The singleton `{p}`. It has no facets and zero volume.
    pub fn point(p: Vec<f64>) -> Self {
        Polytope { dim: p.len(), vertices: vec![p], facets: Vec::new() }
    }

    pub fn from_box(lo: &[f64], hi: &[f64]) -> Result<Self> {
        let dim = lo.len();
        if hi.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: hi.len() });
        }
        let mut h = Vec::with_capacity(2 * dim);
        for k in 0..dim {
            let mut e = vec![0.0; dim];
            e[k] = 1.0;
            h.push(Halfspace { normal: e.clone(), offset: hi[k] });
            e[k] = -1.0;
            h.push(Halfspace { normal: e, offset: -lo[k] });
        }
        Polytope::from_halfspaces(dim, &h)
    }

    /// Convex hull of `points`. Lower-dimensional hulls are rejected except
    /// for a single point.
    pub fn from_vertices(dim: usize, points: &[Vec<f64>]) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("polytope dimension must be positive".into()));
        }
        if let Some(p) = points.iter().find(|p| p.len() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, found: p.len() });
        }
        let scale = points
            .iter()
            .flat_map(|p| p.iter())
            .fold(1.0f64, |m, x| m.max(x.abs()));
        let tol = TOL * scale;
        let pts = dedup_points(points, tol);
        match pts.len() {
            0 => return Err(Error::EmptyDomain),
            1 => return Ok(Polytope::point(pts[0].clone())),
            _ => {}
        }
        let diffs: Vec<Vec<f64>> = pts[1..]
            .iter()
            .map(|p| p.iter().zip(&pts[0]).map(|(a, b)| a - b).collect())
            .collect();
        let (span, _) = gram_schmidt(&diffs, 1e-9);
        if span.len() < dim {
            return Err(Error::InvalidInput(format!(
                "polytope spans only {} of {} dimensions",
                span.len(),
                dim
            )));
        }

        let mut facets: Vec<Halfspace> = Vec::new();
        combinations(pts.len(), dim, |idx| {
            let rows: Vec<Vec<f64>> = idx[1..]
                .iter()
                .map(|&i| pts[i].iter().zip(&pts[idx[0]]).map(|(a, b)| a - b).collect())
                .collect();
            let (basis, independent) = gram_schmidt(&rows, 1e-9);
            if !independent {
                return;
            }
            let normal = match complement(&basis, dim).into_iter().next() {
                Some(v) => v,
                None => return,
            };
            let offset = dot(&normal, &pts[idx[0]]);
            let (mut above, mut below) = (false, false);
            for p in &pts {
                let s = dot(&normal, p) - offset;
                above |= s > tol;
                below |= s < -tol;
            }
            let h = match (above, below) {
                (false, _) => Halfspace { normal, offset },
                (true, false) => Halfspace {
                    normal: normal.iter().map(|x| -x).collect(),
                    offset: -offset,
                },
                (true, true) => return,
            };
            let dup = facets.iter().any(|f| {
                (f.offset - h.offset).abs() <= tol
                    && f.normal.iter().zip(&h.normal).all(|(a, b)| (a - b).abs() <= 1e-9)
            });
            if !dup {
                facets.push(h);
            }
        });

        let vertices: Vec<Vec<f64>> = pts
            .iter()
            .filter(|p| {
                let tight: Vec<Vec<f64>> = facets
                    .iter()
                    .filter(|f| (dot(&f.normal, p) - f.offset).abs() <= tol)
                    .map(|f| f.normal.clone())
                    .collect();
                gram_schmidt(&tight, 1e-9).0.len() == dim
            })
            .cloned()
            .collect();
        Ok(Polytope { dim, vertices, facets })
    }

    /// Intersection of half-spaces `normal · x <= offset`.
    pub fn from_halfspaces(dim: usize, halfspaces: &[Halfspace]) -> Result<Self> {
        let hs: Vec<Halfspace> = halfspaces
            .iter()
            .map(|h| {
                let nn = norm(&h.normal);
                Halfspace {
                    normal: h.normal.iter().map(|x| x / nn).collect(),
                    offset: h.offset / nn,
                }
            })
            .collect();
        if let Some(h) = hs.iter().find(|h| h.normal.len() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, found: h.normal.len() });
        }
        // bounded iff the normals positively span ℝⁿ, i.e. the origin is
        // interior to their convex hull
        let normals: Vec<Vec<f64>> = hs.iter().map(|h| h.normal.clone()).collect();
        match Polytope::from_vertices(dim, &normals) {
            Ok(p) if p.interior_contains(&vec![0.0; dim], 1e-12) => {}
            _ => return Err(Error::UnboundedDomain),
        }
        let scale = hs.iter().fold(1.0f64, |m, h| m.max(h.offset.abs()));
        let tol = TOL * scale;
        let mut verts: Vec<Vec<f64>> = Vec::new();
        combinations(hs.len(), dim, |idx| {
            let a = DMatrix::from_fn(dim, dim, |r, c| hs[idx[r]].normal[c]);
            let b = DVector::from_fn(dim, |r, _| hs[idx[r]].offset);
            if crate::linalg::det(&a).abs() < 1e-10 {
                return;
            }
            if let Some(x) = a.lu().solve(&b) {
                let x: Vec<f64> = x.iter().copied().collect();
                if hs.iter().all(|h| dot(&h.normal, &x) <= h.offset + tol) {
                    verts.push(x);
                }
            }
        });
        if verts.is_empty() {
            return Err(Error::EmptyDomain);
        }
        let p = Polytope::from_vertices(dim, &verts)?;
        // every hull facet must come from an input half-space, otherwise
        // the region extends beyond its vertices
        let closed = p.facets.iter().all(|f| {
            hs.iter().any(|h| {
                (h.offset - f.offset).abs() <= 1e-7 * scale
                    && h.normal.iter().zip(&f.normal).all(|(a, b)| (a - b).abs() <= 1e-7)
            })
        });
        if !closed {
            return Err(Error::UnboundedDomain);
        }
        Ok(p)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vertices(&self) -> &[Vec<f64>] {
        &self.vertices
    }

    pub fn facets(&self) -> &[Halfspace] {
        &self.facets
    }

    pub fn is_point(&self) -> bool {
        self.vertices.len() == 1
    }

    fn scale(&self) -> f64 {
        self.vertices
            .iter()
            .flat_map(|p| p.iter())
            .fold(1.0f64, |m, x| m.max(x.abs()))
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.contains_tol(x, TOL * self.scale())
    }

    pub fn contains_tol(&self, x: &[f64], tol: f64) -> bool {
        if self.is_point() {
            return self.vertices[0].iter().zip(x).all(|(a, b)| (a - b).abs() <= tol);
        }
        self.facets.iter().all(|f| dot(&f.normal, x) <= f.offset + tol)
    }

    /// Strict interior membership with margin `tol`.
    pub fn interior_contains(&self, x: &[f64], tol: f64) -> bool {
        !self.is_point() && self.facets.iter().all(|f| dot(&f.normal, x) < f.offset - tol)
    }

    /// `h_P(y) = max_{x ∈ P} ⟨x, y⟩`.
    pub fn support(&self, y: &[f64]) -> f64 {
        self.vertices
            .iter()
            .map(|v| dot(v, y))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn centroid(&self) -> Vec<f64> {
        let m = self.vertices.len() as f64;
        (0..self.dim)
            .map(|k| self.vertices.iter().map(|v| v[k]).sum::<f64>() / m)
            .collect()
    }

    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        let lo = (0..self.dim)
            .map(|k| self.vertices.iter().map(|v| v[k]).fold(f64::INFINITY, f64::min))
            .collect();
        let hi = (0..self.dim)
            .map(|k| self.vertices.iter().map(|v| v[k]).fold(f64::NEG_INFINITY, f64::max))
            .collect();
        (lo, hi)
    }

    /// Euclidean distance from `x` to the polytope (zero inside).
    pub fn distance(&self, x: &[f64]) -> f64 {
        if self.contains(x) {
            return 0.0;
        }
        if self.is_point() {
            return norm(&x.iter().zip(&self.vertices[0]).map(|(a, b)| a - b).collect::<Vec<_>>());
        }
        // project onto every face of every dimension: the nearest point lies
        // in the relative interior of some face, which is the affine
        // projection onto the intersection of its tight facets
        let mut best = f64::INFINITY;
        for v in &self.vertices {
            best = best.min(norm(&x.iter().zip(v).map(|(a, b)| a - b).collect::<Vec<_>>()));
        }
        for k in 1..self.dim {
            combinations(self.facets.len(), k, |idx| {
                let rows: Vec<Vec<f64>> = idx.iter().map(|&i| self.facets[i].normal.clone()).collect();
                let a = DMatrix::from_fn(k, self.dim, |r, c| rows[r][c]);
                let b = DVector::from_fn(k, |r, _| self.facets[idx[r]].offset);
                let xv = DVector::from_column_slice(x);
                let gram = &a * a.transpose();
                let lam = match gram.lu().solve(&(&a * &xv - &b)) {
                    Some(l) => l,
                    None => return,
                };
                let p = &xv - a.transpose() * lam;
                let p: Vec<f64> = p.iter().copied().collect();
                if self.contains_tol(&p, 1e-9 * self.scale()) {
                    let d = norm(&x.iter().zip(&p).map(|(a, b)| a - b).collect::<Vec<_>>());
                    best = best.min(d);
                }
            });
        }
        best
    }

    pub fn volume(&self) -> f64 {
        if self.is_point() {
            return 0.0;
        }
        if self.dim == 1 {
            let (lo, hi) = self.bounding_box();
            return hi[0] - lo[0];
        }
        let c = self.centroid();
        let tol = TOL * self.scale();
        let mut vol = 0.0;
        for f in &self.facets {
            let h = f.offset - dot(&f.normal, &c);
            let on: Vec<&Vec<f64>> = self
                .vertices
                .iter()
                .filter(|v| (dot(&f.normal, v) - f.offset).abs() <= tol)
                .collect();
            let basis = complement(std::slice::from_ref(&f.normal), self.dim);
            let projected: Vec<Vec<f64>> = on
                .iter()
                .map(|v| basis.iter().map(|b| dot(b, v)).collect())
                .collect();
            if let Ok(facet) = Polytope::from_vertices(self.dim - 1, &projected) {
                vol += h * facet.volume() / self.dim as f64;
            }
        }
        vol
    }

    pub fn translate(&self, shift: &[f64]) -> Polytope {
        Polytope {
            dim: self.dim,
            vertices: self
                .vertices
                .iter()
                .map(|v| v.iter().zip(shift).map(|(a, b)| a + b).collect())
                .collect(),
            facets: self
                .facets
                .iter()
                .map(|f| Halfspace { normal: f.normal.clone(), offset: f.offset + dot(&f.normal, shift) })
                .collect(),
        }
    }

    /// `λ P` for `λ > 0`.
    pub fn scale_by(&self, lambda: f64) -> Polytope {
        Polytope {
            dim: self.dim,
            vertices: self
                .vertices
                .iter()
                .map(|v| v.iter().map(|a| a * lambda).collect())
                .collect(),
            facets: self
                .facets
                .iter()
                .map(|f| Halfspace { normal: f.normal.clone(), offset: f.offset * lambda })
                .collect(),
        }
    }

    /// Image under an orthogonal matrix `rot` (row-major, `dim × dim`).
    pub fn rotate(&self, rot: &[Vec<f64>]) -> Polytope {
        let apply = |v: &[f64]| -> Vec<f64> { rot.iter().map(|row| dot(row, v)).collect() };
        Polytope {
            dim: self.dim,
            vertices: self.vertices.iter().map(|v| apply(v)).collect(),
            facets: self
                .facets
                .iter()
                .map(|f| Halfspace { normal: apply(&f.normal), offset: f.offset })
                .collect(),
        }
    }

    pub fn minkowski_sum(&self, other: &Polytope) -> Result<Polytope> {
        if other.dim != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: other.dim });
        }
        let mut pts = Vec::with_capacity(self.vertices.len() * other.vertices.len());
        for a in &self.vertices {
            for b in &other.vertices {
                pts.push(a.iter().zip(b).map(|(x, y)| x + y).collect());
            }
        }
        Polytope::from_vertices(self.dim, &pts)
    }

    /// Full-dimensional intersection, or `None` when the intersection has
    /// empty interior.
    pub fn intersect(&self, other: &Polytope) -> Option<Polytope> {
        self.clip(&other.facets)
    }

    /// Intersection with extra half-spaces; `None` if not full-dimensional.
    pub fn clip(&self, extra: &[Halfspace]) -> Option<Polytope> {
        if self.is_point() {
            return None;
        }
        let mut hs = self.facets.clone();
        hs.extend_from_slice(extra);
        let p = Polytope::from_halfspaces(self.dim, &hs).ok()?;
        if p.is_point() || p.volume() <= 1e-12 * self.volume().max(1e-300) {
            None
        } else {
            Some(p)
        }
    }

    /// Splits along `normal · x = offset` into the parts below and above.
    pub fn split(&self, normal: &[f64], offset: f64) -> (Option<Polytope>, Option<Polytope>) {
        let below = self.clip(&[Halfspace { normal: normal.to_vec(), offset }]);
        let above = self.clip(&[Halfspace { normal: normal.iter().map(|x| -x).collect(), offset: -offset }]);
        (below, above)
    }

    /// `self \ other` as interior-disjoint convex pieces.
    pub fn difference(&self, other: &Polytope) -> Vec<Polytope> {
        if self.intersect(other).is_none() {
            return vec![self.clone()];
        }
        let mut out = Vec::new();
        let mut rest = self.clone();
        for f in &other.facets {
            let (inside, outside) = rest.split(&f.normal, f.offset);
            if let Some(o) = outside {
                out.push(o);
            }
            match inside {
                Some(i) => rest = i,
                None => return out,
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square() -> Polytope {
        Polytope::from_box(&[0.0, 0.0], &[1.0, 1.0]).unwrap()
    }

    #[test]
    fn box_has_four_vertices_and_facets() {
        let s = square();
        assert_eq!(s.vertices().len(), 4);
        assert_eq!(s.facets().len(), 4);
        assert!((s.volume() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn hull_drops_interior_points() {
        let p = Polytope::from_vertices(
            2,
            &[vec![0.0, 0.0], vec![2.0, 0.0], vec![0.0, 2.0], vec![0.5, 0.5], vec![1.0, 0.0]],
        )
        .unwrap();
        assert_eq!(p.vertices().len(), 3);
        assert!((p.volume() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn cube_and_simplex_volumes() {
        let c = Polytope::from_box(&[-1.0, -1.0, -1.0], &[1.0, 1.0, 1.0]).unwrap();
        assert!((c.volume() - 8.0).abs() < 1e-10);
        let s = Polytope::from_vertices(
            3,
            &[vec![0.0; 3], vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]],
        )
        .unwrap();
        assert!((s.volume() - 1.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn unbounded_halfspaces_are_rejected() {
        let h = vec![
            Halfspace { normal: vec![-1.0, 0.0], offset: 0.0 },
            Halfspace { normal: vec![0.0, -1.0], offset: 0.0 },
            Halfspace { normal: vec![1.0, -1.0], offset: 1.0 },
        ];
        assert_eq!(Polytope::from_halfspaces(2, &h), Err(Error::UnboundedDomain));
    }

    #[test]
    fn split_and_difference_preserve_area() {
        let s = square();
        let (a, b) = s.split(&[1.0, 1.0], 1.0);
        assert!((a.unwrap().volume() + b.unwrap().volume() - 1.0).abs() < 1e-12);
        let inner = Polytope::from_box(&[0.25, 0.25], &[0.75, 0.75]).unwrap();
        let parts = s.difference(&inner);
        let area: f64 = parts.iter().map(|p| p.volume()).sum();
        assert!((area - 0.75).abs() < 1e-12);
    }

    #[test]
    fn distance_to_square() {
        let s = square();
        assert!((s.distance(&[2.0, 0.5]) - 1.0).abs() < 1e-12);
        assert!((s.distance(&[2.0, 2.0]) - 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(s.distance(&[0.5, 0.5]), 0.0);
        let c = Polytope::from_box(&[0.0; 3], &[1.0; 3]).unwrap();
        assert!((c.distance(&[2.0, 2.0, 0.5]) - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn json_round_trip() {
        let s = square();
        let txt = serde_json::to_string(&s).unwrap();
        let back: Polytope = serde_json::from_str(&txt).unwrap();
        assert!((back.volume() - 1.0).abs() < 1e-12);
        let h: Polytope = serde_json::from_str(
            r#"{"halfspaces":[{"normal":[1.0],"offset":2.0},{"normal":[-1.0],"offset":1.0}]}"#,
        )
        .unwrap();
        assert!((h.volume() - 3.0).abs() < 1e-12);
    }
}
