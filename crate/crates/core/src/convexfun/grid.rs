//! Convex functions sampled on a rectangular grid. Values may be `+∞`;
//! the function is `+∞` outside the box.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridJson", into = "GridJson")]
pub struct Grid {
    lo: Vec<f64>,
    hi: Vec<f64>,
    shape: Vec<usize>,
    values: Vec<f64>,
}

/// A JSON number, or the string `"inf"` for `+∞`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ExtReal {
    Num(f64),
    Str(String),
}

impl ExtReal {
    pub fn from_f64(v: f64) -> Self {
        if v == f64::INFINITY {
            ExtReal::Str("inf".into())
        } else {
            ExtReal::Num(v)
        }
    }

    pub fn to_f64(&self) -> Result<f64> {
        match self {
            ExtReal::Num(v) => Ok(*v),
            ExtReal::Str(s) if s == "inf" || s == "+inf" => Ok(f64::INFINITY),
            ExtReal::Str(s) => Err(Error::Parse(format!("expected a number or \"inf\", got {s:?}"))),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct GridJson {
    #[serde(rename = "box")]
    bounds: Vec<[f64; 2]>,
    shape: Vec<usize>,
    values: Vec<ExtReal>,
}

impl TryFrom<GridJson> for Grid {
    type Error = Error;

    fn try_from(j: GridJson) -> Result<Self> {
        let values = j.values.iter().map(ExtReal::to_f64).collect::<Result<Vec<_>>>()?;
        Grid::new(
            j.bounds.iter().map(|b| b[0]).collect(),
            j.bounds.iter().map(|b| b[1]).collect(),
            j.shape,
            values,
        )
    }
}

impl From<Grid> for GridJson {
    fn from(g: Grid) -> Self {
        GridJson {
            bounds: g.lo.iter().zip(&g.hi).map(|(a, b)| [*a, *b]).collect(),
            shape: g.shape,
            values: g.values.iter().map(|v| ExtReal::from_f64(*v)).collect(),
        }
    }
}

impl Grid {
    /// Row-major values (last axis fastest) at the nodes
    /// `lo + i·(hi − lo)/(shape − 1)`. An axis of size 1 sits at `lo`.
    pub fn new(lo: Vec<f64>, hi: Vec<f64>, shape: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        let dim = lo.len();
        if dim == 0 || dim > 3 {
            return Err(Error::InvalidInput(format!("grid dimension must be 1..=3, got {dim}")));
        }
        if hi.len() != dim || shape.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: hi.len().min(shape.len()) });
        }
        for k in 0..dim {
            if shape[k] == 0 {
                return Err(Error::InvalidInput("grid axes need at least one node".into()));
            }
            if !(hi[k] > lo[k] || (shape[k] == 1 && hi[k] == lo[k])) {
                return Err(Error::InvalidInput(format!("bad grid bounds on axis {k}")));
            }
        }
        let len: usize = shape.iter().product();
        if values.len() != len {
            return Err(Error::DimensionMismatch { expected: len, found: values.len() });
        }
        if values.iter().any(|v| v.is_nan() || *v == f64::NEG_INFINITY) {
            return Err(Error::InvalidInput("grid values must be finite or +inf".into()));
        }
        Ok(Grid { lo, hi, shape, values })
    }

    /// Samples `f` at the nodes of the given box.
    pub fn sample<F>(lo: &[f64], hi: &[f64], shape: &[usize], f: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> f64 + Sync,
    {
        let skeleton = Grid {
            lo: lo.to_vec(),
            hi: hi.to_vec(),
            shape: shape.to_vec(),
            values: Vec::new(),
        };
        let len: usize = shape.iter().product();
        let values: Vec<f64> = (0..len)
            .into_par_iter()
            .map(|i| f(&skeleton.node(i)))
            .collect();
        Grid::new(lo.to_vec(), hi.to_vec(), shape.to_vec(), values)
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        if self.shape[axis] > 1 {
            (self.hi[axis] - self.lo[axis]) / (self.shape[axis] - 1) as f64
        } else {
            0.0
        }
    }

    /// Largest node spacing over all axes.
    pub fn max_spacing(&self) -> f64 {
        (0..self.dim()).map(|k| self.spacing(k)).fold(0.0, f64::max)
    }

    pub fn strides(&self) -> Vec<usize> {
        let mut s = vec![1; self.dim()];
        for k in (0..self.dim().saturating_sub(1)).rev() {
            s[k] = s[k + 1] * self.shape[k + 1];
        }
        s
    }

    pub fn unravel(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim()];
        for k in (0..self.dim()).rev() {
            idx[k] = flat % self.shape[k];
            flat /= self.shape[k];
        }
        idx
    }

    pub fn ravel(&self, idx: &[usize]) -> usize {
        idx.iter().zip(self.strides()).map(|(i, s)| i * s).sum()
    }

    pub fn coord(&self, axis: usize, i: usize) -> f64 {
        self.lo[axis] + i as f64 * self.spacing(axis)
    }

    pub fn node(&self, flat: usize) -> Vec<f64> {
        self.unravel(flat)
            .iter()
            .enumerate()
            .map(|(k, &i)| self.coord(k, i))
            .collect()
    }

    pub fn value_at(&self, idx: &[usize]) -> f64 {
        self.values[self.ravel(idx)]
    }

    pub fn with_values(&self, values: Vec<f64>) -> Result<Grid> {
        Grid::new(self.lo.clone(), self.hi.clone(), self.shape.clone(), values)
    }

    pub fn same_layout(&self, other: &Grid) -> bool {
        self.shape == other.shape
            && self.lo.iter().zip(&other.lo).all(|(a, b)| (a - b).abs() <= 1e-12 * (1.0 + a.abs()))
            && self.hi.iter().zip(&other.hi).all(|(a, b)| (a - b).abs() <= 1e-12 * (1.0 + a.abs()))
    }

    /// Multilinear interpolation; `+∞` outside the box or whenever a corner
    /// carrying positive weight is `+∞`.
    pub fn evaluate(&self, x: &[f64]) -> f64 {
        let dim = self.dim();
        let mut base = vec![0usize; dim];
        let mut frac = vec![0.0; dim];
        for k in 0..dim {
            let h = self.spacing(k);
            let tol = 1e-12 * (1.0 + self.lo[k].abs() + self.hi[k].abs());
            if x[k] < self.lo[k] - tol || x[k] > self.hi[k] + tol {
                return f64::INFINITY;
            }
            if h == 0.0 {
                continue;
            }
            let s = ((x[k] - self.lo[k]) / h).clamp(0.0, (self.shape[k] - 1) as f64);
            let i = (s.floor() as usize).min(self.shape[k].saturating_sub(2));
            base[k] = i;
            frac[k] = s - i as f64;
        }
        let mut total = 0.0;
        for corner in 0..(1usize << dim) {
            let mut w = 1.0;
            let mut idx = base.clone();
            for k in 0..dim {
                if self.shape[k] == 1 {
                    continue;
                }
                if corner >> k & 1 == 1 {
                    idx[k] += 1;
                    w *= frac[k];
                } else {
                    w *= 1.0 - frac[k];
                }
            }
            if w == 0.0 {
                continue;
            }
            let v = self.value_at(&idx);
            if v == f64::INFINITY {
                return f64::INFINITY;
            }
            total += w * v;
        }
        total
    }

    /// Scale of the finite values, used by the convexity tolerance.
    pub fn value_scale(&self) -> f64 {
        self.values
            .iter()
            .filter(|v| v.is_finite())
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Largest violation of the discrete midpoint inequality
    /// `2u(x) <= u(x−d) + u(x+d)` over axis and diagonal steps `d`,
    /// including domain violations (a `+∞` midpoint between finite ends).
    pub fn convexity_violation(&self) -> f64 {
        let dim = self.dim();
        let mut dirs: Vec<Vec<i64>> = Vec::new();
        for a in 0..dim {
            let mut d = vec![0; dim];
            d[a] = 1;
            dirs.push(d);
            for b in a + 1..dim {
                for sb in [1, -1] {
                    let mut d = vec![0; dim];
                    d[a] = 1;
                    d[b] = sb;
                    dirs.push(d);
                }
            }
        }
        (0..self.len())
            .into_par_iter()
            .map(|flat| {
                let idx = self.unravel(flat);
                let mid = self.values[flat];
                let mut worst: f64 = 0.0;
                for d in &dirs {
                    let mut lo = Vec::with_capacity(dim);
                    let mut hi = Vec::with_capacity(dim);
                    let mut inside = true;
                    for k in 0..dim {
                        let l = idx[k] as i64 - d[k];
                        let h = idx[k] as i64 + d[k];
                        if l < 0 || h < 0 || l >= self.shape[k] as i64 || h >= self.shape[k] as i64 {
                            inside = false;
                            break;
                        }
                        lo.push(l as usize);
                        hi.push(h as usize);
                    }
                    if !inside {
                        continue;
                    }
                    let (a, b) = (self.value_at(&lo), self.value_at(&hi));
                    if a == f64::INFINITY || b == f64::INFINITY {
                        continue;
                    }
                    if mid == f64::INFINITY {
                        return f64::INFINITY;
                    }
                    worst = worst.max(2.0 * mid - a - b);
                }
                worst
            })
            .reduce(|| 0.0, f64::max)
    }

    /// Convexity tolerance `1e−9 + 1e−6·scale`.
    pub fn convexity_tolerance(&self) -> f64 {
        1e-9 + 1e-6 * self.value_scale()
    }

    pub fn is_convex(&self) -> bool {
        self.convexity_violation() <= self.convexity_tolerance()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn paraboloid(shape: usize) -> Grid {
        Grid::sample(&[-2.0, -2.0], &[2.0, 2.0], &[shape, shape], |x| {
            0.5 * (x[0] * x[0] + x[1] * x[1])
        })
        .unwrap()
    }

    #[test]
    fn nodes_and_interpolation() {
        let g = paraboloid(5);
        assert_eq!(g.node(0), vec![-2.0, -2.0]);
        assert_eq!(g.node(g.len() - 1), vec![2.0, 2.0]);
        assert_eq!(g.evaluate(&[1.0, 0.0]), 0.5);
        assert_eq!(g.evaluate(&[2.5, 0.0]), f64::INFINITY);
        // linear interpolation of x²/2 between 0 and 1
        assert!((g.evaluate(&[0.5, 0.0]) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn infinite_corner_poisons_interpolation() {
        let mut v = vec![0.0; 4];
        v[3] = f64::INFINITY;
        let g = Grid::new(vec![0.0, 0.0], vec![1.0, 1.0], vec![2, 2], v).unwrap();
        assert_eq!(g.evaluate(&[0.5, 0.5]), f64::INFINITY);
        assert_eq!(g.evaluate(&[0.0, 0.5]), 0.0);
    }

    #[test]
    fn convexity_detects_planted_bump() {
        let g = paraboloid(21);
        assert!(g.is_convex());
        let mut v = g.values().to_vec();
        let centre = g.ravel(&[10, 10]);
        v[centre] += 0.5;
        assert!(!g.with_values(v).unwrap().is_convex());
    }

    #[test]
    fn convexity_detects_nonconvex_domain() {
        let g = Grid::sample(&[-1.0], &[1.0], &[5], |x| if x[0].abs() < 0.1 { f64::INFINITY } else { 0.0 })
            .unwrap();
        assert!(!g.is_convex());
    }

    #[test]
    fn json_encodes_infinity_as_string() {
        let g = Grid::new(vec![0.0], vec![1.0], vec![2], vec![0.0, f64::INFINITY]).unwrap();
        let s = serde_json::to_string(&g).unwrap();
        assert!(s.contains("\"inf\""));
        let back: Grid = serde_json::from_str(&s).unwrap();
        assert_eq!(back, g);
    }
}
