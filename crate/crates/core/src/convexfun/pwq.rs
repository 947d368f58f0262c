//! Piecewise quadratic functions of one variable, closed under pointwise
//! max and min.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `u(x) = a + b·x + c·x²/2` on each piece; `pieces.len() == knots.len() + 1`
/// and the pieces cover the whole line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseQuadratic {
    pub knots: Vec<f64>,
    pub pieces: Vec<[f64; 3]>,
}

fn eval(p: &[f64; 3], x: f64) -> f64 {
    p[0] + p[1] * x + 0.5 * p[2] * x * x
}

fn slope(p: &[f64; 3], x: f64) -> f64 {
    p[1] + p[2] * x
}

/// Real roots of `a + b x + c x²/2` in the open interval `(lo, hi)`.
fn roots_in(p: [f64; 3], lo: f64, hi: f64) -> Vec<f64> {
    let [a, b, c] = p;
    let scale = a.abs() + b.abs() + c.abs();
    let mut out = Vec::new();
    if c.abs() <= 1e-14 * scale {
        if b.abs() > 1e-14 * scale {
            out.push(-a / b);
        }
    } else {
        let qa = 0.5 * c;
        let disc = b * b - 4.0 * qa * a;
        if disc >= 0.0 {
            let sq = disc.sqrt();
            let q = -0.5 * (b + b.signum() * sq);
            if q != 0.0 {
                out.push(q / qa);
                out.push(a / q);
            } else {
                out.push(0.0);
            }
        }
    }
    out.retain(|&x| x > lo && x < hi);
    out.sort_by(|a, b| a.partial_cmp(b).unwrap());
    out
}

impl PiecewiseQuadratic {
    pub fn new(knots: Vec<f64>, pieces: Vec<[f64; 3]>) -> Result<Self> {
        if pieces.len() != knots.len() + 1 {
            return Err(Error::InvalidInput("need one more piece than knots".into()));
        }
        if knots.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput("knots must increase".into()));
        }
        let f = PiecewiseQuadratic { knots, pieces };
        for (i, &k) in f.knots.iter().enumerate() {
            let (l, r) = (eval(&f.pieces[i], k), eval(&f.pieces[i + 1], k));
            if (l - r).abs() > 1e-9 * (1.0 + l.abs()) {
                return Err(Error::InvalidInput(format!("discontinuity at knot {k}")));
            }
        }
        Ok(f)
    }

    /// The single quadratic `a + b x + c x²/2`.
    pub fn quadratic(a: f64, b: f64, c: f64) -> Self {
        PiecewiseQuadratic { knots: Vec::new(), pieces: vec![[a, b, c]] }
    }

    fn piece_index(&self, x: f64) -> usize {
        self.knots.partition_point(|&k| k <= x)
    }

    pub fn evaluate(&self, x: f64) -> f64 {
        eval(&self.pieces[self.piece_index(x)], x)
    }

    /// `(u′(x⁻), u′(x⁺))`.
    pub fn one_sided_slopes(&self, x: f64) -> (f64, f64) {
        let right = self.piece_index(x);
        let left = self.knots.partition_point(|&k| k < x);
        (slope(&self.pieces[left], x), slope(&self.pieces[right], x))
    }

    pub fn derivative(&self, x: f64) -> Result<f64> {
        let (l, r) = self.one_sided_slopes(x);
        if (l - r).abs() > 1e-12 * (1.0 + l.abs()) {
            return Err(Error::NotDifferentiable(format!("slope jumps at x = {x}")));
        }
        Ok(r)
    }

    pub fn second_derivative(&self, x: f64) -> Result<f64> {
        self.derivative(x)?;
        let right = self.piece_index(x);
        let left = self.knots.partition_point(|&k| k < x);
        if (self.pieces[left][2] - self.pieces[right][2]).abs() > 1e-12 {
            return Err(Error::NotDifferentiable(format!("curvature jumps at x = {x}")));
        }
        Ok(self.pieces[right][2])
    }

    /// Largest violation of convexity: negative curvature or a downward
    /// slope jump.
    pub fn convexity_violation(&self) -> f64 {
        let mut worst = self.pieces.iter().map(|p| -p[2]).fold(0.0, f64::max);
        for &k in &self.knots {
            let (l, r) = self.one_sided_slopes(k);
            worst = worst.max(l - r);
        }
        worst
    }

    pub fn is_convex(&self) -> bool {
        self.convexity_violation() <= 1e-9
    }

    /// Pointwise max (`take_max`) or min, with knots refined at crossings.
    pub fn lattice(&self, other: &Self, take_max: bool) -> Self {
        let mut cuts: Vec<f64> = self.knots.iter().chain(&other.knots).copied().collect();
        cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        cuts.dedup();
        let mut bounds = vec![f64::NEG_INFINITY];
        bounds.extend(&cuts);
        bounds.push(f64::INFINITY);

        let mut knots = Vec::new();
        let mut pieces: Vec<[f64; 3]> = Vec::new();
        for w in bounds.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            let probe = if lo.is_finite() && hi.is_finite() {
                0.5 * (lo + hi)
            } else if lo.is_finite() {
                lo + 1.0
            } else if hi.is_finite() {
                hi - 1.0
            } else {
                0.0
            };
            let p = self.pieces[self.piece_index(probe)];
            let q = other.pieces[other.piece_index(probe)];
            let diff = [p[0] - q[0], p[1] - q[1], p[2] - q[2]];
            let mut sub = vec![lo];
            sub.extend(roots_in(diff, lo, hi));
            sub.push(hi);
            for s in sub.windows(2) {
                let mid = match (s[0].is_finite(), s[1].is_finite()) {
                    (true, true) => 0.5 * (s[0] + s[1]),
                    (true, false) => s[0] + 1.0,
                    (false, true) => s[1] - 1.0,
                    (false, false) => 0.0,
                };
                let p_wins = (eval(&p, mid) >= eval(&q, mid)) == take_max;
                let chosen = if p_wins { p } else { q };
                match pieces.last() {
                    Some(last) if *last == chosen => {}
                    Some(_) => {
                        knots.push(s[0]);
                        pieces.push(chosen);
                    }
                    None => pieces.push(chosen),
                }
            }
        }
        PiecewiseQuadratic { knots, pieces }
    }

    /// `λ u(x/λ)`.
    pub fn epi_scaled(&self, lambda: f64) -> Self {
        PiecewiseQuadratic {
            knots: self.knots.iter().map(|k| k * lambda).collect(),
            pieces: self.pieces.iter().map(|[a, b, c]| [a * lambda, *b, c / lambda]).collect(),
        }
    }

    /// `u(x − x0) + α`.
    pub fn translated(&self, x0: f64, alpha: f64) -> Self {
        PiecewiseQuadratic {
            knots: self.knots.iter().map(|k| k + x0).collect(),
            pieces: self
                .pieces
                .iter()
                .map(|&[a, b, c]| [a - b * x0 + 0.5 * c * x0 * x0 + alpha, b - c * x0, c])
                .collect(),
        }
    }

    /// `u(−x)`.
    pub fn reflected(&self) -> Self {
        let mut knots: Vec<f64> = self.knots.iter().map(|k| -k).collect();
        knots.reverse();
        let mut pieces: Vec<[f64; 3]> = self.pieces.iter().map(|&[a, b, c]| [a, -b, c]).collect();
        pieces.reverse();
        PiecewiseQuadratic { knots, pieces }
    }
}
