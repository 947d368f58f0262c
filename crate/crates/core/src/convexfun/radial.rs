//! Radial convex functions `u(x) = φ(|x|)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialProfile {
    pub dim: usize,
    pub shape: ProfileShape,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProfileShape {
    /// `φ(r) = c·r^p` on all of `[0, ∞)`; `p >= 1`.
    Power { c: f64, p: f64 },
    /// Natural cubic spline through `(r_i, v_i)` with `r_0 = 0`; `+∞` beyond
    /// the last abscissa.
    Sampled { r: Vec<f64>, values: Vec<f64> },
    /// `φ(r) = a + b·r + c·r²/2` on consecutive pieces separated by `knots`;
    /// `+∞` beyond `radius` when given.
    PiecewiseQuadratic {
        knots: Vec<f64>,
        coeffs: Vec<[f64; 3]>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        radius: Option<f64>,
    },
}

/// Second derivatives of the natural cubic spline through `(x, y)`.
fn spline_moments(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut m = vec![0.0; n];
    if n < 3 {
        return m;
    }
    // tridiagonal system for the interior moments
    let k = n - 2;
    let mut diag = vec![0.0; k];
    let mut upper = vec![0.0; k];
    let mut rhs = vec![0.0; k];
    for i in 1..n - 1 {
        let h0 = x[i] - x[i - 1];
        let h1 = x[i + 1] - x[i];
        diag[i - 1] = 2.0 * (h0 + h1);
        upper[i - 1] = h1;
        rhs[i - 1] = 6.0 * ((y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0);
    }
    for i in 1..k {
        let lower = x[i + 1] - x[i];
        let f = lower / diag[i - 1];
        diag[i] -= f * upper[i - 1];
        rhs[i] -= f * rhs[i - 1];
    }
    for i in (0..k).rev() {
        let next = if i + 1 < k { m[i + 2] } else { 0.0 };
        m[i + 1] = (rhs[i] - upper[i] * next) / diag[i];
    }
    m
}

impl RadialProfile {
    pub fn power(dim: usize, c: f64, p: f64) -> Self {
        RadialProfile { dim, shape: ProfileShape::Power { c, p } }
    }

    pub fn validate(&self) -> Result<()> {
        match &self.shape {
            ProfileShape::Power { c, p } => {
                if *c < 0.0 || *p < 1.0 {
                    return Err(Error::InvalidInput("power profile needs c >= 0, p >= 1".into()));
                }
            }
            ProfileShape::Sampled { r, values } => {
                if r.len() < 2 || r.len() != values.len() || r[0] != 0.0 {
                    return Err(Error::InvalidInput(
                        "sampled profile needs matching abscissae starting at 0".into(),
                    ));
                }
                if r.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::InvalidInput("profile abscissae must increase".into()));
                }
            }
            ProfileShape::PiecewiseQuadratic { knots, coeffs, .. } => {
                if coeffs.len() != knots.len() + 1 || knots.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::InvalidInput("piecewise profile needs pieces = knots + 1".into()));
                }
            }
        }
        Ok(())
    }

    /// Radius of the domain ball (`∞` when unbounded).
    pub fn radius(&self) -> f64 {
        match &self.shape {
            ProfileShape::Power { .. } => f64::INFINITY,
            ProfileShape::Sampled { r, .. } => *r.last().unwrap(),
            ProfileShape::PiecewiseQuadratic { radius, .. } => radius.unwrap_or(f64::INFINITY),
        }
    }

    /// Radii where the profile is only piecewise smooth.
    pub fn breakpoints(&self) -> Vec<f64> {
        match &self.shape {
            ProfileShape::Power { .. } => Vec::new(),
            ProfileShape::Sampled { r, .. } => r.clone(),
            ProfileShape::PiecewiseQuadratic { knots, .. } => knots.clone(),
        }
    }

    fn piece(knots: &[f64], r: f64) -> usize {
        knots.partition_point(|&k| k <= r)
    }

    /// `(φ, φ′, φ″)` at `r >= 0`.
    pub fn jet(&self, r: f64) -> (f64, f64, f64) {
        if r > self.radius() {
            return (f64::INFINITY, f64::NAN, f64::NAN);
        }
        match &self.shape {
            ProfileShape::Power { c, p } => {
                if r == 0.0 {
                    let d2 = if *p == 2.0 {
                        2.0 * c
                    } else if *p > 2.0 {
                        0.0
                    } else {
                        f64::INFINITY
                    };
                    let d1 = if *p > 1.0 { 0.0 } else { *c };
                    return (0.0, d1, d2);
                }
                (c * r.powf(*p), c * p * r.powf(p - 1.0), c * p * (p - 1.0) * r.powf(p - 2.0))
            }
            ProfileShape::Sampled { r: xs, values } => {
                let m = spline_moments(xs, values);
                let i = xs.partition_point(|&x| x <= r).clamp(1, xs.len() - 1) - 1;
                let h = xs[i + 1] - xs[i];
                let a = (xs[i + 1] - r) / h;
                let b = (r - xs[i]) / h;
                let v = a * values[i]
                    + b * values[i + 1]
                    + ((a * a * a - a) * m[i] + (b * b * b - b) * m[i + 1]) * h * h / 6.0;
                let d1 = (values[i + 1] - values[i]) / h
                    + ((1.0 - 3.0 * a * a) * m[i] + (3.0 * b * b - 1.0) * m[i + 1]) * h / 6.0;
                let d2 = a * m[i] + b * m[i + 1];
                (v, d1, d2)
            }
            ProfileShape::PiecewiseQuadratic { knots, coeffs, .. } => {
                let [a, b, c] = coeffs[Self::piece(knots, r)];
                (a + b * r + 0.5 * c * r * r, b + c * r, c)
            }
        }
    }

    pub fn phi(&self, r: f64) -> f64 {
        self.jet(r).0
    }

    /// Inverse of `φ′` on `[0, R)`, found by bisection; `φ′` is assumed
    /// non-decreasing. Returns `R` when `s` exceeds the slope range.
    pub fn inverse_slope(&self, s: f64) -> f64 {
        let mut hi = self.radius();
        if !hi.is_finite() {
            hi = 1.0;
            while self.jet(hi).1 < s {
                hi *= 2.0;
                if hi > 1e12 {
                    return f64::INFINITY;
                }
            }
        } else if self.jet(hi * (1.0 - 1e-14)).1 < s {
            return hi;
        }
        let mut lo = 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.jet(mid).1 < s {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-15 * hi.max(1e-300) {
                break;
            }
        }
        0.5 * (lo + hi)
    }

    /// `λ φ(r/λ)`, the profile of the epi-multiple.
    pub fn epi_scaled(&self, lambda: f64) -> RadialProfile {
        let shape = match &self.shape {
            ProfileShape::Power { c, p } => ProfileShape::Power { c: c * lambda.powf(1.0 - p), p: *p },
            ProfileShape::Sampled { r, values } => ProfileShape::Sampled {
                r: r.iter().map(|x| x * lambda).collect(),
                values: values.iter().map(|v| v * lambda).collect(),
            },
            ProfileShape::PiecewiseQuadratic { knots, coeffs, radius } => ProfileShape::PiecewiseQuadratic {
                knots: knots.iter().map(|k| k * lambda).collect(),
                coeffs: coeffs.iter().map(|[a, b, c]| [a * lambda, *b, c / lambda]).collect(),
                radius: radius.map(|r| r * lambda),
            },
        };
        RadialProfile { dim: self.dim, shape }
    }
}
