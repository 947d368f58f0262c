use serde::{Deserialize, Serialize};

use super::{ZetaProfile, ABS_TOL, REL_TOL};
use crate::error::{Error, Result};
use crate::quad::integrate_tol;

/// `∫_0^∞ ζ(√(r²+t²)) r^k dr`.
pub fn generalized_kernel(z: &ZetaProfile, k: u32, t: f64) -> f64 {
    let top = z.support();
    if t.abs() >= top {
        return 0.0;
    }
    let reach = (top * top - t * t).sqrt();
    let cuts: Vec<f64> = z
        .breakpoints()
        .into_iter()
        .filter(|b| *b > t.abs())
        .map(|b| (b * b - t * t).sqrt())
        .collect();
    integrate_tol(|r| z.eval((r * r + t * t).sqrt()) * r.powi(k as i32), 0.0, reach, &cuts, ABS_TOL, REL_TOL).value
}

/// `Aζ(t) = ∫_t^∞ s ζ(s) / √(s²−t²) ds`, computed after substituting
/// `s = √(u²+t²)`.
pub fn abel_forward(z: &ZetaProfile, t: f64) -> f64 {
    generalized_kernel(z, 0, t)
}

/// A sampled profile `ξ` on `[t₀, T]`, zero beyond `T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledXi {
    pub t: Vec<f64>,
    pub values: Vec<f64>,
}

impl SampledXi {
    pub fn new(t: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if t.len() < 3 || t.len() != values.len() {
            return Err(Error::InvalidInput("ξ needs at least three matching samples".into()));
        }
        if t[0] < 0.0 || t.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput("ξ abscissae must be non-negative and increasing".into()));
        }
        Ok(SampledXi { t, values })
    }

    /// Samples `Aζ` on `count` equispaced points of `[0, S]`.
    pub fn forward_of(z: &ZetaProfile, count: usize) -> Self {
        let top = z.support();
        let t: Vec<f64> = (0..count).map(|i| top * i as f64 / (count - 1) as f64).collect();
        let values = t.iter().map(|&x| abel_forward(z, x)).collect();
        SampledXi { t, values }
    }

    /// Node derivatives by central differences (second-order one-sided at
    /// the ends), after checking that ξ has no kinks.
    pub fn derivative(&self) -> Result<Vec<f64>> {
        let (t, v) = (&self.t, &self.values);
        let m = t.len();
        let slope: Vec<f64> = (0..m - 1).map(|i| (v[i + 1] - v[i]) / (t[i + 1] - t[i])).collect();
        let smax = slope.iter().fold(0.0f64, |a, s| a.max(s.abs())).max(1e-300);
        // ξ vanishes beyond T: a non-zero end value or end slope is a kink
        let h_end = t[m - 1] - t[m - 2];
        if v[m - 1].abs() > 1e-3 * smax * h_end.max(1e-3) || slope[m - 2].abs() > 0.05 * smax {
            return Err(Error::NonSmoothXi { at: t[m - 1] });
        }
        // a kink shows as a slope jump far above its neighbours
        let jumps: Vec<f64> = (1..m - 1).map(|i| (slope[i] - slope[i - 1]).abs()).collect();
        for i in 0..jumps.len() {
            let lo = i.saturating_sub(3);
            let hi = (i + 4).min(jumps.len());
            let neighbours = (lo..hi)
                .filter(|&k| k + 1 < i || k > i + 1)
                .map(|k| jumps[k])
                .fold(0.0, f64::max);
            if jumps[i] > 1e-3 * smax && jumps[i] > 8.0 * neighbours {
                return Err(Error::NonSmoothXi { at: t[i + 1] });
            }
        }
        let mut d = vec![0.0; m];
        for i in 1..m - 1 {
            let (h0, h1) = (t[i] - t[i - 1], t[i + 1] - t[i]);
            // exact for quadratics on uneven spacing
            d[i] = (h0 * h0 * (v[i + 1] - v[i]) + h1 * h1 * (v[i] - v[i - 1])) / (h0 * h1 * (h0 + h1));
        }
        let (h0, h1) = (t[1] - t[0], t[2] - t[1]);
        d[0] = -((2.0 * h0 + h1) / (h0 * (h0 + h1))) * v[0] + ((h0 + h1) / (h0 * h1)) * v[1]
            - (h0 / (h1 * (h0 + h1))) * v[2];
        let (h0, h1) = (t[m - 2] - t[m - 3], t[m - 1] - t[m - 2]);
        d[m - 1] = (h1 / (h0 * (h0 + h1))) * v[m - 3] - ((h0 + h1) / (h0 * h1)) * v[m - 2]
            + ((2.0 * h1 + h0) / (h1 * (h0 + h1))) * v[m - 1];
        Ok(d)
    }
}

fn interp(t: &[f64], v: &[f64], x: f64) -> f64 {
    if x <= t[0] {
        return v[0];
    }
    if x >= *t.last().unwrap() {
        return 0.0;
    }
    let k = t.partition_point(|a| *a <= x);
    let w = (x - t[k - 1]) / (t[k] - t[k - 1]);
    v[k - 1] * (1.0 - w) + v[k] * w
}

/// `ζ(s) = −(2/π) ∫_s^∞ ξ′(t) / √(t²−s²) dt` at each requested `s`, with
/// `t = √(u²+s²)` removing the endpoint singularity. When ξ is sampled from
/// `t = 0` it is taken to be even there, as every Abel transform is, so
/// `ξ′(0) = 0`.
pub fn abel_inverse(xi: &SampledXi, s: &[f64]) -> Result<Vec<f64>> {
    let mut d = xi.derivative()?;
    if xi.t[0] == 0.0 {
        d[0] = 0.0;
    }
    let top = *xi.t.last().unwrap();
    Ok(s.iter()
        .map(|&si| {
            if si >= top {
                return 0.0;
            }
            let reach = (top * top - si * si).sqrt();
            let cuts: Vec<f64> = xi
                .t
                .iter()
                .filter(|b| **b > si)
                .map(|b| (b * b - si * si).sqrt())
                .collect();
            let f = |u: f64| {
                let t = (u * u + si * si).sqrt();
                interp(&xi.t, &d, t) / t
            };
            -2.0 / std::f64::consts::PI * integrate_tol(f, 0.0, reach, &cuts, ABS_TOL, REL_TOL).value
        })
        .collect())
}
