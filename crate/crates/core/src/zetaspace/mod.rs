//! Radial densities ζ on (0, ∞): the tail integrals η and ρ, truncations
//! ζ_r, class certification, the Abel transform pair and the recovery of ζ
//! from values on the cone family.

mod abel;
mod io;
mod recover;

pub use abel::{abel_forward, abel_inverse, generalized_kernel, SampledXi};
pub use io::{read_profile_csv, write_profile_csv, ProfileCsv};
pub use recover::{integration_by_parts_residual, recover_zeta_from_cone_values, synthesize_cone_values, Recovery};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::{int_power_linear, integrate_tol};

const ABS_TOL: f64 = 1e-12;
const REL_TOL: f64 = 1e-10;

/// Points at which limits `t → 0⁺` are probed.
pub const REFINEMENT: [f64; 4] = [1e-1, 1e-2, 1e-3, 1e-4];
/// Acceptable drift over the refinement sequence.
pub const CLASS_TOL: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ZetaShape {
    /// Piecewise linear through the samples, constant below the first
    /// abscissa and zero beyond the last one.
    Sampled { s: Vec<f64>, values: Vec<f64> },
    /// `max(0, 1 − s/width)`.
    Hat { width: f64 },
    /// `e^{−s²}` on `(0, cutoff]`.
    Gaussian { cutoff: f64 },
    /// `(1 − ((s−center)/half_width)²)²` on the support, a C¹ bump.
    Bump { center: f64, half_width: f64 },
    /// 1 on `[a, b]` with C¹ smoothstep ramps of width `ramp` on each side.
    SmoothedIndicator { a: f64, b: f64, ramp: f64 },
    /// `s^{−exponent}(1 − s/support)` on `(0, support]`.
    SingularPower { exponent: f64, support: f64 },
    /// `ζ(max(s, r))`.
    Truncated { base: Box<ZetaProfile>, r: f64 },
    /// `Σ cᵢ ζᵢ`.
    Combination { terms: Vec<(f64, ZetaProfile)> },
}

/// A radial density with bounded support and an optional `Had_j^n` tag
/// stored as `[j, n]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZetaProfile {
    #[serde(flatten)]
    pub shape: ZetaShape,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class: Option<[usize; 2]>,
}

fn smoothstep(x: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    x * x * (3.0 - 2.0 * x)
}

impl ZetaProfile {
    pub fn new(shape: ZetaShape) -> Result<Self> {
        let z = ZetaProfile { shape, class: None };
        z.validate()?;
        Ok(z)
    }

    pub fn with_class(mut self, j: usize, n: usize) -> Self {
        self.class = Some([j, n]);
        self
    }

    pub fn sampled(s: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        Self::new(ZetaShape::Sampled { s, values })
    }

    pub fn hat(width: f64) -> Self {
        ZetaProfile { shape: ZetaShape::Hat { width }, class: None }
    }

    pub fn zero() -> Self {
        ZetaProfile { shape: ZetaShape::Combination { terms: vec![] }, class: None }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidInput(m.to_string()));
        match &self.shape {
            ZetaShape::Sampled { s, values } => {
                if s.is_empty() || s.len() != values.len() {
                    return bad("sampled profile needs matching, non-empty s and values");
                }
                if s[0] < 0.0 || s.windows(2).any(|w| w[1] <= w[0]) {
                    return bad("abscissae must be non-negative and strictly increasing");
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return bad("profile values must be finite");
                }
                if values.last().unwrap().abs() > 1e-12 {
                    return bad("a continuous profile must vanish at its last abscissa");
                }
            }
            ZetaShape::Hat { width } if !(*width > 0.0) => return bad("hat width must be positive"),
            ZetaShape::Gaussian { cutoff } if !(*cutoff > 0.0) => return bad("cutoff must be positive"),
            ZetaShape::Bump { center, half_width } if !(*half_width > 0.0 && center - half_width >= 0.0) => {
                return bad("bump must have positive width and lie in [0, ∞)")
            }
            ZetaShape::SmoothedIndicator { a, b, ramp } if !(*ramp > 0.0 && a - ramp >= 0.0 && b >= a) => {
                return bad("smoothed indicator needs 0 ≤ a − ramp and a ≤ b")
            }
            ZetaShape::SingularPower { support, .. } if !(*support > 0.0) => return bad("support must be positive"),
            ZetaShape::Truncated { base, r } => {
                if !(*r > 0.0) {
                    return bad("truncation radius must be positive");
                }
                base.validate()?;
            }
            ZetaShape::Combination { terms } => {
                for (_, z) in terms {
                    z.validate()?;
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// `ζ(s)` for `s > 0`.
    pub fn eval(&self, s: f64) -> f64 {
        if s > self.support() {
            return 0.0;
        }
        match &self.shape {
            ZetaShape::Sampled { s: xs, values } => {
                if s <= xs[0] {
                    return values[0];
                }
                let k = xs.partition_point(|x| *x <= s).min(xs.len() - 1);
                let (x0, x1) = (xs[k - 1], xs[k]);
                let w = (s - x0) / (x1 - x0);
                values[k - 1] * (1.0 - w) + values[k] * w
            }
            ZetaShape::Hat { width } => (1.0 - s / width).max(0.0),
            ZetaShape::Gaussian { .. } => (-s * s).exp(),
            ZetaShape::Bump { center, half_width } => {
                let x = (s - center) / half_width;
                if x.abs() >= 1.0 {
                    0.0
                } else {
                    (1.0 - x * x).powi(2)
                }
            }
            ZetaShape::SmoothedIndicator { a, b, ramp } => {
                if s < *a {
                    smoothstep((s - (a - ramp)) / ramp)
                } else if s <= *b {
                    1.0
                } else {
                    smoothstep((b + ramp - s) / ramp)
                }
            }
            ZetaShape::SingularPower { exponent, support } => s.powf(-exponent) * (1.0 - s / support),
            ZetaShape::Truncated { base, r } => base.eval(s.max(*r)),
            ZetaShape::Combination { terms } => terms.iter().map(|(c, z)| c * z.eval(s)).sum(),
        }
    }

    /// `S` with `ζ ≡ 0` on `(S, ∞)`.
    pub fn support(&self) -> f64 {
        match &self.shape {
            ZetaShape::Sampled { s, .. } => *s.last().unwrap(),
            ZetaShape::Hat { width } => *width,
            ZetaShape::Gaussian { cutoff } => *cutoff,
            ZetaShape::Bump { center, half_width } => center + half_width,
            ZetaShape::SmoothedIndicator { b, ramp, .. } => b + ramp,
            ZetaShape::SingularPower { support, .. } => *support,
            ZetaShape::Truncated { base, r } => {
                let s = base.support();
                if *r >= s {
                    0.0
                } else {
                    s
                }
            }
            ZetaShape::Combination { terms } => terms.iter().map(|(_, z)| z.support()).fold(0.0, f64::max),
        }
    }

    /// Abscissae where ζ may fail to be smooth.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut b = match &self.shape {
            ZetaShape::Sampled { s, .. } => s.clone(),
            ZetaShape::Hat { width } => vec![*width],
            ZetaShape::Gaussian { cutoff } => vec![*cutoff],
            ZetaShape::Bump { center, half_width } => vec![center - half_width, *center, center + half_width],
            ZetaShape::SmoothedIndicator { a, b, ramp } => vec![a - ramp, *a, *b, b + ramp],
            ZetaShape::SingularPower { support, .. } => vec![1e-8, 1e-6, 1e-4, 1e-2, *support],
            ZetaShape::Truncated { base, r } => {
                let mut b = base.breakpoints();
                b.push(*r);
                b
            }
            ZetaShape::Combination { terms } => terms.iter().flat_map(|(_, z)| z.breakpoints()).collect(),
        };
        b.retain(|x| *x > 0.0);
        b.sort_by(|x, y| x.partial_cmp(y).unwrap());
        b.dedup();
        b
    }

    /// `∫_t^∞ s^p ζ(s) ds` for `p > −1`, exact on sampled profiles.
    pub fn moment(&self, p: i32, t: f64) -> f64 {
        let top = self.support();
        if t >= top {
            return 0.0;
        }
        match &self.shape {
            ZetaShape::Sampled { s, values } => {
                let mut total = 0.0;
                if t < s[0] {
                    total += values[0] * crate::quad::int_power(t, s[0], p);
                }
                for k in 0..s.len() - 1 {
                    let (a, b) = (s[k].max(t), s[k + 1]);
                    if b <= a {
                        continue;
                    }
                    let beta = (values[k + 1] - values[k]) / (s[k + 1] - s[k]);
                    let alpha = values[k] - beta * s[k];
                    total += int_power_linear(a, b, alpha, beta, p);
                }
                total
            }
            ZetaShape::Combination { terms } => terms.iter().map(|(c, z)| c * z.moment(p, t)).sum(),
            _ => {
                integrate_tol(|s| s.powi(p) * self.eval(s), t, top, &self.breakpoints(), ABS_TOL, REL_TOL).value
            }
        }
    }

    pub fn truncate(&self, r: f64) -> ZetaProfile {
        ZetaProfile { shape: ZetaShape::Truncated { base: Box::new(self.clone()), r }, class: self.class }
    }

    /// Largest `|ζ|` over the sampled refinement and the breakpoints.
    pub fn scale(&self) -> f64 {
        let top = self.support();
        let mut pts: Vec<f64> = self.breakpoints();
        pts.extend((1..=200).map(|k| top * k as f64 / 200.0));
        pts.extend(REFINEMENT);
        pts.iter().map(|&s| self.eval(s).abs()).fold(0.0, f64::max)
    }
}

fn check_index(j: usize, n: usize) -> Result<()> {
    if j == 0 || j >= n {
        return Err(Error::IndexOutOfRange { index: j, max: n.saturating_sub(1) });
    }
    Ok(())
}

/// `η(t) = ∫_t^∞ s^{n−j−1} ζ(s) ds`; at `t = 0` the limit is certified
/// along the refinement sequence first.
pub fn eta(z: &ZetaProfile, j: usize, n: usize, t: f64) -> Result<f64> {
    check_index(j, n)?;
    if t < 0.0 {
        return Err(Error::InvalidInput(format!("η needs t ≥ 0, got {t}")));
    }
    if t == 0.0 {
        certify_tail(z, j, n)?;
    }
    Ok(z.moment((n - j - 1) as i32, t))
}

/// `ρ(t) = t^{n−j} ζ(t) + (n−j) η(t)`, with `ρ(0) = (n−j) η(0)`.
pub fn rho(z: &ZetaProfile, j: usize, n: usize, t: f64) -> Result<f64> {
    let e = eta(z, j, n, t)?;
    let k = (n - j) as i32;
    if t == 0.0 {
        certify_vanishing(z, j, n)?;
        return Ok(k as f64 * e);
    }
    Ok(t.powi(k) * z.eval(t) + k as f64 * e)
}

/// `η_r` in closed form from η and ζ(r).
pub fn eta_r(z: &ZetaProfile, j: usize, n: usize, r: f64, t: f64) -> Result<f64> {
    if t >= r {
        return eta(z, j, n, t);
    }
    let k = (n - j) as i32;
    Ok(eta(z, j, n, r)? + z.eval(r) * (r.powi(k) - t.powi(k)) / k as f64)
}

/// `ρ_r(t) = ρ(r)` below `r`, `ρ(t)` above.
pub fn rho_r(z: &ZetaProfile, j: usize, n: usize, r: f64, t: f64) -> Result<f64> {
    rho(z, j, n, t.max(r))
}

/// Both sides of the sup bounds for `η_r` and `ρ_r` on `[0, δ]`, sampled on
/// 401 points: `(max|η_r|, |η(r)| + 2/(n−j)|r^{n−j}ζ(r)| + max|η|,
/// max|ρ_r|, |ρ(r)| + max|ρ|)`.
pub fn truncation_bounds(z: &ZetaProfile, j: usize, n: usize, r: f64, delta: f64) -> Result<[f64; 4]> {
    check_index(j, n)?;
    let k = (n - j) as i32;
    let mut m = [0.0f64; 4];
    for i in 0..=400 {
        let t = delta * i as f64 / 400.0;
        m[0] = m[0].max(eta_r(z, j, n, r, t)?.abs());
        m[1] = m[1].max(eta(z, j, n, t)?.abs());
        m[2] = m[2].max(rho_r(z, j, n, r, t)?.abs());
        m[3] = m[3].max(rho(z, j, n, t)?.abs());
    }
    let er = eta(z, j, n, r)?.abs() + 2.0 / k as f64 * (r.powi(k) * z.eval(r)).abs();
    let rr = rho(z, j, n, r)?.abs();
    Ok([m[0], er + m[1], m[2], rr + m[3]])
}

/// A refinement sequence tends to zero if it is already below `tol` or
/// keeps shrinking by a fixed factor per decade.
pub(crate) fn settles(seq: &[f64], tol: f64) -> bool {
    let last = *seq.last().unwrap();
    last.is_finite() && (last <= tol || seq.windows(2).all(|w| w[1] <= 0.9 * w[0]))
}

fn certify_vanishing(z: &ZetaProfile, j: usize, n: usize) -> Result<()> {
    let k = (n - j) as i32;
    let scale = z.scale().max(1.0);
    let seq: Vec<f64> = REFINEMENT.iter().map(|&s| (s.powi(k) * z.eval(s)).abs()).collect();
    if !settles(&seq, CLASS_TOL * scale) {
        return Err(Error::ClassViolation(format!("s^{k} ζ(s) does not vanish as s → 0 ({seq:.3?})")));
    }
    Ok(())
}

fn certify_tail(z: &ZetaProfile, j: usize, n: usize) -> Result<()> {
    let p = (n - j - 1) as i32;
    let vals: Vec<f64> = REFINEMENT.iter().map(|&s| z.moment(p, s)).collect();
    let steps: Vec<f64> = vals.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    if !settles(&steps, CLASS_TOL * vals[3].abs().max(1.0)) {
        return Err(Error::ClassViolation(format!(
            "∫_t^∞ s^{p} ζ(s) ds does not settle as t → 0 (steps {steps:.3?})"
        )));
    }
    Ok(())
}

/// Numerical `Had_j^n` membership on the refinement sequence.
pub fn certify_class(z: &ZetaProfile, j: usize, n: usize) -> Result<()> {
    check_index(j, n)?;
    certify_vanishing(z, j, n)?;
    certify_tail(z, j, n)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bump() -> ZetaProfile {
        ZetaProfile::new(ZetaShape::Bump { center: 0.5, half_width: 0.4 }).unwrap()
    }

    #[test]
    fn hat_eta_rho_match_antiderivatives() {
        let z = ZetaProfile::hat(1.0);
        // η(t) = (1−t)²/2, ρ(t) = t(1−t) + (1−t)²/2
        assert!((eta(&z, 1, 2, 0.5).unwrap() - 0.125).abs() < 1e-14);
        assert!((rho(&z, 1, 2, 0.5).unwrap() - 0.375).abs() < 1e-14);
        for t in [0.0, 0.1, 0.33, 0.8] {
            let e = (1.0 - t) * (1.0 - t) / 2.0;
            assert!((eta(&z, 1, 2, t).unwrap() - e).abs() < 1e-13);
            assert!((rho(&z, 1, 2, t).unwrap() - (t * (1.0 - t) + e)).abs() < 1e-13);
        }
        assert_eq!(rho(&z, 1, 2, 0.0).unwrap(), eta(&z, 1, 2, 0.0).unwrap());
    }

    #[test]
    fn sampled_and_closed_form_agree() {
        let s: Vec<f64> = (0..=10).map(|k| k as f64 / 10.0).collect();
        let v: Vec<f64> = s.iter().map(|x| 1.0 - x).collect();
        let sz = ZetaProfile::sampled(s, v).unwrap();
        let hz = ZetaProfile::hat(1.0);
        for t in [0.0, 0.25, 0.75] {
            for (j, n) in [(1, 2), (1, 3), (2, 3)] {
                let a = rho(&sz, j, n, t).unwrap();
                let b = rho(&hz, j, n, t).unwrap();
                assert!((a - b).abs() < 1e-12, "{j} {n} {t}");
            }
        }
    }

    #[test]
    fn beyond_support_everything_vanishes() {
        let z = bump();
        assert_eq!(eta(&z, 1, 3, 0.95).unwrap(), 0.0);
        assert_eq!(rho(&z, 2, 3, 2.0).unwrap(), 0.0);
    }

    #[test]
    fn index_range_is_enforced() {
        let z = bump();
        assert!(matches!(eta(&z, 0, 2, 0.1), Err(Error::IndexOutOfRange { .. })));
        assert!(matches!(rho(&z, 2, 2, 0.1), Err(Error::IndexOutOfRange { .. })));
    }

    #[test]
    fn singular_profiles_are_classified() {
        // s^{-1/2}: in Had_1^3 (n−j = 2), outside Had_2^3 only in the limit
        // sense checked here, and out of Had_1^2 when the power is 1.5
        let z = ZetaProfile::new(ZetaShape::SingularPower { exponent: 0.5, support: 1.0 }).unwrap();
        assert!(certify_class(&z, 1, 3).is_ok());
        let bad = ZetaProfile::new(ZetaShape::SingularPower { exponent: 1.5, support: 1.0 }).unwrap();
        assert!(matches!(certify_class(&bad, 1, 2), Err(Error::ClassViolation(_))));
        assert!(matches!(rho(&bad, 1, 2, 0.0), Err(Error::ClassViolation(_))));
        // η(0) for s^{-1/2}(1−s), n−j−1 = 1: ∫ s^{1/2} − s^{3/2} = 2/3 − 2/5
        assert!((eta(&z, 1, 3, 0.0).unwrap() - (2.0 / 3.0 - 0.4)).abs() < 1e-8);
    }

    #[test]
    fn class_nesting() {
        let z = ZetaProfile::new(ZetaShape::SingularPower { exponent: 0.5, support: 2.0 }).unwrap();
        for n in 2..=4 {
            for j in (1..n).rev() {
                if certify_class(&z, j, n).is_ok() {
                    for i in 1..=j {
                        assert!(certify_class(&z, i, n).is_ok(), "{i} {j} {n}");
                    }
                }
            }
        }
    }

    #[test]
    fn truncation_formulas() {
        let z = ZetaProfile::new(ZetaShape::SingularPower { exponent: 0.5, support: 1.0 }).unwrap();
        let (j, n) = (1, 3);
        for r in [0.05, 0.3] {
            let zr = z.truncate(r);
            for t in [0.0, 0.01, r * 0.5, r, 0.7] {
                // closed forms against direct integration of ζ_r
                let direct_eta = zr.moment((n - j - 1) as i32, t);
                assert!((eta_r(&z, j, n, r, t).unwrap() - direct_eta).abs() < 1e-8);
                let direct_rho = t.powi(2) * zr.eval(t.max(1e-300)) + 2.0 * direct_eta;
                assert!((rho_r(&z, j, n, r, t).unwrap() - direct_rho).abs() < 1e-8, "{r} {t}");
                if t < r {
                    assert_eq!(rho_r(&z, j, n, r, t).unwrap(), rho(&z, j, n, r).unwrap());
                }
            }
            let b = truncation_bounds(&z, j, n, r, 0.5).unwrap();
            assert!(b[0] <= b[1] && b[2] <= b[3]);
        }
        assert_eq!(ZetaProfile::hat(1.0).truncate(2.0).support(), 0.0);
    }

    #[test]
    fn truncations_converge_as_r_shrinks() {
        let z = ZetaProfile::new(ZetaShape::SingularPower { exponent: 0.5, support: 1.0 }).unwrap();
        let (j, n) = (1, 3);
        let gap = |r: f64| {
            (0..=100)
                .map(|k| 0.05 + 0.95 * k as f64 / 100.0)
                .map(|t| {
                    let a = (eta_r(&z, j, n, r, t).unwrap() - eta(&z, j, n, t).unwrap()).abs();
                    let b = (rho_r(&z, j, n, r, t).unwrap() - rho(&z, j, n, t).unwrap()).abs();
                    a.max(b)
                })
                .fold(0.0, f64::max)
        };
        let g: Vec<f64> = [0.1, 0.01, 0.001].iter().map(|&r| gap(r)).collect();
        assert!(g[0] > g[1] && g[1] >= g[2], "{g:?}");
        assert_eq!(g[2], 0.0);
    }

    #[test]
    fn serde_roundtrip() {
        let z = ZetaProfile::hat(1.0).with_class(1, 2).truncate(0.1);
        let s = serde_json::to_string(&z).unwrap();
        let back: ZetaProfile = serde_json::from_str(&s).unwrap();
        assert_eq!(back, z);
    }
}
