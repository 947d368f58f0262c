use super::{settles, ZetaProfile, ABS_TOL, CLASS_TOL, REFINEMENT, REL_TOL};
use crate::error::{Error, Result};
use crate::omega;
use crate::quad::{int_power_linear, integrate_tol};

/// Recovered density with its limit certificates.
#[derive(Debug, Clone, PartialEq)]
pub struct Recovery {
    pub zeta: ZetaProfile,
    /// `t^{n−1} ∫_t^∞ Z(u_r)/r^n dr` at the finer of `1e−4` and the smallest
    /// positive abscissa.
    pub limit_certificate: f64,
    /// `Z(u_0)/(n−1)`.
    pub limit_expected: f64,
    /// `|t^{n−1} ζ(t)|` along the refinement sequence.
    pub vanishing: [f64; 4],
    /// `∫_t^∞ r^{n−2} ζ(r) dr` along the refinement sequence.
    pub tail: [f64; 4],
}

/// Piecewise-linear cone values `t ↦ Z(u_t)`, constant below the first
/// node and zero beyond the last.
struct ConeValues<'a> {
    t: &'a [f64],
    z: &'a [f64],
}

impl ConeValues<'_> {
    fn at(&self, x: f64) -> f64 {
        let t = self.t;
        if x <= t[0] {
            return self.z[0];
        }
        if x >= *t.last().unwrap() {
            return 0.0;
        }
        let k = t.partition_point(|a| *a <= x);
        let w = (x - t[k - 1]) / (t[k] - t[k - 1]);
        self.z[k - 1] * (1.0 - w) + self.z[k] * w
    }

    /// `∫_x^∞ Z(r) r^p dr`, exact piece by piece; `x > 0`.
    fn moment(&self, p: i32, x: f64) -> f64 {
        let t = self.t;
        let mut total = 0.0;
        if x < t[0] {
            total += self.z[0] * crate::quad::int_power(x, t[0], p);
        }
        for k in 0..t.len() - 1 {
            let (a, b) = (t[k].max(x), t[k + 1]);
            if b <= a {
                continue;
            }
            let beta = (self.z[k + 1] - self.z[k]) / (t[k + 1] - t[k]);
            let alpha = self.z[k] - beta * t[k];
            total += int_power_linear(a, b, alpha, beta, p);
        }
        total
    }
}

fn check_input(t: &[f64], z: &[f64], n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::InvalidInput("recovery needs n ≥ 2".into()));
    }
    if t.len() < 2 || t.len() != z.len() {
        return Err(Error::InvalidInput("cone values need at least two matching samples".into()));
    }
    if t[0] < 0.0 || t.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput("abscissae must be non-negative and increasing".into()));
    }
    let scale = z.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1.0);
    if z.last().unwrap().abs() > 1e-12 * scale {
        return Err(Error::InvalidInput("cone values must vanish at the last abscissa".into()));
    }
    Ok(())
}

/// `Z(u_t) = ω_n (ζ(t) t^{n−1} + (n−1) ∫_t^∞ r^{n−2} ζ(r) dr)` at the given
/// abscissae; `t = 0` takes the limit.
pub fn synthesize_cone_values(zeta: &ZetaProfile, n: usize, t: &[f64]) -> Vec<f64> {
    let w = omega(n);
    t.iter()
        .map(|&x| {
            let head = if x > 0.0 { zeta.eval(x) * x.powi(n as i32 - 1) } else { 0.0 };
            w * (head + (n - 1) as f64 * zeta.moment(n as i32 - 2, x))
        })
        .collect()
}

/// `ζ(t) = Z(u_t)/(ω_n t^{n−1}) − ((n−1)/ω_n) ∫_t^∞ Z(u_r)/r^n dr` on the
/// positive abscissae, with the `Had_1^n` limits certified on the
/// refinement sequence.
pub fn recover_zeta_from_cone_values(t: &[f64], z: &[f64], n: usize) -> Result<Recovery> {
    check_input(t, z, n)?;
    let cv = ConeValues { t, z };
    let w = omega(n);
    let k = (n - 1) as f64;
    let zeta_at = |x: f64| cv.at(x) / (w * x.powi(n as i32 - 1)) - k / w * cv.moment(-(n as i32), x);

    let (s, values): (Vec<f64>, Vec<f64>) = t.iter().filter(|x| **x > 0.0).map(|&x| (x, zeta_at(x))).unzip();
    let mut values = values;
    // the formula is exactly zero at the last node; drop round-off
    *values.last_mut().unwrap() = 0.0;
    let zeta = ZetaProfile::sampled(s, values)?.with_class(1, n);

    let first_positive = t.iter().copied().find(|x| *x > 0.0).unwrap_or(REFINEMENT[3]);
    let tiny = REFINEMENT[3].min(first_positive);
    let limit_certificate = tiny.powi(n as i32 - 1) * cv.moment(-(n as i32), tiny);
    let limit_expected = cv.at(0.0) / k;
    let mut vanishing = [0.0; 4];
    let mut tail = [0.0; 4];
    for (k, &x) in REFINEMENT.iter().enumerate() {
        vanishing[k] = (x.powi(n as i32 - 1) * zeta_at(x)).abs();
        tail[k] = tail_integral(&cv, n, x);
    }

    let scale = z.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1.0);
    if !settles(&vanishing, CLASS_TOL * scale / w) {
        return Err(Error::ClassViolation(format!("t^{{n−1}} ζ(t) does not vanish ({vanishing:.3?})")));
    }
    if (limit_certificate - limit_expected).abs() > CLASS_TOL * limit_expected.abs().max(1.0) {
        return Err(Error::ClassViolation(format!(
            "limit {limit_certificate:.6e} differs from Z(u_0)/(n−1) = {limit_expected:.6e}"
        )));
    }
    let steps: Vec<f64> = tail.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    if !settles(&steps, CLASS_TOL * tail[3].abs().max(1.0)) {
        return Err(Error::ClassViolation("∫_t^∞ r^{n−2} ζ(r) dr does not settle".into()));
    }
    Ok(Recovery { zeta, limit_certificate, limit_expected, vanishing, tail })
}

/// `∫_x^∞ r^{n−2} ζ(r) dr` computed from its two terms separately:
/// `(1/ω_n)(∫ Z/r − (n−1) ∫ r^{n−2} ∫_r^∞ Z/s^n ds dr)`.
fn tail_integral(cv: &ConeValues, n: usize, x: f64) -> f64 {
    let top = *cv.t.last().unwrap();
    if x >= top {
        return 0.0;
    }
    let first = cv.moment(-1, x);
    let inner = |r: f64| r.powi(n as i32 - 2) * cv.moment(-(n as i32), r);
    let mut cuts: Vec<f64> = cv.t.to_vec();
    cuts.extend([1e-3, 1e-2, 1e-1]);
    let second = integrate_tol(inner, x, top, &cuts, ABS_TOL, REL_TOL).value;
    (first - (n - 1) as f64 * second) / omega(n)
}

/// Residual of `(n−1)∫_t^∞ r^{n−2}∫_r^∞ Z/s^n ds dr = −t^{n−1}∫_t^∞ Z/r^n dr
/// + ∫_t^∞ Z/r dr` for piecewise-linear cone values.
pub fn integration_by_parts_residual(t: &[f64], z: &[f64], n: usize, x: f64) -> Result<f64> {
    check_input(t, z, n)?;
    let cv = ConeValues { t, z };
    let top = *t.last().unwrap();
    let inner = |r: f64| r.powi(n as i32 - 2) * cv.moment(-(n as i32), r);
    let lhs = (n - 1) as f64 * integrate_tol(inner, x, top, t, ABS_TOL, REL_TOL).value;
    let rhs = -x.powi(n as i32 - 1) * cv.moment(-(n as i32), x) + cv.moment(-1, x);
    Ok((lhs - rhs).abs() / rhs.abs().max(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::zetaspace::ZetaShape;
    use rand::{Rng, SeedableRng};

    fn nodes(top: f64) -> Vec<f64> {
        let mut t = vec![0.0];
        t.extend((0..60).map(|k| 1e-6 * (0.05f64 / 1e-6).powf(k as f64 / 60.0)));
        let m = ((top - 0.05) / 1e-3).round() as usize;
        t.extend((0..=m).map(|k| 0.05 + (top - 0.05) * k as f64 / m as f64));
        t
    }

    #[test]
    fn zero_values_give_zero_profile() {
        let t = nodes(1.0);
        let z = vec![0.0; t.len()];
        let r = recover_zeta_from_cone_values(&t, &z, 3).unwrap();
        assert!(r.zeta.scale() == 0.0);
    }

    #[test]
    fn roundtrip_recovers_profiles() {
        let profiles = [
            ZetaProfile::hat(1.0),
            ZetaProfile::new(ZetaShape::Bump { center: 0.5, half_width: 0.4 }).unwrap(),
            ZetaProfile::new(ZetaShape::SingularPower { exponent: 0.25, support: 1.0 }).unwrap(),
        ];
        for n in [2, 3] {
            for z0 in &profiles {
                let t = nodes(z0.support());
                let zv = synthesize_cone_values(z0, n, &t);
                let rec = recover_zeta_from_cone_values(&t, &zv, n).unwrap();
                let gap = (0..=2000)
                    .map(|k| 0.05 + (z0.support() - 0.05) * k as f64 / 2000.0)
                    .map(|s| (rec.zeta.eval(s) - z0.eval(s)).abs())
                    .fold(0.0, f64::max);
                assert!(gap <= 1e-3, "n={n} {z0:?}: {gap}");
                assert!((rec.limit_certificate - rec.limit_expected).abs() <= 1e-3);
            }
        }
    }

    #[test]
    fn non_vanishing_limit_is_flagged() {
        // Z jumps to a spike near 0 that the formula cannot absorb
        let t = vec![0.0, 1e-5, 0.5, 1.0];
        let z = vec![0.0, 5.0, 1.0, 0.0];
        assert!(matches!(recover_zeta_from_cone_values(&t, &z, 2), Err(Error::ClassViolation(_))));
    }

    #[test]
    fn integration_by_parts_holds_for_random_values() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for n in [2, 3] {
            for _ in 0..5 {
                let t: Vec<f64> = (0..=40).map(|k| k as f64 / 40.0).collect();
                let mut z: Vec<f64> = t.iter().map(|_| rng.random_range(-1.0..1.0)).collect();
                *z.last_mut().unwrap() = 0.0;
                for x in [0.01, 0.2, 0.7] {
                    assert!(integration_by_parts_residual(&t, &z, n, x).unwrap() < 1e-6);
                }
            }
        }
    }
}
