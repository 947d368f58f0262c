//! Quadrature kernels shared by every module: adaptive Gauss–Kronrod on
//! intervals, Gauss–Legendre tensor rules, sphere rules for polar
//! integration, and exact power-weighted integrals of linear pieces.

use std::f64::consts::PI;

/// Default absolute tolerance for adaptive 1-D quadrature.
pub const ABS_TOL: f64 = 1e-10;
/// Default relative tolerance for adaptive 1-D quadrature.
pub const REL_TOL: f64 = 1e-8;

const MAX_INTERVALS: usize = 4000;

// 15-point Kronrod abscissae (non-negative half, descending) and weights.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
// 7-point Gauss weights, matching XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub abs_error: f64,
    pub converged: bool,
}

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for (k, &x) in XGK.iter().enumerate().take(7) {
        let dx = half * x;
        let s = f(center - dx) + f(center + dx);
        kronrod += WGK[k] * s;
        if k % 2 == 1 {
            gauss += WG[k / 2] * s;
        }
    }
    let value = kronrod * half;
    let err = ((kronrod - gauss) * half).abs();
    (value, err)
}

/// Adaptive Gauss–Kronrod integration of `f` over `[a, b]`, pre-split at
/// the given breakpoints. The integrand is never evaluated at interval
/// endpoints, so integrable endpoint singularities are tolerated.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, breakpoints: &[f64]) -> Integral {
    integrate_tol(f, a, b, breakpoints, ABS_TOL, REL_TOL)
}

pub fn integrate_tol<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    breakpoints: &[f64],
    abs_tol: f64,
    rel_tol: f64,
) -> Integral {
    if b == a {
        return Integral { value: 0.0, abs_error: 0.0, converged: true };
    }
    if b < a {
        let r = integrate_tol(f, b, a, breakpoints, abs_tol, rel_tol);
        return Integral { value: -r.value, ..r };
    }
    let mut cuts: Vec<f64> = vec![a];
    let mut inner: Vec<f64> = breakpoints
        .iter()
        .copied()
        .filter(|&p| p > a && p < b)
        .collect();
    inner.sort_by(|x, y| x.partial_cmp(y).unwrap());
    inner.dedup_by(|x, y| (*x - *y).abs() <= 1e-15 * (1.0 + y.abs()));
    cuts.extend(inner);
    cuts.push(b);

    // (a, b, value, error)
    let mut pieces: Vec<(f64, f64, f64, f64)> = cuts
        .windows(2)
        .map(|w| {
            let (v, e) = gk15(&f, w[0], w[1]);
            (w[0], w[1], v, e)
        })
        .collect();

    loop {
        let total: f64 = pieces.iter().map(|p| p.2).sum();
        let err: f64 = pieces.iter().map(|p| p.3).sum();
        let target = abs_tol.max(rel_tol * total.abs());
        if err <= target {
            return Integral { value: total, abs_error: err, converged: true };
        }
        if pieces.len() >= MAX_INTERVALS {
            return Integral { value: total, abs_error: err, converged: false };
        }
        let (idx, _) = pieces
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.partial_cmp(&y.1 .3).unwrap())
            .unwrap();
        let (lo, hi, _, _) = pieces[idx];
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            // interval can no longer be split in floating point
            let total: f64 = pieces.iter().map(|p| p.2).sum();
            return Integral { value: total, abs_error: err, converged: false };
        }
        let (v1, e1) = gk15(&f, lo, mid);
        let (v2, e2) = gk15(&f, mid, hi);
        pieces[idx] = (lo, mid, v1, e1);
        pieces.push((mid, hi, v2, e2));
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Composite Gauss–Legendre on `[a, b]` split at `cuts`, `order` nodes per piece.
pub fn composite_gl<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, cuts: &[f64], order: usize) -> f64 {
    if b <= a {
        return 0.0;
    }
    let (xs, ws) = gauss_legendre(order);
    let mut pts = vec![a];
    let mut inner: Vec<f64> = cuts.iter().copied().filter(|&c| c > a && c < b).collect();
    inner.sort_by(|x, y| x.partial_cmp(y).unwrap());
    pts.extend(inner);
    pts.push(b);
    let mut total = 0.0;
    for w in pts.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        if hi <= lo {
            continue;
        }
        let c = 0.5 * (lo + hi);
        let h = 0.5 * (hi - lo);
        total += xs.iter().zip(&ws).map(|(x, wt)| wt * f(c + h * x)).sum::<f64>() * h;
    }
    total
}

/// Quadrature rule on the unit sphere `S^{n-1}`; the weights sum to its
/// surface area. `resolution` controls the number of nodes per angle.
pub fn sphere_rule(n: usize, resolution: usize) -> Vec<(Vec<f64>, f64)> {
    match n {
        1 => vec![(vec![1.0], 1.0), (vec![-1.0], 1.0)],
        2 => {
            let m = resolution.max(4);
            let w = 2.0 * PI / m as f64;
            (0..m)
                .map(|k| {
                    let a = 2.0 * PI * (k as f64 + 0.5) / m as f64;
                    (vec![a.cos(), a.sin()], w)
                })
                .collect()
        }
        3 => {
            let m = resolution.max(4);
            let (zs, wz) = gauss_legendre(m);
            let mp = 2 * m;
            let wp = 2.0 * PI / mp as f64;
            let mut out = Vec::with_capacity(m * mp);
            for (z, w) in zs.iter().zip(&wz) {
                let rho = (1.0 - z * z).max(0.0).sqrt();
                for k in 0..mp {
                    let a = 2.0 * PI * (k as f64 + 0.5) / mp as f64;
                    out.push((vec![rho * a.cos(), rho * a.sin(), *z], w * wp));
                }
            }
            out
        }
        _ => panic!("sphere_rule supports n <= 3"),
    }
}

/// Exact `∫_a^b (alpha + beta r) r^p dr` for integer `p`, with `0 < a <= b`
/// whenever a negative power is involved.
pub fn int_power_linear(a: f64, b: f64, alpha: f64, beta: f64, p: i32) -> f64 {
    alpha * int_power(a, b, p) + beta * int_power(a, b, p + 1)
}

/// Exact `∫_a^b r^p dr` for integer `p`.
pub fn int_power(a: f64, b: f64, p: i32) -> f64 {
    if p == -1 {
        (b / a).ln()
    } else {
        let q = p + 1;
        (b.powi(q) - a.powi(q)) / q as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kronrod_rule_integrates_polynomials_exactly() {
        // K15 is exact through degree 22
        for deg in [0, 5, 12, 22] {
            let (v, _) = gk15(&|x: f64| x.powi(deg), 0.0, 1.0);
            assert!((v - 1.0 / (deg as f64 + 1.0)).abs() < 1e-14, "deg {deg}");
        }
    }

    #[test]
    fn gauss_legendre_weights_and_exactness() {
        for n in [1, 2, 5, 16, 33] {
            let (x, w) = gauss_legendre(n);
            assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-13);
            let deg = 2 * n as i32 - 1;
            let v: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg - 1)).sum();
            let exact = if (deg - 1) % 2 == 0 { 2.0 / deg as f64 } else { 0.0 };
            assert!((v - exact).abs() < 1e-12, "n={n}");
        }
    }

    #[test]
    fn adaptive_handles_sqrt_singularity() {
        let r = integrate(|x| 1.0 / x.sqrt(), 0.0, 1.0, &[]);
        assert!(r.converged);
        assert!((r.value - 2.0).abs() <= r.abs_error.max(1e-12), "{r:?}");
    }

    #[test]
    fn sphere_rules_have_correct_area() {
        let a2: f64 = sphere_rule(2, 16).iter().map(|p| p.1).sum();
        let a3: f64 = sphere_rule(3, 8).iter().map(|p| p.1).sum();
        assert!((a2 - 2.0 * PI).abs() < 1e-12);
        assert!((a3 - 4.0 * PI).abs() < 1e-12);
        // second moment of z on S^2 is 4π/3
        let m: f64 = sphere_rule(3, 8).iter().map(|(d, w)| w * d[2] * d[2]).sum();
        assert!((m - 4.0 * PI / 3.0).abs() < 1e-12);
    }

    #[test]
    fn power_linear_matches_quadrature() {
        for p in [-3, -2, -1, 0, 2] {
            let exact = int_power_linear(0.5, 2.0, 1.5, -0.25, p);
            let num = integrate(|r| (1.5 - 0.25 * r) * r.powi(p), 0.5, 2.0, &[]).value;
            assert!((exact - num).abs() < 1e-12, "p={p}");
        }
    }
}
