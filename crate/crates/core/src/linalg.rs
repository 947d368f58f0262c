//! Small dense linear algebra: determinants, pivoted solves with a
//! condition estimate, and least-squares polynomial fits.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Determinant by Gaussian elimination with partial pivoting.
pub fn det(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    if n == 0 {
        return 1.0;
    }
    let mut m = a.clone();
    let mut d = 1.0;
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| m[(i, col)].abs().partial_cmp(&m[(j, col)].abs()).unwrap())
            .unwrap();
        if m[(pivot, col)] == 0.0 {
            return 0.0;
        }
        if pivot != col {
            m.swap_rows(pivot, col);
            d = -d;
        }
        let p = m[(col, col)];
        d *= p;
        for r in col + 1..n {
            let f = m[(r, col)] / p;
            if f != 0.0 {
                for c in col..n {
                    m[(r, c)] -= f * m[(col, c)];
                }
            }
        }
    }
    d
}

#[derive(Debug, Clone)]
pub struct Solved {
    pub x: DVector<f64>,
    /// 1-norm condition number of the system matrix.
    pub condition: f64,
}

fn lu_solve(lu: &DMatrix<f64>, perm: &[usize], b: &DVector<f64>) -> DVector<f64> {
    let n = lu.nrows();
    let mut y = DVector::from_fn(n, |i, _| b[perm[i]]);
    for i in 0..n {
        for k in 0..i {
            y[i] -= lu[(i, k)] * y[k];
        }
    }
    for i in (0..n).rev() {
        for k in i + 1..n {
            y[i] -= lu[(i, k)] * y[k];
        }
        y[i] /= lu[(i, i)];
    }
    y
}

/// Solves `a x = b` with partial-pivoted elimination and reports the exact
/// 1-norm condition number (the systems here are at most ~10×10).
pub fn solve_pivoted(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<Solved> {
    let n = a.nrows();
    if a.ncols() != n || b.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: b.len() });
    }
    let mut lu = a.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| lu[(i, col)].abs().partial_cmp(&lu[(j, col)].abs()).unwrap())
            .unwrap();
        if lu[(pivot, col)].abs() < f64::MIN_POSITIVE {
            return Err(Error::IllConditionedVandermonde { condition: f64::INFINITY });
        }
        lu.swap_rows(pivot, col);
        perm.swap(pivot, col);
        for r in col + 1..n {
            let f = lu[(r, col)] / lu[(col, col)];
            lu[(r, col)] = f;
            for c in col + 1..n {
                lu[(r, c)] -= f * lu[(col, c)];
            }
        }
    }
    let x = lu_solve(&lu, &perm, b);
    let mut inv_norm: f64 = 0.0;
    for j in 0..n {
        let e = DVector::from_fn(n, |i, _| if i == j { 1.0 } else { 0.0 });
        let col = lu_solve(&lu, &perm, &e);
        inv_norm = inv_norm.max(col.iter().map(|v| v.abs()).sum());
    }
    let a_norm = (0..n)
        .map(|j| (0..n).map(|i| a[(i, j)].abs()).sum::<f64>())
        .fold(0.0, f64::max);
    Ok(Solved { x, condition: a_norm * inv_norm })
}

#[derive(Debug, Clone)]
pub struct PolyFit {
    /// Coefficients of `1, s, s², …`.
    pub coefficients: Vec<f64>,
    /// Standard errors propagated from the per-node standard errors
    /// (independent noise assumed); zero when none were supplied.
    pub std_errors: Vec<f64>,
    pub condition: f64,
}

/// Least-squares fit of a degree-`degree` polynomial through `(s_k, v_k)`.
pub fn poly_fit(s: &[f64], v: &[f64], sigma: Option<&[f64]>, degree: usize) -> Result<PolyFit> {
    let m = s.len();
    if m < degree + 1 {
        return Err(Error::DegenerateFit { condition: f64::INFINITY });
    }
    let a = DMatrix::from_fn(m, degree + 1, |i, j| s[i].powi(j as i32));
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !condition.is_finite() || condition > 1e12 {
        return Err(Error::DegenerateFit { condition });
    }
    let pinv = svd
        .pseudo_inverse(0.0)
        .map_err(|_| Error::DegenerateFit { condition })?;
    let coef = &pinv * DVector::from_column_slice(v);
    let std_errors = match sigma {
        Some(sig) => (0..=degree)
            .map(|j| {
                (0..m)
                    .map(|k| (pinv[(j, k)] * sig[k]).powi(2))
                    .sum::<f64>()
                    .sqrt()
            })
            .collect(),
        None => vec![0.0; degree + 1],
    };
    Ok(PolyFit { coefficients: coef.iter().copied().collect(), std_errors, condition })
}

/// Inverse of a symmetric positive-definite matrix, or `None` when singular.
pub fn spd_inverse(a: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    a.clone().cholesky().map(|c| c.inverse())
}
