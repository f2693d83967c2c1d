//! Thin helpers over `faer` used throughout the crate.

use faer::linalg::solvers::{PartialPivLu, Solve, SolveCore};
use faer::{Conj, Mat, MatRef, Side};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMat = Mat<Complex64>;

/// Relative residual accepted by [`solve_checked`].
pub const RESIDUAL_TOL: f64 = 1e-10;

/// Reciprocal condition number below which a square system counts as singular.
pub const RCOND_FLOOR: f64 = 1e-14;

pub fn frobenius(a: MatRef<'_, Complex64>) -> f64 {
    let mut s = 0.0;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            s += a[(i, j)].norm_sqr();
        }
    }
    s.sqrt()
}

pub fn vec_norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn column_norms(a: MatRef<'_, Complex64>) -> Vec<f64> {
    (0..a.ncols())
        .map(|j| (0..a.nrows()).map(|i| a[(i, j)].norm_sqr()).sum::<f64>().sqrt())
        .collect()
}

pub fn col_to_vec(a: MatRef<'_, Complex64>, j: usize) -> Vec<Complex64> {
    (0..a.nrows()).map(|i| a[(i, j)]).collect()
}

pub fn vec_to_col(v: &[Complex64]) -> CMat {
    Mat::from_fn(v.len(), 1, |i, _| v[i])
}

/// `A x` for a plain vector.
pub fn matvec(a: MatRef<'_, Complex64>, x: &[Complex64]) -> Vec<Complex64> {
    assert_eq!(a.ncols(), x.len());
    let mut y = vec![Complex64::new(0.0, 0.0); a.nrows()];
    for (j, &xj) in x.iter().enumerate() {
        if xj == Complex64::new(0.0, 0.0) {
            continue;
        }
        for (i, yi) in y.iter_mut().enumerate() {
            *yi += a[(i, j)] * xj;
        }
    }
    y
}

/// `A^H A`.
pub fn gram(a: MatRef<'_, Complex64>) -> CMat {
    a.adjoint() * a
}

/// Singular values, sorted nonincreasing.
pub fn singular_values(a: MatRef<'_, Complex64>) -> Result<Vec<f64>> {
    a.singular_values()
        .map_err(|e| Error::Linalg(format!("svd failed: {e:?}")))
}

pub fn singular_values_real(a: MatRef<'_, f64>) -> Result<Vec<f64>> {
    a.singular_values()
        .map_err(|e| Error::Linalg(format!("svd failed: {e:?}")))
}

/// Eigenvalues of a Hermitian matrix, sorted nondecreasing.
pub fn hermitian_eigenvalues(a: MatRef<'_, Complex64>) -> Result<Vec<f64>> {
    a.self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Linalg(format!("eigendecomposition failed: {e:?}")))
}

pub fn symmetric_eigenvalues(a: MatRef<'_, f64>) -> Result<Vec<f64>> {
    a.self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Linalg(format!("eigendecomposition failed: {e:?}")))
}

/// Largest eigenvalue of a Hermitian positive semidefinite matrix by power
/// iteration (relative accuracy about 1e-6).
pub fn largest_eigenvalue_psd(a: MatRef<'_, Complex64>) -> f64 {
    let n = a.nrows();
    if n == 0 {
        return 0.0;
    }
    let mut x = Mat::from_fn(n, 1, |i, _| Complex64::new(1.0 + 0.01 * (i % 17) as f64, 0.001 * (i % 5) as f64));
    let mut lambda = 0.0;
    for _ in 0..500 {
        let y = a * &x;
        let ny = frobenius(y.as_ref());
        if ny == 0.0 {
            return 0.0;
        }
        let next = ny / frobenius(x.as_ref());
        x = y * faer::Scale(Complex64::new(1.0 / ny, 0.0));
        let done = (next - lambda).abs() <= 1e-8 * next;
        lambda = next;
        if done {
            break;
        }
    }
    lambda
}

fn norm1(a: MatRef<'_, Complex64>) -> f64 {
    (0..a.ncols())
        .map(|j| (0..a.nrows()).map(|i| a[(i, j)].norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Hager–Higham estimate of `||A^{-1}||_1` from an existing LU factorization.
fn inverse_norm1_estimate(lu: &PartialPivLu<Complex64>, n: usize) -> f64 {
    let mut x = Mat::from_fn(n, 1, |_, _| Complex64::new(1.0 / n as f64, 0.0));
    let mut estimate = 0.0;
    let mut last_j = usize::MAX;
    for _ in 0..5 {
        let y = lu.solve(&x);
        estimate = (0..n).map(|i| y[(i, 0)].norm()).sum::<f64>();
        let mut xi = Mat::from_fn(n, 1, |i, _| {
            let v = y[(i, 0)];
            let m = v.norm();
            if m == 0.0 || !m.is_finite() {
                Complex64::new(1.0, 0.0)
            } else {
                v / m
            }
        });
        lu.solve_transpose_in_place_with_conj(Conj::Yes, xi.as_mut());
        let (jmax, zmax) = (0..n)
            .map(|i| (i, xi[(i, 0)].norm()))
            .fold((0, -1.0), |acc, (i, m)| if m > acc.1 { (i, m) } else { acc });
        let ztx: f64 = (0..n).map(|i| (xi[(i, 0)].conj() * x[(i, 0)]).re).sum();
        if zmax <= ztx || jmax == last_j {
            break;
        }
        last_j = jmax;
        x = Mat::zeros(n, 1);
        x[(jmax, 0)] = Complex64::new(1.0, 0.0);
    }
    estimate
}

/// 1-norm condition estimate of a square matrix.
pub fn condition_estimate(a: MatRef<'_, Complex64>) -> f64 {
    let lu = a.partial_piv_lu();
    norm1(a) * inverse_norm1_estimate(&lu, a.nrows())
}

/// Solves `A X = B` by dense LU and verifies the residual.
///
/// Fails with [`Error::Singular`] when the reciprocal condition estimate falls
/// below [`RCOND_FLOOR`] or the relative residual exceeds [`RESIDUAL_TOL`].
pub fn solve_checked(
    a: MatRef<'_, Complex64>,
    b: MatRef<'_, Complex64>,
    context: &str,
) -> Result<CMat> {
    let n = a.nrows();
    if a.ncols() != n || b.nrows() != n {
        return Err(Error::dim(format!(
            "{context}: system {}x{} with rhs {}x{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    let lu = a.partial_piv_lu();
    let cond = norm1(a) * inverse_norm1_estimate(&lu, n);
    if !cond.is_finite() || 1.0 / cond < RCOND_FLOOR {
        return Err(Error::Singular { context: context.to_string(), condition: cond });
    }
    let x = lu.solve(b);
    let r = a * &x - b;
    let rel = frobenius(r.as_ref()) / frobenius(b).max(f64::MIN_POSITIVE);
    if !rel.is_finite() || rel > RESIDUAL_TOL {
        return Err(Error::Singular {
            context: format!("{context}: relative residual {rel:.3e}"),
            condition: cond,
        });
    }
    Ok(x)
}

/// Solves a Hermitian positive definite system by Cholesky.
pub fn solve_hpd(a: MatRef<'_, Complex64>, b: MatRef<'_, Complex64>) -> Result<CMat> {
    let llt = a
        .llt(Side::Lower)
        .map_err(|e| Error::Linalg(format!("cholesky failed: {e:?}")))?;
    Ok(llt.solve(b))
}

pub fn solve_spd(a: MatRef<'_, f64>, b: MatRef<'_, f64>) -> Result<Mat<f64>> {
    let llt = a
        .llt(Side::Lower)
        .map_err(|e| Error::Linalg(format!("cholesky failed: {e:?}")))?;
    Ok(llt.solve(b))
}
