use faer::Mat;
use num_complex::Complex64;

use crate::em::{ContrastMap, DomainKernel};
use crate::error::{Error, Result};
use crate::linalg::{frobenius, solve_checked, CMat};

/// In-domain fields for every Tx excitation (`N x N_t` each).
#[derive(Debug, Clone)]
pub struct FieldSet {
    pub e_i: CMat,
    pub e_t: CMat,
    pub e_s: CMat,
}

fn check_dims(chi: &ContrastMap, n: usize, e_i: &CMat) -> Result<()> {
    if chi.len() != n || e_i.nrows() != n {
        return Err(Error::dim(format!(
            "contrast has {} pixels, Green's matrix {n}, incident field {} rows",
            chi.len(),
            e_i.nrows()
        )));
    }
    Ok(())
}

/// Solves `(I - G diag(chi)) E_t = E_i` on the full domain with a dense LU.
pub fn total_field_solve(chi: &ContrastMap, g: &CMat, e_i: &CMat) -> Result<FieldSet> {
    let n = g.nrows();
    check_dims(chi, n, e_i)?;
    let m = Mat::from_fn(n, n, |i, j| {
        let d = if i == j { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) };
        d - g[(i, j)] * chi.chi[j]
    });
    let e_t = solve_checked(m.as_ref(), e_i.as_ref(), "total field")?;
    let e_s = &e_t - e_i;
    Ok(FieldSet { e_i: e_i.clone(), e_t, e_s })
}

/// Same solution as [`total_field_solve`], computed on the contrast support.
///
/// With `S = supp(chi)`, the rows of the system in `S` only involve `E_t[S]`,
/// so `(I - G_SS D_S) E_t[S] = E_i[S]` is solved first and the remaining rows
/// follow as `E_i + G[:, S] D_S E_t[S]`. The cost is cubic in `|S|` instead of
/// `N`.
pub fn total_fields(chi: &[Complex64], g: &DomainKernel, e_i: &CMat) -> Result<FieldSet> {
    let n = g.len();
    if chi.len() != n || e_i.nrows() != n {
        return Err(Error::dim(format!(
            "contrast has {} pixels, Green's matrix {n}, incident field {} rows",
            chi.len(),
            e_i.nrows()
        )));
    }
    let support: Vec<usize> = (0..n).filter(|&p| chi[p].norm_sqr() != 0.0).collect();
    if support.is_empty() {
        return Ok(FieldSet { e_i: e_i.clone(), e_t: e_i.clone(), e_s: Mat::zeros(n, e_i.ncols()) });
    }
    let s = support.len();
    let mut g_cols = g.block(&(0..n).collect::<Vec<_>>(), &support);
    for (j, &p) in support.iter().enumerate() {
        let c = chi[p];
        for i in 0..n {
            g_cols[(i, j)] *= c;
        }
    }
    let reduced = Mat::from_fn(s, s, |i, j| {
        let d = if i == j { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) };
        d - g_cols[(support[i], j)]
    });
    let rhs = Mat::from_fn(s, e_i.ncols(), |i, j| e_i[(support[i], j)]);
    let e_supp = solve_checked(reduced.as_ref(), rhs.as_ref(), "total field (support)")?;
    let e_s = &g_cols * &e_supp;
    let e_t = e_i + &e_s;
    Ok(FieldSet { e_i: e_i.clone(), e_t, e_s })
}

impl FieldSet {
    /// `||E_t - E_i - G diag(chi) E_t|| / ||E_i||` against an explicit `G`.
    pub fn relative_residual(&self, chi: &ContrastMap, g: &CMat) -> f64 {
        let n = g.nrows();
        let mut de = self.e_t.clone();
        for j in 0..de.ncols() {
            for i in 0..n {
                de[(i, j)] *= chi.chi[i];
            }
        }
        let r = &self.e_t - &self.e_i - g * &de;
        frobenius(r.as_ref()) / frobenius(self.e_i.as_ref()).max(f64::MIN_POSITIVE)
    }
}

/// Power-iteration estimate of the spectral radius of `G diag(chi)`.
///
/// Only support columns of `G diag(chi)` are nonzero, so the nonzero spectrum
/// is that of the `|S| x |S|` block.
pub fn spectral_radius(chi: &ContrastMap, g: &DomainKernel, iterations: usize) -> f64 {
    let support = chi.support();
    if support.is_empty() {
        return 0.0;
    }
    let s = support.len();
    let m = Mat::from_fn(s, s, |i, j| g.entry(support[i], support[j]) * chi.chi[support[j]]);
    let mut x = Mat::from_fn(s, 1, |i, _| Complex64::new(1.0 + (i % 7) as f64 * 0.1, (i % 3) as f64 * 0.2));
    let mut lambda = 0.0;
    let mut prev = f64::NAN;
    for _ in 0..iterations {
        let y = &m * &x;
        let ny = frobenius(y.as_ref());
        let nx = frobenius(x.as_ref());
        if ny == 0.0 {
            return 0.0;
        }
        lambda = ny / nx;
        x = y * faer::Scale(Complex64::new(1.0 / ny, 0.0));
        if (lambda - prev).abs() <= 1e-10 * lambda {
            break;
        }
        prev = lambda;
    }
    lambda
}
