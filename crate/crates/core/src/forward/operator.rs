use faer::Mat;
use num_complex::Complex64;

use super::{total_fields, ChannelPair, PilotBook};
use crate::em::ContrastMap;
use crate::error::{Error, Result};
use crate::linalg::CMat;

/// Column factors of one tone's operator: column `j` of `A_k` is
/// `u_j (x) v_j` with `u_j` column `j` of `u` (`T x N`) and `v_j` column `j`
/// of `v` (`N_r x N`).
#[derive(Debug, Clone)]
pub struct ToneOperator {
    pub u: CMat,
    pub v: CMat,
}

/// Sensing operators of all tones, kept in factored form.
#[derive(Debug, Clone)]
pub struct OperatorBundle {
    pub tones: Vec<ToneOperator>,
    /// Euclidean column norms of the tone-stacked operator.
    pub col_norms: Vec<f64>,
    pub born_only: bool,
}

/// Column-wise Kronecker product: column `j` is `a_j (x) b_j`.
pub fn khatri_rao(a: &CMat, b: &CMat) -> CMat {
    assert_eq!(a.ncols(), b.ncols());
    let m = b.nrows();
    Mat::from_fn(a.nrows() * m, a.ncols(), |i, j| a[(i / m, j)] * b[(i % m, j)])
}

impl ToneOperator {
    /// `u = (E_t X)^T`, `v = H2`, where `E_t` is the total field for the
    /// contrast estimate (the incident field when it is zero).
    pub fn assemble(chi_est: &[Complex64], ch: &ChannelPair, x: &CMat) -> Result<Self> {
        let fields = total_fields(chi_est, &ch.domain, &ch.h1)?;
        let u = (&fields.e_t * x).transpose().to_owned();
        Ok(Self { u, v: ch.h2.clone() })
    }

    pub fn rows(&self) -> usize {
        self.u.nrows() * self.v.nrows()
    }

    pub fn dense(&self) -> CMat {
        khatri_rao(&self.u, &self.v)
    }

    /// Columns `cols` of the dense operator.
    pub fn dense_columns(&self, cols: &[usize]) -> CMat {
        let m = self.v.nrows();
        Mat::from_fn(self.rows(), cols.len(), |i, j| self.u[(i / m, cols[j])] * self.v[(i % m, cols[j])])
    }

    /// `A_k x` for a full-length coefficient vector.
    pub fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        let (t, m) = (self.u.nrows(), self.v.nrows());
        let mut out = vec![Complex64::new(0.0, 0.0); t * m];
        for (j, &xj) in x.iter().enumerate() {
            if xj.norm_sqr() == 0.0 {
                continue;
            }
            for s in 0..t {
                let w = self.u[(s, j)] * xj;
                for r in 0..m {
                    out[s * m + r] += w * self.v[(r, j)];
                }
            }
        }
        out
    }
}

/// Assembles every tone's operator around `chi_est`. A zero estimate gives
/// the Born operators.
pub fn assemble_operator(chi_est: &ContrastMap, channels: &[ChannelPair], pilots: &PilotBook) -> Result<OperatorBundle> {
    if pilots.tones() < channels.len() {
        return Err(Error::dim(format!("{} pilot tones for {} channels", pilots.tones(), channels.len())));
    }
    let tones = channels
        .iter()
        .zip(&pilots.x)
        .map(|(ch, x)| ToneOperator::assemble(&chi_est.chi, ch, x))
        .collect::<Result<Vec<_>>>()?;
    Ok(OperatorBundle::from_tones(tones, chi_est.support().is_empty()))
}

fn col_sq(m: &CMat, j: usize) -> f64 {
    (0..m.nrows()).map(|i| m[(i, j)].norm_sqr()).sum()
}

impl OperatorBundle {
    pub fn from_tones(tones: Vec<ToneOperator>, born_only: bool) -> Self {
        let n = tones.first().map_or(0, |t| t.u.ncols());
        let col_norms = (0..n)
            .map(|j| tones.iter().map(|t| col_sq(&t.u, j) * col_sq(&t.v, j)).sum::<f64>().sqrt())
            .collect();
        Self { tones, col_norms, born_only }
    }

    pub fn n(&self) -> usize {
        self.col_norms.len()
    }

    pub fn rows(&self) -> usize {
        self.tones.iter().map(ToneOperator::rows).sum()
    }

    /// The same operator restricted to a subset of tones.
    pub fn tone_subset(&self, indices: &[usize]) -> Self {
        Self::from_tones(indices.iter().map(|&k| self.tones[k].clone()).collect(), self.born_only)
    }

    /// Dense tone-stacked operator `[A_1; ...; A_K]` restricted to `cols`.
    pub fn stacked_columns(&self, cols: &[usize]) -> CMat {
        let mut out = Mat::zeros(self.rows(), cols.len());
        let mut offset = 0;
        for t in &self.tones {
            let block = t.dense_columns(cols);
            for j in 0..cols.len() {
                for i in 0..block.nrows() {
                    out[(offset + i, j)] = block[(i, j)];
                }
            }
            offset += t.rows();
        }
        out
    }

    pub fn a_stack(&self) -> CMat {
        self.stacked_columns(&(0..self.n()).collect::<Vec<_>>())
    }

    /// `A_sub^H A_sub` for the columns `cols`, from the factor Gram matrices.
    pub fn gram(&self, cols: &[usize]) -> CMat {
        let p = cols.len();
        let mut g = Mat::<Complex64>::zeros(p, p);
        for t in &self.tones {
            let us = Mat::from_fn(t.u.nrows(), p, |i, j| t.u[(i, cols[j])]);
            let vs = Mat::from_fn(t.v.nrows(), p, |i, j| t.v[(i, cols[j])]);
            let gu = us.adjoint() * &us;
            let gv = vs.adjoint() * &vs;
            for j in 0..p {
                for i in 0..p {
                    g[(i, j)] += gu[(i, j)] * gv[(i, j)];
                }
            }
        }
        g
    }

    /// `A_sub^H y` for a tone-major stacked `y`.
    pub fn adjoint_apply(&self, cols: &[usize], y: &[Complex64]) -> Result<Vec<Complex64>> {
        if y.len() != self.rows() {
            return Err(Error::dim(format!("stack of length {} for operator with {} rows", y.len(), self.rows())));
        }
        let mut out = vec![Complex64::new(0.0, 0.0); cols.len()];
        let mut offset = 0;
        for t in &self.tones {
            let (ts, m) = (t.u.nrows(), t.v.nrows());
            for (o, &j) in out.iter_mut().zip(cols) {
                let mut acc = Complex64::new(0.0, 0.0);
                for s in 0..ts {
                    let mut inner = Complex64::new(0.0, 0.0);
                    for r in 0..m {
                        inner += t.v[(r, j)].conj() * y[offset + s * m + r];
                    }
                    acc += t.u[(s, j)].conj() * inner;
                }
                *o += acc;
            }
            offset += t.rows();
        }
        Ok(out)
    }

    /// `A_sub x` stacked over tones, `x` indexed like `cols`.
    pub fn apply_columns(&self, cols: &[usize], x: &[Complex64]) -> Vec<Complex64> {
        let mut full = vec![Complex64::new(0.0, 0.0); self.n()];
        for (&c, &v) in cols.iter().zip(x) {
            full[c] = v;
        }
        self.tones.iter().flat_map(|t| t.apply(&full)).collect()
    }
}
