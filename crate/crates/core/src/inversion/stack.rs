use faer::Mat;
use num_complex::Complex64;

use super::RoiIndexSet;
use crate::error::{Error, Result};
use crate::forward::{Observation, OperatorBundle};
use crate::linalg::CMat;

/// Dense `A_sub` (tone-major rows, ROI columns) and the matching stack `Y`.
pub fn restrict_and_stack(op: &OperatorBundle, roi: &RoiIndexSet, obs: &Observation) -> Result<(CMat, Vec<Complex64>)> {
    if roi.p() == 0 {
        return Err(Error::EmptyRoi("cannot restrict to an empty ROI".into()));
    }
    if roi.n() != op.n() {
        return Err(Error::dim(format!("ROI grid has {} pixels, operator {}", roi.n(), op.n())));
    }
    let y = obs.stacked();
    if y.len() != op.rows() {
        return Err(Error::dim(format!("observation of length {} for operator with {} rows", y.len(), op.rows())));
    }
    Ok((op.stacked_columns(&roi.indices), y))
}

/// Real representation `[[Re A, -Im A], [Im A, Re A]]`, `[Re y; Im y]`.
pub fn realify(a: &CMat, y: &[Complex64]) -> (Mat<f64>, Vec<f64>) {
    let (m, p) = (a.nrows(), a.ncols());
    let at = Mat::from_fn(2 * m, 2 * p, |i, j| {
        let z = a[(i % m, j % p)];
        match (i < m, j < p) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        }
    });
    let yt = y.iter().map(|z| z.re).chain(y.iter().map(|z| z.im)).collect();
    (at, yt)
}

/// Real representation of a Hermitian-structured complex matrix acting on
/// `[Re x; Im x]`.
pub fn realify_square(h: &CMat) -> Mat<f64> {
    realify(h, &[]).0
}

pub fn complex_to_real(x: &[Complex64]) -> Vec<f64> {
    x.iter().map(|z| z.re).chain(x.iter().map(|z| z.im)).collect()
}

pub fn real_to_complex(x: &[f64]) -> Vec<Complex64> {
    let p = x.len() / 2;
    (0..p).map(|i| Complex64::new(x[i], x[p + i])).collect()
}

/// Graph Laplacian of the ROI pixels under 4-neighbor connectivity.
pub fn roi_graph_laplacian(roi: &RoiIndexSet) -> Mat<f64> {
    let s = roi.side_pixels;
    let pos = roi.positions();
    let p = roi.p();
    let mut l = Mat::zeros(p, p);
    for (i, &pix) in roi.indices.iter().enumerate() {
        let (r, c) = (pix / s, pix % s);
        let mut nbrs = Vec::with_capacity(4);
        if r > 0 {
            nbrs.push(pix - s);
        }
        if r + 1 < s {
            nbrs.push(pix + s);
        }
        if c > 0 {
            nbrs.push(pix - 1);
        }
        if c + 1 < s {
            nbrs.push(pix + 1);
        }
        for q in nbrs {
            if let Some(j) = pos[q] {
                l[(i, j)] = -1.0;
                l[(i, i)] += 1.0;
            }
        }
    }
    l
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{singular_values, singular_values_real, symmetric_eigenvalues};
    use crate::rng::{complex_gaussian, stream, Purpose};

    #[test]
    fn imaginary_scalar() {
        let a = Mat::from_fn(1, 1, |_, _| Complex64::new(0.0, 1.0));
        let (at, _) = realify(&a, &[Complex64::new(0.0, 0.0)]);
        assert_eq!(at[(0, 0)], 0.0);
        assert_eq!(at[(0, 1)], -1.0);
        assert_eq!(at[(1, 0)], 1.0);
        assert_eq!(at[(1, 1)], 0.0);
        let x = [1.0, 0.0];
        assert_eq!((at[(0, 0)] * x[0] + at[(0, 1)] * x[1], at[(1, 0)] * x[0] + at[(1, 1)] * x[1]), (0.0, 1.0));
    }

    #[test]
    fn realification_preserves_norms_and_doubles_spectrum() {
        for seed in 0..20 {
            let mut rng = stream(seed, Purpose::Test, 0, 0);
            let a = Mat::from_fn(7, 4, |_, _| complex_gaussian(&mut rng, 1.0));
            let x: Vec<_> = (0..4).map(|_| complex_gaussian(&mut rng, 1.0)).collect();
            let y: Vec<_> = (0..7).map(|_| complex_gaussian(&mut rng, 1.0)).collect();
            let (at, yt) = realify(&a, &y);
            let xt = complex_to_real(&x);
            let r_c: f64 = (0..7)
                .map(|i| ((0..4).map(|j| a[(i, j)] * x[j]).sum::<Complex64>() - y[i]).norm_sqr())
                .sum::<f64>()
                .sqrt();
            let r_r: f64 = (0..14)
                .map(|i| ((0..8).map(|j| at[(i, j)] * xt[j]).sum::<f64>() - yt[i]).powi(2))
                .sum::<f64>()
                .sqrt();
            assert!((r_c - r_r).abs() <= 1e-12 * r_c);
            let fa: f64 = (0..7).flat_map(|i| (0..4).map(move |j| (i, j))).map(|(i, j)| a[(i, j)].norm_sqr()).sum();
            let fr: f64 = (0..14).flat_map(|i| (0..8).map(move |j| (i, j))).map(|(i, j)| at[(i, j)].powi(2)).sum();
            assert!((fr - 2.0 * fa).abs() <= 1e-12 * fa);
            let sc = singular_values(a.as_ref()).unwrap();
            let sr = singular_values_real(at.as_ref()).unwrap();
            for (k, s) in sc.iter().enumerate() {
                assert!((sr[2 * k] - s).abs() <= 1e-12 * sc[0]);
                assert!((sr[2 * k + 1] - s).abs() <= 1e-12 * sc[0]);
            }
            assert_eq!(real_to_complex(&xt), x);
        }
    }

    #[test]
    fn laplacian_small_cases() {
        let pair = RoiIndexSet::new(vec![4, 5], 3).unwrap();
        let l = roi_graph_laplacian(&pair);
        assert_eq!((l[(0, 0)], l[(0, 1)], l[(1, 0)], l[(1, 1)]), (1.0, -1.0, -1.0, 1.0));
        let lone = RoiIndexSet::new(vec![0, 8], 3).unwrap();
        let l = roi_graph_laplacian(&lone);
        assert!((0..2).all(|i| (0..2).all(|j| l[(i, j)] == 0.0)));
        // row-end pixels are not neighbors across the wrap
        let wrap = RoiIndexSet::new(vec![2, 3], 3).unwrap();
        assert_eq!(roi_graph_laplacian(&wrap)[(0, 1)], 0.0);
    }

    #[test]
    fn laplacian_rows_sum_to_zero_and_psd() {
        let roi = RoiIndexSet::new((0..100).filter(|p| (p * 7) % 5 != 0).collect(), 10).unwrap();
        let l = roi_graph_laplacian(&roi);
        for i in 0..roi.p() {
            assert_eq!((0..roi.p()).map(|j| l[(i, j)]).sum::<f64>(), 0.0);
        }
        let ev = symmetric_eigenvalues(l.as_ref()).unwrap();
        assert!(ev[0] >= -1e-12);
    }
}
