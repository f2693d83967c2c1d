//! Conditioning and coherence analysis of restricted operators.

mod phase;

pub use phase::{air_bounds_csv, air_coherence_bound, geometric_phases, phase_mixing_mc, AirCoherenceBound, GeometricPhase, PhaseGeometry, PhaseMixingRow, PhaseMixingRun};

use std::fmt::Write as _;

use faer::{Mat, MatRef};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::OperatorBundle;
use crate::inversion::RoiIndexSet;
use crate::linalg::{column_norms, hermitian_eigenvalues, singular_values, CMat};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralReport {
    /// Nonincreasing.
    pub singular_values: Vec<f64>,
    pub sigma_max: f64,
    pub sigma_min: f64,
    /// `+inf` when `sigma_min` is below the numerical rank tolerance.
    pub kappa: f64,
    pub rank_tolerance: f64,
}

/// Singular values of a tall matrix through its thin R factor.
fn tall_singular_values(a: MatRef<'_, Complex64>) -> Result<Vec<f64>> {
    if a.nrows() > 2 * a.ncols() {
        let qr = a.qr();
        singular_values(qr.thin_R())
    } else {
        singular_values(a)
    }
}

/// Full singular spectrum and 2-norm condition number.
pub fn spectral_report(a: MatRef<'_, Complex64>) -> Result<SpectralReport> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Err(Error::dim("empty operator"));
    }
    let mut sv = tall_singular_values(a)?;
    sv.resize(a.ncols(), 0.0);
    Ok(report_from_values(sv, a.nrows().max(a.ncols())))
}

fn report_from_values(singular_values: Vec<f64>, dim: usize) -> SpectralReport {
    let sigma_max = singular_values[0];
    let sigma_min = *singular_values.last().expect("nonempty");
    let rank_tolerance = dim as f64 * f64::EPSILON * sigma_max;
    let kappa = if sigma_min <= rank_tolerance { f64::INFINITY } else { sigma_max / sigma_min };
    SpectralReport { singular_values, sigma_max, sigma_min, kappa, rank_tolerance }
}

impl SpectralReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,singular_value\n");
        for (i, s) in self.singular_values.iter().enumerate() {
            let _ = writeln!(out, "{i},{s:e}");
        }
        out
    }
}

/// Normalized column correlations and the Gershgorin certificate.
#[derive(Debug, Clone)]
pub struct CoherenceReport {
    /// `P x P`, `|abar_i^H abar_j|`, unit diagonal.
    pub ncc: Mat<f64>,
    pub mu_eff: f64,
    pub gersh_radii: Vec<f64>,
    pub r_max: f64,
    pub lambda_bounds: (f64, f64),
    /// Exact condition number of the column-normalized operator.
    pub kappa: f64,
    /// `sqrt((1 + xi) / (1 - xi))` with `xi = (P - 1) mu_eff`, when `xi < 1`.
    pub kappa_bound: Option<f64>,
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub col_norms: Vec<f64>,
}

impl CoherenceReport {
    pub fn p(&self) -> usize {
        self.ncc.nrows()
    }

    pub fn bound_valid(&self) -> bool {
        self.kappa_bound.is_some()
    }

    pub fn summary_json(&self) -> String {
        let v = serde_json::json!({
            "p": self.p(),
            "mu_eff": self.mu_eff,
            "r_max": self.r_max,
            "lambda_bounds": [self.lambda_bounds.0, self.lambda_bounds.1],
            "kappa": finite_or_null(self.kappa),
            "kappa_bound": self.kappa_bound,
            "bound_valid": self.bound_valid(),
            "sigma_min": self.sigma_min,
            "sigma_max": self.sigma_max,
        });
        serde_json::to_string_pretty(&v).expect("summary serializes")
    }

    /// One row per unordered pair `i < j`.
    pub fn pairs_csv(&self) -> String {
        let mut out = String::from("i,j,mu\n");
        for j in 0..self.p() {
            for i in 0..j {
                let _ = writeln!(out, "{i},{j},{:e}", self.ncc[(i, j)]);
            }
        }
        out
    }
}

fn finite_or_null(x: f64) -> serde_json::Value {
    if x.is_finite() {
        serde_json::json!(x)
    } else {
        serde_json::Value::Null
    }
}

fn gershgorin_bound(p: usize, mu_eff: f64) -> Option<f64> {
    let xi = (p.saturating_sub(1)) as f64 * mu_eff;
    (xi < 1.0).then(|| ((1.0 + xi) / (1.0 - xi)).sqrt())
}

fn coherence_from_phi(phi: &CMat, norms: Vec<f64>, spec: SpectralReport) -> CoherenceReport {
    let p = phi.nrows();
    let ncc = Mat::from_fn(p, p, |i, j| if i == j { 1.0 } else { phi[(i, j)].norm().min(1.0) });
    let gersh_radii: Vec<f64> = (0..p).map(|j| (0..p).filter(|&i| i != j).map(|i| ncc[(i, j)]).sum()).collect();
    let mu_eff = (0..p)
        .flat_map(|j| (0..p).filter(move |&i| i != j).map(move |i| (i, j)))
        .map(|(i, j)| ncc[(i, j)])
        .fold(0.0, f64::max);
    let r_max = gersh_radii.iter().copied().fold(0.0, f64::max);
    CoherenceReport {
        kappa_bound: gershgorin_bound(p, mu_eff),
        ncc,
        mu_eff,
        gersh_radii,
        r_max,
        lambda_bounds: (1.0 - r_max, 1.0 + r_max),
        kappa: spec.kappa,
        sigma_min: spec.sigma_min,
        sigma_max: spec.sigma_max,
        col_norms: norms,
    }
}

fn check_norms(norms: &[f64]) -> Result<()> {
    match norms.iter().position(|&d| !(d > 0.0)) {
        Some(j) => Err(Error::ZeroColumn(j)),
        None => Ok(()),
    }
}

/// Coherence report of an explicit matrix; the spectrum comes from an SVD of
/// the column-normalized matrix.
pub fn ncc_report(a: MatRef<'_, Complex64>) -> Result<CoherenceReport> {
    let norms = column_norms(a);
    check_norms(&norms)?;
    let abar = Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] / norms[j]);
    let phi = abar.adjoint() * &abar;
    let spec = spectral_report(abar.as_ref())?;
    Ok(coherence_from_phi(&phi, norms, spec))
}

/// Same report from the Gram matrix `A^H A` only. The spectrum is taken from
/// the eigenvalues of the normalized Gram, so `kappa` loses accuracy once it
/// approaches `1e8`.
pub fn ncc_report_gram(gram: &CMat) -> Result<CoherenceReport> {
    let p = gram.nrows();
    if p == 0 || gram.ncols() != p {
        return Err(Error::dim("gram must be square and nonempty"));
    }
    let norms: Vec<f64> = (0..p).map(|j| gram[(j, j)].re.max(0.0).sqrt()).collect();
    check_norms(&norms)?;
    let phi = Mat::from_fn(p, p, |i, j| gram[(i, j)] / (norms[i] * norms[j]));
    let ev = hermitian_eigenvalues(phi.as_ref())?;
    let sv: Vec<f64> = ev.iter().rev().map(|&l| l.max(0.0).sqrt()).collect();
    // eigenvalues of the Gram are only resolved to eps * lambda_max
    let mut spec = report_from_values(sv, 1);
    if spec.sigma_min * spec.sigma_min <= p as f64 * f64::EPSILON * spec.sigma_max * spec.sigma_max {
        spec.kappa = f64::INFINITY;
    }
    Ok(coherence_from_phi(&phi, norms, spec))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockStats {
    pub pairs: usize,
    pub mean: f64,
    pub max: f64,
}

/// Mean and maximum NCC over air-air, scatterer-scatterer and cross pairs.
/// A block without pairs is `None`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoherenceSplit {
    pub air: Option<BlockStats>,
    pub asr: Option<BlockStats>,
    pub cross: Option<BlockStats>,
}

/// Splits the column correlations of a full-domain Gram by the true support.
pub fn coherence_split(gram: &CMat, support: &[usize]) -> Result<CoherenceSplit> {
    let n = gram.nrows();
    if n == 0 || gram.ncols() != n {
        return Err(Error::dim("gram must be square and nonempty"));
    }
    let mut inside = vec![false; n];
    for &p in support {
        *inside.get_mut(p).ok_or_else(|| Error::dim(format!("support pixel {p} outside {n} columns")))? = true;
    }
    let norms: Vec<f64> = (0..n).map(|j| gram[(j, j)].re.max(0.0).sqrt()).collect();
    check_norms(&norms)?;
    let mut acc = [(0usize, 0.0f64, 0.0f64); 3];
    for j in 0..n {
        for i in 0..j {
            let mu = (gram[(i, j)].norm() / (norms[i] * norms[j])).min(1.0);
            let b = match (inside[i], inside[j]) {
                (false, false) => 0,
                (true, true) => 1,
                _ => 2,
            };
            acc[b].0 += 1;
            acc[b].1 += mu;
            acc[b].2 = acc[b].2.max(mu);
        }
    }
    let stats = |(pairs, sum, max): (usize, f64, f64)| (pairs > 0).then(|| BlockStats { pairs, mean: sum / pairs as f64, max });
    Ok(CoherenceSplit { air: stats(acc[0]), asr: stats(acc[1]), cross: stats(acc[2]) })
}

/// [`coherence_split`] on the multi-tone stacked operator.
pub fn coherence_split_operator(op: &OperatorBundle, support: &[usize]) -> Result<CoherenceSplit> {
    let all: Vec<usize> = (0..op.n()).collect();
    coherence_split(&op.gram(&all), support)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoiQuality {
    pub recall: f64,
    pub precision: f64,
    /// True positives.
    pub tau: usize,
    pub n_fp: usize,
    pub k_true: usize,
    pub p: usize,
}

pub fn roi_quality(roi: &RoiIndexSet, support: &[usize]) -> Result<RoiQuality> {
    let mut truth: Vec<usize> = support.to_vec();
    truth.sort_unstable();
    truth.dedup();
    if truth.is_empty() {
        return Err(Error::EmptyRoi("true support is empty".into()));
    }
    let tau = roi.indices.iter().filter(|p| truth.binary_search(p).is_ok()).count();
    let p = roi.p();
    Ok(RoiQuality {
        recall: tau as f64 / truth.len() as f64,
        precision: tau as f64 / p as f64,
        tau,
        n_fp: p - tau,
        k_true: truth.len(),
        p,
    })
}

/// ROI-mismatch form of the Gershgorin certificate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MismatchBound {
    /// Effective ROI size `(recall / precision) k_true`.
    pub p_equiv: f64,
    pub xi: f64,
    /// `None` when `xi >= 1`.
    pub kappa_max: Option<f64>,
    /// `(d ln kappa_max / d mu_eff) / (d ln kappa_max / d xi)`.
    pub derivative_ratio: f64,
}

pub fn kappa_max_of_xi(xi: f64) -> Option<f64> {
    (0.0..1.0).contains(&xi).then(|| ((1.0 + xi) / (1.0 - xi)).sqrt())
}

pub fn condition_bound_from_mismatch(mu_eff: f64, recall: f64, precision: f64, k_true: usize) -> Result<MismatchBound> {
    if !(0.0..=1.0).contains(&mu_eff) || !(recall > 0.0 && recall <= 1.0) || !(precision > 0.0 && precision <= 1.0) || k_true == 0 {
        return Err(Error::invalid(format!(
            "need mu_eff in [0,1], recall and precision in (0,1], k_true > 0; got {mu_eff}, {recall}, {precision}, {k_true}"
        )));
    }
    let p_equiv = recall / precision * k_true as f64;
    let xi = (p_equiv - 1.0) * mu_eff;
    Ok(MismatchBound { p_equiv, xi, kappa_max: kappa_max_of_xi(xi), derivative_ratio: p_equiv - 1.0 })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrlbReport {
    pub lambda_min_z: f64,
    /// `sigma_n^2 / lambda_min(A^H A)`; `+inf` when rank deficient.
    pub crlb_spectral: f64,
    /// `sigma_n^2 / (d_min^2 (1 - (P-1) mu_eff))`, when the denominator is positive.
    pub crlb_upper_bound: Option<f64>,
    pub d_min: f64,
    pub mu_eff: f64,
    pub chain_valid: bool,
}

pub fn crlb_report(a: MatRef<'_, Complex64>, noise_var: f64) -> Result<CrlbReport> {
    if !(noise_var >= 0.0) {
        return Err(Error::invalid("noise variance must be nonnegative"));
    }
    let coh = ncc_report(a)?;
    let spec = spectral_report(a)?;
    let lambda_min_z = spec.sigma_min * spec.sigma_min;
    let crlb_spectral = if spec.kappa.is_finite() { noise_var / lambda_min_z } else { f64::INFINITY };
    let d_min = coh.col_norms.iter().copied().fold(f64::INFINITY, f64::min);
    let slack = 1.0 - (coh.p() - 1) as f64 * coh.mu_eff;
    let crlb_upper_bound = (slack > 0.0).then(|| noise_var / (d_min * d_min * slack));
    // relative slack for rounding in the SVD
    let chain_valid = crlb_upper_bound.is_some_and(|b| crlb_spectral <= b * (1.0 + 1e-10));
    Ok(CrlbReport { lambda_min_z, crlb_spectral, crlb_upper_bound, d_min, mu_eff: coh.mu_eff, chain_valid })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn eye(m: usize, n: usize) -> CMat {
        Mat::from_fn(m, n, |i, j| if i == j { c(1.0, 0.0) } else { c(0.0, 0.0) })
    }

    #[test]
    fn identity_is_perfectly_conditioned() {
        let r = spectral_report(eye(5, 5).as_ref()).unwrap();
        assert!((r.kappa - 1.0).abs() < 1e-14);
        let coh = ncc_report(eye(7, 4).as_ref()).unwrap();
        assert_eq!(coh.mu_eff, 0.0);
        assert_eq!(coh.kappa_bound, Some(1.0));
        assert!((coh.kappa - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tall_path_matches_direct_svd() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let a = Mat::from_fn(60, 6, |_, _| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        let direct = singular_values(a.as_ref()).unwrap();
        let r = spectral_report(a.as_ref()).unwrap();
        for (x, y) in direct.iter().zip(&r.singular_values) {
            assert!((x - y).abs() < 1e-12 * direct[0]);
        }
    }

    #[test]
    fn duplicated_column_is_singular() {
        let mut a = eye(5, 3);
        for i in 0..5 {
            a[(i, 2)] = a[(i, 0)] * c(0.0, 3.0);
        }
        let coh = ncc_report(a.as_ref()).unwrap();
        assert!((coh.mu_eff - 1.0).abs() < 1e-15);
        assert!(!coh.bound_valid());
        assert!(coh.sigma_min < 1e-14);
        assert!(coh.kappa.is_infinite());
        let crlb = crlb_report(a.as_ref(), 1.0).unwrap();
        assert!(crlb.crlb_spectral.is_infinite());
        assert!(!crlb.chain_valid);
    }

    #[test]
    fn zero_column_names_pixel() {
        let mut a = eye(4, 3);
        a[(1, 1)] = c(0.0, 0.0);
        assert!(matches!(ncc_report(a.as_ref()), Err(Error::ZeroColumn(1))));
    }

    #[test]
    fn orthonormal_crlb_is_noise_variance() {
        let r = crlb_report(eye(6, 3).as_ref(), 1.0).unwrap();
        assert!((r.crlb_spectral - 1.0).abs() < 1e-14);
        assert!((r.crlb_upper_bound.unwrap() - 1.0).abs() < 1e-14);
        assert!(r.chain_valid);
    }

    #[test]
    fn gram_report_agrees_with_matrix_report() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let a = Mat::from_fn(30, 8, |_, _| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        let x = ncc_report(a.as_ref()).unwrap();
        let y = ncc_report_gram(&crate::linalg::gram(a.as_ref())).unwrap();
        assert!((x.mu_eff - y.mu_eff).abs() < 1e-12);
        assert!((x.kappa - y.kappa).abs() < 1e-8 * x.kappa);
    }

    #[test]
    fn roi_quality_counts() {
        let support: Vec<usize> = (0..144).collect();
        let full = RoiIndexSet::full(36);
        let q = roi_quality(&full, &support).unwrap();
        assert_eq!((q.recall, q.precision), (1.0, 1.0 / 9.0));
        let exact = RoiIndexSet::new(support.clone(), 36).unwrap();
        let q = roi_quality(&exact, &support).unwrap();
        assert_eq!((q.recall, q.precision, q.n_fp), (1.0, 1.0, 0));
        let far = RoiIndexSet::new(vec![1000, 1001], 36).unwrap();
        let q = roi_quality(&far, &support).unwrap();
        assert_eq!((q.recall, q.precision, q.tau), (0.0, 0.0, 0));
        assert!(roi_quality(&far, &[]).is_err());
    }

    #[test]
    fn mismatch_bound_cases() {
        let b = condition_bound_from_mismatch(0.0, 0.8, 0.5, 100).unwrap();
        assert_eq!(b.kappa_max, Some(1.0));
        let b = condition_bound_from_mismatch(0.3, 1.0, 1.0, 1).unwrap();
        assert_eq!((b.xi, b.kappa_max), (0.0, Some(1.0)));
        let b = condition_bound_from_mismatch(0.2, 1.0, 0.5, 10).unwrap();
        assert!(b.kappa_max.is_none());
    }

    #[test]
    fn derivative_ratio_matches_finite_differences() {
        let (mu, recall, precision, k) = (0.004, 0.9, 0.6, 40);
        let b = condition_bound_from_mismatch(mu, recall, precision, k).unwrap();
        let ln_k = |mu: f64| condition_bound_from_mismatch(mu, recall, precision, k).unwrap().kappa_max.unwrap().ln();
        let h = 1e-7;
        let d_mu = (ln_k(mu + h) - ln_k(mu - h)) / (2.0 * h);
        let ln_xi = |xi: f64| kappa_max_of_xi(xi).unwrap().ln();
        let d_xi = (ln_xi(b.xi + h) - ln_xi(b.xi - h)) / (2.0 * h);
        assert!((d_mu / d_xi - b.derivative_ratio).abs() < 1e-5 * b.derivative_ratio);
    }

    #[test]
    fn coherence_split_partitions_pairs() {
        let mut a = eye(6, 4);
        for i in 0..6 {
            a[(i, 1)] = a[(i, 0)] + c(0.1, 0.0) * a[(i, 1)];
        }
        let g = crate::linalg::gram(a.as_ref());
        let s = coherence_split(&g, &[2, 3]).unwrap();
        assert_eq!(s.air.unwrap().pairs, 1);
        assert!(s.air.unwrap().mean > 0.99);
        assert_eq!(s.asr.unwrap().mean, 0.0);
        assert_eq!(s.cross.unwrap().pairs, 4);
        let none = coherence_split(&g, &[]).unwrap();
        assert!(none.asr.is_none() && none.cross.is_none());
    }

    fn structured(seed: u64, m: usize, p: usize, spread: f64) -> CMat {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut a = eye(m, p);
        for j in 0..p {
            let scale = 0.1 + 2.0 * rng.random::<f64>();
            for i in 0..m {
                a[(i, j)] = (a[(i, j)] + c(spread * (rng.random::<f64>() - 0.5), spread * (rng.random::<f64>() - 0.5))) * scale;
            }
        }
        a
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn gershgorin_disks_hold(seed in 0u64..10_000, p in 2usize..7) {
            let a = structured(seed, 3 * p, p, 0.3);
            let coh = ncc_report(a.as_ref()).unwrap();
            let phi = Mat::from_fn(p, p, |i, j| {
                let mut s = c(0.0, 0.0);
                for r in 0..a.nrows() {
                    s += (a[(r, i)] / coh.col_norms[i]).conj() * a[(r, j)] / coh.col_norms[j];
                }
                s
            });
            let ev = hermitian_eigenvalues(phi.as_ref()).unwrap();
            prop_assert!(ev[0] >= coh.lambda_bounds.0 - 1e-12);
            prop_assert!(ev[p - 1] <= coh.lambda_bounds.1 + 1e-12);
            for j in 0..p {
                prop_assert!(coh.gersh_radii[j] <= (p - 1) as f64 * coh.mu_eff + 1e-15);
                prop_assert!((coh.ncc[(j, j)] - 1.0).abs() == 0.0);
                for i in 0..p {
                    prop_assert!(coh.ncc[(i, j)] == coh.ncc[(j, i)] || (coh.ncc[(i, j)] - coh.ncc[(j, i)]).abs() < 1e-15);
                }
            }
            if let Some(bound) = coh.kappa_bound {
                prop_assert!(coh.kappa <= bound * (1.0 + 1e-12));
            }
        }

        #[test]
        fn ncc_invariant_under_column_scaling(seed in 0u64..10_000) {
            let a = structured(seed, 8, 4, 1.0);
            let s = Mat::from_fn(8, 4, |i, j| a[(i, j)] * Complex64::from_polar(0.5 + j as f64, 0.7 * j as f64));
            let x = ncc_report(a.as_ref()).unwrap();
            let y = ncc_report(s.as_ref()).unwrap();
            for j in 0..4 {
                for i in 0..4 {
                    prop_assert!((x.ncc[(i, j)] - y.ncc[(i, j)]).abs() < 1e-12);
                }
            }
        }
    }
}
