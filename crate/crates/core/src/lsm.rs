//! Linear sampling: Tikhonov-regularized coefficient solves, the
//! multi-frequency indicator and trimmed max-gap ROI thresholding.

use faer::Mat;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inversion::RoiIndexSet;
use crate::linalg::{solve_hpd, CMat};

/// Floor applied to squared coefficient norms before the logarithm.
pub const INDICATOR_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LsmConfig {
    pub zeta: f64,
    pub epsilon: f64,
    pub q_trim: f64,
}

impl Default for LsmConfig {
    fn default() -> Self {
        Self { zeta: 1e-3, epsilon: 1e-4, q_trim: 0.05 }
    }
}

impl LsmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.zeta > 0.0) || !(self.epsilon > 0.0) || !(self.q_trim > 0.0 && self.q_trim <= 0.5) {
            return Err(Error::invalid(format!(
                "LSM needs zeta > 0, epsilon > 0 and 0 < q_trim <= 0.5 (got {self:?})"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct LsmResult {
    pub c: Vec<CMat>,
    pub indicator: Vec<f64>,
    pub scores: Vec<f64>,
    pub eta: f64,
    /// All scores equal; the threshold fell back to the full domain.
    pub degenerate: bool,
}

/// `c = (U^H U + zeta I)^{-1} U^H (1_T (x) G2)`.
///
/// `u` is `T N_r x N_t` and `g2_gamma` is `N_r x N`; the slot-stacked
/// right-hand side is never formed since `U^H (1_T (x) G2) = (sum_t U_t)^H G2`.
pub fn lsm_solve(u: &CMat, g2_gamma: &CMat, zeta: f64) -> Result<CMat> {
    if !(zeta > 0.0) {
        return Err(Error::invalid("zeta must be positive"));
    }
    let n_r = g2_gamma.nrows();
    if n_r == 0 || u.nrows() % n_r != 0 {
        return Err(Error::dim(format!("U has {} rows, not a multiple of N_r = {n_r}", u.nrows())));
    }
    let slots = u.nrows() / n_r;
    let n_t = u.ncols();
    let u_sum = Mat::from_fn(n_r, n_t, |r, m| (0..slots).map(|t| u[(t * n_r + r, m)]).sum::<Complex64>());
    let rhs = u_sum.adjoint() * g2_gamma;
    let mut normal = u.adjoint() * u;
    for i in 0..n_t {
        normal[(i, i)] += zeta;
    }
    solve_hpd(normal.as_ref(), rhs.as_ref())
}

/// `J(r) = (1/K) sum_k log10 ||c_k(r)||^2`.
pub fn indicator(c: &[CMat]) -> Result<Vec<f64>> {
    let first = c.first().ok_or_else(|| Error::invalid("indicator needs at least one tone"))?;
    let n = first.ncols();
    if c.iter().any(|m| m.ncols() != n) {
        return Err(Error::dim("coefficient matrices disagree on the pixel count"));
    }
    let k = c.len() as f64;
    Ok((0..n)
        .map(|j| {
            c.iter()
                .map(|m| (0..m.nrows()).map(|i| m[(i, j)].norm_sqr()).sum::<f64>().max(INDICATOR_FLOOR).log10())
                .sum::<f64>()
                / k
        })
        .collect())
}

/// Normalized scores `s_p = (J_max - J_p) / (J_max - J_min + epsilon)`.
pub fn scores(j: &[f64], epsilon: f64) -> Vec<f64> {
    let max = j.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = j.iter().copied().fold(f64::INFINITY, f64::min);
    let den = max - min + epsilon;
    j.iter().map(|&v| (max - v) / den).collect()
}

/// Midpoint of the largest gap between sorted scores, ignoring the `w`
/// smallest and largest gaps. Ties go to the smallest index.
pub fn max_gap_threshold(s: &[f64], q_trim: f64) -> Result<f64> {
    let n = s.len();
    let w = (q_trim * n as f64).ceil() as usize;
    if n < 2 || n < 2 * w + 1 || w == 0 {
        let need = (3..100_000).find(|&m| m >= 2 * ((q_trim * m as f64).ceil() as usize) + 1);
        return Err(Error::invalid(match need {
            Some(m) => format!("{n} scores leave no gap after trimming with q_trim = {q_trim}; need at least {m}"),
            None => format!("q_trim = {q_trim} trims every gap for any score count"),
        }));
    }
    let mut sorted = s.to_vec();
    sorted.sort_by(f64::total_cmp);
    // gaps indexed 1..N-1 with Delta_i = s_(i+1) - s_(i); window i in w..=N-1-w
    let mut best = w;
    let mut best_gap = f64::NEG_INFINITY;
    for i in w..=n - 1 - w {
        let gap = sorted[i] - sorted[i - 1];
        if gap > best_gap {
            best_gap = gap;
            best = i;
        }
    }
    Ok(0.5 * (sorted[best - 1] + sorted[best]))
}

/// Threshold from the raw indicator.
pub fn trimmed_max_gap_threshold(j: &[f64], epsilon: f64, q_trim: f64) -> Result<f64> {
    max_gap_threshold(&scores(j, epsilon), q_trim)
}

/// `I = {p : s_p <= eta}`.
pub fn roi_select(scores: &[f64], eta: f64, side_pixels: usize) -> Result<RoiIndexSet> {
    let idx: Vec<usize> = (0..scores.len()).filter(|&p| scores[p] <= eta).collect();
    if idx.is_empty() {
        return Err(Error::EmptyRoi(format!("threshold {eta} rejected every pixel")));
    }
    RoiIndexSet::new(idx, side_pixels)
}

/// Full pipeline from per-tone multi-static responses.
pub fn run_lsm(u: &[CMat], g2_gamma: &[&CMat], cfg: &LsmConfig) -> Result<LsmResult> {
    cfg.validate()?;
    if u.len() != g2_gamma.len() || u.is_empty() {
        return Err(Error::dim(format!("{} responses for {} Green's matrices", u.len(), g2_gamma.len())));
    }
    let c = u.iter().zip(g2_gamma).map(|(uk, gk)| lsm_solve(uk, gk, cfg.zeta)).collect::<Result<Vec<_>>>()?;
    let j = indicator(&c)?;
    let s = scores(&j, cfg.epsilon);
    let degenerate = s.iter().all(|&v| v == 0.0);
    let eta = if degenerate { 0.0 } else { max_gap_threshold(&s, cfg.q_trim)? };
    Ok(LsmResult { c, indicator: j, scores: s, eta, degenerate })
}

impl LsmResult {
    pub fn roi(&self, side_pixels: usize) -> Result<RoiIndexSet> {
        roi_select(&self.scores, self.eta, side_pixels)
    }

    /// `pixel,indicator,score,in_roi` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("pixel,indicator,score,in_roi\n");
        for (p, (j, s)) in self.indicator.iter().zip(&self.scores).enumerate() {
            out.push_str(&format!("{p},{j:e},{s:e},{}\n", u8::from(*s <= self.eta)));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::em::{ArrayGeometry, ContrastMap, FrequencyGrid, Grid2D};
    use crate::forward::{multistatic_response, NoiseSpec, Setup};
    use proptest::prelude::*;

    #[test]
    fn hand_traced_threshold() {
        let s = [0.05, 0.10, 0.12, 0.70, 0.80];
        let eta = max_gap_threshold(&s, 0.05).unwrap();
        assert!((eta - 0.41).abs() < 1e-12);
        let idx: Vec<usize> = (0..5).filter(|&p| s[p] <= eta).collect();
        assert_eq!(idx, vec![0, 1, 2]);
    }

    #[test]
    fn too_few_scores_names_minimum() {
        let err = max_gap_threshold(&[0.0, 1.0], 0.05).unwrap_err().to_string();
        assert!(err.contains("need at least 3"), "{err}");
        assert!(max_gap_threshold(&[0.0; 40], 0.5).is_err());
    }

    #[test]
    fn ties_pick_smallest_gap_index() {
        let s = [0.0, 0.0, 0.5, 0.5, 1.0, 1.0];
        // w = 1: gaps at i = 1..4 are 0, 0.5, 0, 0.5
        assert!((max_gap_threshold(&s, 0.05).unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn flat_indicator_selects_everything() {
        let j = vec![-3.0; 16];
        let s = scores(&j, 1e-4);
        assert!(s.iter().all(|&v| v == 0.0));
        let eta = max_gap_threshold(&s, 0.05).unwrap();
        assert_eq!(eta, 0.0);
        assert_eq!(roi_select(&s, eta, 4).unwrap().p(), 16);
    }

    #[test]
    fn indicator_shift_under_scaling() {
        let c1 = Mat::from_fn(3, 4, |i, j| Complex64::new(1.0 + i as f64, j as f64));
        let c10 = &c1 * faer::Scale(Complex64::new(10.0, 0.0));
        let a = indicator(&[c1.clone()]).unwrap();
        let b = indicator(&[c10]).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((y - x - 2.0).abs() < 1e-12);
        }
        let zero = Mat::<Complex64>::zeros(2, 2);
        assert_eq!(indicator(&[zero]).unwrap(), vec![-300.0, -300.0]);
    }

    #[test]
    fn normal_equations_hold_and_large_zeta_shrinks() {
        let u = Mat::from_fn(12, 4, |i, j| Complex64::new(((i * 7 + j * 3) % 5) as f64 - 2.0, ((i + 2 * j) % 3) as f64));
        let g = Mat::from_fn(3, 6, |i, j| Complex64::new((i + j) as f64, 1.0));
        let c = lsm_solve(&u, &g, 0.5).unwrap();
        let g_stk = Mat::from_fn(12, 6, |i, j| g[(i % 3, j)]);
        let lhs = (u.adjoint() * &u) * &c + &c * faer::Scale(Complex64::new(0.5, 0.0));
        let rhs = u.adjoint() * &g_stk;
        let err = crate::linalg::frobenius((&lhs - &rhs).as_ref()) / crate::linalg::frobenius(rhs.as_ref());
        assert!(err < 1e-12);
        let big = lsm_solve(&u, &g, 1e12).unwrap();
        assert!(crate::linalg::frobenius(big.as_ref()) < 1e-9);
    }

    /// A point scatterer makes `U` rank one, so the Tikhonov coefficients are
    /// proportional to the projection of the test Green's vector onto the
    /// scatterer's: the norm peaks at the scatterer rather than dipping.
    #[test]
    fn point_scatterer_maximizes_indicator() {
        let grid = Grid2D::new(11, 0.55).unwrap();
        let array = ArrayGeometry::uca(3.0, 24, 24, &grid).unwrap();
        let freqs = FrequencyGrid::new(2e9, 100e6, 3).unwrap();
        let setup = Setup { grid: grid.clone(), array, freqs };
        let ch = setup.channels().unwrap();
        let mut chi = ContrastMap::vacuum(&grid);
        let target = 3 * 11 + 7;
        chi.chi[target] = Complex64::new(0.5, 0.0);
        let c: Vec<CMat> = ch
            .iter()
            .enumerate()
            .map(|(k, chan)| {
                let u = multistatic_response(&chi, chan, k, 2, NoiseSpec::None, 0).unwrap();
                lsm_solve(&u, &chan.g2_gamma, 1e-9 * crate::linalg::frobenius(u.as_ref()).powi(2)).unwrap()
            })
            .collect();
        let j = indicator(&c).unwrap();
        let argmax = (0..j.len()).max_by(|&a, &b| j[a].total_cmp(&j[b])).unwrap();
        let (r, cc) = grid.row_col(argmax);
        assert!(r.abs_diff(3) <= 1 && cc.abs_diff(7) <= 1, "argmax at ({r}, {cc})");
    }

    proptest! {
        #[test]
        fn affine_rescaling_keeps_selected_set(j in proptest::collection::vec(-10.0f64..10.0, 25..60),
                                               a in 0.1f64..100.0, b in -50.0f64..50.0) {
            let eps = 1e-12;
            let s1 = scores(&j, eps);
            let jt: Vec<f64> = j.iter().map(|v| a * v + b).collect();
            let s2 = scores(&jt, eps);
            let e1 = max_gap_threshold(&s1, 0.05).unwrap();
            let e2 = max_gap_threshold(&s2, 0.05).unwrap();
            let sel1: Vec<bool> = s1.iter().map(|&s| s <= e1).collect();
            let sel2: Vec<bool> = s2.iter().map(|&s| s <= e2).collect();
            prop_assert_eq!(sel1, sel2);
        }

        #[test]
        fn maximum_is_always_selected_and_lower_eta_shrinks(j in proptest::collection::vec(-10.0f64..10.0, 25..60), cut in 0.0f64..1.0) {
            let s = scores(&j, 1e-4);
            let eta = max_gap_threshold(&s, 0.05).unwrap();
            let best = (0..j.len()).max_by(|&a, &b| j[a].total_cmp(&j[b])).unwrap();
            prop_assert_eq!(s[best], 0.0);
            let hi = (0..s.len()).filter(|&p| s[p] <= eta).count();
            let lo = (0..s.len()).filter(|&p| s[p] <= eta * cut).count();
            prop_assert!(lo <= hi && lo >= 1);
        }
    }
}
