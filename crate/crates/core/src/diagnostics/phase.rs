use std::f64::consts::{PI, TAU};
use std::fmt::Write as _;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::em::greens::kernel;
use crate::em::{distance, FrequencyGrid, Point};
use crate::error::{Error, Result};
use crate::forward::ToneOperator;
use crate::rng::{stream, Purpose};

/// Pixel pair inside a scatterer region for the geometric phase model.
#[derive(Debug, Clone)]
pub struct PhaseGeometry {
    /// Centers of the scatterer pixels (`r_m`).
    pub points: Vec<Point>,
    pub i: usize,
    pub j: usize,
    pub f_c: f64,
    pub delta_f: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeometricPhase {
    pub k_b: f64,
    /// Phase of the asymptotic sum.
    pub phi_eff: f64,
    pub asymptotic: Complex64,
    /// Exact kernel inner product over the same points.
    pub exact: Complex64,
    /// `|exact - asymptotic| / |asymptotic|`.
    pub remainder_ratio: f64,
}

/// Effective cross-column phase of pixels `i`, `j` at wavenumber `k_b`.
/// The two pixels themselves are excluded from the sums.
pub fn geometric_phases(geom: &PhaseGeometry, k_b: f64) -> Result<GeometricPhase> {
    let (ri, rj) = match (geom.points.get(geom.i), geom.points.get(geom.j)) {
        (Some(a), Some(b)) if geom.i != geom.j => (*a, *b),
        _ => return Err(Error::invalid(format!("bad pixel pair ({}, {})", geom.i, geom.j))),
    };
    let b2 = (0.25 * k_b * k_b).powi(2);
    let mut asym = Complex64::new(0.0, 0.0);
    let mut exact = Complex64::new(0.0, 0.0);
    for (m, &rm) in geom.points.iter().enumerate() {
        if m == geom.i || m == geom.j {
            continue;
        }
        let (di, dj) = (distance(rm, ri), distance(rm, rj));
        let alpha = 2.0 * b2 / (PI * k_b * (di * dj).sqrt());
        asym += alpha * Complex64::from_polar(1.0, -k_b * (dj - di));
        exact += kernel(k_b, di).conj() * kernel(k_b, dj);
    }
    if asym.norm() == 0.0 {
        return Err(Error::invalid("need at least one point besides the pair"));
    }
    Ok(GeometricPhase { k_b, phi_eff: asym.arg(), asymptotic: asym, exact, remainder_ratio: (exact - asym).norm() / asym.norm() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseMixingRow {
    pub k: usize,
    pub empirical_prob: f64,
    pub markov_bound: f64,
    pub mean_sq_zbar: f64,
    /// Standard error of `mean_sq_zbar`.
    pub mean_sq_stderr: f64,
    /// Largest remainder ratio over the tones; geometric mode only.
    pub max_remainder_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseMixingRun {
    pub threshold: f64,
    pub trials: usize,
    pub seed: u64,
    pub rows: Vec<PhaseMixingRow>,
}

/// Monte Carlo of the averaged cross-tone phasor `zbar = mean_k exp(j(phi_k + theta_k))`
/// with i.i.d. uniform `theta_k`. Without geometry `phi_k = 0`.
pub fn phase_mixing_mc(
    k_values: &[usize],
    threshold: f64,
    trials: usize,
    seed: u64,
    geometry: Option<&PhaseGeometry>,
) -> Result<PhaseMixingRun> {
    if trials < 1000 {
        return Err(Error::invalid(format!("need at least 1000 trials, got {trials}")));
    }
    if !(threshold > 0.0) || k_values.contains(&0) {
        return Err(Error::invalid("threshold must be positive and every K at least 1"));
    }
    let mut rows = Vec::with_capacity(k_values.len());
    for &k in k_values {
        let (phis, max_rem) = match geometry {
            Some(g) => {
                let freqs = FrequencyGrid::new(g.f_c, g.delta_f, k)?;
                let gp = (0..k).map(|t| geometric_phases(g, freqs.wavenumber(t))).collect::<Result<Vec<_>>>()?;
                let rem = gp.iter().map(|p| p.remainder_ratio).fold(0.0, f64::max);
                (gp.iter().map(|p| p.phi_eff).collect(), Some(rem))
            }
            None => (vec![0.0; k], None),
        };
        let mut rng = stream(seed, Purpose::PhaseMixing, k, 0);
        let (mut hits, mut s1, mut s2) = (0usize, 0.0, 0.0);
        for _ in 0..trials {
            let z: Complex64 = phis.iter().map(|&phi| Complex64::from_polar(1.0, phi + rng.random::<f64>() * TAU)).sum();
            let m = (z / k as f64).norm_sqr();
            if m.sqrt() <= threshold {
                hits += 1;
            }
            s1 += m;
            s2 += m * m;
        }
        let n = trials as f64;
        let mean = s1 / n;
        let var = (s2 / n - mean * mean).max(0.0) * n / (n - 1.0);
        rows.push(PhaseMixingRow {
            k,
            empirical_prob: hits as f64 / n,
            markov_bound: 1.0 - 1.0 / (k as f64 * threshold * threshold),
            mean_sq_zbar: mean,
            mean_sq_stderr: (var / n).sqrt(),
            max_remainder_ratio: max_rem,
        });
    }
    Ok(PhaseMixingRun { threshold, trials, seed, rows })
}

impl PhaseMixingRun {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,empirical_prob,markov_bound,mean_sq_zbar,mean_sq_stderr\n");
        for r in &self.rows {
            let _ = writeln!(out, "{},{:.6},{:.6},{:.8},{:.8}", r.k, r.empirical_prob, r.markov_bound, r.mean_sq_zbar, r.mean_sq_stderr);
        }
        out
    }
}

/// Scaling-plus-residual lower bound on the correlation of two columns.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AirCoherenceBound {
    pub i: usize,
    pub j: usize,
    pub gamma: Complex64,
    pub rho: Complex64,
    pub eps_u: f64,
    pub eps_v: f64,
    pub delta_ij: f64,
    pub lower_bound: f64,
    pub observed_mu: f64,
}

impl AirCoherenceBound {
    pub fn holds(&self) -> bool {
        self.observed_mu >= self.lower_bound - 1e-12
    }
}

/// Least-squares scaling of `b` onto `a` and the residual ratio `|b - s a| / |a|`.
fn project(a: &[Complex64], b: &[Complex64]) -> Result<(Complex64, f64, f64, f64)> {
    let na2: f64 = a.iter().map(|z| z.norm_sqr()).sum();
    let nb2: f64 = b.iter().map(|z| z.norm_sqr()).sum();
    if na2 == 0.0 || nb2 == 0.0 {
        return Err(Error::invalid("zero-norm column factor"));
    }
    let s: Complex64 = a.iter().zip(b).map(|(x, y)| x.conj() * y).sum::<Complex64>() / na2;
    let r2: f64 = a.iter().zip(b).map(|(x, y)| (y - s * x).norm_sqr()).sum();
    Ok((s, (r2 / na2).sqrt(), na2.sqrt(), nb2.sqrt()))
}

/// Evaluates the bound for each pixel pair of one tone's factored operator.
/// Pairs touching a pixel with nonzero `chi` are rejected.
pub fn air_coherence_bound(op: &ToneOperator, chi: &[Complex64], pairs: &[(usize, usize)]) -> Result<Vec<AirCoherenceBound>> {
    let n = op.u.ncols();
    if chi.len() != n {
        return Err(Error::dim(format!("contrast has {} pixels, operator {n}", chi.len())));
    }
    let col = |m: &crate::linalg::CMat, j: usize| (0..m.nrows()).map(|r| m[(r, j)]).collect::<Vec<_>>();
    pairs
        .iter()
        .map(|&(i, j)| {
            if i >= n || j >= n {
                return Err(Error::dim(format!("pair ({i}, {j}) outside {n} pixels")));
            }
            if chi[i] != Complex64::new(0.0, 0.0) || chi[j] != Complex64::new(0.0, 0.0) {
                return Err(Error::invalid(format!("pair ({i}, {j}) is not background")));
            }
            let (ui, uj, vi, vj) = (col(&op.u, i), col(&op.u, j), col(&op.v, i), col(&op.v, j));
            let (gamma, eps_u, nui, nuj) = project(&ui, &uj)?;
            let (rho, eps_v, nvi, nvj) = project(&vi, &vj)?;
            let (g, r) = (gamma.norm(), rho.norm());
            let delta_ij = g * eps_v + r * eps_u + eps_u * eps_v;
            let lower_bound = (r * g - delta_ij) / ((g + eps_u) * (r + eps_v));
            let cu: Complex64 = ui.iter().zip(&uj).map(|(x, y)| x.conj() * y).sum();
            let cv: Complex64 = vi.iter().zip(&vj).map(|(x, y)| x.conj() * y).sum();
            let observed_mu = (cu.norm() / (nui * nuj)) * (cv.norm() / (nvi * nvj));
            Ok(AirCoherenceBound { i, j, gamma, rho, eps_u, eps_v, delta_ij, lower_bound, observed_mu })
        })
        .collect()
}

pub fn air_bounds_csv(rows: &[AirCoherenceBound]) -> String {
    let mut out = String::from("i,j,gamma_re,gamma_im,rho_re,rho_im,eps_u,eps_v,delta_ij,lower_bound,observed_mu\n");
    for b in rows {
        let _ = writeln!(
            out,
            "{},{},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
            b.i, b.j, b.gamma.re, b.gamma.im, b.rho.re, b.rho.im, b.eps_u, b.eps_v, b.delta_ij, b.lower_bound, b.observed_mu
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::em::{ArrayGeometry, Grid2D};
    use crate::forward::{make_pilots, ChannelPair};

    #[test]
    fn single_tone_never_mixes() {
        let run = phase_mixing_mc(&[1], 0.25, 1000, 1, None).unwrap();
        assert_eq!(run.rows[0].empirical_prob, 0.0);
        assert!((run.rows[0].mean_sq_zbar - 1.0).abs() < 1e-12);
    }

    #[test]
    fn second_moment_is_one_over_k() {
        let run = phase_mixing_mc(&[8, 16, 32, 64], 0.25, 10_000, 5, None).unwrap();
        for r in &run.rows {
            let want = 1.0 / r.k as f64;
            assert!((r.mean_sq_zbar - want).abs() <= 3.0 * r.mean_sq_stderr, "K={} {} vs {want}", r.k, r.mean_sq_zbar);
            if r.markov_bound > 0.0 {
                assert!(r.empirical_prob >= r.markov_bound);
            }
        }
    }

    #[test]
    fn too_few_trials_rejected() {
        assert!(phase_mixing_mc(&[4], 0.25, 999, 1, None).is_err());
    }

    #[test]
    fn geometric_mode_reports_remainder() {
        let grid = Grid2D::new(8, 0.4).unwrap();
        let geom = PhaseGeometry { points: grid.centers.clone(), i: 9, j: 20, f_c: 28e9, delta_f: 100e6 };
        let gp = geometric_phases(&geom, 2.0 * PI * 28e9 / crate::em::SPEED_OF_LIGHT).unwrap();
        // pixels are several wavelengths apart, so the asymptotic form is close
        assert!(gp.remainder_ratio < 0.05, "{}", gp.remainder_ratio);
        let run = phase_mixing_mc(&[4, 16], 0.25, 1000, 2, Some(&geom)).unwrap();
        assert!(run.rows.iter().all(|r| r.max_remainder_ratio.is_some()));
    }

    #[test]
    fn identical_factors_give_unit_bound() {
        let grid = Grid2D::new(6, 0.3).unwrap();
        let array = ArrayGeometry::uca(2.0, 8, 8, &grid).unwrap();
        let ch = ChannelPair::new(&grid, &array, 2.0 * PI * 28e9 / crate::em::SPEED_OF_LIGHT).unwrap();
        let x = make_pilots(8, 4, 1, 1).unwrap();
        let mut op = ToneOperator::assemble(&vec![Complex64::new(0.0, 0.0); 36], &ch, &x.x[0]).unwrap();
        for r in 0..op.u.nrows() {
            op.u[(r, 1)] = op.u[(r, 0)];
        }
        for r in 0..op.v.nrows() {
            op.v[(r, 1)] = op.v[(r, 0)];
        }
        let chi = vec![Complex64::new(0.0, 0.0); 36];
        let b = air_coherence_bound(&op, &chi, &[(0, 1), (0, 7), (0, 35)]).unwrap();
        assert!((b[0].lower_bound - 1.0).abs() < 1e-12 && (b[0].observed_mu - 1.0).abs() < 1e-12);
        assert!(b.iter().all(AirCoherenceBound::holds));
        // observed mu is the factor product, equal to the dense column correlation
        let dense = op.dense();
        let (a0, a7): (Vec<_>, Vec<_>) = (0..dense.nrows()).map(|r| (dense[(r, 0)], dense[(r, 7)])).unzip();
        let ip: Complex64 = a0.iter().zip(&a7).map(|(x, y)| x.conj() * y).sum();
        let n0 = a0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let n7 = a7.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        assert!((ip.norm() / (n0 * n7) - b[1].observed_mu).abs() < 1e-12);
        let mut busy = chi.clone();
        busy[7] = Complex64::new(0.5, 0.0);
        assert!(air_coherence_bound(&op, &busy, &[(0, 7)]).is_err());
    }
}
