use std::fmt::Write as _;
use std::time::Instant;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::lcurve::{lcurve_corner, lcurve_points_gram, log_grid, LcurveChoice};
use super::qp::{solve_qp, QpProblem};
use super::stack::roi_graph_laplacian;
use super::RoiIndexSet;
use crate::error::{Error, Result};
use crate::forward::{ChannelPair, Observation, OperatorBundle, PilotBook, ToneOperator};
use crate::linalg::{largest_eigenvalue_psd, solve_hpd, vec_norm};

/// How the regularization weights of each Born step are chosen.
///
/// Relative weights are multiplied by the largest eigenvalue of
/// `A_sub^H A_sub` of the first iteration, so they do not depend on the
/// overall scale of the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum WeightRule {
    Fixed { alpha: f64, beta: f64 },
    Relative { alpha: f64, beta: f64 },
    /// L-curve over relative candidates, `beta = beta_ratio * alpha`.
    LCurve { candidates: Vec<f64>, beta_ratio: f64 },
}

impl Default for WeightRule {
    fn default() -> Self {
        WeightRule::LCurve { candidates: log_grid(1e-6, 1.0, 7), beta_ratio: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InversionConfig {
    pub weights: WeightRule,
    /// Bounds on the real and imaginary part of every ROI pixel.
    pub bounds: (f64, f64),
    /// Stop once the update norm falls below `tau_rel * |chi^(n-1)|`.
    pub tau_rel: f64,
    /// Number of Born updates; 1 is the single-step Born inversion.
    pub max_iterations: usize,
}

impl Default for InversionConfig {
    fn default() -> Self {
        Self { weights: WeightRule::default(), bounds: (-10.0, 10.0), tau_rel: 1e-4, max_iterations: 10 }
    }
}

impl InversionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::invalid("M must be at least 1"));
        }
        if !(self.bounds.0 <= self.bounds.1) || !(self.tau_rel >= 0.0) {
            return Err(Error::invalid(format!("bad bounds {:?} or tau {}", self.bounds, self.tau_rel)));
        }
        match &self.weights {
            WeightRule::Fixed { alpha, beta } | WeightRule::Relative { alpha, beta } if *alpha >= 0.0 && *beta >= 0.0 => Ok(()),
            WeightRule::LCurve { candidates, beta_ratio } if !candidates.is_empty() && candidates.iter().all(|&c| c > 0.0) && *beta_ratio >= 0.0 => Ok(()),
            w => Err(Error::invalid(format!("unusable weight rule {w:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationLog {
    pub iteration: usize,
    pub residual_norm: f64,
    pub delta: f64,
    pub alpha: f64,
    pub beta: f64,
    pub solver_iterations: usize,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionResult {
    pub chi_hat: Vec<Complex64>,
    pub per_iteration: Vec<IterationLog>,
    pub iterations_used: usize,
    pub converged: bool,
    pub lcurve: Option<LcurveChoice>,
    /// Set when a later iteration failed; `chi_hat` is the last good iterate.
    pub failure: Option<String>,
}

struct Step {
    chi_sub: Vec<Complex64>,
    alpha: f64,
    beta: f64,
    solver_iterations: usize,
}

/// Shared Born loop: assemble around the previous iterate, restrict to the
/// ROI, solve one regularized linear problem, null the background.
fn born_loop<F>(
    obs: &Observation,
    channels: &[ChannelPair],
    pilots: &PilotBook,
    roi: &RoiIndexSet,
    max_iterations: usize,
    tau_rel: f64,
    mut solve: F,
) -> Result<ReconstructionResult>
where
    F: FnMut(usize, &crate::linalg::CMat, &[Complex64], f64) -> Result<Step>,
{
    if max_iterations == 0 {
        return Err(Error::invalid("M must be at least 1"));
    }
    let n = roi.n();
    if channels.first().is_some_and(|c| c.h1.nrows() != n) {
        return Err(Error::dim("ROI grid does not match the channels"));
    }
    let y = obs.stacked();
    let y_norm_sq: f64 = y.iter().map(|z| z.norm_sqr()).sum();
    let mut chi = vec![Complex64::new(0.0, 0.0); n];
    let mut chi_sub = vec![Complex64::new(0.0, 0.0); roi.p()];
    let mut logs = Vec::new();
    let mut converged = false;
    let mut failure = None;
    for it in 1..=max_iterations {
        let start = Instant::now();
        let attempt = (|| -> Result<(f64, Step)> {
            let tones = channels
                .iter()
                .zip(&pilots.x)
                .map(|(ch, x)| ToneOperator::assemble(&chi, ch, x))
                .collect::<Result<Vec<_>>>()?;
            let op = OperatorBundle::from_tones(tones, it == 1);
            if op.rows() != y.len() {
                return Err(Error::dim(format!("operator has {} rows, data {}", op.rows(), y.len())));
            }
            let gram = op.gram(&roi.indices);
            let aty = op.adjoint_apply(&roi.indices, &y)?;
            let step = solve(it, &gram, &aty, y_norm_sq)?;
            let pred = op.apply_columns(&roi.indices, &step.chi_sub);
            let res: Vec<Complex64> = pred.iter().zip(&y).map(|(a, b)| b - a).collect();
            Ok((vec_norm(&res), step))
        })();
        let (residual_norm, step) = match attempt {
            Ok(v) => v,
            Err(e) if it == 1 => return Err(e),
            Err(e) => {
                failure = Some(format!("iteration {it}: {e}"));
                break;
            }
        };
        let diff: Vec<Complex64> = step.chi_sub.iter().zip(&chi_sub).map(|(a, b)| a - b).collect();
        let delta = vec_norm(&diff);
        let prev_norm = vec_norm(&chi_sub);
        chi_sub = step.chi_sub;
        chi.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
        for (&p, &v) in roi.indices.iter().zip(&chi_sub) {
            chi[p] = v;
        }
        logs.push(IterationLog {
            iteration: it,
            residual_norm,
            delta,
            alpha: step.alpha,
            beta: step.beta,
            solver_iterations: step.solver_iterations,
            seconds: start.elapsed().as_secs_f64(),
        });
        if delta <= tau_rel * prev_norm {
            converged = true;
            break;
        }
    }
    Ok(ReconstructionResult {
        chi_hat: chi,
        iterations_used: logs.len(),
        per_iteration: logs,
        converged,
        lcurve: None,
        failure,
    })
}

/// Resolves the weight rule on the first Gram matrix.
fn choose_weights(
    rule: &WeightRule,
    gram: &crate::linalg::CMat,
    aty: &[Complex64],
    y_norm_sq: f64,
    laplacian: Option<&faer::Mat<f64>>,
) -> Result<(f64, f64, Option<LcurveChoice>)> {
    let scale = largest_eigenvalue_psd(gram.as_ref()).max(f64::MIN_POSITIVE);
    match rule {
        WeightRule::Fixed { alpha, beta } => Ok((*alpha, *beta, None)),
        WeightRule::Relative { alpha, beta } => Ok((alpha * scale, beta * scale, None)),
        WeightRule::LCurve { candidates, beta_ratio } => {
            let abs: Vec<f64> = candidates.iter().map(|c| c * scale).collect();
            let pts = lcurve_points_gram(gram, aty, y_norm_sq, laplacian.map(|l| (l, *beta_ratio)), &abs)?;
            let choice = lcurve_corner(&pts)?;
            let alpha = choice.weight;
            Ok((alpha, beta_ratio * alpha, Some(choice)))
        }
    }
}

/// ROI-constrained QP Born iteration.
///
/// The ROI and the regularization weights are fixed after the first
/// iteration; later iterations re-assemble the operator around the previous
/// (background-nulled) estimate.
pub fn roi_qp_reconstruct(
    obs: &Observation,
    channels: &[ChannelPair],
    pilots: &PilotBook,
    roi: &RoiIndexSet,
    config: &InversionConfig,
) -> Result<ReconstructionResult> {
    config.validate()?;
    let lap = roi_graph_laplacian(roi);
    let mut weights: Option<(f64, f64)> = None;
    let mut lcurve = None;
    let mut result = born_loop(obs, channels, pilots, roi, config.max_iterations, config.tau_rel, |_, gram, aty, yy| {
        let (alpha, beta) = match weights {
            Some(w) => w,
            None => {
                let (a, b, c) = choose_weights(&config.weights, gram, aty, yy, Some(&lap))?;
                lcurve = c;
                weights = Some((a, b));
                (a, b)
            }
        };
        let qp = QpProblem::new(gram, aty, yy, obs.stacked().len(), &lap, alpha, beta, config.bounds)?;
        let sol = solve_qp(&qp)?;
        Ok(Step { chi_sub: sol.chi(), alpha, beta, solver_iterations: sol.iterations })
    })?;
    result.lcurve = lcurve;
    Ok(result)
}

/// Born iteration with plain complex Tikhonov steps
/// `min |Y - A_sub chi|^2 + lambda |chi|^2`. `beta` of the rule is ignored.
pub fn tikhonov_bim(
    obs: &Observation,
    channels: &[ChannelPair],
    pilots: &PilotBook,
    roi: &RoiIndexSet,
    weights: &WeightRule,
    max_iterations: usize,
) -> Result<ReconstructionResult> {
    let mut lambda: Option<f64> = None;
    let mut lcurve = None;
    let rule = match weights {
        WeightRule::LCurve { candidates, .. } => WeightRule::LCurve { candidates: candidates.clone(), beta_ratio: 0.0 },
        WeightRule::Fixed { alpha, .. } => WeightRule::Fixed { alpha: *alpha, beta: 0.0 },
        WeightRule::Relative { alpha, .. } => WeightRule::Relative { alpha: *alpha, beta: 0.0 },
    };
    let mut result = born_loop(obs, channels, pilots, roi, max_iterations, 1e-4, |_, gram, aty, yy| {
        let l = match lambda {
            Some(l) => l,
            None => {
                let (a, _, c) = choose_weights(&rule, gram, aty, yy, None)?;
                lcurve = c;
                lambda = Some(a);
                a
            }
        };
        let p = aty.len();
        let h = faer::Mat::from_fn(p, p, |i, j| gram[(i, j)] + if i == j { l } else { 0.0 });
        let b = faer::Mat::from_fn(p, 1, |i, _| aty[i]);
        let x = solve_hpd(h.as_ref(), b.as_ref())?;
        Ok(Step { chi_sub: (0..p).map(|i| x[(i, 0)]).collect(), alpha: l, beta: 0.0, solver_iterations: 0 })
    })?;
    result.lcurve = lcurve;
    Ok(result)
}

impl ReconstructionResult {
    /// `pixel,re,im` for every pixel.
    pub fn chi_csv(&self) -> String {
        let mut out = String::from("pixel,re,im\n");
        for (p, z) in self.chi_hat.iter().enumerate() {
            let _ = writeln!(out, "{p},{:e},{:e}", z.re, z.im);
        }
        out
    }

    /// Per-iteration log without wall-clock times, so it is reproducible.
    pub fn iterations_csv(&self) -> String {
        let mut out = String::from("iteration,residual_norm,delta,alpha,beta,solver_iterations\n");
        for l in &self.per_iteration {
            let _ = writeln!(
                out,
                "{},{:e},{:e},{:e},{:e},{}",
                l.iteration, l.residual_norm, l.delta, l.alpha, l.beta, l.solver_iterations
            );
        }
        out
    }

    /// Run manifest with the configuration, seeds and ROI hash.
    pub fn manifest_json(&self, config: &InversionConfig, seeds: &[u64], roi: &RoiIndexSet) -> String {
        let v = serde_json::json!({
            "config": config,
            "seeds": seeds,
            "roi_pixels": roi.p(),
            "roi_sha256": roi.hash(),
            "iterations_used": self.iterations_used,
            "converged": self.converged,
            "failure": self.failure,
        });
        serde_json::to_string_pretty(&v).expect("manifest serializes")
    }
}
