use faer::Mat;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{gram, solve_hpd, CMat};

/// One point of an L-curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LcurvePoint {
    pub weight: f64,
    pub residual_norm: f64,
    pub solution_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LcurveChoice {
    pub weight: f64,
    pub index: usize,
    /// The curve had no usable corner and the fallback rule decided.
    pub fallback: bool,
    pub points: Vec<LcurvePoint>,
}

/// Signed Menger curvature of three points; positive for an L-shaped corner
/// traversed from the upper-left branch to the lower-right one.
fn menger(a: (f64, f64), b: (f64, f64), c: (f64, f64)) -> f64 {
    let cross = (b.0 - a.0) * (c.1 - a.1) - (c.0 - a.0) * (b.1 - a.1);
    let d = |p: (f64, f64), q: (f64, f64)| (p.0 - q.0).hypot(p.1 - q.1);
    let den = d(a, b) * d(b, c) * d(a, c);
    if den == 0.0 {
        0.0
    } else {
        2.0 * cross / den
    }
}

/// Picks the corner of an L-curve given points ordered by increasing weight.
///
/// The corner is the interior point of largest positive curvature in
/// `(log residual, log solution norm)`. When no interior point bends the
/// right way, the fallback takes the smallest residual among candidates
/// whose solution norm is within 10% of the smallest one.
pub fn lcurve_corner(points: &[LcurvePoint]) -> Result<LcurveChoice> {
    if points.is_empty() {
        return Err(Error::invalid("L-curve needs at least one candidate"));
    }
    let done = |index: usize, fallback: bool| LcurveChoice { weight: points[index].weight, index, fallback, points: points.to_vec() };
    if points.len() == 1 {
        return Ok(done(0, false));
    }
    let logs: Vec<(f64, f64)> = points
        .iter()
        .map(|p| (p.residual_norm.max(f64::MIN_POSITIVE).log10(), p.solution_norm.max(f64::MIN_POSITIVE).log10()))
        .collect();
    let mut best: Option<(usize, f64)> = None;
    for i in 1..points.len().saturating_sub(1) {
        let k = menger(logs[i - 1], logs[i], logs[i + 1]);
        if k.is_finite() && k > 1e-9 && best.is_none_or(|(_, b)| k > b) {
            best = Some((i, k));
        }
    }
    if let Some((i, _)) = best {
        return Ok(done(i, false));
    }
    let min_norm = points.iter().map(|p| p.solution_norm).fold(f64::INFINITY, f64::min);
    let i = (0..points.len())
        .filter(|&i| points[i].solution_norm <= 1.1 * min_norm)
        .min_by(|&a, &b| points[a].residual_norm.total_cmp(&points[b].residual_norm))
        .expect("the minimum-norm candidate qualifies");
    Ok(done(i, true))
}

/// L-curve points of `min |A x - y|^2 + w (|x|^2 + beta_ratio x^H L x)` from
/// the Gram matrix, for each candidate weight `w`.
pub fn lcurve_points_gram(
    gram: &CMat,
    aty: &[Complex64],
    y_norm_sq: f64,
    laplacian: Option<(&Mat<f64>, f64)>,
    candidates: &[f64],
) -> Result<Vec<LcurvePoint>> {
    let p = aty.len();
    let b = Mat::from_fn(p, 1, |i, _| aty[i]);
    candidates
        .iter()
        .map(|&w| {
            let h = Mat::from_fn(p, p, |i, j| {
                let mut v = gram[(i, j)];
                if i == j {
                    v += w;
                }
                if let Some((l, ratio)) = laplacian {
                    v += w * ratio * l[(i, j)];
                }
                v
            });
            let x = solve_hpd(h.as_ref(), b.as_ref())?;
            let gx = gram * &x;
            let xgx: f64 = (0..p).map(|i| (x[(i, 0)].conj() * gx[(i, 0)]).re).sum();
            let xb: f64 = (0..p).map(|i| (x[(i, 0)].conj() * b[(i, 0)]).re).sum();
            let res_sq = (y_norm_sq - 2.0 * xb + xgx).max(0.0);
            let sol = (0..p).map(|i| x[(i, 0)].norm_sqr()).sum::<f64>().sqrt();
            Ok(LcurvePoint { weight: w, residual_norm: res_sq.sqrt(), solution_norm: sol })
        })
        .collect()
}

/// Tikhonov L-curve selection for `min |A x - y|^2 + w |x|^2`.
pub fn lcurve_select(a_sub: &CMat, y: &[Complex64], candidates: &[f64]) -> Result<LcurveChoice> {
    if candidates.is_empty() {
        return Err(Error::invalid("L-curve needs at least one candidate"));
    }
    if candidates.len() == 1 {
        return lcurve_corner(&[LcurvePoint { weight: candidates[0], residual_norm: f64::NAN, solution_norm: f64::NAN }]);
    }
    if y.len() != a_sub.nrows() {
        return Err(Error::dim("data length does not match the operator"));
    }
    let g = gram(a_sub.as_ref());
    let aty: Vec<Complex64> = (0..a_sub.ncols()).map(|j| (0..a_sub.nrows()).map(|i| a_sub[(i, j)].conj() * y[i]).sum()).collect();
    let yy = y.iter().map(|z| z.norm_sqr()).sum();
    lcurve_corner(&lcurve_points_gram(&g, &aty, yy, None, candidates)?)
}

/// `count` log-spaced values from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.log10(), hi.log10());
    (0..count).map(|i| 10f64.powf(a + (b - a) * i as f64 / (count - 1) as f64)).collect()
}
