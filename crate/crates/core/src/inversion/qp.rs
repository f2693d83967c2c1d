use faer::Mat;
use num_complex::Complex64;

use super::stack::{complex_to_real, realify_square};
use crate::error::{Error, Result};
use crate::linalg::{solve_hpd, solve_spd, CMat};

/// Relative KKT residual accepted by [`solve_qp`].
pub const KKT_TOL: f64 = 1e-8;
pub const MAX_ITERATIONS: usize = 10_000;

/// Box-constrained quadratic program of one Born step, with the residual
/// variable `d` eliminated:
///
/// `min 1/2 |A x - Y|^2 + alpha/2 |x|^2 + beta/2 x^T blkdiag(L, L) x`
/// subject to `lower <= x <= upper`, `x = [Re chi; Im chi]`.
///
/// The problem is stored through the complex Hermitian matrix
/// `H = A^H A + alpha I + beta L` and `b = A^H Y`; its real form is
/// `[[Re H, -Im H], [Im H, Re H]]`, `[Re b; Im b]`.
#[derive(Debug, Clone)]
pub struct QpProblem {
    pub hessian: CMat,
    pub linear: Vec<Complex64>,
    pub y_norm_sq: f64,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub alpha: f64,
    pub beta: f64,
    /// Length of the complex data stack `K T N_r`.
    pub rows: usize,
}

impl QpProblem {
    /// `gram = A^H A`, `aty = A^H Y`, `laplacian` on the ROI, per-component
    /// bounds applied to both real and imaginary parts.
    pub fn new(
        gram: &CMat,
        aty: &[Complex64],
        y_norm_sq: f64,
        rows: usize,
        laplacian: &Mat<f64>,
        alpha: f64,
        beta: f64,
        bounds: (f64, f64),
    ) -> Result<Self> {
        let p = gram.nrows();
        if gram.ncols() != p || aty.len() != p || laplacian.nrows() != p {
            return Err(Error::dim(format!(
                "QP blocks disagree: gram {}x{}, rhs {}, Laplacian {}",
                gram.nrows(),
                gram.ncols(),
                aty.len(),
                laplacian.nrows()
            )));
        }
        if !(alpha >= 0.0) || !(beta >= 0.0) || !(bounds.0 <= bounds.1) {
            return Err(Error::invalid(format!("need alpha, beta >= 0 and lower <= upper (got {alpha}, {beta}, {bounds:?})")));
        }
        let hessian = Mat::from_fn(p, p, |i, j| {
            let reg = if i == j { alpha } else { 0.0 } + beta * laplacian[(i, j)];
            gram[(i, j)] + reg
        });
        Ok(Self {
            hessian,
            linear: aty.to_vec(),
            y_norm_sq,
            lower: vec![bounds.0; 2 * p],
            upper: vec![bounds.1; 2 * p],
            alpha,
            beta,
            rows,
        })
    }

    pub fn p(&self) -> usize {
        self.linear.len()
    }

    /// The real `2P x 2P` Hessian.
    pub fn real_hessian(&self) -> Mat<f64> {
        realify_square(&self.hessian)
    }

    pub fn real_linear(&self) -> Vec<f64> {
        complex_to_real(&self.linear)
    }

    /// Objective value at a real point.
    pub fn objective(&self, h: &Mat<f64>, g: &[f64], x: &[f64]) -> f64 {
        let hx = matvec_real(h, x);
        0.5 * dot(x, &hx) - dot(g, x) + 0.5 * self.y_norm_sq
    }

    /// Block matrix `M = blkdiag(alpha I + beta blkdiag(L, L), I)` of the
    /// stacked variable `z = [x; d]`. Only sensible for small problems.
    pub fn explicit_m(&self, laplacian: &Mat<f64>) -> Mat<f64> {
        let p = self.p();
        let n = 2 * p + 2 * self.rows;
        Mat::from_fn(n, n, |i, j| {
            if i < 2 * p && j < 2 * p {
                let same_block = (i < p) == (j < p);
                let reg = if i == j { self.alpha } else { 0.0 };
                reg + if same_block { self.beta * laplacian[(i % p, j % p)] } else { 0.0 }
            } else if i == j {
                1.0
            } else {
                0.0
            }
        })
    }

    /// Equality-constraint matrix `R = [A~ | I]`.
    pub fn explicit_r(a_tilde: &Mat<f64>) -> Mat<f64> {
        let (m, q) = (a_tilde.nrows(), a_tilde.ncols());
        Mat::from_fn(m, q + m, |i, j| if j < q { a_tilde[(i, j)] } else if j - q == i { 1.0 } else { 0.0 })
    }

    /// Bounds of `z`, padded with infinities on the residual block.
    pub fn padded_bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let pad = 2 * self.rows;
        let lo = self.lower.iter().copied().chain(std::iter::repeat_n(f64::NEG_INFINITY, pad)).collect();
        let hi = self.upper.iter().copied().chain(std::iter::repeat_n(f64::INFINITY, pad)).collect();
        (lo, hi)
    }
}

#[derive(Debug, Clone)]
pub struct QpSolution {
    /// `[Re chi; Im chi]`.
    pub x: Vec<f64>,
    pub iterations: usize,
    pub kkt_residual: f64,
    pub active_bounds: usize,
}

impl QpSolution {
    pub fn chi(&self) -> Vec<Complex64> {
        super::stack::real_to_complex(&self.x)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn matvec_real(h: &Mat<f64>, x: &[f64]) -> Vec<f64> {
    let xm = Mat::from_fn(x.len(), 1, |i, _| x[i]);
    let y = h * &xm;
    (0..y.nrows()).map(|i| y[(i, 0)]).collect()
}

fn clip(x: &mut [f64], lo: &[f64], hi: &[f64]) {
    for ((v, &l), &u) in x.iter_mut().zip(lo).zip(hi) {
        *v = v.clamp(l, u);
    }
}

/// Relative norm of the projected gradient step `x - P(x - grad)`.
fn kkt(x: &[f64], grad: &[f64], g: &[f64], hx: &[f64], lo: &[f64], hi: &[f64]) -> f64 {
    let r: f64 = x
        .iter()
        .zip(grad)
        .zip(lo.iter().zip(hi))
        .map(|((&xi, &gi), (&l, &u))| (xi - (xi - gi).clamp(l, u)).powi(2))
        .sum::<f64>()
        .sqrt();
    r / norm(g).max(norm(hx)).max(f64::MIN_POSITIVE)
}

fn power_lipschitz(h: &Mat<f64>) -> f64 {
    let n = h.nrows();
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + 0.01 * (i % 13) as f64).collect();
    let mut lambda = 0.0;
    for _ in 0..100 {
        let w = matvec_real(h, &v);
        let nw = norm(&w);
        if nw == 0.0 {
            return 1.0;
        }
        let next = nw / norm(&v);
        v = w.into_iter().map(|x| x / nw).collect();
        if (next - lambda).abs() <= 1e-6 * next {
            lambda = next;
            break;
        }
        lambda = next;
    }
    // power iteration underestimates; a small margin keeps steps stable
    1.01 * lambda
}

/// Solves the box-constrained QP.
///
/// The unconstrained minimizer (Cholesky on the complex Hessian) is tried
/// first; when it violates the box, projected gradient with Nesterov momentum
/// and adaptive restart runs from its clipped version. Every 25 iterations
/// the free variables are re-solved exactly with the current active set held
/// fixed, which finishes the job once the active set has settled.
pub fn solve_qp(problem: &QpProblem) -> Result<QpSolution> {
    let p = problem.p();
    let g = problem.real_linear();
    let (lo, hi) = (&problem.lower, &problem.upper);
    let unconstrained = solve_hpd(problem.hessian.as_ref(), Mat::from_fn(p, 1, |i, _| problem.linear[i]).as_ref())
        .ok()
        .map(|m| complex_to_real(&(0..p).map(|i| m[(i, 0)]).collect::<Vec<_>>()));
    let h = problem.real_hessian();
    let mut x = unconstrained.clone().unwrap_or_else(|| vec![0.0; 2 * p]);
    let inside = x.iter().zip(lo.iter().zip(hi)).all(|(&v, (&l, &u))| v >= l && v <= u);
    clip(&mut x, lo, hi);
    let grad_at = |x: &[f64]| -> (Vec<f64>, Vec<f64>) {
        let hx = matvec_real(&h, x);
        let grad = hx.iter().zip(&g).map(|(a, b)| a - b).collect();
        (grad, hx)
    };
    let (grad, hx) = grad_at(&x);
    let mut res = kkt(&x, &grad, &g, &hx, lo, hi);
    if inside && unconstrained.is_some() && res <= KKT_TOL {
        return Ok(QpSolution { x, iterations: 0, kkt_residual: res, active_bounds: 0 });
    }
    let lip = power_lipschitz(&h);
    let step = 1.0 / lip;
    let mut y = x.clone();
    let mut x_prev = x.clone();
    let mut t = 1.0f64;
    let mut f_prev = problem.objective(&h, &g, &x);
    for it in 1..=MAX_ITERATIONS {
        let (gy, _) = grad_at(&y);
        let mut xn: Vec<f64> = y.iter().zip(&gy).map(|(a, b)| a - step * b).collect();
        clip(&mut xn, lo, hi);
        let f = problem.objective(&h, &g, &xn);
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        if f > f_prev {
            // restart momentum
            t = 1.0;
            y = x_prev.clone();
            continue;
        }
        let beta = (t - 1.0) / t_next;
        y = xn.iter().zip(&x_prev).map(|(a, b)| a + beta * (a - b)).collect();
        x_prev = xn;
        t = t_next;
        f_prev = f;
        if it % 25 == 0 {
            if let Some(polished) = polish(&h, &g, &x_prev, lo, hi) {
                let fp = problem.objective(&h, &g, &polished);
                if fp <= f_prev {
                    x_prev = polished;
                    y = x_prev.clone();
                    f_prev = fp;
                    t = 1.0;
                }
            }
        }
        let (grad, hx) = grad_at(&x_prev);
        res = kkt(&x_prev, &grad, &g, &hx, lo, hi);
        if res <= KKT_TOL {
            let active = x_prev.iter().zip(lo.iter().zip(hi)).filter(|(&v, (&l, &u))| v == l || v == u).count();
            return Ok(QpSolution { x: x_prev, iterations: it, kkt_residual: res, active_bounds: active });
        }
    }
    Err(Error::NotConverged { iterations: MAX_ITERATIONS, residual: res })
}

/// Exact minimizer over the free variables of `x` with bound variables
/// fixed, clipped back into the box.
fn polish(h: &Mat<f64>, g: &[f64], x: &[f64], lo: &[f64], hi: &[f64]) -> Option<Vec<f64>> {
    let free: Vec<usize> = (0..x.len()).filter(|&i| x[i] > lo[i] && x[i] < hi[i]).collect();
    if free.is_empty() {
        return None;
    }
    let fixed: Vec<usize> = (0..x.len()).filter(|&i| !(x[i] > lo[i] && x[i] < hi[i])).collect();
    let hff = Mat::from_fn(free.len(), free.len(), |i, j| h[(free[i], free[j])]);
    let rhs = Mat::from_fn(free.len(), 1, |i, _| {
        g[free[i]] - fixed.iter().map(|&j| h[(free[i], j)] * x[j]).sum::<f64>()
    });
    let sol = solve_spd(hff.as_ref(), rhs.as_ref()).ok()?;
    let mut out = x.to_vec();
    for (i, &f) in free.iter().enumerate() {
        out[f] = sol[(i, 0)];
    }
    clip(&mut out, lo, hi);
    Some(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inversion::stack::realify;
    use crate::linalg::gram;
    use crate::rng::{complex_gaussian, stream, Purpose};

    fn random_problem(seed: u64, m: usize, p: usize, alpha: f64, beta: f64, bounds: (f64, f64)) -> (QpProblem, CMat, Vec<Complex64>, Mat<f64>) {
        let mut rng = stream(seed, Purpose::Test, m, p);
        let a = Mat::from_fn(m, p, |_, _| complex_gaussian(&mut rng, 1.0));
        let y: Vec<_> = (0..m).map(|_| complex_gaussian(&mut rng, 1.0)).collect();
        let lap = Mat::from_fn(p, p, |i, j| {
            if i == j {
                (if i > 0 { 1.0 } else { 0.0 }) + (if i + 1 < p { 1.0 } else { 0.0 })
            } else if i.abs_diff(j) == 1 {
                -1.0
            } else {
                0.0
            }
        });
        let aty: Vec<_> = (0..p).map(|j| (0..m).map(|i| a[(i, j)].conj() * y[i]).sum()).collect();
        let yy = y.iter().map(|z| z.norm_sqr()).sum();
        let qp = QpProblem::new(&gram(a.as_ref()), &aty, yy, m, &lap, alpha, beta, bounds).unwrap();
        (qp, a, y, lap)
    }

    #[test]
    fn loose_box_matches_real_normal_equations() {
        let (qp, a, y, lap) = random_problem(1, 20, 6, 0.3, 0.05, (-10.0, 10.0));
        let (at, yt) = realify(&a, &y);
        let p = 6;
        let h = Mat::from_fn(2 * p, 2 * p, |i, j| {
            let ata: f64 = (0..at.nrows()).map(|r| at[(r, i)] * at[(r, j)]).sum();
            let same = (i < p) == (j < p);
            ata + if i == j { 0.3 } else { 0.0 } + if same { 0.05 * lap[(i % p, j % p)] } else { 0.0 }
        });
        let rhs = Mat::from_fn(2 * p, 1, |i, _| (0..at.nrows()).map(|r| at[(r, i)] * yt[r]).sum::<f64>());
        let want = solve_spd(h.as_ref(), rhs.as_ref()).unwrap();
        let got = solve_qp(&qp).unwrap();
        let diff: f64 = (0..2 * p).map(|i| (got.x[i] - want[(i, 0)]).powi(2)).sum::<f64>().sqrt();
        let nw: f64 = (0..2 * p).map(|i| want[(i, 0)].powi(2)).sum::<f64>().sqrt();
        assert!(diff <= 1e-8 * nw);
    }

    #[test]
    fn huge_alpha_gives_zero() {
        let (qp, ..) = random_problem(2, 10, 4, 1e14, 0.0, (-10.0, 10.0));
        let sol = solve_qp(&qp).unwrap();
        assert!(norm(&sol.x) < 1e-12);
    }

    #[test]
    fn scalar_upper_bound_clips() {
        // min 1/2 (y - a chi)^2 with a = 1, y = 3, chi <= 1
        let gram = Mat::from_fn(1, 1, |_, _| Complex64::new(1.0, 0.0));
        let lap = Mat::zeros(1, 1);
        let qp = QpProblem::new(&gram, &[Complex64::new(3.0, 0.0)], 9.0, 1, &lap, 0.0, 0.0, (-1.0, 1.0)).unwrap();
        let sol = solve_qp(&qp).unwrap();
        assert!((sol.x[0] - 1.0).abs() < 1e-12);
        assert!(sol.x[1].abs() < 1e-12);
    }

    #[test]
    fn tight_box_satisfies_kkt() {
        for seed in 0..10 {
            let (qp, ..) = random_problem(100 + seed, 15, 8, 1e-3, 1e-4, (-0.05, 0.05));
            let sol = solve_qp(&qp).unwrap();
            assert!(sol.kkt_residual <= KKT_TOL);
            assert!(sol.active_bounds > 0);
            // complementary slackness: gradient sign at bounds
            let h = qp.real_hessian();
            let g = qp.real_linear();
            let hx = matvec_real(&h, &sol.x);
            let scale = norm(&g);
            for i in 0..sol.x.len() {
                let gi = hx[i] - g[i];
                if sol.x[i] == -0.05 {
                    assert!(gi >= -1e-8 * scale);
                } else if sol.x[i] == 0.05 {
                    assert!(gi <= 1e-8 * scale);
                } else {
                    assert!(gi.abs() <= 1e-8 * scale);
                }
            }
        }
    }

    #[test]
    fn explicit_blocks_have_expected_shape() {
        let (qp, a, y, lap) = random_problem(5, 4, 3, 0.5, 0.1, (-1.0, 1.0));
        let (at, _) = realify(&a, &y);
        let m = qp.explicit_m(&lap);
        let r = QpProblem::explicit_r(&at);
        assert_eq!(m.nrows(), 2 * 3 + 2 * 4);
        assert_eq!((r.nrows(), r.ncols()), (8, 14));
        assert_eq!(m[(0, 0)], 0.5 + 0.1 * lap[(0, 0)]);
        assert_eq!(m[(0, 3)], 0.0);
        assert_eq!(m[(7, 7)], 1.0);
        let (lo, hi) = qp.padded_bounds();
        assert_eq!(lo.len(), 14);
        assert!(hi[13].is_infinite());
    }

    #[test]
    fn larger_alpha_never_lowers_data_residual() {
        let mut last = 0.0;
        for &alpha in &[1e-4, 1e-3, 1e-2, 1e-1, 1.0, 10.0] {
            let (qp, a, y, _) = random_problem(9, 12, 5, alpha, 0.0, (-10.0, 10.0));
            let chi = solve_qp(&qp).unwrap().chi();
            let r: f64 = (0..12).map(|i| ((0..5).map(|j| a[(i, j)] * chi[j]).sum::<Complex64>() - y[i]).norm_sqr()).sum();
            assert!(r >= last - 1e-12);
            last = r;
        }
    }
}
