use std::f64::consts::PI;

use faer::Mat;
use num_complex::Complex64;

use super::bessel::{hankel2_0, hankel2_1};
use super::{distance, Grid2D, Point};
use crate::error::{Error, Result};
use crate::linalg::CMat;

const J: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Free-space kernel `(-j/4) k^2 H0^(2)(k d)`.
pub fn kernel(k_b: f64, d: f64) -> Complex64 {
    -0.25 * J * k_b * k_b * hankel2_0(k_b * d)
}

/// Kernel integrated over a disk of radius `a` centered on the observation
/// point: `-1 - (j pi / 2) k a H1^(2)(k a)`.
pub fn self_term(k_b: f64, a: f64) -> Complex64 {
    let ka = k_b * a;
    -1.0 - 0.5 * PI * J * ka * hankel2_1(ka)
}

/// Domain Green's matrix on the pixel grid.
///
/// Off-diagonal entries are the kernel at the pixel-center distance times the
/// cell area; the diagonal integrates the kernel over the disk of equal area.
pub fn greens_domain(grid: &Grid2D, k_b: f64) -> Result<CMat> {
    let kern = DomainKernel::new(grid, k_b)?;
    let n = grid.len();
    Ok(Mat::from_fn(n, n, |i, j| kern.entry(i, j)))
}

/// Lazily indexed domain Green's matrix.
///
/// Entries only depend on the lattice offset, so each distinct
/// `(|drow|, |dcol|)` pair is evaluated once and blocks are gathered from
/// the table.
#[derive(Debug, Clone)]
pub struct DomainKernel {
    side: usize,
    table: Vec<Complex64>,
}

impl DomainKernel {
    pub fn new(grid: &Grid2D, k_b: f64) -> Result<Self> {
        if !(k_b > 0.0) || !k_b.is_finite() {
            return Err(Error::invalid(format!("wavenumber must be positive, got {k_b}")));
        }
        if !(grid.cell_area > 0.0) {
            return Err(Error::invalid("zero cell area"));
        }
        let s = grid.side_pixels;
        let h = grid.cell_side();
        let mut table = Vec::with_capacity(s * s);
        for dr in 0..s {
            for dc in 0..s {
                table.push(if dr == 0 && dc == 0 {
                    self_term(k_b, h / PI.sqrt())
                } else {
                    kernel(k_b, h * (dr as f64).hypot(dc as f64)) * grid.cell_area
                });
            }
        }
        Ok(Self { side: s, table })
    }

    pub fn entry(&self, i: usize, j: usize) -> Complex64 {
        let s = self.side;
        let dr = (i / s).abs_diff(j / s);
        let dc = (i % s).abs_diff(j % s);
        self.table[dr * s + dc]
    }

    /// Submatrix with the given row and column pixel indices.
    pub fn block(&self, rows: &[usize], cols: &[usize]) -> CMat {
        Mat::from_fn(rows.len(), cols.len(), |i, j| self.entry(rows[i], cols[j]))
    }

    /// Number of pixels of the underlying grid.
    pub fn len(&self) -> usize {
        self.side * self.side
    }

    pub fn is_empty(&self) -> bool {
        self.side == 0
    }
}

/// Propagation matrix from `from` points to `to` points.
///
/// Entry `(i, j)` is the kernel from `from[j]` to `to[i]`, multiplied by
/// `source_area` (the cell area when the sources are pixels, 1 for point
/// sources).
pub fn greens_obs(from: &[Point], to: &[Point], k_b: f64, source_area: f64) -> Result<CMat> {
    if !(k_b > 0.0) || !k_b.is_finite() {
        return Err(Error::invalid(format!("wavenumber must be positive, got {k_b}")));
    }
    let mut m = Mat::zeros(to.len(), from.len());
    for (j, &a) in from.iter().enumerate() {
        for (i, &b) in to.iter().enumerate() {
            let d = distance(a, b);
            if d <= 1e-12 * (1.0 + a[0].abs().max(a[1].abs())) {
                return Err(Error::invalid(format!(
                    "coincident source {j} and observation point {i} at ({:.4}, {:.4})",
                    a[0], a[1]
                )));
            }
            m[(i, j)] = kernel(k_b, d) * source_area;
        }
    }
    Ok(m)
}
