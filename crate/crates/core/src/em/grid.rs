use serde::{Deserialize, Serialize};

use super::Point;
use crate::error::{Error, Result};

/// Square pixel lattice centered at the origin.
///
/// Pixels are indexed row-major, `p = row * side + col`; row 0 is at the
/// lowest `y`, column 0 at the lowest `x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid2D {
    pub side_pixels: usize,
    pub extent_m: f64,
    pub centers: Vec<Point>,
    pub cell_area: f64,
}

impl Grid2D {
    pub fn new(side_pixels: usize, extent_m: f64) -> Result<Self> {
        if side_pixels == 0 || !(extent_m > 0.0) || !extent_m.is_finite() {
            return Err(Error::invalid(format!(
                "grid needs a positive pixel count and extent (got {side_pixels}, {extent_m})"
            )));
        }
        let h = extent_m / side_pixels as f64;
        let half = (side_pixels as f64 - 1.0) / 2.0;
        let mut centers = Vec::with_capacity(side_pixels * side_pixels);
        for row in 0..side_pixels {
            for col in 0..side_pixels {
                centers.push([(col as f64 - half) * h, (row as f64 - half) * h]);
            }
        }
        Ok(Self { side_pixels, extent_m, centers, cell_area: h * h })
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn cell_side(&self) -> f64 {
        self.extent_m / self.side_pixels as f64
    }

    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.side_pixels + col
    }

    pub fn row_col(&self, p: usize) -> (usize, usize) {
        (p / self.side_pixels, p % self.side_pixels)
    }

    /// Radius of the circle through the grid corners.
    pub fn circumradius(&self) -> f64 {
        self.extent_m / std::f64::consts::SQRT_2
    }

    /// The same physical extent with `factor` times as many pixels per side.
    pub fn refined(&self, factor: usize) -> Result<Self> {
        Self::new(self.side_pixels * factor, self.extent_m)
    }

    /// Continuous pixel coordinates `(row, col)` of a physical point.
    pub fn fractional_index(&self, pt: Point) -> (f64, f64) {
        let h = self.cell_side();
        let half = (self.side_pixels as f64 - 1.0) / 2.0;
        (pt[1] / h + half, pt[0] / h + half)
    }
}
