use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{Grid2D, Point};
use crate::error::{Error, Result};

/// Uniform circular array on the observation curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrayGeometry {
    pub radius_m: f64,
    pub tx_positions: Vec<Point>,
    pub rx_positions: Vec<Point>,
}

fn ring(radius: f64, n: usize) -> Vec<Point> {
    (0..n)
        .map(|m| {
            let phi = 2.0 * PI * m as f64 / n as f64;
            [radius * phi.cos(), radius * phi.sin()]
        })
        .collect()
}

impl ArrayGeometry {
    /// Elements start at angle 0 and are uniformly spaced; with `n_t == n_r`
    /// the same elements transmit and receive.
    pub fn uca(radius_m: f64, n_t: usize, n_r: usize, grid: &Grid2D) -> Result<Self> {
        if n_t == 0 || n_r == 0 {
            return Err(Error::invalid("array needs at least one Tx and one Rx element"));
        }
        if !(radius_m > grid.circumradius()) {
            return Err(Error::invalid(format!(
                "array radius {radius_m} m does not enclose the grid (circumradius {:.3} m)",
                grid.circumradius()
            )));
        }
        Ok(Self { radius_m, tx_positions: ring(radius_m, n_t), rx_positions: ring(radius_m, n_r) })
    }

    pub fn n_t(&self) -> usize {
        self.tx_positions.len()
    }

    pub fn n_r(&self) -> usize {
        self.rx_positions.len()
    }
}
