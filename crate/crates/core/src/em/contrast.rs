use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{Grid2D, VACUUM_PERMITTIVITY};
use crate::error::{Error, Result};

/// Complex contrast per pixel, frozen at the center frequency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContrastMap {
    pub chi: Vec<Complex64>,
    pub eps_r: Vec<f64>,
    pub sigma: Vec<f64>,
}

/// `chi = eps_r - 1 + j sigma / (eps0 omega)`.
pub fn contrast_value(eps_r: f64, sigma: f64, omega_c: f64) -> Complex64 {
    Complex64::new(eps_r - 1.0, sigma / (VACUUM_PERMITTIVITY * omega_c))
}

impl ContrastMap {
    pub fn from_materials(grid: &Grid2D, eps_r: Vec<f64>, sigma: Vec<f64>, omega_c: f64) -> Result<Self> {
        let n = grid.len();
        if eps_r.len() != n || sigma.len() != n {
            return Err(Error::dim(format!(
                "material maps have {} / {} entries for {n} pixels",
                eps_r.len(),
                sigma.len()
            )));
        }
        if !(omega_c > 0.0) {
            return Err(Error::invalid("center angular frequency must be positive"));
        }
        if let Some(p) = eps_r.iter().position(|&e| !(e >= 1.0) || !e.is_finite()) {
            return Err(Error::invalid(format!("eps_r[{p}] = {} is below 1", eps_r[p])));
        }
        if let Some(p) = sigma.iter().position(|&s| !(s >= 0.0) || !s.is_finite()) {
            return Err(Error::invalid(format!("sigma[{p}] = {} is negative", sigma[p])));
        }
        let chi = eps_r
            .iter()
            .zip(&sigma)
            .map(|(&e, &s)| if e == 1.0 && s == 0.0 { Complex64::new(0.0, 0.0) } else { contrast_value(e, s, omega_c) })
            .collect();
        Ok(Self { chi, eps_r, sigma })
    }

    pub fn vacuum(grid: &Grid2D) -> Self {
        let n = grid.len();
        Self { chi: vec![Complex64::new(0.0, 0.0); n], eps_r: vec![1.0; n], sigma: vec![0.0; n] }
    }

    pub fn len(&self) -> usize {
        self.chi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chi.is_empty()
    }

    /// Indices of pixels with nonzero contrast.
    pub fn support(&self) -> Vec<usize> {
        (0..self.chi.len()).filter(|&p| self.chi[p] != Complex64::new(0.0, 0.0)).collect()
    }
}

/// Builds the contrast map of a scene from per-pixel materials.
pub fn contrast_from_scene(grid: &Grid2D, materials: &[(f64, f64)], omega_c: f64) -> Result<ContrastMap> {
    let (eps_r, sigma) = materials.iter().copied().unzip();
    ContrastMap::from_materials(grid, eps_r, sigma, omega_c)
}
