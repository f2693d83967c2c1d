use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::SPEED_OF_LIGHT;
use crate::error::{Error, Result};

/// Equally spaced probing tones centered on `f_c`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGrid {
    pub f_c: f64,
    pub delta_f: f64,
    pub tones: Vec<f64>,
}

impl FrequencyGrid {
    /// Tone `k` (1-based) sits at `f_c + (k - (K+1)/2) delta_f`.
    pub fn new(f_c: f64, delta_f: f64, count: usize) -> Result<Self> {
        if count == 0 {
            return Err(Error::invalid("tone count K must be at least 1"));
        }
        if !(f_c > 0.0) || !(delta_f >= 0.0) || !f_c.is_finite() || !delta_f.is_finite() {
            return Err(Error::invalid(format!(
                "center frequency must be positive and spacing nonnegative (f_c={f_c}, delta_f={delta_f})"
            )));
        }
        let mid = (count as f64 + 1.0) / 2.0;
        let tones: Vec<f64> = (1..=count).map(|k| f_c + (k as f64 - mid) * delta_f).collect();
        if tones[0] <= 0.0 {
            return Err(Error::invalid(format!("lowest tone {} Hz is not positive", tones[0])));
        }
        Ok(Self { f_c, delta_f, tones })
    }

    pub fn len(&self) -> usize {
        self.tones.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tones.is_empty()
    }

    pub fn omega(&self, k: usize) -> f64 {
        2.0 * PI * self.tones[k]
    }

    /// Background wavenumber of tone `k` (0-based), rad/m.
    pub fn wavenumber(&self, k: usize) -> f64 {
        self.omega(k) / SPEED_OF_LIGHT
    }

    pub fn omega_c(&self) -> f64 {
        2.0 * PI * self.f_c
    }

    /// The same grid restricted to the listed tone indices.
    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            f_c: self.f_c,
            delta_f: self.delta_f,
            tones: indices.iter().map(|&k| self.tones[k]).collect(),
        }
    }
}
