use crate::em::{greens_obs, ArrayGeometry, DomainKernel, FrequencyGrid, Grid2D};
use crate::error::Result;
use crate::linalg::CMat;

/// Grid, array and tones shared by every stage of a run.
#[derive(Debug, Clone)]
pub struct Setup {
    pub grid: Grid2D,
    pub array: ArrayGeometry,
    pub freqs: FrequencyGrid,
}

/// Free-space propagation matrices of one tone.
#[derive(Debug, Clone)]
pub struct ChannelPair {
    pub k_b: f64,
    /// `N x N_t`, Tx elements to pixels (incident fields per unit excitation).
    pub h1: CMat,
    /// `N_r x N`, pixels to Rx, weighted by the cell area.
    pub h2: CMat,
    /// `N_r x N`, point-source kernel from each pixel to the Rx elements.
    pub g2_gamma: CMat,
    pub domain: DomainKernel,
}

impl ChannelPair {
    pub fn new(grid: &Grid2D, array: &ArrayGeometry, k_b: f64) -> Result<Self> {
        let h1 = greens_obs(&array.tx_positions, &grid.centers, k_b, 1.0)?;
        let g2_gamma = greens_obs(&grid.centers, &array.rx_positions, k_b, 1.0)?;
        let h2 = &g2_gamma * faer::Scale(num_complex::Complex64::new(grid.cell_area, 0.0));
        let domain = DomainKernel::new(grid, k_b)?;
        Ok(Self { k_b, h1, h2, g2_gamma, domain })
    }
}

pub fn build_channels(setup: &Setup) -> Result<Vec<ChannelPair>> {
    (0..setup.freqs.len())
        .map(|k| ChannelPair::new(&setup.grid, &setup.array, setup.freqs.wavenumber(k)))
        .collect()
}

impl Setup {
    pub fn channels(&self) -> Result<Vec<ChannelPair>> {
        build_channels(self)
    }
}
