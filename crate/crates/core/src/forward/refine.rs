use num_complex::Complex64;

use super::{simulate_observations, NoiseSpec, Observation, PilotBook, Setup};
use crate::em::{ContrastMap, Grid2D};
use crate::error::{Error, Result};

fn bilinear<T>(coarse: &Grid2D, values: &[T], pt: [f64; 2]) -> T
where
    T: Copy + std::ops::Mul<f64, Output = T> + std::ops::Add<Output = T>,
{
    let s = coarse.side_pixels;
    let top = (s - 1) as f64;
    let (r, c) = coarse.fractional_index(pt);
    let (r, c) = (r.clamp(0.0, top), c.clamp(0.0, top));
    let (r0, c0) = (r.floor() as usize, c.floor() as usize);
    let (r1, c1) = ((r0 + 1).min(s - 1), (c0 + 1).min(s - 1));
    let (fr, fc) = (r - r0 as f64, c - c0 as f64);
    let at = |rr: usize, cc: usize| values[rr * s + cc];
    at(r0, c0) * ((1.0 - fr) * (1.0 - fc)) + at(r0, c1) * ((1.0 - fr) * fc) + at(r1, c0) * (fr * (1.0 - fc)) + at(r1, c1) * (fr * fc)
}

/// Resamples a contrast map onto another grid of the same extent by bilinear
/// interpolation between coarse pixel centers (clamped at the border).
pub fn resample_bilinear(coarse: &Grid2D, chi: &ContrastMap, fine: &Grid2D) -> Result<ContrastMap> {
    if chi.len() != coarse.len() {
        return Err(Error::dim("contrast does not match the coarse grid"));
    }
    if (coarse.extent_m - fine.extent_m).abs() > 1e-12 * coarse.extent_m {
        return Err(Error::invalid("grids must share the same extent"));
    }
    let mut out = ContrastMap::vacuum(fine);
    for (p, &pt) in fine.centers.iter().enumerate() {
        let z: Complex64 = bilinear(coarse, &chi.chi, pt);
        // exact zeros stay exact so the support is well defined
        if z.norm() > 0.0 {
            out.chi[p] = z;
            out.eps_r[p] = bilinear(coarse, &chi.eps_r, pt);
            out.sigma[p] = bilinear(coarse, &chi.sigma, pt);
        }
    }
    Ok(out)
}

/// Generates observations on a grid refined `factor` times, keeping the
/// array, tones and pilots of `setup`.
pub fn simulate_refined(
    chi: &ContrastMap,
    setup: &Setup,
    factor: usize,
    pilots: &PilotBook,
    noise: NoiseSpec,
    seed: u64,
) -> Result<Observation> {
    if factor == 0 {
        return Err(Error::invalid("refinement factor must be at least 1"));
    }
    let fine = setup.grid.refined(factor)?;
    let fine_chi = resample_bilinear(&setup.grid, chi, &fine)?;
    let fine_setup = Setup { grid: fine, array: setup.array.clone(), freqs: setup.freqs.clone() };
    let channels = fine_setup.channels()?;
    simulate_observations(&fine_chi, &channels, pilots, noise, seed)
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::em::{ArrayGeometry, FrequencyGrid};
    use crate::forward::{make_pilots, noiseless_response};
    use crate::linalg::vec_norm;

    #[test]
    fn constant_map_is_preserved() {
        let coarse = Grid2D::new(6, 0.6).unwrap();
        let fine = coarse.refined(2).unwrap();
        let mut chi = ContrastMap::vacuum(&coarse);
        chi.chi.iter_mut().for_each(|z| *z = Complex64::new(0.5, 0.1));
        chi.eps_r.iter_mut().for_each(|e| *e = 1.5);
        let out = resample_bilinear(&coarse, &chi, &fine).unwrap();
        assert!(out.chi.iter().all(|z| (z - Complex64::new(0.5, 0.1)).norm() < 1e-14));
        assert!(out.eps_r.iter().all(|e| (e - 1.5).abs() < 1e-14));
    }

    #[test]
    fn refined_data_is_close_to_nominal_for_smooth_contrast() {
        let grid = Grid2D::new(8, 0.4).unwrap();
        let array = ArrayGeometry::uca(2.0, 6, 6, &grid).unwrap();
        let freqs = FrequencyGrid::new(1e9, 50e6, 2).unwrap();
        let setup = Setup { grid: grid.clone(), array, freqs };
        let mut chi = ContrastMap::vacuum(&grid);
        for (p, c) in grid.centers.iter().enumerate() {
            let r2 = c[0] * c[0] + c[1] * c[1];
            chi.chi[p] = Complex64::new(0.2 * (-r2 / 0.02).exp(), 0.0);
        }
        let pilots = make_pilots(6, 3, 2, 1).unwrap();
        let nominal = noiseless_response(&chi, &setup.channels().unwrap(), &pilots).unwrap().concat();
        let fine = simulate_refined(&chi, &setup, 2, &pilots, NoiseSpec::None, 0).unwrap().stacked();
        let diff: Vec<_> = nominal.iter().zip(&fine).map(|(a, b)| a - b).collect();
        let rel = vec_norm(&diff) / vec_norm(&nominal);
        assert!(rel < 0.1, "{rel}");
        assert!(rel > 0.0);
    }
}
