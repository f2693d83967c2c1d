//! Box-constrained ROI reconstruction next to Tikhonov-regularized Born
//! iterations on the same data and ROI.

use csi_scatter::scenarios::{nmse, ExperimentConfig, Method, RoiMode, Workbench};

fn main() -> csi_scatter::Result<()> {
    let overrides = ["scene.grid_pixels=24", "scene.extent_m=1.2", "frequencies.tones=8", "inversion.max_iterations=4"].map(String::from);
    let cfg = ExperimentConfig::layered(&ExperimentConfig::preset("nmse_snr")?, None, &overrides)?;
    let wb = Workbench::new(&cfg)?;
    let scene = wb.scene("circle")?;
    let obs = wb.observe(&scene, 20.0, 3)?;
    for mode in [RoiMode::Full, RoiMode::Schedule] {
        let roi = wb.roi(mode, &scene, 20.0, 3)?;
        for method in [Method::RoiQp, Method::TikhonovBim] {
            let r = wb.reconstruct(method, &obs, &roi, cfg.inversion.max_iterations)?;
            println!(
                "{:>8?} P={:4} {:13} NMSE {:7.2} dB after {} iterations (converged: {})",
                mode,
                roi.p(),
                method.name(),
                nmse(&r.chi_hat, &scene.contrast.chi)?,
                r.iterations_used,
                r.converged
            );
            if let Some(lc) = &r.lcurve {
                println!("          L-curve picked alpha = {:.3e} (candidate {}){}", lc.weight, lc.index, if lc.fallback { ", fallback" } else { "" });
            }
        }
    }
    Ok(())
}
