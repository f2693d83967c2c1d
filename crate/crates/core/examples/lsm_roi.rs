//! Linear sampling support estimate of the triangle at 5 dB.

use csi_scatter::diagnostics::roi_quality;
use csi_scatter::scenarios::{ExperimentConfig, Workbench};

fn main() -> csi_scatter::Result<()> {
    let cfg = ExperimentConfig::layered(&ExperimentConfig::preset("nmse_snr")?, None, &["frequencies.tones=8".into()])?;
    let wb = Workbench::new(&cfg)?;
    let scene = wb.scene("triangle")?;
    for seed in 1..=3 {
        let res = wb.lsm(&scene, 5.0, seed)?;
        let roi = res.roi(scene.grid.side_pixels)?;
        let q = roi_quality(&roi, &scene.support)?;
        println!("seed {seed}: eta {:.3}, ROI {} of {} pixels, recall {:.3}, precision {:.3}", res.eta, roi.p(), roi.n(), q.recall, q.precision);
    }
    let roi = wb.lsm(&scene, 5.0, 1)?.roi(scene.grid.side_pixels)?;
    let side = scene.grid.side_pixels;
    for row in (0..side).rev().step_by(2) {
        let line: String = (0..side)
            .map(|c| match (roi.contains(row * side + c), scene.support.binary_search(&(row * side + c)).is_ok()) {
                (true, true) => '#',
                (true, false) => '+',
                (false, true) => 'x',
                _ => '.',
            })
            .collect();
        println!("{line}");
    }
    Ok(())
}
