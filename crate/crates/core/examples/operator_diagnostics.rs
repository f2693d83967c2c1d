//! Conditioning, coherence and CRLB of the stacked operator as the ROI
//! shrinks around the circle.

use csi_scatter::diagnostics::{coherence_split_operator, crlb_report, ncc_report_gram, spectral_report};
use csi_scatter::scenarios::{ExperimentConfig, Workbench};

fn main() -> csi_scatter::Result<()> {
    let overrides = ["frequencies.tones=8", "experiment.schedule_steps=5"].map(String::from);
    let cfg = ExperimentConfig::layered(&ExperimentConfig::preset("fig4")?, None, &overrides)?;
    let wb = Workbench::new(&cfg)?;
    let scene = wb.scene("circle")?;
    let op = wb.analysed_operator(&scene)?;
    println!("{:>6} {:>11} {:>11} {:>8} {:>11}", "P", "kappa", "sigma_min", "mu_eff", "CRLB");
    for roi in wb.schedule_rois(&scene)? {
        let a = op.stacked_columns(&roi.indices);
        let s = spectral_report(a.as_ref())?;
        let c = crlb_report(a.as_ref(), 1.0)?;
        let coh = ncc_report_gram(&op.gram(&roi.indices))?;
        println!("{:6} {:11.3e} {:11.3e} {:8.4} {:11.3e}", roi.p(), s.kappa, s.sigma_min, coh.mu_eff, c.crlb_spectral);
    }
    let split = coherence_split_operator(&op, &scene.support)?;
    println!("mean NCC: air-air {:.4}, scatterer-scatterer {:.4}", split.air.map_or(f64::NAN, |b| b.mean), split.asr.map_or(f64::NAN, |b| b.mean));
    Ok(())
}
