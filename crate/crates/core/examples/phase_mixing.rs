//! Monte Carlo of the multi-tone phase average against its Markov bound,
//! with and without the geometric phase of a real pixel pair.

use csi_scatter::diagnostics::{phase_mixing_mc, PhaseGeometry};
use csi_scatter::scenarios::{ExperimentConfig, Workbench};

fn main() -> csi_scatter::Result<()> {
    let ks = [1, 4, 8, 16, 32, 64, 128];
    let run = phase_mixing_mc(&ks, 0.25, 10_000, 42, None)?;
    print!("{}", run.to_csv());

    let wb = Workbench::new(&ExperimentConfig::default())?;
    let scene = wb.scene("circle")?;
    let points: Vec<_> = scene.support.iter().map(|&p| scene.grid.centers[p]).collect();
    let geom = PhaseGeometry { points, i: 0, j: scene.k_true() - 1, f_c: wb.setup.freqs.f_c, delta_f: wb.setup.freqs.delta_f };
    let run = phase_mixing_mc(&ks, 0.25, 10_000, 42, Some(&geom))?;
    println!("with geometric phases of two far-apart pixels inside the circle:");
    print!("{}", run.to_csv());
    Ok(())
}
