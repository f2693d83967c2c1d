//! Simulates the circle scene and checks that the sensing operator built
//! around the true contrast reproduces the observations.

use csi_scatter::forward::{noiseless_response, NoiseSpec};
use csi_scatter::linalg::vec_norm;
use csi_scatter::scenarios::{ExperimentConfig, Workbench};

fn main() -> csi_scatter::Result<()> {
    let base = ExperimentConfig::preset("nmse_snr")?;
    let cfg = ExperimentConfig::layered(&base, None, &["scene.name=circle".into(), "frequencies.tones=4".into()])?;
    let wb = Workbench::new(&cfg)?;
    let scene = wb.scene("circle")?;
    println!("{} pixels, {} inside the scatterer", scene.grid.len(), scene.k_true());

    let clean = noiseless_response(&scene.contrast, &wb.channels, &wb.pilots)?;
    let op = wb.operator(&scene.contrast.chi)?;
    for (k, (t, y)) in op.tones.iter().zip(&clean).enumerate() {
        let ay = t.apply(&scene.contrast.chi);
        let diff: Vec<_> = ay.iter().zip(y).map(|(a, b)| a - b).collect();
        println!("tone {k}: |y| = {:.3e}, relative operator mismatch {:.2e}", vec_norm(y), vec_norm(&diff) / vec_norm(y));
    }

    let noisy = csi_scatter::forward::simulate_observations(&scene.contrast, &wb.channels, &wb.pilots, NoiseSpec::SnrDb(10.0), 7)?;
    println!("10 dB stack: {} entries, noise variance {:.3e}", noisy.stacked().len(), noisy.noise_var);
    Ok(())
}
