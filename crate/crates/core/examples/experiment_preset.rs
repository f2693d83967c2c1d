//! Runs a (reduced) figure preset and writes its CSV, plot script and
//! manifest to a directory given as the first argument.

use std::path::PathBuf;

use csi_scatter::scenarios::{emit_outputs, run_experiment, ExperimentConfig};

fn main() -> csi_scatter::Result<()> {
    let dir = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("csi-scatter-fig2"));
    let cfg = ExperimentConfig::layered(&ExperimentConfig::preset("fig2")?, None, &["experiment.trials=2000".into()])?;
    let out = run_experiment(&cfg)?;
    for f in emit_outputs(&out, &cfg, &dir)? {
        println!("wrote {}", f.display());
    }
    print!("{}", out.table("fig2").expect("fig2 table").to_csv());
    Ok(())
}
