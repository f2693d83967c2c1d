//! Command-line front end. The binary only forwards to [`run`].

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;

use crate::diagnostics::{air_bounds_csv, air_coherence_bound, coherence_split_operator, crlb_report, ncc_report_gram, roi_quality, spectral_report};
use crate::error::{Error, Result};
use crate::forward::io::{read_observation, write_observation};
use crate::inversion::RoiIndexSet;
use crate::scenarios::{emit_outputs, nmse, run_experiment, ExperimentConfig, Method, RoiMode, Scene, Workbench, PRESETS};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_PARTIAL: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "csi-scatter", version, about = "Multi-tone inverse scattering toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone)]
pub struct Common {
    /// TOML configuration; missing keys take the defaults.
    #[arg(long, short)]
    pub config: Option<PathBuf>,
    /// Override one key, e.g. `--set frequencies.tones=8`. Repeatable.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum RoiArg {
    Lsm,
    Schedule,
    Full,
    Oracle,
}

impl From<RoiArg> for RoiMode {
    fn from(r: RoiArg) -> Self {
        match r {
            RoiArg::Lsm => RoiMode::Lsm,
            RoiArg::Schedule => RoiMode::Schedule,
            RoiArg::Full => RoiMode::Full,
            RoiArg::Oracle => RoiMode::Oracle,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MethodArg {
    RoiQp,
    TikhonovBim,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Synthesize observations of the configured scene.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Output stem; writes `<stem>.json`, `.bin`, `.csv` and `<stem>_truth.csv`.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        snr_db: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Linear sampling indicator and ROI of the configured scene.
    Lsm {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        snr_db: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Reconstruct the contrast from a stored observation.
    Reconstruct {
        #[command(flatten)]
        common: Common,
        /// Observation stem written by `simulate`.
        #[arg(long)]
        observation: PathBuf,
        /// ROI CSV (`pixel` column); overrides `--roi-mode`.
        #[arg(long)]
        roi: Option<PathBuf>,
        #[arg(long, value_enum)]
        roi_mode: Option<RoiArg>,
        #[arg(long, value_enum, default_value = "roi-qp")]
        method: MethodArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Spectral, coherence and CRLB reports of the restricted operator.
    Diagnose {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        roi: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "full")]
        roi_mode: RoiArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a figure preset (fig2, fig4, fig5, nmse_roi, nmse_snr).
    Experiment {
        preset: String,
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
    },
}

fn load(common: &Common, preset: &str) -> Result<ExperimentConfig> {
    let base = ExperimentConfig::preset(preset)?;
    let text = match &common.config {
        Some(p) => Some(fs::read_to_string(p).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?),
        None => None,
    };
    ExperimentConfig::layered(&base, text.as_deref(), &common.overrides)
}

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, text)?;
    Ok(())
}

fn contrast_csv(chi: &[Complex64]) -> String {
    let mut out = String::from("pixel,re,im\n");
    for (p, z) in chi.iter().enumerate() {
        out.push_str(&format!("{p},{:e},{:e}\n", z.re, z.im));
    }
    out
}

fn pick_roi(wb: &Workbench, scene: &Scene, roi: Option<&PathBuf>, mode: RoiMode, snr: f64, seed: u64) -> Result<RoiIndexSet> {
    match roi {
        Some(p) => RoiIndexSet::from_csv(&fs::read_to_string(p)?, scene.grid.side_pixels),
        None => wb.roi(mode, scene, snr, seed),
    }
}

fn first_snr(cfg: &ExperimentConfig) -> f64 {
    cfg.experiment.snr_db.first().copied().unwrap_or(f64::INFINITY)
}

/// Executes one command and returns the process exit code. Progress and
/// summaries go to stdout, errors to stderr.
pub fn run(cli: Cli) -> i32 {
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) | Error::Io(_) | Error::Format(_) => EXIT_CONFIG,
                _ => EXIT_NUMERICAL,
            }
        }
    }
}

fn execute(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Simulate { common, out, snr_db, seed } => {
            let cfg = load(&common, "nmse_snr")?;
            let wb = Workbench::new(&cfg)?;
            let scene = wb.scene(&cfg.scene.name)?;
            let snr = snr_db.unwrap_or_else(|| first_snr(&cfg));
            let seed = seed.unwrap_or(cfg.experiment.seeds[0]);
            let obs = wb.observe(&scene, snr, seed)?;
            if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir)?;
            }
            write_observation(&out, &obs, &wb.setup.freqs.tones)?;
            let mut truth = out.as_os_str().to_owned();
            truth.push("_truth.csv");
            write(Path::new(&truth), &contrast_csv(&scene.contrast.chi))?;
            println!("scene {} with {} scatterer pixels, {} values, noise variance {:e}", scene_name(&cfg), scene.k_true(), obs.stacked().len(), obs.noise_var);
            Ok(EXIT_OK)
        }
        Command::Lsm { common, out, snr_db, seed } => {
            let cfg = load(&common, "nmse_snr")?;
            let wb = Workbench::new(&cfg)?;
            let scene = wb.scene(&cfg.scene.name)?;
            let snr = snr_db.unwrap_or_else(|| first_snr(&cfg));
            let res = wb.lsm(&scene, snr, seed.unwrap_or(cfg.experiment.seeds[0]))?;
            let roi = res.roi(scene.grid.side_pixels)?;
            fs::create_dir_all(&out)?;
            write(&out.join("lsm.csv"), &res.to_csv())?;
            write(&out.join("roi.csv"), &roi.to_csv())?;
            write(&out.join("roi.pgm"), &roi.to_pgm())?;
            let q = (!scene.support.is_empty()).then(|| roi_quality(&roi, &scene.support)).transpose()?;
            let summary = serde_json::json!({ "eta": res.eta, "roi_pixels": roi.p(), "degenerate": res.degenerate, "roi_sha256": roi.hash(), "quality": q });
            write(&out.join("lsm.json"), &serde_json::to_string_pretty(&summary).expect("json"))?;
            println!("eta {:.4}, ROI {} pixels{}", res.eta, roi.p(), q.map(|q| format!(", recall {:.3}, precision {:.3}", q.recall, q.precision)).unwrap_or_default());
            Ok(EXIT_OK)
        }
        Command::Reconstruct { common, observation, roi, roi_mode, method, out } => {
            let cfg = load(&common, "nmse_snr")?;
            let wb = Workbench::new(&cfg)?;
            let (obs, header) = read_observation(&observation)?;
            if header.tones_hz.len() != wb.setup.freqs.len() || header.slots != cfg.pilots.slots || header.n_r != cfg.array.n_r {
                return Err(Error::Config(format!(
                    "observation has {} tones, {} slots, {} receivers; configuration expects {}, {}, {}",
                    header.tones_hz.len(),
                    header.slots,
                    header.n_r,
                    wb.setup.freqs.len(),
                    cfg.pilots.slots,
                    cfg.array.n_r
                )));
            }
            let scene = wb.scene(&cfg.scene.name)?;
            let mode = roi_mode.map(RoiMode::from).unwrap_or(cfg.experiment.roi_mode);
            let roi = pick_roi(&wb, &scene, roi.as_ref(), mode, header.snr_db.unwrap_or(f64::INFINITY), header.seed)?;
            let method = match method {
                MethodArg::RoiQp => Method::RoiQp,
                MethodArg::TikhonovBim => Method::TikhonovBim,
            };
            let res = wb.reconstruct(method, &obs, &roi, cfg.inversion.max_iterations)?;
            fs::create_dir_all(&out)?;
            write(&out.join("chi_hat.csv"), &res.chi_csv())?;
            write(&out.join("iterations.csv"), &res.iterations_csv())?;
            write(&out.join("roi.csv"), &roi.to_csv())?;
            let inv = cfg.inversion_config()?;
            write(&out.join("manifest.json"), &res.manifest_json(&inv, &[cfg.pilots.seed, header.seed], &roi))?;
            let err = (!scene.support.is_empty()).then(|| nmse(&res.chi_hat, &scene.contrast.chi)).transpose()?;
            println!(
                "{} on {} pixels: {} iterations, converged {}{}",
                method.name(),
                roi.p(),
                res.iterations_used,
                res.converged,
                err.map(|d| format!(", NMSE {d:.2} dB against the configured scene")).unwrap_or_default()
            );
            if let Some(f) = &res.failure {
                eprintln!("stopped early: {f}");
                return Ok(EXIT_NUMERICAL);
            }
            Ok(EXIT_OK)
        }
        Command::Diagnose { common, roi, roi_mode, out } => {
            let cfg = load(&common, "fig4")?;
            let wb = Workbench::new(&cfg)?;
            let scene = wb.scene(&cfg.scene.name)?;
            let snr = first_snr(&cfg);
            let seed = cfg.experiment.seeds[0];
            let roi = pick_roi(&wb, &scene, roi.as_ref(), roi_mode.into(), snr, seed)?;
            let op = wb.analysed_operator(&scene)?;
            let a = op.stacked_columns(&roi.indices);
            fs::create_dir_all(&out)?;
            let spec = spectral_report(a.as_ref())?;
            write(&out.join("spectral.csv"), &spec.to_csv())?;
            let coh = ncc_report_gram(&op.gram(&roi.indices))?;
            write(&out.join("coherence.json"), &coh.summary_json())?;
            let noise_var = wb.observe(&scene, snr, seed)?.noise_var;
            let crlb = crlb_report(a.as_ref(), noise_var)?;
            drop(a);
            write(&out.join("crlb.json"), &serde_json::to_string_pretty(&crlb).expect("json"))?;
            let split = coherence_split_operator(&op, &scene.support)?;
            write(&out.join("coherence_split.json"), &serde_json::to_string_pretty(&split).expect("json"))?;
            let pairs = background_pairs(&scene);
            let air = air_coherence_bound(&op.tones[0], &scene.contrast.chi, &pairs)?;
            write(&out.join("air_bounds.csv"), &air_bounds_csv(&air))?;
            println!(
                "P = {}: kappa {:.3e}, sigma_min {:.3e}, mu_eff {:.3}, CRLB {:.3e}; air-air NCC {:.3}, scatterer NCC {:.3}",
                roi.p(),
                spec.kappa,
                spec.sigma_min,
                coh.mu_eff,
                crlb.crlb_spectral,
                split.air.map_or(f64::NAN, |b| b.mean),
                split.asr.map_or(f64::NAN, |b| b.mean)
            );
            Ok(EXIT_OK)
        }
        Command::Experiment { preset, common, out } => {
            if !PRESETS.contains(&preset.as_str()) {
                return Err(Error::Config(format!("unknown preset '{preset}' (expected one of {PRESETS:?})")));
            }
            let mut cfg = load(&common, &preset)?;
            // the positional preset wins over a `preset` key in the file
            cfg.experiment.preset = preset;
            let res = run_experiment(&cfg)?;
            let files = emit_outputs(&res, &cfg, &out)?;
            for t in &res.tables {
                println!("{}: {} rows", t.name, t.rows.len());
            }
            println!("wrote {} files to {}", files.len(), out.display());
            for f in &res.failures {
                eprintln!("failed: {f}");
            }
            Ok(if res.failures.is_empty() { EXIT_OK } else { EXIT_PARTIAL })
        }
    }
}

fn scene_name(cfg: &ExperimentConfig) -> &str {
    &cfg.scene.name
}

/// Adjacent, mid-range and far background pixel pairs from the first
/// background pixel.
fn background_pairs(scene: &Scene) -> Vec<(usize, usize)> {
    let side = scene.grid.side_pixels;
    let air: Vec<usize> = (0..scene.grid.len()).filter(|&p| scene.contrast.chi[p].norm() == 0.0).collect();
    let Some(&first) = air.first() else { return vec![] };
    let targets = [first + 1, first + side, first + side + 1, side * (side / 2), scene.grid.len() - 1];
    targets.into_iter().filter(|t| *t != first && air.binary_search(t).is_ok()).map(|t| (first, t)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("csi-scatter").chain(args.iter().copied())).unwrap()
    }

    const SMALL: [&str; 12] = [
        "--set",
        "scene.grid_pixels=12",
        "--set",
        "array.n_t=8",
        "--set",
        "array.n_r=8",
        "--set",
        "frequencies.tones=3",
        "--set",
        "pilots.slots=2",
        "--set",
        "inversion.max_iterations=2",
    ];

    fn with_small(mut head: Vec<String>) -> Vec<String> {
        head.extend(SMALL.iter().map(|s| s.to_string()));
        head
    }

    fn call(args: Vec<String>) -> i32 {
        let refs: Vec<&str> = args.iter().map(String::as_str).collect();
        run(parse(&refs))
    }

    #[test]
    fn simulate_then_reconstruct_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let stem = dir.path().join("obs/tri");
        let s = stem.to_str().unwrap().to_string();
        assert_eq!(call(with_small(vec!["simulate".into(), "--out".into(), s.clone(), "--snr-db".into(), "30".into()])), EXIT_OK);
        assert!(dir.path().join("obs/tri.bin").exists());
        let out = dir.path().join("rec");
        let args = vec!["reconstruct".into(), "--observation".into(), s, "--roi-mode".into(), "oracle".into(), "--out".into(), out.to_str().unwrap().into()];
        assert_eq!(call(with_small(args)), EXIT_OK);
        let chi = fs::read_to_string(out.join("chi_hat.csv")).unwrap();
        assert_eq!(chi.lines().count(), 145);
    }

    #[test]
    fn bad_config_exits_with_two() {
        assert_eq!(call(vec!["experiment".into(), "fig2".into(), "--set".into(), "lsm.q_trim=2".into(), "--out".into(), "/tmp/x".into()]), EXIT_CONFIG);
        assert_eq!(call(vec!["experiment".into(), "fig7".into(), "--out".into(), "/tmp/x".into()]), EXIT_CONFIG);
    }

    #[test]
    fn lsm_and_diagnose_write_reports() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("lsm");
        assert_eq!(call(with_small(vec!["lsm".into(), "--out".into(), out.to_str().unwrap().into()])), EXIT_OK);
        assert!(out.join("roi.pgm").exists());
        let diag = dir.path().join("diag");
        let args = vec!["diagnose".into(), "--roi".into(), out.join("roi.csv").to_str().unwrap().into(), "--out".into(), diag.to_str().unwrap().into()];
        assert_eq!(call(with_small(args)), EXIT_OK);
        for f in ["spectral.csv", "coherence.json", "crlb.json", "coherence_split.json", "air_bounds.csv"] {
            assert!(diag.join(f).exists(), "{f}");
        }
    }
}
