use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use num_complex::Complex64;
use sha2::{Digest, Sha256};

use super::config::{ExperimentConfig, Method, RoiMode};
use super::scene::{build_scene, enclosing_side, nmse, shrink_schedule, Scene};
use crate::diagnostics::{phase_mixing_mc, roi_quality, spectral_report};
use crate::error::{Error, Result};
use crate::forward::{make_pilots, multistatic_response, simulate_observations, simulate_refined, ChannelPair, NoiseSpec, Observation, OperatorBundle, PilotBook, Setup, ToneOperator};
use crate::inversion::{roi_qp_reconstruct, tikhonov_bim, ReconstructionResult, RoiIndexSet};
use crate::linalg::CMat;
use crate::lsm::{run_lsm, LsmResult};

/// Setup, channels and pilots shared by every cell of a run.
pub struct Workbench {
    pub config: ExperimentConfig,
    pub setup: Setup,
    pub channels: Vec<ChannelPair>,
    pub pilots: PilotBook,
}

pub fn noise_for(snr_db: f64) -> NoiseSpec {
    if snr_db == f64::INFINITY {
        NoiseSpec::None
    } else {
        NoiseSpec::SnrDb(snr_db)
    }
}

impl Workbench {
    pub fn new(config: &ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let setup = config.setup()?;
        let channels = setup.channels()?;
        let pilots = make_pilots(config.array.n_t, config.pilots.slots, config.frequencies.tones, config.pilots.seed)?;
        Ok(Self { config: config.clone(), setup, channels, pilots })
    }

    pub fn scene(&self, name: &str) -> Result<Scene> {
        build_scene(&self.config.scene_spec(name)?, self.setup.freqs.omega_c())
    }

    pub fn observe(&self, scene: &Scene, snr_db: f64, seed: u64) -> Result<Observation> {
        let noise = noise_for(snr_db);
        match self.config.experiment.refine_factor {
            1 => simulate_observations(&scene.contrast, &self.channels, &self.pilots, noise, seed),
            f => simulate_refined(&scene.contrast, &self.setup, f, &self.pilots, noise, seed),
        }
    }

    pub fn responses(&self, scene: &Scene, snr_db: f64, seed: u64) -> Result<Vec<CMat>> {
        self.channels
            .iter()
            .enumerate()
            .map(|(k, ch)| multistatic_response(&scene.contrast, ch, k, self.config.pilots.slots, noise_for(snr_db), seed))
            .collect()
    }

    pub fn lsm(&self, scene: &Scene, snr_db: f64, seed: u64) -> Result<LsmResult> {
        let u = self.responses(scene, snr_db, seed)?;
        let g2: Vec<&CMat> = self.channels.iter().map(|c| &c.g2_gamma).collect();
        run_lsm(&u, &g2, &self.config.lsm)
    }

    /// Tightest square of the shrink schedule.
    pub fn schedule_rois(&self, scene: &Scene) -> Result<Vec<RoiIndexSet>> {
        let e = &self.config.experiment;
        let l_min = match e.schedule_min_side {
            0 => enclosing_side(scene, e.schedule_margin)?,
            s => s,
        };
        shrink_schedule(scene.grid.side_pixels, l_min, e.schedule_steps)?.rois(scene)
    }

    pub fn roi(&self, mode: RoiMode, scene: &Scene, snr_db: f64, seed: u64) -> Result<RoiIndexSet> {
        let side = scene.grid.side_pixels;
        match mode {
            RoiMode::Full => Ok(RoiIndexSet::full(side)),
            RoiMode::Oracle => RoiIndexSet::new(scene.support.clone(), side),
            RoiMode::Schedule => self.schedule_rois(scene)?.pop().ok_or_else(|| Error::EmptyRoi("empty schedule".into())),
            RoiMode::Lsm => self.lsm(scene, snr_db, seed)?.roi(side),
        }
    }

    pub fn reconstruct(&self, method: Method, obs: &Observation, roi: &RoiIndexSet, iterations: usize) -> Result<ReconstructionResult> {
        let mut cfg = self.config.inversion_config()?;
        cfg.max_iterations = iterations;
        match method {
            Method::RoiQp => roi_qp_reconstruct(obs, &self.channels, &self.pilots, roi, &cfg),
            Method::TikhonovBim => tikhonov_bim(obs, &self.channels, &self.pilots, roi, &cfg.weights, iterations),
        }
    }

    /// Stacked operator around `chi` (zero gives the Born operator).
    pub fn operator(&self, chi: &[Complex64]) -> Result<OperatorBundle> {
        let tones = self
            .channels
            .iter()
            .zip(&self.pilots.x)
            .map(|(ch, x)| ToneOperator::assemble(chi, ch, x))
            .collect::<Result<Vec<_>>>()?;
        Ok(OperatorBundle::from_tones(tones, chi.iter().all(|z| z.norm() == 0.0)))
    }

    pub fn analysed_operator(&self, scene: &Scene) -> Result<OperatorBundle> {
        if self.config.experiment.operator_at_truth {
            self.operator(&scene.contrast.chi)
        } else {
            self.operator(&vec![Complex64::new(0.0, 0.0); scene.grid.len()])
        }
    }
}

/// A CSV table kept as formatted cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Self { name: name.into(), header: header.iter().map(|s| s.to_string()).collect(), rows: vec![] }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.join(","));
            out.push('\n');
        }
        out
    }

    pub fn from_csv(name: &str, text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header: Vec<String> = lines.next().ok_or_else(|| Error::Format("empty CSV".into()))?.split(',').map(String::from).collect();
        let rows = lines
            .filter(|l| !l.is_empty())
            .map(|l| {
                let r: Vec<String> = l.split(',').map(String::from).collect();
                if r.len() == header.len() {
                    Ok(r)
                } else {
                    Err(Error::Format(format!("row '{l}' has {} cells, header {}", r.len(), header.len())))
                }
            })
            .collect::<Result<_>>()?;
        Ok(Self { name: name.into(), header, rows })
    }

    /// Column as numbers.
    pub fn column_f64(&self, name: &str) -> Result<Vec<f64>> {
        let j = self.header.iter().position(|h| h == name).ok_or_else(|| Error::Format(format!("no column '{name}' in {}", self.name)))?;
        self.rows.iter().map(|r| r[j].parse::<f64>().map_err(|e| Error::Format(format!("{name}: {e}")))).collect()
    }

    pub fn column(&self, name: &str) -> Result<Vec<&str>> {
        let j = self.header.iter().position(|h| h == name).ok_or_else(|| Error::Format(format!("no column '{name}' in {}", self.name)))?;
        Ok(self.rows.iter().map(|r| r[j].as_str()).collect())
    }
}

fn num(x: f64) -> String {
    format!("{x}")
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub preset: String,
    pub config_hash: String,
    pub tables: Vec<Table>,
    /// Wall-clock seconds per stage; never written to CSV.
    pub timings: Vec<(String, f64)>,
    /// One message per failed cell.
    pub failures: Vec<String>,
}

impl ExperimentOutput {
    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }
}

/// Runs `f` over `items` on `workers` threads; results keep the input order.
fn par_map<T: Sync, R: Send>(items: &[T], workers: usize, f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let workers = match workers {
        0 => std::thread::available_parallelism().map_or(1, |n| n.get()),
        w => w,
    }
    .min(items.len().max(1));
    if workers <= 1 {
        return items.iter().map(f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<R>>> = items.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let r = f(&items[i]);
                *slots[i].lock().expect("slot lock") = Some(r);
            });
        }
    });
    slots.into_iter().map(|m| m.into_inner().expect("slot lock").expect("every item ran")).collect()
}

struct Timer(Vec<(String, f64)>);

impl Timer {
    fn time<T>(&mut self, label: impl Into<String>, f: impl FnOnce() -> T) -> T {
        let t = Instant::now();
        let r = f();
        self.0.push((label.into(), t.elapsed().as_secs_f64()));
        r
    }
}

/// Runs the preset named in `config.experiment.preset`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    config.validate()?;
    let preset = config.experiment.preset.clone();
    let mut timer = Timer(vec![]);
    let mut failures = vec![];
    let tables = match preset.as_str() {
        "fig2" => vec![fig2(config)?],
        "fig4" => vec![fig4(&Workbench::new(config)?, &mut timer)?],
        "fig5" => vec![fig5(&Workbench::new(config)?, &mut timer, &mut failures)?],
        "nmse_roi" => vec![nmse_roi(&Workbench::new(config)?, &mut timer, &mut failures)?],
        "nmse_snr" | "custom" => vec![nmse_snr(&Workbench::new(config)?, &mut timer, &mut failures)?],
        other => return Err(Error::Config(format!("unknown preset '{other}'"))),
    };
    Ok(ExperimentOutput { preset, config_hash: config.hash(), tables, timings: timer.0, failures })
}

fn fig2(config: &ExperimentConfig) -> Result<Table> {
    let e = &config.experiment;
    let run = phase_mixing_mc(&e.k_values, e.threshold, e.trials, e.seeds[0], None)?;
    let mut t = Table::new("fig2", &["k", "empirical_prob", "markov_bound", "mean_sq_zbar", "mean_sq_stderr"]);
    for r in &run.rows {
        t.push(vec![r.k.to_string(), num(r.empirical_prob), num(r.markov_bound), num(r.mean_sq_zbar), num(r.mean_sq_stderr)]);
    }
    Ok(t)
}

fn fig4(wb: &Workbench, timer: &mut Timer) -> Result<Table> {
    let scene = wb.scene(&wb.config.scene.name)?;
    let rois = wb.schedule_rois(&scene)?;
    let op = timer.time("fig4/operator", || wb.analysed_operator(&scene))?;
    let mut t = Table::new("fig4", &["roi_pixels", "side", "kappa", "sigma_min", "sigma_max"]);
    for roi in &rois {
        let rep = timer.time(format!("fig4/svd/P={}", roi.p()), || spectral_report(op.stacked_columns(&roi.indices).as_ref()))?;
        let side = (roi.p() as f64).sqrt().round() as usize;
        t.push(vec![roi.p().to_string(), side.to_string(), num(rep.kappa), num(rep.sigma_min), num(rep.sigma_max)]);
    }
    Ok(t)
}

/// Operation counts of one Born step on a `p`-pixel ROI.
pub fn complexity_counts(k: usize, slots: usize, n_r: usize, p: usize) -> (f64, f64, f64) {
    let (k, t, m, p) = (k as f64, slots as f64, n_r as f64, p as f64);
    let dense_gram = k * t * m * p * p;
    let factored_gram = k * (t + m) * p * p;
    let solve = (2.0 * p).powi(3) / 3.0;
    (dense_gram, factored_gram, solve)
}

fn fig5(wb: &Workbench, timer: &mut Timer, failures: &mut Vec<String>) -> Result<Table> {
    let e = &wb.config.experiment;
    let scene = wb.scene(&wb.config.scene.name)?;
    let rois = wb.schedule_rois(&scene)?;
    let snr = e.snr_db.first().copied().unwrap_or(30.0);
    let obs = wb.observe(&scene, snr, e.seeds[0])?;
    let method = e.methods[0];
    let mut t = Table::new("fig5", &["roi_pixels", "gram_flops_dense", "gram_flops_factored", "solve_flops", "solver_iterations", "nmse_db"]);
    for roi in &rois {
        let (dense, factored, solve) = complexity_counts(wb.setup.freqs.len(), wb.config.pilots.slots, wb.config.array.n_r, roi.p());
        let label = format!("fig5/{}/P={}", method.name(), roi.p());
        match timer.time(label.clone(), || wb.reconstruct(method, &obs, roi, wb.config.inversion.max_iterations)) {
            Ok(r) => {
                let it: usize = r.per_iteration.iter().map(|l| l.solver_iterations).sum();
                t.push(vec![roi.p().to_string(), num(dense), num(factored), num(solve), it.to_string(), num(nmse(&r.chi_hat, &scene.contrast.chi)?)]);
            }
            Err(err) => failures.push(format!("{label}: {err}")),
        }
    }
    Ok(t)
}

fn scene_names(wb: &Workbench) -> Vec<String> {
    std::iter::once(wb.config.scene.name.clone()).chain(wb.config.experiment.extra_scenes.iter().cloned()).collect()
}

fn nmse_roi(wb: &Workbench, timer: &mut Timer, failures: &mut Vec<String>) -> Result<Table> {
    let e = &wb.config.experiment;
    let snr = e.snr_db.first().copied().unwrap_or(30.0);
    let mut cells = vec![];
    for name in scene_names(wb) {
        for &seed in &e.seeds {
            cells.push((name.clone(), seed));
        }
    }
    let iterations = wb.config.inversion.max_iterations;
    let results = par_map(&cells, e.workers, |(name, seed)| -> Result<(Vec<Vec<String>>, Vec<String>, Vec<(String, f64)>)> {
        let scene = wb.scene(name)?;
        let obs = wb.observe(&scene, snr, *seed)?;
        let rois = wb.schedule_rois(&scene)?;
        let (mut rows, mut errs, mut times) = (vec![], vec![], vec![]);
        for &method in &e.methods {
            for roi in &rois {
                let t0 = Instant::now();
                let label = format!("nmse_roi/{name}/{}/seed={seed}/P={}", method.name(), roi.p());
                match wb.reconstruct(method, &obs, roi, iterations).and_then(|r| nmse(&r.chi_hat, &scene.contrast.chi)) {
                    Ok(db) => rows.push(vec![name.clone(), method.name().into(), seed.to_string(), num(snr), roi.p().to_string(), num(db)]),
                    Err(err) => errs.push(format!("{label}: {err}")),
                }
                times.push((label, t0.elapsed().as_secs_f64()));
            }
        }
        Ok((rows, errs, times))
    });
    let mut t = Table::new("nmse_roi", &["scene", "method", "seed", "snr_db", "roi_pixels", "nmse_db"]);
    for ((name, seed), r) in cells.iter().zip(results) {
        match r {
            Ok((rows, errs, times)) => {
                rows.into_iter().for_each(|row| t.push(row));
                failures.extend(errs);
                timer.0.extend(times);
            }
            Err(err) => failures.push(format!("nmse_roi/{name}/seed={seed}: {err}")),
        }
    }
    Ok(t)
}

fn nmse_snr(wb: &Workbench, timer: &mut Timer, failures: &mut Vec<String>) -> Result<Table> {
    let e = &wb.config.experiment;
    let mut cells = vec![];
    for name in scene_names(wb) {
        for &snr in &e.snr_db {
            for &seed in &e.seeds {
                cells.push((name.clone(), snr, seed));
            }
        }
    }
    let iterations = wb.config.inversion.max_iterations;
    let results = par_map(&cells, e.workers, |(name, snr, seed)| -> Result<(Vec<Vec<String>>, Vec<String>, Vec<(String, f64)>)> {
        let scene = wb.scene(name)?;
        let obs = wb.observe(&scene, *snr, *seed)?;
        let t0 = Instant::now();
        let roi = wb.roi(e.roi_mode, &scene, *snr, *seed)?;
        let mut times = vec![(format!("nmse_snr/{name}/snr={snr}/seed={seed}/roi"), t0.elapsed().as_secs_f64())];
        let q = roi_quality(&roi, &scene.support)?;
        let (mut rows, mut errs) = (vec![], vec![]);
        for &method in &e.methods {
            let t0 = Instant::now();
            let label = format!("nmse_snr/{name}/{}/snr={snr}/seed={seed}", method.name());
            match wb.reconstruct(method, &obs, &roi, iterations).and_then(|r| Ok((nmse(&r.chi_hat, &scene.contrast.chi)?, r))) {
                Ok((db, r)) => rows.push(vec![
                    name.clone(),
                    method.name().into(),
                    num(*snr),
                    seed.to_string(),
                    roi.p().to_string(),
                    num(q.recall),
                    num(q.precision),
                    num(db),
                    r.iterations_used.to_string(),
                    r.converged.to_string(),
                ]),
                Err(err) => errs.push(format!("{label}: {err}")),
            }
            times.push((label, t0.elapsed().as_secs_f64()));
        }
        Ok((rows, errs, times))
    });
    let mut t = Table::new(
        "nmse_snr",
        &["scene", "method", "snr_db", "seed", "roi_pixels", "recall", "precision", "nmse_db", "iterations", "converged"],
    );
    for ((name, snr, seed), r) in cells.iter().zip(results) {
        match r {
            Ok((rows, errs, times)) => {
                rows.into_iter().for_each(|row| t.push(row));
                failures.extend(errs);
                timer.0.extend(times);
            }
            Err(err) => failures.push(format!("nmse_snr/{name}/snr={snr}/seed={seed}: {err}")),
        }
    }
    Ok(t)
}

fn plot_script(table: &Table) -> String {
    let body = match table.name.as_str() {
        "fig2" => "ax.plot(d['k'], d['empirical_prob'], 'o-', label='Monte Carlo')\nax.plot(d['k'], np.clip(d['markov_bound'], 0, None), 's--', label='Markov bound')\nax.set_xlabel('K'); ax.set_ylabel('P(|zbar| <= threshold)')\n",
        "fig4" => "ax.semilogy(d['roi_pixels'], d['kappa'], 'o-', label='kappa')\nax.semilogy(d['roi_pixels'], d['sigma_min'], 's--', label='sigma_min')\nax.invert_xaxis(); ax.set_xlabel('ROI pixels')\n",
        "fig5" => "ax.semilogy(d['roi_pixels'], d['gram_flops_dense'] + d['solve_flops'], 'o-', label='operation count')\nax.invert_xaxis(); ax.set_xlabel('ROI pixels')\n",
        "nmse_roi" => "for key in sorted(set(zip(d['scene'], d['method']))):\n    m = (d['scene'] == key[0]) & (d['method'] == key[1])\n    px = np.unique(d['roi_pixels'][m])\n    ax.plot(px, [d['nmse_db'][m & (d['roi_pixels'] == p)].mean() for p in px], 'o-', label=' '.join(key))\nax.invert_xaxis(); ax.set_xlabel('ROI pixels'); ax.set_ylabel('NMSE (dB)')\n",
        _ => "for key in sorted(set(zip(d['scene'], d['method']))):\n    m = (d['scene'] == key[0]) & (d['method'] == key[1])\n    snr = np.unique(d['snr_db'][m])\n    ax.plot(snr, [d['nmse_db'][m & (d['snr_db'] == s)].mean() for s in snr], 'o-', label=' '.join(key))\nax.set_xlabel('SNR (dB)'); ax.set_ylabel('NMSE (dB)')\n",
    };
    format!(
        "import sys\nimport numpy as np\nimport matplotlib.pyplot as plt\n\nd = np.genfromtxt('{name}.csv', delimiter=',', names=True, dtype=None, encoding='utf-8')\nfig, ax = plt.subplots()\n{body}ax.grid(True, alpha=0.3)\nax.legend()\nfig.savefig(sys.argv[1] if len(sys.argv) > 1 else '{name}.png', dpi=150)\n",
        name = table.name
    )
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes `<table>.csv`, `<table>_plot.py`, `manifest.json` and `timing.json`.
pub fn emit_outputs(out: &ExperimentOutput, config: &ExperimentConfig, dir: &Path) -> Result<Vec<PathBuf>> {
    if out.tables.is_empty() {
        return Err(Error::invalid("nothing to write"));
    }
    fs::create_dir_all(dir)?;
    let mut written = vec![];
    let mut files = BTreeMap::new();
    for t in &out.tables {
        let csv = t.to_csv();
        let path = dir.join(format!("{}.csv", t.name));
        fs::write(&path, &csv)?;
        files.insert(format!("{}.csv", t.name), sha256_hex(csv.as_bytes()));
        written.push(path);
        let path = dir.join(format!("{}_plot.py", t.name));
        fs::write(&path, plot_script(t))?;
        written.push(path);
    }
    let manifest = serde_json::json!({
        "preset": out.preset,
        "config_hash": out.config_hash,
        "config": config.to_toml(),
        "pilot_seed": config.pilots.seed,
        "seeds": config.experiment.seeds,
        "files": files,
        "failures": out.failures,
    });
    let path = dir.join("manifest.json");
    fs::write(&path, serde_json::to_string_pretty(&manifest).expect("manifest serializes"))?;
    written.push(path);
    let timing: BTreeMap<&str, f64> = out.timings.iter().map(|(k, v)| (k.as_str(), *v)).collect();
    let path = dir.join("timing.json");
    fs::write(&path, serde_json::to_string_pretty(&timing).expect("timing serializes"))?;
    written.push(path);
    Ok(written)
}
