use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::scene::{SceneSpec, ShapeSpec};
use crate::em::{ArrayGeometry, FrequencyGrid, Grid2D};
use crate::error::{Error, Result};
use crate::forward::Setup;
use crate::inversion::{log_grid, InversionConfig, WeightRule};
use crate::lsm::LsmConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneSection {
    /// Built-in scene (`circle`, `triangle`, `t_shape`, `ellipses_0.3`,
    /// `ellipses_0.1`) or `custom` with explicit `shapes`.
    pub name: String,
    pub grid_pixels: usize,
    pub extent_m: f64,
    /// Added to every shape position.
    pub offset_m: [f64; 2],
    /// Replaces the built-in permittivity when set.
    pub eps_r: Option<f64>,
    pub shapes: Vec<ShapeSpec>,
}

impl Default for SceneSection {
    fn default() -> Self {
        Self { name: "triangle".into(), grid_pixels: 36, extent_m: 1.8, offset_m: [0.0, 0.0], eps_r: None, shapes: vec![] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArraySection {
    pub radius_m: f64,
    pub n_t: usize,
    pub n_r: usize,
}

impl Default for ArraySection {
    fn default() -> Self {
        Self { radius_m: 10.0, n_t: 60, n_r: 60 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FrequencySection {
    pub f_c_hz: f64,
    pub delta_f_hz: f64,
    pub tones: usize,
}

impl Default for FrequencySection {
    fn default() -> Self {
        Self { f_c_hz: 28e9, delta_f_hz: 100e6, tones: 32 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PilotSection {
    pub slots: usize,
    pub seed: u64,
}

impl Default for PilotSection {
    fn default() -> Self {
        Self { slots: 8, seed: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InversionSection {
    /// `lcurve`, `relative` or `fixed`.
    pub weights: String,
    pub alpha: f64,
    pub beta: f64,
    pub lcurve_lo: f64,
    pub lcurve_hi: f64,
    pub lcurve_count: usize,
    pub beta_ratio: f64,
    pub lower: f64,
    pub upper: f64,
    pub tau_rel: f64,
    pub max_iterations: usize,
}

impl Default for InversionSection {
    fn default() -> Self {
        Self {
            weights: "lcurve".into(),
            alpha: 1e-3,
            beta: 1e-4,
            lcurve_lo: 1e-6,
            lcurve_hi: 1.0,
            lcurve_count: 7,
            beta_ratio: 0.1,
            lower: -10.0,
            upper: 10.0,
            tau_rel: 1e-4,
            max_iterations: 10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoiMode {
    Lsm,
    Schedule,
    Full,
    Oracle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    RoiQp,
    TikhonovBim,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::RoiQp => "roi_qp",
            Method::TikhonovBim => "tikhonov_bim",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    pub preset: String,
    pub snr_db: Vec<f64>,
    pub roi_mode: RoiMode,
    pub methods: Vec<Method>,
    pub seeds: Vec<u64>,
    /// Extra scenes run by the NMSE presets, besides `[scene]`.
    pub extra_scenes: Vec<String>,
    pub schedule_steps: usize,
    /// Smallest schedule side; 0 derives it from the support plus `schedule_margin`.
    pub schedule_min_side: usize,
    pub schedule_margin: usize,
    /// Data-generation grid refinement (1 disables it).
    pub refine_factor: usize,
    /// Build the analysed operator around the true contrast instead of zero.
    pub operator_at_truth: bool,
    pub k_values: Vec<usize>,
    pub threshold: f64,
    pub trials: usize,
    /// Worker threads; 0 uses the available parallelism.
    pub workers: usize,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self {
            preset: "nmse_snr".into(),
            snr_db: vec![0.0, 5.0, 10.0, 20.0, 30.0],
            roi_mode: RoiMode::Lsm,
            methods: vec![Method::RoiQp, Method::TikhonovBim],
            seeds: vec![1],
            extra_scenes: vec![],
            schedule_steps: 8,
            schedule_min_side: 0,
            schedule_margin: 1,
            refine_factor: 1,
            operator_at_truth: true,
            k_values: vec![1, 2, 4, 8, 12, 16, 24, 32, 48, 64, 96, 128],
            threshold: 0.25,
            trials: 10_000,
            workers: 1,
        }
    }
}

/// Whole run description, one TOML section per field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scene: SceneSection,
    pub array: ArraySection,
    pub frequencies: FrequencySection,
    pub pilots: PilotSection,
    pub lsm: LsmConfig,
    pub inversion: InversionSection,
    pub experiment: ExperimentSection,
}

pub const PRESETS: [&str; 5] = ["fig2", "fig4", "fig5", "nmse_roi", "nmse_snr"];

impl ExperimentConfig {
    /// Defaults of a figure preset.
    pub fn preset(name: &str) -> Result<Self> {
        let mut c = Self::default();
        c.experiment.preset = name.to_string();
        match name {
            "fig2" => {}
            "fig4" | "fig5" => {
                c.scene.name = "circle".into();
                c.experiment.roi_mode = RoiMode::Schedule;
                c.experiment.snr_db = vec![30.0];
                c.experiment.methods = vec![Method::RoiQp];
                c.inversion.max_iterations = 1;
            }
            "nmse_roi" => {
                c.experiment.roi_mode = RoiMode::Schedule;
                c.experiment.snr_db = vec![30.0];
                c.experiment.extra_scenes = vec!["t_shape".into()];
                c.inversion.max_iterations = 1;
            }
            "nmse_snr" => {
                c.experiment.extra_scenes = vec!["t_shape".into()];
            }
            other => return Err(Error::Config(format!("unknown preset '{other}' (expected one of {PRESETS:?})"))),
        }
        Ok(c)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let c: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    /// Reads `text` on top of the defaults of `base`, then applies
    /// `section.key=value` overrides.
    pub fn layered(base: &Self, text: Option<&str>, overrides: &[String]) -> Result<Self> {
        let mut value = toml::Value::try_from(base).map_err(|e| Error::Config(e.to_string()))?;
        if let Some(text) = text {
            let file: toml::Table = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
            merge(&mut value, toml::Value::Table(file));
        }
        for o in overrides {
            let (path, raw) = o.split_once('=').ok_or_else(|| Error::Config(format!("override '{o}' is not key=value")))?;
            let parsed: toml::Table =
                toml::from_str(&format!("v = {raw}")).or_else(|_| toml::from_str(&format!("v = {:?}", raw.trim()))).map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
            let mut leaf = parsed["v"].clone();
            for key in path.trim().rsplit('.') {
                let mut t = toml::Table::new();
                t.insert(key.to_string(), leaf);
                leaf = toml::Value::Table(t);
            }
            merge(&mut value, leaf);
        }
        let c: Self = value.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical serialization.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml().as_bytes()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.scene.grid_pixels < 2 || !(self.scene.extent_m > 0.0) {
            return bad("[scene] needs grid_pixels >= 2 and extent_m > 0".into());
        }
        if self.array.n_t == 0 || self.array.n_r == 0 || !(self.array.radius_m > 0.0) {
            return bad("[array] needs n_t, n_r >= 1 and radius_m > 0".into());
        }
        if self.frequencies.tones == 0 || !(self.frequencies.f_c_hz > 0.0) || !(self.frequencies.delta_f_hz >= 0.0) {
            return bad("[frequencies] needs tones >= 1, f_c_hz > 0, delta_f_hz >= 0".into());
        }
        if self.pilots.slots == 0 {
            return bad("[pilots] slots must be at least 1".into());
        }
        self.lsm.validate().map_err(|e| Error::Config(format!("[lsm] {e}")))?;
        self.inversion_config()?.validate().map_err(|e| Error::Config(format!("[inversion] {e}")))?;
        let e = &self.experiment;
        if e.seeds.is_empty() || e.methods.is_empty() {
            return bad("[experiment] needs at least one seed and one method".into());
        }
        if e.snr_db.iter().any(|s| s.is_nan()) {
            return bad("[experiment] snr_db must not contain NaN".into());
        }
        if e.refine_factor == 0 || e.schedule_steps < 2 {
            return bad("[experiment] refine_factor >= 1 and schedule_steps >= 2 required".into());
        }
        if !PRESETS.contains(&e.preset.as_str()) && e.preset != "custom" {
            return bad(format!("[experiment] unknown preset '{}'", e.preset));
        }
        Ok(())
    }

    pub fn inversion_config(&self) -> Result<InversionConfig> {
        let s = &self.inversion;
        let weights = match s.weights.as_str() {
            "lcurve" => WeightRule::LCurve { candidates: log_grid(s.lcurve_lo, s.lcurve_hi, s.lcurve_count), beta_ratio: s.beta_ratio },
            "relative" => WeightRule::Relative { alpha: s.alpha, beta: s.beta },
            "fixed" => WeightRule::Fixed { alpha: s.alpha, beta: s.beta },
            other => return Err(Error::Config(format!("[inversion] weights '{other}' is not lcurve, relative or fixed"))),
        };
        Ok(InversionConfig { weights, bounds: (s.lower, s.upper), tau_rel: s.tau_rel, max_iterations: s.max_iterations })
    }

    pub fn scene_spec(&self, name: &str) -> Result<SceneSpec> {
        let mut spec = if name == "custom" {
            SceneSpec { name: "custom".into(), side_pixels: self.scene.grid_pixels, extent_m: self.scene.extent_m, shapes: self.scene.shapes.clone() }
        } else {
            SceneSpec::by_name(name)?
        };
        spec.side_pixels = self.scene.grid_pixels;
        spec.extent_m = self.scene.extent_m;
        if let Some(eps) = self.scene.eps_r {
            spec.shapes.iter_mut().for_each(|s| s.eps_r = eps);
        }
        Ok(spec.translated(self.scene.offset_m))
    }

    pub fn setup(&self) -> Result<Setup> {
        let grid = Grid2D::new(self.scene.grid_pixels, self.scene.extent_m)?;
        let array = ArrayGeometry::uca(self.array.radius_m, self.array.n_t, self.array.n_r, &grid)?;
        let freqs = FrequencyGrid::new(self.frequencies.f_c_hz, self.frequencies.delta_f_hz, self.frequencies.tones)?;
        Ok(Setup { grid, array, freqs })
    }
}

fn merge(base: &mut toml::Value, over: toml::Value) {
    match (base, over) {
        (toml::Value::Table(b), toml::Value::Table(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        for p in PRESETS {
            let c = ExperimentConfig::preset(p).unwrap();
            let back = ExperimentConfig::from_toml(&c.to_toml()).unwrap();
            assert_eq!(c, back);
        }
    }

    #[test]
    fn partial_file_and_overrides_layer_on_preset() {
        let base = ExperimentConfig::preset("nmse_snr").unwrap();
        let text = "[frequencies]\ntones = 4\n[experiment]\nsnr_db = [5.0, 30.0]\n";
        let over = vec!["inversion.max_iterations=3".to_string(), "scene.name=circle".to_string()];
        let c = ExperimentConfig::layered(&base, Some(text), &over).unwrap();
        assert_eq!(c.frequencies.tones, 4);
        assert_eq!(c.frequencies.f_c_hz, 28e9);
        assert_eq!(c.experiment.snr_db, vec![5.0, 30.0]);
        assert_eq!(c.inversion.max_iterations, 3);
        assert_eq!(c.scene.name, "circle");
    }

    #[test]
    fn bad_values_are_config_errors() {
        let base = ExperimentConfig::default();
        for o in ["inversion.max_iterations=0", "lsm.q_trim=0.7", "inversion.weights=\"magic\"", "nonsense.key=1"] {
            let r = ExperimentConfig::layered(&base, None, &[o.to_string()]);
            assert!(matches!(r, Err(Error::Config(_))), "{o}: {r:?}");
        }
        assert!(ExperimentConfig::preset("fig9").is_err());
    }

    #[test]
    fn hash_tracks_config() {
        let a = ExperimentConfig::default();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.pilots.seed = 2;
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn custom_scene_from_toml() {
        let text = r#"
[scene]
name = "custom"
[[scene.shapes]]
eps_r = 1.2
shape = { kind = "circle", center = [0.1, 0.0], radius = 0.2 }
"#;
        let c = ExperimentConfig::from_toml(text).unwrap();
        let spec = c.scene_spec("custom").unwrap();
        assert_eq!(spec.shapes.len(), 1);
    }
}
