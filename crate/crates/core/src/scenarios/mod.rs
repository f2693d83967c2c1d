//! Scenes, ROI schedules, experiment configuration and figure presets.

mod config;
mod run;
mod scene;

pub use config::{
    ArraySection, ExperimentConfig, ExperimentSection, FrequencySection, InversionSection, Method, PilotSection, RoiMode, SceneSection, PRESETS,
};
pub use run::{complexity_counts, emit_outputs, noise_for, run_experiment, ExperimentOutput, Table, Workbench};
pub use scene::{
    build_scene, enclosing_side, equilateral_triangle, nmse, shrink_schedule, Scene, SceneSpec, Shape, ShapeSpec, ShrinkSchedule, NMSE_FLOOR_DB,
};
