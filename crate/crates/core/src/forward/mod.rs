//! Forward scattering model: pilots, channels, total fields, observations
//! and the Khatri-Rao sensing operator.

mod channels;
mod field;
pub mod io;
mod observation;
mod operator;
mod pilots;
mod refine;

pub use channels::{build_channels, ChannelPair, Setup};
pub use field::{spectral_radius, total_field_solve, total_fields, FieldSet};
pub use observation::{
    multistatic_response, noiseless_response, simulate_observations, NoiseSpec, Observation,
};
pub use operator::{assemble_operator, khatri_rao, OperatorBundle, ToneOperator};
pub use pilots::{make_pilots, PilotBook};
pub use refine::{resample_bilinear, simulate_refined};
