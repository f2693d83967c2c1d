//! Physical constants, discretization, contrast and 2-D Green's functions.
//!
//! Time convention is `exp(+j omega t)`, so outgoing cylindrical waves are
//! `H0^(2)(k r)`.

pub mod array;
pub mod bessel;
pub mod contrast;
pub mod frequency;
pub mod greens;
pub mod grid;

pub use array::ArrayGeometry;
pub use contrast::{contrast_from_scene, contrast_value, ContrastMap};
pub use frequency::FrequencyGrid;
pub use greens::{greens_domain, greens_obs, self_term, DomainKernel};
pub use grid::Grid2D;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Vacuum permittivity, F/m.
pub const VACUUM_PERMITTIVITY: f64 = 8.854_187_812_8e-12;

/// A point in the plane, meters.
pub type Point = [f64; 2];

pub(crate) fn distance(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}
