//! Transverse-field synthesis, the tilted-lens analyzer and scalar propagation.
//!
//! Coordinates: pixel `(row, col)` sits at `x = (col − n/2)·pitch`,
//! `y = (n/2 − row)·pitch`, so `y` points up when the image is viewed in file
//! order and the pixel `(n/2, n/2)` is the optical axis.

mod grid;
mod lens;
mod modes;
mod noise;
mod propagate;

pub use grid::{GridSpec, DEFAULT_N, DEFAULT_WAIST, DEFAULT_WAVELENGTH, DEFAULT_WINDOW_WAISTS};
pub use lens::{
    simulate_tilted_lens_measurement, tilted_lens_mask, CameraBasis, LensSpec, TiltedLensSim, DEFAULT_FOCAL,
    DEFAULT_TILT_DEG,
};
pub use modes::{
    hg_field, intensity, lg_field, superpose, Charge, ComplexField, IntensityImage, LgBasis,
};
pub use noise::{add_noise, NoiseModel};
pub use propagate::{propagate, AngularSpectrum, MAX_LOST_FRACTION};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FieldError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid lens: {0}")]
    InvalidLens(String),
    #[error("invalid image: {0}")]
    InvalidImage(String),
    #[error("field has zero power")]
    ZeroPower,
    #[error(
        "aliasing risk: {lost_fraction:.3e} of the spectral power lies outside the \
         band the transfer function samples correctly at z = {distance} m"
    )]
    AliasingRisk { lost_fraction: f64, distance: f64 },
}
