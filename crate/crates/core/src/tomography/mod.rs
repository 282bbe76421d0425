//! State reconstruction from intensity images.
//!
//! Method I scans the converter angle for maximal HG visibility and inverts
//! the `(β_MC, α_HG)` pair. Method II intersects the half-great-circle loci
//! defined by three fixed measurements and picks a point of the resulting
//! spherical triangle.

mod estimate;
mod loci;
mod method1;
mod sources;

pub use estimate::{
    estimate_state, exact_reading, visibility_threshold_cap, Branch, EstimateOptions,
    TriangleEstimate,
};
pub use loci::{closest_approach, intersect_loci, measurement_locus, HalfGreatCircle};
pub use method1::{beta_grid, method1_scan, Method1Options, Method1Result, ScanPoint};
pub use sources::{
    calibrate_tilt, derive_seed, mask_for, AbstractSource, Calibration, DirSource, ImageSource,
    PhysicalSource, MIN_CALIBRATED_VISIBILITY,
};

use crate::analysis::AnalysisError;
use crate::astig::{bloch_rotate, bloch_rotate_inv, AstigError};
use crate::field::FieldError;
use crate::state::UnitVector3;
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_2;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TomographyError {
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Astig(#[from] AstigError),
    #[error("loci overlap along an arc; their intersection is not a point")]
    DegenerateOverlap,
    #[error("half-arcs do not intersect")]
    NoIntersection,
    #[error("{dropped} of 3 readings are below the visibility threshold")]
    TooManyBlind { dropped: usize },
    #[error("invalid converter-angle grid: {0}")]
    InvalidBetaGrid(String),
    #[error("invalid readings: {0}")]
    InvalidReadings(String),
    #[error("calibration failed: {0}")]
    CalibrationFailed(String),
    #[error("image source: {0}")]
    Source(String),
}

/// One of the three Method II measurements.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MeasurementKind {
    Direct,
    /// Converter at Poincaré angle `beta` (physical axis `beta/2`).
    Converter { beta: f64 },
}

impl MeasurementKind {
    /// Direct image, converter at 0° and converter at 90° (axis at 45°).
    pub fn standard() -> [MeasurementKind; 3] {
        [
            MeasurementKind::Direct,
            MeasurementKind::Converter { beta: 0.0 },
            MeasurementKind::Converter { beta: FRAC_PI_2 },
        ]
    }

    /// Sphere rotation performed before the image is taken.
    pub fn rotate(&self, n: &UnitVector3) -> UnitVector3 {
        match *self {
            MeasurementKind::Direct => *n,
            MeasurementKind::Converter { beta } => bloch_rotate(n, beta),
        }
    }

    pub fn rotate_inv(&self, n: &UnitVector3) -> UnitVector3 {
        match *self {
            MeasurementKind::Direct => *n,
            MeasurementKind::Converter { beta } => bloch_rotate_inv(n, beta),
        }
    }

    /// `direct`, or `mcNN` with NN the physical axis angle in degrees.
    pub fn file_tag(&self) -> String {
        match *self {
            MeasurementKind::Direct => "direct".into(),
            MeasurementKind::Converter { beta } => {
                format!("mc{:02}", (beta.to_degrees() / 2.0).round() as i64)
            }
        }
    }

    pub fn same_as(&self, other: &MeasurementKind) -> bool {
        match (self, other) {
            (MeasurementKind::Direct, MeasurementKind::Direct) => true,
            (MeasurementKind::Converter { beta: a }, MeasurementKind::Converter { beta: b }) => {
                crate::state::angle_diff(*a, *b).abs() < 1e-12
            }
            _ => false,
        }
    }
}
