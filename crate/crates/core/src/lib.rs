//! Simulation and intensity-only tomography of first-order orbital angular
//! momentum superpositions.
//!
//! The crate models a two-dimensional OAM state `|θ, φ⟩` on the Poincaré
//! sphere, applies astigmatic mode conversion (as a matrix and as a sphere
//! rotation), renders the beam on a pixel grid, optionally through a tilted
//! lens and scalar diffraction, and reconstructs `(θ, φ)` from images alone
//! with two methods:
//!
//! * a converter-angle scan that maximizes HG visibility ([`tomography::method1_scan`]);
//! * three fixed images whose lobe orientations define half great circles on
//!   the sphere ([`tomography::estimate_state`]).
//!
//! The [`harness`] module drives the `oam-tomo` command-line tool.

pub mod analysis;
pub mod astig;
pub mod field;
pub mod harness;
pub mod io;
pub mod state;
pub mod tomography;

pub use analysis::{mode_orientation, AnalysisOptions, ImageReading};
pub use astig::{apply_mc, bloch_rotate, mc_unitary, Method1Reading};
pub use field::{GridSpec, IntensityImage, LensSpec};
pub use state::{fidelity, spherical_distance, PoincareState, UnitVector3};
