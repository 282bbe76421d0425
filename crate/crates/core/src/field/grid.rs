use super::FieldError;
use serde::{Deserialize, Serialize};

pub const DEFAULT_N: usize = 256;
/// Beam waist at which the default tilted lens gives a quarter-wave Gouy split.
pub const DEFAULT_WAIST: f64 = 0.765e-3;
/// He-Ne line.
pub const DEFAULT_WAVELENGTH: f64 = 633e-9;
pub const DEFAULT_WINDOW_WAISTS: f64 = 8.0;

/// Square sampling grid. Lengths in metres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n: usize,
    pub pitch: f64,
    pub wavelength: f64,
    pub waist: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self::with_window(DEFAULT_N, DEFAULT_WINDOW_WAISTS, DEFAULT_WAVELENGTH, DEFAULT_WAIST)
            .expect("default grid is valid")
    }
}

impl GridSpec {
    pub fn new(n: usize, pitch: f64, wavelength: f64, waist: f64) -> Result<Self, FieldError> {
        let g = Self {
            n,
            pitch,
            wavelength,
            waist,
        };
        g.validate()?;
        Ok(g)
    }

    /// Grid whose window spans `window_waists` beam waists.
    pub fn with_window(
        n: usize,
        window_waists: f64,
        wavelength: f64,
        waist: f64,
    ) -> Result<Self, FieldError> {
        Self::new(n, window_waists * waist / n as f64, wavelength, waist)
    }

    /// Simulation-grid invariants: `n ≥ 64` and a power of two, window ≥ 6 waists.
    pub fn validate(&self) -> Result<(), FieldError> {
        let bad = |m: String| Err(FieldError::InvalidGrid(m));
        if self.n < 64 || !self.n.is_power_of_two() {
            return bad(format!("n = {} must be a power of two ≥ 64", self.n));
        }
        for (name, v) in [
            ("pitch", self.pitch),
            ("wavelength", self.wavelength),
            ("waist", self.waist),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{name} = {v} must be positive"));
            }
        }
        if self.window() < 6.0 * self.waist * (1.0 - 1e-12) {
            return bad(format!(
                "window {:.4e} m is narrower than 6 waists ({:.4e} m)",
                self.window(),
                6.0 * self.waist
            ));
        }
        Ok(())
    }

    pub fn window(&self) -> f64 {
        self.n as f64 * self.pitch
    }

    /// Pixel index of the optical axis (both row and column).
    pub fn center(&self) -> usize {
        self.n / 2
    }

    pub fn x(&self, col: usize) -> f64 {
        (col as f64 - self.center() as f64) * self.pitch
    }

    pub fn y(&self, row: usize) -> f64 {
        (self.center() as f64 - row as f64) * self.pitch
    }

    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn wavenumber(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.wavelength
    }

    pub fn rayleigh_range(&self) -> f64 {
        std::f64::consts::PI * self.waist * self.waist / self.wavelength
    }
}
