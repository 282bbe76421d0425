use super::{
    intensity, AngularSpectrum, ComplexField, FieldError, GridSpec, IntensityImage, LgBasis,
};
use crate::state::PoincareState;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub const DEFAULT_FOCAL: f64 = 0.336;
pub const DEFAULT_TILT_DEG: f64 = 27.0;

/// Programmed tilted lens. `beta` is the Poincaré-frame angle; the physical
/// tilt axis sits at `beta/2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LensSpec {
    pub focal: f64,
    pub tilt: f64,
    pub beta: f64,
}

impl Default for LensSpec {
    fn default() -> Self {
        Self {
            focal: DEFAULT_FOCAL,
            tilt: DEFAULT_TILT_DEG.to_radians(),
            beta: 0.0,
        }
    }
}

impl LensSpec {
    pub fn new(focal: f64, tilt: f64, beta: f64) -> Result<Self, FieldError> {
        let l = Self { focal, tilt, beta };
        l.validate()?;
        Ok(l)
    }

    pub fn validate(&self) -> Result<(), FieldError> {
        if !(self.focal.is_finite() && self.focal > 0.0) {
            return Err(FieldError::InvalidLens(format!(
                "focal length {} must be positive",
                self.focal
            )));
        }
        if !(self.tilt >= 0.0 && self.tilt < std::f64::consts::FRAC_PI_2) {
            return Err(FieldError::InvalidLens(format!(
                "tilt {} rad must lie in [0, π/2)",
                self.tilt
            )));
        }
        if !self.beta.is_finite() {
            return Err(FieldError::InvalidLens("beta is not finite".into()));
        }
        Ok(())
    }

    pub fn with_beta(self, beta: f64) -> Self {
        Self { beta, ..self }
    }

    /// Same focal length with the tilt removed.
    pub fn untilted(self) -> Self {
        Self { tilt: 0.0, ..self }
    }
}

/// Transmission `exp[−i k Φ / 2f]`, `Φ = sec ξ·x_β² + cos ξ·y_β²`, with
/// `(x_β, y_β)` the frame rotated by `β/2`.
pub fn tilted_lens_mask(grid: &GridSpec, lens: &LensSpec) -> ComplexField {
    let k = grid.wavenumber();
    let (s, c) = (lens.beta / 2.0).sin_cos();
    let sec = 1.0 / lens.tilt.cos();
    let cos = lens.tilt.cos();
    let scale = -k / (2.0 * lens.focal);
    ComplexField::from_fn(*grid, |x, y| {
        let xb = c * x + s * y;
        let yb = -s * x + c * y;
        Complex64::from_polar(1.0, scale * (sec * xb * xb + cos * yb * yb))
    })
}

/// Image of `s` after the mask, `f + plane_offset` downstream, on the
/// same grid as the input field.
pub fn simulate_tilted_lens_measurement(
    grid: &GridSpec,
    s: &PoincareState,
    lens: &LensSpec,
    plane_offset: f64,
) -> Result<IntensityImage, FieldError> {
    lens.validate()?;
    let field = LgBasis::new(grid)
        .superpose(s)
        .multiply(&tilted_lens_mask(grid, lens));
    let out = AngularSpectrum::new(&field)?.propagate(lens.focal + plane_offset)?;
    Ok(intensity(&out))
}

/// Physical pipeline with a fine lens-plane grid and a camera that keeps the
/// central `camera_n × camera_n` window.
///
/// The propagated LG± pair is computed once per lens orientation; any
/// superposition is then a linear combination of the two.
#[derive(Debug, Clone)]
pub struct TiltedLensSim {
    lens_grid: GridSpec,
    camera_grid: GridSpec,
    basis: LgBasis,
}

/// Propagated, cropped LG± fields for one lens setting.
#[derive(Debug, Clone)]
pub struct CameraBasis {
    pub plus: ComplexField,
    pub minus: ComplexField,
}

impl CameraBasis {
    pub fn image(&self, s: &PoincareState) -> IntensityImage {
        let a = s.amplitudes();
        intensity(&self.plus.combine(a.c_plus(), &self.minus, a.c_minus()))
    }
}

impl TiltedLensSim {
    pub fn new(lens_grid: GridSpec, camera_n: usize) -> Result<Self, FieldError> {
        lens_grid.validate()?;
        if camera_n > lens_grid.n {
            return Err(FieldError::InvalidGrid(format!(
                "camera size {camera_n} exceeds lens grid {}",
                lens_grid.n
            )));
        }
        let window = camera_n as f64 * lens_grid.pitch;
        let camera_grid = GridSpec::new(
            camera_n,
            lens_grid.pitch,
            lens_grid.wavelength,
            window / 8.0,
        )?;
        Ok(Self {
            lens_grid,
            camera_grid,
            basis: LgBasis::new(&lens_grid),
        })
    }

    pub fn lens_grid(&self) -> &GridSpec {
        &self.lens_grid
    }

    pub fn camera_grid(&self) -> &GridSpec {
        &self.camera_grid
    }

    pub fn camera_basis(
        &self,
        lens: &LensSpec,
        plane_offset: f64,
    ) -> Result<CameraBasis, FieldError> {
        lens.validate()?;
        let mask = tilted_lens_mask(&self.lens_grid, lens);
        let z = lens.focal + plane_offset;
        let go = |f: &ComplexField| -> Result<ComplexField, FieldError> {
            let out = AngularSpectrum::new(&f.multiply(&mask))?.propagate(z)?;
            Ok(out.crop_center(self.camera_grid.n, self.camera_grid))
        };
        Ok(CameraBasis {
            plus: go(&self.basis.plus)?,
            minus: go(&self.basis.minus)?,
        })
    }

    pub fn measure(
        &self,
        s: &PoincareState,
        lens: &LensSpec,
        plane_offset: f64,
    ) -> Result<IntensityImage, FieldError> {
        Ok(self.camera_basis(lens, plane_offset)?.image(s))
    }
}
