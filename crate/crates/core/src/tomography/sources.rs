use super::{MeasurementKind, TomographyError};
use crate::analysis::{center_of_mass, mode_orientation, second_moments};
use crate::astig::apply_mc;
use crate::field::{
    add_noise, FieldError, intensity, GridSpec, IntensityImage, LensSpec, LgBasis, NoiseModel, TiltedLensSim,
};
use crate::io;
use crate::state::PoincareState;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::sync::Arc;

/// Provider of the direct image and converter images at any angle.
pub trait ImageSource: Sync {
    fn direct(&self) -> Result<IntensityImage, TomographyError>;
    fn converted(&self, beta: f64) -> Result<IntensityImage, TomographyError>;

    /// False when only recorded converter angles can be served.
    fn any_angle(&self) -> bool {
        true
    }

    fn image(&self, kind: MeasurementKind) -> Result<IntensityImage, TomographyError> {
        match kind {
            MeasurementKind::Direct => self.direct(),
            MeasurementKind::Converter { beta } => self.converted(beta),
        }
    }
}

/// SplitMix64 finalizer over `seed` and a per-image tag.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const DIRECT_TAG: u64 = u64::MAX;

fn beta_tag(beta: f64) -> u64 {
    beta.to_bits()
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Noise {
    model: NoiseModel,
    seed: u64,
}

impl Noise {
    fn apply(noise: &Option<Noise>, img: IntensityImage, tag: u64) -> IntensityImage {
        match noise {
            Some(n) => add_noise(&img, derive_seed(n.seed, tag), &n.model),
            None => img,
        }
    }
}

/// Ideal converter: the image of `apply_mc(s, β)` on the grid.
#[derive(Debug, Clone)]
pub struct AbstractSource {
    basis: Arc<LgBasis>,
    state: PoincareState,
    noise: Option<Noise>,
}

impl AbstractSource {
    pub fn new(grid: GridSpec, state: PoincareState) -> Self {
        Self::with_basis(Arc::new(LgBasis::new(&grid)), state)
    }

    /// Shares a precomputed basis between many sources.
    pub fn with_basis(basis: Arc<LgBasis>, state: PoincareState) -> Self {
        Self {
            basis,
            state,
            noise: None,
        }
    }

    pub fn with_noise(mut self, model: NoiseModel, seed: u64) -> Self {
        self.noise = Some(Noise { model, seed });
        self
    }
}

impl ImageSource for AbstractSource {
    fn direct(&self) -> Result<IntensityImage, TomographyError> {
        let img = intensity(&self.basis.superpose(&self.state));
        Ok(Noise::apply(&self.noise, img, DIRECT_TAG))
    }

    fn converted(&self, beta: f64) -> Result<IntensityImage, TomographyError> {
        let img = intensity(&self.basis.superpose(&apply_mc(&self.state, beta)));
        Ok(Noise::apply(&self.noise, img, beta_tag(beta)))
    }
}

/// Mask setting that realizes the converter at Poincaré angle `beta`.
///
/// With the `e^{+iφ}` charge convention and a converging mask, the lens axis
/// at `beta/2` retards the other HG eigenmode, so the mask is turned by a
/// further quarter turn.
pub fn mask_for(lens: &LensSpec, beta: f64) -> LensSpec {
    lens.with_beta(beta + PI)
}

/// Tilted-lens converter with scalar propagation to the camera plane.
/// The direct image uses the same lens with zero tilt.
#[derive(Debug, Clone)]
pub struct PhysicalSource {
    sim: Arc<TiltedLensSim>,
    lens: LensSpec,
    plane_offset: f64,
    state: PoincareState,
    noise: Option<Noise>,
}

impl PhysicalSource {
    pub fn new(
        sim: Arc<TiltedLensSim>,
        lens: LensSpec,
        plane_offset: f64,
        state: PoincareState,
    ) -> Self {
        Self {
            sim,
            lens,
            plane_offset,
            state,
            noise: None,
        }
    }

    pub fn with_noise(mut self, model: NoiseModel, seed: u64) -> Self {
        self.noise = Some(Noise { model, seed });
        self
    }
}

impl ImageSource for PhysicalSource {
    fn direct(&self) -> Result<IntensityImage, TomographyError> {
        let img = self
            .sim
            .measure(&self.state, &self.lens.untilted(), self.plane_offset)?;
        Ok(Noise::apply(&self.noise, img, DIRECT_TAG))
    }

    fn converted(&self, beta: f64) -> Result<IntensityImage, TomographyError> {
        let img = self
            .sim
            .measure(&self.state, &mask_for(&self.lens, beta), self.plane_offset)?;
        Ok(Noise::apply(&self.noise, img, beta_tag(beta)))
    }
}

/// Images read from a directory.
///
/// Method II files: `<prefix>_direct`, `<prefix>_mc00`, `<prefix>_mc45`.
/// Scan files: `direct` and `beta_<degrees>`, e.g. `beta_012.0`.
/// Each as `.pgm` or `.png`.
#[derive(Debug, Clone)]
pub struct DirSource {
    dir: PathBuf,
    prefix: Option<String>,
    grid: Option<GridSpec>,
    scan: Vec<(f64, PathBuf)>,
}

impl DirSource {
    pub fn new(
        dir: &Path,
        prefix: Option<&str>,
        grid: Option<GridSpec>,
    ) -> Result<Self, TomographyError> {
        if !dir.is_dir() {
            return Err(TomographyError::Source(format!(
                "{} is not a directory",
                dir.display()
            )));
        }
        let mut scan = Vec::new();
        let entries = std::fs::read_dir(dir)
            .map_err(|e| TomographyError::Source(format!("{}: {e}", dir.display())))?;
        for entry in entries.flatten() {
            let path = entry.path();
            let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
            if !matches!(ext.to_ascii_lowercase().as_str(), "pgm" | "png") {
                continue;
            }
            let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("");
            if let Some(deg) = stem.strip_prefix("beta_").and_then(|d| d.parse::<f64>().ok()) {
                if !scan.iter().any(|(b, _)| *b == deg.to_radians()) {
                    scan.push((deg.to_radians(), path));
                }
            }
        }
        scan.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(Self {
            dir: dir.to_path_buf(),
            prefix: prefix.map(str::to_string),
            grid,
            scan,
        })
    }

    /// Converter angles available for a scan, ascending.
    pub fn betas(&self) -> Vec<f64> {
        self.scan.iter().map(|(b, _)| *b).collect()
    }

    fn stem(&self, tag: &str) -> String {
        match &self.prefix {
            Some(p) => format!("{p}_{tag}"),
            None => tag.to_string(),
        }
    }

    fn load(&self, stem: &str) -> Result<IntensityImage, TomographyError> {
        let path = io::find_image(&self.dir, stem).ok_or_else(|| {
            TomographyError::Source(format!(
                "missing {stem}.pgm or {stem}.png in {}",
                self.dir.display()
            ))
        })?;
        io::read_image(&path, self.grid).map_err(|e| TomographyError::Source(e.to_string()))
    }
}

impl ImageSource for DirSource {
    fn any_angle(&self) -> bool {
        false
    }

    fn direct(&self) -> Result<IntensityImage, TomographyError> {
        self.load(&self.stem("direct"))
    }

    fn converted(&self, beta: f64) -> Result<IntensityImage, TomographyError> {
        if let Some((_, path)) = self
            .scan
            .iter()
            .find(|(b, _)| crate::state::angle_diff(*b, beta).abs() < 1e-9)
        {
            return io::read_image(path, self.grid)
                .map_err(|e| TomographyError::Source(e.to_string()));
        }
        let kind = MeasurementKind::Converter { beta };
        self.load(&self.stem(&kind.file_tag()))
    }
}

/// Result of the camera-plane calibration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "CalibrationRecord", from = "CalibrationRecord")]
pub struct Calibration {
    pub lens: LensSpec,
    pub plane_offset: f64,
    /// Visibility of the converted LG+ image at the calibrated plane.
    pub visibility: f64,
    /// Its lobe orientation.
    pub alpha: f64,
}

#[derive(Serialize, Deserialize)]
struct CalibrationRecord {
    focal_mm: f64,
    tilt_deg: f64,
    plane_offset_mm: f64,
    visibility: f64,
    alpha_deg: f64,
}

impl From<Calibration> for CalibrationRecord {
    fn from(c: Calibration) -> Self {
        Self {
            focal_mm: c.lens.focal * 1e3,
            tilt_deg: c.lens.tilt.to_degrees(),
            plane_offset_mm: c.plane_offset * 1e3,
            visibility: c.visibility,
            alpha_deg: c.alpha.to_degrees(),
        }
    }
}

impl From<CalibrationRecord> for Calibration {
    fn from(r: CalibrationRecord) -> Self {
        Self {
            lens: LensSpec {
                focal: r.focal_mm * 1e-3,
                tilt: r.tilt_deg.to_radians(),
                beta: 0.0,
            },
            plane_offset: r.plane_offset_mm * 1e-3,
            visibility: r.visibility,
            alpha: r.alpha_deg.to_radians(),
        }
    }
}

pub const MIN_CALIBRATED_VISIBILITY: f64 = 0.9;

/// Log-ratio of the LG+ image's second moments along the two lens axes.
fn axis_balance(sim: &TiltedLensSim, lens: &LensSpec, offset: f64) -> Result<f64, TomographyError> {
    let img = sim.measure(&PoincareState::north(), lens, offset)?;
    let com = center_of_mass(&img)?;
    let [xx, xy, yy] = second_moments(&img, com)?;
    let (s, c) = (lens.beta / 2.0).sin_cos();
    let along = xx * c * c + 2.0 * xy * s * c + yy * s * s;
    let across = xx * s * s - 2.0 * xy * s * c + yy * c * c;
    Ok((along / across).ln())
}

/// Finds the camera plane between the two line foci where the converted
/// LG+ beam is equally wide along both lens axes, and checks that it forms
/// a clean two-lobe pattern there (visibility ≥ 0.9).
pub fn calibrate_tilt(sim: &TiltedLensSim, lens: &LensSpec) -> Result<Calibration, TomographyError> {
    lens.validate()?;
    let mask = mask_for(lens, 0.0);
    let f = lens.focal;
    let lo = -0.8 * f * (1.0 - lens.tilt.cos());
    let hi = 0.8 * f * (1.0 / lens.tilt.cos() - 1.0);
    if !(hi - lo > 1e-6) {
        return Err(TomographyError::CalibrationFailed(
            "an untilted lens has no astigmatic focus".into(),
        ));
    }
    let steps = 16;
    let offsets: Vec<f64> = (0..=steps)
        .map(|i| lo + (hi - lo) * i as f64 / steps as f64)
        .collect();
    // planes the grid cannot propagate to are left out of the bracket search
    let scores: Vec<Option<f64>> = offsets
        .iter()
        .map(|&z| match axis_balance(sim, &mask, z) {
            Ok(v) => Ok(Some(v)),
            Err(TomographyError::Field(FieldError::AliasingRisk { .. })) => Ok(None),
            Err(e) => Err(e),
        })
        .collect::<Result<_, _>>()?;
    let bracket = (0..steps).find_map(|i| match (scores[i], scores[i + 1]) {
        (Some(a), Some(b)) if a.signum() != b.signum() => Some((i, a)),
        _ => None,
    });
    let Some((i, first)) = bracket else {
        return Err(TomographyError::CalibrationFailed(
            "the beam never becomes round between the line foci".into(),
        ));
    };
    let (mut a, mut b, mut sa) = (offsets[i], offsets[i + 1], first);
    while b - a > 1e-7 {
        let m = 0.5 * (a + b);
        let sm = axis_balance(sim, &mask, m)?;
        if sm.signum() == sa.signum() {
            a = m;
            sa = sm;
        } else {
            b = m;
        }
    }
    let plane_offset = 0.5 * (a + b);
    let reading = mode_orientation(&sim.measure(&PoincareState::north(), &mask, plane_offset)?)?;
    if reading.visibility < MIN_CALIBRATED_VISIBILITY {
        return Err(TomographyError::CalibrationFailed(format!(
            "visibility {:.3} at the calibrated plane is below {MIN_CALIBRATED_VISIBILITY}",
            reading.visibility
        )));
    }
    Ok(Calibration {
        lens: LensSpec { beta: 0.0, ..*lens },
        plane_offset,
        visibility: reading.visibility,
        alpha: reading.alpha,
    })
}
