use crate::analysis::AnalysisOptions;
use crate::field::{
    GridSpec, LensSpec, NoiseModel, DEFAULT_FOCAL, DEFAULT_N, DEFAULT_TILT_DEG, DEFAULT_WAIST,
    DEFAULT_WAVELENGTH, DEFAULT_WINDOW_WAISTS,
};
use crate::tomography::{EstimateOptions, Method1Options};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Pipeline {
    #[default]
    Abstract,
    Physical,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub n: usize,
    pub wavelength_nm: f64,
    pub waist_mm: f64,
    pub window_waists: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            n: DEFAULT_N,
            wavelength_nm: (DEFAULT_WAVELENGTH * 1e12).round() / 1e3,
            waist_mm: (DEFAULT_WAIST * 1e6).round() / 1e3,
            window_waists: DEFAULT_WINDOW_WAISTS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LensConfig {
    pub focal_mm: f64,
    pub tilt_deg: f64,
    /// Lens-plane grid size; the camera keeps the central `grid.n` pixels.
    pub lens_grid_n: usize,
    /// Camera plane relative to the focal plane. Calibrated when absent.
    pub plane_offset_mm: Option<f64>,
}

impl Default for LensConfig {
    fn default() -> Self {
        Self {
            focal_mm: (DEFAULT_FOCAL * 1e6).round() / 1e3,
            tilt_deg: DEFAULT_TILT_DEG,
            lens_grid_n: 512,
            plane_offset_mm: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub membership_noiseless_deg: f64,
    pub membership_noisy_deg: f64,
    /// Orientation uncertainty of a noiseless reading.
    pub alpha_noiseless_deg: f64,
    pub flat_spread: f64,
    pub visibility_threshold: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            membership_noiseless_deg: 1e-6f64.to_degrees(),
            membership_noisy_deg: 2.0,
            alpha_noiseless_deg: 0.5,
            flat_spread: 0.02,
            visibility_threshold: 0.34,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReproduceConfig {
    pub seeds: u64,
    /// Relative image noise for the noisy scan reproduction.
    pub image_sigma_rel: f64,
    /// Orientation noise added to readings for the noisy table.
    pub alpha_sigma_deg: f64,
    /// Converter step for the noisy scan reproduction.
    pub noisy_beta_step_deg: f64,
}

impl Default for ReproduceConfig {
    fn default() -> Self {
        Self {
            seeds: 100,
            image_sigma_rel: 0.05,
            alpha_sigma_deg: 2.0,
            noisy_beta_step_deg: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridConfig,
    pub lens: LensConfig,
    pub pipeline: Pipeline,
    pub noise: Option<NoiseModel>,
    pub seed: u64,
    pub beta_step_deg: f64,
    pub analysis: AnalysisOptions,
    pub tolerances: Tolerances,
    pub reproduce: ReproduceConfig,
    pub out_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            grid: GridConfig::default(),
            lens: LensConfig::default(),
            pipeline: Pipeline::Abstract,
            noise: None,
            seed: 0,
            beta_step_deg: 1.0,
            analysis: AnalysisOptions::default(),
            tolerances: Tolerances::default(),
            reproduce: ReproduceConfig::default(),
            out_dir: PathBuf::from("out"),
        }
    }
}

#[derive(Debug, thiserror::Error)]
#[error("config: {0}")]
pub struct ConfigError(pub String);

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
        let cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let err = |m: String| Err(ConfigError(m));
        self.grid_spec().map_err(ConfigError)?;
        self.lens_spec().validate().map_err(|e| ConfigError(e.to_string()))?;
        if self.pipeline == Pipeline::Physical {
            let n = self.lens.lens_grid_n;
            if !n.is_power_of_two() || n < self.grid.n {
                return err(format!(
                    "lens_grid_n = {n} must be a power of two no smaller than grid.n"
                ));
            }
        }
        if !(self.beta_step_deg > 0.0 && self.beta_step_deg <= 2.0) {
            return err(format!(
                "beta_step_deg = {} must lie in (0, 2]",
                self.beta_step_deg
            ));
        }
        if !(self.reproduce.noisy_beta_step_deg > 0.0 && self.reproduce.noisy_beta_step_deg <= 2.0)
        {
            return err("reproduce.noisy_beta_step_deg must lie in (0, 2]".into());
        }
        self.analysis
            .validate()
            .map_err(|e| ConfigError(e.to_string()))?;
        match self.noise {
            Some(NoiseModel::GaussianSigmaRel { sigma }) if !(sigma >= 0.0) => {
                return err("noise sigma must be non-negative".into())
            }
            Some(NoiseModel::PoissonScale { scale }) if !(scale > 0.0) => {
                return err("noise scale must be positive".into())
            }
            _ => {}
        }
        let t = &self.tolerances;
        if !(t.membership_noiseless_deg > 0.0
            && t.membership_noisy_deg > 0.0
            && t.alpha_noiseless_deg >= 0.0
            && t.flat_spread >= 0.0
            && (0.0..1.0).contains(&t.visibility_threshold))
        {
            return err("tolerances must be positive and the threshold in [0, 1)".into());
        }
        let r = &self.reproduce;
        if r.seeds == 0 || !(r.image_sigma_rel >= 0.0) || !(r.alpha_sigma_deg >= 0.0) {
            return err("reproduce needs at least one seed and non-negative noise".into());
        }
        Ok(())
    }

    pub fn grid_spec(&self) -> Result<GridSpec, String> {
        GridSpec::with_window(
            self.grid.n,
            self.grid.window_waists,
            self.grid.wavelength_nm * 1e-9,
            self.grid.waist_mm * 1e-3,
        )
        .map_err(|e| e.to_string())
    }

    /// Lens-plane grid of the physical pipeline: same window, finer pitch.
    pub fn lens_grid_spec(&self) -> Result<GridSpec, String> {
        GridSpec::with_window(
            self.lens.lens_grid_n,
            self.grid.window_waists,
            self.grid.wavelength_nm * 1e-9,
            self.grid.waist_mm * 1e-3,
        )
        .map_err(|e| e.to_string())
    }

    pub fn lens_spec(&self) -> LensSpec {
        LensSpec {
            focal: self.lens.focal_mm * 1e-3,
            tilt: self.lens.tilt_deg.to_radians(),
            beta: 0.0,
        }
    }

    pub fn analysis_options(&self) -> AnalysisOptions {
        AnalysisOptions {
            visibility_threshold: self.tolerances.visibility_threshold,
            ..self.analysis
        }
    }

    pub fn method1_options(&self) -> Method1Options {
        Method1Options {
            analysis: self.analysis_options(),
            flat_spread: self.tolerances.flat_spread,
            pole_visibility: self.tolerances.visibility_threshold,
        }
    }

    pub fn estimate_options(&self, noisy: bool) -> EstimateOptions {
        let t = &self.tolerances;
        if noisy {
            EstimateOptions {
                visibility_threshold: t.visibility_threshold,
                membership_tol: t.membership_noisy_deg.to_radians(),
                alpha_tolerance: self.reproduce.alpha_sigma_deg.to_radians(),
            }
        } else {
            EstimateOptions {
                visibility_threshold: t.visibility_threshold,
                membership_tol: t.membership_noiseless_deg.to_radians(),
                alpha_tolerance: t.alpha_noiseless_deg.to_radians(),
            }
        }
    }
}
