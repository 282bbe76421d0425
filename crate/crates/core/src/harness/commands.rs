use super::config::{ConfigError, Pipeline, RunConfig};
use super::report::{deg, deg_opt, ensure_dir, round_to, write_csv, write_json, OutputError, Table1Row};
use super::samples::{meridian_sequence, parallel_sequence, table_targets, SamplePoint};
use crate::analysis::{mode_orientation_with, ImageReading};
use crate::field::{FieldError, GridSpec, LgBasis, NoiseModel, TiltedLensSim};
use crate::io::{self, IoError};
use crate::state::{
    angle_diff, axis_diff, spherical_distance, PoincareState, StateError, StateRecord,
};
use crate::tomography::{
    beta_grid, calibrate_tilt, derive_seed, estimate_state, method1_scan, AbstractSource,
    Calibration, DirSource, EstimateOptions, ImageSource, MeasurementKind, Method1Result,
    PhysicalSource, TomographyError, TriangleEstimate,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_4, PI};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use thiserror::Error;

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_ANALYSIS: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Io(#[from] IoError),
    #[error(transparent)]
    Output(#[from] OutputError),
    #[error(transparent)]
    Tomography(#[from] TomographyError),
}

impl From<FieldError> for CliError {
    fn from(e: FieldError) -> Self {
        CliError::Tomography(e.into())
    }
}

impl From<StateError> for CliError {
    fn from(e: StateError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl CliError {
    /// 2 for bad input of any kind, 3 when the analysis itself fails.
    pub fn exit_code(&self) -> i32 {
        use crate::analysis::AnalysisError as A;
        use TomographyError as T;
        match self {
            CliError::Usage(_) | CliError::Config(_) | CliError::Io(_) | CliError::Output(_) => {
                EXIT_USAGE
            }
            CliError::Tomography(t) => match t {
                T::Source(_) | T::InvalidBetaGrid(_) | T::InvalidReadings(_) => EXIT_USAGE,
                T::Analysis(A::InvalidOption(_)) => EXIT_USAGE,
                T::Field(FieldError::InvalidGrid(_) | FieldError::InvalidLens(_)) => EXIT_USAGE,
                _ => EXIT_ANALYSIS,
            },
        }
    }
}

/// Simulation setup the calibration was computed for.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationSetup {
    pub lens_grid_n: usize,
    pub camera_n: usize,
    pub window_waists: f64,
    pub waist_mm: f64,
    pub wavelength_nm: f64,
}

impl CalibrationSetup {
    fn of(cfg: &RunConfig) -> Self {
        Self {
            lens_grid_n: cfg.lens.lens_grid_n,
            camera_n: cfg.grid.n,
            window_waists: cfg.grid.window_waists,
            waist_mm: cfg.grid.waist_mm,
            wavelength_nm: cfg.grid.wavelength_nm,
        }
    }
}

/// Contents of `calibration.json`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationFile {
    #[serde(flatten)]
    pub calibration: Calibration,
    pub setup: CalibrationSetup,
}

pub const CALIBRATION_FILE: &str = "calibration.json";

fn simulator(cfg: &RunConfig) -> Result<Arc<TiltedLensSim>, CliError> {
    let lens_grid = cfg.lens_grid_spec().map_err(ConfigError)?;
    Ok(Arc::new(TiltedLensSim::new(lens_grid, cfg.grid.n)?))
}

/// Runs the camera-plane calibration and writes `calibration.json`.
pub fn calibrate(cfg: &RunConfig) -> Result<CalibrationFile, CliError> {
    cfg.validate()?;
    let sim = simulator(cfg)?;
    let calibration = calibrate_tilt(&sim, &cfg.lens_spec())?;
    let file = CalibrationFile {
        calibration,
        setup: CalibrationSetup::of(cfg),
    };
    ensure_dir(&cfg.out_dir)?;
    write_json(&cfg.out_dir.join(CALIBRATION_FILE), &file)?;
    Ok(file)
}

/// Camera plane from the config, a matching `calibration.json`, or a fresh
/// calibration (which is then written).
fn physical_setup(cfg: &RunConfig) -> Result<(Arc<TiltedLensSim>, Calibration), CliError> {
    let sim = simulator(cfg)?;
    let lens = cfg.lens_spec();
    if let Some(mm) = cfg.lens.plane_offset_mm {
        let plane_offset = mm * 1e-3;
        let mask = crate::tomography::mask_for(&lens, 0.0);
        let r = mode_orientation_with(
            &sim.measure(&PoincareState::north(), &mask, plane_offset)?,
            &cfg.analysis_options(),
        )
        .map_err(TomographyError::from)?;
        let cal = Calibration {
            lens,
            plane_offset,
            visibility: r.visibility,
            alpha: r.alpha,
        };
        return Ok((sim, cal));
    }
    let path = cfg.out_dir.join(CALIBRATION_FILE);
    if let Ok(text) = std::fs::read_to_string(&path) {
        if let Ok(file) = serde_json::from_str::<CalibrationFile>(&text) {
            let c = file.calibration;
            if file.setup == CalibrationSetup::of(cfg)
                && (c.lens.focal - lens.focal).abs() < 1e-12
                && (c.lens.tilt - lens.tilt).abs() < 1e-12
            {
                return Ok((sim, c));
            }
        }
    }
    let file = calibrate(cfg)?;
    Ok((sim, file.calibration))
}

/// Validated configuration plus the shared simulation state.
pub struct Session {
    cfg: RunConfig,
    grid: GridSpec,
    basis: Arc<LgBasis>,
    physical: Option<(Arc<TiltedLensSim>, Calibration)>,
}

impl Session {
    pub fn new(cfg: RunConfig) -> Result<Self, CliError> {
        cfg.validate()?;
        let grid = cfg.grid_spec().map_err(ConfigError)?;
        let physical = match cfg.pipeline {
            Pipeline::Physical => Some(physical_setup(&cfg)?),
            Pipeline::Abstract => None,
        };
        Ok(Self {
            basis: Arc::new(LgBasis::new(&grid)),
            grid,
            physical,
            cfg,
        })
    }

    pub fn config(&self) -> &RunConfig {
        &self.cfg
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn calibration(&self) -> Option<&Calibration> {
        self.physical.as_ref().map(|(_, c)| c)
    }

    pub fn out_dir(&self) -> &Path {
        &self.cfg.out_dir
    }

    /// Simulated images of `s` through the configured pipeline.
    pub fn source(
        &self,
        s: PoincareState,
        noise: Option<(NoiseModel, u64)>,
    ) -> Box<dyn ImageSource> {
        match &self.physical {
            None => {
                let src = AbstractSource::with_basis(self.basis.clone(), s);
                match noise {
                    Some((m, seed)) => Box::new(src.with_noise(m, seed)),
                    None => Box::new(src),
                }
            }
            Some((sim, cal)) => {
                let src = PhysicalSource::new(sim.clone(), cal.lens, cal.plane_offset, s);
                match noise {
                    Some((m, seed)) => Box::new(src.with_noise(m, seed)),
                    None => Box::new(src),
                }
            }
        }
    }

    fn configured_noise(&self) -> Option<(NoiseModel, u64)> {
        self.cfg.noise.map(|m| (m, self.cfg.seed))
    }

    fn pipeline_name(&self) -> &'static str {
        match self.cfg.pipeline {
            Pipeline::Abstract => "abstract",
            Pipeline::Physical => "physical",
        }
    }

    fn betas(&self, step_deg: f64) -> Vec<f64> {
        beta_grid(step_deg.to_radians())
    }
}

/// Where a command gets its images.
#[derive(Debug, Clone)]
pub enum Input {
    State(PoincareState),
    Images { dir: PathBuf, prefix: Option<String> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ImageFormat {
    #[default]
    Pgm,
    Png,
}

impl ImageFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ImageFormat::Pgm => "pgm",
            ImageFormat::Png => "png",
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct RenderOptions {
    /// Physical converter axis in degrees; the Poincaré angle is twice this.
    pub converter_deg: Option<f64>,
    /// Write `<prefix>_direct`, `<prefix>_mc00` and `<prefix>_mc45`.
    pub triplet: bool,
    /// Write `direct` and one `beta_<deg>` image per converter angle.
    pub scan: bool,
    pub prefix: String,
    pub format: ImageFormat,
}

pub fn scan_file_stem(beta: f64) -> String {
    format!("beta_{:07.3}", beta.to_degrees())
}

pub fn render(
    session: &Session,
    s: PoincareState,
    opts: &RenderOptions,
) -> Result<Vec<PathBuf>, CliError> {
    if opts.triplet && opts.scan {
        return Err(CliError::Usage("--triplet and --scan are exclusive".into()));
    }
    let src = session.source(s, session.configured_noise());
    let prefix = if opts.prefix.is_empty() {
        "state"
    } else {
        opts.prefix.as_str()
    };
    let jobs: Vec<(MeasurementKind, String)> = if opts.triplet {
        MeasurementKind::standard()
            .into_iter()
            .map(|k| (k, format!("{prefix}_{}", k.file_tag())))
            .collect()
    } else if opts.scan {
        std::iter::once((MeasurementKind::Direct, "direct".to_string()))
            .chain(
                session
                    .betas(session.cfg.beta_step_deg)
                    .into_iter()
                    .map(|b| (MeasurementKind::Converter { beta: b }, scan_file_stem(b))),
            )
            .collect()
    } else {
        let kind = match opts.converter_deg {
            Some(c) if c.is_finite() => MeasurementKind::Converter {
                beta: (2.0 * c).to_radians().rem_euclid(2.0 * PI),
            },
            Some(c) => return Err(CliError::Usage(format!("bad converter angle {c}"))),
            None => MeasurementKind::Direct,
        };
        vec![(kind, prefix.to_string())]
    };
    ensure_dir(session.out_dir())?;
    let ext = opts.format.extension();
    let written: Vec<PathBuf> = jobs
        .par_iter()
        .map(|(kind, stem)| -> Result<PathBuf, CliError> {
            let path = session.out_dir().join(format!("{stem}.{ext}"));
            io::write_image(&path, &src.image(*kind)?)?;
            Ok(path)
        })
        .collect::<Result<_, _>>()?;
    Ok(written)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurveRow {
    pub beta_deg: f64,
    pub converter_deg: f64,
    pub visibility: f64,
    pub alpha_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Method1Report {
    pub source: String,
    pub target: Option<StateRecord>,
    /// Poincaré-frame angle of maximal visibility.
    pub beta_mc_deg: f64,
    /// Physical converter axis, half of `beta_mc_deg`.
    pub converter_deg: f64,
    pub alpha_hg_deg: f64,
    pub theta_deg: f64,
    pub phi_deg: f64,
    pub degenerate_phi: bool,
    pub pole: bool,
    pub residual: f64,
    pub fidelity: Option<f64>,
    pub curve_csv: String,
}

pub const METHOD1_JSON: &str = "method1.json";
pub const METHOD1_CURVE: &str = "method1_curve.csv";

pub fn method1(session: &Session, input: &Input) -> Result<Method1Report, CliError> {
    let opts = session.cfg.method1_options();
    let (result, target, name) = match input {
        Input::State(s) => {
            let src = session.source(*s, session.configured_noise());
            let betas = session.betas(session.cfg.beta_step_deg);
            (
                method1_scan(src.as_ref(), &betas, &opts)?,
                Some(*s),
                session.pipeline_name().to_string(),
            )
        }
        Input::Images { dir, prefix } => {
            let src = DirSource::new(dir, prefix.as_deref(), None)?;
            let betas = src.betas();
            (method1_scan(&src, &betas, &opts)?, None, "images".to_string())
        }
    };
    ensure_dir(session.out_dir())?;
    let curve: Vec<CurveRow> = result
        .curve
        .iter()
        .map(|p| CurveRow {
            beta_deg: deg(p.beta),
            converter_deg: deg(p.beta / 2.0),
            visibility: round_to(p.visibility, 6),
            alpha_deg: deg(p.alpha),
        })
        .collect();
    write_csv(&session.out_dir().join(METHOD1_CURVE), &curve)?;
    let r = &result;
    let report = Method1Report {
        source: name,
        target: target.map(StateRecord::from),
        beta_mc_deg: deg(r.reading.beta_mc),
        converter_deg: deg(r.reading.beta_mc / 2.0),
        alpha_hg_deg: deg(r.reading.alpha_hg),
        theta_deg: deg(r.state.theta()),
        phi_deg: deg(r.state.phi()),
        degenerate_phi: r.state.degenerate_phi(),
        pole: r.pole,
        residual: round_to(r.residual, 6),
        fidelity: target.map(|t| round_to(crate::state::fidelity(&t, &r.state), 6)),
        curve_csv: METHOD1_CURVE.into(),
    };
    write_json(&session.out_dir().join(METHOD1_JSON), &report)?;
    Ok(report)
}

/// The three standard readings of an image source.
pub fn standard_readings(
    src: &dyn ImageSource,
    cfg: &RunConfig,
) -> Result<[(MeasurementKind, ImageReading); 3], TomographyError> {
    let opts = cfg.analysis_options();
    let read = |k: MeasurementKind| -> Result<_, TomographyError> {
        Ok((k, mode_orientation_with(&src.image(k)?, &opts)?))
    };
    let [a, b, c] = MeasurementKind::standard();
    Ok([read(a)?, read(b)?, read(c)?])
}

pub fn table_row(label: &str, target: Option<&PoincareState>, est: &TriangleEstimate) -> Table1Row {
    Table1Row {
        point: label.to_string(),
        theta_t: target.map(|t| deg(t.theta())),
        phi_t: target.map(|t| deg(t.phi())),
        theta_e: deg(est.state.theta()),
        d_theta: deg(est.err_theta),
        phi_e: deg(est.state.phi()),
        d_phi: deg_opt(est.err_phi),
        fidelity: est.fidelity_vs_target.map(|f| round_to(f, 6)),
        d_fidelity: est.d_fidelity.map(|f| round_to(f, 6)),
        branch: est.branch.to_string(),
    }
}

pub const METHOD2_JSON: &str = "method2.json";
pub const METHOD2_CSV: &str = "method2.csv";

pub fn method2(session: &Session, input: &Input, point: &str) -> Result<Table1Row, CliError> {
    let cfg = &session.cfg;
    let (readings, target) = match input {
        Input::State(s) => {
            let src = session.source(*s, session.configured_noise());
            (standard_readings(src.as_ref(), cfg)?, Some(*s))
        }
        Input::Images { dir, prefix } => {
            let src = DirSource::new(dir, Some(prefix.as_deref().unwrap_or("state")), None)?;
            (standard_readings(&src, cfg)?, None)
        }
    };
    let opts = cfg.estimate_options(cfg.noise.is_some() || matches!(input, Input::Images { .. }));
    let est = estimate_state(&readings, target.as_ref(), &opts)?;
    let row = table_row(point, target.as_ref(), &est);
    ensure_dir(session.out_dir())?;
    write_json(&session.out_dir().join(METHOD2_JSON), &row)?;
    write_csv(&session.out_dir().join(METHOD2_CSV), std::slice::from_ref(&row))?;
    Ok(row)
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation; 0 for fewer than two values.
fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

fn rms(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    (xs.iter().map(|x| x * x).sum::<f64>() / xs.len() as f64).sqrt()
}

fn max_of(xs: impl IntoIterator<Item = f64>) -> f64 {
    xs.into_iter().fold(0.0, f64::max)
}

fn opt_num(x: f64, digits: i32) -> Option<f64> {
    x.is_finite().then(|| round_to(x, digits))
}

/// Lobe axis predicted for the scan maximum: `(φ − θ)/2 + 45°` mod 180°.
pub fn model_alpha(s: &PoincareState) -> f64 {
    ((s.phi() - s.theta()) / 2.0 + FRAC_PI_4).rem_euclid(PI)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanRow {
    pub label: String,
    pub theta_t: f64,
    pub phi_t: f64,
    pub beta_mc: f64,
    pub converter: f64,
    pub alpha_hg: f64,
    pub alpha_model: f64,
    pub alpha_err: f64,
    pub theta_e: f64,
    pub phi_e: f64,
    pub d_theta: f64,
    /// Empty for pole targets.
    pub d_phi: Option<f64>,
    pub pole: bool,
}

fn scan_errors(target: &PoincareState, r: &Method1Result) -> (f64, Option<f64>) {
    let dt = r.state.theta() - target.theta();
    let dp = (!target.degenerate_phi()).then(|| angle_diff(r.state.phi(), target.phi()));
    (dt, dp)
}

/// Noiseless converter scans over `points`.
pub fn scan_noiseless(session: &Session, points: &[SamplePoint]) -> Result<Vec<ScanRow>, CliError> {
    let betas = session.betas(session.cfg.beta_step_deg);
    let opts = session.cfg.method1_options();
    points
        .iter()
        .map(|p| {
            let s = p.state();
            let r = method1_scan(session.source(s, None).as_ref(), &betas, &opts)?;
            let (dt, dp) = scan_errors(&s, &r);
            let model = model_alpha(&s);
            Ok(ScanRow {
                label: p.label.clone(),
                theta_t: p.theta_deg,
                phi_t: p.phi_deg,
                beta_mc: deg(r.reading.beta_mc),
                converter: deg(r.reading.beta_mc / 2.0),
                alpha_hg: deg(r.reading.alpha_hg),
                alpha_model: deg(model),
                alpha_err: deg(axis_diff(r.reading.alpha_hg, model)),
                theta_e: deg(r.state.theta()),
                phi_e: deg(r.state.phi()),
                d_theta: deg(dt),
                d_phi: deg_opt(dp),
                pole: r.pole,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NoisyScanRow {
    pub label: String,
    pub theta_t: f64,
    pub phi_t: f64,
    pub seeds: usize,
    /// Axial mean of the measured lobe angle.
    pub alpha_mean: f64,
    pub alpha_sd: f64,
    pub alpha_model: f64,
    pub rms_d_theta: f64,
    pub rms_d_phi: Option<f64>,
    pub max_d_theta: f64,
    pub max_d_phi: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NoisyScanSummary {
    pub seeds: usize,
    pub sigma_rel: f64,
    pub beta_step_deg: f64,
    /// RMS of θ̂ − θ over all points and seeds.
    pub rms_d_theta_deg: f64,
    /// RMS of the wrapped φ̂ − φ over non-pole points and all seeds.
    pub rms_d_phi_deg: f64,
    pub mean_abs_d_theta_deg: f64,
    pub mean_abs_d_phi_deg: f64,
}

/// Errors of one noisy scan per seed, for each point.
pub type ScanErrors = Vec<Vec<(f64, Option<f64>, f64)>>;

/// Converter scans with relative Gaussian image noise, `seeds` realizations
/// per point. Returns `(θ̂ − θ, φ̂ − φ, α)` per point and seed.
pub fn scan_noisy_errors(
    session: &Session,
    points: &[SamplePoint],
    sigma_rel: f64,
    seeds: usize,
) -> Result<ScanErrors, CliError> {
    let cfg = &session.cfg;
    let betas = session.betas(cfg.reproduce.noisy_beta_step_deg);
    let opts = cfg.method1_options();
    let model = NoiseModel::GaussianSigmaRel { sigma: sigma_rel };
    points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let s = p.state();
            let point_seed = derive_seed(cfg.seed, i as u64);
            (0..seeds)
                .map(|k| {
                    let seed = derive_seed(point_seed, k as u64);
                    let src = session.source(s, Some((model, seed)));
                    let r = method1_scan(src.as_ref(), &betas, &opts)?;
                    let (dt, dp) = scan_errors(&s, &r);
                    Ok((dt, dp, r.reading.alpha_hg))
                })
                .collect()
        })
        .collect()
}

pub fn summarize_noisy_scans(
    session: &Session,
    points: &[SamplePoint],
    errors: &ScanErrors,
    sigma_rel: f64,
) -> (Vec<NoisyScanRow>, NoisyScanSummary) {
    let rows = points
        .iter()
        .zip(errors)
        .map(|(p, errs)| {
            let dts: Vec<f64> = errs.iter().map(|e| e.0).collect();
            let dps: Vec<f64> = errs.iter().filter_map(|e| e.1).collect();
            let (c, s) = errs.iter().fold((0.0, 0.0), |(c, s), e| {
                (c + (2.0 * e.2).cos(), s + (2.0 * e.2).sin())
            });
            let a_mean = (s.atan2(c) / 2.0).rem_euclid(PI);
            let a_dev: Vec<f64> = errs.iter().map(|e| axis_diff(e.2, a_mean)).collect();
            NoisyScanRow {
                label: p.label.clone(),
                theta_t: p.theta_deg,
                phi_t: p.phi_deg,
                seeds: errs.len(),
                alpha_mean: deg(a_mean),
                alpha_sd: deg(rms(&a_dev)),
                alpha_model: deg(model_alpha(&p.state())),
                rms_d_theta: deg(rms(&dts)),
                rms_d_phi: (!dps.is_empty()).then(|| deg(rms(&dps))),
                max_d_theta: deg(max_of(dts.iter().map(|x| x.abs()))),
                max_d_phi: (!dps.is_empty()).then(|| deg(max_of(dps.iter().map(|x| x.abs())))),
            }
        })
        .collect();
    let all_t: Vec<f64> = errors.iter().flatten().map(|e| e.0).collect();
    let all_p: Vec<f64> = errors.iter().flatten().filter_map(|e| e.1).collect();
    let abs_mean = |xs: &[f64]| mean(&xs.iter().map(|x| x.abs()).collect::<Vec<_>>());
    let summary = NoisyScanSummary {
        seeds: errors.first().map_or(0, Vec::len),
        sigma_rel,
        beta_step_deg: session.cfg.reproduce.noisy_beta_step_deg,
        rms_d_theta_deg: deg(rms(&all_t)),
        rms_d_phi_deg: deg(rms(&all_p)),
        mean_abs_d_theta_deg: deg(abs_mean(&all_t)),
        mean_abs_d_phi_deg: deg(abs_mean(&all_p)),
    };
    (rows, summary)
}

pub type Readings = [(MeasurementKind, ImageReading); 3];

/// Noiseless readings of every target.
pub fn table_readings(session: &Session, points: &[SamplePoint]) -> Result<Vec<Readings>, CliError> {
    points
        .par_iter()
        .map(|p| Ok(standard_readings(session.source(p.state(), None).as_ref(), &session.cfg)?))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableSummary {
    pub points: usize,
    pub seeds: usize,
    pub alpha_sigma_deg: f64,
    pub mean_fidelity: f64,
    pub sd_fidelity: f64,
    pub min_fidelity: f64,
    /// Largest geodesic distance between estimate and target.
    pub max_angle_error_deg: f64,
    /// Mean θ error bar.
    pub mean_d_theta_deg: f64,
    /// Mean φ error bar over non-degenerate estimates.
    pub mean_d_phi_deg: Option<f64>,
    pub rms_theta_error_deg: f64,
    /// Over targets off the poles.
    pub rms_phi_error_deg: f64,
    pub fallbacks: usize,
    pub branches: BTreeMap<String, usize>,
}

/// Method II over all targets. With `alpha_sigma > 0`, each reading's lobe
/// angle is perturbed by Gaussian noise, `seeds` times per target, and each
/// row aggregates the seeds: mean θ̂, circular-mean φ̂, mean error bars,
/// mean fidelity with its spread over seeds as `d_fidelity`, and the most
/// frequent branch.
pub fn table_run(
    session: &Session,
    points: &[SamplePoint],
    readings: &[Readings],
    alpha_sigma: f64,
    seeds: usize,
) -> Result<(Vec<Table1Row>, TableSummary), CliError> {
    let cfg = &session.cfg;
    let noisy = alpha_sigma > 0.0;
    let seeds = if noisy { seeds.max(1) } else { 1 };
    let opts = if noisy {
        EstimateOptions {
            alpha_tolerance: alpha_sigma,
            ..cfg.estimate_options(true)
        }
    } else {
        cfg.estimate_options(false)
    };
    let normal = Normal::new(0.0, alpha_sigma.max(0.0)).expect("finite sigma");
    let per_point: Vec<Vec<TriangleEstimate>> = points
        .par_iter()
        .zip(readings)
        .enumerate()
        .map(|(i, (p, base))| {
            let target = p.state();
            let point_seed = derive_seed(cfg.seed, i as u64);
            (0..seeds)
                .map(|k| {
                    let mut r = *base;
                    if noisy {
                        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(point_seed, k as u64));
                        for (_, reading) in r.iter_mut() {
                            reading.alpha = (reading.alpha + normal.sample(&mut rng)).rem_euclid(PI);
                        }
                    }
                    Ok(estimate_state(&r, Some(&target), &opts)?)
                })
                .collect::<Result<Vec<_>, CliError>>()
        })
        .collect::<Result<_, _>>()?;

    let mut rows = Vec::with_capacity(points.len());
    let (mut fids, mut dists, mut dts, mut dps, mut et, mut ep) =
        (vec![], vec![], vec![], vec![], vec![], vec![]);
    let mut fallbacks = 0;
    let mut branches = BTreeMap::new();
    for (p, ests) in points.iter().zip(&per_point) {
        let target = p.state();
        let tv = target.to_bloch();
        let f: Vec<f64> = ests.iter().filter_map(|e| e.fidelity_vs_target).collect();
        let thetas: Vec<f64> = ests.iter().map(|e| e.state.theta()).collect();
        let (c, s) = ests
            .iter()
            .fold((0.0, 0.0), |(c, s), e| (c + e.state.phi().cos(), s + e.state.phi().sin()));
        let bars_t: Vec<f64> = ests.iter().map(|e| e.err_theta).collect();
        let bars_p: Vec<f64> = ests.iter().filter_map(|e| e.err_phi).collect();
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        for e in ests {
            *counts.entry(e.branch.to_string()).or_default() += 1;
            *branches.entry(e.branch.to_string()).or_default() += 1;
            fallbacks += usize::from(e.fallback);
            dists.push(spherical_distance(&e.estimate, &tv));
            et.push(e.state.theta() - target.theta());
            if !target.degenerate_phi() {
                ep.push(angle_diff(e.state.phi(), target.phi()));
            }
        }
        let branch = counts
            .iter()
            .fold(("", 0), |best, (b, &n)| if n > best.1 { (b.as_str(), n) } else { best })
            .0
            .to_string();
        fids.extend_from_slice(&f);
        dts.extend_from_slice(&bars_t);
        dps.extend_from_slice(&bars_p);
        rows.push(if seeds == 1 {
            table_row(&p.label, Some(&target), &ests[0])
        } else {
            Table1Row {
                point: p.label.clone(),
                theta_t: Some(deg(target.theta())),
                phi_t: Some(deg(target.phi())),
                theta_e: deg(mean(&thetas)),
                d_theta: deg(mean(&bars_t)),
                phi_e: deg(s.atan2(c).rem_euclid(2.0 * PI)),
                d_phi: (!bars_p.is_empty()).then(|| deg(mean(&bars_p))),
                fidelity: Some(round_to(mean(&f), 6)),
                d_fidelity: Some(round_to(std_dev(&f), 6)),
                branch,
            }
        });
    }
    let summary = TableSummary {
        points: points.len(),
        seeds,
        alpha_sigma_deg: deg(alpha_sigma),
        mean_fidelity: round_to(mean(&fids), 6),
        sd_fidelity: round_to(std_dev(&fids), 6),
        min_fidelity: round_to(fids.iter().cloned().fold(1.0, f64::min), 6),
        max_angle_error_deg: deg(max_of(dists)),
        mean_d_theta_deg: deg(mean(&dts)),
        mean_d_phi_deg: opt_num(mean(&dps).to_degrees(), 4),
        rms_theta_error_deg: deg(rms(&et)),
        rms_phi_error_deg: deg(rms(&ep)),
        fallbacks,
        branches,
    };
    Ok((rows, summary))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReproduceTarget {
    Fig5,
    Fig6,
    Table1,
}

impl ReproduceTarget {
    pub fn name(self) -> &'static str {
        match self {
            ReproduceTarget::Fig5 => "fig5",
            ReproduceTarget::Fig6 => "fig6",
            ReproduceTarget::Table1 => "table1",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanReproduction {
    pub target: String,
    pub pipeline: String,
    pub points: usize,
    pub beta_step_deg: f64,
    /// Largest axial deviation of α_HG from `(φ − θ)/2 + 45°`.
    pub max_alpha_err_deg: f64,
    pub max_theta_err_deg: f64,
    pub max_phi_err_deg: f64,
    pub noisy: NoisyScanSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableReproduction {
    pub target: String,
    pub pipeline: String,
    pub noiseless: TableSummary,
    pub noisy: TableSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Reproduction {
    Scan(ScanReproduction),
    Table(TableReproduction),
}

/// Runs a sample set noiseless and noisy and writes `noiseless.csv`,
/// `noisy.csv` and `summary.json` under `<out>/<target>/`.
pub fn reproduce(session: &Session, target: ReproduceTarget) -> Result<Reproduction, CliError> {
    let cfg = &session.cfg;
    let dir = session.out_dir().join(target.name());
    ensure_dir(&dir)?;
    let seeds = cfg.reproduce.seeds as usize;
    let out = match target {
        ReproduceTarget::Fig5 | ReproduceTarget::Fig6 => {
            let points = if target == ReproduceTarget::Fig5 {
                meridian_sequence()
            } else {
                parallel_sequence()
            };
            let clean = scan_noiseless(session, &points)?;
            write_csv(&dir.join("noiseless.csv"), &clean)?;
            let sigma = cfg.reproduce.image_sigma_rel;
            let errs = scan_noisy_errors(session, &points, sigma, seeds)?;
            let (rows, noisy) = summarize_noisy_scans(session, &points, &errs, sigma);
            write_csv(&dir.join("noisy.csv"), &rows)?;
            Reproduction::Scan(ScanReproduction {
                target: target.name().into(),
                pipeline: session.pipeline_name().into(),
                points: points.len(),
                beta_step_deg: cfg.beta_step_deg,
                max_alpha_err_deg: max_of(clean.iter().map(|r| r.alpha_err.abs())),
                max_theta_err_deg: max_of(clean.iter().map(|r| r.d_theta.abs())),
                max_phi_err_deg: max_of(clean.iter().filter_map(|r| r.d_phi.map(f64::abs))),
                noisy,
            })
        }
        ReproduceTarget::Table1 => {
            let points = table_targets();
            let readings = table_readings(session, &points)?;
            let (rows, noiseless) = table_run(session, &points, &readings, 0.0, 1)?;
            write_csv(&dir.join("noiseless.csv"), &rows)?;
            let sigma = cfg.reproduce.alpha_sigma_deg.to_radians();
            let (rows, noisy) = table_run(session, &points, &readings, sigma, seeds)?;
            write_csv(&dir.join("noisy.csv"), &rows)?;
            Reproduction::Table(TableReproduction {
                target: target.name().into(),
                pipeline: session.pipeline_name().into(),
                noiseless,
                noisy,
            })
        }
    };
    write_json(&dir.join("summary.json"), &out)?;
    Ok(out)
}
