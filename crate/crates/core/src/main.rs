use clap::{Args, Parser, Subcommand, ValueEnum};
use oam_tomo::field::NoiseModel;
use oam_tomo::harness::{
    self, CliError, ImageFormat, Input, Pipeline, RenderOptions, ReproduceTarget, RunConfig,
    Session,
};
use oam_tomo::PoincareState;
use serde::Serialize;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

/// Simulate OAM superpositions and reconstruct them from intensity images.
///
/// Angles are in degrees. Converter angles on the command line are physical
/// axis angles; reports give both the Poincaré-frame angle β and the axis β/2.
#[derive(Parser, Debug)]
#[command(name = "oam-tomo", version)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct GlobalArgs {
    /// JSON run configuration; missing keys take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Relative Gaussian image noise (standard deviation over the peak).
    #[arg(long, global = true)]
    noise_sigma: Option<f64>,
    #[arg(long, global = true, value_enum)]
    pipeline: Option<PipelineArg>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    theta_deg: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    phi_deg: Option<f64>,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum PipelineArg {
    Abstract,
    Physical,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum FormatArg {
    Pgm,
    Png,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum TargetArg {
    Fig5,
    Fig6,
    Table1,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write the intensity image of a state, directly or after the converter.
    Render {
        /// Physical converter axis; omit for the direct image.
        #[arg(long, allow_negative_numbers = true)]
        converter_deg: Option<f64>,
        /// Write the three Method II images `<prefix>_direct`, `_mc00`, `_mc45`.
        #[arg(long, conflicts_with_all = ["scan", "converter_deg"])]
        triplet: bool,
        /// Write `direct` plus one `beta_<deg>` image per scan angle.
        #[arg(long, conflicts_with = "converter_deg")]
        scan: bool,
        #[arg(long, default_value = "state")]
        prefix: String,
        #[arg(long, value_enum, default_value = "pgm")]
        format: FormatArg,
    },
    /// Locate the camera plane of the tilted lens and write calibration.json.
    Calibrate,
    /// Converter scan to maximal HG visibility.
    Method1 {
        /// Read `direct` and `beta_<deg>` images from this directory.
        #[arg(long)]
        images: Option<PathBuf>,
    },
    /// Three-image reconstruction.
    Method2 {
        /// Read `<prefix>_direct`, `<prefix>_mc00`, `<prefix>_mc45` from this directory.
        #[arg(long)]
        images: Option<PathBuf>,
        #[arg(long, default_value = "state")]
        prefix: String,
        /// Label written in the `point` column.
        #[arg(long, default_value = "1")]
        point: String,
    },
    /// Regenerate a sample set noiseless and noisy.
    Reproduce {
        #[arg(value_enum)]
        target: TargetArg,
        /// Per-reading lobe-angle noise for the table.
        #[arg(long)]
        alpha_noise_deg: Option<f64>,
        /// Noise realizations per point.
        #[arg(long)]
        seeds: Option<u64>,
    },
}

fn config(g: &GlobalArgs) -> Result<RunConfig, CliError> {
    let mut cfg = match &g.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(o) = &g.out {
        cfg.out_dir = o.clone();
    }
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    if let Some(sigma) = g.noise_sigma {
        cfg.noise = Some(NoiseModel::GaussianSigmaRel { sigma });
        cfg.reproduce.image_sigma_rel = sigma;
    }
    if let Some(p) = g.pipeline {
        cfg.pipeline = match p {
            PipelineArg::Abstract => Pipeline::Abstract,
            PipelineArg::Physical => Pipeline::Physical,
        };
    }
    Ok(cfg)
}

fn state(g: &GlobalArgs) -> Result<PoincareState, CliError> {
    match (g.theta_deg, g.phi_deg) {
        (Some(t), p) => Ok(PoincareState::from_degrees(t, p.unwrap_or(0.0))?),
        (None, _) => Err(CliError::Usage("--theta-deg is required".into())),
    }
}

fn input(g: &GlobalArgs, images: Option<PathBuf>, prefix: Option<String>) -> Result<Input, CliError> {
    match images {
        Some(dir) => Ok(Input::Images { dir, prefix }),
        None => Ok(Input::State(state(g)?)),
    }
}

/// Writes to stdout; a closed pipe is not an error.
fn print<T: Serialize>(v: &T) {
    let text = serde_json::to_string_pretty(v).expect("report serializes");
    let _ = writeln!(std::io::stdout(), "{text}");
}

fn run(cli: Cli) -> Result<(), CliError> {
    let g = &cli.global;
    let mut cfg = config(g)?;
    match cli.command {
        Command::Render {
            converter_deg,
            triplet,
            scan,
            prefix,
            format,
        } => {
            let s = state(g)?;
            let session = Session::new(cfg)?;
            let opts = RenderOptions {
                converter_deg,
                triplet,
                scan,
                prefix,
                format: match format {
                    FormatArg::Pgm => ImageFormat::Pgm,
                    FormatArg::Png => ImageFormat::Png,
                },
            };
            let files = harness::render(&session, s, &opts)?;
            let mut out = std::io::stdout();
            for f in files {
                let _ = writeln!(out, "{}", f.display());
            }
        }
        Command::Calibrate => print(&harness::calibrate(&cfg)?),
        Command::Method1 { images } => {
            let inp = input(g, images, None)?;
            if matches!(inp, Input::Images { .. }) {
                cfg.pipeline = Pipeline::Abstract;
            }
            print(&harness::method1(&Session::new(cfg)?, &inp)?)
        }
        Command::Method2 {
            images,
            prefix,
            point,
        } => {
            let inp = input(g, images, Some(prefix))?;
            if matches!(inp, Input::Images { .. }) {
                cfg.pipeline = Pipeline::Abstract;
            }
            print(&harness::method2(&Session::new(cfg)?, &inp, &point)?)
        }
        Command::Reproduce {
            target,
            alpha_noise_deg,
            seeds,
        } => {
            if let Some(a) = alpha_noise_deg {
                cfg.reproduce.alpha_sigma_deg = a;
            }
            if let Some(s) = seeds {
                cfg.reproduce.seeds = s;
            }
            let t = match target {
                TargetArg::Fig5 => ReproduceTarget::Fig5,
                TargetArg::Fig6 => ReproduceTarget::Fig6,
                TargetArg::Table1 => ReproduceTarget::Table1,
            };
            print(&harness::reproduce(&Session::new(cfg)?, t)?)
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("oam-tomo: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
