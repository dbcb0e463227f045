//! `flashgray`: spatially varying illumination from flash/no-flash pairs.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use flashgray::evalbench::Variant;
use flashgray::GraynessMethod;

/// Exit codes, stable for scripting.
pub mod exit {
    pub const FAILURE: u8 = 1;
    pub const USAGE: u8 = 2;
    pub const IO: u8 = 3;
    pub const DIMENSIONS: u8 = 4;
    pub const ESTIMATION: u8 = 5;
}

#[derive(Debug, Parser)]
#[command(name = "flashgray", version, about)]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Output directory.
    #[arg(
        long,
        short,
        global = true,
        env = "FLASHGRAY_OUT",
        default_value = "flashgray-out"
    )]
    out: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Estimate the illumination map of a flash/no-flash pair.
    Estimate(EstimateArgs),
    /// Build a synthetic multi-illuminant dataset.
    Synthesize(SynthesizeArgs),
    /// Score estimator variants on a dataset manifest.
    Bench(BenchArgs),
    /// White-balance an image with a saved illumination map.
    Correct(CorrectArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Method {
    Gp,
    Msgp,
    Dgp,
}

impl From<Method> for GraynessMethod {
    fn from(m: Method) -> Self {
        match m {
            Method::Gp => GraynessMethod::Gp,
            Method::Msgp => GraynessMethod::Msgp,
            Method::Dgp => GraynessMethod::Dgp,
        }
    }
}

#[derive(Debug, Args)]
pub struct EstimatorArgs {
    /// Grayness measure.
    #[arg(long, value_enum, default_value = "gp")]
    pub method: Method,
    /// Fraction of valid pixels kept as gray pixels, in (0, 1].
    #[arg(long, default_value_t = 0.1)]
    pub fraction: f64,
    /// Mexican-hat scale in pixels.
    #[arg(long, default_value_t = flashgray::imgcore::DEFAULT_SIGMA)]
    pub sigma: f64,
    /// Spatial blending bandwidth in pixels (default: 0.15 of the diagonal).
    #[arg(long)]
    pub spatial_sigma: Option<f64>,
    /// Seed for k-means++ initialization.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// No-flash image (.pfm or 16-bit .png, linear).
    pub ambient: PathBuf,
    /// Flash image, registered to the no-flash image.
    pub flash: PathBuf,
    /// Foreground mask PNG; non-zero marks valid pixels.
    #[arg(long)]
    pub mask: Option<PathBuf>,
    /// Number of gray pixel clusters.
    #[arg(long, short = 'm', default_value_t = 4)]
    pub clusters: usize,
    #[command(flatten)]
    pub estimator: EstimatorArgs,
    /// Accept pairs where the flash image is darker than the no-flash one.
    #[arg(long)]
    pub lenient: bool,
    /// Also write grayness, residual, albedo and cluster artifacts.
    #[arg(long)]
    pub debug: bool,
}

#[derive(Debug, Args)]
pub struct SynthesizeArgs {
    /// Directory of per-object light stacks (light01..10.png + mask.png).
    #[arg(
        long,
        conflicts_with = "procedural",
        required_unless_present = "procedural"
    )]
    pub stacks: Option<PathBuf>,
    /// Render procedural objects instead of reading stacks.
    #[arg(long)]
    pub procedural: bool,
    /// Number of procedural objects.
    #[arg(long, default_value_t = 15)]
    pub objects: usize,
    /// Side length of procedural renderings in pixels.
    #[arg(long, default_value_t = 128)]
    pub size: usize,
    #[arg(long, default_value_t = 2)]
    pub n_min: usize,
    #[arg(long, default_value_t = 8)]
    pub n_max: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Fixed flash chroma `r,g,b` instead of a sampled near-white one.
    #[arg(long, value_parser = parse_rgb)]
    pub flash_chroma: Option<[f64; 3]>,
    /// Gaussian sensor noise, relative to full scale.
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Dataset manifest written by `synthesize`.
    pub manifest: PathBuf,
    /// Comma-separated variants such as `gp,gp+f,msgp-global` (default: all).
    #[arg(long, value_delimiter = ',')]
    pub variants: Vec<Variant>,
    /// Fraction of valid pixels kept as gray pixels.
    #[arg(long, default_value_t = 0.1)]
    pub fraction: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct CorrectArgs {
    /// Image to correct (.pfm or 16-bit .png).
    pub image: PathBuf,
    /// Illumination map PFM written by `estimate`.
    pub map: PathBuf,
    /// Output file name inside the output directory.
    #[arg(long, default_value = "corrected.png")]
    pub name: String,
}

fn parse_rgb(s: &str) -> Result<[f64; 3], String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<Result<_, _>>()?;
    match parts[..] {
        [r, g, b] if parts.iter().all(|v| *v > 0.0 && v.is_finite()) => Ok([r, g, b]),
        _ => Err(format!("expected three positive numbers, got {s:?}")),
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    use flashgray::Error as E;
    match err.chain().find_map(|c| c.downcast_ref::<E>()) {
        Some(
            E::Io { .. } | E::Format { .. } | E::UnsupportedBitDepth { .. } | E::Manifest { .. },
        ) => exit::IO,
        Some(E::DimensionMismatch(_)) => exit::DIMENSIONS,
        Some(E::InvalidParameter(_)) => exit::USAGE,
        Some(_) => exit::ESTIMATION,
        None => exit::FAILURE,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
        {
            log::warn!("could not size the thread pool: {e}");
        }
    }
    let result = match &cli.command {
        Command::Estimate(a) => commands::estimate(a, &cli.out),
        Command::Synthesize(a) => commands::synthesize(a, &cli.out),
        Command::Bench(a) => commands::bench(a, &cli.out),
        Command::Correct(a) => commands::correct(a, &cli.out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
