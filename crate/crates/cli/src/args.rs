use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use psm_core::datagen::Family;

#[derive(Debug, Parser)]
#[command(name = "psm", version, about = "Fit principal sub-manifolds to data on spheres")]
pub struct Cli {
    /// Plain-text `key = value` file; keys are long flag names without dashes.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Random seed for data generation.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory (created if missing).
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Suppress the summary on standard output.
    #[arg(long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset on S^3 and write dataset.csv.
    Generate(GenerateArgs),
    /// Align a landmark file to preshapes and write preshapes.csv.
    Shapes(ShapesArgs),
    /// Fit a principal sub-manifold and write its exports.
    Fit(FitArgs),
    /// Fit, then add the principal geodesics along e1 (and e2) to projected.csv.
    CompareGeodesic(FitArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// s_curve, sea_wave or ellipsoid [default: s_curve].
    #[arg(long, value_parser = parse_family)]
    pub family: Option<Family>,
    /// Number of points [default: 200].
    #[arg(long)]
    pub n: Option<usize>,
    /// Ellipsoid semi-axis along x.
    #[arg(long)]
    pub a: Option<f64>,
    /// Ellipsoid semi-axis along y.
    #[arg(long)]
    pub b: Option<f64>,
    /// Ellipsoid semi-axis along z.
    #[arg(long)]
    pub c: Option<f64>,
    /// Sample the ellipsoid surface instead of the solid.
    #[arg(long)]
    pub surface: bool,
    /// Standard deviation of the sea-wave height noise.
    #[arg(long)]
    pub noise_level: Option<f64>,
    /// S-curve scale on the U noise term.
    #[arg(long)]
    pub noise_scale_u: Option<f64>,
    /// Lift with C = max |x|^2 + margin.
    #[arg(long, conflicts_with = "shift_c")]
    pub margin: Option<f64>,
    /// Lift with a fixed C.
    #[arg(long)]
    pub shift_c: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ShapesArgs {
    /// Landmark file: `specimen_id,landmark_index,x,y` CSV or blank-line separated k x 2 blocks.
    pub input: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StartMode {
    Mean,
    Custom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KernelArg {
    Uniform,
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ChartArg {
    Sphere,
    Flat,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Point CSV written by `generate` or `shapes`.
    pub data: PathBuf,
    /// Step length along each net [default: 0.02].
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Stop a net once no data point lies within this distance [default: 0.2].
    #[arg(long)]
    pub delta: Option<f64>,
    /// Kernel bandwidth; `inf` weights every point equally [default: 0.4].
    #[arg(long)]
    pub bandwidth: Option<f64>,
    /// Local covariance weights [default: uniform].
    #[arg(long, value_enum)]
    pub kernel: Option<KernelArg>,
    /// Number of nets, a multiple of 4 [default: 180].
    #[arg(long)]
    pub directions: Option<usize>,
    /// Upper bound on the length of each net [default: 1].
    #[arg(long)]
    pub max_length: Option<f64>,
    /// Dimension of the fitted sub-manifold [default: 2].
    #[arg(long)]
    pub k: Option<usize>,
    /// Start at the Fréchet mean or at `--coords` [default: mean].
    #[arg(long, value_enum)]
    pub start: Option<StartMode>,
    /// Comma-separated start coordinates, projected onto the sphere.
    #[arg(long, value_name = "CSV-LIST", allow_hyphen_values = true)]
    pub coords: Option<String>,
    /// Override the chart recorded in the dataset metadata.
    #[arg(long, value_enum)]
    pub chart: Option<ChartArg>,
    /// Side of the shapes.json grid, odd [default: 9].
    #[arg(long)]
    pub grid_side: Option<usize>,
}

fn parse_family(s: &str) -> Result<Family, String> {
    s.parse().map_err(|_| format!("expected one of s_curve, sea_wave, ellipsoid; got `{s}`"))
}
