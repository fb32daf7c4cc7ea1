use clap::{Args, Parser, Subcommand, ValueEnum};
use hyperu_core::estimator::DEFAULT_N_SCALES;
use hyperu_core::inference::DEFAULT_CI_DRAWS;
use hyperu_core::tapers::{DEFAULT_I_MAX, DEFAULT_TAPER_SCALE};
use hyperu_core::{SimVariant, TaperConfig};
use serde::Serialize;
use std::path::PathBuf;

#[derive(Debug, Parser)]
#[command(name = "hyperu", version, about = "Estimate the hyperuniformity exponent of a point pattern")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate α from one pattern, or the pooled mean over a sequence of frames.
    Estimate(EstimateArgs),
    /// Simulate a benchmark pattern to CSV with JSON metadata.
    Simulate(SimulateArgs),
    /// Write the diagnostic curve C(j), optionally with a Poisson reference.
    Curve(CurveArgs),
    /// Coverage rate of the confidence intervals over simulated replicates.
    Coverage(CoverageArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct InputArgs {
    /// CSV file(s) or glob pattern(s); several files are treated as frames.
    #[arg(long, short, required = true, num_args = 1..)]
    pub input: Vec<String>,

    #[arg(long, default_value_t = 2)]
    pub dim: usize,

    /// Window half-width R for the cube [-R, R]^d. When omitted the tight
    /// bounding cube of the data is used.
    #[arg(long)]
    pub half_width: Option<f64>,

    /// Drop points outside the window instead of failing.
    #[arg(long)]
    pub drop_outside: bool,
}

#[derive(Debug, Clone, Copy, Args, Serialize)]
pub struct TaperArgs {
    /// Tapers use Hermite orders below this bound.
    #[arg(long, default_value_t = DEFAULT_I_MAX)]
    pub imax: usize,

    /// Taper dilation c in ψ(c·).
    #[arg(long, default_value_t = DEFAULT_TAPER_SCALE)]
    pub taper_scale: f64,
}

impl TaperArgs {
    pub fn config(&self, dim: usize) -> TaperConfig {
        TaperConfig::new(dim, self.imax, self.taper_scale)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CiPreset {
    /// i_max = 4 and 25 scales.
    Reduced,
    /// The estimation tapers and scales.
    Full,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub input: InputArgs,

    #[command(flatten)]
    pub tapers: TaperArgs,

    #[arg(long)]
    pub jmin: Option<f64>,

    #[arg(long)]
    pub jmax: Option<f64>,

    #[arg(long, default_value_t = DEFAULT_N_SCALES)]
    pub nscales: usize,

    /// Explicit comma-separated scale list; overrides --jmin/--jmax/--nscales.
    #[arg(long, value_delimiter = ',', conflicts_with_all = ["jmin", "jmax"])]
    pub scales: Option<Vec<f64>>,

    /// Confidence level in (0, 1); no interval is computed without it.
    #[arg(long)]
    pub ci_level: Option<f64>,

    #[arg(long, default_value_t = DEFAULT_CI_DRAWS)]
    pub ci_draws: usize,

    #[arg(long, value_enum, default_value_t = CiPreset::Reduced)]
    pub ci_preset: CiPreset,

    /// Directory for cached covariance matrices.
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,

    /// Cross-check j_max against this many Poisson replicates.
    #[arg(long)]
    pub poisson_reference: Option<usize>,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// JSON report path (stdout when omitted). The curve is written next to it.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum VariantName {
    Poisson,
    Cloaked,
    Matched,
    Rsa,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ProcessArgs {
    #[arg(long, value_enum)]
    pub variant: VariantName,

    /// Poisson intensity.
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,

    /// Cloaked lattice stability index.
    #[arg(long)]
    pub alpha: Option<f64>,

    /// Cloaked lattice scale.
    #[arg(long)]
    pub sigma: Option<f64>,

    /// Matched process proposal intensity.
    #[arg(long, default_value_t = 2.0)]
    pub lambda_p: f64,

    /// RSA proposal intensity.
    #[arg(long, default_value_t = 3.0)]
    pub lambda_prop: f64,

    /// RSA hard-core distance.
    #[arg(long, default_value_t = 1.0)]
    pub r: f64,

    #[arg(long)]
    pub half_width: f64,
}

impl ProcessArgs {
    pub fn variant(&self) -> Result<SimVariant, String> {
        Ok(match self.variant {
            VariantName::Poisson => SimVariant::Poisson { lambda: self.lambda },
            VariantName::Cloaked => SimVariant::CloakedLattice {
                alpha: self.alpha.ok_or("--alpha is required for the cloaked lattice")?,
                sigma: self.sigma.ok_or("--sigma is required for the cloaked lattice")?,
            },
            VariantName::Matched => SimVariant::Matched { lambda_p: self.lambda_p },
            VariantName::Rsa => SimVariant::Rsa { lambda_prop: self.lambda_prop, r: self.r },
        })
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub process: ProcessArgs,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// CSV path (stdout when omitted).
    #[arg(long, short)]
    pub output: Option<PathBuf>,

    /// Metadata path; defaults to the CSV path with a `.json` extension.
    #[arg(long)]
    pub metadata: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CurveArgs {
    #[command(flatten)]
    pub input: InputArgs,

    #[command(flatten)]
    pub tapers: TaperArgs,

    /// Add the mean curve of this many Poisson replicates with the same R.
    #[arg(long)]
    pub poisson_reference: Option<usize>,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// CSV path (stdout when omitted).
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CoverageArgs {
    #[command(flatten)]
    pub process: ProcessArgs,

    #[arg(long)]
    pub true_alpha: f64,

    #[arg(long, default_value_t = 100)]
    pub replicates: usize,

    #[arg(long, default_value_t = 0.95)]
    pub ci_level: f64,

    #[arg(long, default_value_t = DEFAULT_CI_DRAWS)]
    pub ci_draws: usize,

    #[arg(long, default_value_t = 4)]
    pub imax: usize,

    #[arg(long, default_value_t = DEFAULT_TAPER_SCALE)]
    pub taper_scale: f64,

    #[arg(long, default_value_t = 25)]
    pub nscales: usize,

    /// Replicates used to choose the scale range.
    #[arg(long, default_value_t = 5)]
    pub pilots: usize,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    #[arg(long, short)]
    pub output: Option<PathBuf>,
}
