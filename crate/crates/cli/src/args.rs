use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "portdist",
    version,
    about = "Cross-sectional distribution of long-only portfolio returns"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Score (CDF) of a return level in one market snapshot.
    Cdf(CdfArgs),
    /// Density of the portfolio return in one market snapshot.
    Pdf(PdfArgs),
    /// Moment of the portfolio return distribution.
    Moments(MomentsArgs),
    /// Monte Carlo distribution of portfolio scores.
    ScoreDist(ScoreDistArgs),
    /// Score-based or mean-variance optimal weights.
    Optimize(OptimizeArgs),
    /// Rolling-window out-of-sample backtest.
    Backtest(BacktestArgs),
    /// Uniform draws from the long-only simplex.
    SampleSimplex(SampleSimplexArgs),
}

/// `lo:hi:count`, evenly spaced and inclusive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

pub fn parse_grid(s: &str) -> Result<Grid, String> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(format!("expected lo:hi:count, got {s:?}"));
    }
    let num = |p: &str| {
        p.trim()
            .parse::<f64>()
            .map_err(|_| format!("{p:?} is not a number"))
    };
    let (lo, hi) = (num(parts[0])?, num(parts[1])?);
    let count: usize = parts[2]
        .trim()
        .parse()
        .map_err(|_| format!("{:?} is not a point count", parts[2]))?;
    if !(lo.is_finite() && hi.is_finite()) || hi < lo {
        return Err(format!("need finite lo <= hi, got {lo}:{hi}"));
    }
    if count < 2 {
        return Err("a grid needs at least 2 points".into());
    }
    Ok(Grid { lo, hi, count })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// Write to this file instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct SnapshotArgs {
    /// Return matrix CSV (header row of asset names).
    #[arg(long)]
    pub returns: PathBuf,
    /// 0-based data row; required when the file has more than one row.
    #[arg(long)]
    pub row: Option<usize>,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct PointOrGrid {
    /// Evaluate at one return level.
    #[arg(long, allow_hyphen_values = true)]
    pub at: Option<f64>,
    /// Evaluate on `lo:hi:count`.
    #[arg(long, value_parser = parse_grid, allow_hyphen_values = true)]
    pub grid: Option<Grid>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CdfMethodArg {
    Varsi,
    Closed,
}

#[derive(Debug, Args)]
pub struct CdfArgs {
    #[command(flatten)]
    pub snapshot: SnapshotArgs,
    #[command(flatten)]
    pub points: PointOrGrid,
    #[arg(long, value_enum, default_value_t = CdfMethodArg::Varsi)]
    pub method: CdfMethodArg,
    /// Returns within this distance are treated as equal by the closed form.
    #[arg(long, default_value_t = 0.0)]
    pub group_tol: f64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PdfMethodArg {
    Bspline,
    Closed,
    Numeric,
}

#[derive(Debug, Args)]
pub struct PdfArgs {
    #[command(flatten)]
    pub snapshot: SnapshotArgs,
    #[command(flatten)]
    pub points: PointOrGrid,
    #[arg(long, value_enum, default_value_t = PdfMethodArg::Bspline)]
    pub method: PdfMethodArg,
    #[arg(long, default_value_t = 0.0)]
    pub group_tol: f64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MomentMethodArg {
    /// Closed form for orders up to 4, partitions above.
    Auto,
    Closed,
    General,
}

#[derive(Debug, Args)]
pub struct MomentsArgs {
    #[command(flatten)]
    pub snapshot: SnapshotArgs,
    #[arg(long)]
    pub order: usize,
    #[arg(long, value_enum, default_value_t = MomentMethodArg::Auto)]
    pub method: MomentMethodArg,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SamplerArg {
    Gaussian,
    Empirical,
    File,
}

#[derive(Debug, Args)]
pub struct ScoreDistArgs {
    /// Portfolio weights CSV, one portfolio per row.
    #[arg(long)]
    pub weights: PathBuf,
    /// Only this 0-based weights row.
    #[arg(long)]
    pub row: Option<usize>,
    /// Rescale each weight row to sum to one.
    #[arg(long)]
    pub normalize: bool,
    #[arg(long, value_enum, default_value_t = SamplerArg::Gaussian)]
    pub sampler: SamplerArg,
    /// Mean vector CSV (gaussian, default zero).
    #[arg(long)]
    pub mean: Option<PathBuf>,
    /// Covariance CSV (gaussian).
    #[arg(long)]
    pub cov: Option<PathBuf>,
    /// Return history to bootstrap (empirical).
    #[arg(long)]
    pub returns: Option<PathBuf>,
    /// Pre-drawn return samples, used in order (file).
    #[arg(long)]
    pub samples: Option<PathBuf>,
    /// Defaults to 100000, or every row for the file sampler.
    #[arg(long)]
    pub draws: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Measures to report (default all four).
    #[arg(long, value_delimiter = ',')]
    pub measure: Vec<String>,
    #[arg(long, default_value_t = portdist::scoredist::DEFAULT_S_STAR)]
    pub s_star: f64,
    /// Also emit the raw score samples.
    #[arg(long)]
    pub include_samples: bool,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OptimizeMethodArg {
    Score,
    MeanVariance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScenariosArg {
    InSample,
    Bootstrap,
    Gaussian,
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    #[arg(long, value_enum, default_value_t = OptimizeMethodArg::Score)]
    pub method: OptimizeMethodArg,
    /// In-sample return history.
    #[arg(long)]
    pub returns: Option<PathBuf>,
    /// Mean vector CSV (mean-variance; defaults to the returns' column means).
    #[arg(long)]
    pub mean: Option<PathBuf>,
    /// Covariance CSV (mean-variance; defaults to the returns' biased covariance).
    #[arg(long)]
    pub cov: Option<PathBuf>,
    #[arg(long, default_value = "B")]
    pub measure: String,
    #[arg(long, default_value_t = portdist::scoredist::DEFAULT_S_STAR)]
    pub s_star: f64,
    #[arg(long)]
    pub variance_target: Option<f64>,
    #[arg(long, value_enum, default_value_t = ScenariosArg::Gaussian)]
    pub scenarios: ScenariosArg,
    #[arg(long, default_value_t = 10_000)]
    pub draws: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1000)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 1e-8)]
    pub tolerance: f64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct BacktestArgs {
    #[arg(long)]
    pub returns: PathBuf,
    /// `key = value` config file; flags given explicitly override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub window: Option<usize>,
    /// Comma-separated: ew, mv, A, B, C, D.
    #[arg(long)]
    pub strategies: Option<String>,
    #[arg(long)]
    pub s_star: Option<f64>,
    /// Constrain MV and score strategies to the mean uniform-portfolio volatility.
    #[arg(long)]
    pub volatility_target: bool,
    #[arg(long, allow_hyphen_values = true)]
    pub risk_free: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long)]
    pub draws: Option<usize>,
    #[arg(long, value_enum)]
    pub scenarios: Option<ScenariosArg>,
    /// Also write the per-period CSV series here.
    #[arg(long)]
    pub series: Option<PathBuf>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct SampleSimplexArgs {
    #[arg(long)]
    pub assets: usize,
    #[arg(long, default_value_t = 1000)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub output: OutputArgs,
}
