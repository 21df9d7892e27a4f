mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use dmdc_core::io::MatrixFormat;
use dmdc_core::linalg::TruncationPolicy;
use dmdc_core::DmdcError;

/// Identify linear dynamics and input maps from snapshot data.
#[derive(Parser, Debug)]
#[command(name = "dmdc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit a plain DMD model (no inputs).
    Fit(FitArgs),
    /// Fit a DMD-with-control model, with or without a known input map.
    Fitc(FitcArgs),
    /// Generate one of the reference datasets.
    Synth(SynthArgs),
    /// Compare a model's spectrum and modes against ground truth or another model.
    Compare(CompareArgs),
    /// Tabulate frequency-response singular values.
    Freqresp(FreqrespArgs),
}

#[derive(Args, Debug)]
struct DataArgs {
    /// Trajectory matrix, one snapshot per column; split into X and X'.
    #[arg(long, conflicts_with_all = ["x", "xp"])]
    traj: Option<PathBuf>,
    #[arg(long, requires = "xp")]
    x: Option<PathBuf>,
    #[arg(long, requires = "x")]
    xp: Option<PathBuf>,
    /// Input files store one snapshot per row.
    #[arg(long)]
    transpose_input: bool,
}

#[derive(Args, Debug)]
struct OutputArgs {
    /// Sampling interval.
    #[arg(long, default_value_t = 1.0)]
    dt: f64,
    /// Seed recorded in the model provenance.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Write the real part of each unit-norm mode as a GRID x GRID CSV image.
    #[arg(long, value_name = "GRID")]
    mode_images: Option<usize>,
}

#[derive(Args, Debug)]
struct FitArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Explicit truncation rank.
    #[arg(long)]
    rank_r: Option<usize>,
    /// Relative singular-value threshold.
    #[arg(long, conflicts_with = "rank_r")]
    svd_threshold: Option<f64>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
struct FitcArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Input matrix, one input vector per column.
    #[arg(long)]
    upsilon: PathBuf,
    /// Known input map; selects the known-map estimator.
    #[arg(long)]
    b_matrix: Option<PathBuf>,
    /// Explicit rank of the stacked state/input space.
    #[arg(long)]
    rank_p: Option<usize>,
    /// Explicit rank of the output space.
    #[arg(long)]
    rank_r: Option<usize>,
    /// Relative singular-value threshold for both spaces.
    #[arg(long, conflicts_with_all = ["rank_p", "rank_r"])]
    svd_threshold: Option<f64>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FormatArg {
    Csv,
    Bin,
}

impl From<FormatArg> for MatrixFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => MatrixFormat::Csv,
            FormatArg::Bin => MatrixFormat::Bin,
        }
    }
}

#[derive(Args, Debug)]
struct SynthArgs {
    /// Which reference system: 1 feedback, 2 random stable, 3 sparse Fourier field.
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3))]
    example: u8,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of snapshots (defaults: 5, 200, 60).
    #[arg(long)]
    m: Option<usize>,
    /// Initial state for example 1.
    #[arg(long, value_delimiter = ',', num_args = 2, default_values_t = [4.0, 7.0], allow_negative_numbers = true)]
    x0: Vec<f64>,
    /// Feedback gain for example 1.
    #[arg(long, default_value_t = -1.0, allow_negative_numbers = true)]
    gain: f64,
    #[arg(long, default_value_t = 5)]
    states: usize,
    #[arg(long, default_value_t = 2)]
    inputs: usize,
    #[arg(long, default_value_t = 100)]
    outputs: usize,
    /// Grid side for example 3 (power of two).
    #[arg(long, default_value_t = 128)]
    grid: usize,
    /// Active Fourier modes for example 3.
    #[arg(long, default_value_t = 5)]
    modes: usize,
    /// JSON actuator description for example 3.
    #[arg(long)]
    actuation: Option<PathBuf>,
    /// Gaussian noise level relative to the signal RMS.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
    format: FormatArg,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct CompareArgs {
    /// Fitted model document.
    #[arg(long)]
    model: PathBuf,
    /// Ground-truth document or a second model.
    #[arg(long)]
    against: PathBuf,
    /// Write compare.csv here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct FreqrespArgs {
    /// Model document; its reduced operators and basis form the realization.
    #[arg(long, conflicts_with_all = ["a", "b", "c"], required_unless_present = "a")]
    model: Option<PathBuf>,
    #[arg(long, requires = "b")]
    a: Option<PathBuf>,
    #[arg(long, requires = "a")]
    b: Option<PathBuf>,
    /// Output map; identity when omitted.
    #[arg(long, requires = "a")]
    c: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0)]
    dt: f64,
    #[arg(long, default_value_t = 1e-3)]
    omega_min: f64,
    #[arg(long, default_value_t = std::f64::consts::PI)]
    omega_max: f64,
    #[arg(long, default_value_t = 200)]
    omega_count: usize,
    /// Write freqresp.csv here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Core(DmdcError),
}

impl From<DmdcError> for CliError {
    fn from(e: DmdcError) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Core(e) => match e {
                DmdcError::TruncationOrder { .. } | DmdcError::InvalidConfig(_) => 1,
                DmdcError::InvalidInput(_)
                | DmdcError::Shape(_)
                | DmdcError::InsufficientData(_)
                | DmdcError::Format { .. }
                | DmdcError::Parse { .. }
                | DmdcError::Length(_)
                | DmdcError::Schema(_)
                | DmdcError::Io { .. } => 2,
                DmdcError::Degenerate(_)
                | DmdcError::Numerical(_)
                | DmdcError::Divergence { .. }
                | DmdcError::SingularFrequency { .. } => 3,
            },
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "usage: {msg}"),
            CliError::Core(e) => e.fmt(f),
        }
    }
}

fn truncation(rank: Option<usize>, threshold: Option<f64>) -> Result<TruncationPolicy, CliError> {
    match (rank, threshold) {
        (Some(0), _) => Err(CliError::Usage("ranks must be at least 1".into())),
        (Some(k), _) => Ok(TruncationPolicy::Rank(k)),
        (None, Some(tau)) if !(tau > 0.0 && tau < 1.0) => {
            Err(CliError::Usage(format!("--svd-threshold must lie in (0, 1), got {tau}")))
        }
        (None, Some(tau)) => Ok(TruncationPolicy::Threshold(tau)),
        (None, None) => Ok(TruncationPolicy::default()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    ExitCode::SUCCESS
                }
                _ => ExitCode::from(1),
            };
        }
    };
    let result = match cli.command {
        Command::Fit(args) => commands::fit(args),
        Command::Fitc(args) => commands::fitc(args),
        Command::Synth(args) => commands::synth(args),
        Command::Compare(args) => commands::compare(args),
        Command::Freqresp(args) => commands::freqresp(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
