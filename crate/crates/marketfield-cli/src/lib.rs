//! Command-line front end for the `marketfield` library.
//!
//! Five subcommands cover the pipeline: `lyapunov` (stability check),
//! `analyze` (single-window attractor analysis), `evolve` (per-subwindow
//! evolution), `coherence` (two-asset wavelet coherence) and `synth`
//! (ground-truth trajectory generation). Every run reads one flat
//! key = value config file, writes its artifacts plus a resolved-config
//! echo into one output directory, and is byte-for-byte reproducible.

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub mod commands;
pub mod config;
pub mod reports;

use marketfield::attractor::AttractorError;
use marketfield::gp_field::GpError;
use marketfield::lyapunov::LyapunovError;
use marketfield::market_data::MarketDataError;
use marketfield::pipeline::PipelineError;
use marketfield::synth::SynthError;
use marketfield::wavelet::WaveletError;

/// Exit code 2: bad config, bad flags, unreadable or unusable input data.
/// Exit code 3: the data was accepted but the numerics broke down.
#[derive(Debug)]
pub enum AppError {
    Usage(String),
    Data(String),
    Numerical(String),
}

impl AppError {
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Usage(_) | AppError::Data(_) => 2,
            AppError::Numerical(_) => 3,
        }
    }
}

impl std::fmt::Display for AppError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AppError::Usage(m) => write!(f, "{m}"),
            AppError::Data(m) => write!(f, "{m}"),
            AppError::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl From<PipelineError> for AppError {
    fn from(e: PipelineError) -> Self {
        if e.is_numerical() {
            AppError::Numerical(e.to_string())
        } else {
            AppError::Data(e.to_string())
        }
    }
}

impl From<MarketDataError> for AppError {
    fn from(e: MarketDataError) -> Self {
        PipelineError::from(e).into()
    }
}

impl From<GpError> for AppError {
    fn from(e: GpError) -> Self {
        PipelineError::from(e).into()
    }
}

impl From<AttractorError> for AppError {
    fn from(e: AttractorError) -> Self {
        PipelineError::from(e).into()
    }
}

impl From<LyapunovError> for AppError {
    fn from(e: LyapunovError) -> Self {
        AppError::Data(e.to_string())
    }
}

impl From<WaveletError> for AppError {
    fn from(e: WaveletError) -> Self {
        AppError::Data(e.to_string())
    }
}

impl From<SynthError> for AppError {
    fn from(e: SynthError) -> Self {
        AppError::Usage(e.to_string())
    }
}

/// Wraps an io error with the path it happened on.
pub fn io_err(path: &std::path::Path, e: std::io::Error) -> AppError {
    AppError::Data(format!("io error on {}: {e}", path.display()))
}

#[derive(Parser, Debug)]
#[command(
    name = "marketfield",
    version,
    about = "Potential-field analytics for co-moving asset prices"
)]
pub struct Cli {
    /// Config file, flat `key = value` lines (for `synth`: the simulation spec)
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Output directory, overrides the `out` config key
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,

    /// Seed override for `gp.seed` (and `seed` in synth specs)
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,

    /// Print every documented config key with its default value, then exit
    #[arg(long, global = true)]
    pub print_defaults: bool,

    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    /// Estimate pairwise-separation exponents and emit a stability verdict
    Lyapunov,
    /// Run the single-window attractor analysis end to end
    Analyze,
    /// Split the window into subwindows and track the attractor over time
    Evolve,
    /// Compute the wavelet-coherence map of exactly two assets
    Coherence,
    /// Integrate a synthetic trajectory in a known potential
    Synth,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Lyapunov => "lyapunov",
            Command::Analyze => "analyze",
            Command::Evolve => "evolve",
            Command::Coherence => "coherence",
            Command::Synth => "synth",
        }
    }
}

/// Parses arguments, dispatches, and maps every failure to its exit code.
/// The process itself only ever calls this and exits with the result.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            // clap renders --help/--version as "errors"; keep their output on
            // stdout and their conventional success code.
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };

    if cli.print_defaults {
        print!("{}", config::render_defaults());
        return 0;
    }

    let Some(command) = cli.command else {
        eprintln!("error: no subcommand given (try --help or --print-defaults)");
        return 2;
    };

    match commands::dispatch(command, &cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
