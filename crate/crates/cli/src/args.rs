use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use jensen_chain_core::{Arithmetic, Family, FnKind};

#[derive(Debug, Parser)]
#[command(name = "jensen-chain", version, about = "Jensen functional bounds and refinement chains")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write seeded random instances as JSON lines.
    Gen(GenCmd),
    /// Run every instance of a file; one result per line.
    Run(RunCmd),
    /// Verify stored results; one report per line.
    Verify(IoCmd),
    /// Generate, run and verify in one go and write the aggregate report.
    Fuzz(FuzzCmd),
    /// Aggregate report and CSV summary for a results file.
    Report(ReportCmd),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Exact,
    Float,
}

impl From<Mode> for Arithmetic {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Exact => Arithmetic::Exact,
            Mode::Float => Arithmetic::Float,
        }
    }
}

fn parse_family(s: &str) -> Result<Family, String> {
    Family::from_name(s).map_err(|e| e.to_string())
}

fn parse_kind(s: &str) -> Result<FnKind, String> {
    FnKind::from_name(s).map_err(|e| e.to_string())
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Fixed number of points (sets both bounds).
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub n_min: Option<usize>,
    #[arg(long)]
    pub n_max: Option<usize>,
    /// Fixed number of chain steps (default: drawn from 1..=6).
    #[arg(long = "N")]
    pub steps: Option<usize>,
    /// Families to emit, comma separated (default: all).
    #[arg(long, value_delimiter = ',', value_parser = parse_family)]
    pub family: Vec<Family>,
    /// Function kinds to draw from, comma separated (default: all).
    #[arg(long, value_delimiter = ',', value_parser = parse_kind)]
    pub catalog: Vec<FnKind>,
    #[arg(long, default_value_t = 10_000)]
    pub denominator_max: u64,
}

#[derive(Debug, Args)]
pub struct GenCmd {
    #[command(flatten)]
    pub gen: GenArgs,
    /// Number of trials; each yields one instance per selected family.
    #[arg(long, default_value_t = 10)]
    pub count: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RunCmd {
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = Mode::Exact)]
    pub mode: Mode,
    /// Largest accepted N; upper-chain extremes grow geometrically with it.
    #[arg(long, default_value_t = jensen_chain_core::fuzz::MAX_STEPS)]
    pub max_steps: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct IoCmd {
    pub input: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FuzzCmd {
    #[command(flatten)]
    pub gen: GenArgs,
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    #[arg(long, value_enum, default_value_t = Mode::Exact)]
    pub mode: Mode,
    /// Aggregate JSON report (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// One-line-per-instance CSV summary.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportCmd {
    pub input: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub csv: Option<PathBuf>,
}
