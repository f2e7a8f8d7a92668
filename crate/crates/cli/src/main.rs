//! `lgcert`: bounds, optimization, simulation and certification from the
//! command line.
//!
//! Exit status: 0 success, 1 usage or invalid input, 2 non-convergence or
//! threshold not met, 3 I/O failure.

mod commands;
mod parse;
mod repro;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lgcert::bounds::Mode;

/// Version of every JSON document the tool writes.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Parser)]
#[command(name = "lgcert", version, about = "Certified randomness from Leggett-Garg inequality violations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Tabulate the analytic min-entropy bound.
    Bound(BoundArgs),
    /// Numerically maximize the adversary's guessing probability.
    Optimize(OptimizeArgs),
    /// Generate a reproducible trial stream.
    Simulate(SimulateArgs),
    /// Certify randomness from a trial file or an observed inequality value.
    Certify(CertifyArgs),
    /// Certified bits as a function of the number of rounds.
    MemoryCurve(MemoryCurveArgs),
    /// NSIT deviation radii, or an audit of a trial file against them.
    NsitAudit(NsitAuditArgs),
    /// Regenerate the headline numbers and figure data with a summary table.
    ReproPaper(ReproArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Joint,
    Conditional,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::Joint => Mode::Joint,
            ModeArg::Conditional => Mode::Conditional,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Args)]
pub struct BoundArgs {
    /// Single violation α in [0, 0.5].
    #[arg(long, conflicts_with = "grid", required_unless_present = "grid")]
    pub alpha: Option<f64>,
    /// Grid start:stop:step of α values.
    #[arg(long, value_parser = parse::grid_flag)]
    pub grid: Option<parse::Values>,
    #[arg(long, value_enum, default_value = "conditional")]
    pub mode: ModeArg,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    /// Violation α in (0, 0.5].
    #[arg(long, conflicts_with = "alpha_grid", required_unless_present = "alpha_grid")]
    pub alpha: Option<f64>,
    /// Allowed |NSIT_j|; 0 demands exact no-signalling-in-time.
    #[arg(long, default_value_t = 0.0, conflicts_with = "v_grid")]
    pub v: f64,
    /// α values (list or start:stop:step) for a randomness-vs-NSIT curve.
    #[arg(long, value_parser = parse::values_flag)]
    pub alpha_grid: Option<parse::Values>,
    /// NSIT tolerances (list or start:stop:step) for the curve.
    #[arg(long, value_parser = parse::values_flag)]
    pub v_grid: Option<parse::Values>,
    /// Objective; curves are always conditional.
    #[arg(long, value_enum, default_value = "conditional")]
    pub mode: ModeArg,
    /// Local searches per outcome.
    #[arg(long, default_value_t = 64)]
    pub restarts: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// json prints the full result, csv prints `alpha,v,bits,converged` rows.
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
}

/// Settings distribution flags.
#[derive(Debug, Args, Clone)]
pub struct DistArgs {
    /// `uniform` or `biased:p12,p23,p13` over the three pair settings.
    #[arg(long, value_parser = parse::distribution)]
    pub dist: Option<lgcert::certification::SettingsDistribution>,
    /// Share of rounds moved to the single-measurement settings (0,2) and (0,3).
    #[arg(long, conflicts_with = "no_nsit_audit")]
    pub singles: Option<f64>,
    /// Run no single-measurement rounds.
    #[arg(long)]
    pub no_nsit_audit: bool,
}

impl DistArgs {
    pub fn given(&self) -> bool {
        self.dist.is_some() || self.singles.is_some() || self.no_nsit_audit
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Use the saturating strategy for this α.
    #[arg(long, conflicts_with = "strategy", required_unless_present = "strategy")]
    pub canonical_alpha: Option<f64>,
    /// JSON strategy file with keys nx ny nz x1 y1 z1 x2 y2 z2 a b.
    #[arg(long)]
    pub strategy: Option<PathBuf>,
    /// Sinusoidal drift `param:amplitude:period`, e.g. z1:0.05:10000.
    #[arg(long, value_parser = parse::drift)]
    pub drift: Option<lgcert::simulator::Drift>,
    #[command(flatten)]
    pub dist: DistArgs,
    /// Number of rounds.
    #[arg(long, value_parser = parse::count)]
    pub n: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Trial file (JSON lines) with a manifest next to it; stdout if absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write the per-configuration bit strings here.
    #[arg(long)]
    pub bits_dir: Option<PathBuf>,
    /// Rounds per second used for the rate in the bit manifest.
    #[arg(long, default_value_t = lgcert::simulator::DEFAULT_ROUNDS_PER_SECOND)]
    pub rounds_per_second: f64,
}

#[derive(Debug, Args)]
pub struct CertifyArgs {
    /// Trial file written by `simulate` or in the same format.
    #[arg(long, conflicts_with = "i_value", required_unless_present = "i_value")]
    pub trials: Option<PathBuf>,
    /// Observed inequality value.
    #[arg(long = "I", id = "i_value", requires = "n")]
    pub i_value: Option<f64>,
    /// Number of rounds behind `--I`.
    #[arg(long, value_parser = parse::count)]
    pub n: Option<u64>,
    #[arg(long, default_value_t = 0.01)]
    pub delta: f64,
    #[command(flatten)]
    pub dist: DistArgs,
    #[arg(long, value_enum, default_value = "conditional")]
    pub mode: ModeArg,
    /// Ignore finite statistics (ε = 0).
    #[arg(long)]
    pub no_memory: bool,
}

#[derive(Debug, Args)]
pub struct MemoryCurveArgs {
    #[arg(long = "I")]
    pub i_value: f64,
    #[arg(long, default_value_t = 0.01)]
    pub delta: f64,
    /// Round counts (list or start:stop:step).
    #[arg(long, value_parser = parse::rounds_flag, default_value = "1000:100000:1000")]
    pub n_grid: parse::Rounds,
    #[command(flatten)]
    pub dist: DistArgs,
    #[arg(long, value_enum, default_value = "conditional")]
    pub mode: ModeArg,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct NsitAuditArgs {
    /// Round counts (list or start:stop:step) for the radius table.
    #[arg(long, value_parser = parse::rounds_flag, default_value = "10000:100000:10000")]
    pub n_grid: parse::Rounds,
    #[arg(long, default_value_t = 0.01)]
    pub delta: f64,
    /// Increment constant N_q of each NSIT martingale.
    #[arg(long, default_value_t = lgcert::certification::NSIT_INCREMENT)]
    pub nq: f64,
    /// Audit this trial file instead of tabulating radii.
    #[arg(long)]
    pub trials: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReproArgs {
    /// Directory for the CSV/JSON outputs and the summary table.
    #[arg(long, default_value = "repro")]
    pub out_dir: PathBuf,
    /// Local searches per outcome for the optimizer checks.
    #[arg(long, default_value_t = 64)]
    pub restarts: usize,
    /// Coarser grids and fewer rounds, for smoke testing.
    #[arg(long)]
    pub quick: bool,
    #[arg(long, default_value_t = 2024)]
    pub seed: u64,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return ExitCode::from(if usage { 1 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Bound(a) => commands::bound(a),
        Command::Optimize(a) => commands::optimize(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Certify(a) => commands::certify(a),
        Command::MemoryCurve(a) => commands::memory_curve(a),
        Command::NsitAudit(a) => commands::nsit_audit(a),
        Command::ReproPaper(a) => repro::run(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(commands::CliError::Stdout(e)) if e.kind() == std::io::ErrorKind::BrokenPipe => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
