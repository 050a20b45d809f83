//! Command-line front end: synthetic cities, graphs, training, evaluation,
//! radius sweeps, predictions and interpretability reports.
//!
//! Every command writes its artifacts plus a `manifest.json` into `--out`.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub mod commands;
pub mod context;
pub mod error;
pub mod manifest;

pub use error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "hedon", version, about = "Learn virtual prices of public facilities and value residential blocks")]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

/// Flags shared by every subcommand. Values given here override the
/// corresponding fields of `--config`.
#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Influencing radius in kilometers.
    #[arg(long, global = true)]
    pub radius_km: Option<f64>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Number of map shards.
    #[arg(long, global = true)]
    pub shards: Option<usize>,
    /// JSON configuration (synthetic city for `generate`, training otherwise).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    #[arg(long, global = true, default_value = "info")]
    pub log_level: log::LevelFilter,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic city with planted parameters.
    Generate,
    /// Build the neighbor graph of a POI file.
    BuildGraph(commands::graph::BuildGraphArgs),
    /// Train a model and keep the best snapshot on validation.
    Train(commands::train::TrainArgs),
    /// Score a snapshot or baselines on the test split.
    Evaluate(commands::evaluate::EvaluateArgs),
    /// Train one model per radius and compare them.
    Sweep(commands::sweep::SweepArgs),
    /// Predict block prices with a per-neighbor breakdown.
    Predict(commands::predict::PredictArgs),
    /// Attribute, distance and facility interpretability tables.
    Report(commands::report::ReportArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Generate => "generate",
            Command::BuildGraph(_) => "build-graph",
            Command::Train(_) => "train",
            Command::Evaluate(_) => "evaluate",
            Command::Sweep(_) => "sweep",
            Command::Predict(_) => "predict",
            Command::Report(_) => "report",
        }
    }
}

pub fn execute(cli: Cli, argv: Vec<String>) -> CliResult<()> {
    let mut run = manifest::Run::start(cli.command.name(), argv, &cli.common.out)?;
    let outcome = match &cli.command {
        Command::Generate => commands::generate::run(&cli.common, &mut run),
        Command::BuildGraph(a) => commands::graph::run(&cli.common, a, &mut run),
        Command::Train(a) => commands::train::run(&cli.common, a, &mut run),
        Command::Evaluate(a) => commands::evaluate::run(&cli.common, a, &mut run),
        Command::Sweep(a) => commands::sweep::run(&cli.common, a, &mut run),
        Command::Predict(a) => commands::predict::run(&cli.common, a, &mut run),
        Command::Report(a) => commands::report::run(&cli.common, a, &mut run),
    };
    match outcome {
        Ok(()) => run.finish(None),
        Err(e) => {
            if let Err(m) = run.finish(Some(e.to_string())) {
                log::warn!("could not write manifest: {m}");
            }
            Err(e)
        }
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let _ = env_logger::Builder::new()
        .filter_level(cli.common.log_level)
        .format_timestamp(None)
        .try_init();
    let argv = args.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    match execute(cli, argv) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
