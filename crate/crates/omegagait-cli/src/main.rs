//! Command-line harness for the omegagait library: gait simulation, sweep
//! orchestration, height-function maps, gait optimization, and peg-board
//! compliance studies, with CSV and SVG outputs.
//!
//! The `OMEGAGAIT_LOG` environment variable selects the log level
//! (`error|warn|info|debug|trace`); diagnostics go to stderr, results to
//! stdout and the output directory.

mod commands;
mod config;
mod error;
mod output;
mod plot;

use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

use config::{ExperimentConfig, OutputFormat};
use error::CliError;

#[derive(Parser)]
#[command(
    name = "omegagait",
    version,
    about = "Turning-gait design and quasi-static locomotion simulation for planar snake robots"
)]
struct Cli {
    /// Experiment configuration file.
    #[arg(long, global = true, value_name = "PATH", default_value = "omegagait.ini")]
    config: PathBuf,

    /// Output directory (overrides `[output] dir`).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Worker threads for independent sweep points (default: all cores).
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,

    /// Output formats (overrides `[output] format`).
    #[arg(long, global = true, value_enum)]
    format: Option<FormatArg>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    #[value(name = "csv+svg")]
    CsvSvg,
}

impl From<FormatArg> for OutputFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => OutputFormat::Csv,
            FormatArg::CsvSvg => OutputFormat::CsvSvg,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the configured gait and write its trajectory.
    Simulate,
    /// Optimize at every swept parameter point and tabulate the turning.
    Sweep,
    /// Sample the analysis-plane height functions and render heatmaps.
    Heightfun,
    /// Search the template parameters for the largest per-cycle turn.
    Optimize,
    /// Compare compliant and stiff turning through peg boards.
    Compliance,
}

fn main() {
    env_logger::Builder::from_env(
        env_logger::Env::new().filter_or("OMEGAGAIT_LOG", "warn"),
    )
    .format_timestamp(None)
    .init();

    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg =
        ExperimentConfig::load(&cli.config).map_err(|e| error::with_path(e, &cli.config))?;
    let out_dir = cli.out.clone().unwrap_or_else(|| cfg.output.dir.clone());
    let format = cli.format.map(OutputFormat::from).unwrap_or(cfg.output.format);

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs.unwrap_or(0))
        .build()
        .map_err(|e| CliError::config(format!("cannot build worker pool: {e}")))?;

    pool.install(|| match cli.command {
        Command::Simulate => commands::simulate(&cfg, &out_dir),
        Command::Sweep => commands::sweep(&cfg, &out_dir, format),
        Command::Heightfun => commands::heightfun(&cfg, &out_dir, format),
        Command::Optimize => commands::optimize(&cfg, &out_dir),
        Command::Compliance => commands::compliance(&cfg, &out_dir, format),
    })
}
