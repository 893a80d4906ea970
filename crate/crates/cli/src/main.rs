use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use mismatch_relay_cli::commands::{self, EXIT_ERROR};
use mismatch_relay_cli::{RunConfig, Units};

#[derive(Parser)]
#[command(
    name = "mismatch-relay",
    version,
    about = "Mismatch capacity with an oblivious relay"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Run configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Overrides `solver.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Overrides `solver.max_iter`.
    #[arg(long, global = true)]
    max_iter: Option<usize>,

    /// Output path prefix; overrides `output`.
    #[arg(long, global = true)]
    out: Option<String>,

    /// Units for reported rates; overrides `report_units`.
    #[arg(long, global = true, value_enum)]
    units: Option<Units>,

    /// Worker threads for sweeps; defaults to the available cores.
    #[arg(long, global = true)]
    workers: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve once and write the report and trace.
    Run,
    /// Solve at every value of the configured sweep axis.
    Sweep,
    /// Solve an AWGN configuration and write the quantizer as a heatmap CSV.
    ExportQuantizer,
    /// Print the LM rate of a joint distribution under a metric.
    LmRate { joint: PathBuf, metric: PathBuf },
}

impl Cli {
    fn config(&self) -> Result<RunConfig> {
        let path = self.config.as_ref().context("--config is required for this command")?;
        let mut config = RunConfig::load(path)?;
        if let Some(seed) = self.seed {
            config.solver.seed = seed;
        }
        if let Some(max_iter) = self.max_iter {
            config.solver.max_iter = max_iter;
        }
        if let Some(out) = &self.out {
            config.output = out.clone();
        }
        if let Some(units) = self.units {
            config.report_units = units;
        }
        config.validate()?;
        Ok(config)
    }
}

fn dispatch(cli: &Cli) -> Result<i32> {
    match &cli.command {
        Command::Run => commands::run(&cli.config()?),
        Command::Sweep => {
            let workers = cli
                .workers
                .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
            commands::sweep(&cli.config()?, workers.max(1))
        }
        Command::ExportQuantizer => commands::export_quantizer(&cli.config()?),
        Command::LmRate { joint, metric } => {
            let units = cli.units.unwrap_or_default();
            let rate = commands::lm_rate(joint, metric, units)?;
            println!("{} {}", mismatch_relay_cli::output::fmt_f64(rate), units.suffix());
            Ok(commands::EXIT_OK)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_ERROR as u8)
        }
    }
}
