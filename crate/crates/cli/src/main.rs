mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::output::CliError;

#[derive(Parser, Debug)]
#[command(name = "rrvalue", version, about = "RR-value surprise statistics for name clusters")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Analysis config (JSON); the shipped Talpiot analysis when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for every stochastic step (overrides the config).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Table)]
    pub format: Format,
    /// Also write JSON, CSV and manifest files into this directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Table,
    Json,
    Csv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Exact,
    Mc,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum Command {
    /// Validate a lexicon CSV.
    Ingest {
        /// Lexicon CSV; defaults to the config's lexicon.
        lexicon: Option<PathBuf>,
    },
    /// Per-slot and cluster RR values.
    Rr,
    /// Null tail area at the cluster RR.
    Tail {
        /// Repeat to run several methods.
        #[arg(long = "method", value_enum)]
        methods: Vec<Method>,
        /// Monte Carlo sample count (overrides the config).
        #[arg(long)]
        samples: Option<u64>,
        /// Threshold as a decimal or `num/den`; defaults to the cluster RR.
        #[arg(long)]
        threshold: Option<String>,
    },
    /// Multiplicity bound, posteriors and the scenario comparator.
    Posterior {
        /// Alpha variant for the headline rows.
        #[arg(long)]
        alpha: Option<String>,
        /// Prior grid (repeatable; overrides the config).
        #[arg(long = "theta")]
        thetas: Vec<f64>,
    },
    /// Re-run the analysis under each configured modification.
    Sensitivity {
        /// Evaluate every variant at the base cluster RR.
        #[arg(long)]
        shared_threshold: bool,
    },
    /// Operating characteristics on simulated worlds.
    Simulate {
        /// Tombs per world (overrides the config).
        #[arg(long)]
        tombs: Option<u64>,
        /// Keep planted renditions fixed.
        #[arg(long)]
        fixed_renditions: bool,
        /// Also evaluate the scenario comparator per tomb.
        #[arg(long)]
        scenarios: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = std::panic::catch_unwind(|| run(&cli));
    match result {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
        Err(_) => ExitCode::from(1),
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let pool = match cli.workers {
        Some(0) => return Err(CliError::Input("--workers must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new().num_threads(n).build(),
        None => rayon::ThreadPoolBuilder::new().build(),
    }
    .map_err(|e| CliError::Internal(e.to_string()))?;
    pool.install(|| commands::dispatch(cli))
}
