use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use log::info;

use micv::experiment::{self, ExperimentConfig};
use micv::{io, sim};

#[derive(Parser)]
#[command(name = "micv", version, about = "Multiple imputation inside cross-validation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a preset scenario and write it as CSV.
    Simulate {
        /// Preset name: crt-like or cll-like.
        #[arg(long)]
        scenario: String,
        /// Number of rows (defaults to the preset size).
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = io::DEFAULT_MISSING_TOKEN)]
        missing_token: String,
    },
    /// Run an experiment described by a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads; 0 uses one per core.
        #[arg(long)]
        parallelism: Option<usize>,
        /// Overrides the output directory.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Lifts the desk-scale caps on K and n.
        #[arg(long)]
        full: bool,
    },
    /// Build Brier and R tables from a results directory.
    Report {
        #[arg(long)]
        results: PathBuf,
        /// Defaults to the results directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn execute(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Simulate {
            scenario,
            n,
            seed,
            out,
            missing_token,
        } => {
            let mut preset = sim::preset(&scenario)?.with_seed(seed);
            if let Some(n) = n {
                preset = preset.with_n(n);
            }
            let data = preset.generate()?;
            io::save_csv(&data, &out, &missing_token)?;
            info!(
                "wrote {} rows ({} with missing cells) to {}",
                data.nrows(),
                (0..data.nrows()).filter(|&i| data.row_has_missing(i)).count(),
                out.display()
            );
        }
        Command::Run {
            config,
            seed,
            parallelism,
            output,
            full,
        } => {
            let mut cfg = ExperimentConfig::from_file(&config)
                .with_context(|| format!("reading config {}", config.display()))?;
            if let Some(seed) = seed {
                cfg.master_seed = seed;
            }
            if let Some(p) = parallelism {
                cfg.parallelism = p;
            }
            if let Some(output) = output {
                cfg.output = output;
            }
            cfg.full |= full;
            experiment::run(&cfg)?;
            info!("results written to {}", cfg.output.display());
        }
        Command::Report { results, out } => {
            let out = out.unwrap_or_else(|| results.clone());
            experiment::report(&results, &out)?;
            info!("tables written to {}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
