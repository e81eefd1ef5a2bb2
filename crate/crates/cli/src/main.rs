use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use fimstar_core::agent::final_window_mean;
use fimstar_core::harness::{complexity_report, emit_plot_data, load_config, run_experiment, Experiment};

/// Meta-SAC experiments on a FIM base station with a STAR-BD-RIS.
///
/// Any config key can be overridden through the environment as
/// `FIMSTAR_<SECTION>__<KEY>=<toml value>`, e.g.
/// `FIMSTAR_AGENT__LR_ACTOR=0.01`.
#[derive(Debug, Parser)]
#[command(name = "fimstar", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train every arm of an experiment and write one CSV per arm and seed.
    Run {
        /// lr_sweep, user_sweep, variant_compare or power_curve.
        experiment: Experiment,
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated seeds; defaults to the config's seed list.
        #[arg(long, value_delimiter = ',')]
        seeds: Vec<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print derived quantities of a config.
    Report {
        #[command(subcommand)]
        what: Report,
    },
    /// Merge per-seed training logs into a long-format mean/stderr table.
    Aggregate {
        #[arg(long)]
        out: PathBuf,
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
enum Report {
    /// Network sizes and the Σ ν_ℓ ν_{ℓ+1} weight count.
    Complexity {
        #[arg(long)]
        config: PathBuf,
    },
}

const FINAL_WINDOW: usize = 50;

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { experiment, config, seeds, out } => {
            let cfg = load_config(&config).with_context(|| format!("loading {}", config.display()))?;
            let seeds = if seeds.is_empty() { cfg.seeds.clone() } else { seeds };
            if seeds.is_empty() {
                bail!("no seeds given and the config lists none");
            }
            let results = run_experiment(experiment, &cfg, &seeds, Some(&out))?;
            for r in &results {
                let ee = final_window_mean(&r.log, FINAL_WINDOW, |l| l.ee);
                println!("{:<24} seed {:<4} final-window EE {ee:.4}", r.arm, r.seed);
            }
            eprintln!("wrote {} logs to {}", results.len(), out.display());
        }
        Command::Report { what: Report::Complexity { config } } => {
            let cfg = load_config(&config).with_context(|| format!("loading {}", config.display()))?;
            print!("{}", complexity_report(&cfg)?);
        }
        Command::Aggregate { out, inputs } => {
            let rows = emit_plot_data(&inputs, &out)?;
            eprintln!("wrote {rows} rows to {}", out.display());
        }
    }
    Ok(())
}
