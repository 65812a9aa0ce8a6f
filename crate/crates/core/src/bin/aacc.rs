use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use aacc_core::harness::run::{describe, parse_vary, Progress};
use aacc_core::harness::{eval_checkpoint, export_plots, run_experiment, run_verification, sweep, EvalRecord, ExperimentConfig};
use aacc_core::Result;

#[derive(Parser)]
#[command(name = "aacc", version, about = "Asymmetric actor-critic experiments on contextual control tasks")]
struct Cli {
    /// Suppress per-evaluation progress lines.
    #[arg(long, short, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train every seed of a config and write curves, summary and checkpoints.
    Train { config: PathBuf },
    /// Evaluate a saved checkpoint under the config's evaluation distribution.
    Eval { checkpoint: PathBuf, config: PathBuf },
    /// Run the exact oracle and gradient checks.
    Verify,
    /// Run the config once per value of one key.
    Sweep {
        config: PathBuf,
        /// `key=v1,v2,...`, key as a dotted path such as `train.encoder_dim`.
        #[arg(long)]
        vary: String,
    },
    /// Write plot-ready CSVs for a run or sweep directory.
    ExportPlots { run_dir: PathBuf },
}

fn print_progress(r: &EvalRecord) {
    eprintln!(
        "seed {:>3}  iter {:>4}  steps {:>9}  eval mean {:>10.3}  [{:.3}, {:.3}]",
        r.seed, r.iteration, r.env_steps, r.mean, r.min, r.max
    );
}

fn run(cli: Cli) -> Result<bool> {
    let progress: Option<Progress> = if cli.quiet { None } else { Some(&print_progress) };
    match cli.command {
        Command::Train { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            let out = run_experiment(&cfg, progress)?;
            print!("{}", describe(&out));
        }
        Command::Eval { checkpoint, config } => {
            let cfg = ExperimentConfig::load(&config)?;
            let (r, success) = eval_checkpoint(&checkpoint, &cfg)?;
            println!("rollouts = {}", r.returns.len());
            println!("mean = {}", r.mean);
            println!("min = {}", r.min);
            println!("max = {}", r.max);
            println!("std = {}", r.std);
            if let Some(p) = success {
                println!("adaptation_success_ratio = {p}");
            }
        }
        Command::Verify => {
            let report = run_verification()?;
            println!("{report}");
            return Ok(report.passed());
        }
        Command::Sweep { config, vary } => {
            let (key, values) = parse_vary(&vary)?;
            let text = std::fs::read_to_string(&config)
                .map_err(|e| aacc_core::Error::Config(format!("{}: {e}", config.display())))?;
            for out in sweep(&text, &key, &values, progress)? {
                print!("{}", describe(&out));
            }
        }
        Command::ExportPlots { run_dir } => {
            for p in export_plots(&run_dir)? {
                println!("{}", p.display());
            }
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
