use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use maxstable::experiment::{run_experiment, ExperimentConfig, RunOptions};

/// Runs max-stable process experiments declared in a TOML config.
#[derive(Parser, Debug)]
#[command(name = "maxstable", version)]
struct Cli {
    /// Experiment config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides the config).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Master seed (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; output does not depend on this.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Run only this experiment id; repeatable.
    #[arg(long = "experiment", global = true)]
    experiments: Vec<String>,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Every experiment in the config.
    Run,
    /// D-norm, generator constant, fidi and Takahashi experiments.
    Dnorm,
    /// Simulation, margin and max-stability experiments.
    Simulate,
    /// Diagnostics, optionally restricted to one kind.
    Diagnose {
        #[command(subcommand)]
        which: Option<Diagnostic>,
    },
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Diagnostic {
    Spectral,
    Tail,
    Doa,
    Blocks,
    Rate,
    Survivor,
    Counterexample,
    Vonmises,
}

const DIAGNOSE_KINDS: &[&str] = &[
    "spectral",
    "tail",
    "doa",
    "blocks",
    "rate",
    "survivor",
    "counterexample",
    "vonmises",
];

fn kinds(cmd: &Option<Command>) -> Vec<String> {
    let k: &[&str] = match cmd {
        None | Some(Command::Run) => &[],
        Some(Command::Dnorm) => &["dnorm", "generator", "fidi", "takahashi"],
        Some(Command::Simulate) => &["simulate", "msp_margins", "max_stability", "gpp_df", "margins"],
        Some(Command::Diagnose { which: None }) => DIAGNOSE_KINDS,
        Some(Command::Diagnose { which: Some(d) }) => {
            return vec![format!("{d:?}").to_lowercase()];
        }
    };
    k.iter().map(|s| s.to_string()).collect()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let Some(path) = &cli.config else {
        eprintln!("error: --config is required");
        return ExitCode::from(2);
    };
    let result = ExperimentConfig::load(path).and_then(|cfg| {
        let opts = RunOptions {
            out_dir: cli.out.clone(),
            seed: cli.seed,
            threads: cli.threads,
            experiments: cli.experiments.clone(),
            kinds: kinds(&cli.command),
        };
        run_experiment(&cfg, &opts)
    });
    match result {
        Ok(summary) => {
            for e in &summary.experiments {
                let status = if e.pass { "pass" } else { "FAIL" };
                println!("{status} {} ({}, {} rows, {:.2}s)", e.id, e.kind, e.rows, e.wall_seconds);
            }
            println!("summary: {}", summary.summary_file.display());
            if summary.all_pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
