// Runs an experiment config the way the binary does.
//
//     cargo run --example run_config -- configs/examples/quickstart.toml out

use std::path::{Path, PathBuf};

use maxstable::experiment::{run_experiment, ExperimentConfig, RunOptions, RunSummary};
use maxstable::Result;

pub fn run(config: &Path, out: &Path) -> Result<RunSummary> {
    let cfg = ExperimentConfig::load(config)?;
    let summary = run_experiment(
        &cfg,
        &RunOptions {
            out_dir: Some(out.to_path_buf()),
            ..Default::default()
        },
    )?;
    for e in &summary.experiments {
        println!("{:<24} {:<14} rows {:>3}  failed {}", e.id, e.kind, e.rows, e.failed);
    }
    Ok(summary)
}

#[allow(dead_code)]
fn main() -> Result<()> {
    let mut args = std::env::args().skip(1);
    let config = args.next().map(PathBuf::from).unwrap_or_else(|| "configs/examples/quickstart.toml".into());
    let out = args.next().map(PathBuf::from).unwrap_or_else(|| "out".into());
    run(&config, &out).map(|_| ())
}
