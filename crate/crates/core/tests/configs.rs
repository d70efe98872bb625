// Every checked-in config parses, resolves and survives a TOML round trip.

use std::fs;
use std::path::{Path, PathBuf};

use maxstable::experiment::{kind_of, ExperimentConfig};

fn configs(sub: &str) -> Vec<PathBuf> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(sub);
    let mut v: Vec<PathBuf> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "toml"))
        .collect();
    v.sort();
    v
}

#[test]
fn all_configs_validate() {
    let all: Vec<PathBuf> = configs("acceptance").into_iter().chain(configs("examples")).collect();
    assert_eq!(all.len(), 17);
    for p in all {
        let cfg = ExperimentConfig::load(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
        cfg.validate().unwrap_or_else(|e| panic!("{}: {e}", p.display()));
        let back = ExperimentConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(back.experiments, cfg.experiments, "{}", p.display());
    }
}

#[test]
fn example_configs_cover_every_kind() {
    let mut kinds: Vec<String> = configs("examples")
        .iter()
        .flat_map(|p| ExperimentConfig::load(p).unwrap().experiments)
        .map(|e| kind_of(&e))
        .collect();
    kinds.sort();
    kinds.dedup();
    let expected = [
        "blocks",
        "counterexample",
        "dnorm",
        "doa",
        "fidi",
        "gpp_df",
        "generator",
        "margins",
        "max_stability",
        "msp_margins",
        "rate",
        "simulate",
        "spectral",
        "survivor",
        "tail",
        "takahashi",
        "vonmises",
    ];
    let mut expected: Vec<String> = expected.iter().map(|s| s.to_string()).collect();
    expected.sort();
    assert_eq!(kinds, expected);
}

#[test]
fn acceptance_configs_pin_seeds() {
    for p in configs("acceptance") {
        let text = fs::read_to_string(&p).unwrap();
        assert!(text.lines().any(|l| l.starts_with("seed = ")), "{}", p.display());
    }
}
