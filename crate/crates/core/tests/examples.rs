// Each cargo example at a reduced size, with a loose sanity check on what it returns.

macro_rules! example {
    ($name:ident) => {
        #[allow(dead_code)]
        mod $name {
            include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/", stringify!($name), ".rs"));
        }
    };
}

example!(function_bank);
example!(dnorm_estimation);
example!(generator_validation);
example!(simulate_paths);
example!(max_stability);
example!(gpp_spectral);
example!(copula_tail);
example!(domain_of_attraction);
example!(convergence_rate);
example!(block_maxima);
example!(survivor_and_counterexample);
example!(von_mises);
example!(general_margins);
example!(takahashi);
example!(run_config);

#[test]
fn bank_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(function_bank::run(dir.path()).unwrap(), 20);
}

#[test]
fn dnorm_values_respect_lower_bound() {
    for (id, d) in dnorm_estimation::run(5_000).unwrap() {
        assert!(d >= 0.5 - 1e-9, "{id}: {d}");
    }
}

#[test]
fn user_generator_validates() {
    let (ok, m) = generator_validation::run(5_000).unwrap();
    assert!(ok);
    assert!((m - 1.5).abs() < 1e-12);
}

#[test]
fn paths_use_poisson_terms() {
    assert!(simulate_paths::run(4).unwrap() >= 4);
}

#[test]
fn max_stability_small() {
    assert!(max_stability::run(1_000).unwrap() < 0.06);
}

#[test]
fn gpp_slope_is_the_dnorm() {
    assert!((gpp_spectral::run(20_000).unwrap() - 1.5).abs() < 0.03);
}

#[test]
fn copula_oracle_approaches_one() {
    let o = copula_tail::run(5_000).unwrap();
    assert!(o.windows(2).all(|w| (w[1] - 1.0).abs() <= (w[0] - 1.0).abs()));
}

#[test]
fn doa_deviation_shrinks() {
    let d = domain_of_attraction::run(20_000).unwrap();
    assert!(d.last().unwrap().abs() < d[0].abs());
}

#[test]
fn rate_slope_near_minus_one() {
    let s = convergence_rate::run(20_000).unwrap().unwrap();
    assert!((-1.3..=-0.7).contains(&s), "{s}");
}

#[test]
fn block_model_matches() {
    let (emp, model) = block_maxima::run(2_000).unwrap();
    assert!((emp - model).abs() < 0.05);
}

#[test]
fn counterexample_separates() {
    let (p, pn) = survivor_and_counterexample::run(20_000).unwrap();
    assert!(p - pn > 0.1);
}

#[test]
fn von_mises_runs() {
    assert!(von_mises::run(5_000).unwrap());
}

#[test]
fn margins_round_trip() {
    assert!(general_margins::run(20).unwrap() < 1e-9);
}

#[test]
fn takahashi_verdicts() {
    assert_eq!(takahashi::run(5_000).unwrap(), vec![true, true]);
}

#[test]
fn quickstart_config_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/examples/quickstart.toml");
    let s = run_config::run(&cfg, dir.path()).unwrap();
    assert!(s.all_pass);
    assert!(dir.path().join("summary.json").exists());
}
