//! Execution of configured experiments and report writing.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::config::{BlockCase, DnormCheck, Experiment, ExperimentConfig, Format, RateExpectation, Resolved};
use super::report::{emit_report, fmt_number, Flag, ReportRow};
use crate::diagnose::{
    block_max_df, block_step_function, counterexample_run, doa_curve, empirical_df, gpp_bound, ks_critical_1pct,
    ks_statistic, rate_fit, spectral_df, survivor_check, tail_equivalence, von_mises_diagnostic, GridInterval,
    IntervalUnion,
};
use crate::dnorm::{cdf_from_dnorm, combined_se, dnorm_many, dnorm_mc, fidi_dnorm, msp_cdf, takahashi_test};
use crate::error::{Error, Result};
use crate::generator::{generator_constant, validate_generator, Family, GeneratorSpec, SE_FLOOR};
use crate::gridfun::EFunction;
use crate::mc::{par_fold, Stream, Tally};
use crate::simulate::{
    margin_transform, psi0, simulate_paths, MarginParams, Process, ProcessKind, Scratch, SimulationStats,
    StoppingRule,
};

/// Command-line overrides applied on top of a config.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    /// Run only these experiment ids (all when empty).
    pub experiments: Vec<String>,
    /// Run only these experiment kinds (all when empty).
    pub kinds: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentSummary {
    pub id: String,
    pub kind: String,
    pub rows: usize,
    pub failed: usize,
    pub pass: bool,
    pub wall_seconds: f64,
    pub files: Vec<PathBuf>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub seed: u64,
    pub output_dir: PathBuf,
    pub experiments: Vec<ExperimentSummary>,
    pub all_pass: bool,
    pub summary_file: PathBuf,
}

/// Rows of one experiment plus any extra files it produces.
struct Output {
    rows: Vec<ReportRow>,
    extra: Vec<(String, String)>,
}

/// Serde tag of an experiment.
pub fn kind_of(e: &Experiment) -> String {
    serde_json::to_value(e)
        .ok()
        .and_then(|v| v.get("kind").and_then(|k| k.as_str()).map(str::to_string))
        .unwrap_or_default()
}

/// Runs the selected experiments of `cfg`, writes one CSV (and optionally
/// JSON) per experiment plus `summary.json`, and returns the summary.
///
/// Experiments run concurrently; files are written afterwards in config order.
pub fn run_experiment(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<RunSummary> {
    let mut cfg = cfg.clone();
    if let Some(seed) = opts.seed {
        cfg.seed = seed;
    }
    let resolved = cfg.validate()?;
    for id in &opts.experiments {
        if cfg.experiments.iter().all(|e| e.id() != id) {
            return Err(Error::Config(format!("unknown experiment id {id}")));
        }
    }
    let selected: Vec<&Experiment> = cfg
        .experiments
        .iter()
        .filter(|e| opts.experiments.is_empty() || opts.experiments.iter().any(|id| id == e.id()))
        .filter(|e| opts.kinds.is_empty() || opts.kinds.contains(&kind_of(e)))
        .collect();
    if selected.is_empty() {
        return Err(Error::Config("no experiment matches the selection".into()));
    }
    let out_dir = match &opts.out_dir {
        Some(d) => d.clone(),
        None => cfg.resolve_path(&cfg.output_dir),
    };

    let work = || -> Vec<(Result<Output>, f64)> {
        selected
            .par_iter()
            .map(|e| {
                let start = Instant::now();
                let out = run_one(&cfg, &resolved, e);
                (out, start.elapsed().as_secs_f64())
            })
            .collect()
    };
    let results = match opts.threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t.max(1))
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(work),
        None => work(),
    };

    fs::create_dir_all(&out_dir).map_err(|e| Error::io(&out_dir, e))?;
    let mut summaries = Vec::new();
    for (e, (out, secs)) in selected.iter().zip(results) {
        let out = out.map_err(|err| Error::Config(format!("experiment {}: {err}", e.id())))?;
        let mut files = Vec::new();
        for fmt in &cfg.formats {
            let ext = match fmt {
                Format::Csv => "csv",
                Format::Json => "json",
            };
            let path = out_dir.join(format!("{}.{ext}", e.id()));
            write_file(&path, &emit_report(&out.rows, *fmt)?)?;
            files.push(path);
        }
        for (name, content) in &out.extra {
            let path = out_dir.join(name);
            write_file(&path, content)?;
            files.push(path);
        }
        let failed = out.rows.iter().filter(|r| r.flag == Flag::Fail).count();
        summaries.push(ExperimentSummary {
            id: e.id().to_string(),
            kind: kind_of(e),
            rows: out.rows.len(),
            failed,
            pass: failed == 0,
            wall_seconds: secs,
            files,
        });
    }
    let all_pass = summaries.iter().all(|s| s.pass);
    let summary_file = out_dir.join("summary.json");
    let doc = serde_json::json!({
        "seed": cfg.seed,
        "config": cfg,
        "experiments": summaries,
        "all_pass": all_pass,
    });
    let text = serde_json::to_string_pretty(&doc).map_err(|e| Error::invalid(e.to_string()))? + "\n";
    write_file(&summary_file, &text)?;
    Ok(RunSummary {
        seed: cfg.seed,
        output_dir: out_dir,
        experiments: summaries,
        all_pass,
        summary_file,
    })
}

fn write_file(path: &Path, content: &str) -> Result<()> {
    fs::write(path, content).map_err(|e| Error::io(path, e))
}

struct Rows<'a> {
    exp: &'a str,
    gen: &'a str,
    rows: Vec<ReportRow>,
}

impl<'a> Rows<'a> {
    fn new(exp: &'a str, gen: &'a str) -> Self {
        Rows {
            exp,
            gen,
            rows: Vec::new(),
        }
    }

    fn push(&mut self, f_id: &str, parameter: impl Into<String>, estimate: f64, se: f64, model: f64, flag: Flag) {
        // An undefined estimate cannot pass.
        let (estimate, flag) = if estimate.is_finite() {
            (estimate, flag)
        } else {
            (0.0, Flag::Fail)
        };
        self.rows.push(ReportRow {
            experiment: self.exp.to_string(),
            generator: self.gen.to_string(),
            f_id: f_id.to_string(),
            parameter: parameter.into(),
            estimate,
            se: if se.is_finite() { se } else { 0.0 },
            model,
            flag,
        });
    }

    fn done(self) -> Result<Output> {
        Ok(Output {
            rows: self.rows,
            extra: Vec::new(),
        })
    }
}

fn within(diff: f64, se: f64, k: f64) -> bool {
    diff.abs() <= k * se.max(SE_FLOOR)
}

fn process(gen: &GeneratorSpec, kind: ProcessKind, rule: Option<StoppingRule>) -> Process {
    Process::new(kind, gen.clone()).with_rule(rule.unwrap_or_else(|| StoppingRule::for_generator(gen)))
}

fn run_one(cfg: &ExperimentConfig, res: &Resolved, e: &Experiment) -> Result<Output> {
    let st = Stream::new(cfg.seed, &format!("experiment/{}", e.id()));
    let gen = res.generator(e.generator())?;
    let grid = &res.grid;
    let mut rows = Rows::new(e.id(), gen.id());
    match e {
        Experiment::DNorm { functions, n, check, .. } => {
            let fs = res.functions(functions)?;
            let est = dnorm_many(&fs, gen, grid, *n, &st)?;
            let m = match check {
                DnormCheck::Sandwich => Some(generator_constant(gen, grid, *n, &st.child("m"))?),
                _ => None,
            };
            for (f, d) in fs.iter().zip(&est) {
                let sup = f.sup_norm();
                let p = format!("n={n}");
                match (check, &m) {
                    (DnormCheck::Exact, _) => {
                        let ok = (d.value - sup).abs() <= 1e-12 && d.se <= 1e-12;
                        rows.push(f.id(), p, d.value, d.se, sup, Flag::check(ok));
                    }
                    (DnormCheck::Sandwich, Some(m)) => {
                        let upper = m.value * sup;
                        let lower_ok = sup <= d.value + 3.0 * d.se.max(SE_FLOOR);
                        let upper_ok = d.value <= upper + 3.0 * combined_se(&[d.se, m.se * sup]).max(SE_FLOOR);
                        rows.push(f.id(), format!("{p};bound=upper"), d.value, d.se, upper, Flag::check(upper_ok));
                        rows.push(f.id(), format!("{p};bound=lower"), d.value, d.se, sup, Flag::check(lower_ok));
                    }
                    _ => rows.push(f.id(), p, d.value, d.se, sup, Flag::Info),
                }
            }
        }
        Experiment::Generator {
            n, expected_m, validate, ..
        } => {
            let m = generator_constant(gen, grid, *n, &st.child("m"))?;
            match (expected_m, gen.as_bound()) {
                (Some(x), _) => rows.push("one", "quantity=m", m.value, m.se, *x, Flag::check(m.within(*x, 3.0))),
                (None, Some(b)) => rows.push(
                    "one",
                    "quantity=m;model=bound",
                    m.value,
                    m.se,
                    b,
                    Flag::check(m.value <= b + 3.0 * m.se.max(SE_FLOOR)),
                ),
                (None, None) => rows.push("one", "quantity=m", m.value, m.se, m.value, Flag::Info),
            }
            let one = EFunction::constant(grid, 1.0).with_id("one");
            let d = dnorm_mc(&one, gen, grid, *n, &st.child("norm_one"))?;
            let se = combined_se(&[d.se, m.se]);
            rows.push("one", "quantity=norm_one", d.value, se, m.value, Flag::check(within(d.value - m.value, se, 3.0)));
            if *validate {
                let v = validate_generator(gen, grid, (*n).max(1000), &st.child("validate"))?;
                let failing = v.failing_points().len();
                let flag = if !v.nonnegative {
                    Flag::Fail
                } else if failing == 0 {
                    Flag::Pass
                } else {
                    Flag::Info
                };
                rows.push(
                    "one",
                    format!("quantity=max_mean_z;failing_points={failing}"),
                    v.max_z(),
                    0.0,
                    3.0,
                    flag,
                );
            }
        }
        Experiment::Fidi {
            pairs,
            random_pairs,
            range,
            t,
            n,
            ..
        } => {
            let mut all = pairs.clone();
            let mut rng = st.child("pairs").replicate(0);
            for _ in 0..*random_pairs {
                all.push([rng.random_range(range[0]..range[1]), rng.random_range(range[0]..range[1])]);
            }
            let (i0, i1) = (grid.nearest_index(t[0]), grid.nearest_index(t[1]));
            for (k, &[x1, x2]) in all.iter().enumerate() {
                let d = fidi_dnorm(&[(i0, x1), (i1, x2)], gen, grid, *n, &st.child(&format!("pair{k}")))?;
                let oracle = match gen.family() {
                    Family::FiniteSpectral(fs) => Some(fs.expect(|h| (x1.abs() * h[i0]).max(x2.abs() * h[i1]))),
                    Family::Constant => Some(x1.abs().max(x2.abs())),
                    Family::CappedLogGaussian(_) => None,
                };
                let p = format!("x1={x1};x2={x2}");
                match oracle {
                    Some(o) => rows.push("fidi", p, d.value, d.se, o, Flag::check(d.within(o, 3.0))),
                    None => rows.push("fidi", p, d.value, d.se, x1.abs().max(x2.abs()), Flag::Info),
                }
            }
        }
        Experiment::MspMargins { n, points, rule, .. } => {
            let pr = process(gen, ProcessKind::StandardMsp, *rule);
            let (paths, stats) = simulate_paths(&pr, *n, &st)?;
            let crit = ks_critical_1pct(paths.len());
            for &t in points {
                let i = grid.nearest_index(t);
                let col: Vec<f64> = paths.iter().map(|p| p.values[i]).collect();
                let ks = ks_statistic(&col, |x| if x < 0.0 { x.exp() } else { 1.0 });
                rows.push("margin", format!("t={}", grid.point(i)), ks, 0.0, crit, Flag::check(ks < crit));
            }
            let bad_eta = paths.iter().filter(|p| p.values.iter().any(|&v| !(v < 0.0))).count();
            let bad_xi = paths
                .iter()
                .filter(|p| p.values.iter().any(|&v| !(-1.0 / v > 0.0)))
                .count();
            rows.push("sign", "event=eta_max_nonnegative", bad_eta as f64, 0.0, 0.0, Flag::check(bad_eta == 0));
            rows.push("sign", "event=xi_min_nonpositive", bad_xi as f64, 0.0, 0.0, Flag::check(bad_xi == 0));
            push_terms(&mut rows, &stats, pr.rule);
        }
        Experiment::MaxStability {
            functions,
            copies,
            replicates,
            tol,
            rule,
            ..
        } => {
            let fs = res.functions(functions)?;
            let pr = process(gen, ProcessKind::StandardMsp, *rule);
            pr.check()?;
            let scale = *copies as f64;
            let tally = par_fold(
                &st.child("paths"),
                *replicates,
                || {
                    (
                        Tally::new(fs.len()),
                        (Scratch::new(grid), vec![0.0; grid.len()], vec![0.0; grid.len()]),
                    )
                },
                |acc, (scratch, x, mx), rng, _| {
                    mx.fill(f64::NEG_INFINITY);
                    for _ in 0..*copies {
                        pr.sample_into(rng, scratch, x)?;
                        for (m, &v) in mx.iter_mut().zip(x.iter()) {
                            *m = m.max(v);
                        }
                    }
                    acc.trials += 1;
                    for (hit, f) in acc.hits.iter_mut().zip(&fs) {
                        *hit += u64::from(mx.iter().zip(f.values()).all(|(&m, &v)| scale * m <= v));
                    }
                    Ok(())
                },
            )?;
            let models = dnorm_many(&fs, gen, grid, *replicates, &st.child("dnorm"))?;
            for (k, (f, d)) in fs.iter().zip(&models).enumerate() {
                let p = crate::diagnose::proportion(tally.hits[k], tally.trials);
                let model = cdf_from_dnorm(d);
                let dev = (p.p - model.p).abs();
                rows.push(
                    f.id(),
                    format!("copies={copies};tol={tol}"),
                    p.p,
                    combined_se(&[p.se, model.se]),
                    model.p,
                    Flag::check(dev < *tol),
                );
            }
        }
        Experiment::GppDf {
            functions, n, scale, ..
        } => {
            let m = generator_constant(gen, grid, *n, &st.child("m"))?;
            let bound = m.value.max(gen.as_bound().unwrap_or(0.0));
            let target = scale / bound;
            let fs: Vec<EFunction> = res
                .functions(functions)?
                .iter()
                .map(|f| {
                    let s = f.sup_norm();
                    if s > 0.0 {
                        f.scale(target / s)
                    } else {
                        f.clone()
                    }
                })
                .collect();
            let pr = process(gen, ProcessKind::Gpp, None);
            pr.check()?;
            let tally = par_fold(
                &st.child("paths"),
                *n,
                || (Tally::new(fs.len()), (Scratch::new(grid), vec![0.0; grid.len()])),
                |acc, (scratch, x), rng, _| {
                    pr.sample_into(rng, scratch, x)?;
                    acc.trials += 1;
                    for (hit, f) in acc.hits.iter_mut().zip(&fs) {
                        *hit += u64::from(x.iter().zip(f.values()).all(|(a, b)| a <= b));
                    }
                    Ok(())
                },
            )?;
            let ds = dnorm_many(&fs, gen, grid, *n, &st.child("dnorm"))?;
            for (k, (f, d)) in fs.iter().zip(&ds).enumerate() {
                let p = crate::diagnose::proportion(tally.hits[k], tally.trials);
                let model = 1.0 - d.value;
                let se = combined_se(&[p.se, d.se]);
                rows.push(
                    f.id(),
                    format!("sup={}", f.sup_norm()),
                    p.p,
                    se,
                    model,
                    Flag::check(within(p.p - model, se, 3.0)),
                );
            }
        }
        Experiment::Spectral {
            process: kind,
            functions,
            s,
            s_relative,
            n,
            normalize,
            ..
        } => {
            let pr = process(gen, *kind, None);
            let bound = gpp_bound(&pr, *n, &st)?;
            for f in res.functions(functions)? {
                let f = match normalize {
                    Some(target) if f.sup_norm() > 0.0 => f.scale(target / f.sup_norm()),
                    _ => f,
                };
                let sv = s_values(s.as_deref(), s_relative.as_deref(), bound * f.sup_norm())?;
                let curve = spectral_df(&pr, &f, &sv, *n, &st.child(f.id()))?;
                for pt in &curve.points {
                    let flag = if pt.valid { Flag::Info } else { Flag::Skip };
                    rows.push(f.id(), format!("s={}", pt.s), pt.estimate.p, pt.estimate.se, pt.model, flag);
                }
                match curve.linear_fit() {
                    Some(fit) => {
                        let flag = if *kind == ProcessKind::Gpp {
                            Flag::check(fit.max_residual <= 2.0 * fit.max_se)
                        } else {
                            Flag::Info
                        };
                        rows.push(
                            f.id(),
                            format!("quantity=linearity;slope={}", fit.slope),
                            fit.max_residual,
                            fit.max_se,
                            2.0 * fit.max_se,
                            flag,
                        );
                    }
                    None => rows.push(f.id(), "quantity=linearity", 0.0, 0.0, 0.0, Flag::Skip),
                }
            }
        }
        Experiment::Tail {
            process: kind,
            functions,
            s,
            n,
            ..
        } => {
            let pr = process(gen, *kind, None);
            for f in res.functions(functions)? {
                let rep = tail_equivalence(&pr, &f, s, *n, &st.child(f.id()))?;
                for r in &rep.rows {
                    rows.push(f.id(), format!("s={}", r.s), r.ratio, r.se, r.oracle, Flag::check(r.agrees(3.0)));
                }
                let last = rep
                    .rows
                    .iter()
                    .min_by(|a, b| a.s.abs().total_cmp(&b.s.abs()))
                    .expect("non-empty s list");
                rows.push(
                    f.id(),
                    "quantity=monotone",
                    (last.ratio - 1.0).abs(),
                    last.se,
                    (last.oracle - 1.0).abs(),
                    Flag::check(rep.oracle_monotone() && rep.empirical_monotone(3.0)),
                );
            }
        }
        Experiment::Doa {
            process: kind,
            functions,
            n_values,
            replicates,
            norming,
            ..
        } => {
            let pr = process(gen, *kind, None);
            for f in res.functions(functions)? {
                let curve = doa_curve(&pr, (*norming).into(), &f, n_values, *replicates, &st.child(f.id()))?;
                for r in &curve.rows {
                    let flag = if *kind == ProcessKind::StandardMsp {
                        Flag::check(within(r.dev_le, r.dev_se, 3.0))
                    } else {
                        Flag::Info
                    };
                    rows.push(f.id(), format!("n={};event=le", r.n), r.le_pow, r.le_pow_se, r.model.p, flag);
                    rows.push(
                        f.id(),
                        format!("n={};event=lt", r.n),
                        r.lt_pow,
                        combined_se(&[r.le_pow_se, r.lt_pow_se]),
                        r.le_pow,
                        Flag::check(r.open_closed_agree(3.0)),
                    );
                }
                if *kind == ProcessKind::Gpp {
                    let last = curve.rows.last().expect("non-empty n list");
                    rows.push(
                        f.id(),
                        "quantity=monotone",
                        last.dev_le,
                        last.dev_se,
                        0.0,
                        Flag::check(curve.monotone_within(3.0)),
                    );
                }
            }
        }
        Experiment::Blocks { cases, n, rule, .. } => {
            let pr = process(gen, ProcessKind::StandardMsp, *rule);
            let (paths, _) = simulate_paths(&pr, *n, &st.child("paths"))?;
            for (k, case) in cases.iter().enumerate() {
                let (blocks, thresholds) = block_case(res, case)?;
                let block = block_max_df(&paths, &blocks, &thresholds)?;
                let step = block_step_function(grid, &blocks, &thresholds)?;
                let step_p = empirical_df(&paths, &step)?;
                if step.is_nonpositive() {
                    let model = msp_cdf(&step, gen, grid, *n, &st.child(&format!("case{k}")))?;
                    let se = combined_se(&[block.se, model.se]);
                    rows.push(
                        "blocks",
                        format!("case={k};event=block"),
                        block.p,
                        se,
                        model.p,
                        Flag::check(within(block.p - model.p, se, 3.0)),
                    );
                } else {
                    rows.push("blocks", format!("case={k};event=block"), block.p, block.se, step_p.p, Flag::Info);
                }
                rows.push(
                    "block_step",
                    format!("case={k};event=step"),
                    step_p.p,
                    step_p.se,
                    block.p,
                    Flag::check(step_p.p == block.p),
                );
            }
        }
        Experiment::Rate {
            process: kind,
            functions,
            n_values,
            replicates,
            slope_range,
            expect,
            ..
        } => {
            let pr = process(gen, *kind, None);
            let fs = res.functions(functions)?;
            let rep = rate_fit(&pr, &fs, n_values, *replicates, &st)?;
            for p in &rep.points {
                let flag = if p.kept { Flag::Info } else { Flag::Skip };
                rows.push(&p.f_id, format!("n={}", p.n), p.deviation, p.se, 0.0, flag);
            }
            match expect {
                RateExpectation::Slope => {
                    let (est, ok) = match rep.slope {
                        Some(s) => (s, s >= slope_range[0] && s <= slope_range[1]),
                        None => (0.0, false),
                    };
                    let p = format!(
                        "quantity=slope;range={}..{};fitted_points={}",
                        slope_range[0],
                        slope_range[1],
                        rep.points.iter().filter(|p| p.kept).count()
                    );
                    rows.push("bank", p, est, 0.0, -rep.target_delta, Flag::check(ok));
                }
                RateExpectation::Noise => {
                    let kept = rep.points.iter().filter(|p| p.kept).count();
                    rows.push("bank", "quantity=noise_points_kept", kept as f64, 0.0, 0.0, Flag::check(kept == 0));
                }
            }
        }
        Experiment::Survivor {
            function, s, slope_s, n, ..
        } => {
            let f = res.function(function)?;
            let rep = survivor_check(gen, f, s, *n, &st)?;
            for r in &rep.rows {
                rows.push(
                    f.id(),
                    format!("s={};quantity=bound", r.s),
                    r.p.p,
                    r.p.se,
                    r.bound,
                    Flag::check(r.bound_holds(3.0)),
                );
                let flag = match slope_s {
                    Some(x) if (x - r.s).abs() <= 1e-12 => Flag::check(rep.slope_agrees(r, 3.0)),
                    _ => Flag::Info,
                };
                rows.push(
                    f.id(),
                    format!("s={};quantity=slope", r.s),
                    r.slope,
                    combined_se(&[r.slope_se, rep.inf.se]),
                    rep.inf.value,
                    flag,
                );
            }
        }
        Experiment::Counterexample {
            functions,
            c,
            n_values,
            replicates,
            df_n,
            df_tol,
            separation_min_n,
            ..
        } => {
            let fs = res.functions(functions)?;
            let rep = counterexample_run(gen, &fs, *c, n_values, *replicates, &st)?;
            rows.push(
                "eta",
                format!("c={c};event=exceed"),
                rep.p_exceed.p,
                rep.p_exceed.se,
                rep.lower_bound,
                Flag::check(rep.p_exceed.p + 3.0 * rep.p_exceed.se >= rep.lower_bound),
            );
            for r in &rep.rows {
                let flag = if r.n == *df_n {
                    Flag::check(r.deviation < *df_tol)
                } else {
                    Flag::Info
                };
                rows.push(&r.deviation_f, format!("n={};event=df_deviation", r.n), r.deviation, r.deviation_se, 0.0, flag);
                let flag = if r.n >= *separation_min_n {
                    Flag::check(r.separated(&rep, 3.0) && r.p_exceed_n.p <= rep.upper_bound_n + 3.0 * r.p_exceed_n.se)
                } else {
                    Flag::Info
                };
                rows.push(
                    "eta_n",
                    format!("n={};c={c};event=exceed", r.n),
                    r.p_exceed_n.p,
                    r.p_exceed_n.se,
                    rep.upper_bound_n,
                    flag,
                );
            }
        }
        Experiment::VonMises {
            process: kind,
            function,
            c,
            n,
            ..
        } => {
            let f = res.function(function)?;
            let sup = f.sup_norm();
            if sup == 0.0 {
                return Err(Error::Config(format!("{} vanishes identically", f.id())));
            }
            let f = f.scale(1.0 / sup);
            let pr = process(gen, *kind, None);
            let rep = von_mises_diagnostic(&pr, &f, c, *n, &st)?;
            for r in &rep.rows {
                let p = format!("c={};delta={}{}", r.c, r.delta, if r.noise_ok { "" } else { ";delta_capped" });
                rows.push(f.id(), p, r.r, r.r_se, r.oracle_r, Flag::check(r.agrees(3.0)));
            }
            let last = rep.rows.last().expect("non-empty c list");
            rows.push(
                f.id(),
                "quantity=shrinking",
                last.oracle_r.abs(),
                0.0,
                rep.rows[0].oracle_r.abs(),
                Flag::check(rep.shrinking),
            );
        }
        Experiment::Margins {
            paths, triples, tol, rule, ..
        } => {
            let pr = process(gen, ProcessKind::StandardMsp, *rule);
            let (samples, _) = simulate_paths(&pr, *paths, &st)?;
            for &[a, b, g] in triples {
                let mp = MarginParams::constant(grid, a, b, g)?;
                let mut err: f64 = 0.0;
                for p in &samples {
                    let z = margin_transform(p, &mp)?;
                    let zf = EFunction::from_values(grid, z.values, vec![])?;
                    match psi0(&zf, &mp)?.standard() {
                        Some(back) => {
                            for (x, y) in back.values().iter().zip(&p.values) {
                                err = err.max((x - y).abs());
                            }
                        }
                        None => err = f64::INFINITY,
                    }
                }
                rows.push("margins", format!("a={a};b={b};gamma={g}"), err, 0.0, *tol, Flag::check(err < *tol));
            }
        }
        Experiment::Takahashi { functions, n, .. } => {
            for f in res.functions(functions)? {
                if f.has_zero() {
                    rows.push(f.id(), "vanishes_somewhere", 0.0, 0.0, 0.0, Flag::Skip);
                    continue;
                }
                let t = takahashi_test(gen, &f, grid, *n, &st.child(f.id()))?;
                rows.push(
                    f.id(),
                    format!("verdict_f={:?};verdict_m={:?};m_minus_one={}", t.verdict_f, t.verdict_m, t.m_minus_one),
                    t.delta,
                    t.delta_se,
                    0.0,
                    Flag::check(t.consistent),
                );
            }
        }
        Experiment::Simulate {
            process: kind,
            paths,
            rule,
            id,
            ..
        } => {
            let pr = process(gen, *kind, *rule);
            let (samples, stats) = simulate_paths(&pr, *paths, &st)?;
            let defined = samples.iter().all(|p| p.values.iter().all(|v| !v.is_nan()));
            rows.push("paths", "quantity=count", samples.len() as f64, 0.0, *paths as f64, Flag::check(defined));
            push_terms(&mut rows, &stats, pr.rule);
            let csv = paths_csv(&pr, cfg.seed, &st, &samples, &stats);
            let mut out = rows.done()?;
            out.extra.push((format!("{id}_paths.csv"), csv));
            return Ok(out);
        }
    }
    rows.done()
}

fn s_values(s: Option<&[f64]>, rel: Option<&[f64]>, scale: f64) -> Result<Vec<f64>> {
    match (s, rel) {
        (Some(s), None) => Ok(s.to_vec()),
        (None, Some(rel)) => {
            if scale <= 0.0 {
                return Ok(rel.iter().map(|r| -r).collect::<Vec<_>>().into_iter().rev().collect());
            }
            let mut v: Vec<f64> = rel.iter().map(|r| -r / scale).collect();
            v.sort_by(f64::total_cmp);
            Ok(v)
        }
        _ => Err(Error::Config("spectral experiments need exactly one of s, s_relative".into())),
    }
}

fn block_case(res: &Resolved, case: &BlockCase) -> Result<(Vec<IntervalUnion>, Vec<f64>)> {
    let blocks = case
        .blocks
        .iter()
        .map(|ranges| {
            let parts = ranges
                .iter()
                .map(|&[a, b]| GridInterval::from_range(&res.grid, a, b))
                .collect::<Result<Vec<_>>>()?;
            IntervalUnion::new(parts)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((blocks, case.thresholds.clone()))
}

fn push_terms(rows: &mut Rows<'_>, stats: &SimulationStats, rule: StoppingRule) {
    if stats.total_terms == 0 {
        return;
    }
    let mode = match rule {
        StoppingRule::ExactBound => "exact_bound".to_string(),
        StoppingRule::FixedK(k) => format!("fixed_k={k}"),
    };
    rows.push("terms", format!("rule={mode};quantity=mean"), stats.mean_terms(), 0.0, 0.0, Flag::Info);
    rows.push("terms", format!("rule={mode};quantity=max"), stats.max_terms as f64, 0.0, 0.0, Flag::Info);
    let flag = match rule {
        StoppingRule::ExactBound => Flag::check(stats.approximate == 0),
        StoppingRule::FixedK(_) => Flag::Info,
    };
    rows.push("terms", format!("rule={mode};quantity=approximate_paths"), stats.approximate as f64, 0.0, 0.0, flag);
}

/// Paths as CSV: rows are grid points, columns replicates, after a `#` header.
fn paths_csv(
    pr: &Process,
    seed: u64,
    st: &Stream,
    samples: &[crate::generator::PathSample],
    stats: &SimulationStats,
) -> String {
    let mut out = String::new();
    writeln!(out, "# family: {} ({})", pr.gen.id(), pr.gen.family_name()).unwrap();
    writeln!(out, "# process: {}", pr.kind.name()).unwrap();
    writeln!(out, "# seed: {seed}").unwrap();
    writeln!(out, "# stream_key: {:#018x}", st.key()).unwrap();
    match (pr.kind, pr.rule) {
        (ProcessKind::Gpp, _) => writeln!(out, "# stopping: none, one generator draw per path").unwrap(),
        (_, StoppingRule::ExactBound) => writeln!(out, "# stopping: exact_bound").unwrap(),
        (_, StoppingRule::FixedK(k)) => writeln!(out, "# stopping: fixed_k {k}").unwrap(),
    }
    writeln!(
        out,
        "# terms: mean {} max {} approximate_paths {}",
        fmt_number(stats.mean_terms()),
        stats.max_terms,
        stats.approximate
    )
    .unwrap();
    out.push('t');
    for s in samples {
        write!(out, ",r{}", s.meta.replicate).unwrap();
    }
    out.push('\n');
    for (i, t) in pr.grid().points().iter().enumerate() {
        out.push_str(&fmt_number(*t));
        for s in samples {
            out.push(',');
            out.push_str(&fmt_number(s.values[i]));
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(text: &str) -> ExperimentConfig {
        ExperimentConfig::from_toml(text).unwrap()
    }

    #[test]
    fn constant_dnorm_single_row() {
        let dir = tempfile::tempdir().unwrap();
        let c = cfg(r#"
seed = 1
grid_size = 11
[[functions]]
id = "minus_one"
constant = -1.0
[[experiments]]
id = "only"
kind = "dnorm"
generator = "constant"
functions = ["minus_one"]
n = 1000
check = "exact"
"#);
        let opts = RunOptions {
            out_dir: Some(dir.path().to_path_buf()),
            ..Default::default()
        };
        let s = run_experiment(&c, &opts).unwrap();
        assert!(s.all_pass);
        let csv = fs::read_to_string(dir.path().join("only.csv")).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 2);
        assert!(lines[1].starts_with("only,constant,minus_one,n=1000,1.0000000000000000e0,0.0000000000000000e0,"));
        assert!(lines[1].ends_with(",pass"));
        assert!(dir.path().join("summary.json").exists());
    }

    #[test]
    fn two_experiments_give_two_csvs_and_rerun_is_identical() {
        let text = r#"
seed = 3
grid_size = 21
formats = ["csv", "json"]
[[experiments]]
id = "a"
kind = "generator"
generator = "G3"
n = 2000
expected_m = 1.5
[[experiments]]
id = "b"
kind = "simulate"
process = "standard_msp"
generator = "G2"
paths = 5
"#;
        let (d1, d2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let run = |d: &Path, threads| {
            run_experiment(
                &cfg(text),
                &RunOptions {
                    out_dir: Some(d.to_path_buf()),
                    threads: Some(threads),
                    ..Default::default()
                },
            )
            .unwrap()
        };
        let s1 = run(d1.path(), 1);
        run(d2.path(), 3);
        assert_eq!(s1.experiments.len(), 2);
        for name in ["a.csv", "b.csv", "a.json", "b_paths.csv"] {
            let x = fs::read(d1.path().join(name)).unwrap();
            let y = fs::read(d2.path().join(name)).unwrap();
            assert_eq!(x, y, "{name}");
        }
        let paths = fs::read_to_string(d1.path().join("b_paths.csv")).unwrap();
        assert!(paths.starts_with("# family: G2"));
        assert_eq!(paths.lines().filter(|l| !l.starts_with('#')).count(), 22);
    }

    #[test]
    fn filters_and_seed_override() {
        let text = r#"
seed = 3
grid_size = 11
[[experiments]]
id = "a"
kind = "dnorm"
generator = "G2"
n = 100
[[experiments]]
id = "b"
kind = "dnorm"
generator = "G3"
n = 100
"#;
        let d = tempfile::tempdir().unwrap();
        let mut opts = RunOptions {
            out_dir: Some(d.path().to_path_buf()),
            experiments: vec!["b".into()],
            ..Default::default()
        };
        let s = run_experiment(&cfg(text), &opts).unwrap();
        assert_eq!(s.experiments.len(), 1);
        assert!(!d.path().join("a.csv").exists());
        opts.experiments = vec!["zzz".into()];
        assert!(run_experiment(&cfg(text), &opts).is_err());
        opts.experiments.clear();
        opts.seed = Some(99);
        assert_eq!(run_experiment(&cfg(text), &opts).unwrap().seed, 99);
    }
}
