//! Simulation of max-stable, generalized Pareto and copula processes.
//!
//! The simple max-stable process is the Poisson superposition
//! `ξ_t = max_i Z_i(t)/Γ_i` with `Γ_1 < Γ_2 < …` the arrival times of a
//! unit-rate Poisson process and `Z_i` iid generator paths. When
//! `max_t Z_t ≤ M` almost surely, no term after `Γ_k` can raise the path once
//! `M/Γ_{k+1} < min_t ξ_t`; stopping there gives an exact draw on the grid.
//! The standard process is `η = −1/ξ`.

mod margins;

use rand::Rng;
use rand_distr::{Distribution, Exp1, Open01};

use crate::error::{Error, Result};
use crate::generator::{GeneratorSpec, PathMeta, PathSample};
use crate::gridfun::Grid;
use crate::mc::{par_fold, Accumulator, ReplicateRng, Stream};

pub use margins::{
    general_msp_cdf, margin_transform, psi0, MarginParams, Psi0, BRANCH_TOL,
};

/// Default number of superposition terms in fixed-K mode.
pub const DEFAULT_FIXED_K: usize = 512;

/// Hard ceiling on superposition terms in exact-bound mode.
pub const MAX_TERMS: usize = 1 << 24;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StoppingRule {
    /// Stop at the first `k` with `M/Γ_{k+1} < min_t ξ_t`, `M` the generator's
    /// almost-sure bound. Exact in distribution on the grid.
    #[default]
    ExactBound,
    /// Use exactly `K` terms and report the residual bound `M/Γ_{K+1}`.
    FixedK(usize),
}

impl StoppingRule {
    /// Exact stopping when the generator declares a bound, fixed-K otherwise.
    pub fn for_generator(gen: &GeneratorSpec) -> StoppingRule {
        if gen.as_bound().is_some() {
            StoppingRule::ExactBound
        } else {
            StoppingRule::FixedK(DEFAULT_FIXED_K)
        }
    }

    pub fn check(&self, gen: &GeneratorSpec) -> Result<()> {
        match *self {
            StoppingRule::ExactBound => {
                if gen.as_bound().is_none() {
                    return Err(Error::invalid(format!(
                        "exact-bound stopping needs an almost-sure bound; generator {} only has an integrable maximum",
                        gen.id()
                    )));
                }
            }
            StoppingRule::FixedK(k) => {
                if k == 0 {
                    return Err(Error::invalid("fixed-K stopping needs K ≥ 1"));
                }
            }
        }
        Ok(())
    }

    /// Additionally checks that the declared bound is not below an estimate of
    /// the generator constant (a bound below `m` cannot be almost sure).
    pub fn check_against_constant(&self, gen: &GeneratorSpec, m_estimate: f64, m_se: f64) -> Result<()> {
        self.check(gen)?;
        if let (StoppingRule::ExactBound, Some(bound)) = (self, gen.as_bound()) {
            if bound < m_estimate - 3.0 * m_se {
                return Err(Error::invalid(format!(
                    "declared bound {bound} is below the generator constant estimate {m_estimate}"
                )));
            }
        }
        Ok(())
    }
}

/// Bookkeeping of one superposition run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Terms {
    pub count: usize,
    /// `M/Γ_{k+1}` after the last term, when `M` is known.
    pub residual: Option<f64>,
    /// The residual bound could still exceed the path minimum.
    pub approximate: bool,
}

/// Draws `ξ` into `xi` using `z` as scratch.
pub(crate) fn superpose(
    gen: &GeneratorSpec,
    rule: StoppingRule,
    rng: &mut ReplicateRng,
    z: &mut [f64],
    xi: &mut [f64],
) -> Result<Terms> {
    let bound = gen.as_bound();
    let mut gamma: f64 = Exp1.sample(rng);
    gen.sample_into(rng, z)?;
    let mut min = f64::INFINITY;
    for (x, &v) in xi.iter_mut().zip(z.iter()) {
        *x = v / gamma;
        min = min.min(*x);
    }
    let mut count = 1usize;
    let limit = match rule {
        StoppingRule::ExactBound => MAX_TERMS,
        StoppingRule::FixedK(k) => k,
    };
    loop {
        let e: f64 = Exp1.sample(rng);
        let next = gamma + e;
        if let (StoppingRule::ExactBound, Some(m)) = (rule, bound) {
            if m / next < min {
                return Ok(Terms {
                    count,
                    residual: Some(m / next),
                    approximate: false,
                });
            }
        }
        if count >= limit {
            if rule == StoppingRule::ExactBound {
                return Err(Error::NonTermination(format!(
                    "exact-bound superposition exceeded {MAX_TERMS} terms"
                )));
            }
            let residual = bound.map(|m| m / next);
            return Ok(Terms {
                count,
                residual,
                approximate: residual.is_none_or(|r| r >= min),
            });
        }
        gamma = next;
        gen.sample_into(rng, z)?;
        min = f64::INFINITY;
        for (x, &v) in xi.iter_mut().zip(z.iter()) {
            let cand = v / gamma;
            if cand > *x {
                *x = cand;
            }
            min = min.min(*x);
        }
        count += 1;
    }
}

/// One draw of the standard (`η`) and simple (`ξ`) max-stable processes.
#[derive(Debug, Clone, PartialEq)]
pub struct MspSample {
    pub eta: PathSample,
    pub xi: PathSample,
    pub terms: Terms,
}

fn meta(gen: &GeneratorSpec, stream: &Stream, replicate: u64) -> PathMeta {
    PathMeta {
        family: gen.id().to_string(),
        stream_key: stream.key(),
        replicate,
    }
}

pub fn simulate_msp(
    gen: &GeneratorSpec,
    grid: &Grid,
    rule: StoppingRule,
    stream: &Stream,
    replicate: u64,
) -> Result<MspSample> {
    gen.check_grid(grid)?;
    rule.check(gen)?;
    let mut z = vec![0.0; grid.len()];
    let mut xi = vec![0.0; grid.len()];
    let terms = superpose(gen, rule, &mut stream.replicate(replicate), &mut z, &mut xi)?;
    let eta = xi.iter().map(|x| -1.0 / x).collect();
    Ok(MspSample {
        eta: PathSample {
            grid: grid.clone(),
            values: eta,
            meta: meta(gen, stream, replicate),
        },
        xi: PathSample {
            grid: grid.clone(),
            values: xi,
            meta: meta(gen, stream, replicate),
        },
        terms,
    })
}

/// One draw of the generalized Pareto process.
#[derive(Debug, Clone, PartialEq)]
pub struct GppSample {
    /// Pareto scale: `Y = Z/U`.
    pub y: PathSample,
    /// Standard scale: `V = −U/Z`, `−∞` where `Z_t = 0`.
    pub v: PathSample,
    pub u: f64,
}

pub(crate) fn gpp_into(gen: &GeneratorSpec, rng: &mut ReplicateRng, z: &mut [f64], v: &mut [f64]) -> Result<f64> {
    let u: f64 = rng.sample(Open01);
    gen.sample_into(rng, z)?;
    for (o, &zt) in v.iter_mut().zip(z.iter()) {
        *o = if zt > 0.0 { -u / zt } else { f64::NEG_INFINITY };
    }
    Ok(u)
}

pub fn simulate_gpp(gen: &GeneratorSpec, grid: &Grid, stream: &Stream, replicate: u64) -> Result<GppSample> {
    gen.check_grid(grid)?;
    let mut z = vec![0.0; grid.len()];
    let mut v = vec![0.0; grid.len()];
    let u = gpp_into(gen, &mut stream.replicate(replicate), &mut z, &mut v)?;
    let y = z.iter().map(|zt| zt / u).collect();
    Ok(GppSample {
        y: PathSample {
            grid: grid.clone(),
            values: y,
            meta: meta(gen, stream, replicate),
        },
        v: PathSample {
            grid: grid.clone(),
            values: v,
            meta: meta(gen, stream, replicate),
        },
        u,
    })
}

/// Copula process `U = exp(η)`, with values in `(0,1)`.
pub fn simulate_copula(
    gen: &GeneratorSpec,
    grid: &Grid,
    rule: StoppingRule,
    stream: &Stream,
    replicate: u64,
) -> Result<PathSample> {
    let mut s = simulate_msp(gen, grid, rule, stream, replicate)?;
    for v in s.eta.values.iter_mut() {
        *v = v.exp();
    }
    Ok(s.eta)
}

/// Which process a diagnostic samples; every kind realizes in `Ē⁻[0,1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProcessKind {
    /// The standard max-stable process `η`.
    StandardMsp,
    /// The generalized Pareto process `V = −U/Z`.
    Gpp,
    /// The copula process `exp(η)` shifted by −1.
    ShiftedCopula,
}

impl ProcessKind {
    pub fn name(&self) -> &'static str {
        match self {
            ProcessKind::StandardMsp => "standard_msp",
            ProcessKind::Gpp => "gpp",
            ProcessKind::ShiftedCopula => "shifted_copula",
        }
    }
}

/// A process together with its generator and stopping rule.
#[derive(Debug, Clone, PartialEq)]
pub struct Process {
    pub kind: ProcessKind,
    pub gen: GeneratorSpec,
    pub rule: StoppingRule,
}

/// Per-worker buffers for [`Process::sample_into`].
#[derive(Debug, Clone)]
pub struct Scratch {
    z: Vec<f64>,
}

impl Scratch {
    pub fn new(grid: &Grid) -> Scratch {
        Scratch {
            z: vec![0.0; grid.len()],
        }
    }
}

impl Process {
    pub fn new(kind: ProcessKind, gen: GeneratorSpec) -> Process {
        Process {
            kind,
            gen,
            rule: StoppingRule::ExactBound,
        }
    }

    pub fn with_rule(mut self, rule: StoppingRule) -> Process {
        self.rule = rule;
        self
    }

    pub fn grid(&self) -> &Grid {
        self.gen.grid()
    }

    pub fn check(&self) -> Result<()> {
        self.gen.ensure_ready()?;
        match self.kind {
            ProcessKind::Gpp => Ok(()),
            _ => self.rule.check(&self.gen),
        }
    }

    /// Writes one path of the process; returns superposition terms (0 for GPP).
    pub fn sample_into(&self, rng: &mut ReplicateRng, scratch: &mut Scratch, out: &mut [f64]) -> Result<Terms> {
        match self.kind {
            ProcessKind::Gpp => {
                gpp_into(&self.gen, rng, &mut scratch.z, out)?;
                Ok(Terms {
                    count: 0,
                    residual: None,
                    approximate: false,
                })
            }
            ProcessKind::StandardMsp | ProcessKind::ShiftedCopula => {
                let terms = superpose(&self.gen, self.rule, rng, &mut scratch.z, out)?;
                let copula = self.kind == ProcessKind::ShiftedCopula;
                for v in out.iter_mut() {
                    let eta = -1.0 / *v;
                    *v = if copula { eta.exp_m1() } else { eta };
                }
                Ok(terms)
            }
        }
    }
}

/// Summary of superposition work over a batch.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SimulationStats {
    pub paths: u64,
    pub total_terms: u64,
    pub max_terms: usize,
    pub approximate: u64,
}

impl SimulationStats {
    pub fn mean_terms(&self) -> f64 {
        if self.paths == 0 {
            0.0
        } else {
            self.total_terms as f64 / self.paths as f64
        }
    }

    pub fn record(&mut self, t: &Terms) {
        self.paths += 1;
        self.total_terms += t.count as u64;
        self.max_terms = self.max_terms.max(t.count);
        self.approximate += u64::from(t.approximate);
    }
}

impl Accumulator for SimulationStats {
    fn merge(&mut self, o: Self) {
        self.paths += o.paths;
        self.total_terms += o.total_terms;
        self.max_terms = self.max_terms.max(o.max_terms);
        self.approximate += o.approximate;
    }
}

struct PathBatch {
    paths: Vec<PathSample>,
    stats: SimulationStats,
}

impl Accumulator for PathBatch {
    fn merge(&mut self, o: Self) {
        self.paths.extend(o.paths);
        self.stats.merge(o.stats);
    }
}

/// `n` independent paths of `process`, replicate `r` drawn from stream `r`.
pub fn simulate_paths(process: &Process, n: u64, stream: &Stream) -> Result<(Vec<PathSample>, SimulationStats)> {
    process.check()?;
    let grid = process.grid().clone();
    let batch = par_fold(
        stream,
        n,
        || {
            (
                PathBatch {
                    paths: Vec::new(),
                    stats: SimulationStats::default(),
                },
                Scratch::new(&grid),
            )
        },
        |acc, scratch, rng, r| {
            let mut values = vec![0.0; grid.len()];
            let t = process.sample_into(rng, scratch, &mut values)?;
            if process.kind != ProcessKind::Gpp {
                acc.stats.record(&t);
            } else {
                acc.stats.paths += 1;
            }
            acc.paths.push(PathSample {
                grid: grid.clone(),
                values,
                meta: PathMeta {
                    family: process.gen.id().to_string(),
                    stream_key: stream.key(),
                    replicate: r,
                },
            });
            Ok(())
        },
    )?;
    Ok((batch.paths, batch.stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridfun::make_grid;

    #[test]
    fn constant_generator_msp_is_flat() {
        let g = make_grid(51).unwrap();
        let c = GeneratorSpec::constant(&g);
        let s = simulate_msp(&c, &g, StoppingRule::ExactBound, &Stream::new(1, "flat"), 0).unwrap();
        let x0 = s.xi.values[0];
        assert!(s.xi.values.iter().all(|&x| x == x0));
        assert_eq!(s.terms.count, 1);
        assert!(s.eta.values.iter().all(|&e| e == -1.0 / x0));
    }

    #[test]
    fn exact_bound_rejects_integrable_only_generators() {
        let g = make_grid(11).unwrap();
        let gen = GeneratorSpec::preset_g2(&g).declare_integrable_only();
        let err = simulate_msp(&gen, &g, StoppingRule::ExactBound, &Stream::new(0, "x"), 0).unwrap_err();
        assert!(matches!(err, Error::InvalidArgument(_)));
        let ok = simulate_msp(&gen, &g, StoppingRule::FixedK(64), &Stream::new(0, "x"), 0).unwrap();
        assert_eq!(ok.terms.count, 64);
        assert!(ok.terms.residual.is_none() && ok.terms.approximate);
        assert!(StoppingRule::FixedK(0).check(&GeneratorSpec::constant(&g)).is_err());
    }

    #[test]
    fn bound_consistency_check() {
        let g = make_grid(11).unwrap();
        let gen = GeneratorSpec::preset_g2(&g);
        assert!(StoppingRule::ExactBound.check_against_constant(&gen, 2.0, 0.0).is_ok());
        assert!(StoppingRule::ExactBound.check_against_constant(&gen, 2.5, 0.01).is_err());
    }

    #[test]
    fn fixed_k_reports_residual() {
        let g = make_grid(21).unwrap();
        let gen = GeneratorSpec::preset_g3(&g);
        let s = simulate_msp(&gen, &g, StoppingRule::FixedK(DEFAULT_FIXED_K), &Stream::new(2, "k"), 3).unwrap();
        assert_eq!(s.terms.count, DEFAULT_FIXED_K);
        let r = s.terms.residual.unwrap();
        let min = s.xi.values.iter().copied().fold(f64::INFINITY, f64::min);
        assert_eq!(s.terms.approximate, r >= min);
        assert!(r < min, "512 terms leave a residual far below the path minimum");
    }

    #[test]
    fn exact_and_fixed_k_agree_when_fixed_k_is_large() {
        // Same stream: the fixed-K run extends the exact run with terms that
        // cannot change the path.
        let g = make_grid(31).unwrap();
        let gen = GeneratorSpec::preset_g2(&g);
        let st = Stream::new(4, "agree");
        for r in 0..50 {
            let a = simulate_msp(&gen, &g, StoppingRule::ExactBound, &st, r).unwrap();
            let b = simulate_msp(&gen, &g, StoppingRule::FixedK(a.terms.count + 200), &st, r).unwrap();
            assert_eq!(a.xi.values, b.xi.values);
        }
    }

    #[test]
    fn sign_invariants_on_sampled_paths() {
        let g = make_grid(41).unwrap();
        for gen in [GeneratorSpec::preset_g2(&g), GeneratorSpec::preset_clg(&g)] {
            let st = Stream::new(5, gen.id());
            for r in 0..500 {
                let s = simulate_msp(&gen, &g, StoppingRule::ExactBound, &st, r).unwrap();
                assert!(s.eta.values.iter().all(|&e| e < 0.0));
                assert!(s.xi.values.iter().all(|&x| x > 0.0));
                let c = simulate_copula(&gen, &g, StoppingRule::ExactBound, &st, r).unwrap();
                assert!(c.values.iter().all(|&u| u > 0.0 && u < 1.0));
                let p = simulate_gpp(&gen, &g, &st, r).unwrap();
                assert!(p.v.values.iter().all(|&v| v <= 0.0));
            }
        }
    }

    #[test]
    fn gpp_uses_sentinel_where_generator_vanishes() {
        let g = make_grid(11).unwrap();
        let gen = GeneratorSpec::preset_g2(&g);
        let st = Stream::new(6, "gpp");
        let mut seen = false;
        for r in 0..20 {
            let p = simulate_gpp(&gen, &g, &st, r).unwrap();
            for (k, &v) in p.v.values.iter().enumerate() {
                let zero = p.y.values[k] == 0.0;
                assert_eq!(v == f64::NEG_INFINITY, zero);
                seen |= zero;
                if !zero {
                    assert!((v * p.y.values[k] + 1.0).abs() < 1e-12);
                }
            }
        }
        assert!(seen);
    }

    #[test]
    fn batch_paths_match_single_draws() {
        let g = make_grid(21).unwrap();
        let gen = GeneratorSpec::preset_g3(&g);
        let st = Stream::new(7, "batch");
        let process = Process::new(ProcessKind::StandardMsp, gen.clone());
        let (paths, stats) = simulate_paths(&process, 700, &st).unwrap();
        assert_eq!(paths.len(), 700);
        assert!(stats.mean_terms() >= 1.0 && stats.approximate == 0);
        for r in [0u64, 511, 512, 699] {
            let single = simulate_msp(&gen, &g, StoppingRule::ExactBound, &st, r).unwrap();
            assert_eq!(paths[r as usize].values, single.eta.values);
        }
    }
}
