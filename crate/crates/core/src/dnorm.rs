//! Monte Carlo estimation of functional D-norms and related path functionals.
//!
//! `‖f‖_D = E(sup_t |f(t)| Z_t)`; the df of the standard max-stable process with
//! generator `Z` is `P(η ≤ f) = exp(−‖f‖_D)` on `Ē⁻[0,1]`.
//!
//! Every estimator takes a [`Stream`]. Estimators called with the same stream
//! see the same generator paths (shared-seed mode), which turns per-sample
//! inequalities such as homogeneity and the triangle inequality into exact
//! statements about the estimates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generator::{generator_constant, GeneratorSpec, SE_FLOOR};
use crate::gridfun::{EFunction, Grid};
use crate::mc::{par_fold, Moments, Stream};

/// Monte Carlo estimate of a D-norm-type functional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DNormEstimate {
    pub value: f64,
    pub se: f64,
    pub n: u64,
    pub gen_id: String,
    pub f_id: String,
}

impl DNormEstimate {
    pub(crate) fn from_moments(m: &Moments, gen_id: &str, f_id: &str) -> DNormEstimate {
        DNormEstimate {
            value: m.mean,
            se: m.se(),
            n: m.n,
            gen_id: gen_id.to_string(),
            f_id: f_id.to_string(),
        }
    }

    /// `|value − target| ≤ k·SE` with the SE floored at 1e-12.
    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.value - target).abs() <= k * self.se.max(SE_FLOOR)
    }
}

/// A probability estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Probability {
    pub p: f64,
    pub se: f64,
    pub n: u64,
}

impl Probability {
    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.p - target).abs() <= k * self.se.max(SE_FLOOR)
    }
}

/// Combined standard error of independent estimates.
pub fn combined_se(ses: &[f64]) -> f64 {
    ses.iter().map(|s| s * s).sum::<f64>().sqrt()
}

/// Estimates `E φ_k(Z)` for `k` path functionals on one common stream of paths.
///
/// `phi` receives the path and writes the `k` per-sample values.
pub fn path_functionals<F>(
    gen: &GeneratorSpec,
    grid: &Grid,
    n: u64,
    stream: &Stream,
    k: usize,
    phi: F,
) -> Result<Vec<Moments>>
where
    F: Fn(&[f64], &mut [f64]) + Sync,
{
    if n == 0 {
        return Err(Error::invalid("sample count must be ≥ 1"));
    }
    gen.check_grid(grid)?;
    gen.ensure_ready()?;
    par_fold(
        stream,
        n,
        || (vec![Moments::default(); k], (vec![0.0; grid.len()], vec![0.0; k])),
        |acc, (z, vals), rng, _| {
            gen.sample_into(rng, z)?;
            phi(z, vals);
            for (m, &v) in acc.iter_mut().zip(vals.iter()) {
                m.push(v);
            }
            Ok(())
        },
    )
}

fn abs_values(f: &EFunction) -> Vec<f64> {
    f.values().iter().map(|v| v.abs()).collect()
}

pub(crate) fn sup_weighted(w: &[f64], z: &[f64]) -> f64 {
    w.iter().zip(z).fold(0.0, |m, (a, b)| m.max(a * b))
}

pub(crate) fn inf_weighted(w: &[f64], z: &[f64]) -> f64 {
    w.iter().zip(z).fold(f64::INFINITY, |m, (a, b)| m.min(a * b))
}

fn check_functions(fs: &[EFunction], grid: &Grid) -> Result<()> {
    fs.iter().try_for_each(|f| f.grid().ensure_same(grid, "function"))
}

/// D-norms of several functions on one shared stream of generator paths.
pub fn dnorm_many(
    fs: &[EFunction],
    gen: &GeneratorSpec,
    grid: &Grid,
    n: u64,
    stream: &Stream,
) -> Result<Vec<DNormEstimate>> {
    check_functions(fs, grid)?;
    let weights: Vec<Vec<f64>> = fs.iter().map(abs_values).collect();
    let ms = path_functionals(gen, grid, n, stream, fs.len(), |z, out| {
        for (o, w) in out.iter_mut().zip(&weights) {
            *o = sup_weighted(w, z);
        }
    })?;
    Ok(ms
        .iter()
        .zip(fs)
        .map(|(m, f)| DNormEstimate::from_moments(m, gen.id(), f.id()))
        .collect())
}

/// `‖f‖_D` by Monte Carlo: mean of `max_t |f(t)| Z_t` over `n` paths.
pub fn dnorm_mc(f: &EFunction, gen: &GeneratorSpec, grid: &Grid, n: u64, stream: &Stream) -> Result<DNormEstimate> {
    Ok(dnorm_many(std::slice::from_ref(f), gen, grid, n, stream)?.remove(0))
}

/// Fidi D-norm `E(max_i |x_i| Z_{t_i})` for the given (grid index, value) points.
pub fn fidi_dnorm(
    points: &[(usize, f64)],
    gen: &GeneratorSpec,
    grid: &Grid,
    n: u64,
    stream: &Stream,
) -> Result<DNormEstimate> {
    if points.is_empty() {
        return Err(Error::invalid("fidi D-norm needs at least one point"));
    }
    let f = EFunction::new(
        grid,
        vec![0.0; grid.len()],
        points.to_vec(),
        crate::gridfun::Sign::Unrestricted,
    )?
    .with_id("fidi");
    dnorm_mc(&f, gen, grid, n, stream)
}

/// `E(inf_t |f(t)| Z_t)` for several functions on a shared stream.
pub fn inf_functional_many(
    fs: &[EFunction],
    gen: &GeneratorSpec,
    grid: &Grid,
    n: u64,
    stream: &Stream,
) -> Result<Vec<DNormEstimate>> {
    check_functions(fs, grid)?;
    let weights: Vec<Vec<f64>> = fs.iter().map(abs_values).collect();
    let ms = path_functionals(gen, grid, n, stream, fs.len(), |z, out| {
        for (o, w) in out.iter_mut().zip(&weights) {
            *o = inf_weighted(w, z);
        }
    })?;
    Ok(ms
        .iter()
        .zip(fs)
        .map(|(m, f)| DNormEstimate::from_moments(m, gen.id(), f.id()))
        .collect())
}

pub fn inf_functional(
    f: &EFunction,
    gen: &GeneratorSpec,
    grid: &Grid,
    n: u64,
    stream: &Stream,
) -> Result<DNormEstimate> {
    Ok(inf_functional_many(std::slice::from_ref(f), gen, grid, n, stream)?.remove(0))
}

/// `exp(−‖f‖_D)` with a first-order delta-method standard error.
pub fn cdf_from_dnorm(d: &DNormEstimate) -> Probability {
    let p = (-d.value).exp();
    Probability {
        p,
        se: p * d.se,
        n: d.n,
    }
}

/// `P(η ≤ f) = exp(−‖f‖_D)` for `f ∈ Ē⁻[0,1]`.
pub fn msp_cdf(f: &EFunction, gen: &GeneratorSpec, grid: &Grid, n: u64, stream: &Stream) -> Result<Probability> {
    if !f.is_nonpositive() {
        return Err(Error::invalid(format!("{} has positive values (outside Ē⁻)", f.id())));
    }
    Ok(cdf_from_dnorm(&dnorm_mc(f, gen, grid, n, stream)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    SupNorm,
    StrictlyLarger,
}

/// Evidence for the equivalence `‖f‖_D = ‖f‖_∞` for one `f` ⟺ `‖·‖_D = ‖·‖_∞`.
#[derive(Debug, Clone, PartialEq)]
pub struct TakahashiReport {
    /// `‖f‖_D − ‖f‖_∞`.
    pub delta: f64,
    pub delta_se: f64,
    /// `m − 1`.
    pub m_minus_one: f64,
    pub m_se: f64,
    pub verdict_f: Verdict,
    pub verdict_m: Verdict,
    /// Both verdicts agree, as the equivalence requires.
    pub consistent: bool,
}

impl TakahashiReport {
    pub fn verdict(&self) -> Verdict {
        self.verdict_f
    }
}

fn zero_verdict(value: f64, se: f64) -> Verdict {
    if value.abs() <= 3.0 * se.max(SE_FLOOR) {
        Verdict::SupNorm
    } else {
        Verdict::StrictlyLarger
    }
}

pub fn takahashi_test(
    gen: &GeneratorSpec,
    f: &EFunction,
    grid: &Grid,
    n: u64,
    stream: &Stream,
) -> Result<TakahashiReport> {
    if f.has_zero() {
        return Err(Error::invalid(format!("{} vanishes at a grid point", f.id())));
    }
    let d = dnorm_mc(f, gen, grid, n, stream)?;
    let m = generator_constant(gen, grid, n, stream)?;
    let delta = d.value - f.sup_norm();
    let m_minus_one = m.value - 1.0;
    let verdict_f = zero_verdict(delta, d.se);
    let verdict_m = zero_verdict(m_minus_one, m.se);
    Ok(TakahashiReport {
        delta,
        delta_se: d.se,
        m_minus_one,
        m_se: m.se,
        verdict_f,
        verdict_m,
        consistent: verdict_f == verdict_m,
    })
}
