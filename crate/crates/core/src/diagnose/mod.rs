//! Empirical checks of the distributional identities: spectral dfs, tail
//! equivalence, domain-of-attraction curves, block maxima, convergence rates,
//! survivor bounds and the triangle counterexample.
//!
//! Most diagnostics reduce a path `X` and a direction `f` to the spectral
//! radius `R_f = max_t X_t/|f(t)|`, because `X ≤ s|f|` holds exactly when
//! `R_f ≤ s`. One pass over the paths then serves every `s`.

mod rates;
mod spectral;
mod survivor;

use crate::dnorm::Probability;
use crate::error::{Error, Result};
use crate::generator::{PathSample, SE_FLOOR};
use crate::gridfun::{EFunction, Grid};
use crate::mc::{binomial_se, par_fold, Accumulator, Stream};
use crate::simulate::{Process, Scratch};

pub use rates::{doa_curve, rate_fit, DoaCurve, DoaRow, Norming, RatePoint, RateReport};
pub use spectral::{
    gpp_bound, spectral_df, tail_equivalence, von_mises_diagnostic, LinearFit, SpectralCurve, SpectralPoint, TailRatio,
    TailReport, VonMisesReport, VonMisesRow,
};
pub use survivor::{counterexample_run, survivor_check, CounterexampleReport, CounterexampleRow, SurvivorReport, SurvivorRow};

/// Fewest paths accepted by [`empirical_df`].
pub const MIN_PATHS: usize = 100;

/// One-sample Kolmogorov–Smirnov critical constant at level 1%.
pub const KS_CRITICAL_1PCT: f64 = 1.63;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Inequality {
    /// `X_t ≤ f(t)` at every grid point.
    Le,
    /// `X_t < f(t)` at every grid point.
    Lt,
}

impl Inequality {
    fn holds(self, x: f64, f: f64) -> bool {
        match self {
            Inequality::Le => x <= f,
            Inequality::Lt => x < f,
        }
    }
}

pub(crate) fn proportion(hits: u64, n: u64) -> Probability {
    let p = if n == 0 { 0.0 } else { hits as f64 / n as f64 };
    Probability {
        p,
        se: binomial_se(p, n),
        n,
    }
}

pub(crate) fn within(diff: f64, se: f64, k: f64) -> bool {
    diff.abs() <= k * se.max(SE_FLOOR)
}

fn check_paths(paths: &[PathSample], grid: &Grid) -> Result<()> {
    if paths.len() < MIN_PATHS {
        return Err(Error::invalid(format!(
            "empirical df needs at least {MIN_PATHS} paths, got {}",
            paths.len()
        )));
    }
    paths.iter().try_for_each(|p| p.grid.ensure_same(grid, "path"))
}

/// Fraction of paths lying below `f` at every grid point (overrides included).
pub fn empirical_df(paths: &[PathSample], f: &EFunction) -> Result<Probability> {
    empirical_df_with(paths, f, Inequality::Le)
}

pub fn empirical_df_with(paths: &[PathSample], f: &EFunction, ineq: Inequality) -> Result<Probability> {
    check_paths(paths, f.grid())?;
    let hits = paths
        .iter()
        .filter(|p| p.values.iter().zip(f.values()).all(|(&x, &v)| ineq.holds(x, v)))
        .count();
    Ok(proportion(hits as u64, paths.len() as u64))
}

/// `sup_x |F_n(x) − F(x)|` of a sample against a continuous df.
pub fn ks_statistic(sample: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut xs = sample.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(k, &x)| {
            let fx = cdf(x);
            (fx - k as f64 / n).max((k + 1) as f64 / n - fx)
        })
        .fold(0.0, f64::max)
}

/// `KS_CRITICAL_1PCT/√n`.
pub fn ks_critical_1pct(n: usize) -> f64 {
    KS_CRITICAL_1PCT / (n as f64).sqrt()
}

/// Spectral radius `max_t x_t/w_t` over `w_t > 0`; `+∞` if `x_t ≥ 0` where `w_t = 0`.
///
/// For paths in `Ē⁻` the zero-weight points never bind, so `x ≤ s·w` and
/// `x < s·w` reduce to `R ≤ s` and `R < s` for `s ≤ 0`.
pub fn spectral_radius(x: &[f64], w: &[f64]) -> f64 {
    let mut r = f64::NEG_INFINITY;
    for (&xt, &wt) in x.iter().zip(w) {
        if wt > 0.0 {
            r = r.max(xt / wt);
        } else if xt >= 0.0 {
            return f64::INFINITY;
        }
    }
    r
}

/// Per-function spectral radii in replicate order.
pub(crate) struct Radii(pub Vec<Vec<f64>>);

impl Accumulator for Radii {
    fn merge(&mut self, o: Self) {
        for (a, b) in self.0.iter_mut().zip(o.0) {
            a.extend(b);
        }
    }
}

pub(crate) fn abs_weights(f: &EFunction) -> Vec<f64> {
    f.values().iter().map(|v| v.abs()).collect()
}

/// Simulates `n` paths of `process` and returns `R_f` for each `f`.
pub(crate) fn radii(process: &Process, fs: &[EFunction], n: u64, stream: &Stream) -> Result<Vec<Vec<f64>>> {
    process.check()?;
    let grid = process.grid();
    fs.iter().try_for_each(|f| f.grid().ensure_same(grid, "function"))?;
    let ws: Vec<Vec<f64>> = fs.iter().map(abs_weights).collect();
    let out = par_fold(
        stream,
        n,
        || (Radii(vec![Vec::new(); fs.len()]), (Scratch::new(grid), vec![0.0; grid.len()])),
        |acc, (scratch, x), rng, _| {
            process.sample_into(rng, scratch, x)?;
            for (r, w) in acc.0.iter_mut().zip(&ws) {
                r.push(spectral_radius(x, w));
            }
            Ok(())
        },
    )?;
    Ok(out.0)
}

pub(crate) fn count_le(r: &[f64], s: f64) -> u64 {
    r.iter().filter(|&&v| v <= s).count() as u64
}

/// A contiguous run of grid indices `lo..=hi`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridInterval {
    pub lo: usize,
    pub hi: usize,
}

impl GridInterval {
    pub fn new(lo: usize, hi: usize) -> Result<GridInterval> {
        if lo > hi {
            return Err(Error::invalid(format!("empty interval {lo}..={hi}")));
        }
        Ok(GridInterval { lo, hi })
    }

    /// Grid points inside `[a, b]`.
    pub fn from_range(grid: &Grid, a: f64, b: f64) -> Result<GridInterval> {
        let pts = grid.points();
        let lo = pts.iter().position(|&t| t >= a);
        let hi = pts.iter().rposition(|&t| t <= b);
        match (lo, hi) {
            (Some(lo), Some(hi)) if lo <= hi => Ok(GridInterval { lo, hi }),
            _ => Err(Error::invalid(format!("[{a}, {b}] contains no grid point"))),
        }
    }

    fn check(&self, grid: &Grid) -> Result<()> {
        if self.hi >= grid.len() {
            return Err(Error::invalid(format!(
                "interval {}..={} exceeds grid of {} points",
                self.lo,
                self.hi,
                grid.len()
            )));
        }
        Ok(())
    }
}

/// A finite union of grid intervals.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntervalUnion(Vec<GridInterval>);

impl IntervalUnion {
    pub fn new(parts: Vec<GridInterval>) -> Result<IntervalUnion> {
        if parts.is_empty() {
            return Err(Error::invalid("interval union needs at least one interval"));
        }
        Ok(IntervalUnion(parts))
    }

    pub fn parts(&self) -> &[GridInterval] {
        &self.0
    }

    fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().flat_map(|iv| iv.lo..=iv.hi)
    }

    fn sup(&self, x: &[f64]) -> f64 {
        self.indices().map(|i| x[i]).fold(f64::NEG_INFINITY, f64::max)
    }
}

fn check_blocks(grid: &Grid, blocks: &[IntervalUnion], thresholds: &[f64]) -> Result<()> {
    if blocks.is_empty() || blocks.len() != thresholds.len() {
        return Err(Error::invalid(format!(
            "{} blocks with {} thresholds",
            blocks.len(),
            thresholds.len()
        )));
    }
    if thresholds.iter().any(|t| !t.is_finite()) {
        return Err(Error::invalid("block thresholds must be finite"));
    }
    blocks.iter().flat_map(|b| b.parts()).try_for_each(|iv| iv.check(grid))
}

/// `P(sup_{K_i} X < t_i for all i)`, estimated on the given paths.
pub fn block_max_df(paths: &[PathSample], blocks: &[IntervalUnion], thresholds: &[f64]) -> Result<Probability> {
    let grid = paths
        .first()
        .map(|p| p.grid.clone())
        .ok_or_else(|| Error::invalid("no paths"))?;
    check_paths(paths, &grid)?;
    check_blocks(&grid, blocks, thresholds)?;
    let hits = paths
        .iter()
        .filter(|p| blocks.iter().zip(thresholds).all(|(b, &t)| b.sup(&p.values) < t))
        .count();
    Ok(proportion(hits as u64, paths.len() as u64))
}

/// Step function equal to the smallest threshold of the blocks covering each
/// point and 0 elsewhere. For paths in `Ē⁻` its strict df is the block event.
pub fn block_step_function(grid: &Grid, blocks: &[IntervalUnion], thresholds: &[f64]) -> Result<EFunction> {
    check_blocks(grid, blocks, thresholds)?;
    let mut v = vec![f64::INFINITY; grid.len()];
    for (b, &t) in blocks.iter().zip(thresholds) {
        for i in b.indices() {
            v[i] = v[i].min(t);
        }
    }
    for x in v.iter_mut() {
        if x.is_infinite() {
            *x = 0.0;
        }
    }
    Ok(EFunction::from_values(grid, v, vec![])?.with_id("block_step"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dnorm::msp_cdf;
    use crate::generator::{GeneratorSpec, PathMeta};
    use crate::gridfun::make_grid;
    use crate::simulate::{simulate_paths, ProcessKind};

    fn zero_paths(g: &Grid, n: usize) -> Vec<PathSample> {
        (0..n)
            .map(|r| PathSample {
                grid: g.clone(),
                values: vec![0.0; g.len()],
                meta: PathMeta {
                    family: "zero".into(),
                    stream_key: 0,
                    replicate: r as u64,
                },
            })
            .collect()
    }

    #[test]
    fn zero_paths_sit_below_zero_function() {
        let g = make_grid(11).unwrap();
        let paths = zero_paths(&g, 100);
        let p = empirical_df(&paths, &EFunction::constant(&g, 0.0)).unwrap();
        assert_eq!((p.p, p.se), (1.0, 0.0));
        let q = empirical_df_with(&paths, &EFunction::constant(&g, 0.0), Inequality::Lt).unwrap();
        assert_eq!(q.p, 0.0);
        assert!(empirical_df(&paths[..99], &EFunction::constant(&g, 0.0)).is_err());
        let other = make_grid(12).unwrap();
        assert!(empirical_df(&paths, &EFunction::constant(&other, 0.0)).is_err());
    }

    #[test]
    fn msp_df_with_constant_generator() {
        let g = make_grid(21).unwrap();
        let p = Process::new(ProcessKind::StandardMsp, GeneratorSpec::constant(&g));
        let (paths, _) = simulate_paths(&p, 10_000, &Stream::new(1, "edf")).unwrap();
        let e = empirical_df(&paths, &EFunction::constant(&g, -1.0)).unwrap();
        assert!(e.within((-1.0f64).exp(), 3.0), "{e:?}");
    }

    #[test]
    fn gpp_df_with_g2() {
        let g = make_grid(21).unwrap();
        let p = Process::new(ProcessKind::Gpp, GeneratorSpec::preset_g2(&g));
        let (paths, _) = simulate_paths(&p, 10_000, &Stream::new(2, "edf")).unwrap();
        let e = empirical_df(&paths, &EFunction::constant(&g, -0.1)).unwrap();
        assert!(e.within(0.8, 3.0), "{e:?}");
    }

    #[test]
    fn ks_statistic_of_exact_quantiles_is_small() {
        let n = 1000;
        let xs: Vec<f64> = (0..n).map(|k| (k as f64 + 0.5) / n as f64).collect();
        let d = ks_statistic(&xs, |x| x.clamp(0.0, 1.0));
        assert!((d - 0.5 / n as f64).abs() < 1e-12);
        assert!(ks_statistic(&xs, |x| (x * x).clamp(0.0, 1.0)) > 0.2);
    }

    #[test]
    fn spectral_radius_reduces_the_event() {
        let x = [-0.5, -0.2, -1.0];
        let w = [1.0, 0.5, 0.0];
        let r = spectral_radius(&x, &w);
        assert_eq!(r, -0.4);
        for s in [-0.5, -0.4, -0.3] {
            let direct = x.iter().zip(&w).all(|(a, b)| *a <= s * b);
            assert_eq!(direct, r <= s);
        }
        assert_eq!(spectral_radius(&[0.0], &[0.0]), f64::INFINITY);
    }

    #[test]
    fn block_examples() {
        let g = make_grid(41).unwrap();
        let c = GeneratorSpec::constant(&g);
        let p = Process::new(ProcessKind::StandardMsp, c.clone());
        let (paths, _) = simulate_paths(&p, 10_000, &Stream::new(3, "blocks")).unwrap();
        let whole = IntervalUnion::new(vec![GridInterval::from_range(&g, 0.0, 1.0).unwrap()]).unwrap();
        assert_eq!(block_max_df(&paths, std::slice::from_ref(&whole), &[0.0]).unwrap().p, 1.0);
        let e = block_max_df(&paths, &[whole], &[-1.0]).unwrap();
        assert!(e.within((-1.0f64).exp(), 3.0));

        let gp = Process::new(ProcessKind::StandardMsp, GeneratorSpec::preset_g3(&g));
        let (paths, _) = simulate_paths(&gp, 2000, &Stream::new(4, "blocks")).unwrap();
        let k1 = IntervalUnion::new(vec![GridInterval::from_range(&g, 0.0, 0.5).unwrap()]).unwrap();
        let k2 = IntervalUnion::new(vec![GridInterval::from_range(&g, 0.5, 1.0).unwrap()]).unwrap();
        let th = [-0.7, -1.2];
        let blocks = [k1, k2];
        let step = block_step_function(&g, &blocks, &th).unwrap();
        assert_eq!(
            block_max_df(&paths, &blocks, &th).unwrap(),
            empirical_df_with(&paths, &step, Inequality::Lt).unwrap()
        );
        assert_eq!(
            block_max_df(&paths, &blocks, &th).unwrap(),
            empirical_df(&paths, &step).unwrap()
        );
        let model = msp_cdf(&step, &gp.gen, &g, 20_000, &Stream::new(5, "blocks")).unwrap();
        let e = block_max_df(&paths, &blocks, &th).unwrap();
        assert!(within(e.p - model.p, crate::dnorm::combined_se(&[e.se, model.se]), 3.0));
        assert!(GridInterval::new(3, 2).is_err());
        assert!(IntervalUnion::new(vec![]).is_err());
        assert!(GridInterval::from_range(&g, 0.001, 0.002).is_err());
    }
}
