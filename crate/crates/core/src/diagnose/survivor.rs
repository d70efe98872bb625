//! Survivor-function bounds and the triangle counterexample.

use rand::Rng;
use serde::Serialize;

use super::proportion;
use crate::dnorm::{combined_se, dnorm_many, inf_functional, cdf_from_dnorm, DNormEstimate, Probability};
use crate::error::{Error, Result};
use crate::generator::{GeneratorSpec, SE_FLOOR};
use crate::gridfun::EFunction;
use crate::mc::{par_fold, Stream, Tally};
use crate::simulate::{Process, ProcessKind, Scratch, StoppingRule};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurvivorRow {
    pub s: f64,
    /// `P(η > |s|·f)` at every grid point.
    pub p: Probability,
    /// `1 − exp(−|s|·E(inf|f|Z))`.
    pub bound: f64,
    /// `P(η > |s|·f)/|s|`.
    pub slope: f64,
    pub slope_se: f64,
}

impl SurvivorRow {
    pub fn bound_holds(&self, k: f64) -> bool {
        self.p.p + k * self.p.se >= self.bound
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurvivorReport {
    pub f_id: String,
    pub gen_id: String,
    /// `E(inf_t |f(t)| Z_t)`.
    pub inf: DNormEstimate,
    pub rows: Vec<SurvivorRow>,
}

impl SurvivorReport {
    /// Slope at `row` within `k` combined SEs of the infimum functional.
    pub fn slope_agrees(&self, row: &SurvivorRow, k: f64) -> bool {
        super::within(row.slope - self.inf.value, combined_se(&[row.slope_se, self.inf.se]), k)
    }
}

/// Survivor probabilities `P(η > |s|·f)` of the standard max-stable process.
///
/// The direction `f ∈ Ē⁻` is scaled by `|s|`, so the event approaches the
/// sure event as `s ↑ 0`.
pub fn survivor_check(gen: &GeneratorSpec, f: &EFunction, s: &[f64], n: u64, stream: &Stream) -> Result<SurvivorReport> {
    if !f.is_nonpositive() {
        return Err(Error::invalid(format!("{} has positive values (outside Ē⁻)", f.id())));
    }
    if s.is_empty() || s.iter().any(|&v| !(v < 0.0) || !v.is_finite()) {
        return Err(Error::invalid("survivor check needs finite s < 0"));
    }
    let process = Process::new(ProcessKind::StandardMsp, gen.clone()).with_rule(StoppingRule::for_generator(gen));
    process.check()?;
    let grid = process.grid();
    f.grid().ensure_same(grid, "function")?;
    let fv = f.values();
    let tally = par_fold(
        &stream.child("paths"),
        n,
        || (Tally::new(s.len()), (Scratch::new(grid), vec![0.0; grid.len()])),
        |acc, (scratch, x), rng, _| {
            process.sample_into(rng, scratch, x)?;
            acc.trials += 1;
            for (hit, &sv) in acc.hits.iter_mut().zip(s) {
                let a = sv.abs();
                *hit += u64::from(x.iter().zip(fv).all(|(&xt, &ft)| xt > a * ft));
            }
            Ok(())
        },
    )?;
    let inf = inf_functional(f, gen, grid, n, &stream.child("inf"))?;
    let rows = s
        .iter()
        .enumerate()
        .map(|(k, &sv)| {
            let a = sv.abs();
            let p = proportion(tally.hits[k], n);
            SurvivorRow {
                s: sv,
                p,
                bound: 1.0 - (-a * inf.value).exp(),
                slope: p.p / a,
                slope_se: p.se / a,
            }
        })
        .collect();
    Ok(SurvivorReport {
        f_id: f.id().to_string(),
        gen_id: gen.id().to_string(),
        inf,
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CounterexampleRow {
    /// Triangle half-width is `2^{−n}`.
    pub n: u32,
    /// `max_f |P(η_n ≤ f) − exp(−‖f‖_D)|` over the bank.
    pub deviation: f64,
    pub deviation_se: f64,
    pub deviation_f: String,
    /// `P(η_n > c)` at every grid point.
    pub p_exceed_n: Probability,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CounterexampleReport {
    pub gen_id: String,
    pub c: f64,
    /// `E(min_t Z_t)`.
    pub e_min_z: DNormEstimate,
    /// `P(η > c)` at every grid point.
    pub p_exceed: Probability,
    /// `1 − exp(c + 1)`, an upper bound for `P(η_n > c)`.
    pub upper_bound_n: f64,
    /// `1 − exp(c·E(min Z))`, a lower bound for `P(η > c)`.
    pub lower_bound: f64,
    pub rows: Vec<CounterexampleRow>,
}

impl CounterexampleRow {
    /// `P(η_n > c) + k·SE < P(η > c) − k·SE`.
    pub fn separated(&self, report: &CounterexampleReport, k: f64) -> bool {
        self.p_exceed_n.p + k * self.p_exceed_n.se < report.p_exceed.p - k * report.p_exceed.se
    }
}

/// Triangle of height 1 at grid index `peak` with half-width `w`, subtracted from `x`.
fn subtract_triangle(x: &mut [f64], pts: &[f64], peak: usize, w: f64) {
    let u = pts[peak];
    x[peak] -= 1.0;
    for i in (0..peak).rev() {
        let d = 1.0 - (u - pts[i]) / w;
        if d <= 0.0 {
            break;
        }
        x[i] -= d;
    }
    for i in peak + 1..pts.len() {
        let d = 1.0 - (pts[i] - u) / w;
        if d <= 0.0 {
            break;
        }
        x[i] -= d;
    }
}

/// The sequence `η_n = η − Δ_n^U` whose dfs converge to that of `η` although
/// `P(η_n > c)` stays bounded away from `P(η > c)`.
///
/// `U` is snapped to the nearest grid point, so the triangle peak is exactly 1
/// and collapses to that point once `2^{−n}` drops below the grid spacing.
pub fn counterexample_run(
    gen: &GeneratorSpec,
    fs: &[EFunction],
    c: f64,
    ns: &[u32],
    replicates: u64,
    stream: &Stream,
) -> Result<CounterexampleReport> {
    if !(c > -2.0 && c < -1.0) {
        return Err(Error::invalid(format!("c must lie in (−2, −1), got {c}")));
    }
    if fs.is_empty() || ns.is_empty() {
        return Err(Error::invalid("counterexample needs functions and n values"));
    }
    if let Some(f) = fs.iter().find(|f| !f.is_nonpositive()) {
        return Err(Error::invalid(format!("{} has positive values (outside Ē⁻)", f.id())));
    }
    if ns.iter().any(|&n| n > 60) {
        return Err(Error::invalid("triangle exponent n must be ≤ 60"));
    }
    let grid = gen.grid().clone();
    let one = EFunction::constant(&grid, -1.0);
    let e_min_z = inf_functional(&one, gen, &grid, replicates, &stream.child("emin"))?;
    if e_min_z.value <= 3.0 * e_min_z.se.max(SE_FLOOR) {
        return Err(Error::invalid(format!(
            "needs E(min Z) > 0; estimate {} with SE {}",
            e_min_z.value, e_min_z.se
        )));
    }
    if c * (1.0 - e_min_z.value) <= -1.0 {
        return Err(Error::invalid(format!(
            "side condition c·(1 − E(min Z)) > −1 fails: {c}·(1 − {}) = {}",
            e_min_z.value,
            c * (1.0 - e_min_z.value)
        )));
    }
    let process = Process::new(ProcessKind::StandardMsp, gen.clone()).with_rule(StoppingRule::for_generator(gen));
    process.check()?;
    let pts = grid.points().to_vec();
    let nf = fs.len();
    // Events: per n, per f: η_n ≤ f; per n: η_n > c; finally η > c.
    let events = ns.len() * (nf + 1) + 1;
    let tally = par_fold(
        &stream.child("paths"),
        replicates,
        || (Tally::new(events), (Scratch::new(&grid), vec![0.0; grid.len()], vec![0.0; grid.len()])),
        |acc, (scratch, eta, eta_n), rng, _| {
            process.sample_into(rng, scratch, eta)?;
            let peak = grid.nearest_index(rng.random::<f64>());
            acc.trials += 1;
            for (k, &n) in ns.iter().enumerate() {
                eta_n.copy_from_slice(eta);
                subtract_triangle(eta_n, &pts, peak, (-(n as f64)).exp2());
                let base = k * (nf + 1);
                for (i, f) in fs.iter().enumerate() {
                    let le = eta_n.iter().zip(f.values()).all(|(a, b)| a <= b);
                    acc.hits[base + i] += u64::from(le);
                }
                acc.hits[base + nf] += u64::from(eta_n.iter().all(|&v| v > c));
            }
            acc.hits[events - 1] += u64::from(eta.iter().all(|&v| v > c));
            Ok(())
        },
    )?;
    let models: Vec<Probability> = dnorm_many(fs, gen, &grid, replicates, &stream.child("dnorm"))?
        .iter()
        .map(cdf_from_dnorm)
        .collect();
    let rows = ns
        .iter()
        .enumerate()
        .map(|(k, &n)| {
            let base = k * (nf + 1);
            let (i, deviation, se) = (0..nf)
                .map(|i| {
                    let p = proportion(tally.hits[base + i], replicates);
                    (i, (p.p - models[i].p).abs(), combined_se(&[p.se, models[i].se]))
                })
                .fold((0, -1.0, 0.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            CounterexampleRow {
                n,
                deviation,
                deviation_se: se,
                deviation_f: fs[i].id().to_string(),
                p_exceed_n: proportion(tally.hits[base + nf], replicates),
            }
        })
        .collect();
    Ok(CounterexampleReport {
        gen_id: gen.id().to_string(),
        c,
        p_exceed: proportion(tally.hits[events - 1], replicates),
        upper_bound_n: 1.0 - (c + 1.0).exp(),
        lower_bound: 1.0 - (c * e_min_z.value).exp(),
        e_min_z,
        rows,
    })
}
