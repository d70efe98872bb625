//! Convergence of normalized maxima: domain-of-attraction curves and rates.

use serde::Serialize;

use super::spectral::least_squares;
use super::within;
use crate::dnorm::{combined_se, dnorm_mc, sup_weighted, Probability};
use crate::error::{Error, Result};
use crate::generator::SE_FLOOR;
use crate::gridfun::EFunction;
use crate::mc::{par_fold, PairMoments, Stream, Tally};
use crate::simulate::{Process, ProcessKind, Scratch};

/// Norming constants `a_n = n^{−a_exponent}`, `b_n = b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Norming {
    pub a_exponent: f64,
    pub b: f64,
}

impl Default for Norming {
    fn default() -> Self {
        Norming { a_exponent: 1.0, b: 0.0 }
    }
}

impl Norming {
    pub fn a(&self, n: u64) -> f64 {
        (n as f64).powf(-self.a_exponent)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DoaRow {
    pub n: u64,
    /// `P((X − b_n)/a_n ≤ f)`.
    pub le: Probability,
    /// `P((X − b_n)/a_n < f)`.
    pub lt: Probability,
    /// `le^n` with a delta-method SE.
    pub le_pow: f64,
    pub le_pow_se: f64,
    pub lt_pow: f64,
    pub lt_pow_se: f64,
    /// `exp(−‖f‖_D)`.
    pub model: Probability,
    pub dev_le: f64,
    pub dev_lt: f64,
    pub dev_se: f64,
}

impl DoaRow {
    /// Closed and open events agree within `k` combined SEs.
    pub fn open_closed_agree(&self, k: f64) -> bool {
        within(self.le_pow - self.lt_pow, combined_se(&[self.le_pow_se, self.lt_pow_se]), k)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DoaCurve {
    pub f_id: String,
    pub process: ProcessKind,
    pub rows: Vec<DoaRow>,
}

impl DoaCurve {
    /// Deviations are nonincreasing in `n` up to `k`-SE noise bands.
    pub fn monotone_within(&self, k: f64) -> bool {
        self.rows.windows(2).all(|w| {
            w[1].dev_le <= w[0].dev_le + k * combined_se(&[w[0].dev_se, w[1].dev_se]).max(SE_FLOOR)
        })
    }
}

fn check_n_list(ns: &[u64], min_len: usize) -> Result<()> {
    if ns.len() < min_len {
        return Err(Error::invalid(format!("need at least {min_len} n values, got {}", ns.len())));
    }
    if ns[0] == 0 || ns.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("n values must be positive and strictly increasing"));
    }
    Ok(())
}

/// `|P((X − b_n)/a_n ≤ f)^n − exp(−‖f‖_D)|` per `n`, with the strict event as
/// a companion column.
pub fn doa_curve(
    process: &Process,
    norming: Norming,
    f: &EFunction,
    ns: &[u64],
    replicates: u64,
    stream: &Stream,
) -> Result<DoaCurve> {
    if !f.is_nonpositive() {
        return Err(Error::invalid(format!("{} has positive values (outside Ē⁻)", f.id())));
    }
    check_n_list(ns, 1)?;
    process.check()?;
    let grid = process.grid();
    f.grid().ensure_same(grid, "function")?;
    let fv = f.values();
    let levels: Vec<(f64, f64)> = ns.iter().map(|&n| (norming.a(n), norming.b)).collect();
    let tally = par_fold(
        &stream.child("paths"),
        replicates,
        || (Tally::new(2 * ns.len()), (Scratch::new(grid), vec![0.0; grid.len()])),
        |acc, (scratch, x), rng, _| {
            process.sample_into(rng, scratch, x)?;
            acc.trials += 1;
            for (k, &(a, b)) in levels.iter().enumerate() {
                let mut le = true;
                let mut lt = true;
                for (&xt, &ft) in x.iter().zip(fv) {
                    let bound = a * ft + b;
                    le &= xt <= bound;
                    lt &= xt < bound;
                    if !le {
                        break;
                    }
                }
                acc.hits[2 * k] += u64::from(le);
                acc.hits[2 * k + 1] += u64::from(le && lt);
            }
            Ok(())
        },
    )?;
    let d = dnorm_mc(f, &process.gen, grid, replicates, &stream.child("dnorm"))?;
    let model = crate::dnorm::cdf_from_dnorm(&d);
    let pow = |p: &Probability, n: u64| {
        let nf = n as f64;
        (p.p.powf(nf), nf * p.p.powf(nf - 1.0) * p.se)
    };
    let rows = ns
        .iter()
        .enumerate()
        .map(|(k, &n)| {
            let le = super::proportion(tally.hits[2 * k], replicates);
            let lt = super::proportion(tally.hits[2 * k + 1], replicates);
            let (le_pow, le_pow_se) = pow(&le, n);
            let (lt_pow, lt_pow_se) = pow(&lt, n);
            DoaRow {
                n,
                le,
                lt,
                le_pow,
                le_pow_se,
                lt_pow,
                lt_pow_se,
                model,
                dev_le: (le_pow - model.p).abs(),
                dev_lt: (lt_pow - model.p).abs(),
                dev_se: combined_se(&[le_pow_se, model.se]),
            }
        })
        .collect();
    Ok(DoaCurve {
        f_id: f.id().to_string(),
        process: process.kind,
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatePoint {
    pub n: u64,
    /// `sup_f |P(X ≤ f/n)^n − exp(−‖f‖_D)|` over the bank.
    pub deviation: f64,
    pub se: f64,
    /// The bank member attaining the supremum.
    pub f_id: String,
    /// Used in the fit (deviation above 3 SE of zero).
    pub kept: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateReport {
    pub process: ProcessKind,
    pub gen_id: String,
    pub target_delta: f64,
    pub points: Vec<RatePoint>,
    /// Least-squares slope of `log deviation` against `log n` over kept points.
    pub slope: Option<f64>,
    pub intercept: Option<f64>,
}

impl RateReport {
    /// Every deviation is within 3 SE of zero.
    pub fn all_noise(&self) -> bool {
        self.points.iter().all(|p| !p.kept)
    }
}

/// Per-sample functional `x` with `P(X ≤ f/n) = 1 − E x` (GPP) or
/// `P(X ≤ f/n)^n = exp(−n·E x)` (max-stable and copula).
fn rate_functional(kind: ProcessKind, n: u64, sup: f64, w: &[f64], z: &[f64]) -> f64 {
    let nf = n as f64;
    match kind {
        ProcessKind::Gpp => (sup / nf).min(1.0),
        ProcessKind::StandardMsp => sup / nf,
        ProcessKind::ShiftedCopula => w
            .iter()
            .zip(z)
            .fold(0.0, |m, (&wt, &zt)| m.max(-(-wt / nf).ln_1p() * zt)),
    }
}

/// Rate of `P(X ≤ f/n)^n → exp(−‖f‖_D)` over a function bank.
///
/// Both sides are computed from one stream of generator paths through the
/// exact conditional df of `X` given `Z`, so the Monte Carlo noise cancels to
/// first order and deviations of order `1/n` remain resolvable at large `n`.
pub fn rate_fit(process: &Process, fs: &[EFunction], ns: &[u64], replicates: u64, stream: &Stream) -> Result<RateReport> {
    if fs.is_empty() {
        return Err(Error::invalid("rate fit needs a non-empty function bank"));
    }
    if let Some(f) = fs.iter().find(|f| !f.is_nonpositive()) {
        return Err(Error::invalid(format!("{} has positive values (outside Ē⁻)", f.id())));
    }
    check_n_list(ns, 4)?;
    process.gen.ensure_ready()?;
    let kind = process.kind;
    if kind == ProcessKind::ShiftedCopula {
        let sup = fs.iter().map(EFunction::sup_norm).fold(0.0, f64::max);
        if ns[0] as f64 <= sup {
            return Err(Error::invalid("copula rates need n > ‖f‖_∞"));
        }
    }
    let grid = process.grid();
    fs.iter().try_for_each(|f| f.grid().ensure_same(grid, "function"))?;
    let ws: Vec<Vec<f64>> = fs.iter().map(super::abs_weights).collect();
    let nn = ns.len();
    let pairs = par_fold(
        stream,
        replicates,
        || (vec![PairMoments::default(); fs.len() * nn], vec![0.0; grid.len()]),
        |acc, z, rng, _| {
            process.gen.sample_into(rng, z)?;
            for (i, w) in ws.iter().enumerate() {
                let sup = sup_weighted(w, z);
                for (j, &n) in ns.iter().enumerate() {
                    acc[i * nn + j].push(rate_functional(kind, n, sup, w, z), sup);
                }
            }
            Ok(())
        },
    )?;
    let mut points = Vec::with_capacity(nn);
    for (j, &n) in ns.iter().enumerate() {
        let nf = n as f64;
        let mut best: Option<(f64, f64, usize)> = None;
        for i in 0..fs.len() {
            let pm = &pairs[i * nn + j];
            let model = (-pm.mean_y).exp();
            let (approx, a) = match kind {
                ProcessKind::Gpp => {
                    let p = 1.0 - pm.mean_x;
                    (p.powf(nf), -nf * p.powf(nf - 1.0))
                }
                _ => {
                    let e = (-nf * pm.mean_x).exp();
                    (e, -nf * e)
                }
            };
            let dev = (approx - model).abs();
            let se = pm.linear_se(a, model);
            if best.is_none_or(|(d, _, _)| dev > d) {
                best = Some((dev, se, i));
            }
        }
        let (deviation, se, i) = best.expect("non-empty bank");
        points.push(RatePoint {
            n,
            deviation,
            se,
            f_id: fs[i].id().to_string(),
            kept: deviation > 3.0 * se.max(SE_FLOOR),
        });
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = points
        .iter()
        .filter(|p| p.kept)
        .map(|p| ((p.n as f64).ln(), p.deviation.ln()))
        .unzip();
    let fit = least_squares(&xs, &ys);
    Ok(RateReport {
        process: kind,
        gen_id: process.gen.id().to_string(),
        target_delta: 1.0,
        points,
        slope: fit.map(|f| f.0),
        intercept: fit.map(|f| f.1),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::GeneratorSpec;
    use crate::gridfun::{make_grid, standard_bank};

    #[test]
    fn gpp_rate_against_analytic_oracle() {
        // Constant generator: P(V ≤ f/n)^n − e^{−c} = (1 − c/n)^n − e^{−c} exactly.
        let g = make_grid(11).unwrap();
        let p = Process::new(ProcessKind::Gpp, GeneratorSpec::constant(&g));
        let fs = vec![EFunction::constant(&g, -1.0).with_id("c1")];
        let ns = [8, 16, 32, 64];
        let rep = rate_fit(&p, &fs, &ns, 100, &Stream::new(1, "rate")).unwrap();
        for pt in &rep.points {
            let oracle = ((1.0 - 1.0 / pt.n as f64).powf(pt.n as f64) - (-1.0f64).exp()).abs();
            assert!((pt.deviation - oracle).abs() < 1e-14, "{pt:?}");
            assert!(pt.kept);
        }
        let slope = rep.slope.unwrap();
        assert!((-1.1..=-0.9).contains(&slope), "{slope}");
    }

    #[test]
    fn msp_rate_deviation_is_noise() {
        let g = make_grid(21).unwrap();
        let p = Process::new(ProcessKind::StandardMsp, GeneratorSpec::preset_g3(&g));
        let bank = standard_bank(&g);
        let rep = rate_fit(&p, &bank.functions()[..5], &[8, 16, 32, 64], 2000, &Stream::new(2, "msp")).unwrap();
        assert!(rep.all_noise(), "{rep:?}");
        assert!(rep.slope.is_none());
    }

    #[test]
    fn copula_rate_is_first_order() {
        let g = make_grid(21).unwrap();
        let p = Process::new(ProcessKind::ShiftedCopula, GeneratorSpec::preset_g3(&g));
        let bank = standard_bank(&g);
        let rep = rate_fit(&p, &bank.functions()[..6], &[8, 16, 32, 64, 128], 5000, &Stream::new(3, "cop")).unwrap();
        let slope = rep.slope.unwrap();
        assert!((-1.3..=-0.7).contains(&slope), "{rep:?}");
    }

    #[test]
    fn rate_preconditions() {
        let g = make_grid(11).unwrap();
        let p = Process::new(ProcessKind::Gpp, GeneratorSpec::constant(&g));
        let f = vec![EFunction::constant(&g, -1.0)];
        assert!(rate_fit(&p, &[], &[1, 2, 3, 4], 10, &Stream::new(0, "x")).is_err());
        assert!(rate_fit(&p, &f, &[1, 2, 3], 10, &Stream::new(0, "x")).is_err());
        assert!(rate_fit(&p, &f, &[1, 3, 2, 4], 10, &Stream::new(0, "x")).is_err());
        assert!(rate_fit(&p, &[EFunction::constant(&g, 1.0)], &[1, 2, 3, 4], 10, &Stream::new(0, "x")).is_err());
    }

    #[test]
    fn doa_for_msp_is_exact_and_gpp_shrinks() {
        let g = make_grid(21).unwrap();
        let f = EFunction::from_fn(&g, |t| -(1.0 + t) / 2.0).unwrap();
        let msp = Process::new(ProcessKind::StandardMsp, GeneratorSpec::preset_g3(&g));
        let c = doa_curve(&msp, Norming::default(), &f, &[1, 4, 16], 20_000, &Stream::new(4, "doa")).unwrap();
        for row in &c.rows {
            assert!(row.dev_le <= 3.0 * row.dev_se, "{row:?}");
            assert!(row.open_closed_agree(3.0));
        }
        let gpp = Process::new(ProcessKind::Gpp, GeneratorSpec::preset_g3(&g));
        let c = doa_curve(&gpp, Norming::default(), &f, &[1, 2, 4, 8], 20_000, &Stream::new(5, "doa")).unwrap();
        assert!(c.monotone_within(3.0), "{c:?}");
        assert!(c.rows[0].dev_le > 0.1);
        assert!(c.rows.iter().all(|r| r.open_closed_agree(3.0)));
    }
}
