//! Spectral dfs `H_f(s) = P(X ≤ s|f|)`, their tails and the von Mises diagnostic.

use serde::Serialize;

use super::{count_le, proportion, radii};
use crate::dnorm::{combined_se, dnorm_mc, sup_weighted, DNormEstimate, Probability};
use crate::error::{Error, Result};
use crate::generator::{generator_constant, SE_FLOOR};
use crate::gridfun::EFunction;
use crate::mc::{par_fold, PairMoments, Stream};
use crate::simulate::{Process, ProcessKind};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralPoint {
    pub s: f64,
    pub estimate: Probability,
    /// `1 + s‖f‖_D`.
    pub model: f64,
    /// Inside the region where the uniform-df identity is asserted.
    pub valid: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralCurve {
    pub f_id: String,
    pub process: ProcessKind,
    pub dnorm: DNormEstimate,
    /// `s₀`: smallest `s` of the validity region.
    pub s0: f64,
    pub points: Vec<SpectralPoint>,
}

/// Least-squares line through the valid points of a curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub max_residual: f64,
    pub max_se: f64,
}

pub(crate) fn least_squares(xs: &[f64], ys: &[f64]) -> Option<(f64, f64)> {
    let n = xs.len() as f64;
    if xs.len() < 2 {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

impl SpectralCurve {
    pub fn s_values(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.s).collect()
    }

    pub fn linear_fit(&self) -> Option<LinearFit> {
        let valid: Vec<&SpectralPoint> = self.points.iter().filter(|p| p.valid).collect();
        let xs: Vec<f64> = valid.iter().map(|p| p.s).collect();
        let ys: Vec<f64> = valid.iter().map(|p| p.estimate.p).collect();
        let (slope, intercept) = least_squares(&xs, &ys)?;
        let max_residual = xs
            .iter()
            .zip(&ys)
            .map(|(x, y)| (y - slope * x - intercept).abs())
            .fold(0.0, f64::max);
        let max_se = valid.iter().map(|p| p.estimate.se).fold(0.0, f64::max);
        Some(LinearFit {
            slope,
            intercept,
            max_residual,
            max_se,
        })
    }
}

fn check_s(s: &[f64]) -> Result<()> {
    if s.is_empty() {
        return Err(Error::invalid("need at least one s value"));
    }
    if s.iter().any(|&v| !(v <= 0.0) || !v.is_finite()) {
        return Err(Error::invalid("s values must be finite and ≤ 0"));
    }
    if s.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("s values must be strictly increasing"));
    }
    Ok(())
}

/// `M` if the generator declares an almost-sure bound, else an estimate of `m`.
pub fn gpp_bound(process: &Process, n: u64, stream: &Stream) -> Result<f64> {
    match process.gen.as_bound() {
        Some(m) => Ok(m),
        None => Ok(generator_constant(&process.gen, process.grid(), n, &stream.child("bound"))?.value),
    }
}

/// Empirical spectral df of `process` in direction `f`.
///
/// For GPPs rows with `|s|·‖f‖_∞ > 1/M` are marked invalid, `M` being the
/// generator's almost-sure bound (or the estimated generator constant when no
/// bound is declared).
pub fn spectral_df(process: &Process, f: &EFunction, s: &[f64], n: u64, stream: &Stream) -> Result<SpectralCurve> {
    check_s(s)?;
    let grid = process.grid();
    let r = radii(process, std::slice::from_ref(f), n, &stream.child("paths"))?.remove(0);
    let d = dnorm_mc(f, &process.gen, grid, n, &stream.child("dnorm"))?;
    let sup = f.sup_norm();
    let s0 = if sup == 0.0 {
        f64::NEG_INFINITY
    } else {
        -1.0 / (gpp_bound(process, n, stream)? * sup)
    };
    let points = s
        .iter()
        .map(|&sv| SpectralPoint {
            s: sv,
            estimate: proportion(count_le(&r, sv), n),
            model: 1.0 + sv * d.value,
            valid: process.kind != ProcessKind::Gpp || sv >= s0,
        })
        .collect();
    Ok(SpectralCurve {
        f_id: f.id().to_string(),
        process: process.kind,
        dnorm: d,
        s0,
        points,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailRatio {
    pub s: f64,
    /// `1 − Ĥ_f(s)`.
    pub tail: Probability,
    /// `(1 − Ĥ_f(s))/(|s|‖f‖_D)`.
    pub ratio: f64,
    pub se: f64,
    /// The same ratio computed from the process's exact df on shared paths.
    pub oracle: f64,
    pub oracle_se: f64,
}

impl TailRatio {
    pub fn agrees(&self, k: f64) -> bool {
        super::within(self.ratio - self.oracle, combined_se(&[self.se, self.oracle_se]), k)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailReport {
    pub f_id: String,
    pub process: ProcessKind,
    pub dnorm: DNormEstimate,
    /// In the order of the requested `s` values.
    pub rows: Vec<TailRatio>,
}

impl TailReport {
    /// `|oracle − 1|` does not increase as `|s|` shrinks.
    pub fn oracle_monotone(&self) -> bool {
        let mut rows: Vec<&TailRatio> = self.rows.iter().collect();
        rows.sort_by(|a, b| b.s.abs().total_cmp(&a.s.abs()));
        rows.windows(2)
            .all(|w| (w[1].oracle - 1.0).abs() <= (w[0].oracle - 1.0).abs() + 1e-12)
    }

    /// `|ratio − 1|` does not increase as `|s|` shrinks, up to `k` combined SEs.
    pub fn empirical_monotone(&self, k: f64) -> bool {
        let mut rows: Vec<&TailRatio> = self.rows.iter().collect();
        rows.sort_by(|a, b| b.s.abs().total_cmp(&a.s.abs()));
        rows.windows(2).all(|w| {
            (w[1].ratio - 1.0).abs() <= (w[0].ratio - 1.0).abs() + k * combined_se(&[w[0].se, w[1].se])
        })
    }
}

/// Per-sample `φ` of the exact tail of `kind`: the tail `1 − H_f(s)` is
/// `E φ` for GPPs and `1 − exp(−E φ)` otherwise.
fn tail_functional(kind: ProcessKind, s: f64, w: &[f64], z: &[f64]) -> f64 {
    let a = s.abs();
    match kind {
        // P(V ≤ s|f| | Z) = 1 − min(|s|·sup|f|Z, 1)
        ProcessKind::Gpp => (a * sup_weighted(w, z)).min(1.0),
        ProcessKind::StandardMsp => a * sup_weighted(w, z),
        // P(U − 1 ≤ s|f|) = exp(−‖log(1 + s|f|)‖_D)
        ProcessKind::ShiftedCopula => w
            .iter()
            .zip(z)
            .fold(0.0, |m, (&wt, &zt)| m.max(-(-a * wt).ln_1p() * zt)),
    }
}

fn tail_is_exp(kind: ProcessKind) -> bool {
    kind != ProcessKind::Gpp
}

/// Ratio of the empirical tail of `H_f` to the GPP tail `|s|‖f‖_D`.
pub fn tail_equivalence(process: &Process, f: &EFunction, s: &[f64], n: u64, stream: &Stream) -> Result<TailReport> {
    if s.is_empty() || s.iter().any(|&v| !(v < 0.0) || !v.is_finite()) {
        return Err(Error::invalid("tail equivalence needs finite s < 0"));
    }
    let kind = process.kind;
    if kind == ProcessKind::ShiftedCopula && s.iter().any(|&v| v.abs() * f.sup_norm() >= 1.0) {
        return Err(Error::invalid("copula tails need |s|·‖f‖_∞ < 1"));
    }
    let grid = process.grid();
    let w = super::abs_weights(f);
    // Shared generator paths: S = sup|f|Z and the exact tail functional per s.
    let pairs = par_fold(
        &stream.child("oracle"),
        n,
        || (vec![PairMoments::default(); s.len()], vec![0.0; grid.len()]),
        |acc, z, rng, _| {
            process.gen.sample_into(rng, z)?;
            let sup = sup_weighted(&w, z);
            for (pm, &sv) in acc.iter_mut().zip(s) {
                pm.push(tail_functional(kind, sv, &w, z), sup);
            }
            Ok(())
        },
    )?;
    let d_mean = pairs[0].mean_y;
    let d_se = (pairs[0].var_y() / n as f64).sqrt();
    if d_mean <= 0.0 {
        return Err(Error::invalid(format!("‖{}‖_D estimate is 0", f.id())));
    }
    let dnorm = DNormEstimate {
        value: d_mean,
        se: d_se,
        n,
        gen_id: process.gen.id().to_string(),
        f_id: f.id().to_string(),
    };
    let r = radii(process, std::slice::from_ref(f), n, &stream.child("paths"))?.remove(0);
    let rows = s
        .iter()
        .zip(&pairs)
        .map(|(&sv, pm)| {
            let a = sv.abs();
            let denom = a * d_mean;
            let tail = proportion(n - count_le(&r, sv), n);
            let ratio = tail.p / denom;
            let se = ((tail.se / denom).powi(2) + (ratio * d_se / d_mean).powi(2)).sqrt();
            let (oracle, oracle_se) = if tail_is_exp(kind) {
                let e = (-pm.mean_x).exp();
                let o = (1.0 - e) / denom;
                (o, pm.linear_se(e / denom, -o / d_mean))
            } else {
                let o = pm.mean_x / denom;
                (o, pm.linear_se(1.0 / denom, -o / d_mean))
            };
            TailRatio {
                s: sv,
                tail,
                ratio,
                se,
                oracle,
                oracle_se,
            }
        })
        .collect();
    Ok(TailReport {
        f_id: f.id().to_string(),
        process: kind,
        dnorm,
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VonMisesRow {
    pub c: f64,
    /// Half-width of the central difference.
    pub delta: f64,
    /// `2·SE/δ`-type noise target met without capping `δ` at `|c|/2`.
    pub noise_ok: bool,
    pub h: f64,
    pub h_se: f64,
    /// `1 − Ĥ_f(c)`.
    pub tail: Probability,
    pub r: f64,
    pub r_se: f64,
    /// `r_f(c)` from the exact df on shared generator paths.
    pub oracle_r: f64,
    /// `1 − Ĥ_f(c) ≤ 0`: `r` is undefined.
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VonMisesReport {
    pub f_id: String,
    pub process: ProcessKind,
    pub dnorm: DNormEstimate,
    pub rows: Vec<VonMisesRow>,
    /// `|oracle r_f(c)|` is nonincreasing as `c ↑ 0`.
    pub shrinking: bool,
}

/// Target for the finite-difference noise: `1/√(2δ‖f‖_D N) ≤ 0.1`.
const FD_NOISE_CONSTANT: f64 = 50.0;

/// Exact `r_f(c)` for `kind`, from per-sample tail functionals and derivatives.
fn oracle_r(kind: ProcessKind, c: f64, zs: &OracleSums) -> f64 {
    let a = c.abs();
    match kind {
        ProcessKind::Gpp => a * zs.deriv / zs.value - 1.0,
        ProcessKind::StandardMsp | ProcessKind::ShiftedCopula => {
            let h_cdf = (-zs.value).exp();
            a * h_cdf * zs.deriv / (1.0 - h_cdf) - 1.0
        }
    }
}

struct OracleSums {
    value: f64,
    deriv: f64,
}

/// Per-sample `(φ, ∂φ/∂|c|)` for the exact tail functional at `c`.
fn tail_and_derivative(kind: ProcessKind, c: f64, w: &[f64], z: &[f64]) -> (f64, f64) {
    let a = c.abs();
    match kind {
        ProcessKind::Gpp => {
            let sup = sup_weighted(w, z);
            if a * sup < 1.0 {
                (a * sup, sup)
            } else {
                (1.0, 0.0)
            }
        }
        ProcessKind::StandardMsp => {
            let sup = sup_weighted(w, z);
            (a * sup, sup)
        }
        ProcessKind::ShiftedCopula => {
            // Envelope: the derivative of the sup is taken at the maximizer.
            let mut best = (0.0, 0.0);
            for (&wt, &zt) in w.iter().zip(z) {
                let v = -(-a * wt).ln_1p() * zt;
                if v > best.0 {
                    best = (v, wt * zt / (1.0 - a * wt));
                }
            }
            best
        }
    }
}

/// Estimates `r_f(c) = −c·h_f(c)/(1 − H_f(c)) − 1` by central differences.
pub fn von_mises_diagnostic(process: &Process, f: &EFunction, c: &[f64], n: u64, stream: &Stream) -> Result<VonMisesReport> {
    if (f.sup_norm() - 1.0).abs() > 1e-12 {
        return Err(Error::invalid(format!(
            "von Mises diagnostic needs ‖f‖_∞ = 1, got {}",
            f.sup_norm()
        )));
    }
    if c.is_empty() || c.iter().any(|&v| !(v < 0.0) || !v.is_finite()) || c.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("c values must be strictly negative and strictly increasing"));
    }
    let kind = process.kind;
    if kind == ProcessKind::ShiftedCopula && c[0] <= -1.0 {
        return Err(Error::invalid("copula diagnostic needs c > −1"));
    }
    let grid = process.grid();
    let w = super::abs_weights(f);
    let sums = par_fold(
        &stream.child("oracle"),
        n,
        || (vec![PairMoments::default(); c.len()], vec![0.0; grid.len()]),
        |acc, z, rng, _| {
            process.gen.sample_into(rng, z)?;
            for (pm, &cv) in acc.iter_mut().zip(c) {
                let (v, dv) = tail_and_derivative(kind, cv, &w, z);
                pm.push(v, dv);
            }
            Ok(())
        },
    )?;
    let dnorm = dnorm_mc(f, &process.gen, grid, n, &stream.child("dnorm"))?;
    if dnorm.value <= 0.0 {
        return Err(Error::invalid(format!("‖{}‖_D estimate is 0", f.id())));
    }
    let r = radii(process, std::slice::from_ref(f), n, &stream.child("paths"))?.remove(0);
    let nf = n as f64;
    let rows: Vec<VonMisesRow> = c
        .iter()
        .zip(&sums)
        .map(|(&cv, pm)| {
            let ideal = FD_NOISE_CONSTANT / (dnorm.value * nf);
            let cap = cv.abs() / 2.0;
            let delta = ideal.min(cap);
            let band = count_le(&r, cv + delta) - count_le(&r, cv - delta);
            let q = band as f64 / nf;
            let h = q / (2.0 * delta);
            let h_se = (q * (1.0 - q) / nf).sqrt() / (2.0 * delta);
            let tail = proportion(n - count_le(&r, cv), n);
            let flagged = tail.p <= 0.0;
            let (rv, r_se) = if flagged {
                (f64::NAN, f64::NAN)
            } else {
                let t = tail.p;
                let rv = -cv * h / t - 1.0;
                let se = ((cv * h_se / t).powi(2) + (cv * h * tail.se / (t * t)).powi(2)).sqrt();
                (rv, se)
            };
            let oracle = oracle_r(
                kind,
                cv,
                &OracleSums {
                    value: pm.mean_x,
                    deriv: pm.mean_y,
                },
            );
            VonMisesRow {
                c: cv,
                delta,
                noise_ok: ideal <= cap,
                h,
                h_se,
                tail,
                r: rv,
                r_se,
                oracle_r: oracle,
                flagged,
            }
        })
        .collect();
    let shrinking = rows
        .windows(2)
        .all(|w| w[1].oracle_r.abs() <= w[0].oracle_r.abs() + 1e-9);
    Ok(VonMisesReport {
        f_id: f.id().to_string(),
        process: kind,
        dnorm,
        rows,
        shrinking,
    })
}

impl VonMisesRow {
    pub fn agrees(&self, k: f64) -> bool {
        !self.flagged && (self.r - self.oracle_r).abs() <= k * self.r_se.max(SE_FLOOR)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::GeneratorSpec;
    use crate::gridfun::{make_grid, standard_bank};

    #[test]
    fn gpp_spectral_curve_is_linear() {
        let g = make_grid(51).unwrap();
        let gen = GeneratorSpec::preset_g3(&g);
        let p = Process::new(ProcessKind::Gpp, gen);
        let f = EFunction::from_fn(&g, |t| -(1.0 + t) / 2.0).unwrap();
        let s0 = -1.0 / (1.5 * f.sup_norm());
        let s: Vec<f64> = (0..8).map(|k| s0 * (8 - k) as f64 / 8.0).collect();
        let curve = spectral_df(&p, &f, &s, 20_000, &Stream::new(1, "spec")).unwrap();
        for pt in &curve.points {
            assert!(pt.valid);
            assert!(pt.estimate.within(pt.model, 4.0), "{pt:?}");
        }
        let fit = curve.linear_fit().unwrap();
        assert!((fit.slope - 1.140625).abs() < 0.05, "{fit:?}");
        // Beyond s0 rows are flagged.
        let beyond = spectral_df(&p, &f, &[2.0 * s0, s0 / 2.0], 1000, &Stream::new(1, "b")).unwrap();
        assert!(!beyond.points[0].valid && beyond.points[1].valid);
    }

    #[test]
    fn zero_direction_gives_ones() {
        let g = make_grid(11).unwrap();
        let p = Process::new(ProcessKind::ShiftedCopula, GeneratorSpec::preset_g2(&g));
        let f = EFunction::constant(&g, 0.0);
        let curve = spectral_df(&p, &f, &[-0.5, -0.1, 0.0], 500, &Stream::new(2, "z")).unwrap();
        assert!(curve.points.iter().all(|pt| pt.estimate.p == 1.0));
        assert!(spectral_df(&p, &f, &[-0.1, -0.5], 500, &Stream::new(2, "z")).is_err());
        assert!(spectral_df(&p, &f, &[0.1], 500, &Stream::new(2, "z")).is_err());
    }

    #[test]
    fn copula_tail_ratios_match_oracle() {
        let g = make_grid(41).unwrap();
        let p = Process::new(ProcessKind::ShiftedCopula, GeneratorSpec::preset_g3(&g));
        let bank = standard_bank(&g);
        for id in ["const_m1", "ramp_half", "pm_only"] {
            let f = bank.get(id).unwrap();
            let rep = tail_equivalence(&p, f, &[-0.1, -0.05, -0.01], 40_000, &Stream::new(3, id)).unwrap();
            assert!(rep.oracle_monotone(), "{rep:?}");
            for row in &rep.rows {
                assert!(row.agrees(3.5), "{id} {row:?}");
            }
        }
    }

    #[test]
    fn gpp_tail_ratio_is_one() {
        let g = make_grid(21).unwrap();
        let p = Process::new(ProcessKind::Gpp, GeneratorSpec::preset_g2(&g));
        let f = EFunction::constant(&g, -1.0);
        let rep = tail_equivalence(&p, &f, &[-0.3, -0.1], 20_000, &Stream::new(4, "gpp")).unwrap();
        for row in &rep.rows {
            assert!((row.oracle - 1.0).abs() < 1e-12);
            assert!(row.agrees(3.0), "{row:?}");
        }
    }

    #[test]
    fn von_mises_for_gpp_is_zero() {
        let g = make_grid(21).unwrap();
        let p = Process::new(ProcessKind::Gpp, GeneratorSpec::preset_g3(&g));
        let f = EFunction::from_fn(&g, |t| -(0.5 + 0.5 * t)).unwrap();
        let rep = von_mises_diagnostic(&p, &f, &[-0.4, -0.2, -0.1], 50_000, &Stream::new(5, "vm")).unwrap();
        for row in &rep.rows {
            assert!(row.noise_ok);
            assert!(row.oracle_r.abs() < 1e-12);
            assert!(row.agrees(3.5), "{row:?}");
        }
        assert!(von_mises_diagnostic(&p, &f.scale(2.0), &[-0.1], 100, &Stream::new(5, "x")).is_err());
        assert!(von_mises_diagnostic(&p, &f, &[-0.1, -0.2], 100, &Stream::new(5, "x")).is_err());
    }

    #[test]
    fn von_mises_for_copula_shrinks() {
        let g = make_grid(21).unwrap();
        let p = Process::new(ProcessKind::ShiftedCopula, GeneratorSpec::preset_g3(&g));
        let f = EFunction::constant(&g, -1.0);
        let rep = von_mises_diagnostic(&p, &f, &[-0.4, -0.2, -0.1, -0.05], 50_000, &Stream::new(6, "vm")).unwrap();
        assert!(rep.shrinking, "{rep:?}");
        for row in &rep.rows {
            assert!(row.agrees(3.5), "{row:?}");
        }
    }
}
