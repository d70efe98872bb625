//! General max-stable margins `F_γ` with scale `a(t)` and location `b(t)`.

use crate::dnorm::{msp_cdf, Probability};
use crate::error::{Error, Result};
use crate::generator::{GeneratorSpec, PathSample};
use crate::gridfun::{EFunction, Grid};
use crate::mc::Stream;

/// `|γ(t)| ≤ BRANCH_TOL` selects the logarithmic (Gumbel) branch.
pub const BRANCH_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct MarginParams {
    grid: Grid,
    a: Vec<f64>,
    b: Vec<f64>,
    gamma: Vec<f64>,
}

impl MarginParams {
    pub fn new(grid: &Grid, a: Vec<f64>, b: Vec<f64>, gamma: Vec<f64>) -> Result<MarginParams> {
        let n = grid.len();
        if a.len() != n || b.len() != n || gamma.len() != n {
            return Err(Error::invalid(format!(
                "margin parameters need {n} values each, got {}/{}/{}",
                a.len(),
                b.len(),
                gamma.len()
            )));
        }
        if let Some(i) = a.iter().position(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(Error::invalid(format!("scale a must be positive and finite, a[{i}] = {}", a[i])));
        }
        if b.iter().chain(&gamma).any(|v| !v.is_finite()) {
            return Err(Error::invalid("location and shape must be finite"));
        }
        Ok(MarginParams {
            grid: grid.clone(),
            a,
            b,
            gamma,
        })
    }

    pub fn constant(grid: &Grid, a: f64, b: f64, gamma: f64) -> Result<MarginParams> {
        let n = grid.len();
        MarginParams::new(grid, vec![a; n], vec![b; n], vec![gamma; n])
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    /// Standard value `η < 0` to the general scale at grid index `i`.
    fn to_general(&self, i: usize, eta: f64) -> f64 {
        let (a, b, g) = (self.a[i], self.b[i], self.gamma[i]);
        if g.abs() <= BRANCH_TOL {
            -a * (-eta).ln() + b
        } else {
            -(a / g) * (1.0 - (-eta).powf(-g)) + b
        }
    }

    /// General value to the standard scale; `−∞` below the lower endpoint.
    fn to_standard(&self, i: usize, x: f64) -> f64 {
        let (a, b, g) = (self.a[i], self.b[i], self.gamma[i]);
        if g.abs() <= BRANCH_TOL {
            return -(-(x - b) / a).exp();
        }
        let base = 1.0 + g * (x - b) / a;
        if base <= 0.0 {
            if g < 0.0 {
                0.0
            } else {
                f64::NEG_INFINITY
            }
        } else {
            -base.powf(-1.0 / g)
        }
    }
}

/// Maps a standard max-stable path to general margins.
pub fn margin_transform(path: &PathSample, mp: &MarginParams) -> Result<PathSample> {
    path.grid.ensure_same(&mp.grid, "margin transform")?;
    if let Some(i) = path.values.iter().position(|&v| !(v < 0.0)) {
        return Err(Error::invalid(format!(
            "standard path must be strictly negative, value {} at index {i}",
            path.values[i]
        )));
    }
    let values = path
        .values
        .iter()
        .enumerate()
        .map(|(i, &eta)| mp.to_general(i, eta))
        .collect();
    Ok(PathSample {
        grid: path.grid.clone(),
        values,
        meta: path.meta.clone(),
    })
}

/// Image of a function under the inverse margin map.
#[derive(Debug, Clone, PartialEq)]
pub enum Psi0 {
    Standard(EFunction),
    /// The function lies below the lower support endpoint at `index`;
    /// the corresponding probability is 0.
    BelowSupport { index: usize },
}

impl Psi0 {
    pub fn standard(&self) -> Option<&EFunction> {
        match self {
            Psi0::Standard(f) => Some(f),
            Psi0::BelowSupport { .. } => None,
        }
    }
}

pub fn psi0(f: &EFunction, mp: &MarginParams) -> Result<Psi0> {
    f.grid().ensure_same(&mp.grid, "psi0")?;
    let base: Vec<f64> = f.base().iter().enumerate().map(|(i, &x)| mp.to_standard(i, x)).collect();
    let overrides: Vec<(usize, f64)> = f.overrides().iter().map(|&(i, x)| (i, mp.to_standard(i, x))).collect();
    // Where an override sits, the base value is not part of the function.
    let hidden = |i: usize| overrides.iter().any(|&(j, _)| j == i);
    let bad = base
        .iter()
        .enumerate()
        .find(|&(i, v)| !v.is_finite() && !hidden(i))
        .map(|(i, _)| i)
        .or_else(|| overrides.iter().find(|(_, v)| !v.is_finite()).map(|&(i, _)| i));
    if let Some(index) = bad {
        return Ok(Psi0::BelowSupport { index });
    }
    let g = EFunction::from_values(f.grid(), base, overrides)?.with_id(format!("psi0({})", f.id()));
    Ok(Psi0::Standard(g))
}

/// `P(ζ ≤ f) = exp(−‖Ψ₀(f)‖_D)` for a general max-stable process `ζ`.
pub fn general_msp_cdf(
    f: &EFunction,
    mp: &MarginParams,
    gen: &GeneratorSpec,
    grid: &Grid,
    n: u64,
    stream: &Stream,
) -> Result<Probability> {
    match psi0(f, mp)? {
        Psi0::Standard(g) => msp_cdf(&g, gen, grid, n, stream),
        Psi0::BelowSupport { .. } => Ok(Probability { p: 0.0, se: 0.0, n }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridfun::make_grid;
    use crate::mc::Stream;
    use crate::simulate::{simulate_msp, StoppingRule};
    use proptest::prelude::*;

    fn roundtrip(mp: &MarginParams, eta: &[f64]) -> f64 {
        let g = mp.grid().clone();
        let path = PathSample {
            grid: g.clone(),
            values: eta.to_vec(),
            meta: crate::generator::PathMeta {
                family: "test".into(),
                stream_key: 0,
                replicate: 0,
            },
        };
        let z = margin_transform(&path, mp).unwrap();
        let f = EFunction::from_values(&g, z.values, vec![]).unwrap();
        let back = psi0(&f, mp).unwrap();
        let back = back.standard().unwrap();
        back.values().iter().zip(eta).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn reversed_weibull_branch_is_a_shift() {
        let g = make_grid(5).unwrap();
        let mp = MarginParams::constant(&g, 1.0, 0.0, -1.0).unwrap();
        assert!((mp.to_general(0, -0.3) - 0.7).abs() < 1e-15);
        assert!(roundtrip(&mp, &[-0.1, -0.5, -1.0, -2.0, -7.0]) < 1e-9);
    }

    #[test]
    fn gumbel_and_frechet_branches() {
        let g = make_grid(3).unwrap();
        let gumbel = MarginParams::constant(&g, 1.0, 0.0, 0.0).unwrap();
        assert!((gumbel.to_general(0, -0.5) - 2f64.ln()).abs() < 1e-15);
        let frechet = MarginParams::constant(&g, 1.0, 0.0, 1.0).unwrap();
        assert!((frechet.to_general(0, -0.5) - 1.0).abs() < 1e-15);
        // Clamping below the lower endpoint and above the upper endpoint.
        assert_eq!(frechet.to_standard(0, -1.5), f64::NEG_INFINITY);
        let weibull = MarginParams::constant(&g, 1.0, 0.0, -1.0).unwrap();
        assert_eq!(weibull.to_standard(0, 2.0), 0.0);
    }

    #[test]
    fn identity_margins_reduce_psi0_to_identity() {
        let g = make_grid(21).unwrap();
        let mp = MarginParams::constant(&g, 1.0, -1.0, -1.0).unwrap();
        let f = EFunction::from_fn(&g, |t| -(1.0 + t) / 2.0).unwrap().with_override(3, -2.0).unwrap();
        let p = psi0(&f, &mp).unwrap();
        let s = p.standard().unwrap();
        for (a, b) in s.values().iter().zip(f.values()) {
            assert!((a - b).abs() < 1e-15);
        }
        assert_eq!(s.overrides(), f.overrides());
    }

    #[test]
    fn invalid_parameters_and_paths() {
        let g = make_grid(3).unwrap();
        assert!(MarginParams::constant(&g, 0.0, 0.0, 0.0).is_err());
        assert!(MarginParams::constant(&g, -1.0, 0.0, 0.0).is_err());
        assert!(MarginParams::new(&g, vec![1.0; 2], vec![0.0; 3], vec![0.0; 3]).is_err());
        let mp = MarginParams::constant(&g, 1.0, 0.0, 0.5).unwrap();
        let path = PathSample {
            grid: g.clone(),
            values: vec![-1.0, 0.0, -1.0],
            meta: crate::generator::PathMeta {
                family: "x".into(),
                stream_key: 0,
                replicate: 0,
            },
        };
        assert!(margin_transform(&path, &mp).is_err());
    }

    #[test]
    fn general_cdf_examples() {
        let g = make_grid(51).unwrap();
        let c = GeneratorSpec::constant(&g);
        let gumbel = MarginParams::constant(&g, 1.0, 0.0, 0.0).unwrap();
        for x in [-1.0, 0.0, 0.7, 2.0] {
            let f = EFunction::constant(&g, x);
            let p = general_msp_cdf(&f, &gumbel, &c, &g, 100, &Stream::new(0, "gcdf")).unwrap();
            assert!((p.p - (-(-x).exp()).exp()).abs() < 1e-12);
        }
        let g2 = GeneratorSpec::preset_g2(&g);
        let p = general_msp_cdf(&EFunction::constant(&g, 0.0), &gumbel, &g2, &g, 1000, &Stream::new(0, "m")).unwrap();
        assert!((p.p - (-2.0f64).exp()).abs() < 1e-12);
        let frechet = MarginParams::constant(&g, 1.0, 0.0, 1.0).unwrap();
        let below = general_msp_cdf(&EFunction::constant(&g, -2.0), &frechet, &c, &g, 10, &Stream::new(0, "b")).unwrap();
        assert_eq!(below.p, 0.0);
    }

    #[test]
    fn gumbel_margins_of_simulated_paths() {
        // Empirical marginal df of the transformed process against exp(−exp(−x)).
        let g = make_grid(11).unwrap();
        let gen = GeneratorSpec::preset_g3(&g);
        let mp = MarginParams::constant(&g, 1.0, 0.0, 0.0).unwrap();
        let st = Stream::new(11, "gumbel");
        let n = 4000;
        let mut col: Vec<f64> = (0..n)
            .map(|r| {
                let s = simulate_msp(&gen, &g, StoppingRule::ExactBound, &st, r).unwrap();
                margin_transform(&s.eta, &mp).unwrap().values[5]
            })
            .collect();
        col.sort_by(f64::total_cmp);
        let ks = col
            .iter()
            .enumerate()
            .map(|(k, &x)| {
                let fx = (-(-x).exp()).exp();
                (fx - k as f64 / n as f64).abs().max(((k + 1) as f64 / n as f64 - fx).abs())
            })
            .fold(0.0, f64::max);
        // 1% critical value of the one-sample KS statistic.
        assert!(ks < 1.63 / (n as f64).sqrt(), "ks = {ks}");
    }

    proptest! {
        #[test]
        fn roundtrip_is_identity(
            gamma in prop_oneof![Just(0.0), -2.0f64..2.0, -1e-9f64..1e-9],
            a in 0.1f64..5.0,
            b in -3.0f64..3.0,
            eta in proptest::collection::vec(-20.0f64..-1e-3, 6),
        ) {
            let g = make_grid(6).unwrap();
            let mp = MarginParams::constant(&g, a, b, gamma).unwrap();
            prop_assert!(roundtrip(&mp, &eta) < 1e-9);
        }
    }
}
