//! Discretized index set and functions in `E[0,1]` / `Ē⁻[0,1]`.
//!
//! A function is stored as one base value per grid point plus a finite list of
//! point overrides; the overrides carry the finitely many discontinuities a
//! member of `E[0,1]` may have (and the point masses used for fidis). Suprema
//! and infima over `[0,1]` are maxima and minima over the grid.

mod bank;

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

pub use bank::{load_bank, save_bank, standard_bank, FunctionBank, STANDARD_BANK_SIZE};

/// Default grid resolution.
pub const DEFAULT_GRID_SIZE: usize = 201;

/// Ordered points `0 = t_0 < … < t_{n-1} = 1`.
#[derive(Clone, PartialEq)]
pub struct Grid {
    points: Arc<[f64]>,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Grid({} points)", self.points.len())
    }
}

/// Equally spaced grid with `n` points including both endpoints.
pub fn make_grid(n: usize) -> Result<Grid> {
    if n < 2 {
        return Err(Error::invalid(format!("grid needs at least 2 points, got {n}")));
    }
    let last = (n - 1) as f64;
    let points: Vec<f64> = (0..n).map(|i| i as f64 / last).collect();
    Ok(Grid {
        points: points.into(),
    })
}

impl Grid {
    pub fn from_points(points: Vec<f64>) -> Result<Grid> {
        if points.len() < 2 {
            return Err(Error::invalid("grid needs at least 2 points"));
        }
        if points[0] != 0.0 || *points.last().unwrap() != 1.0 {
            return Err(Error::invalid("grid must start at 0 and end at 1"));
        }
        if points.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::invalid("grid points must be strictly increasing"));
        }
        Ok(Grid {
            points: points.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn point(&self, i: usize) -> f64 {
        self.points[i]
    }

    /// Smallest gap between neighbouring points.
    pub fn min_spacing(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min)
    }

    /// Index of the grid point closest to `t` (ties go to the lower index).
    pub fn nearest_index(&self, t: f64) -> usize {
        let idx = self.points.partition_point(|&p| p < t);
        if idx == 0 {
            return 0;
        }
        if idx == self.points.len() {
            return idx - 1;
        }
        if (t - self.points[idx - 1]) <= (self.points[idx] - t) {
            idx - 1
        } else {
            idx
        }
    }

    pub(crate) fn ensure_same(&self, other: &Grid, what: &str) -> Result<()> {
        if Arc::ptr_eq(&self.points, &other.points) || self.points == other.points {
            Ok(())
        } else {
            Err(Error::invalid(format!("{what}: grid mismatch")))
        }
    }
}

/// Sign constraint carried by an [`EFunction`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sign {
    /// Member of `Ē⁻[0,1]`: no positive values.
    Nonpositive,
    Unrestricted,
}

/// A function in `E[0,1]` sampled on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct EFunction {
    id: String,
    grid: Grid,
    base: Vec<f64>,
    overrides: Vec<(usize, f64)>,
    sign: Sign,
    values: Vec<f64>,
}

impl EFunction {
    pub fn new(
        grid: &Grid,
        base: Vec<f64>,
        mut overrides: Vec<(usize, f64)>,
        sign: Sign,
    ) -> Result<EFunction> {
        if base.len() != grid.len() {
            return Err(Error::invalid(format!(
                "function has {} values for a grid of {} points",
                base.len(),
                grid.len()
            )));
        }
        if let Some(v) = base.iter().find(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite base value {v}")));
        }
        overrides.sort_by_key(|o| o.0);
        for w in overrides.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::invalid(format!("duplicate override at index {}", w[0].0)));
            }
        }
        let mut values = base.clone();
        for &(i, v) in &overrides {
            if i >= grid.len() {
                return Err(Error::invalid(format!("override index {i} out of range")));
            }
            if !v.is_finite() {
                return Err(Error::invalid(format!("non-finite override value {v}")));
            }
            values[i] = v;
        }
        if sign == Sign::Nonpositive && values.iter().any(|&v| v > 0.0) {
            return Err(Error::invalid("nonpositive function has a positive value"));
        }
        Ok(EFunction {
            id: "f".to_string(),
            grid: grid.clone(),
            base,
            overrides,
            sign,
            values,
        })
    }

    /// Builds a function with the sign inferred from its values.
    pub fn from_values(grid: &Grid, base: Vec<f64>, overrides: Vec<(usize, f64)>) -> Result<EFunction> {
        let positive = base.iter().any(|&v| v > 0.0) || overrides.iter().any(|o| o.1 > 0.0);
        let sign = if positive {
            Sign::Unrestricted
        } else {
            Sign::Nonpositive
        };
        EFunction::new(grid, base, overrides, sign)
    }

    /// Samples `g` at the grid points.
    pub fn from_fn(grid: &Grid, g: impl Fn(f64) -> f64) -> Result<EFunction> {
        let base = grid.points().iter().map(|&t| g(t)).collect();
        EFunction::from_values(grid, base, Vec::new())
    }

    pub fn constant(grid: &Grid, c: f64) -> EFunction {
        EFunction::from_values(grid, vec![c; grid.len()], Vec::new())
            .expect("finite constant")
            .with_id(format!("const({c})"))
    }

    /// `Σ x_i 1_{t_i}`: zero base with overrides at the given grid indices.
    pub fn point_masses(grid: &Grid, points: &[(usize, f64)]) -> Result<EFunction> {
        if points.is_empty() {
            return Err(Error::invalid("point-mass function needs at least one point"));
        }
        EFunction::from_values(grid, vec![0.0; grid.len()], points.to_vec())
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    pub fn with_override(&self, index: usize, value: f64) -> Result<EFunction> {
        let mut overrides: Vec<(usize, f64)> =
            self.overrides.iter().copied().filter(|o| o.0 != index).collect();
        overrides.push((index, value));
        let sign = if self.sign == Sign::Nonpositive && value <= 0.0 {
            Sign::Nonpositive
        } else {
            Sign::Unrestricted
        };
        Ok(EFunction::new(&self.grid, self.base.clone(), overrides, sign)?.with_id(self.id.clone()))
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn base(&self) -> &[f64] {
        &self.base
    }

    pub fn overrides(&self) -> &[(usize, f64)] {
        &self.overrides
    }

    pub fn sign(&self) -> Sign {
        self.sign
    }

    /// Effective values at every grid point (overrides applied).
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn eval(&self, i: usize) -> Result<f64> {
        self.values
            .get(i)
            .copied()
            .ok_or_else(|| Error::invalid(format!("grid index {i} out of range ({})", self.values.len())))
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_nonpositive(&self) -> bool {
        self.values.iter().all(|&v| v <= 0.0)
    }

    pub fn has_zero(&self) -> bool {
        self.values.contains(&0.0)
    }

    /// Pointwise map of base and override values.
    pub fn map(&self, g: impl Fn(f64) -> f64) -> Result<EFunction> {
        let base = self.base.iter().map(|&v| g(v)).collect();
        let overrides = self.overrides.iter().map(|&(i, v)| (i, g(v))).collect();
        Ok(EFunction::from_values(&self.grid, base, overrides)?.with_id(self.id.clone()))
    }

    pub fn scale(&self, c: f64) -> EFunction {
        self.map(|v| c * v).expect("scaling keeps values finite")
    }

    pub fn add(&self, other: &EFunction) -> Result<EFunction> {
        self.grid.ensure_same(&other.grid, "add")?;
        let base = self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect();
        EFunction::from_values(&self.grid, base, Vec::new())
    }

    /// The nonpositive function `-|f|`.
    pub fn neg_abs(&self) -> EFunction {
        self.map(|v| -v.abs()).expect("finite")
    }
}
