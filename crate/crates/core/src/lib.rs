//! Simulation and verification toolkit for functional extreme value theory on `[0,1]`.
//!
//! The crate simulates standard, simple and general max-stable processes,
//! generalized Pareto processes and copula processes from sampleable generator
//! processes `Z` (nonnegative, continuous, `E(Z_t) = 1`), estimates functional
//! D-norms `‖f‖_D = E(sup_t |f(t)| Z_t)` by Monte Carlo, and runs empirical
//! checks of the distributional identities that connect them.
//!
//! Everything lives on a discretized index set ([`Grid`]); functions of
//! `E[0,1]` are grid samples plus finitely many point overrides ([`EFunction`]).
//!
//! All randomness flows through [`mc::Stream`]: a master seed plus labels is
//! hashed into a ChaCha8 key and every replicate draws from its own ChaCha
//! stream, so results do not depend on the number of worker threads.
//!
//! ```
//! use maxstable::{dnorm, generator::GeneratorSpec, gridfun::{make_grid, EFunction}, mc::Stream};
//!
//! let grid = make_grid(201).unwrap();
//! let g2 = GeneratorSpec::preset_g2(&grid);
//! let f = EFunction::constant(&grid, -1.0);
//! let est = dnorm::dnorm_mc(&f, &g2, &grid, 10_000, &Stream::new(7, "doc")).unwrap();
//! assert!((est.value - 2.0).abs() < 1e-12);
//! ```

// `!(x < y)` is how NaN gets rejected along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnose;
pub mod dnorm;
pub mod error;
pub mod experiment;
pub mod generator;
pub mod gridfun;
pub mod mc;
pub mod simulate;

pub use dnorm::{DNormEstimate, Probability};
pub use error::{Error, Result};
pub use generator::{GeneratorSpec, PathSample};
pub use gridfun::{EFunction, Grid, Sign};
