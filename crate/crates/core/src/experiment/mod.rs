//! Config-driven experiments: parsing, execution and reports.

mod config;
mod report;
mod run;

pub use config::*;
pub use report::*;
pub use run::*;
