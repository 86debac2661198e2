//! Command-line front end: interactive studies, benchmark runs and
//! comparisons.

pub mod bench;
pub mod error;
pub mod eval;
pub mod plot;
pub mod study;

pub use error::{CliError, CliResult};
