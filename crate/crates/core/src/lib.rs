//! Gaussian-process bandit optimization.
//!
//! The crate implements a complete GP-UCB suggestion loop over mixed
//! continuous/categorical search spaces:
//!
//! * [`search_space`]: parameter definitions, trials and the reversible map to
//!   unit-hypercube features.
//! * [`warping`]: the objective transformation pipeline applied before
//!   modeling.
//! * [`gp`]: Matern-5/2 ARD Gaussian process with truncated log-normal priors,
//!   MAP fitting and posterior prediction (including "constant liar" variance
//!   conditioning on pending points).
//! * [`acquisition`]: trust-region UCB, the UCB/pure-exploration pair used for
//!   batches, and hypervolume-scalarized multi-objective UCB.
//! * [`firefly`]: the vectorized firefly metaheuristic used to maximize the
//!   acquisition.
//! * [`designer`]: the study state machine tying everything together.
//! * [`benchmarks`] and [`evaluation`]: synthetic objectives and the
//!   log-efficiency comparison protocol.

pub mod acquisition;
pub mod benchmarks;
pub mod designer;
pub mod error;
pub mod evaluation;
pub mod firefly;
pub mod gp;
pub mod halton;
pub mod lbfgsb;
pub mod search_space;
pub mod special;
pub mod warping;

pub use error::{Error, Result};
