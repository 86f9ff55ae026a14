//! Weighted-constraint nuclear-norm matrix completion and diploid haplotype
//! reconstruction.
//!
//! The crate is organized around one optimization problem: recover a low-rank
//! matrix from a subset of noisy entries by minimizing the nuclear norm
//! subject to a *weighted* data-fit constraint, where the per-entry weights
//! are derived from Phred quality scores. On top of the solver sit
//!
//! * [`weights`] — quality-score conversion and grid-search weight fitting,
//! * [`bound`] — an a-priori recovery error bound used as a per-solve diagnostic,
//! * [`pipeline`] — the HapWeC haplotype-reconstruction pipeline and an
//!   alternating-least-squares baseline,
//! * [`simdata`] — synthetic read/noise generation and a fragment file format,
//! * [`eval`] — reconstruction metrics and a Monte Carlo sweep harness.

pub mod bound;
pub mod error;
pub mod eval;
pub mod matrix;
pub mod pipeline;
pub mod simdata;
pub mod solver;
pub mod weights;

pub use error::{Error, Result};
