//! Exact verification workbench for modular square roots, their additive
//! energies, complete exponential sums, and large-sieve inequalities with
//! square moduli.
//!
//! Every fast evaluator has an independent brute-force counterpart, and
//! every inequality with an explicit constant is exposed as a checkable
//! predicate. Inequalities whose constants are implicit are exposed as
//! ratio monitors instead.

pub mod accept;
pub mod arith;
pub mod charsum;
pub mod energy;
pub mod error;
pub mod expsum;
pub mod par;
pub mod record;
pub mod scan;
pub mod sieve;
pub mod sqrt;

pub use error::{Error, Result};

/// Version string written into every result record.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Default work budget (abstract operation count) for budgeted evaluators.
pub const DEFAULT_BUDGET: u128 = 20_000_000_000;
