//! Noisy group testing treated as a channel coding problem.
//!
//! Items are encoded by rows of a random Bernoulli codebook; each test
//! (column) reports the Boolean OR of the defective rows, possibly corrupted
//! by additive false alarms or by dilution. The crate provides:
//!
//! * [`model`]: codebook generation and the forward test channel,
//! * [`decoder`]: exhaustive maximum-likelihood decoding over all K-subsets,
//! * [`bounds`]: per-test mutual information, the random-coding exponent and
//!   the achievable / Fano / additive-converse test-count bounds,
//! * [`montecarlo`]: seeded, thread-count independent error estimation,
//! * [`report`]: the CSV schemas emitted by the command-line front end,
//! * [`acceptance`]: the experiment suite that checks the bounds against
//!   simulation.

pub mod acceptance;
pub mod bounds;
pub mod combinatorics;
pub mod decoder;
pub mod error;
pub mod model;
pub mod montecarlo;
pub mod report;
pub mod stats;

pub use error::{Error, Result};
pub use model::{Codebook, DefectiveSet, NoiseModel, OutcomeVector};

/// Version string stamped into every emitted CSV row.
pub const VERSION: &str = concat!("gt-lab ", env!("CARGO_PKG_VERSION"));
