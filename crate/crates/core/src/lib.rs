//! Experiment laboratory for the (1+1)-EA on cardinality-constrained robust
//! linear optimization.
//!
//! * [`bitvec`]: packed solutions, bit-wise mutation, seeded randomness.
//! * [`problems`]: exact deletion-robust and worst-case objectives, the
//!   constrained fitness and the adversarial instance builders.
//! * [`ea`]: the (1+1)-EA and the accept-all random walk.
//! * [`oracle`]: brute-force objectives and exact expected hitting times of
//!   absorbing Markov chains.
//! * [`drift`]: distance functions and Monte Carlo drift checks.
//! * [`experiments`]: trial batches, sweeps, CSV output and scaling fits.
//! * [`verify`]: the acceptance checks, runnable from tests and the CLI.

pub mod bitvec;
pub mod drift;
pub mod ea;
pub mod experiments;
pub mod oracle;
pub mod problems;
pub mod verify;
