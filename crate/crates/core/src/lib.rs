//! Certified randomness from violations of the three-time Leggett–Garg
//! inequality on a single qubit.
//!
//! * [`qubit`]: the measurement model, closed-form probabilities and a
//!   matrix oracle.
//! * [`bounds`]: min-entropy bounds as a function of the violation.
//! * [`optimizer`]: numerical search for the adversary's best strategy.
//! * [`certification`]: estimators and finite-statistics accounting.
//! * [`simulator`]: reproducible trial streams and bit output.

pub mod bounds;
pub mod certification;
pub mod error;
pub mod mat2;
pub mod optimizer;
pub mod qubit;
pub mod report;
pub mod simulator;

pub use error::{Error, Result};
