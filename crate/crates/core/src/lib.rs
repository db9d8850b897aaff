//! LSTM-CS: an LSTM-driven greedy decoder for distributed compressive sensing
//! with multiple measurement vectors, together with the classical greedy
//! baselines (OMP, SOMP), the signal and measurement generators, and the
//! training machinery for the decoder.
//!
//! The measurement model is `Y = A·S + E` with `A` an M × N Gaussian matrix
//! with unit-norm columns, `S` an N × L matrix whose columns are sparse, and
//! `E` optional white noise.

pub mod error;
pub mod linalg;
pub mod lstm;
pub mod model_io;
pub mod rng;
pub mod signal;
pub mod solvers;
pub mod training;
pub mod transform;

pub use error::{Error, Result};
pub use linalg::{DenseMatrix, DenseVector};
pub use lstm::{LstmDims, LstmParams, Variant};
pub use solvers::{MmvSolver, SolverConfig, SolverResult};
