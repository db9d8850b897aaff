//! Greedy MMV solvers behind one interface: the LSTM-CS decoder, per-channel
//! OMP, shared-support SOMP, and an exhaustive least-squares oracle used as
//! ground truth in tests.

mod exhaustive;
mod lstm_cs;
mod omp;
mod somp;

pub use exhaustive::{exhaustive_oracle, Exhaustive, OracleResult, SUBSET_LIMIT};
pub use lstm_cs::{LstmCs, SupportMode};
pub use omp::{omp_solve, Omp};
pub use somp::Somp;

use std::time::Instant;

use crate::error::{Error, Result};
use crate::linalg::{least_squares_solve, DenseMatrix, DenseVector};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// Stop once the Frobenius norm of the residual matrix is at or below this.
    pub res_min: f64,
    /// Maximum number of greedy iterations (= support size per channel).
    pub k_max: usize,
}

impl SolverConfig {
    pub fn new(res_min: f64, k_max: usize) -> Self {
        Self { res_min, k_max }
    }

    /// Checks the configuration against a sensing matrix with `m` rows.
    pub fn validate(&self, m: usize) -> Result<()> {
        if !(self.res_min >= 0.0 && self.res_min.is_finite()) {
            return Err(Error::config(format!("res_min must be finite and non-negative, got {}", self.res_min)));
        }
        if self.k_max > m {
            return Err(Error::config(format!(
                "k_max = {} exceeds the {m} measurements; least squares would be underdetermined",
                self.k_max
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverResult {
    /// Recovered N × L matrix, zero off each channel's support.
    pub shat: DenseMatrix,
    /// Selected indices per channel, in selection order.
    pub supports: Vec<Vec<usize>>,
    /// ‖R‖_F before the first iteration and after each one.
    pub residual_norms: Vec<f64>,
    pub iterations: usize,
    /// Wall-clock seconds spent in `solve`.
    pub wall_time: f64,
}

pub trait MmvSolver: Sync {
    fn name(&self) -> &str;

    /// Recovers `S` from `Y = A S (+ E)`; `a` is M × N and `y` is M × L.
    fn solve(&self, a: &DenseMatrix, y: &DenseMatrix, cfg: &SolverConfig) -> Result<SolverResult>;
}

/// Per-channel greedy bookkeeping shared by every solver: the support chain,
/// the least-squares coefficients on it and the resulting residual.
#[derive(Debug, Clone)]
pub(crate) struct ChannelFit {
    pub y: DenseVector,
    pub support: Vec<usize>,
    pub coefficients: DenseVector,
    pub residual: DenseVector,
}

impl ChannelFit {
    pub fn new(y: DenseVector) -> Self {
        Self {
            residual: y.clone(),
            y,
            support: Vec::new(),
            coefficients: DenseVector::zeros(0),
        }
    }

    pub fn contains(&self, index: usize) -> bool {
        self.support.contains(&index)
    }

    /// Appends `index` and refits `y` by least squares on the whole support.
    pub fn extend(&mut self, a: &DenseMatrix, index: usize) -> Result<()> {
        debug_assert!(!self.contains(index), "index {index} selected twice");
        self.support.push(index);
        self.refit(a)
    }

    /// Replaces the support and refits.
    pub fn set_support(&mut self, a: &DenseMatrix, support: &[usize]) -> Result<()> {
        self.support.clear();
        self.support.extend_from_slice(support);
        self.refit(a)
    }

    fn refit(&mut self, a: &DenseMatrix) -> Result<()> {
        let sub = a.select_columns(&self.support);
        self.coefficients = least_squares_solve(&sub, &self.y)?;
        let fitted = sub.matvec(&self.coefficients)?;
        self.residual = self.y.iter().zip(fitted.iter()).map(|(y, f)| y - f).collect::<Vec<_>>().into();
        Ok(())
    }
}

pub(crate) fn check_shapes(op: &'static str, a: &DenseMatrix, y: &DenseMatrix) -> Result<()> {
    if a.rows() != y.rows() {
        return Err(Error::Shape {
            op,
            left: a.shape(),
            right: y.shape(),
        });
    }
    Ok(())
}

pub(crate) fn frobenius(fits: &[ChannelFit]) -> f64 {
    fits.iter().map(|f| f.residual.iter().map(|x| x * x).sum::<f64>()).sum::<f64>().sqrt()
}

pub(crate) fn channel_fits(y: &DenseMatrix) -> Vec<ChannelFit> {
    (0..y.cols()).map(|j| ChannelFit::new(y.column(j))).collect()
}

/// Assembles the result matrix from per-channel fits.
pub(crate) fn finish(n: usize, fits: Vec<ChannelFit>, residual_norms: Vec<f64>, iterations: usize, start: Instant) -> SolverResult {
    let mut shat = DenseMatrix::zeros(n, fits.len());
    for (j, fit) in fits.iter().enumerate() {
        for (&i, &x) in fit.support.iter().zip(fit.coefficients.iter()) {
            shat.set(i, j, x);
        }
    }
    SolverResult {
        shat,
        supports: fits.into_iter().map(|f| f.support).collect(),
        residual_norms,
        iterations,
        wall_time: start.elapsed().as_secs_f64(),
    }
}

/// Index of the largest score not yet in `taken`; ties go to the lowest index.
pub(crate) fn masked_argmax(scores: &[f64], taken: &[usize]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &s) in scores.iter().enumerate() {
        if taken.contains(&i) {
            continue;
        }
        if best.is_none_or(|(_, b)| s > b) {
            best = Some((i, s));
        }
    }
    best.map(|(i, _)| i)
}
