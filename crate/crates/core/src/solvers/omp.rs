//! Orthogonal matching pursuit, applied to each channel independently.

use std::time::Instant;

use super::{channel_fits, check_shapes, finish, frobenius, masked_argmax, ChannelFit, MmvSolver, SolverConfig, SolverResult};
use crate::error::Result;
use crate::linalg::DenseMatrix;

#[derive(Debug, Clone, Copy, Default)]
pub struct Omp;

/// One OMP iteration on a single channel: pick `argmax |aᵢᵀ r|` outside the
/// support and refit. Returns false when no candidate is left.
fn omp_iteration(a: &DenseMatrix, fit: &mut ChannelFit) -> Result<bool> {
    let scores: Vec<f64> = a.matvec_transposed(&fit.residual)?.iter().map(|x| x.abs()).collect();
    match masked_argmax(&scores, &fit.support) {
        Some(i) => {
            fit.extend(a, i)?;
            Ok(true)
        }
        None => Ok(false),
    }
}

impl MmvSolver for Omp {
    fn name(&self) -> &str {
        "omp"
    }

    /// Channels advance in lockstep so the residual history is comparable
    /// with the joint solvers; a channel whose own residual is already at or
    /// below `res_min` stops selecting.
    fn solve(&self, a: &DenseMatrix, y: &DenseMatrix, cfg: &SolverConfig) -> Result<SolverResult> {
        let start = Instant::now();
        check_shapes("omp", a, y)?;
        cfg.validate(a.rows())?;
        let mut fits = channel_fits(y);
        let mut norms = vec![frobenius(&fits)];
        let mut iterations = 0;
        while iterations < cfg.k_max && norms[iterations] > cfg.res_min {
            let mut progressed = false;
            for fit in &mut fits {
                if fit.residual.norm() > cfg.res_min {
                    progressed |= omp_iteration(a, fit)?;
                }
            }
            if !progressed {
                break;
            }
            iterations += 1;
            norms.push(frobenius(&fits));
        }
        Ok(finish(a.cols(), fits, norms, iterations, start))
    }
}

/// Single-channel OMP.
pub fn omp_solve(a: &DenseMatrix, y: &[f64], cfg: &SolverConfig) -> Result<SolverResult> {
    Omp.solve(a, &DenseMatrix::new(y.len(), 1, y.to_vec())?, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::dot;
    use crate::signal::MeasurementEnsemble;

    #[test]
    fn identity_one_step() {
        let a = DenseMatrix::identity(6);
        let mut y = vec![0.0; 6];
        y[4] = 3.0;
        let r = omp_solve(&a, &y, &SolverConfig::new(0.0, 1)).unwrap();
        assert_eq!(r.supports, vec![vec![4]]);
        assert_eq!(r.shat.column(0).as_ref(), y.as_slice());
        assert_eq!(r.residual_norms, vec![3.0, 0.0]);
    }

    #[test]
    fn zero_correlations_pick_lowest_index() {
        // y is orthogonal to every column of A.
        let a = DenseMatrix::from_rows(&[&[1.0, 0.0, 1.0], &[0.0, 1.0, 0.0], &[0.0, 0.0, 0.0]]).unwrap();
        let r = omp_solve(&a, &[0.0, 0.0, 2.0], &SolverConfig::new(0.0, 1)).unwrap();
        assert_eq!(r.supports, vec![vec![0]]);
    }

    #[test]
    fn zero_measurement_stops_immediately() {
        let a = MeasurementEnsemble::generate(4, 8, 1).unwrap();
        let r = Omp.solve(a.matrix(), &DenseMatrix::zeros(4, 2), &SolverConfig::new(0.0, 3)).unwrap();
        assert_eq!(r.iterations, 0);
        assert!(r.shat.as_slice().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn residual_is_orthogonal_to_selected_columns() {
        let a = MeasurementEnsemble::generate(10, 20, 3).unwrap();
        let y: Vec<f64> = (0..10).map(|i| (i as f64 * 0.7).sin()).collect();
        let r = omp_solve(a.matrix(), &y, &SolverConfig::new(0.0, 5)).unwrap();
        let residual: Vec<f64> = {
            let fit = a.matrix().matvec(&r.shat.column(0)).unwrap();
            y.iter().zip(fit.iter()).map(|(y, f)| y - f).collect()
        };
        let scale = y.iter().map(|x| x * x).sum::<f64>().sqrt();
        for &i in &r.supports[0] {
            assert!(dot(&a.matrix().column(i), &residual).abs() <= 1e-9 * scale);
        }
        let mut sorted = r.supports[0].clone();
        sorted.dedup();
        assert_eq!(sorted.len(), 5);
    }
}
