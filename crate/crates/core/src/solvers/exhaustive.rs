//! Exhaustive k-subset least-squares search: the ground truth for small
//! greedy-solver tests.

use std::time::Instant;

use super::{check_shapes, MmvSolver, SolverConfig, SolverResult};
use crate::error::{Error, Result};
use crate::linalg::{least_squares_solve, DenseMatrix, DenseVector};

/// Largest number of subsets the oracle agrees to enumerate.
pub const SUBSET_LIMIT: u128 = 1_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    /// Ascending indices of the best subset.
    pub support: Vec<usize>,
    pub coefficients: DenseVector,
    pub residual_norm: f64,
}

fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// Advances `idx` to the next k-subset of `0..n` in lexicographic order.
fn next_subset(idx: &mut [usize], n: usize) -> bool {
    let k = idx.len();
    for pos in (0..k).rev() {
        if idx[pos] < n - k + pos {
            idx[pos] += 1;
            for later in pos + 1..k {
                idx[later] = idx[later - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Minimal-residual `k`-subset for `y ≈ A_Ω x`. Ties keep the first subset
/// in lexicographic order.
pub fn exhaustive_oracle(a: &DenseMatrix, y: &[f64], k: usize) -> Result<OracleResult> {
    let (m, n) = a.shape();
    if y.len() != m {
        return Err(Error::Shape {
            op: "exhaustive_oracle",
            left: a.shape(),
            right: (y.len(), 1),
        });
    }
    if k > n.min(m) {
        return Err(Error::config(format!("oracle sparsity k={k} exceeds min(M, N) = {}", n.min(m))));
    }
    let subsets = binomial(n, k);
    if subsets > SUBSET_LIMIT {
        return Err(Error::TooManySubsets {
            n,
            k,
            subsets,
            limit: SUBSET_LIMIT,
        });
    }
    let y_norm = y.iter().map(|x| x * x).sum::<f64>().sqrt();
    if k == 0 {
        return Ok(OracleResult {
            support: Vec::new(),
            coefficients: DenseVector::zeros(0),
            residual_norm: y_norm,
        });
    }

    let mut idx: Vec<usize> = (0..k).collect();
    let mut best: Option<OracleResult> = None;
    loop {
        let sub = a.select_columns(&idx);
        // Rank-deficient subsets cannot beat a full-rank one holding the same span.
        if let Ok(x) = least_squares_solve(&sub, y) {
            let fit = sub.matvec(&x)?;
            let residual_norm = y.iter().zip(fit.iter()).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            if best.as_ref().is_none_or(|b| residual_norm < b.residual_norm) {
                best = Some(OracleResult {
                    support: idx.clone(),
                    coefficients: x,
                    residual_norm,
                });
            }
        }
        if !next_subset(&mut idx, n) {
            break;
        }
    }
    best.ok_or_else(|| Error::Internal(format!("every {k}-subset of the {n} columns is rank deficient")))
}

/// The oracle as an MMV solver: every channel independently gets its best
/// `k_max`-subset. `res_min` is ignored; the search always uses `k_max`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Exhaustive;

impl MmvSolver for Exhaustive {
    fn name(&self) -> &str {
        "oracle"
    }

    fn solve(&self, a: &DenseMatrix, y: &DenseMatrix, cfg: &SolverConfig) -> Result<SolverResult> {
        let start = Instant::now();
        check_shapes("exhaustive", a, y)?;
        cfg.validate(a.rows())?;
        let mut shat = DenseMatrix::zeros(a.cols(), y.cols());
        let mut supports = Vec::with_capacity(y.cols());
        let (mut initial, mut last) = (0.0, 0.0);
        for j in 0..y.cols() {
            let yj = y.column(j);
            let best = exhaustive_oracle(a, &yj, cfg.k_max)?;
            for (&i, &x) in best.support.iter().zip(best.coefficients.iter()) {
                shat.set(i, j, x);
            }
            initial += yj.iter().map(|v| v * v).sum::<f64>();
            last += best.residual_norm * best.residual_norm;
            supports.push(best.support);
        }
        Ok(SolverResult {
            shat,
            supports,
            residual_norms: vec![initial.sqrt(), last.sqrt()],
            iterations: cfg.k_max,
            wall_time: start.elapsed().as_secs_f64(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::MeasurementEnsemble;
    use crate::solvers::{omp_solve, SolverConfig};
    use crate::rng::SeededRng;

    #[test]
    fn lexicographic_enumeration_covers_all_subsets() {
        let mut idx = vec![0, 1];
        let mut seen = vec![idx.clone()];
        while next_subset(&mut idx, 4) {
            seen.push(idx.clone());
        }
        assert_eq!(seen, vec![vec![0, 1], vec![0, 2], vec![0, 3], vec![1, 2], vec![1, 3], vec![2, 3]]);
        assert_eq!(binomial(12, 2), 66);
        assert_eq!(binomial(64, 4), 635_376);
    }

    #[test]
    fn recovers_true_support_noiseless() {
        let a = MeasurementEnsemble::generate(6, 10, 2).unwrap();
        let x = [1.5, -0.7];
        let y: Vec<f64> = (0..6).map(|i| x[0] * a.matrix().get(i, 3) + x[1] * a.matrix().get(i, 8)).collect();
        let r = exhaustive_oracle(a.matrix(), &y, 2).unwrap();
        assert_eq!(r.support, vec![3, 8]);
        assert!(r.residual_norm < 1e-12);
        assert!((r.coefficients[0] - 1.5).abs() < 1e-12);
    }

    #[test]
    fn zero_sparsity_returns_measurement_norm() {
        let a = MeasurementEnsemble::generate(3, 5, 1).unwrap();
        let r = exhaustive_oracle(a.matrix(), &[3.0, 4.0, 0.0], 0).unwrap();
        assert!(r.support.is_empty());
        assert_eq!(r.residual_norm, 5.0);
    }

    #[test]
    fn guard_refuses_large_enumerations() {
        let a = MeasurementEnsemble::generate(10, 64, 1).unwrap();
        let err = exhaustive_oracle(a.matrix(), &[0.0; 10], 5).unwrap_err();
        assert!(matches!(err, Error::TooManySubsets { subsets: 7_624_512, .. }));
    }

    #[test]
    fn mmv_wrapper_solves_each_channel() {
        use crate::signal::{gen_sparse_ensemble, measure, nmse, AmplitudeLaw, NoiseSpec, SparsityPattern};
        let a = MeasurementEnsemble::generate(6, 10, 3).unwrap();
        let s = gen_sparse_ensemble(10, 3, 2, SparsityPattern::Independent, AmplitudeLaw::Gaussian, 3).unwrap();
        let y = measure(&a, &s.s, NoiseSpec::noiseless()).unwrap();
        let r = Exhaustive.solve(a.matrix(), &y, &SolverConfig::new(0.0, 2)).unwrap();
        assert!(nmse(&s.s, &r.shat).unwrap() <= 1e-10);
        for j in 0..3 {
            assert_eq!(r.supports[j], s.support(j));
        }
        assert!(r.residual_norms[1] < 1e-10);
    }

    #[test]
    fn oracle_residual_bounds_omp() {
        let mut rng = SeededRng::new(99);
        for seed in 0..30 {
            let a = MeasurementEnsemble::generate(6, 10, seed).unwrap();
            let y: Vec<f64> = (0..6).map(|_| rng.standard_normal()).collect();
            let oracle = exhaustive_oracle(a.matrix(), &y, 2).unwrap();
            let omp = omp_solve(a.matrix(), &y, &SolverConfig::new(0.0, 2)).unwrap();
            assert!(oracle.residual_norm <= omp.residual_norms[2] + 1e-12);
        }
    }
}
