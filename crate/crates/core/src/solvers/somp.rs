//! Simultaneous OMP: one support shared by every channel.

use std::time::Instant;

use super::{channel_fits, check_shapes, finish, frobenius, masked_argmax, MmvSolver, SolverConfig, SolverResult};
use crate::error::Result;
use crate::linalg::{dot, DenseMatrix};

#[derive(Debug, Clone, Copy, Default)]
pub struct Somp;

impl MmvSolver for Somp {
    fn name(&self) -> &str {
        "somp"
    }

    fn solve(&self, a: &DenseMatrix, y: &DenseMatrix, cfg: &SolverConfig) -> Result<SolverResult> {
        let start = Instant::now();
        check_shapes("somp", a, y)?;
        cfg.validate(a.rows())?;
        let columns: Vec<_> = (0..a.cols()).map(|i| a.column(i)).collect();
        let mut fits = channel_fits(y);
        let mut shared: Vec<usize> = Vec::new();
        let mut norms = vec![frobenius(&fits)];
        while shared.len() < cfg.k_max && norms[shared.len()] > cfg.res_min {
            let scores: Vec<f64> = columns
                .iter()
                .map(|col| fits.iter().map(|f| dot(col, &f.residual).abs()).sum())
                .collect();
            let Some(index) = masked_argmax(&scores, &shared) else {
                break;
            };
            shared.push(index);
            for fit in &mut fits {
                fit.extend(a, index)?;
            }
            norms.push(frobenius(&fits));
        }
        Ok(finish(a.cols(), fits, norms, shared.len(), start))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{gen_sparse_ensemble, measure, nmse, AmplitudeLaw, MeasurementEnsemble, NoiseSpec, SparsityPattern};
    use crate::solvers::Omp;

    #[test]
    fn single_channel_equals_omp() {
        for seed in 0..20 {
            let a = MeasurementEnsemble::generate(8, 16, seed).unwrap();
            let s = gen_sparse_ensemble(16, 1, 3, SparsityPattern::Joint, AmplitudeLaw::Gaussian, seed).unwrap();
            let y = measure(&a, &s.s, NoiseSpec { sigma: 0.05, seed }).unwrap();
            let cfg = SolverConfig::new(0.0, 4);
            let so = Somp.solve(a.matrix(), &y, &cfg).unwrap();
            let om = Omp.solve(a.matrix(), &y, &cfg).unwrap();
            assert_eq!(so.supports, om.supports);
            assert_eq!(so.shat, om.shat);
        }
    }

    #[test]
    fn supports_are_shared() {
        let a = MeasurementEnsemble::generate(8, 12, 4).unwrap();
        let s = gen_sparse_ensemble(12, 3, 2, SparsityPattern::Joint, AmplitudeLaw::UniformSigned, 4).unwrap();
        let y = measure(&a, &s.s, NoiseSpec::noiseless()).unwrap();
        let r = Somp.solve(a.matrix(), &y, &SolverConfig::new(0.0, 2)).unwrap();
        assert!(r.supports.iter().all(|sup| *sup == r.supports[0]));
        assert!(nmse(&s.s, &r.shat).unwrap() <= 1e-10);
    }

    #[test]
    fn disjoint_supports_favor_per_channel_omp() {
        // Channel 0 uses columns {0, 1}, channel 1 uses {6, 7}: a shared
        // support of size 2 cannot represent both.
        let a = MeasurementEnsemble::generate(16, 20, 5).unwrap();
        let mut s = DenseMatrix::zeros(20, 2);
        s.set(0, 0, 1.0);
        s.set(1, 0, -0.8);
        s.set(6, 1, 0.9);
        s.set(7, 1, 1.1);
        let y = measure(&a, &s, NoiseSpec::noiseless()).unwrap();
        let cfg = SolverConfig::new(0.0, 2);
        let somp = nmse(&s, &Somp.solve(a.matrix(), &y, &cfg).unwrap().shat).unwrap();
        let omp = nmse(&s, &Omp.solve(a.matrix(), &y, &cfg).unwrap().shat).unwrap();
        assert!(omp <= 1e-10, "omp {omp}");
        assert!(somp > omp, "somp {somp} omp {omp}");
    }
}
