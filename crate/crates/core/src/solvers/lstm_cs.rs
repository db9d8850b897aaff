//! The LSTM-CS decoder.
//!
//! Each outer iteration starts the LSTM from the zero state and walks the
//! channels in order. For channel `j` the residual is max-abs normalized and
//! fed to the network; the most probable index not already in channel `j`'s
//! support is appended and the channel is refit by least squares. Selection
//! uses the logits `U v` directly, which orders indices exactly as the softmax
//! does but without probabilities underflowing into artificial ties.
//!
//! [`SupportMode::Shared`] instead follows the literal pseudo-code reading in
//! which all channels append to one support set `Ω` and every channel is
//! refit on `Ω` at the end of each iteration; `Ω` never grows beyond M.

use std::time::Instant;

use super::{channel_fits, check_shapes, finish, frobenius, masked_argmax, MmvSolver, SolverConfig, SolverResult};
use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::lstm::{normalize_input, LstmParams, LstmState};

/// Whether each channel keeps its own support or all channels share one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SupportMode {
    #[default]
    PerChannel,
    Shared,
}

#[derive(Debug, Clone)]
pub struct LstmCs<'a> {
    pub model: &'a LstmParams,
    pub support: SupportMode,
}

impl<'a> LstmCs<'a> {
    pub fn new(model: &'a LstmParams) -> Self {
        Self::with_support(model, SupportMode::PerChannel)
    }

    pub fn with_support(model: &'a LstmParams, support: SupportMode) -> Self {
        Self { model, support }
    }
}

impl MmvSolver for LstmCs<'_> {
    fn name(&self) -> &str {
        "lstm-cs"
    }

    fn solve(&self, a: &DenseMatrix, y: &DenseMatrix, cfg: &SolverConfig) -> Result<SolverResult> {
        let start = Instant::now();
        check_shapes("lstm_cs", a, y)?;
        let dims = self.model.dims;
        if (dims.m, dims.n) != a.shape() {
            return Err(Error::Shape {
                op: "lstm_cs model",
                left: (dims.m, dims.n),
                right: a.shape(),
            });
        }
        cfg.validate(a.rows())?;

        let mut fits = channel_fits(y);
        let scales: Vec<f64> = fits.iter().map(|f| f.y.max_abs()).collect();
        let mut shared: Vec<usize> = Vec::new();
        let mut norms = vec![frobenius(&fits)];
        let mut iterations = 0;
        while iterations < cfg.k_max && norms[iterations] > cfg.res_min {
            if self.support == SupportMode::Shared && shared.len() >= a.rows() {
                break;
            }
            let mut state = LstmState::zeros(dims.ncell);
            for (fit, &scale) in fits.iter_mut().zip(&scales) {
                let input = normalize_input(&fit.residual, scale);
                let step = self.model.step_unchecked(&input, &state);
                let logits = self.model.logits(&step.v);
                state = step.state();
                match self.support {
                    SupportMode::PerChannel => {
                        let index = masked_argmax(&logits, &fit.support).ok_or_else(|| {
                            Error::Internal("k_max exceeds the number of candidate indices".into())
                        })?;
                        fit.extend(a, index)?;
                    }
                    SupportMode::Shared => {
                        if shared.len() < a.rows() {
                            if let Some(index) = masked_argmax(&logits, &shared) {
                                shared.push(index);
                            }
                        }
                    }
                }
            }
            if self.support == SupportMode::Shared {
                for fit in &mut fits {
                    fit.set_support(a, &shared)?;
                }
            }
            iterations += 1;
            norms.push(frobenius(&fits));
        }
        Ok(finish(a.cols(), fits, norms, iterations, start))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lstm::{LstmDims, Variant};
    use crate::signal::{gen_sparse_ensemble, measure, AmplitudeLaw, MeasurementEnsemble, NoiseSpec, SparsityPattern};

    #[test]
    fn zero_measurements_give_zero_estimate() {
        let model = LstmParams::init(LstmDims::new(4, 8, 3), Variant::Reduced, 1).unwrap();
        let a = MeasurementEnsemble::generate(4, 8, 1).unwrap();
        let r = LstmCs::new(&model).solve(a.matrix(), &DenseMatrix::zeros(4, 3), &SolverConfig::new(0.0, 3)).unwrap();
        assert_eq!(r.iterations, 0);
        assert_eq!(r.residual_norms, vec![0.0]);
        assert!(r.shat.as_slice().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn uniform_model_follows_tie_break_trace() {
        let model = LstmParams::zeros(LstmDims::new(6, 10, 4), Variant::Full);
        let a = MeasurementEnsemble::generate(6, 10, 2).unwrap();
        let s = gen_sparse_ensemble(10, 2, 3, SparsityPattern::Independent, AmplitudeLaw::Gaussian, 2).unwrap();
        let y = measure(&a, &s.s, NoiseSpec::noiseless()).unwrap();
        let r = LstmCs::new(&model).solve(a.matrix(), &y, &SolverConfig::new(0.0, 4)).unwrap();
        assert_eq!(r.supports, vec![vec![0, 1, 2, 3], vec![0, 1, 2, 3]]);
        assert_eq!(r.iterations, 4);
        for j in 0..2 {
            for i in 4..10 {
                assert_eq!(r.shat.get(i, j), 0.0);
            }
        }
    }

    #[test]
    fn shared_mode_pools_selections() {
        let model = LstmParams::zeros(LstmDims::new(6, 10, 4), Variant::Full);
        let a = MeasurementEnsemble::generate(6, 10, 2).unwrap();
        let s = gen_sparse_ensemble(10, 2, 2, SparsityPattern::Independent, AmplitudeLaw::Gaussian, 2).unwrap();
        let y = measure(&a, &s.s, NoiseSpec::noiseless()).unwrap();
        let solver = LstmCs::with_support(&model, SupportMode::Shared);
        // Channel 0 takes index 0, channel 1 the next free one, and so on.
        let r = solver.solve(a.matrix(), &y, &SolverConfig::new(0.0, 2)).unwrap();
        assert_eq!(r.supports, vec![vec![0, 1, 2, 3], vec![0, 1, 2, 3]]);
        // The shared support is capped at M.
        let r = solver.solve(a.matrix(), &y, &SolverConfig::new(0.0, 6)).unwrap();
        assert_eq!(r.supports[0].len(), 6);
        assert_eq!(r.iterations, 3);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let model = LstmParams::zeros(LstmDims::new(5, 10, 4), Variant::Full);
        let a = MeasurementEnsemble::generate(6, 10, 2).unwrap();
        let err = LstmCs::new(&model).solve(a.matrix(), &DenseMatrix::zeros(6, 1), &SolverConfig::new(0.0, 1));
        assert!(matches!(err, Err(Error::Shape { .. })));
    }
}
