//! Supervised training of the LSTM selector: training-pair generation from
//! raw sparse data, cross-entropy loss, backpropagation through the channel
//! sequence, and the Nesterov mini-batch loop.

mod backprop;
mod gradcheck;
mod optimizer;
mod pairs;
mod trainer;

pub use backprop::{backprop_sequence, cross_entropy_loss, loss_and_gradient, sequence_forward, sequence_loss};
pub use gradcheck::{central_difference, fd_gradient_oracle, max_relative_error};
pub use optimizer::{clip_entries, MomentumSchedule, OptimizerState};
pub use pairs::{generate_training_pairs, PairOptions, SequenceStep, TrainingPair, TrainingSequence};
pub use trainer::{train, train_with_observer, Augmentation, EpochRecord, TrainConfig, TrainOutcome, ValidationSample, ValidationSet};

use crate::lstm::{LstmDims, LstmParams, Variant, TENSOR_COUNT};

/// One gradient tensor per parameter tensor, same shapes and order.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSet(LstmParams);

impl GradientSet {
    pub fn zeros(dims: LstmDims, variant: Variant) -> Self {
        Self(LstmParams::zeros(dims, variant))
    }

    pub fn zeros_like(params: &LstmParams) -> Self {
        Self::zeros(params.dims, params.variant)
    }

    pub fn as_params(&self) -> &LstmParams {
        &self.0
    }

    pub(crate) fn as_params_mut(&mut self) -> &mut LstmParams {
        &mut self.0
    }

    pub fn tensors(&self) -> [&[f64]; TENSOR_COUNT] {
        self.0.tensors()
    }

    pub fn tensors_mut(&mut self) -> [&mut [f64]; TENSOR_COUNT] {
        self.0.tensors_mut()
    }

    pub fn add_assign(&mut self, other: &GradientSet) {
        for (dst, src) in self.tensors_mut().into_iter().zip(other.tensors()) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d += s;
            }
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.tensors().iter().flat_map(|t| t.iter()).fold(0.0f64, |m, x| m.max(x.abs()))
    }

    pub fn norm(&self) -> f64 {
        self.tensors().iter().flat_map(|t| t.iter()).map(|x| x * x).sum::<f64>().sqrt()
    }
}
