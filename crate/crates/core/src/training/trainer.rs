//! The mini-batch training loop.
//!
//! Every epoch shuffles the training sequences with a seed derived from the
//! run seed and the epoch number, then walks them in batches. For each batch
//! the gradient is evaluated at the Nesterov lookahead point, summed over the
//! batch members (computed in parallel, summed in sequence order so the
//! result does not depend on the worker count), clipped and applied.
//!
//! Optional symmetry augmentation redraws, per batch member, a random sign
//! for every channel and a random channel order. Both leave the recovery
//! problem unchanged when amplitudes are sign-symmetric and channels are
//! exchangeable (independent synthetic supports); they are off by default
//! because image data satisfies neither.

use std::borrow::Cow;
use std::time::Instant;

use rayon::prelude::*;

use super::backprop::loss_and_gradient;
use super::optimizer::{MomentumSchedule, OptimizerState};
use super::pairs::{SequenceStep, TrainingSequence};
use super::GradientSet;
use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::lstm::LstmParams;
use crate::rng::{derive_seed, SeededRng};
use crate::signal::nmse;
use crate::solvers::{LstmCs, MmvSolver, SolverConfig, SupportMode};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Fixed step size ε.
    pub epsilon: f64,
    /// Entrywise gradient clip threshold.
    pub clip: f64,
    pub epochs: usize,
    /// Sequences per update.
    pub batch_size: usize,
    /// Seeds the per-epoch shuffles.
    pub seed: u64,
    /// `None` selects the banded 0.9 / 0.995 schedule over all planned updates.
    pub constant_momentum: Option<f64>,
    /// Return the parameters of the best validation epoch instead of the last.
    pub early_stopping: bool,
    /// Stop after this many epochs without validation improvement.
    pub patience: Option<usize>,
    pub augmentation: Augmentation,
}

/// Label-preserving transformations applied to training sequences on the fly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Augmentation {
    /// Negate every input of a channel with probability 1/2.
    pub sign_flips: bool,
    /// Present the channels in a uniformly random order.
    pub channel_shuffle: bool,
}

impl Augmentation {
    pub fn is_active(&self) -> bool {
        self.sign_flips || self.channel_shuffle
    }

    /// Applies the enabled transformations to one sequence.
    pub fn apply(&self, seq: &TrainingSequence, rng: &mut SeededRng) -> TrainingSequence {
        let mut steps = seq.steps.clone();
        if self.sign_flips {
            for step in &mut steps {
                if rng.uniform() < 0.5 {
                    let residual = match step {
                        SequenceStep::Pair(p) => &mut p.residual,
                        SequenceStep::Carry { residual, .. } => residual,
                    };
                    for x in residual.iter_mut() {
                        *x = -*x;
                    }
                }
            }
        }
        if self.channel_shuffle {
            rng.shuffle(&mut steps);
        }
        TrainingSequence { steps }
    }
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.05,
            clip: 1.0,
            epochs: 25,
            batch_size: 20,
            seed: 0,
            constant_momentum: None,
            early_stopping: false,
            patience: None,
            augmentation: Augmentation::default(),
        }
    }
}

/// One validation problem: measurements and the sparse matrix behind them.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationSample {
    pub y: DenseMatrix,
    pub s: DenseMatrix,
    /// Overrides the set-wide iteration budget (e.g. the sample's known sparsity).
    pub k_max: Option<usize>,
}

/// Validation problems sharing one sensing matrix, decoded with LSTM-CS.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationSet {
    pub a: DenseMatrix,
    pub samples: Vec<ValidationSample>,
    pub solver: SolverConfig,
    pub support: SupportMode,
}

impl ValidationSet {
    /// Mean NMSE of LSTM-CS over the samples.
    pub fn mean_nmse(&self, params: &LstmParams) -> Result<f64> {
        if self.samples.is_empty() {
            return Err(Error::config("validation set is empty"));
        }
        let solver = LstmCs::with_support(params, self.support);
        let errors = self
            .samples
            .par_iter()
            .map(|sample| {
                let cfg = SolverConfig {
                    k_max: sample.k_max.unwrap_or(self.solver.k_max),
                    ..self.solver
                };
                nmse(&sample.s, &solver.solve(&self.a, &sample.y, &cfg)?.shat)
            })
            .collect::<Result<Vec<f64>>>()?;
        Ok(errors.iter().sum::<f64>() / errors.len() as f64)
    }
}

/// Log line of one epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    /// Mean over the epoch's batches of the per-target cross-entropy.
    pub mean_batch_loss: f64,
    pub validation_nmse: Option<f64>,
    /// Seconds since training started.
    pub wall_time: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub params: LstmParams,
    pub log: Vec<EpochRecord>,
    /// Epoch whose parameters were returned (0 = initial parameters).
    pub selected_epoch: usize,
    pub updates: usize,
}

fn check_config(cfg: &TrainConfig, data_len: usize) -> Result<()> {
    if data_len == 0 {
        return Err(Error::config("training set has no sequences with targets"));
    }
    if cfg.batch_size == 0 || cfg.batch_size > data_len {
        return Err(Error::config(format!(
            "batch size {} must be between 1 and the {data_len} training sequences",
            cfg.batch_size
        )));
    }
    if !(cfg.epsilon >= 0.0 && cfg.epsilon.is_finite()) || !(cfg.clip > 0.0) {
        return Err(Error::config(format!(
            "need epsilon >= 0 and clip > 0 (got {}, {})",
            cfg.epsilon, cfg.clip
        )));
    }
    if let Some(mu) = cfg.constant_momentum {
        if !(0.0..1.0).contains(&mu) {
            return Err(Error::config(format!("momentum must lie in [0, 1), got {mu}")));
        }
    }
    Ok(())
}

/// Sums the loss and gradient of a batch in member order.
fn batch_gradient(params: &LstmParams, members: &[Cow<'_, TrainingSequence>]) -> Result<(f64, usize, GradientSet)> {
    let parts = members
        .par_iter()
        .map(|seq| loss_and_gradient(params, seq))
        .collect::<Result<Vec<_>>>()?;
    let mut total = GradientSet::zeros_like(params);
    let mut loss = 0.0;
    for (l, g) in &parts {
        loss += l;
        total.add_assign(g);
    }
    let targets = members.iter().map(|seq| seq.pair_count()).sum();
    Ok((loss, targets, total))
}

/// Trains from `initial`, reporting each finished epoch to `observer`.
pub fn train_with_observer(
    initial: LstmParams,
    data: &[TrainingSequence],
    validation: Option<&ValidationSet>,
    cfg: &TrainConfig,
    mut observer: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome> {
    check_config(cfg, data.len())?;
    let start = Instant::now();
    let batches_per_epoch = data.len().div_ceil(cfg.batch_size);
    let schedule = match cfg.constant_momentum {
        Some(mu) => MomentumSchedule::Constant(mu),
        None => MomentumSchedule::banded(cfg.epochs * batches_per_epoch),
    };
    let mut params = initial;
    let mut opt = OptimizerState::new(&params, cfg.epsilon, cfg.clip, schedule);
    let mut log = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, usize, LstmParams)> = None;
    let mut order: Vec<usize> = (0..data.len()).collect();

    for epoch in 1..=cfg.epochs {
        let epoch_seed = derive_seed(cfg.seed, epoch as u64);
        SeededRng::new(epoch_seed).shuffle(&mut order);
        let mut augment_rng = SeededRng::new(derive_seed(epoch_seed, 0xA06));
        let mut loss_sum = 0.0;
        for (b, batch) in order.chunks(cfg.batch_size).enumerate() {
            let members: Vec<Cow<'_, TrainingSequence>> = batch
                .iter()
                .map(|&i| match cfg.augmentation.is_active() {
                    true => Cow::Owned(cfg.augmentation.apply(&data[i], &mut augment_rng)),
                    false => Cow::Borrowed(&data[i]),
                })
                .collect();
            let ahead = opt.lookahead(&params);
            let (loss, targets, grad) = batch_gradient(&ahead, &members)?;
            let mean = loss / targets.max(1) as f64;
            if !mean.is_finite() || !grad.max_abs().is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    batch: b + 1,
                    loss: mean,
                });
            }
            loss_sum += mean;
            opt.nesterov_step(&mut params, &grad);
        }
        let validation_nmse = validation.map(|v| v.mean_nmse(&params)).transpose()?;
        let record = EpochRecord {
            epoch,
            mean_batch_loss: loss_sum / batches_per_epoch as f64,
            validation_nmse,
            wall_time: start.elapsed().as_secs_f64(),
        };
        observer(&record);
        log.push(record);

        if let Some(score) = validation_nmse {
            if best.as_ref().is_none_or(|(b, _, _)| score < *b) {
                best = Some((score, epoch, params.clone()));
            }
            let best_epoch = best.as_ref().map_or(0, |(_, e, _)| *e);
            if cfg.patience.is_some_and(|p| epoch - best_epoch >= p) {
                break;
            }
        }
    }

    let updates = opt.updates;
    let (params, selected_epoch) = match best {
        Some((_, epoch, best_params)) if cfg.early_stopping => (best_params, epoch),
        _ => (params, log.len()),
    };
    Ok(TrainOutcome {
        params,
        log,
        selected_epoch,
        updates,
    })
}

/// [`train_with_observer`] without progress reporting.
pub fn train(
    initial: LstmParams,
    data: &[TrainingSequence],
    validation: Option<&ValidationSet>,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    train_with_observer(initial, data, validation, cfg, |_| {})
}
