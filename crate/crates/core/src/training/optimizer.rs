//! Nesterov momentum with entrywise gradient clipping.
//!
//! Update `k` (1-based) with momentum `μ_k`:
//!
//! ```text
//! g   = clip(∇L(Λ + μ_k ΔΛ), ±th)
//! ΔΛ ← μ_k ΔΛ − ε g
//! Λ  ← Λ + ΔΛ
//! ```

use super::GradientSet;
use crate::lstm::LstmParams;

/// Momentum coefficient per update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MomentumSchedule {
    /// `low` for the first and last `ceil(10%)` of `total_updates`, `high` in between.
    Banded { total_updates: usize, low: f64, high: f64 },
    Constant(f64),
}

impl MomentumSchedule {
    /// 0.9 at both ends of training, 0.995 in the middle.
    pub fn banded(total_updates: usize) -> Self {
        MomentumSchedule::Banded {
            total_updates,
            low: 0.9,
            high: 0.995,
        }
    }

    /// Momentum for update `k` (1-based).
    pub fn mu(&self, k: usize) -> f64 {
        match *self {
            MomentumSchedule::Constant(mu) => mu,
            MomentumSchedule::Banded { total_updates, low, high } => {
                let band = total_updates.div_ceil(10);
                if k <= band || k + band > total_updates {
                    low
                } else {
                    high
                }
            }
        }
    }
}

/// Clamps every entry to `[−threshold, threshold]`.
pub fn clip_entries(grad: &mut GradientSet, threshold: f64) {
    for tensor in grad.tensors_mut() {
        for x in tensor {
            *x = x.clamp(-threshold, threshold);
        }
    }
}

#[derive(Debug, Clone)]
pub struct OptimizerState {
    /// Momentum buffer ΔΛ, shaped like the parameters.
    pub delta: GradientSet,
    pub epsilon: f64,
    pub clip: f64,
    pub schedule: MomentumSchedule,
    /// Updates applied so far.
    pub updates: usize,
}

impl OptimizerState {
    pub fn new(params: &LstmParams, epsilon: f64, clip: f64, schedule: MomentumSchedule) -> Self {
        Self {
            delta: GradientSet::zeros_like(params),
            epsilon,
            clip,
            schedule,
            updates: 0,
        }
    }

    /// Momentum of the next update.
    pub fn next_mu(&self) -> f64 {
        self.schedule.mu(self.updates + 1)
    }

    /// The point `Λ + μ ΔΛ` at which the next gradient must be evaluated.
    pub fn lookahead(&self, params: &LstmParams) -> LstmParams {
        let mu = self.next_mu();
        let mut ahead = params.clone();
        for (p, d) in ahead.tensors_mut().into_iter().zip(self.delta.tensors()) {
            for (x, dx) in p.iter_mut().zip(d) {
                *x += mu * dx;
            }
        }
        ahead
    }

    /// Applies one update with a gradient taken at [`Self::lookahead`].
    pub fn nesterov_step(&mut self, params: &mut LstmParams, grad_at_lookahead: &GradientSet) {
        let mu = self.next_mu();
        let (epsilon, clip) = (self.epsilon, self.clip);
        let tensors = params.tensors_mut().into_iter().zip(self.delta.tensors_mut()).zip(grad_at_lookahead.tensors());
        for ((p, d), g) in tensors {
            for ((x, dx), gx) in p.iter_mut().zip(d.iter_mut()).zip(g) {
                *dx = mu * *dx - epsilon * gx.clamp(-clip, clip);
                *x += *dx;
            }
        }
        self.updates += 1;
    }
}
