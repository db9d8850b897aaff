//! Finite-difference gradient oracle for testing the analytic backward pass.

use super::backprop::sequence_loss;
use super::pairs::TrainingSequence;
use super::GradientSet;
use crate::error::Result;
use crate::lstm::{LstmParams, TENSOR_COUNT};

/// `(f(θ+h) − f(θ−h)) / 2h`.
pub fn central_difference<F: FnMut(f64) -> f64>(mut f: F, theta: f64, h: f64) -> f64 {
    (f(theta + h) - f(theta - h)) / (2.0 * h)
}

/// Central-difference gradient of the summed sequence loss, one scalar
/// parameter at a time. Frozen tensors are left at zero. Costs two forward
/// passes per parameter, so it is meant for small dimensions only.
pub fn fd_gradient_oracle(params: &LstmParams, seq: &TrainingSequence, h: f64) -> Result<GradientSet> {
    let mut grad = GradientSet::zeros_like(params);
    let mut probe = params.clone();
    for tensor in 0..TENSOR_COUNT {
        if params.is_frozen(tensor) {
            continue;
        }
        for entry in 0..params.tensors()[tensor].len() {
            let original = params.tensors()[tensor][entry];
            let mut loss_at = |x: f64| -> Result<f64> {
                probe.tensors_mut()[tensor][entry] = x;
                sequence_loss(&probe, seq)
            };
            let plus = loss_at(original + h)?;
            let minus = loss_at(original - h)?;
            probe.tensors_mut()[tensor][entry] = original;
            grad.tensors_mut()[tensor][entry] = (plus - minus) / (2.0 * h);
        }
    }
    Ok(grad)
}

/// Per-tensor relative error `max|a − f| / max(max|a|, max|f|)` (0 when both
/// tensors are identically zero). Normalizing by the tensor's largest entry
/// keeps entries that are pure finite-difference round-off from dominating.
pub fn max_relative_error(analytic: &GradientSet, numeric: &GradientSet) -> [f64; TENSOR_COUNT] {
    let mut out = [0.0; TENSOR_COUNT];
    for (slot, (a, f)) in out.iter_mut().zip(analytic.tensors().into_iter().zip(numeric.tensors())) {
        let scale = a.iter().chain(f.iter()).fold(0.0f64, |m, x| m.max(x.abs()));
        if scale > 0.0 {
            let diff = a.iter().zip(f).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
            *slot = diff / scale;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lstm::{LstmDims, Variant};
    use crate::rng::SeededRng;
    use crate::training::backprop::loss_and_gradient;
    use crate::training::pairs::{SequenceStep, TrainingPair};

    /// Parameters with O(1) pre-activations so every gradient path carries
    /// signal well above finite-difference round-off.
    fn random_params(dims: LstmDims, variant: Variant, seed: u64) -> LstmParams {
        let mut p = LstmParams::init(dims, variant, seed).unwrap();
        let mut rng = SeededRng::new(seed ^ 0x5EED);
        for (i, t) in p.tensors_mut().into_iter().enumerate() {
            if crate::lstm::is_frozen(variant, i) {
                continue;
            }
            for x in t {
                *x = rng.uniform_range(-0.5, 0.5);
            }
        }
        p
    }

    fn random_sequence(dims: LstmDims, len: usize, seed: u64) -> TrainingSequence {
        let mut rng = SeededRng::new(seed);
        let steps = (0..len)
            .map(|t| {
                let residual: Vec<f64> = (0..dims.m).map(|_| rng.uniform_range(-1.0, 1.0)).collect();
                if t == 1 {
                    SequenceStep::Carry {
                        residual: residual.into(),
                        channel: t,
                    }
                } else {
                    SequenceStep::Pair(TrainingPair {
                        residual: residual.into(),
                        target: rng.below(dims.n),
                        channel: t,
                    })
                }
            })
            .collect();
        TrainingSequence { steps }
    }

    #[test]
    fn quadratic_toy() {
        let d = central_difference(|x| x * x, 3.0, 1e-5);
        assert!((d - 6.0).abs() <= 1e-9);
    }

    #[test]
    fn analytic_gradient_matches_finite_differences() {
        let dims = LstmDims::new(4, 5, 3);
        for (variant, seed) in [(Variant::Full, 1), (Variant::Reduced, 2)] {
            let params = random_params(dims, variant, seed);
            let seq = random_sequence(dims, 4, seed + 10);
            let (_, analytic) = loss_and_gradient(&params, &seq).unwrap();
            let numeric = fd_gradient_oracle(&params, &seq, 1e-5).unwrap();
            for (i, err) in max_relative_error(&analytic, &numeric).iter().enumerate() {
                assert!(*err <= 1e-6, "{variant:?} tensor {i}: {err:e}");
            }
        }
    }

    #[test]
    fn step_size_robustness() {
        let dims = LstmDims::new(3, 4, 3);
        let params = random_params(dims, Variant::Full, 7);
        let seq = random_sequence(dims, 3, 8);
        let coarse = fd_gradient_oracle(&params, &seq, 1e-4).unwrap();
        let fine = fd_gradient_oracle(&params, &seq, 1e-5).unwrap();
        for (c, f) in coarse.tensors().iter().zip(fine.tensors()) {
            for (x, y) in c.iter().zip(f) {
                assert!((x - y).abs() <= 1e-6);
            }
        }
    }

    #[test]
    fn relative_error_of_identical_sets_is_zero() {
        let p = random_params(LstmDims::new(2, 3, 2), Variant::Full, 1);
        let g = GradientSet(p);
        assert!(max_relative_error(&g, &g).iter().all(|&e| e == 0.0));
        let z = GradientSet::zeros(LstmDims::new(2, 3, 2), Variant::Full);
        assert!(max_relative_error(&z, &z).iter().all(|&e| e == 0.0));
    }
}
