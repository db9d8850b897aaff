//! Cross-entropy loss and exact backpropagation through the channel sequence.
//!
//! The backward pass carries `∂L/∂v` and `∂L/∂c` from step `t+1` into step
//! `t`, including every path through the recurrent weights, the forget gate
//! and the peepholes. This is the exact gradient of the summed sequence loss,
//! which is what finite differences measure.

use super::pairs::TrainingSequence;
use super::GradientSet;
use crate::error::{Error, Result};
use crate::linalg::{gemv_t_acc, outer_acc};
use crate::lstm::{ForwardCache, LstmParams, Variant, CELL, FORGET, INPUT, OUTPUT};

/// `−log p(target)`.
pub fn cross_entropy_loss(p: &[f64], target: usize) -> f64 {
    -p[target].ln()
}

/// `−log softmax(z)[target]` evaluated stably from the logits.
fn cross_entropy_from_logits(z: &[f64], target: usize) -> f64 {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + z.iter().map(|x| (x - max).exp()).sum::<f64>().ln();
    lse - z[target]
}

/// Forward pass over the sequence inputs from the zero state.
pub fn sequence_forward(params: &LstmParams, seq: &TrainingSequence) -> Result<ForwardCache> {
    params.forward_sequence(seq.steps.iter().map(|s| s.input()))
}

fn loss_of_cache(seq: &TrainingSequence, cache: &ForwardCache) -> f64 {
    seq.steps
        .iter()
        .zip(&cache.records)
        .filter_map(|(step, rec)| step.target().map(|t| cross_entropy_from_logits(&rec.z, t)))
        .sum()
}

/// Summed cross-entropy over every target in the sequence.
pub fn sequence_loss(params: &LstmParams, seq: &TrainingSequence) -> Result<f64> {
    Ok(loss_of_cache(seq, &sequence_forward(params, seq)?))
}

/// Gradient of the summed sequence loss with respect to every parameter.
/// Frozen tensors of the reduced variant receive exact zeros.
pub fn backprop_sequence(params: &LstmParams, seq: &TrainingSequence, cache: &ForwardCache) -> Result<GradientSet> {
    if cache.records.len() != seq.steps.len() {
        return Err(Error::Internal(format!(
            "forward cache has {} records for a sequence of {} steps",
            cache.records.len(),
            seq.steps.len()
        )));
    }
    let nc = params.dims.ncell;
    let full = params.variant == Variant::Full;
    let mut grad = GradientSet::zeros_like(params);
    let g = grad.as_params_mut();

    // Error signals arriving from step t+1.
    let mut dv_next = vec![0.0; nc];
    let mut dc_next = vec![0.0; nc];
    let mut da_f = vec![0.0; nc];

    for (rec, step) in cache.records.iter().zip(&seq.steps).rev() {
        let s = &rec.step;
        let mut dv = std::mem::replace(&mut dv_next, vec![0.0; nc]);
        if let Some(target) = step.target() {
            let mut dz = rec.p.to_vec();
            dz[target] -= 1.0;
            outer_acc(&mut g.u, &dz, &s.v);
            gemv_t_acc(&mut dv, &params.u, &dz);
        }

        let da_o: Vec<f64> = (0..nc).map(|k| dv[k] * s.tanh_c[k] * s.o[k] * (1.0 - s.o[k])).collect();
        let mut dc: Vec<f64> = (0..nc)
            .map(|k| dv[k] * s.o[k] * (1.0 - s.tanh_c[k] * s.tanh_c[k]) + dc_next[k])
            .collect();
        if full {
            gemv_t_acc(&mut dc, &params.w_peep[0], &da_o);
        }
        let da_i: Vec<f64> = (0..nc).map(|k| dc[k] * s.y_g[k] * s.i[k] * (1.0 - s.i[k])).collect();
        let da_g: Vec<f64> = (0..nc).map(|k| dc[k] * s.i[k] * (1.0 - s.y_g[k] * s.y_g[k])).collect();
        if full {
            for k in 0..nc {
                da_f[k] = dc[k] * s.c_prev[k] * s.f[k] * (1.0 - s.f[k]);
            }
        }

        let gates: &[(usize, &[f64])] = if full {
            &[(OUTPUT, da_o.as_slice()), (FORGET, da_f.as_slice()), (INPUT, da_i.as_slice()), (CELL, da_g.as_slice())]
        } else {
            &[(OUTPUT, da_o.as_slice()), (INPUT, da_i.as_slice()), (CELL, da_g.as_slice())]
        };
        for &(gate, da) in gates {
            outer_acc(&mut g.w[gate], da, &s.r);
            outer_acc(&mut g.w_rec[gate], da, &s.v_prev);
            for (b, d) in g.b[gate].iter_mut().zip(da) {
                *b += d;
            }
            gemv_t_acc(&mut dv_next, &params.w_rec[gate], da);
        }

        for k in 0..nc {
            dc_next[k] = dc[k] * s.f[k];
        }
        if full {
            outer_acc(&mut g.w_peep[0], &da_o, &s.c);
            outer_acc(&mut g.w_peep[1], &da_f, &s.c_prev);
            outer_acc(&mut g.w_peep[2], &da_i, &s.c_prev);
            gemv_t_acc(&mut dc_next, &params.w_peep[1], &da_f);
            gemv_t_acc(&mut dc_next, &params.w_peep[2], &da_i);
        }
    }
    Ok(grad)
}

/// Summed loss and its gradient for one sequence.
pub fn loss_and_gradient(params: &LstmParams, seq: &TrainingSequence) -> Result<(f64, GradientSet)> {
    let cache = sequence_forward(params, seq)?;
    let loss = loss_of_cache(seq, &cache);
    let grad = backprop_sequence(params, seq, &cache)?;
    Ok((loss, grad))
}
