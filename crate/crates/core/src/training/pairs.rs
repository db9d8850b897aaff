//! Training pairs from raw sparse matrices.
//!
//! For each channel `s` with measurement `y = A s`, the non-zero entries are
//! ranked by decreasing magnitude `k0, k1, …` (ties broken toward the lower
//! index, chain truncated to `k_max`). Removing the top `j` entries gives the
//! residual `r_j = y − Σ_{u<j} a_{k_u} s(k_u)`, which is paired with a one-hot
//! target at `k_j` for `j = 1..k−1`. With `include_initial_pair` the pair
//! `(y, k0)` is emitted first as well.
//!
//! Pairs are grouped into sequences by removal step: sequence `p` holds the
//! `p`-th pair of every channel in channel order, so the LSTM sees the same
//! channel-major unrolling it sees while decoding. A channel that has run out
//! of pairs still feeds its final residual (with no target) to keep the
//! recurrence aligned with the other channels.

use crate::error::{Error, Result};
use crate::linalg::{DenseMatrix, DenseVector};
use crate::lstm::normalize_input;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairOptions {
    /// Maximum non-zeros per channel used for pair generation.
    pub k_max: usize,
    pub include_initial_pair: bool,
    /// Scale residual inputs by their max magnitude, as the decoder does.
    pub normalize: bool,
}

impl PairOptions {
    pub fn new(k_max: usize) -> Self {
        Self {
            k_max,
            include_initial_pair: true,
            normalize: true,
        }
    }
}

/// Residual input with the index of the next support location to predict.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingPair {
    pub residual: DenseVector,
    pub target: usize,
    /// Zero-based channel index.
    pub channel: usize,
}

impl TrainingPair {
    pub fn one_hot(&self, n: usize) -> DenseVector {
        let mut s0 = DenseVector::zeros(n);
        s0[self.target] = 1.0;
        s0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SequenceStep {
    Pair(TrainingPair),
    /// Input only: the channel has no target left at this step.
    Carry { residual: DenseVector, channel: usize },
}

impl SequenceStep {
    pub fn input(&self) -> &[f64] {
        match self {
            SequenceStep::Pair(p) => &p.residual,
            SequenceStep::Carry { residual, .. } => residual,
        }
    }

    pub fn target(&self) -> Option<usize> {
        match self {
            SequenceStep::Pair(p) => Some(p.target),
            SequenceStep::Carry { .. } => None,
        }
    }
}

/// One pass of the LSTM over the channels, state reset at the start.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainingSequence {
    pub steps: Vec<SequenceStep>,
}

impl TrainingSequence {
    pub fn pairs(&self) -> impl Iterator<Item = &TrainingPair> {
        self.steps.iter().filter_map(|s| match s {
            SequenceStep::Pair(p) => Some(p),
            SequenceStep::Carry { .. } => None,
        })
    }

    pub fn pair_count(&self) -> usize {
        self.pairs().count()
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

/// Removal chain of one channel: indices by decreasing magnitude.
fn removal_chain(column: &[f64], k_max: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..column.len()).filter(|&i| column[i] != 0.0).collect();
    // Stable sort keeps lower indices first among equal magnitudes.
    idx.sort_by(|&a, &b| column[b].abs().total_cmp(&column[a].abs()));
    idx.truncate(k_max);
    idx
}

/// Builds the training sequences of one sparse matrix `s` (N × L) under the
/// sensing matrix `a` (M × N). Sequences without any target are dropped.
pub fn generate_training_pairs(s: &DenseMatrix, a: &DenseMatrix, opts: &PairOptions) -> Result<Vec<TrainingSequence>> {
    if a.cols() != s.rows() {
        return Err(Error::Shape {
            op: "generate_training_pairs",
            left: a.shape(),
            right: s.shape(),
        });
    }
    if opts.k_max == 0 {
        return Err(Error::config("k_max must be at least 1"));
    }
    let (m, l) = (a.rows(), s.cols());

    let mut channel_steps: Vec<Vec<(DenseVector, usize)>> = Vec::with_capacity(l);
    let mut exhausted: Vec<DenseVector> = Vec::with_capacity(l);
    let mut scales = Vec::with_capacity(l);
    for j in 0..l {
        let column = s.column(j);
        let y = a.matvec(&column)?;
        scales.push(y.max_abs());
        let chain = removal_chain(&column, opts.k_max);

        let mut steps = Vec::new();
        if opts.include_initial_pair {
            if let Some(&first) = chain.first() {
                steps.push((y.clone(), first));
            }
        }
        let mut residual = y.to_vec();
        for (t, &removed) in chain.iter().enumerate() {
            for i in 0..m {
                residual[i] -= a.get(i, removed) * column[removed];
            }
            if let Some(&next) = chain.get(t + 1) {
                steps.push((residual.clone().into(), next));
            }
        }
        channel_steps.push(steps);
        exhausted.push(residual.into());
    }

    let prepare = |r: &DenseVector, channel: usize| -> DenseVector {
        if opts.normalize {
            normalize_input(r, scales[channel])
        } else {
            r.clone()
        }
    };

    let depth = channel_steps.iter().map(Vec::len).max().unwrap_or(0);
    let mut sequences = Vec::with_capacity(depth);
    for p in 0..depth {
        let steps = (0..l)
            .map(|j| match channel_steps[j].get(p) {
                Some((r, target)) => SequenceStep::Pair(TrainingPair {
                    residual: prepare(r, j),
                    target: *target,
                    channel: j,
                }),
                None => SequenceStep::Carry {
                    residual: prepare(&exhausted[j], j),
                    channel: j,
                },
            })
            .collect();
        sequences.push(TrainingSequence { steps });
    }
    Ok(sequences)
}
