//! Single-layer LSTM with optional peepholes and a softmax head over the
//! N candidate support locations.
//!
//! Gate numbering follows the usual LSTM-CS layout: index 0 is the output
//! gate (`W1`), 1 the forget gate (`W2`), 2 the input gate (`W3`) and 3 the
//! un-gated cell input (`W4`). Peepholes `Wp1..Wp3` feed the output, forget
//! and input gates. Input weights are stored `ncell × M` and act on the
//! residual by left multiplication.
//!
//! ```text
//! y_g = tanh(W4 r + Wrec4 v⁻ + b4)
//! i   = σ(W3 r + Wrec3 v⁻ + Wp3 c⁻ + b3)
//! f   = σ(W2 r + Wrec2 v⁻ + Wp2 c⁻ + b2)      (≡ 1 in the reduced variant)
//! c   = f ∘ c⁻ + i ∘ y_g
//! o   = σ(W1 r + Wrec1 v⁻ + Wp1 c + b1)
//! v   = o ∘ tanh(c)
//! p   = softmax(U v)
//! ```

use crate::error::{Error, Result};
use crate::linalg::{gemv_acc, sigmoid, softmax, DenseMatrix, DenseVector};
use crate::rng::SeededRng;

pub const OUTPUT: usize = 0;
pub const FORGET: usize = 1;
pub const INPUT: usize = 2;
pub const CELL: usize = 3;

/// Magnitude bound of the initial weights.
pub const INIT_SCALE: f64 = 0.05;

/// Number of tensors in a parameter set.
pub const TENSOR_COUNT: usize = 16;

/// Tensor names in serialization order.
pub const TENSOR_NAMES: [&str; TENSOR_COUNT] = [
    "W1", "W2", "W3", "W4", "Wrec1", "Wrec2", "Wrec3", "Wrec4", "Wp1", "Wp2", "Wp3", "b1", "b2", "b3", "b4", "U",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    /// Peepholes and forget gate active.
    Full,
    /// No peepholes, forget gate pinned to 1.
    Reduced,
}

impl Variant {
    pub fn code(self) -> u32 {
        match self {
            Variant::Full => 0,
            Variant::Reduced => 1,
        }
    }

    pub fn from_code(code: u32) -> Option<Self> {
        match code {
            0 => Some(Variant::Full),
            1 => Some(Variant::Reduced),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LstmDims {
    /// Measurements per channel (input length).
    pub m: usize,
    /// Signal length (softmax width).
    pub n: usize,
    pub ncell: usize,
}

impl LstmDims {
    pub fn new(m: usize, n: usize, ncell: usize) -> Self {
        Self { m, n, ncell }
    }

    /// Shape of tensor `index` in serialization order.
    pub fn tensor_shape(&self, index: usize) -> (usize, usize) {
        match index {
            0..=3 => (self.ncell, self.m),
            4..=10 => (self.ncell, self.ncell),
            11..=14 => (self.ncell, 1),
            15 => (self.n, self.ncell),
            _ => panic!("tensor index {index} out of range"),
        }
    }

    pub fn parameter_count(&self) -> usize {
        (0..TENSOR_COUNT).map(|i| {
            let (r, c) = self.tensor_shape(i);
            r * c
        }).sum()
    }
}

/// The full parameter collection `{W1..4, Wrec1..4, Wp1..3, b1..4, U}`.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    pub dims: LstmDims,
    pub variant: Variant,
    pub w: [DenseMatrix; 4],
    pub w_rec: [DenseMatrix; 4],
    pub w_peep: [DenseMatrix; 3],
    pub b: [DenseVector; 4],
    pub u: DenseMatrix,
}

impl LstmParams {
    pub fn zeros(dims: LstmDims, variant: Variant) -> Self {
        let LstmDims { m, n, ncell } = dims;
        Self {
            dims,
            variant,
            w: std::array::from_fn(|_| DenseMatrix::zeros(ncell, m)),
            w_rec: std::array::from_fn(|_| DenseMatrix::zeros(ncell, ncell)),
            w_peep: std::array::from_fn(|_| DenseMatrix::zeros(ncell, ncell)),
            b: std::array::from_fn(|_| DenseVector::zeros(ncell)),
            u: DenseMatrix::zeros(n, ncell),
        }
    }

    /// Weights uniform on (−0.05, 0.05) drawn tensor by tensor in
    /// serialization order, biases zero. The reduced variant leaves the
    /// peephole and forget-path tensors at zero (and skips their draws).
    pub fn init(dims: LstmDims, variant: Variant, seed: u64) -> Result<Self> {
        if dims.m == 0 || dims.n == 0 || dims.ncell == 0 {
            return Err(Error::config(format!("LSTM dims must be positive, got {dims:?}")));
        }
        let mut params = Self::zeros(dims, variant);
        let mut rng = SeededRng::new(seed);
        for (index, tensor) in params.tensors_mut().into_iter().enumerate() {
            if is_bias(index) || is_frozen(variant, index) {
                continue;
            }
            for x in tensor {
                *x = rng.uniform_range(-INIT_SCALE, INIT_SCALE);
            }
        }
        Ok(params)
    }

    /// Tensors in serialization order.
    pub fn tensors(&self) -> [&[f64]; TENSOR_COUNT] {
        let [w1, w2, w3, w4] = &self.w;
        let [r1, r2, r3, r4] = &self.w_rec;
        let [p1, p2, p3] = &self.w_peep;
        let [b1, b2, b3, b4] = &self.b;
        [
            w1.as_slice(), w2.as_slice(), w3.as_slice(), w4.as_slice(),
            r1.as_slice(), r2.as_slice(), r3.as_slice(), r4.as_slice(),
            p1.as_slice(), p2.as_slice(), p3.as_slice(),
            b1, b2, b3, b4,
            self.u.as_slice(),
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut [f64]; TENSOR_COUNT] {
        let [w1, w2, w3, w4] = &mut self.w;
        let [r1, r2, r3, r4] = &mut self.w_rec;
        let [p1, p2, p3] = &mut self.w_peep;
        let [b1, b2, b3, b4] = &mut self.b;
        [
            w1.as_mut_slice(), w2.as_mut_slice(), w3.as_mut_slice(), w4.as_mut_slice(),
            r1.as_mut_slice(), r2.as_mut_slice(), r3.as_mut_slice(), r4.as_mut_slice(),
            p1.as_mut_slice(), p2.as_mut_slice(), p3.as_mut_slice(),
            b1, b2, b3, b4,
            self.u.as_mut_slice(),
        ]
    }

    pub fn is_frozen(&self, index: usize) -> bool {
        is_frozen(self.variant, index)
    }

    /// One step of the recurrence from `state`, returning every intermediate.
    pub fn forward_step(&self, r: &[f64], state: &LstmState) -> Result<StepRecord> {
        if r.len() != self.dims.m {
            return Err(Error::Shape {
                op: "forward_step",
                left: (self.dims.ncell, self.dims.m),
                right: (r.len(), 1),
            });
        }
        Ok(self.step_unchecked(r, state))
    }

    pub(crate) fn step_unchecked(&self, r: &[f64], state: &LstmState) -> StepRecord {
        let nc = self.dims.ncell;
        let full = self.variant == Variant::Full;
        // A zero state contributes exactly nothing; skipping those products
        // saves most of the work on the first channel of every iteration.
        let v_active = state.v.iter().any(|&x| x != 0.0);
        let c_active = full && state.c.iter().any(|&x| x != 0.0);
        let preact = |gate: usize| -> Vec<f64> {
            let mut a = self.b[gate].to_vec();
            gemv_acc(&mut a, &self.w[gate], r);
            if v_active {
                gemv_acc(&mut a, &self.w_rec[gate], &state.v);
            }
            a
        };

        let y_g: Vec<f64> = preact(CELL).into_iter().map(f64::tanh).collect();

        let mut a_i = preact(INPUT);
        if c_active {
            gemv_acc(&mut a_i, &self.w_peep[2], &state.c);
        }
        let i: Vec<f64> = a_i.into_iter().map(sigmoid).collect();

        let f: Vec<f64> = if full {
            let mut a_f = preact(FORGET);
            if c_active {
                gemv_acc(&mut a_f, &self.w_peep[1], &state.c);
            }
            a_f.into_iter().map(sigmoid).collect()
        } else {
            vec![1.0; nc]
        };

        let c: Vec<f64> = (0..nc).map(|k| f[k] * state.c[k] + i[k] * y_g[k]).collect();

        let mut a_o = preact(OUTPUT);
        if full {
            gemv_acc(&mut a_o, &self.w_peep[0], &c);
        }
        let o: Vec<f64> = a_o.into_iter().map(sigmoid).collect();
        let tanh_c: Vec<f64> = c.iter().map(|x| x.tanh()).collect();
        let v: Vec<f64> = o.iter().zip(&tanh_c).map(|(a, b)| a * b).collect();

        StepRecord {
            r: r.to_vec().into(),
            v_prev: state.v.clone(),
            c_prev: state.c.clone(),
            y_g: y_g.into(),
            i: i.into(),
            f: f.into(),
            c: c.into(),
            o: o.into(),
            tanh_c: tanh_c.into(),
            v: v.into(),
        }
    }

    /// `z = U v`.
    pub fn logits(&self, v: &[f64]) -> DenseVector {
        let mut z = vec![0.0; self.dims.n];
        gemv_acc(&mut z, &self.u, v);
        z.into()
    }

    /// `softmax(U v)`.
    pub fn channel_probabilities(&self, v: &[f64]) -> Result<DenseVector> {
        if v.len() != self.dims.ncell {
            return Err(Error::Shape {
                op: "channel_probabilities",
                left: self.u.shape(),
                right: (v.len(), 1),
            });
        }
        Ok(softmax(&self.logits(v)))
    }

    /// Runs a whole channel sequence from the zero state.
    pub fn forward_sequence<'a, I>(&self, inputs: I) -> Result<ForwardCache>
    where
        I: IntoIterator<Item = &'a [f64]>,
    {
        let mut state = LstmState::zeros(self.dims.ncell);
        let mut records = Vec::new();
        for r in inputs {
            let step = self.forward_step(r, &state)?;
            let z = self.logits(&step.v);
            let p = softmax(&z);
            state = step.state();
            records.push(CacheRecord { step, z, p });
        }
        Ok(ForwardCache { records })
    }
}

/// Residuals at or below this fraction of the channel's measurement scale are
/// fed to the model as exact zeros.
pub const ZERO_RESIDUAL_RTOL: f64 = 1e-10;

/// Scales a residual by its largest magnitude, the input convention shared by
/// training and decoding. `reference` is the max-abs of the channel's
/// measurement vector; residuals that are numerically zero relative to it map
/// to the zero vector instead of amplified round-off.
pub fn normalize_input(r: &[f64], reference: f64) -> DenseVector {
    let max = r.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if max == 0.0 || max <= ZERO_RESIDUAL_RTOL * reference {
        return DenseVector::zeros(r.len());
    }
    r.iter().map(|x| x / max).collect::<Vec<_>>().into()
}

fn is_bias(index: usize) -> bool {
    (11..=14).contains(&index)
}

/// Tensors held at zero in the reduced variant: W2, Wrec2, Wp1..3, b2.
pub fn is_frozen(variant: Variant, index: usize) -> bool {
    variant == Variant::Reduced && matches!(index, 1 | 5 | 8 | 9 | 10 | 12)
}

/// Cell state `c` and gated output `v`.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    pub c: DenseVector,
    pub v: DenseVector,
}

impl LstmState {
    pub fn zeros(ncell: usize) -> Self {
        Self {
            c: DenseVector::zeros(ncell),
            v: DenseVector::zeros(ncell),
        }
    }
}

/// Intermediates of one forward step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub r: DenseVector,
    pub v_prev: DenseVector,
    pub c_prev: DenseVector,
    pub y_g: DenseVector,
    pub i: DenseVector,
    pub f: DenseVector,
    pub c: DenseVector,
    pub o: DenseVector,
    pub tanh_c: DenseVector,
    pub v: DenseVector,
}

impl StepRecord {
    pub fn state(&self) -> LstmState {
        LstmState {
            c: self.c.clone(),
            v: self.v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CacheRecord {
    pub step: StepRecord,
    pub z: DenseVector,
    pub p: DenseVector,
}

/// One record per processed channel, in order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ForwardCache {
    pub records: Vec<CacheRecord>,
}
