use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::LstmError;
use crate::scalar::Scalar;

/// Network width. `hidden` is shared by the input projection and both
/// recurrent layers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Dims {
    pub input: usize,
    pub hidden: usize,
    pub classes: usize,
}

impl Dims {
    pub const fn new(input: usize, hidden: usize, classes: usize) -> Self {
        Self {
            input,
            hidden,
            classes,
        }
    }

    /// Three accelerometer channels, 64 units, two outputs.
    pub const fn standard() -> Self {
        Self::new(3, 64, 2)
    }

    pub fn validate(&self) -> Result<(), LstmError> {
        if self.input == 0 || self.hidden == 0 || self.classes < 2 {
            return Err(LstmError::ShapeMismatch(format!("invalid dims {self:?}")));
        }
        Ok(())
    }
}

/// Gate blocks are stacked in this row order inside the combined matrices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gate {
    Input = 0,
    Forget = 1,
    Cell = 2,
    Output = 3,
}

impl Gate {
    pub const ALL: [Gate; 4] = [Gate::Input, Gate::Forget, Gate::Cell, Gate::Output];
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dense<F> {
    /// `[out, in]`
    pub weight: Array2<F>,
    pub bias: Array1<F>,
}

impl<F: Scalar> Dense<F> {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            weight: Array2::zeros((outputs, inputs)),
            bias: Array1::zeros(outputs),
        }
    }
}

/// One recurrent layer. `w` is `[4H, D_in]`, `u` is `[4H, H]`, `b` is `[4H]`,
/// each holding the input, forget, cell-candidate and output gates in that
/// order.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmLayerParams<F> {
    pub w: Array2<F>,
    pub u: Array2<F>,
    pub b: Array1<F>,
}

impl<F: Scalar> LstmLayerParams<F> {
    pub fn zeros(inputs: usize, hidden: usize) -> Self {
        Self {
            w: Array2::zeros((4 * hidden, inputs)),
            u: Array2::zeros((4 * hidden, hidden)),
            b: Array1::zeros(4 * hidden),
        }
    }

    pub fn hidden(&self) -> usize {
        self.u.ncols()
    }

    pub fn inputs(&self) -> usize {
        self.w.ncols()
    }

    pub fn gate_input_weights(&self, gate: Gate) -> ArrayView2<'_, F> {
        let h = self.hidden();
        let k = gate as usize;
        self.w.slice(s![k * h..(k + 1) * h, ..])
    }

    pub fn gate_recurrent_weights(&self, gate: Gate) -> ArrayView2<'_, F> {
        let h = self.hidden();
        let k = gate as usize;
        self.u.slice(s![k * h..(k + 1) * h, ..])
    }

    pub fn gate_bias(&self, gate: Gate) -> ArrayView1<'_, F> {
        let h = self.hidden();
        let k = gate as usize;
        self.b.slice(s![k * h..(k + 1) * h])
    }

    pub fn gate_bias_mut(&mut self, gate: Gate) -> ndarray::ArrayViewMut1<'_, F> {
        let h = self.hidden();
        let k = gate as usize;
        self.b.slice_mut(s![k * h..(k + 1) * h])
    }

    fn check(&self, inputs: usize, hidden: usize, name: &str) -> Result<(), LstmError> {
        if self.w.dim() != (4 * hidden, inputs) || self.u.dim() != (4 * hidden, hidden) || self.b.len() != 4 * hidden {
            return Err(LstmError::ShapeMismatch(format!(
                "{name}: expected w [{}x{inputs}], u [{}x{hidden}], b [{}]",
                4 * hidden,
                4 * hidden,
                4 * hidden
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TensorKind {
    Weight,
    Bias,
}

pub struct TensorRef<'a, F> {
    pub name: &'static str,
    pub kind: TensorKind,
    pub shape: Vec<usize>,
    pub data: &'a [F],
}

pub struct TensorMut<'a, F> {
    pub name: &'static str,
    pub kind: TensorKind,
    pub data: &'a mut [F],
}

/// Every weight and bias of the network: per-timestep input projection
/// (ReLU), two stacked LSTM layers, and the output layer on the final hidden
/// state. Gradients share the same layout.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamTree<F> {
    pub fc_in: Dense<F>,
    pub lstm1: LstmLayerParams<F>,
    pub lstm2: LstmLayerParams<F>,
    pub fc_out: Dense<F>,
}

pub type ModelParams<F> = ParamTree<F>;
pub type Gradients<F> = ParamTree<F>;

pub const TENSOR_NAMES: [&str; 10] = [
    "fc_in.weight",
    "fc_in.bias",
    "lstm1.w",
    "lstm1.u",
    "lstm1.b",
    "lstm2.w",
    "lstm2.u",
    "lstm2.b",
    "fc_out.weight",
    "fc_out.bias",
];

impl<F: Scalar> ParamTree<F> {
    pub fn zeros(dims: Dims) -> Self {
        let Dims {
            input,
            hidden,
            classes,
        } = dims;
        Self {
            fc_in: Dense::zeros(input, hidden),
            lstm1: LstmLayerParams::zeros(hidden, hidden),
            lstm2: LstmLayerParams::zeros(hidden, hidden),
            fc_out: Dense::zeros(hidden, classes),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.dims())
    }

    pub fn dims(&self) -> Dims {
        Dims {
            input: self.fc_in.weight.ncols(),
            hidden: self.fc_in.weight.nrows(),
            classes: self.fc_out.weight.nrows(),
        }
    }

    /// Checks every tensor against the dims implied by the layer sizes.
    pub fn validate(&self) -> Result<(), LstmError> {
        let d = self.dims();
        d.validate()?;
        if self.fc_in.bias.len() != d.hidden {
            return Err(LstmError::ShapeMismatch("fc_in.bias".into()));
        }
        self.lstm1.check(d.hidden, d.hidden, "lstm1")?;
        self.lstm2.check(d.hidden, d.hidden, "lstm2")?;
        if self.fc_out.weight.ncols() != d.hidden || self.fc_out.bias.len() != d.classes {
            return Err(LstmError::ShapeMismatch("fc_out".into()));
        }
        Ok(())
    }

    pub fn tensors(&self) -> [TensorRef<'_, F>; 10] {
        fn t<'a, F, D: ndarray::Dimension>(
            name: &'static str,
            kind: TensorKind,
            a: &'a ndarray::Array<F, D>,
        ) -> TensorRef<'a, F> {
            TensorRef {
                name,
                kind,
                shape: a.shape().to_vec(),
                data: a.as_slice().expect("standard layout"),
            }
        }
        use TensorKind::*;
        [
            t(TENSOR_NAMES[0], Weight, &self.fc_in.weight),
            t(TENSOR_NAMES[1], Bias, &self.fc_in.bias),
            t(TENSOR_NAMES[2], Weight, &self.lstm1.w),
            t(TENSOR_NAMES[3], Weight, &self.lstm1.u),
            t(TENSOR_NAMES[4], Bias, &self.lstm1.b),
            t(TENSOR_NAMES[5], Weight, &self.lstm2.w),
            t(TENSOR_NAMES[6], Weight, &self.lstm2.u),
            t(TENSOR_NAMES[7], Bias, &self.lstm2.b),
            t(TENSOR_NAMES[8], Weight, &self.fc_out.weight),
            t(TENSOR_NAMES[9], Bias, &self.fc_out.bias),
        ]
    }

    pub fn tensors_mut(&mut self) -> [TensorMut<'_, F>; 10] {
        fn t<'a, F, D: ndarray::Dimension>(
            name: &'static str,
            kind: TensorKind,
            a: &'a mut ndarray::Array<F, D>,
        ) -> TensorMut<'a, F> {
            TensorMut {
                name,
                kind,
                data: a.as_slice_mut().expect("standard layout"),
            }
        }
        use TensorKind::*;
        [
            t(TENSOR_NAMES[0], Weight, &mut self.fc_in.weight),
            t(TENSOR_NAMES[1], Bias, &mut self.fc_in.bias),
            t(TENSOR_NAMES[2], Weight, &mut self.lstm1.w),
            t(TENSOR_NAMES[3], Weight, &mut self.lstm1.u),
            t(TENSOR_NAMES[4], Bias, &mut self.lstm1.b),
            t(TENSOR_NAMES[5], Weight, &mut self.lstm2.w),
            t(TENSOR_NAMES[6], Weight, &mut self.lstm2.u),
            t(TENSOR_NAMES[7], Bias, &mut self.lstm2.b),
            t(TENSOR_NAMES[8], Weight, &mut self.fc_out.weight),
            t(TENSOR_NAMES[9], Bias, &mut self.fc_out.bias),
        ]
    }

    pub fn num_params(&self) -> usize {
        self.tensors().iter().map(|t| t.data.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.data.iter().all(|v| v.is_finite()))
    }

    /// Σ w² over weight matrices; biases are not penalized.
    pub fn weight_sq_sum(&self) -> F {
        self.tensors()
            .iter()
            .filter(|t| t.kind == TensorKind::Weight)
            .flat_map(|t| t.data.iter())
            .fold(F::zero(), |acc, &w| acc + w * w)
    }

    /// `self += other`, tensor by tensor.
    pub fn add_assign(&mut self, other: &Self) {
        for (dst, src) in self.tensors_mut().into_iter().zip(other.tensors()) {
            for (d, s) in dst.data.iter_mut().zip(src.data) {
                *d = *d + *s;
            }
        }
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.tensors()
            .iter()
            .zip(other.tensors().iter())
            .all(|(a, b)| a.shape == b.shape)
    }

    /// Euclidean norm over every entry.
    pub fn global_norm(&self) -> F {
        self.tensors()
            .iter()
            .flat_map(|t| t.data.iter())
            .fold(F::zero(), |acc, &v| acc + v * v)
            .sqrt()
    }

    pub fn scale(&mut self, k: F) {
        for t in self.tensors_mut() {
            for v in t.data.iter_mut() {
                *v = *v * k;
            }
        }
    }

    pub fn cast<G: Scalar>(&self) -> ParamTree<G> {
        let mut out = ParamTree::<G>::zeros(self.dims());
        for (dst, src) in out.tensors_mut().into_iter().zip(self.tensors()) {
            for (d, s) in dst.data.iter_mut().zip(src.data) {
                *d = G::of(s.as_f64());
            }
        }
        out
    }

    /// Order-sensitive digest of every parameter bit pattern.
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for t in self.tensors() {
            for v in t.data {
                h ^= v.bits_u64();
                h = h.wrapping_mul(0x0100_0000_01b3).rotate_left(5);
            }
        }
        h
    }
}

/// Glorot-uniform bound for a `fan_in -> fan_out` map.
pub fn glorot_bound(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

/// Weights from `U(-b, b)` with `b = sqrt(6 / (fan_in + fan_out))` per gate
/// block; biases zero except the LSTM forget gates, which start at 1.
pub fn init_params<F: Scalar>(seed: u64, dims: Dims) -> Result<ModelParams<F>, LstmError> {
    dims.validate()?;
    let mut p = ParamTree::<F>::zeros(dims);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = dims.hidden;
    let bounds = [
        glorot_bound(dims.input, h),
        0.0,
        glorot_bound(h, h),
        glorot_bound(h, h),
        0.0,
        glorot_bound(h, h),
        glorot_bound(h, h),
        0.0,
        glorot_bound(h, dims.classes),
        0.0,
    ];
    for (t, bound) in p.tensors_mut().into_iter().zip(bounds) {
        if t.kind == TensorKind::Bias {
            continue;
        }
        for v in t.data.iter_mut() {
            let u: f64 = rng.gen();
            *v = F::of((2.0 * u - 1.0) * bound);
        }
    }
    p.lstm1.gate_bias_mut(Gate::Forget).fill(F::one());
    p.lstm2.gate_bias_mut(Gate::Forget).fill(F::one());
    Ok(p)
}
