//! Floating-point abstraction so the network runs in either 32- or 64-bit.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use ndarray::{LinalgScalar, ScalarOperand};
use num_traits::{Float, FromPrimitive};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    #[default]
    F32,
    F64,
}

impl Precision {
    pub fn bits(self) -> u32 {
        match self {
            Precision::F32 => 32,
            Precision::F64 => 64,
        }
    }

    pub fn from_bits(bits: u32) -> Option<Self> {
        match bits {
            32 => Some(Precision::F32),
            64 => Some(Precision::F64),
            _ => None,
        }
    }
}

pub trait Scalar:
    Float
    + LinalgScalar
    + ScalarOperand
    + FromPrimitive
    + std::ops::AddAssign
    + std::ops::SubAssign
    + std::ops::MulAssign
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    const PRECISION: Precision;
    const BYTES: usize;

    fn write_le(self, out: &mut Vec<u8>);
    fn read_le(bytes: &[u8]) -> Self;
    fn bits_u64(self) -> u64;

    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("finite conversion")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("float to f64")
    }

    fn sigmoid(self) -> Self {
        Self::one() / (Self::one() + (-self).exp())
    }

    /// Hyperbolic tangent used by the network. Defaults to [`Float::tanh`].
    fn fast_tanh(self) -> Self {
        self.tanh()
    }

    fn sigmoid_slice(xs: &mut [Self]) {
        for x in xs {
            *x = x.sigmoid();
        }
    }

    fn tanh_slice(xs: &mut [Self]) {
        for x in xs {
            *x = x.fast_tanh();
        }
    }
}

// Branch-free single-precision kernels. Written so that loops over slices
// auto-vectorize; accurate to a few ulp.

#[inline(always)]
fn exp_f32(x: f32) -> f32 {
    const LOG2E: f32 = std::f32::consts::LOG2_E;
    const C1: f32 = 0.693_359_4;
    const C2: f32 = -2.121_944_4e-4;
    const ROUND: f32 = 12_582_912.0; // 1.5 * 2^23
    let x = x.clamp(-87.0, 88.0);
    let n = (x * LOG2E + ROUND) - ROUND;
    let r = x - n * C1 - n * C2;
    let mut p = 1.987_569_1e-4f32;
    p = p * r + 1.398_199_9e-3;
    p = p * r + 8.333_452e-3;
    p = p * r + 4.166_579_6e-2;
    p = p * r + 1.666_666_5e-1;
    p = p * r + 5.000_000_1e-1;
    let y = p * r * r + r + 1.0;
    y * f32::from_bits(((n as i32 + 127) as u32) << 23)
}

#[inline(always)]
fn sigmoid_f32(x: f32) -> f32 {
    1.0 / (1.0 + exp_f32(-x))
}

#[inline(always)]
fn tanh_f32(x: f32) -> f32 {
    // odd series near zero, where 1 - 2/(e^2x + 1) cancels
    let x2 = x * x;
    let mut q = 21_844.0 / 6_081_075.0f32;
    q = q * x2 - 1_382.0 / 155_925.0;
    q = q * x2 + 62.0 / 2_835.0;
    q = q * x2 - 17.0 / 315.0;
    q = q * x2 + 2.0 / 15.0;
    q = q * x2 - 1.0 / 3.0;
    let series = x + x * x2 * q;
    let wide = 1.0 - 2.0 / (exp_f32(2.0 * x) + 1.0);
    let out = if x.abs() < 0.4 { series } else { wide };
    if x.is_nan() {
        x
    } else {
        out
    }
}

impl Scalar for f32 {
    const PRECISION: Precision = Precision::F32;
    const BYTES: usize = 4;

    fn write_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }

    fn read_le(bytes: &[u8]) -> Self {
        f32::from_le_bytes(bytes.try_into().expect("4 bytes"))
    }

    fn bits_u64(self) -> u64 {
        self.to_bits() as u64
    }

    fn sigmoid(self) -> Self {
        sigmoid_f32(self)
    }

    fn fast_tanh(self) -> Self {
        tanh_f32(self)
    }

    fn sigmoid_slice(xs: &mut [Self]) {
        for x in xs {
            *x = sigmoid_f32(*x);
        }
    }

    fn tanh_slice(xs: &mut [Self]) {
        for x in xs {
            *x = tanh_f32(*x);
        }
    }
}

impl Scalar for f64 {
    const PRECISION: Precision = Precision::F64;
    const BYTES: usize = 8;

    fn write_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }

    fn read_le(bytes: &[u8]) -> Self {
        f64::from_le_bytes(bytes.try_into().expect("8 bytes"))
    }

    fn bits_u64(self) -> u64 {
        self.to_bits()
    }
}
