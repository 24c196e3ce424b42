//! Network input and output scaling.
//!
//! The context residual `x - mu` is scaled by `rho = 2^(8-b)` for float
//! networks. Integer networks take the same real values at their input
//! quantizer `Q_in`, i.e. integers scaled by `2^(Q_in - b + 8)`.

use std::ops::Range;

use qnn_core::quantize::default_input_q;
use qnn_core::{clip, with_tensor, ElementWidth, Graph, Tensor, TypedTensor};

use super::context::IntraContext;
use crate::error::CodecError;
use crate::plane::clamp_sample;
use crate::{shift_round, SamplePlane};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Numeric {
    Float,
    Int { width: ElementWidth, q_in: u32 },
}

impl Numeric {
    /// Integer arithmetic at the default input quantizer for `width`.
    pub fn int(width: ElementWidth) -> Self {
        Numeric::Int { width, q_in: default_input_q(width) }
    }

    /// The representation a graph expects on its first input.
    pub fn of(g: &Graph) -> Self {
        match g.width() {
            ElementWidth::Float32 => Numeric::Float,
            width => Numeric::Int { width, q_in: g.inputs().first().map_or(default_input_q(width), |d| d.q) },
        }
    }
}

/// Flattens the context into the network input vector.
pub fn preprocess(ctx: &IntraContext, numeric: Numeric) -> Tensor {
    let b = ctx.bit_depth as i32;
    let residuals = ctx.cells().map(|i| if ctx.available[i] { (ctx.samples[i] - ctx.mu) as i64 } else { 0 });
    match numeric {
        Numeric::Float => {
            let rho = ((8 - b) as f32).exp2();
            Tensor::F32(TypedTensor::from_vec(residuals.map(|r| r as f32 * rho).collect(), 0))
        }
        Numeric::Int { width, q_in } => {
            let k = b - 8 - q_in as i32;
            let data: Vec<i64> = residuals.map(|r| clip(shift_round(r, k) as i128, width) as i64).collect();
            Tensor::from_raw(vec![data.len()], &data, q_in, width).expect("integer width")
        }
    }
}

/// Reshapes the network output to `h x w`, undoes the scaling, adds `mu`
/// and clips to the sample range. Integer outputs are read at their own
/// quantizer and rounded to the nearest sample.
pub fn postprocess(y: &Tensor, mu: i32, bit_depth: u32, h: usize, w: usize) -> Result<SamplePlane, CodecError> {
    if y.len() != h * w {
        return Err(CodecError::ShapeMismatch { expected: h * w, actual: y.len() });
    }
    let b = bit_depth as i32;
    let data: Vec<u16> = match y {
        Tensor::F32(t) => {
            let inv = ((b - 8) as f64).exp2();
            t.data().iter().map(|&v| clamp_sample((v as f64 * inv + mu as f64).round() as i64, bit_depth)).collect()
        }
        other => {
            let k = other.q() as i32 + 8 - b;
            other.to_i64_vec().into_iter().map(|v| clamp_sample(shift_round(v, k) + mu as i64, bit_depth)).collect()
        }
    };
    SamplePlane::new(w, h, data)
}

/// Copies `range` of a tensor's values into a rank-1 tensor.
pub(crate) fn slice(t: &Tensor, range: Range<usize>) -> Tensor {
    let n = range.len();
    with_tensor!(t, x => TypedTensor::new(vec![n], x.q(), x.data()[range].to_vec()).expect("length matches").into())
}
