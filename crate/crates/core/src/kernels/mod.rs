//! Layer kernels.
//!
//! [`int`] holds the shift-only fixed-point kernels, [`float`] the reference
//! float kernels, and [`shape`] the data-movement ops shared by both.
//! Tensors are channels-last: convolutions take `[H, W, C]` inputs and
//! `[KH, KW, C / groups, C_out]` weights; dense layers take `[.., K]` inputs
//! and `[K, N]` weights.

pub mod float;
pub mod int;
pub mod shape;

use crate::error::{shape_err, KernelError};

/// Knobs that may change speed but never results.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ExecOptions {
    /// Use the lane-blocked accumulation paths in integer kernels.
    pub simd: bool,
}

impl Default for ExecOptions {
    fn default() -> Self {
        ExecOptions { simd: true }
    }
}

/// Number of lanes used by the blocked integer paths.
pub const LANES: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Padding {
    #[default]
    Same,
    Valid,
}

impl Padding {
    pub fn code(self) -> u8 {
        match self {
            Padding::Same => 0,
            Padding::Valid => 1,
        }
    }

    pub fn from_code(c: u8) -> Option<Self> {
        match c {
            0 => Some(Padding::Same),
            1 => Some(Padding::Valid),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvParams {
    pub stride: usize,
    pub groups: usize,
    pub padding: Padding,
}

impl Default for ConvParams {
    fn default() -> Self {
        ConvParams {
            stride: 1,
            groups: 1,
            padding: Padding::Same,
        }
    }
}

/// Resolved geometry of a 2-D convolution over an `[H, W, C]` input.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvGeometry {
    pub in_h: usize,
    pub in_w: usize,
    pub in_c: usize,
    pub k_h: usize,
    pub k_w: usize,
    pub out_c: usize,
    pub groups: usize,
    pub stride: usize,
    pub pad_top: usize,
    pub pad_left: usize,
    pub out_h: usize,
    pub out_w: usize,
}

fn same_out(input: usize, k: usize, stride: usize) -> (usize, usize) {
    let out = input.div_ceil(stride);
    let total = ((out - 1) * stride + k).saturating_sub(input);
    (out, total / 2)
}

impl ConvGeometry {
    pub fn conv(input: &[usize], weights: &[usize], p: ConvParams) -> Result<Self, KernelError> {
        let [in_h, in_w, in_c] = *input else {
            return Err(shape_err(format!("conv input must be [H, W, C], got {input:?}")));
        };
        let [k_h, k_w, cin_g, out_c] = *weights else {
            return Err(shape_err(format!("conv weights must be [KH, KW, Cin/g, Cout], got {weights:?}")));
        };
        if p.stride != 1 && p.stride != 2 {
            return Err(KernelError::UnsupportedStride(p.stride));
        }
        let g = p.groups;
        if g == 0 || in_c % g != 0 || out_c % g != 0 || in_c / g != cin_g {
            return Err(shape_err(format!(
                "groups {g} incompatible with Cin {in_c}, Cout {out_c}, kernel depth {cin_g}"
            )));
        }
        let ((out_h, pad_top), (out_w, pad_left)) = match p.padding {
            Padding::Same => (same_out(in_h, k_h, p.stride), same_out(in_w, k_w, p.stride)),
            Padding::Valid => {
                if in_h < k_h || in_w < k_w {
                    return Err(shape_err(format!(
                        "kernel {k_h}x{k_w} larger than input {in_h}x{in_w}"
                    )));
                }
                (
                    ((in_h - k_h) / p.stride + 1, 0),
                    ((in_w - k_w) / p.stride + 1, 0),
                )
            }
        };
        Ok(ConvGeometry {
            in_h,
            in_w,
            in_c,
            k_h,
            k_w,
            out_c,
            groups: g,
            stride: p.stride,
            pad_top,
            pad_left,
            out_h,
            out_w,
        })
    }

    /// Geometry of a transposed convolution; `out_*` is the upsampled size.
    pub fn conv_transpose(input: &[usize], weights: &[usize], p: ConvParams) -> Result<Self, KernelError> {
        let [in_h, in_w, in_c] = *input else {
            return Err(shape_err(format!("conv input must be [H, W, C], got {input:?}")));
        };
        let [k_h, k_w, w_in, out_c] = *weights else {
            return Err(shape_err(format!("conv weights must be [KH, KW, Cin, Cout], got {weights:?}")));
        };
        if p.stride != 1 && p.stride != 2 {
            return Err(KernelError::UnsupportedStride(p.stride));
        }
        if p.groups != 1 {
            return Err(KernelError::Attribute("transposed convolution supports groups = 1 only".into()));
        }
        if w_in != in_c {
            return Err(shape_err(format!("kernel depth {w_in} != input channels {in_c}")));
        }
        let s = p.stride;
        let ((out_h, pad_top), (out_w, pad_left)) = match p.padding {
            Padding::Same => {
                let pad = |i: usize, k: usize| ((i - 1) * s + k).saturating_sub(i * s) / 2;
                ((in_h * s, pad(in_h, k_h)), (in_w * s, pad(in_w, k_w)))
            }
            Padding::Valid => (((in_h - 1) * s + k_h, 0), ((in_w - 1) * s + k_w, 0)),
        };
        Ok(ConvGeometry {
            in_h,
            in_w,
            in_c,
            k_h,
            k_w,
            out_c,
            groups: 1,
            stride: s,
            pad_top,
            pad_left,
            out_h,
            out_w,
        })
    }

    pub fn out_dims(&self) -> Vec<usize> {
        vec![self.out_h, self.out_w, self.out_c]
    }

    pub fn cin_per_group(&self) -> usize {
        self.in_c / self.groups
    }

    pub fn cout_per_group(&self) -> usize {
        self.out_c / self.groups
    }

    /// Multiply-accumulates of the direct convolution, padded taps included.
    pub fn macs(&self) -> u64 {
        (self.out_h * self.out_w * self.out_c * self.cin_per_group() * self.k_h * self.k_w) as u64
    }

    /// Multiply-accumulates of the transposed convolution (one per input tap).
    pub fn transpose_macs(&self) -> u64 {
        (self.in_h * self.in_w * self.in_c * self.out_c * self.k_h * self.k_w) as u64
    }

    /// Input row/column for an output position and kernel tap, if inside.
    #[inline]
    pub(crate) fn input_pos(&self, oy: usize, ox: usize, ky: usize, kx: usize) -> Option<(usize, usize)> {
        let iy = (oy * self.stride + ky).checked_sub(self.pad_top)?;
        let ix = (ox * self.stride + kx).checked_sub(self.pad_left)?;
        (iy < self.in_h && ix < self.in_w).then_some((iy, ix))
    }

    /// Output row/column reached by an input position and tap (transposed conv).
    #[inline]
    pub(crate) fn output_pos(&self, iy: usize, ix: usize, ky: usize, kx: usize) -> Option<(usize, usize)> {
        let oy = (iy * self.stride + ky).checked_sub(self.pad_top)?;
        let ox = (ix * self.stride + kx).checked_sub(self.pad_left)?;
        (oy < self.out_h && ox < self.out_w).then_some((oy, ox))
    }
}

/// How an operand maps onto the output of an elementwise binary op.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Broadcast {
    Same,
    /// Operand is one value per channel (last dimension).
    Channel(usize),
    Scalar,
}

impl Broadcast {
    #[inline]
    pub(crate) fn index(self, i: usize) -> usize {
        match self {
            Broadcast::Same => i,
            Broadcast::Channel(c) => i % c,
            Broadcast::Scalar => 0,
        }
    }
}

fn broadcast_onto(out: &[usize], operand: &[usize]) -> Option<Broadcast> {
    let n: usize = operand.iter().product();
    if out == operand {
        Some(Broadcast::Same)
    } else if n == 1 {
        Some(Broadcast::Scalar)
    } else if out.last() == Some(&n) && operand.last() == Some(&n) {
        Some(Broadcast::Channel(n))
    } else {
        None
    }
}

/// Output dims and operand mappings for a binary elementwise op.
pub(crate) fn broadcast_binary(
    a: &[usize],
    b: &[usize],
) -> Result<(Vec<usize>, Broadcast, Broadcast), KernelError> {
    let na: usize = a.iter().product();
    let nb: usize = b.iter().product();
    let out = if na >= nb { a } else { b };
    match (broadcast_onto(out, a), broadcast_onto(out, b)) {
        (Some(ba), Some(bb)) => Ok((out.to_vec(), ba, bb)),
        _ => Err(shape_err(format!("cannot broadcast {a:?} with {b:?}"))),
    }
}

/// `[.., K] x [K, N] -> [.., N]`; returns (rows, K, N, output dims).
pub(crate) fn matmul_dims(x: &[usize], w: &[usize]) -> Result<(usize, usize, usize, Vec<usize>), KernelError> {
    let (&k, lead) = x
        .split_last()
        .ok_or_else(|| shape_err("matmul input has rank 0"))?;
    let [wk, n] = *w else {
        return Err(shape_err(format!("matmul weights must be [K, N], got {w:?}")));
    };
    if wk != k {
        return Err(shape_err(format!("inner dims differ: input {x:?}, weights {w:?}")));
    }
    let rows = lead.iter().product();
    let mut out = lead.to_vec();
    out.push(n);
    Ok((rows, k, n, out))
}

/// Resolves the concat axis and checks that all other dims agree.
pub(crate) fn concat_dims(parts: &[&[usize]], axis: i64) -> Result<(usize, Vec<usize>), KernelError> {
    let first = parts.first().ok_or_else(|| shape_err("concat of zero tensors"))?;
    let rank = first.len() as i64;
    let ax = if axis < 0 { axis + rank } else { axis };
    if ax < 0 || ax >= rank {
        return Err(KernelError::Attribute(format!("concat axis {axis} out of range for rank {rank}")));
    }
    let ax = ax as usize;
    let mut out = first.to_vec();
    out[ax] = 0;
    for p in parts {
        if p.len() != first.len()
            || p.iter().zip(first.iter()).enumerate().any(|(i, (a, b))| i != ax && a != b)
        {
            return Err(shape_err(format!("concat parts {first:?} and {p:?} differ off-axis")));
        }
        out[ax] += p[ax];
    }
    Ok((ax, out))
}
