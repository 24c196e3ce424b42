//! Shift-only fixed-point kernels.
//!
//! Every kernel follows the quantizer table below, with `C(.)` the symmetric
//! clip of the storage width and `>>` an arithmetic (flooring) shift:
//!
//! | op              | value                                   | output q     |
//! |-----------------|-----------------------------------------|--------------|
//! | BiasAdd         | `C((x0 >> (q0-q1)) + x1)`               | `q1`         |
//! | Add             | `C((x0 >> (q0-q)) + (x1 >> (q1-q)))`    | `min(q0,q1)` |
//! | Mul/MatMul/Conv | `C(sum(x0*x1) >> (q1+qi))`              | `q0-qi`      |
//! | Concat          | `xk >> (qk-q)`                          | `min(qk)`    |
//! | LeakyReLU       | `x<0 ? (a*x) >> qa : x`                 | `q0`         |
//! | Maximum         | `max(x0, C(x1 << (q0-q1)))`             | `q0`         |
//!
//! Sums of products are formed in `T::Acc`, which is wide enough that no
//! supported layer size can wrap, so the result equals the exact integer
//! formula.

use super::{
    broadcast_binary, concat_dims, matmul_dims, Broadcast, ConvGeometry, ConvParams, ExecOptions,
    LANES,
};
use crate::error::{shape_err, KernelError};
use crate::quantize::choose_shift;
use crate::scalar::QInt;
use num_traits::Zero;
use crate::tensor::{quantize_float, TypedTensor};

type Result<T> = std::result::Result<T, KernelError>;

fn check_order(q0: u32, q1: u32) -> Result<u32> {
    q0.checked_sub(q1).ok_or(KernelError::QuantizerOrder { q0, q1 })
}

/// BiasAdd; `x1` broadcasts over the last dimension of `x0`.
pub fn bias_add_q<T: QInt>(x0: &TypedTensor<T>, x1: &TypedTensor<T>) -> Result<TypedTensor<T>> {
    let shift = check_order(x0.q(), x1.q())?;
    let (dims, b0, b1) = broadcast_binary(x0.dims(), x1.dims())?;
    if b0 != Broadcast::Same {
        return Err(shape_err(format!(
            "bias {:?} larger than input {:?}",
            x1.dims(),
            x0.dims()
        )));
    }
    let bias = x1.data();
    let data = x0
        .data()
        .iter()
        .enumerate()
        .map(|(i, &x)| T::clip_acc(T::shr_acc(x.widen(), shift) + bias[b1.index(i)].widen()))
        .collect();
    Ok(TypedTensor::new(dims, x1.q(), data)?)
}

pub fn add_q<T: QInt>(x0: &TypedTensor<T>, x1: &TypedTensor<T>) -> Result<TypedTensor<T>> {
    let q = x0.q().min(x1.q());
    let (s0, s1) = (x0.q() - q, x1.q() - q);
    let (dims, b0, b1) = broadcast_binary(x0.dims(), x1.dims())?;
    let n: usize = dims.iter().product();
    let (a, b) = (x0.data(), x1.data());
    let data = (0..n)
        .map(|i| {
            T::clip_acc(T::shr_acc(a[b0.index(i)].widen(), s0) + T::shr_acc(b[b1.index(i)].widen(), s1))
        })
        .collect();
    Ok(TypedTensor::new(dims, q, data)?)
}

/// Elementwise Mul: the one-term case of the MatMul rule.
pub fn mul_q<T: QInt>(x0: &TypedTensor<T>, x1: &TypedTensor<T>, q_i: u32) -> Result<TypedTensor<T>> {
    let q = check_order(x0.q(), q_i)?;
    let shift = x1.q() + q_i;
    let (dims, b0, b1) = broadcast_binary(x0.dims(), x1.dims())?;
    let n: usize = dims.iter().product();
    let (a, b) = (x0.data(), x1.data());
    let data = (0..n)
        .map(|i| T::clip_acc(T::shr_acc(a[b0.index(i)].widen() * b[b1.index(i)].widen(), shift)))
        .collect();
    Ok(TypedTensor::new(dims, q, data)?)
}

#[inline]
fn axpy<T: QInt>(acc: &mut [T::Acc], x: T::Acc, w: &[T]) {
    for (a, &wv) in acc.iter_mut().zip(w) {
        *a += x * wv.widen();
    }
}

/// Dense layer: `[.., K] x [K, N]`.
pub fn matmul_q<T: QInt>(
    x: &TypedTensor<T>,
    w: &TypedTensor<T>,
    q_i: u32,
    opts: ExecOptions,
) -> Result<TypedTensor<T>> {
    let q = check_order(x.q(), q_i)?;
    let (rows, k, n, dims) = matmul_dims(x.dims(), w.dims())?;
    let shift = w.q() + q_i;
    let (xd, wd) = (x.data(), w.data());
    let mut out = Vec::with_capacity(rows * n);
    let mut acc = vec![T::Acc::zero(); n];
    let mut block = vec![T::Acc::zero(); n];
    for r in 0..rows {
        let xr = &xd[r * k..(r + 1) * k];
        acc.iter_mut().for_each(|a| *a = T::Acc::zero());
        if opts.simd {
            // Partial sums over blocks of LANES inputs, then folded in.
            for (kb, xs) in xr.chunks(LANES).enumerate() {
                block.iter_mut().for_each(|a| *a = T::Acc::zero());
                for (j, &xv) in xs.iter().enumerate() {
                    if !xv.is_zero() {
                        let kk = kb * LANES + j;
                        axpy(&mut block, xv.widen(), &wd[kk * n..(kk + 1) * n]);
                    }
                }
                for (a, &b) in acc.iter_mut().zip(&block) {
                    *a += b;
                }
            }
        } else {
            for (kk, &xv) in xr.iter().enumerate() {
                axpy(&mut acc, xv.widen(), &wd[kk * n..(kk + 1) * n]);
            }
        }
        out.extend(acc.iter().map(|&a| T::clip_acc(T::shr_acc(a, shift))));
    }
    Ok(TypedTensor::new(dims, q, out)?)
}

/// Direct 2-D convolution, channels-last.
pub fn conv2d_q<T: QInt>(
    x: &TypedTensor<T>,
    w: &TypedTensor<T>,
    params: ConvParams,
    q_i: u32,
) -> Result<TypedTensor<T>> {
    let q = check_order(x.q(), q_i)?;
    let g = ConvGeometry::conv(x.dims(), w.dims(), params)?;
    let shift = w.q() + q_i;
    let (cin_g, cout_g) = (g.cin_per_group(), g.cout_per_group());
    let (xd, wd) = (x.data(), w.data());
    let mut out = Vec::with_capacity(g.out_h * g.out_w * g.out_c);
    let mut acc = vec![T::Acc::zero(); g.out_c];
    for oy in 0..g.out_h {
        for ox in 0..g.out_w {
            acc.iter_mut().for_each(|a| *a = T::Acc::zero());
            for ky in 0..g.k_h {
                for kx in 0..g.k_w {
                    let Some((iy, ix)) = g.input_pos(oy, ox, ky, kx) else {
                        continue;
                    };
                    let xbase = (iy * g.in_w + ix) * g.in_c;
                    let wbase = (ky * g.k_w + kx) * cin_g * g.out_c;
                    for grp in 0..g.groups {
                        let oc = grp * cout_g..(grp + 1) * cout_g;
                        for icl in 0..cin_g {
                            let xv = xd[xbase + grp * cin_g + icl];
                            if xv.is_zero() {
                                continue;
                            }
                            let wrow = wbase + icl * g.out_c;
                            axpy(&mut acc[oc.clone()], xv.widen(), &wd[wrow + oc.start..wrow + oc.end]);
                        }
                    }
                }
            }
            out.extend(acc.iter().map(|&a| T::clip_acc(T::shr_acc(a, shift))));
        }
    }
    Ok(TypedTensor::new(g.out_dims(), q, out)?)
}

/// Transposed 2-D convolution (upsampling by the stride).
pub fn conv2d_transpose_q<T: QInt>(
    x: &TypedTensor<T>,
    w: &TypedTensor<T>,
    params: ConvParams,
    q_i: u32,
) -> Result<TypedTensor<T>> {
    let q = check_order(x.q(), q_i)?;
    let g = ConvGeometry::conv_transpose(x.dims(), w.dims(), params)?;
    let shift = w.q() + q_i;
    let (xd, wd) = (x.data(), w.data());
    let mut acc = vec![T::Acc::zero(); g.out_h * g.out_w * g.out_c];
    for iy in 0..g.in_h {
        for ix in 0..g.in_w {
            for ky in 0..g.k_h {
                for kx in 0..g.k_w {
                    let Some((oy, ox)) = g.output_pos(iy, ix, ky, kx) else {
                        continue;
                    };
                    let obase = (oy * g.out_w + ox) * g.out_c;
                    for ic in 0..g.in_c {
                        let xv = xd[(iy * g.in_w + ix) * g.in_c + ic];
                        let wrow = ((ky * g.k_w + kx) * g.in_c + ic) * g.out_c;
                        axpy(&mut acc[obase..obase + g.out_c], xv.widen(), &wd[wrow..wrow + g.out_c]);
                    }
                }
            }
        }
    }
    let out = acc.into_iter().map(|a| T::clip_acc(T::shr_acc(a, shift))).collect();
    Ok(TypedTensor::new(g.out_dims(), q, out)?)
}

/// Concatenation along `axis` (negative counts from the end).
pub fn concat_q<T: QInt>(parts: &[&TypedTensor<T>], axis: i64) -> Result<TypedTensor<T>> {
    let dims: Vec<&[usize]> = parts.iter().map(|p| p.dims()).collect();
    let (ax, out_dims) = concat_dims(&dims, axis)?;
    let q = parts.iter().map(|p| p.q()).min().unwrap_or(0);
    let outer: usize = out_dims[..ax].iter().product();
    let inner: usize = out_dims[ax + 1..].iter().product();
    let mut out = Vec::with_capacity(out_dims.iter().product());
    for o in 0..outer {
        for p in parts {
            let chunk = p.dims()[ax] * inner;
            let shift = p.q() - q;
            out.extend(
                p.data()[o * chunk..(o + 1) * chunk]
                    .iter()
                    .map(|&v| T::clip_acc(T::shr_acc(v.widen(), shift))),
            );
        }
    }
    Ok(TypedTensor::new(out_dims, q, out)?)
}

/// Integer slope and its quantizer: the largest shift that still fits `|a|`.
pub fn slope_quantizer<T: QInt>(alpha: f32) -> Result<(T, u32)> {
    if !(alpha.abs() < 1.0) {
        return Err(KernelError::SlopeOutOfRange(alpha));
    }
    let q = choose_shift(alpha.abs() as f64, T::WIDTH);
    let a = quantize_float(alpha as f64, q, T::WIDTH);
    Ok((T::from_i64_saturating(a), q))
}

pub fn leaky_relu_q<T: QInt>(x: &TypedTensor<T>, alpha: f32) -> Result<TypedTensor<T>> {
    let (a, qa) = slope_quantizer::<T>(alpha)?;
    let a = a.widen();
    let data = x
        .data()
        .iter()
        .map(|&v| {
            if v < T::zero() {
                T::clip_acc(T::shr_acc(a * v.widen(), qa))
            } else {
                v
            }
        })
        .collect();
    Ok(TypedTensor::new(x.dims().to_vec(), x.q(), data)?)
}

/// PReLU with a per-channel (or scalar) slope tensor carrying its own quantizer.
pub fn prelu_q<T: QInt>(x: &TypedTensor<T>, slope: &TypedTensor<T>) -> Result<TypedTensor<T>> {
    let (dims, bx, bs) = broadcast_binary(x.dims(), slope.dims())?;
    if bx != Broadcast::Same {
        return Err(shape_err(format!("PReLU slope {:?} larger than input {:?}", slope.dims(), x.dims())));
    }
    let qs = slope.q();
    let s = slope.data();
    let data = x
        .data()
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            if v < T::zero() {
                T::clip_acc(T::shr_acc(s[bs.index(i)].widen() * v.widen(), qs))
            } else {
                v
            }
        })
        .collect();
    Ok(TypedTensor::new(dims, x.q(), data)?)
}

pub fn maximum_q<T: QInt>(x0: &TypedTensor<T>, x1: &TypedTensor<T>) -> Result<TypedTensor<T>> {
    let shift = check_order(x0.q(), x1.q())?;
    let (dims, b0, b1) = broadcast_binary(x0.dims(), x1.dims())?;
    let n: usize = dims.iter().product();
    let (a, b) = (x0.data(), x1.data());
    let data = (0..n)
        .map(|i| a[b0.index(i)].max(T::shl_clip(b[b1.index(i)], shift)))
        .collect();
    Ok(TypedTensor::new(dims, x0.q(), data)?)
}
