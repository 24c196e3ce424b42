//! Floating-point reference kernels.
//!
//! Same layouts and broadcasting as the integer kernels; sums accumulate
//! left to right.

use super::{broadcast_binary, concat_dims, matmul_dims, Broadcast, ConvGeometry, ConvParams};
use crate::error::{shape_err, KernelError};
use crate::scalar::Real;
use crate::tensor::TypedTensor;

type Result<T> = std::result::Result<T, KernelError>;

fn binary<F: Real>(
    x0: &TypedTensor<F>,
    x1: &TypedTensor<F>,
    op: impl Fn(F, F) -> F,
) -> Result<TypedTensor<F>> {
    let (dims, b0, b1) = broadcast_binary(x0.dims(), x1.dims())?;
    let n: usize = dims.iter().product();
    let (a, b) = (x0.data(), x1.data());
    let data = (0..n).map(|i| op(a[b0.index(i)], b[b1.index(i)])).collect();
    Ok(TypedTensor::new(dims, 0, data)?)
}

pub fn bias_add<F: Real>(x0: &TypedTensor<F>, x1: &TypedTensor<F>) -> Result<TypedTensor<F>> {
    let (_, b0, _) = broadcast_binary(x0.dims(), x1.dims())?;
    if b0 != Broadcast::Same {
        return Err(shape_err(format!("bias {:?} larger than input {:?}", x1.dims(), x0.dims())));
    }
    binary(x0, x1, |a, b| a + b)
}

pub fn add<F: Real>(x0: &TypedTensor<F>, x1: &TypedTensor<F>) -> Result<TypedTensor<F>> {
    binary(x0, x1, |a, b| a + b)
}

pub fn mul<F: Real>(x0: &TypedTensor<F>, x1: &TypedTensor<F>) -> Result<TypedTensor<F>> {
    binary(x0, x1, |a, b| a * b)
}

pub fn maximum<F: Real>(x0: &TypedTensor<F>, x1: &TypedTensor<F>) -> Result<TypedTensor<F>> {
    binary(x0, x1, |a, b| a.max(b))
}

pub fn matmul<F: Real>(x: &TypedTensor<F>, w: &TypedTensor<F>) -> Result<TypedTensor<F>> {
    let (rows, k, n, dims) = matmul_dims(x.dims(), w.dims())?;
    let (xd, wd) = (x.data(), w.data());
    let mut out = vec![F::zero(); rows * n];
    for r in 0..rows {
        let acc = &mut out[r * n..(r + 1) * n];
        for kk in 0..k {
            let xv = xd[r * k + kk];
            for (a, &wv) in acc.iter_mut().zip(&wd[kk * n..(kk + 1) * n]) {
                *a = *a + xv * wv;
            }
        }
    }
    Ok(TypedTensor::new(dims, 0, out)?)
}

pub fn conv2d<F: Real>(x: &TypedTensor<F>, w: &TypedTensor<F>, params: ConvParams) -> Result<TypedTensor<F>> {
    let g = ConvGeometry::conv(x.dims(), w.dims(), params)?;
    let (cin_g, cout_g) = (g.cin_per_group(), g.cout_per_group());
    let (xd, wd) = (x.data(), w.data());
    let mut out = vec![F::zero(); g.out_h * g.out_w * g.out_c];
    for oy in 0..g.out_h {
        for ox in 0..g.out_w {
            let obase = (oy * g.out_w + ox) * g.out_c;
            for ky in 0..g.k_h {
                for kx in 0..g.k_w {
                    let Some((iy, ix)) = g.input_pos(oy, ox, ky, kx) else {
                        continue;
                    };
                    let xbase = (iy * g.in_w + ix) * g.in_c;
                    let wbase = (ky * g.k_w + kx) * cin_g * g.out_c;
                    for grp in 0..g.groups {
                        for icl in 0..cin_g {
                            let xv = xd[xbase + grp * cin_g + icl];
                            let wrow = wbase + icl * g.out_c;
                            for oc in grp * cout_g..(grp + 1) * cout_g {
                                out[obase + oc] = out[obase + oc] + xv * wd[wrow + oc];
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(TypedTensor::new(g.out_dims(), 0, out)?)
}

pub fn conv2d_transpose<F: Real>(
    x: &TypedTensor<F>,
    w: &TypedTensor<F>,
    params: ConvParams,
) -> Result<TypedTensor<F>> {
    let g = ConvGeometry::conv_transpose(x.dims(), w.dims(), params)?;
    let (xd, wd) = (x.data(), w.data());
    let mut out = vec![F::zero(); g.out_h * g.out_w * g.out_c];
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
                        for oc in 0..g.out_c {
                            out[obase + oc] = out[obase + oc] + xv * wd[wrow + oc];
                        }
                    }
                }
            }
        }
    }
    Ok(TypedTensor::new(g.out_dims(), 0, out)?)
}

pub fn concat<F: Real>(parts: &[&TypedTensor<F>], axis: i64) -> Result<TypedTensor<F>> {
    let dims: Vec<&[usize]> = parts.iter().map(|p| p.dims()).collect();
    let (ax, out_dims) = concat_dims(&dims, axis)?;
    let outer: usize = out_dims[..ax].iter().product();
    let inner: usize = out_dims[ax + 1..].iter().product();
    let mut out = Vec::with_capacity(out_dims.iter().product());
    for o in 0..outer {
        for p in parts {
            let chunk = p.dims()[ax] * inner;
            out.extend_from_slice(&p.data()[o * chunk..(o + 1) * chunk]);
        }
    }
    Ok(TypedTensor::new(out_dims, 0, out)?)
}

pub fn leaky_relu<F: Real>(x: &TypedTensor<F>, alpha: f32) -> Result<TypedTensor<F>> {
    let a = F::from_f32(alpha).unwrap_or_else(F::zero);
    let data = x
        .data()
        .iter()
        .map(|&v| if v < F::zero() { a * v } else { v })
        .collect();
    Ok(TypedTensor::new(x.dims().to_vec(), 0, data)?)
}

pub fn prelu<F: Real>(x: &TypedTensor<F>, slope: &TypedTensor<F>) -> Result<TypedTensor<F>> {
    binary(x, slope, |v, s| if v < F::zero() { s * v } else { v })
}
