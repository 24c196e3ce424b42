//! Data-movement and selection ops. None of these do arithmetic, so they are
//! generic over any element and pass the input quantizer through.

use super::{ConvParams, Padding};
use crate::error::{shape_err, KernelError};
use crate::tensor::TypedTensor;

type Result<T> = std::result::Result<T, KernelError>;

fn resolve_axis(axis: i64, rank: usize) -> Result<usize> {
    let a = if axis < 0 { axis + rank as i64 } else { axis };
    if a < 0 || a >= rank as i64 {
        return Err(KernelError::Attribute(format!("axis {axis} out of range for rank {rank}")));
    }
    Ok(a as usize)
}

/// Target dims of a reshape; one entry may be -1.
pub fn reshape_dims(input: &[usize], shape: &[i64]) -> Result<Vec<usize>> {
    let total: usize = input.iter().product();
    let known: usize = shape.iter().filter(|&&d| d > 0).map(|&d| d as usize).product();
    let wild = shape.iter().filter(|&&d| d == -1).count();
    if wild > 1 || shape.iter().any(|&d| d == 0 || d < -1) {
        return Err(KernelError::Attribute(format!("invalid reshape target {shape:?}")));
    }
    let dims: Vec<usize> = shape
        .iter()
        .map(|&d| if d == -1 { total / known.max(1) } else { d as usize })
        .collect();
    if dims.iter().product::<usize>() != total {
        return Err(shape_err(format!("cannot reshape {input:?} into {shape:?}")));
    }
    Ok(dims)
}

pub fn reshape<T: Copy + Default>(x: &TypedTensor<T>, shape: &[i64]) -> Result<TypedTensor<T>> {
    let dims = reshape_dims(x.dims(), shape)?;
    Ok(x.clone().reshaped(dims)?)
}

pub fn flatten<T: Copy + Default>(x: &TypedTensor<T>) -> Result<TypedTensor<T>> {
    Ok(x.clone().reshaped(vec![x.len()])?)
}

pub fn transpose_dims(input: &[usize], perm: &[u32]) -> Result<Vec<usize>> {
    let mut seen = vec![false; input.len()];
    if perm.len() != input.len() {
        return Err(KernelError::Attribute(format!("perm {perm:?} does not match rank {}", input.len())));
    }
    for &p in perm {
        let p = p as usize;
        if p >= input.len() || seen[p] {
            return Err(KernelError::Attribute(format!("invalid permutation {perm:?}")));
        }
        seen[p] = true;
    }
    Ok(perm.iter().map(|&p| input[p as usize]).collect())
}

fn strides(dims: &[usize]) -> Vec<usize> {
    let mut s = vec![1; dims.len()];
    for i in (0..dims.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * dims[i + 1];
    }
    s
}

/// Visits every multi-index of `dims` in row-major order.
fn for_each_index(dims: &[usize], mut f: impl FnMut(&[usize])) {
    let n: usize = dims.iter().product();
    let mut idx = vec![0usize; dims.len()];
    for _ in 0..n {
        f(&idx);
        for d in (0..dims.len()).rev() {
            idx[d] += 1;
            if idx[d] < dims[d] {
                break;
            }
            idx[d] = 0;
        }
    }
}

pub fn transpose<T: Copy + Default>(x: &TypedTensor<T>, perm: &[u32]) -> Result<TypedTensor<T>> {
    let out_dims = transpose_dims(x.dims(), perm)?;
    let in_strides = strides(x.dims());
    let src: Vec<usize> = perm.iter().map(|&p| in_strides[p as usize]).collect();
    let xd = x.data();
    let mut out = Vec::with_capacity(x.len());
    for_each_index(&out_dims, |idx| {
        let off: usize = idx.iter().zip(&src).map(|(i, s)| i * s).sum();
        out.push(xd[off]);
    });
    Ok(TypedTensor::new(out_dims, x.q(), out)?)
}

/// Half-open `[start, end)` along `axis`, negative bounds count from the end.
pub fn slice_dims(input: &[usize], axis: i64, start: i64, end: i64) -> Result<(usize, usize, Vec<usize>)> {
    let ax = resolve_axis(axis, input.len())?;
    let n = input[ax] as i64;
    let fix = |v: i64| if v < 0 { (v + n).max(0) } else { v.min(n) };
    let (s, e) = (fix(start), fix(end));
    if s >= e {
        return Err(shape_err(format!("empty slice [{start}, {end}) of extent {n}")));
    }
    let mut out = input.to_vec();
    out[ax] = (e - s) as usize;
    Ok((ax, s as usize, out))
}

pub fn slice<T: Copy + Default>(x: &TypedTensor<T>, axis: i64, start: i64, end: i64) -> Result<TypedTensor<T>> {
    let (ax, s, out_dims) = slice_dims(x.dims(), axis, start, end)?;
    let outer: usize = x.dims()[..ax].iter().product();
    let inner: usize = x.dims()[ax + 1..].iter().product();
    let src_chunk = x.dims()[ax] * inner;
    let len = out_dims[ax] * inner;
    let mut out = Vec::with_capacity(outer * len);
    for o in 0..outer {
        let base = o * src_chunk + s * inner;
        out.extend_from_slice(&x.data()[base..base + len]);
    }
    Ok(TypedTensor::new(out_dims, x.q(), out)?)
}

/// Numpy-style broadcast of `input` to `shape` (right-aligned).
pub fn expand_dims(input: &[usize], shape: &[i64]) -> Result<Vec<usize>> {
    if shape.len() < input.len() || shape.iter().any(|&d| d <= 0) {
        return Err(KernelError::Attribute(format!("cannot expand {input:?} to {shape:?}")));
    }
    let off = shape.len() - input.len();
    let mut out: Vec<usize> = shape.iter().map(|&d| d as usize).collect();
    for (i, &d) in input.iter().enumerate() {
        let t = &mut out[off + i];
        if d != *t && d != 1 {
            if *t == 1 {
                *t = d;
            } else {
                return Err(shape_err(format!("cannot expand {input:?} to {shape:?}")));
            }
        }
    }
    Ok(out)
}

pub fn expand<T: Copy + Default>(x: &TypedTensor<T>, shape: &[i64]) -> Result<TypedTensor<T>> {
    let out_dims = expand_dims(x.dims(), shape)?;
    let off = out_dims.len() - x.dims().len();
    let in_strides = strides(x.dims());
    let xd = x.data();
    let mut out = Vec::with_capacity(out_dims.iter().product());
    for_each_index(&out_dims, |idx| {
        let src: usize = x
            .dims()
            .iter()
            .enumerate()
            .map(|(i, &d)| if d == 1 { 0 } else { idx[off + i] * in_strides[i] })
            .sum();
        out.push(xd[src]);
    });
    Ok(TypedTensor::new(out_dims, x.q(), out)?)
}

pub fn relu<T: Copy + Default + PartialOrd>(x: &TypedTensor<T>) -> Result<TypedTensor<T>> {
    let zero = T::default();
    let data = x.data().iter().map(|&v| if v < zero { zero } else { v }).collect();
    Ok(TypedTensor::new(x.dims().to_vec(), x.q(), data)?)
}

/// Output dims of a max pool over `[H, W, C]`.
pub fn maxpool_dims(input: &[usize], kernel: usize, p: ConvParams) -> Result<Vec<usize>> {
    let [h, w, c] = *input else {
        return Err(shape_err(format!("maxpool input must be [H, W, C], got {input:?}")));
    };
    if kernel == 0 || p.stride == 0 {
        return Err(KernelError::Attribute("maxpool kernel and stride must be positive".into()));
    }
    Ok(match p.padding {
        Padding::Valid => {
            if h < kernel || w < kernel {
                return Err(shape_err(format!("pool {kernel} larger than {h}x{w}")));
            }
            vec![(h - kernel) / p.stride + 1, (w - kernel) / p.stride + 1, c]
        }
        Padding::Same => vec![h.div_ceil(p.stride), w.div_ceil(p.stride), c],
    })
}

/// Max pool comparing raw stored values; taps outside the input are skipped.
pub fn maxpool<T: Copy + Default + PartialOrd>(
    x: &TypedTensor<T>,
    kernel: usize,
    p: ConvParams,
) -> Result<TypedTensor<T>> {
    let out_dims = maxpool_dims(x.dims(), kernel, p)?;
    let (h, w, c) = (x.dims()[0], x.dims()[1], x.dims()[2]);
    let (oh, ow) = (out_dims[0], out_dims[1]);
    let (pad_t, pad_l) = match p.padding {
        Padding::Valid => (0, 0),
        Padding::Same => (
            ((oh - 1) * p.stride + kernel).saturating_sub(h) / 2,
            ((ow - 1) * p.stride + kernel).saturating_sub(w) / 2,
        ),
    };
    let xd = x.data();
    let mut out = Vec::with_capacity(oh * ow * c);
    for oy in 0..oh {
        for ox in 0..ow {
            for ch in 0..c {
                let mut best: Option<T> = None;
                for ky in 0..kernel {
                    for kx in 0..kernel {
                        let (Some(iy), Some(ix)) = (
                            (oy * p.stride + ky).checked_sub(pad_t),
                            (ox * p.stride + kx).checked_sub(pad_l),
                        ) else {
                            continue;
                        };
                        if iy >= h || ix >= w {
                            continue;
                        }
                        let v = xd[(iy * w + ix) * c + ch];
                        if best.is_none_or(|b| v > b) {
                            best = Some(v);
                        }
                    }
                }
                out.push(best.unwrap_or_default());
            }
        }
    }
    Ok(TypedTensor::new(out_dims, x.q(), out)?)
}
