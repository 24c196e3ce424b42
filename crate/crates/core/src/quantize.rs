//! Static float-to-integer conversion.
//!
//! Weights take the finest shift that fits their largest magnitude.
//! Activation shifts come from calibration runs: each value's largest
//! magnitude, times a headroom factor, bounds its quantizer. Dense and
//! convolution layers reach their bound by choosing `q_i`; layers whose
//! output quantizer is fixed by their inputs (Add, Concat, activations..)
//! push the bound back onto those inputs.

use std::collections::HashMap;

use crate::error::QuantizeError;
use crate::graph::{ExecContext, Graph, InputDesc, OpKind, Payload};
use crate::kernels::ExecOptions;
use crate::sparse::{AnySparse, SparsePackedMatrix};
use crate::tensor::{quantize_float, ElementWidth, Tensor, TypedTensor};
use crate::scalar::Element;

/// Largest shift a quantizer may take.
pub const MAX_SHIFT: u32 = 62;

/// Largest `q` with `round(max_abs * 2^q) <= 2^(w-1) - 1`.
///
/// Zero maps to `w - 1`; a magnitude too large for any shift maps to 0.
pub fn choose_shift(max_abs: f64, width: ElementWidth) -> u32 {
    if !width.is_integer() {
        return 0;
    }
    if max_abs == 0.0 {
        return width.bits() - 1;
    }
    let hi = width.max_value() as f64;
    let fits = |q: u32| (max_abs * (q as f64).exp2()).round_ties_even() <= hi;
    (0..=MAX_SHIFT).rev().find(|&q| fits(q)).unwrap_or(0)
}

/// Default input quantizer: 7 for int16, 23 for int32, 3 for int8.
pub fn default_input_q(width: ElementWidth) -> u32 {
    width.bits().saturating_sub(9)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum InputQuantizer {
    /// [`default_input_q`] for the target width.
    Default,
    Fixed(u32),
    /// From the calibration inputs' range, like any other activation.
    Calibrated,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuantizeOptions {
    /// Multiplier on observed activation ranges.
    pub headroom: f64,
    pub input_q: InputQuantizer,
}

impl Default for QuantizeOptions {
    fn default() -> Self {
        QuantizeOptions { headroom: 1.25, input_q: InputQuantizer::Default }
    }
}

/// Converts a float32 graph to `width` using calibration inputs.
pub fn static_quantize(
    g: &Graph,
    calibration: &[Vec<Tensor>],
    width: ElementWidth,
    opts: QuantizeOptions,
) -> Result<Graph, QuantizeError> {
    if !width.is_integer() {
        return Err(QuantizeError::NotIntegerWidth(width));
    }
    if g.width() != ElementWidth::Float32 {
        return Err(QuantizeError::NotFloatGraph(g.width()));
    }
    if calibration.is_empty() {
        return Err(QuantizeError::CalibrationEmpty);
    }
    for n in g.nodes() {
        let bad_slope = match n.kind {
            OpKind::LeakyRelu => n.attrs.alpha.is_some_and(|a| !(a.abs() < 1.0)),
            _ => false,
        };
        if bad_slope {
            return Err(QuantizeError::Unquantizable { node: n.id, reason: "slope magnitude must be below 1".into() });
        }
    }

    let ranges = calibrate(g, calibration)?;
    let order = g.analyze().map_err(|v| QuantizeError::Exec(crate::ExecError::Invalid(v)))?.order;

    // Upper bound on each value's quantizer.
    let mut limit: HashMap<u32, u32> = HashMap::new();
    for d in g.inputs() {
        let q = match opts.input_q {
            InputQuantizer::Default => default_input_q(width),
            InputQuantizer::Fixed(q) => q,
            InputQuantizer::Calibrated => choose_shift(opts.headroom * ranges[&d.id], width),
        };
        limit.insert(d.id, q);
    }
    for n in g.nodes() {
        let q = match &n.payload {
            Payload::Tensor(t) => choose_shift(t.max_abs(), width),
            Payload::Sparse(s) => choose_shift(s.max_abs(), width),
            Payload::None => choose_shift(opts.headroom * ranges[&n.id], width),
        };
        limit.insert(n.id, q);
    }
    for &id in order.iter().rev() {
        let n = g.node(id).expect("ordered");
        let lim = limit[&id];
        let bounded: &[u32] = match n.kind {
            OpKind::Add | OpKind::Concat | OpKind::Maximum => &n.inputs,
            OpKind::BiasAdd => &n.inputs[1..],
            OpKind::Relu
            | OpKind::LeakyRelu
            | OpKind::PRelu
            | OpKind::MaxPool
            | OpKind::Flatten
            | OpKind::Transpose
            | OpKind::Reshape
            | OpKind::Slice
            | OpKind::Expand => &n.inputs[..1],
            _ => &[],
        };
        for i in bounded {
            if g.input(*i).is_none() {
                let e = limit.get_mut(i).expect("known id");
                *e = (*e).min(lim);
            }
        }
    }

    // Forward pass; constants may be lowered by their consumers, which
    // requires another pass.
    let mut q: HashMap<u32, u32>;
    let mut q_i: HashMap<u32, u32>;
    loop {
        q = g.inputs().iter().map(|d| (d.id, limit[&d.id])).collect();
        q_i = HashMap::new();
        let mut lowered = false;
        for &id in &order {
            let n = g.node(id).expect("ordered");
            let qs: Vec<u32> = n.inputs.iter().map(|i| q[i]).collect();
            let out = match n.kind {
                OpKind::Const => limit[&id],
                k if k.has_internal_shift() => {
                    let out = limit[&id].min(qs[0]);
                    q_i.insert(id, qs[0] - out);
                    out
                }
                OpKind::Add | OpKind::Concat => qs.iter().copied().min().unwrap_or(0),
                OpKind::BiasAdd | OpKind::Maximum => {
                    let (q0, q1) = (qs[0], qs[1]);
                    if q1 > q0 {
                        let x1 = n.inputs[1];
                        if matches!(g.node(x1).map(|c| c.kind), Some(OpKind::Const)) {
                            limit.insert(x1, q0);
                            lowered = true;
                        } else {
                            return Err(QuantizeError::Unquantizable {
                                node: id,
                                reason: format!("second operand quantizer {q1} exceeds first {q0}"),
                            });
                        }
                    }
                    if n.kind == OpKind::BiasAdd {
                        q1.min(q0)
                    } else {
                        q0
                    }
                }
                OpKind::Shape => 0,
                _ => qs[0],
            };
            q.insert(id, out);
        }
        if !lowered {
            break;
        }
    }

    let mut b = g.to_builder().width(width);
    b.inputs_mut().iter_mut().for_each(|d: &mut InputDesc| d.q = q[&d.id]);
    for n in b.nodes_mut() {
        match &n.payload {
            Payload::Tensor(t) => {
                let f = t.dequantize();
                let qt = Tensor::quantize(f.dims().to_vec(), f.data(), q[&n.id], width)
                    .expect("dims already valid");
                n.payload = Payload::Tensor(qt);
            }
            Payload::Sparse(s) => {
                let f = s.to_f32();
                n.payload = Payload::Sparse(quantize_sparse(&f, q[&n.id], width));
            }
            Payload::None => {}
        }
        if n.kind.has_internal_shift() {
            n.attrs.q_i = Some(q_i[&n.id]);
        }
    }
    Ok(b.build())
}

/// Largest magnitude of every input and node over the calibration set.
pub fn calibrate(g: &Graph, calibration: &[Vec<Tensor>]) -> Result<HashMap<u32, f64>, QuantizeError> {
    let mut ctx = ExecContext::new(g, ExecOptions::default())?.keep_intermediates(true);
    let ids: Vec<u32> = g.inputs().iter().map(|d| d.id).chain(g.nodes().iter().map(|n| n.id)).collect();
    let mut ranges: HashMap<u32, f64> = ids.iter().map(|&i| (i, 0.0)).collect();
    for sample in calibration {
        ctx.run(sample)?;
        for &id in &ids {
            if let Some(t) = ctx.value(id) {
                let r = ranges.get_mut(&id).expect("seeded");
                *r = r.max(t.max_abs());
            }
        }
    }
    Ok(ranges)
}

fn quantize_sparse(s: &SparsePackedMatrix<f32>, q: u32, width: ElementWidth) -> AnySparse {
    fn conv<T: Element>(s: &SparsePackedMatrix<f32>, q: u32) -> SparsePackedMatrix<T> {
        s.map_values(q, |&v| T::from_i64_saturating(quantize_float(v as f64, q, T::WIDTH)))
    }
    match width {
        ElementWidth::Float32 => AnySparse::F32(s.clone()),
        ElementWidth::Int32 => AnySparse::I32(conv(s, q)),
        ElementWidth::Int16 => AnySparse::I16(conv(s, q)),
        ElementWidth::Int8 => AnySparse::I8(conv(s, q)),
    }
}

/// Converts float inputs to the graph's width and declared input quantizers.
pub fn quantize_inputs(g: &Graph, inputs: &[TypedTensor<f32>]) -> Result<Vec<Tensor>, crate::TensorError> {
    inputs
        .iter()
        .zip(g.inputs())
        .map(|(t, d)| Tensor::quantize(t.dims().to_vec(), t.data(), d.q, g.width()))
        .collect()
}

/// Quantizes a float tensor with its own best shift.
pub fn quantize_auto(t: &TypedTensor<f32>, width: ElementWidth) -> Tensor {
    let q = choose_shift(t.data().iter().fold(0.0f64, |m, &v| m.max((v as f64).abs())), width);
    Tensor::quantize(t.dims().to_vec(), t.data(), q, width).expect("dims already valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scan(max_abs: f64, width: ElementWidth) -> u32 {
        let mut best = 0;
        for q in 0..=MAX_SHIFT {
            if (max_abs * 2f64.powi(q as i32)).round_ties_even() <= width.max_value() as f64 {
                best = q;
            }
        }
        best
    }

    #[test]
    fn choose_shift_examples() {
        assert_eq!(choose_shift(0.5, ElementWidth::Int16), 15);
        assert_eq!(choose_shift(1.0, ElementWidth::Int16), 14);
        assert_eq!(choose_shift(0.0, ElementWidth::Int16), 15);
        assert_eq!(choose_shift(0.1, ElementWidth::Int16), 18);
        assert_eq!(choose_shift(1e9, ElementWidth::Int16), 0);
        for v in [0.5, 1.0, 0.3, 3.7, 1000.0, 1e-4] {
            for w in [ElementWidth::Int16, ElementWidth::Int32, ElementWidth::Int8] {
                assert_eq!(choose_shift(v, w), scan(v, w), "{v} {w}");
            }
        }
    }
}
