//! Graph execution.

use std::collections::{HashMap, HashSet};

use super::{Analysis, Graph, Node, OpKind, Payload};
use crate::error::{ExecError, KernelError};
use crate::kernels::{float, int, shape, ExecOptions};
use crate::scalar::{Element, QInt};
use crate::sparse::{spmv, spmv_q, AnySparse};
use crate::tensor::{ElementWidth, Tensor, TypedTensor};

enum Slot<'g> {
    Empty,
    Borrowed(&'g Tensor),
    Owned(Tensor),
}

impl Slot<'_> {
    fn get(&self) -> Option<&Tensor> {
        match self {
            Slot::Empty => None,
            Slot::Borrowed(t) => Some(t),
            Slot::Owned(t) => Some(t),
        }
    }
}

/// Scratch state for running one graph; one context per thread.
///
/// Intermediate values are dropped after their last consumer unless
/// [`keep_intermediates`](Self::keep_intermediates) is set.
pub struct ExecContext<'g> {
    graph: &'g Graph,
    analysis: Analysis,
    opts: ExecOptions,
    slot_of: HashMap<u32, usize>,
    slots: Vec<Slot<'g>>,
    /// For each step, slots that can be released after it.
    release: Vec<Vec<usize>>,
    keep: bool,
}

impl<'g> ExecContext<'g> {
    pub fn new(graph: &'g Graph, opts: ExecOptions) -> Result<Self, ExecError> {
        let analysis = graph.analyze().map_err(ExecError::Invalid)?;
        let mut slot_of = HashMap::new();
        for (i, id) in graph.inputs().iter().map(|d| d.id).chain(analysis.order.iter().copied()).enumerate() {
            slot_of.insert(id, i);
        }
        let outputs: HashSet<u32> = graph.outputs().iter().copied().collect();
        let mut last_use: HashMap<u32, usize> = HashMap::new();
        for (step, id) in analysis.order.iter().enumerate() {
            for &i in &graph.node(*id).expect("ordered").inputs {
                last_use.insert(i, step);
            }
        }
        let mut release = vec![Vec::new(); analysis.order.len()];
        for (id, step) in last_use {
            if !outputs.contains(&id) {
                release[step].push(slot_of[&id]);
            }
        }
        let slots = (0..slot_of.len()).map(|_| Slot::Empty).collect();
        Ok(ExecContext { graph, analysis, opts, slot_of, slots, release, keep: false })
    }

    pub fn keep_intermediates(mut self, keep: bool) -> Self {
        self.keep = keep;
        self
    }

    pub fn analysis(&self) -> &Analysis {
        &self.analysis
    }

    /// Value of an input or node from the last run, if still held.
    pub fn value(&self, id: u32) -> Option<&Tensor> {
        self.slot_of.get(&id).and_then(|&s| self.slots[s].get())
    }

    pub fn run(&mut self, inputs: &[Tensor]) -> Result<Vec<Tensor>, ExecError> {
        let g = self.graph;
        if inputs.len() != g.inputs().len() {
            return Err(ExecError::Input {
                index: inputs.len(),
                reason: format!("graph takes {} inputs, got {}", g.inputs().len(), inputs.len()),
            });
        }
        self.slots.iter_mut().for_each(|s| *s = Slot::Empty);
        for (index, (t, d)) in inputs.iter().zip(g.inputs()).enumerate() {
            let err = |reason: String| ExecError::Input { index, reason };
            if t.width() != g.width() {
                return Err(err(format!("width {} but graph is {}", t.width(), g.width())));
            }
            if t.dims() != d.dims.as_slice() {
                return Err(err(format!("dims {:?} but graph expects {:?}", t.dims(), d.dims)));
            }
            if g.width().is_integer() && t.q() != d.q {
                return Err(err(format!("quantizer {} but graph expects {}", t.q(), d.q)));
            }
            self.slots[self.slot_of[&d.id]] = Slot::Owned(t.clone());
        }
        for step in 0..self.analysis.order.len() {
            let id = self.analysis.order[step];
            let node = g.node(id).expect("ordered");
            let slot = self.slot_of[&id];
            self.slots[slot] = if let (OpKind::Const, Payload::Tensor(t)) = (node.kind, &node.payload) {
                Slot::Borrowed(t)
            } else {
                let args: Vec<&Tensor> = node
                    .inputs
                    .iter()
                    .map(|i| self.slots[self.slot_of[i]].get().expect("inputs computed first"))
                    .collect();
                let out = eval(node, &args, g.width(), self.opts).map_err(|source| ExecError::Node { id, source })?;
                debug_assert_eq!(
                    Some(out.q()),
                    self.analysis.info(id).map(|i| if g.width().is_integer() { i.q } else { 0 })
                );
                Slot::Owned(out)
            };
            if !self.keep {
                for &s in &self.release[step] {
                    self.slots[s] = Slot::Empty;
                }
            }
        }
        Ok(g
            .outputs()
            .iter()
            .map(|o| self.slots[self.slot_of[o]].get().expect("outputs kept").clone())
            .collect())
    }
}

/// One-shot inference with default options.
pub fn infer(g: &Graph, inputs: &[Tensor]) -> Result<Vec<Tensor>, ExecError> {
    ExecContext::new(g, ExecOptions::default())?.run(inputs)
}

fn eval(node: &Node, args: &[&Tensor], width: ElementWidth, opts: ExecOptions) -> Result<Tensor, KernelError> {
    match width {
        ElementWidth::Float32 => eval_float(node, &typed::<f32>(args, width)?).map(Tensor::F32),
        ElementWidth::Int32 => eval_int(node, &typed::<i32>(args, width)?, opts).map(Tensor::I32),
        ElementWidth::Int16 => eval_int(node, &typed::<i16>(args, width)?, opts).map(Tensor::I16),
        ElementWidth::Int8 => eval_int(node, &typed::<i8>(args, width)?, opts).map(Tensor::I8),
    }
}

fn typed<'a, T: Element>(args: &[&'a Tensor], width: ElementWidth) -> Result<Vec<&'a TypedTensor<T>>, KernelError> {
    args.iter()
        .map(|t| T::view(t).ok_or(KernelError::WidthMismatch { expected: width, found: t.width() }))
        .collect()
}

fn shape_of<T: Element>(x: &TypedTensor<T>) -> TypedTensor<T> {
    TypedTensor::from_vec(x.dims().iter().map(|&d| T::from_i64_saturating(d as i64)).collect(), 0)
}

/// Ops that only move data; shared by both paths.
fn eval_shape<T: Element>(node: &Node, x: &TypedTensor<T>) -> Option<Result<TypedTensor<T>, KernelError>> {
    let a = &node.attrs;
    Some(match node.kind {
        OpKind::Relu => shape::relu(x),
        OpKind::MaxPool => shape::maxpool(x, a.kernel.unwrap_or(1) as usize, a.conv_params()),
        OpKind::Flatten => shape::flatten(x),
        OpKind::Transpose => shape::transpose(x, a.perm.as_deref().unwrap_or(&[])),
        OpKind::Reshape => shape::reshape(x, a.shape.as_deref().unwrap_or(&[])),
        OpKind::Expand => shape::expand(x, a.shape.as_deref().unwrap_or(&[])),
        OpKind::Slice => shape::slice(x, a.axis(), a.start.unwrap_or(0), a.end.unwrap_or(0)),
        OpKind::Shape => Ok(shape_of(x)),
        _ => return None,
    })
}

fn eval_int<T: QInt>(node: &Node, x: &[&TypedTensor<T>], opts: ExecOptions) -> Result<TypedTensor<T>, KernelError> {
    let a = &node.attrs;
    if let Some(r) = x.first().and_then(|x0| eval_shape(node, x0)) {
        return r;
    }
    match node.kind {
        OpKind::MatMul => int::matmul_q(x[0], x[1], a.q_i(), opts),
        OpKind::SparseMatMul => {
            let m = node.sparse().expect("validated payload");
            let w = sparse_as::<T>(m).ok_or(KernelError::WidthMismatch { expected: T::WIDTH, found: m.width() })?;
            spmv_q(w, x[0], a.q_i(), opts)
        }
        OpKind::Conv2D => int::conv2d_q(x[0], x[1], a.conv_params(), a.q_i()),
        OpKind::Conv2DTranspose => int::conv2d_transpose_q(x[0], x[1], a.conv_params(), a.q_i()),
        OpKind::Add => int::add_q(x[0], x[1]),
        OpKind::BiasAdd => int::bias_add_q(x[0], x[1]),
        OpKind::Mul => int::mul_q(x[0], x[1], a.q_i()),
        OpKind::Concat => int::concat_q(x, a.axis()),
        OpKind::Maximum => int::maximum_q(x[0], x[1]),
        OpKind::PRelu => int::prelu_q(x[0], x[1]),
        OpKind::LeakyRelu => int::leaky_relu_q(x[0], a.alpha.unwrap_or(0.0)),
        _ => Err(KernelError::Attribute(format!("{} is not executable here", node.kind))),
    }
}

fn sparse_as<T: Element>(m: &AnySparse) -> Option<&crate::sparse::SparsePackedMatrix<T>> {
    use std::any::Any;
    let any: &dyn Any = match m {
        AnySparse::F32(s) => s,
        AnySparse::I32(s) => s,
        AnySparse::I16(s) => s,
        AnySparse::I8(s) => s,
    };
    any.downcast_ref()
}

fn eval_float(node: &Node, x: &[&TypedTensor<f32>]) -> Result<TypedTensor<f32>, KernelError> {
    let a = &node.attrs;
    if let Some(r) = x.first().and_then(|x0| eval_shape(node, x0)) {
        return r;
    }
    match node.kind {
        OpKind::MatMul => float::matmul(x[0], x[1]),
        OpKind::SparseMatMul => {
            let m = node.sparse().expect("validated payload");
            let w = sparse_as::<f32>(m).ok_or(KernelError::WidthMismatch {
                expected: ElementWidth::Float32,
                found: m.width(),
            })?;
            spmv(w, x[0])
        }
        OpKind::Conv2D => float::conv2d(x[0], x[1], a.conv_params()),
        OpKind::Conv2DTranspose => float::conv2d_transpose(x[0], x[1], a.conv_params()),
        OpKind::Add => float::add(x[0], x[1]),
        OpKind::BiasAdd => float::bias_add(x[0], x[1]),
        OpKind::Mul => float::mul(x[0], x[1]),
        OpKind::Concat => float::concat(x, a.axis()),
        OpKind::Maximum => float::maximum(x[0], x[1]),
        OpKind::PRelu => float::prelu(x[0], x[1]),
        OpKind::LeakyRelu => float::leaky_relu(x[0], a.alpha.unwrap_or(0.0)),
        _ => Err(KernelError::Attribute(format!("{} is not executable here", node.kind))),
    }
}
