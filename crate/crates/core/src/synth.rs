//! Random float graphs and inputs for tests, calibration, and benchmarks.

use rand::Rng;

use crate::graph::{Graph, GraphBuilder, Node, OpKind};
use crate::kernels::Padding;
use crate::tensor::{ElementWidth, TypedTensor};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Activation {
    None,
    Relu,
    Leaky(f32),
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, n: usize, scale: f32) -> Vec<f32> {
    (0..n).map(|_| rng.gen_range(-scale..=scale)).collect()
}

pub fn random_tensor<R: Rng + ?Sized>(rng: &mut R, dims: Vec<usize>, scale: f32) -> TypedTensor<f32> {
    let n = dims.iter().product();
    TypedTensor::new(dims, 0, uniform(rng, n, scale)).expect("positive dims")
}

/// Appends `act` after node `prev`; returns the id now holding the result.
fn activate(b: GraphBuilder, next: &mut u32, prev: u32, act: Activation) -> (GraphBuilder, u32) {
    let id = *next;
    let b = match act {
        Activation::None => return (b, prev),
        Activation::Relu => b.node(Node::op(id, OpKind::Relu, vec![prev])),
        Activation::Leaky(a) => b.node(Node::op(id, OpKind::LeakyRelu, vec![prev]).alpha(a)),
    };
    *next += 1;
    (b, id)
}

/// Fully connected net `widths[0] -> .. -> widths[last]` with weights drawn
/// from `+-1/sqrt(fan_in)` and `act` between layers (not after the last).
pub fn mlp<R: Rng + ?Sized>(rng: &mut R, widths: &[usize], act: Activation) -> Graph {
    assert!(widths.len() >= 2, "need at least one layer");
    let mut b = GraphBuilder::new(ElementWidth::Float32).input(0, vec![widths[0]], 0);
    let (mut next, mut prev) = (1u32, 0u32);
    for (l, pair) in widths.windows(2).enumerate() {
        let (fan_in, fan_out) = (pair[0], pair[1]);
        let s = 1.0 / (fan_in as f32).sqrt();
        let w = random_tensor(rng, vec![fan_in, fan_out], s);
        let bias = random_tensor(rng, vec![fan_out], 0.1);
        b = b
            .node(Node::constant(next, w))
            .node(Node::op(next + 1, OpKind::MatMul, vec![prev, next]))
            .node(Node::constant(next + 2, bias))
            .node(Node::op(next + 3, OpKind::BiasAdd, vec![next + 1, next + 2]));
        prev = next + 3;
        next += 4;
        if l + 2 < widths.len() {
            (b, prev) = activate(b, &mut next, prev, act);
        }
    }
    b.output(prev).build()
}

/// Same-padded convolutions over an `[h, w, channels[0]]` input.
pub fn cnn<R: Rng + ?Sized>(rng: &mut R, h: usize, w: usize, channels: &[usize], k: usize, act: Activation) -> Graph {
    assert!(channels.len() >= 2, "need at least one layer");
    let mut b = GraphBuilder::new(ElementWidth::Float32).input(0, vec![h, w, channels[0]], 0);
    let (mut next, mut prev) = (1u32, 0u32);
    for (l, pair) in channels.windows(2).enumerate() {
        let (cin, cout) = (pair[0], pair[1]);
        let s = 1.0 / ((cin * k * k) as f32).sqrt();
        let wt = random_tensor(rng, vec![k, k, cin, cout], s);
        let bias = random_tensor(rng, vec![cout], 0.1);
        b = b
            .node(Node::constant(next, wt))
            .node(Node::op(next + 1, OpKind::Conv2D, vec![prev, next]).padding(Padding::Same))
            .node(Node::constant(next + 2, bias))
            .node(Node::op(next + 3, OpKind::BiasAdd, vec![next + 1, next + 2]));
        prev = next + 3;
        next += 4;
        if l + 2 < channels.len() {
            (b, prev) = activate(b, &mut next, prev, act);
        }
    }
    b.output(prev).build()
}
