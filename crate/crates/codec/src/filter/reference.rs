//! A small untrained filter CNN with the filter input layout.

use qnn_core::kernels::Padding;
use qnn_core::quantize::{static_quantize, InputQuantizer, QuantizeOptions};
use qnn_core::synth::random_tensor;
use qnn_core::{ElementWidth, Graph, GraphBuilder, Node, OpKind, QuantizeError, Tensor};
use rand::Rng;

use super::inputs::BORDER;

/// Three same-padded 3x3 convolutions, `channels -> hidden -> hidden -> 1`,
/// on `(core + 16)`-square patches. The last layer is scaled by `gain`
/// so the residual stays small.
pub fn reference_filter<R: Rng>(rng: &mut R, core: usize, channels: usize, hidden: usize, gain: f32) -> Graph {
    let side = core + 2 * BORDER;
    let widths = [channels, hidden, hidden, 1];
    let mut b = GraphBuilder::new(ElementWidth::Float32)
        .input(0, vec![side, side, channels], 0)
        .meta("filter.core", core.to_string())
        .meta("pixels", (core * core).to_string());
    let (mut next, mut prev) = (1u32, 0u32);
    for l in 0..3 {
        let (cin, cout) = (widths[l], widths[l + 1]);
        let s = 1.0 / ((9 * cin) as f32).sqrt() * if l == 2 { gain } else { 1.0 };
        b = b
            .node(Node::constant(next, random_tensor(rng, vec![3, 3, cin, cout], s)))
            .node(Node::op(next + 1, OpKind::Conv2D, vec![prev, next]).padding(Padding::Same))
            .node(Node::constant(next + 2, random_tensor(rng, vec![cout], 0.01 * gain)))
            .node(Node::op(next + 3, OpKind::BiasAdd, vec![next + 1, next + 2]));
        prev = next + 3;
        next += 4;
        if l < 2 {
            b = b.node(Node::op(next, OpKind::LeakyRelu, vec![prev]).alpha(0.1));
            prev = next;
            next += 1;
        }
    }
    b.output(prev).build()
}

/// Integer version calibrated on random patches with inputs in `[0, 1)`.
pub fn quantize_filter<R: Rng>(rng: &mut R, g: &Graph, width: ElementWidth) -> Result<Graph, QuantizeError> {
    let dims = g.inputs()[0].dims.clone();
    let calib: Vec<Vec<Tensor>> = (0..4)
        .map(|_| {
            let t = random_tensor(rng, dims.clone(), 0.5);
            let shifted: Vec<f32> = t.data().iter().map(|v| v + 0.5).collect();
            vec![qnn_core::TensorF32::new(dims.clone(), 0, shifted).expect("same dims").into()]
        })
        .collect();
    let opts = QuantizeOptions { input_q: InputQuantizer::Calibrated, ..Default::default() };
    static_quantize(g, &calib, width, opts)
}
