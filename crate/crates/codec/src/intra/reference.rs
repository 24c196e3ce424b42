//! Untrained reference networks with the published layer structure:
//! fully connected layers of 1216 neurons (four layers for 16x16, three
//! otherwise), LeakyReLU between layers, sparse weights. They carry random
//! weights and exist for complexity measurement and pipeline tests.

use qnn_core::quantize::{static_quantize, QuantizeOptions};
use qnn_core::sparse::Run;
use qnn_core::synth::random_tensor;
use qnn_core::{Alignment, ElementWidth, Graph, GraphBuilder, Node, OpKind, QuantizeError, SparseF32, Tensor};
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::context::ContextSpec;
use super::predict::{output_len, IntraModel};
use super::shape::{BlockShape, NETWORK_SHAPES};

pub const HIDDEN: usize = 1216;
pub const LEAKY_SLOPE: f32 = 0.1;

/// Layer widths from the context length to the output length.
pub fn layer_widths(shape: BlockShape) -> Vec<usize> {
    let spec = ContextSpec::for_network(shape);
    let hidden = if shape == (16, 16) { 3 } else { 2 };
    let mut v = vec![spec.flat_len(shape.0, shape.1)];
    v.extend(std::iter::repeat(HIDDEN).take(hidden));
    v.push(output_len(shape));
    v
}

pub fn dense_macs(shape: BlockShape) -> u64 {
    layer_widths(shape).windows(2).map(|p| (p[0] * p[1]) as u64).sum()
}

/// Sparse MACs per predicted pixel of the published sparse models.
pub fn published_macs_per_pixel(shape: BlockShape) -> Option<u64> {
    match shape {
        (4, 4) => Some(7773),
        (8, 8) => Some(2624),
        (16, 16) => Some(1411),
        _ => None,
    }
}

/// Total sparse MACs of the reference model: the published per-pixel cost
/// where there is one, otherwise the density of the nearest published
/// model applied to our dense cost. Always a multiple of 8.
pub fn target_macs(shape: BlockShape) -> u64 {
    if let Some(m) = published_macs_per_pixel(shape) {
        return m * (shape.0 * shape.1) as u64;
    }
    let density = if shape.0 == 4 { 0.072 } else { 0.079 };
    ((dense_macs(shape) as f64 * density / 8.0).round() as u64) * 8
}

/// A `rows x cols` matrix with `blocks` nonzero 8-wide aligned blocks
/// placed at random.
fn sparse_layer<R: Rng>(rng: &mut R, rows: usize, cols: usize, blocks: usize, scale: f32) -> SparseF32 {
    let per_row = cols / 8;
    let mut picked = index::sample(rng, rows * per_row, blocks).into_vec();
    picked.sort_unstable();
    let mut runs: Vec<Run> = Vec::new();
    for s in picked {
        let (row, start) = ((s / per_row) as u32, ((s % per_row) * 8) as u32);
        match runs.last_mut() {
            Some(r) if r.row == row && r.start + r.len == start => r.len += 8,
            _ => runs.push(Run { row, start, len: 8 }),
        }
    }
    let values = (0..blocks * 8)
        .map(|_| {
            let m = rng.gen_range(0.5f32..=1.0) * scale;
            if rng.gen::<bool>() {
                m
            } else {
                -m
            }
        })
        .collect();
    SparseF32::from_runs(rows, cols, Alignment::A8, runs, values, 0).expect("aligned runs")
}

/// Float reference model for one network shape.
pub fn reference_model<R: Rng>(rng: &mut R, shape: BlockShape) -> Graph {
    let widths = layer_widths(shape);
    let caps: Vec<usize> = widths.windows(2).map(|p| p[0] * p[1] / 8).collect();
    let total_cap: usize = caps.iter().sum();
    let target = (target_macs(shape) / 8) as usize;
    let mut blocks: Vec<usize> = caps.iter().map(|&c| target * c / total_cap).collect();
    let largest = (0..caps.len()).max_by_key(|&i| caps[i]).expect("layers");
    blocks[largest] += target - blocks.iter().sum::<usize>();

    let spec = ContextSpec::for_network(shape);
    let mut meta = std::collections::BTreeMap::new();
    spec.to_metadata(&mut meta);
    let mut b = GraphBuilder::new(ElementWidth::Float32)
        .input(0, vec![widths[0]], 0)
        .metadata(meta)
        .meta("intra.h", shape.0.to_string())
        .meta("intra.w", shape.1.to_string())
        .meta("pixels", (shape.0 * shape.1).to_string());
    let (mut next, mut prev) = (1u32, 0u32);
    let layers = widths.len() - 1;
    for l in 0..layers {
        let (fan_in, fan_out) = (widths[l], widths[l + 1]);
        let live = (blocks[l] * 8) as f32 / fan_out as f32;
        let w = sparse_layer(rng, fan_out, fan_in, blocks[l], 1.0 / live.max(1.0).sqrt());
        let bias = random_tensor(rng, vec![fan_out], 0.05);
        b = b
            .node(Node::sparse_matmul(next, prev, w))
            .node(Node::constant(next + 1, bias))
            .node(Node::op(next + 2, OpKind::BiasAdd, vec![next, next + 1]));
        prev = next + 2;
        next += 3;
        if l + 1 < layers {
            b = b.node(Node::op(next, OpKind::LeakyRelu, vec![prev]).alpha(LEAKY_SLOPE));
            prev = next;
            next += 1;
        }
    }
    b.output(prev).build()
}

/// Converts a float reference model to `width` using random contexts of
/// moderate activity (residuals up to 32 samples at 8 bits).
pub fn quantize_reference<R: Rng>(rng: &mut R, g: &Graph, width: ElementWidth) -> Result<Graph, QuantizeError> {
    let n = g.inputs()[0].dims[0];
    let calib: Vec<Vec<Tensor>> = (0..16).map(|_| vec![random_tensor(rng, vec![n], 32.0).into()]).collect();
    static_quantize(g, &calib, width, QuantizeOptions::default())
}

/// All seven reference models at `width`, deterministic in `seed`.
pub fn reference_models(width: ElementWidth, seed: u64) -> Result<Vec<IntraModel>, QuantizeError> {
    NETWORK_SHAPES
        .iter()
        .map(|&shape| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ ((shape.0 as u64) << 8 | shape.1 as u64));
            let g = reference_model(&mut rng, shape);
            let g = if width == ElementWidth::Float32 { g } else { quantize_reference(&mut rng, &g, width)? };
            Ok(IntraModel::new(g).expect("reference layout is valid"))
        })
        .collect()
}
