//! Operation counts.
//!
//! One MAC is one multiply-accumulate. Dense layers cost `rows * K * N`,
//! sparse layers the sum of their run lengths per input row, convolutions
//! every kernel tap at every output position (padded taps included), and
//! elementwise Mul one MAC per element. Other arithmetic (adds, clips,
//! activations, pooling compares) is tallied separately as ops; pure data
//! movement costs nothing.

use crate::graph::{Graph, OpKind, Violation};
use crate::kernels::ConvGeometry;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NodeCost {
    pub id: u32,
    pub kind: OpKind,
    pub macs: u64,
    pub ops: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CostReport {
    pub nodes: Vec<NodeCost>,
    pub total_macs: u64,
    pub total_ops: u64,
}

impl CostReport {
    /// `total_macs / pixels / 1000`
    pub fn kmac_per_pixel(&self, pixels: u64) -> f64 {
        kmac_per_pixel(self.total_macs, pixels)
    }
}

pub fn kmac_per_pixel(total_macs: u64, pixels: u64) -> f64 {
    assert!(pixels > 0, "pixel count must be positive");
    total_macs as f64 / pixels as f64 / 1000.0
}

/// Per-node and total costs for the graph's declared input dims.
pub fn count_macs(g: &Graph) -> Result<CostReport, Vec<Violation>> {
    let a = g.analyze()?;
    let dims = |id: u32| a.info(id).expect("analyzed").dims.as_slice();
    let elems = |id: u32| dims(id).iter().product::<usize>() as u64;
    let mut nodes = Vec::with_capacity(a.order.len());
    for &id in &a.order {
        let n = g.node(id).expect("ordered");
        let p = n.attrs.conv_params();
        let (macs, ops) = match n.kind {
            OpKind::MatMul => {
                let x = dims(n.inputs[0]);
                let w = dims(n.inputs[1]);
                let rows: usize = x[..x.len() - 1].iter().product();
                ((rows * w[0] * w[1]) as u64, 0)
            }
            OpKind::SparseMatMul => {
                let x = dims(n.inputs[0]);
                let rows: usize = x[..x.len() - 1].iter().product();
                (rows as u64 * n.sparse().expect("payload").mac_count(), 0)
            }
            OpKind::Conv2D => {
                let geo = ConvGeometry::conv(dims(n.inputs[0]), dims(n.inputs[1]), p).expect("analyzed");
                (geo.macs(), 0)
            }
            OpKind::Conv2DTranspose => {
                let geo = ConvGeometry::conv_transpose(dims(n.inputs[0]), dims(n.inputs[1]), p).expect("analyzed");
                (geo.transpose_macs(), 0)
            }
            OpKind::Mul => (elems(id), 0),
            OpKind::Add | OpKind::BiasAdd | OpKind::Maximum | OpKind::Relu | OpKind::LeakyRelu | OpKind::PRelu => {
                (0, elems(id))
            }
            OpKind::MaxPool => {
                let k = n.attrs.kernel.unwrap_or(1) as u64;
                (0, elems(id) * k * k)
            }
            OpKind::Const
            | OpKind::Concat
            | OpKind::Flatten
            | OpKind::Transpose
            | OpKind::Reshape
            | OpKind::Slice
            | OpKind::Expand
            | OpKind::Shape => (0, 0),
        };
        nodes.push(NodeCost { id, kind: n.kind, macs, ops });
    }
    Ok(CostReport {
        total_macs: nodes.iter().map(|c| c.macs).sum(),
        total_ops: nodes.iter().map(|c| c.ops).sum(),
        nodes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{GraphBuilder, Node};
    use crate::kernels::Padding;
    use crate::tensor::{ElementWidth, TypedTensor};

    #[test]
    fn dense_layer_product() {
        let w = TypedTensor::<f32>::zeros(vec![256, 1216], 0);
        let g = GraphBuilder::new(ElementWidth::Float32)
            .input(0, vec![256], 0)
            .node(Node::constant(1, w))
            .node(Node::op(2, OpKind::MatMul, vec![0, 1]))
            .output(2)
            .build();
        let r = count_macs(&g).unwrap();
        assert_eq!(r.total_macs, 311_296);
        assert_eq!(r.kmac_per_pixel(1), 311.296);
        assert_eq!(r.kmac_per_pixel(2), 155.648);
    }

    #[test]
    fn conv_layer_product() {
        let w = TypedTensor::<f32>::zeros(vec![3, 3, 96, 96], 0);
        let g = GraphBuilder::new(ElementWidth::Float32)
            .input(0, vec![64, 64, 96], 0)
            .node(Node::constant(1, w))
            .node(Node::op(2, OpKind::Conv2D, vec![0, 1]))
            .node(Node::op(3, OpKind::Relu, vec![2]))
            .output(3)
            .build();
        let r = count_macs(&g).unwrap();
        assert_eq!(r.total_macs, 339_738_624);
        assert_eq!(r.total_ops, 64 * 64 * 96);
    }

    /// Counts multiplies by walking the valid-padding loops directly.
    fn brute_conv(h: usize, w: usize, cin: usize, k: usize, cout: usize, groups: usize, stride: usize) -> u64 {
        let mut count = 0;
        let mut oy = 0;
        while oy + k <= h {
            let mut ox = 0;
            while ox + k <= w {
                for oc in 0..cout {
                    let g = oc / (cout / groups);
                    for _ic in g * (cin / groups)..(g + 1) * (cin / groups) {
                        count += (k * k) as u64;
                    }
                }
                ox += stride;
            }
            oy += stride;
        }
        count
    }

    #[test]
    fn conv_matches_brute_count() {
        for &(h, w, cin, k, cout, groups, stride) in
            &[(9, 7, 4, 3, 6, 2, 2), (5, 5, 3, 1, 2, 1, 1), (8, 8, 8, 3, 8, 8, 1)]
        {
            let wt = TypedTensor::<f32>::zeros(vec![k, k, cin / groups, cout], 0);
            let g = GraphBuilder::new(ElementWidth::Float32)
                .input(0, vec![h, w, cin], 0)
                .node(Node::constant(1, wt))
                .node(
                    Node::op(2, OpKind::Conv2D, vec![0, 1])
                        .stride(stride as u32)
                        .groups(groups as u32)
                        .padding(Padding::Valid),
                )
                .output(2)
                .build();
            assert_eq!(count_macs(&g).unwrap().total_macs, brute_conv(h, w, cin, k, cout, groups, stride));
        }
    }
}
