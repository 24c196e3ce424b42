//! Block shapes with a neural predictor and the context transformations
//! that map them onto one of the seven networks.

/// `(h, w)`: block height and width in samples.
pub type BlockShape = (usize, usize);

/// Shapes with a dedicated network.
pub const NETWORK_SHAPES: [BlockShape; 7] = [(4, 4), (4, 8), (4, 16), (4, 32), (8, 8), (8, 16), (16, 16)];

/// Every shape the neural mode predicts, in table order.
pub const PREDICTED_SHAPES: [BlockShape; 17] = [
    (4, 4),
    (4, 8),
    (8, 4),
    (4, 16),
    (16, 4),
    (4, 32),
    (32, 4),
    (8, 8),
    (8, 16),
    (16, 8),
    (8, 32),
    (32, 8),
    (16, 16),
    (16, 32),
    (32, 16),
    (32, 32),
    (64, 64),
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct TransformRule {
    /// Horizontal down-sampling factor.
    pub gamma: usize,
    /// Vertical down-sampling factor.
    pub delta: usize,
    pub transpose: bool,
    /// Shape of the network that predicts the transformed block.
    pub network: BlockShape,
}

impl TransformRule {
    /// Block shape after down-sampling, before any transposition.
    pub fn reduced(&self, shape: BlockShape) -> BlockShape {
        (shape.0 / self.delta, shape.1 / self.gamma)
    }
}

pub fn is_network_shape(shape: BlockShape) -> bool {
    NETWORK_SHAPES.contains(&shape)
}

pub fn is_predicted_shape(shape: BlockShape) -> bool {
    PREDICTED_SHAPES.contains(&shape)
}

/// The transformation for a `h x w` block, `None` where the neural mode is
/// disallowed.
pub fn transform_rule(h: usize, w: usize) -> Option<TransformRule> {
    let (gamma, delta, transpose, network) = match (h, w) {
        (4, 4) => (1, 1, false, (4, 4)),
        (4, 8) => (1, 1, false, (4, 8)),
        (8, 4) => (1, 1, true, (4, 8)),
        (4, 16) => (1, 1, false, (4, 16)),
        (16, 4) => (1, 1, true, (4, 16)),
        (4, 32) => (1, 1, false, (4, 32)),
        (32, 4) => (1, 1, true, (4, 32)),
        (8, 8) => (1, 1, false, (8, 8)),
        (8, 16) => (1, 1, false, (8, 16)),
        (16, 8) => (1, 1, true, (8, 16)),
        (8, 32) => (2, 1, false, (8, 16)),
        (32, 8) => (1, 2, true, (8, 16)),
        (16, 16) => (1, 1, false, (16, 16)),
        (16, 32) => (2, 1, false, (16, 16)),
        (32, 16) => (1, 2, false, (16, 16)),
        (32, 32) => (2, 2, false, (16, 16)),
        (64, 64) => (4, 4, false, (16, 16)),
        _ => return None,
    };
    Some(TransformRule { gamma, delta, transpose, network })
}
