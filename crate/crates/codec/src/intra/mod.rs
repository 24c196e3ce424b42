//! Neural intra prediction.
//!
//! A block is predicted from an L-shaped context of decoded samples: the
//! context is brought to one of seven network shapes by down-sampling and
//! transposition, centred on its mean and scaled, run through the
//! network, and the output is scaled back, clipped and mapped to the block.
//! The network also emits the conventional mode closest to its prediction
//! (repIdx, used for MPM lists) and two secondary-transform group indices.

pub mod context;
pub mod predict;
pub mod process;
pub mod reference;
pub mod shape;
pub mod signal;

pub use context::{apply_transform, extract_context, invert_transform, ContextSpec, Decoded, IntraContext};
pub use predict::{predict_block, IntraModel, IntraModels, Prediction, PredictionOutputs};
pub use process::{postprocess, preprocess, Numeric};
pub use shape::{transform_rule, BlockShape, TransformRule};
pub use signal::{mpm_substitute, signal_chroma, signal_luma, ChromaMode, LumaPath, NeighborMode};
