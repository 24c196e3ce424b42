//! Control around a neural in-loop filter.
//!
//! The filter predicts the residual between the unfiltered reconstruction
//! and the original. Its output is combined with the deblocked picture by
//! a least-squares scale, and the encoder picks, per picture or per block,
//! whether to filter and which QP parameter to feed the model.

pub mod inputs;
pub mod reference;
pub mod scale;
pub mod select;

pub use inputs::{apply_nn_filter, FilterInputs, PatchLayout, BORDER};
pub use scale::{apply_scale, convex_combination, derive_scale, scaled_residual, sse, Scale, SCALE_STEPS};
pub use select::{
    candidate_list, compose, finalize, granularity, lambda, layer_class, select_from_planes, select_params,
    temporal_gate, BlockChoice, Bitrate, FilterDecision, FilterKind, FilterMode, LayerClass, SelectOptions,
};
