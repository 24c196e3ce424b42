//! Mode signaling for luma and chroma, and MPM candidates from
//! neural-predicted neighbours.

use super::shape::{is_predicted_shape, BlockShape};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LumaPath {
    NnMode,
    /// Regular mode signaling; `flag_present` tells whether a zero
    /// nnFlagY preceded it.
    Regular { flag_present: bool },
}

/// Decodes the luma path from nnFlagY, which exists only for predicted shapes.
pub fn signal_luma(shape: BlockShape, nn_flag_y: bool) -> LumaPath {
    match (is_predicted_shape(shape), nn_flag_y) {
        (true, true) => LumaPath::NnMode,
        (true, false) => LumaPath::Regular { flag_present: true },
        (false, _) => LumaPath::Regular { flag_present: false },
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ChromaMode {
    NnMode,
    Planar,
    /// Regular chroma signaling from the DM flag on.
    Regular,
}

/// Chroma mode decision.
///
/// With a neural-predicted collocated luma block, DM becomes the neural
/// mode for predicted shapes and PLANAR otherwise. Without one, a
/// predicted shape reads nnFlagC before the DM flag.
pub fn signal_chroma(collocated_nn: bool, shape: BlockShape, nn_flag_c: bool, dm: bool) -> ChromaMode {
    let predicted = is_predicted_shape(shape);
    match (collocated_nn, predicted) {
        (true, true) if dm => ChromaMode::NnMode,
        (true, false) if dm => ChromaMode::Planar,
        (false, true) if nn_flag_c => ChromaMode::NnMode,
        _ => ChromaMode::Regular,
    }
}

/// Whether nnFlagC is written for a chroma block.
pub fn chroma_flag_present(collocated_nn: bool, shape: BlockShape) -> bool {
    !collocated_nn && is_predicted_shape(shape)
}

pub const PLANAR: u8 = 0;
pub const DC: u8 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NeighborMode {
    /// Conventional mode index in `[0, 66]`.
    Conventional(u8),
    Nn { rep_idx: u8 },
}

/// The index a neighbouring block contributes to the MPM list.
pub fn mpm_substitute(n: NeighborMode) -> u8 {
    match n {
        NeighborMode::Conventional(m) => m,
        NeighborMode::Nn { rep_idx } => rep_idx,
    }
}
