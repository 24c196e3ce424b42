//! Per-picture filter control: candidate parameters, granularity, the
//! rate-distortion choice between off, uniform and per-block filtering,
//! and the final combination with the deblocked picture.

use qnn_core::{ExecOptions, Graph};

use super::inputs::{apply_nn_filter, FilterInputs};
use super::scale::{apply_scale, derive_scale, sse, Scale};
use crate::error::CodecError;
use crate::SamplePlane;

/// Lowest temporal layer treated as high and filtered with collocated inputs.
pub const HIGH_LAYER_TID: u32 = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LayerClass {
    Low,
    High,
}

pub fn layer_class(tid: u32) -> LayerClass {
    if tid >= HIGH_LAYER_TID {
        LayerClass::High
    } else {
        LayerClass::Low
    }
}

/// QP parameters tried for a sequence QP `q`.
pub fn candidate_list(q: i32, layer: LayerClass) -> [i32; 3] {
    match layer {
        LayerClass::Low => [q, q - 5, q - 10],
        LayerClass::High => [q, q - 5, q + 5],
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FilterKind {
    Regular,
    /// Regular inputs plus the two collocated planes.
    Temporal,
}

pub fn temporal_gate(tid: u32) -> FilterKind {
    match layer_class(tid) {
        LayerClass::High => FilterKind::Temporal,
        LayerClass::Low => FilterKind::Regular,
    }
}

/// `0.57 * 2^((qp - 12) / 3)`.
pub fn lambda(qp: i32) -> f64 {
    0.57 * ((qp - 12) as f64 / 3.0).exp2()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Bitrate {
    Low,
    High,
}

/// Side of the square blocks used for on/off and parameter signaling.
pub fn granularity(width: usize, height: usize, rate: Bitrate) -> usize {
    let lines = width.min(height);
    match (lines, rate) {
        (2160.., _) => 256,
        (1080.., Bitrate::Low) => 128,
        (1080.., Bitrate::High) => 64,
        (480.., _) => 64,
        (_, Bitrate::Low) => 64,
        (_, Bitrate::High) => 32,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BlockChoice {
    Off,
    /// 1-based index into the candidate list.
    Param(u8),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum FilterMode {
    Off,
    Uniform(u8),
    /// One choice per block in raster order.
    PerBlock(Vec<BlockChoice>),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SelectOptions {
    pub lambda: f64,
    /// Block side for per-block decisions.
    pub block: usize,
    /// Only the first candidate is used; on/off control remains.
    pub all_intra: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FilterDecision {
    pub mode: FilterMode,
    pub block: usize,
    /// Off, each uniform parameter, then per-block: `SSE + lambda * bits`.
    pub costs: Vec<f64>,
    /// Scaling of the chosen NN output against the deblocked picture.
    pub scale: Scale,
}

/// Bits to signal one of `n` parameters.
pub fn param_bits(n: usize) -> u32 {
    n.next_power_of_two().trailing_zeros()
}

/// Blocks of side `block` covering the picture, raster order, as
/// `(x, y, w, h)`.
pub fn blocks(width: usize, height: usize, block: usize) -> Vec<(usize, usize, usize, usize)> {
    (0..height)
        .step_by(block)
        .flat_map(|y| (0..width).step_by(block).map(move |x| (x, y, block.min(width - x), block.min(height - y))))
        .collect()
}

fn block_sse(a: &SamplePlane, b: &SamplePlane, (x, y, w, h): (usize, usize, usize, usize)) -> u64 {
    let mut s = 0u64;
    for r in y..y + h {
        for c in x..x + w {
            s += (a.get(c, r) as i64 - b.get(c, r) as i64).pow(2) as u64;
        }
    }
    s
}

/// Chooses among off (the deblocked picture), each candidate output for
/// the whole picture, and a per-block choice. Bits: nothing for off,
/// `param_bits` for uniform, and per block one on/off bit plus
/// `param_bits` when on. Ties go to the lower index.
pub fn select_from_planes(
    orig: &SamplePlane,
    db: &SamplePlane,
    filtered: &[SamplePlane],
    opts: SelectOptions,
) -> Result<FilterDecision, CodecError> {
    orig.same_dims(db)?;
    for f in filtered {
        orig.same_dims(f)?;
    }
    let filtered = if opts.all_intra { &filtered[..filtered.len().min(1)] } else { filtered };
    let pb = param_bits(filtered.len()) as f64;
    let lam = opts.lambda;

    let mut costs = vec![sse(orig, db) as f64];
    costs.extend(filtered.iter().map(|f| sse(orig, f) as f64 + lam * pb));

    let mut choices = Vec::new();
    let mut per_block = 0.0;
    for b in blocks(orig.width(), orig.height(), opts.block) {
        let mut best = (block_sse(orig, db, b) as f64 + lam, BlockChoice::Off);
        for (i, f) in filtered.iter().enumerate() {
            let c = block_sse(orig, f, b) as f64 + lam * (1.0 + pb);
            if c < best.0 {
                best = (c, BlockChoice::Param(i as u8 + 1));
            }
        }
        per_block += best.0;
        choices.push(best.1);
    }
    costs.push(per_block);

    let mut arg = 0;
    for (i, &c) in costs.iter().enumerate() {
        if c < costs[arg] {
            arg = i;
        }
    }
    let mode = match arg {
        0 => FilterMode::Off,
        i if i <= filtered.len() => FilterMode::Uniform(i as u8),
        _ => FilterMode::PerBlock(choices),
    };
    let mut decision = FilterDecision { mode, block: opts.block, costs, scale: derive_scale(orig, db, db)? };
    decision.scale = derive_scale(orig, &compose(&decision, db, filtered), db)?;
    Ok(decision)
}

/// The picture the decision selects, before scaling.
pub fn compose(decision: &FilterDecision, db: &SamplePlane, filtered: &[SamplePlane]) -> SamplePlane {
    match &decision.mode {
        FilterMode::Off => db.clone(),
        FilterMode::Uniform(i) => filtered[*i as usize - 1].clone(),
        FilterMode::PerBlock(choices) => {
            let mut out = db.clone();
            for (&(x, y, w, h), ch) in blocks(db.width(), db.height(), decision.block).iter().zip(choices) {
                if let BlockChoice::Param(i) = ch {
                    out.paste(x, y, &filtered[*i as usize - 1].crop(x, y, w, h));
                }
            }
            out
        }
    }
}

/// Filters with every candidate QP and selects. Returns the decision and
/// the candidate outputs.
pub fn select_params(
    orig: &SamplePlane,
    db: &SamplePlane,
    inputs: &FilterInputs,
    g: &Graph,
    list: &[i32],
    opts: SelectOptions,
    threads: usize,
    exec: ExecOptions,
) -> Result<(FilterDecision, Vec<SamplePlane>), CodecError> {
    let used = if opts.all_intra { &list[..list.len().min(1)] } else { list };
    let filtered =
        used.iter().map(|&qp| apply_nn_filter(inputs, g, qp, threads, exec)).collect::<Result<Vec<_>, _>>()?;
    Ok((select_from_planes(orig, db, &filtered, opts)?, filtered))
}

/// Final picture: the NN and deblocked pictures combined with the
/// signaled scale, then the post-filter stage (ALF and CCALF live
/// outside this crate and plug in as `post`).
pub fn finalize(
    nn: &SamplePlane,
    db: &SamplePlane,
    steps: i32,
    bit_depth: u32,
    post: Option<&dyn Fn(SamplePlane) -> SamplePlane>,
) -> Result<SamplePlane, CodecError> {
    let combined = apply_scale(nn, db, steps, bit_depth)?;
    Ok(match post {
        Some(f) => f(combined),
        None => combined,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn param_bits_by_count() {
        assert_eq!(param_bits(1), 0);
        assert_eq!(param_bits(2), 1);
        assert_eq!(param_bits(3), 2);
    }

    #[test]
    fn blocks_cover_edges() {
        let b = blocks(70, 40, 32);
        assert_eq!(b.len(), 6);
        assert_eq!(b[2], (64, 0, 6, 32));
        assert_eq!(b[5], (64, 32, 6, 8));
    }
}
