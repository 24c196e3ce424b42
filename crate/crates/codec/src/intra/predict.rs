//! Block prediction through the per-shape networks.

use std::collections::BTreeMap;
use std::path::Path;

use qnn_core::{ExecContext, ExecOptions, Graph, Tensor};

use super::context::{apply_transform, extract_context, invert_transform, ContextSpec, Decoded};
use super::process::{postprocess, preprocess, slice, Numeric};
use super::shape::{is_network_shape, transform_rule, BlockShape};
use crate::error::CodecError;
use crate::SamplePlane;

/// Logits for the conventional mode closest to the prediction.
pub const REP_CLASSES: usize = 67;
/// Logits per secondary-transform group index (4 sets x transpose flag).
pub const GRP_CLASSES: usize = 8;

/// Network output length for an `h x w` network: the block, then the
/// repIdx, grpIdx1 and grpIdx2 logits.
pub fn output_len(shape: BlockShape) -> usize {
    shape.0 * shape.1 + REP_CLASSES + 2 * GRP_CLASSES
}

#[derive(Clone, Debug, PartialEq)]
pub struct IntraModel {
    pub shape: BlockShape,
    pub spec: ContextSpec,
    pub graph: Graph,
}

impl IntraModel {
    /// Reads the shape (`intra.h`, `intra.w`) and context spec from the
    /// graph metadata and checks the input and output lengths.
    pub fn new(graph: Graph) -> Result<Self, CodecError> {
        let dim = |k: &str| -> Result<usize, CodecError> {
            graph
                .meta(k)
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| CodecError::ModelLayout(format!("metadata {k} missing or not a number")))
        };
        let shape = (dim("intra.h")?, dim("intra.w")?);
        if !is_network_shape(shape) {
            return Err(CodecError::ModelLayout(format!("no network predicts {}x{} blocks", shape.0, shape.1)));
        }
        let spec = ContextSpec::from_metadata(graph.metadata()).unwrap_or_else(|| ContextSpec::for_network(shape));
        let analysis = graph.analyze().map_err(|v| CodecError::ModelLayout(format!("invalid graph: {v:?}")))?;
        let [input] = graph.inputs() else {
            return Err(CodecError::ModelLayout("expected one input".into()));
        };
        if input.dims != [spec.flat_len(shape.0, shape.1)] {
            return Err(CodecError::ModelLayout(format!(
                "input dims {:?}, context needs [{}]",
                input.dims,
                spec.flat_len(shape.0, shape.1)
            )));
        }
        let [out] = graph.outputs() else {
            return Err(CodecError::ModelLayout("expected one output".into()));
        };
        let n: usize = analysis.info(*out).map_or(0, |v| v.dims.iter().product());
        if n != output_len(shape) {
            return Err(CodecError::ModelLayout(format!("output has {n} values, expected {}", output_len(shape))));
        }
        Ok(IntraModel { shape, spec, graph })
    }
}

/// Networks keyed by the block shape they predict.
#[derive(Clone, Debug, Default)]
pub struct IntraModels {
    models: BTreeMap<BlockShape, IntraModel>,
}

impl IntraModels {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, model: IntraModel) -> Option<IntraModel> {
        self.models.insert(model.shape, model)
    }

    pub fn get(&self, shape: BlockShape) -> Option<&IntraModel> {
        self.models.get(&shape)
    }

    pub fn shapes(&self) -> impl Iterator<Item = BlockShape> + '_ {
        self.models.keys().copied()
    }

    /// Loads every `*.smf1` file in `dir` that carries intra metadata.
    pub fn load_dir(dir: impl AsRef<Path>) -> Result<Self, CodecError> {
        let mut out = IntraModels::new();
        let mut paths: Vec<_> = std::fs::read_dir(dir.as_ref())
            .map_err(|e| CodecError::ModelLayout(format!("{}: {e}", dir.as_ref().display())))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "smf1"))
            .collect();
        paths.sort();
        for p in paths {
            let bytes = std::fs::read(&p).map_err(|e| CodecError::ModelLayout(format!("{}: {e}", p.display())))?;
            let g = Graph::from_bytes(&bytes).map_err(|e| CodecError::ModelLayout(format!("{}: {e}", p.display())))?;
            if g.meta("intra.h").is_some() {
                out.insert(IntraModel::new(g)?);
            }
        }
        Ok(out)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PredictionOutputs {
    pub block: SamplePlane,
    pub rep_idx: u8,
    pub grp_idx1: u8,
    pub grp_idx2: u8,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Prediction {
    Nn(PredictionOutputs),
    /// The context leaves the frame; PLANAR predicts the block instead.
    PlanarFallback,
}

/// Index of the largest value, the lowest index on ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Predicts the `h x w` block at `(x, y)`.
pub fn predict_block(
    frame: &SamplePlane,
    x: usize,
    y: usize,
    h: usize,
    w: usize,
    models: &IntraModels,
    bit_depth: u32,
    decoded: &Decoded,
    opts: ExecOptions,
) -> Result<Prediction, CodecError> {
    let rule = transform_rule(h, w).ok_or(CodecError::Disallowed { h, w })?;
    let (nh, nw) = rule.network;
    let model = models.get(rule.network).ok_or(CodecError::MissingModel { h: nh, w: nw })?;
    let ctx = match extract_context(frame, x, y, h, w, model.spec.for_block(&rule), bit_depth, decoded) {
        Ok(c) => c,
        Err(CodecError::OutOfFrame { .. }) => return Ok(Prediction::PlanarFallback),
        Err(e) => return Err(e),
    };
    let t = apply_transform(&ctx, &rule);
    let input = preprocess(&t, Numeric::of(&model.graph));
    let mut exec = ExecContext::new(&model.graph, opts)?;
    let out: Tensor = exec.run(&[input])?.swap_remove(0);
    let n = nh * nw;
    let pred = postprocess(&slice(&out, 0..n), t.mu, bit_depth, nh, nw)?;
    let logits = slice(&out, n..output_len(rule.network)).to_f64_vec();
    let (rep, grp) = logits.split_at(REP_CLASSES);
    Ok(Prediction::Nn(PredictionOutputs {
        block: invert_transform(&pred, &rule),
        rep_idx: argmax(rep) as u8,
        grp_idx1: argmax(&grp[..GRP_CLASSES]) as u8,
        grp_idx2: argmax(&grp[GRP_CLASSES..]) as u8,
    }))
}
