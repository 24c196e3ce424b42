use qnn_core::{ExecError, TensorError};

#[derive(Debug, thiserror::Error)]
pub enum CodecError {
    #[error("block {h}x{w} at ({x},{y}) does not fit in a {width}x{height} frame")]
    BlockOutside { x: usize, y: usize, h: usize, w: usize, width: usize, height: usize },
    #[error("context of the block at ({x},{y}) leaves the frame")]
    OutOfFrame { x: usize, y: usize },
    #[error("no neural prediction for {h}x{w} blocks")]
    Disallowed { h: usize, w: usize },
    #[error("no model for the {h}x{w} network")]
    MissingModel { h: usize, w: usize },
    #[error("expected {expected} values, got {actual}")]
    ShapeMismatch { expected: usize, actual: usize },
    #[error("plane is {found:?}, expected {expected:?}")]
    PlaneDims { expected: (usize, usize), found: (usize, usize) },
    #[error("missing input plane {0}")]
    MissingPlane(&'static str),
    #[error("model layout: {0}")]
    ModelLayout(String),
    #[error("sample value {value} does not fit {bits} bits")]
    SampleRange { value: i64, bits: u32 },
    #[error(transparent)]
    Exec(#[from] ExecError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("image: {0}")]
    Image(String),
}
