use thiserror::Error;

use crate::graph::Violation;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TensorError {
    #[error("payload has {actual} elements, dims require {expected}")]
    PayloadLength { expected: usize, actual: usize },
    #[error("zero extent in dims {0:?}")]
    ZeroExtent(Vec<usize>),
    #[error("tensor too large")]
    TooLarge,
    #[error("truncated tensor at byte {offset}")]
    Truncated { offset: usize },
    #[error("bad STN1 magic")]
    BadMagic,
    #[error("unknown width code {0}")]
    BadWidth(u8),
    #[error("negative quantizer {0}")]
    NegativeQuantizer(i8),
    #[error("{0} trailing bytes after tensor")]
    TrailingBytes(usize),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("quantizer order violated: q0={q0} < q1={q1}")]
    QuantizerOrder { q0: u32, q1: u32 },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("unsupported stride {0}")]
    UnsupportedStride(usize),
    #[error("LeakyReLU slope {0} outside (-1, 1)")]
    SlopeOutOfRange(f32),
    #[error("element width mismatch: expected {expected}, found {found}")]
    WidthMismatch {
        expected: crate::ElementWidth,
        found: crate::ElementWidth,
    },
    #[error("bad attribute: {0}")]
    Attribute(String),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

pub(crate) fn shape_err(msg: impl Into<String>) -> KernelError {
    KernelError::ShapeMismatch(msg.into())
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FormatError {
    #[error("bad SMF1 magic")]
    BadMagic,
    #[error("unsupported model version {0}")]
    BadVersion(u32),
    #[error("truncated model at byte {offset}")]
    Truncated { offset: usize },
    #[error("invalid node {id} at byte {offset}: {reason}")]
    InvalidNode { id: u32, offset: usize, reason: String },
    #[error("invalid model: {0}")]
    Invalid(String),
    #[error("tensor payload at byte {offset}: {source}")]
    Tensor { offset: usize, source: TensorError },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExecError {
    #[error("graph is not executable: {}", format_violations(.0))]
    Invalid(Vec<Violation>),
    #[error("input {index}: {reason}")]
    Input { index: usize, reason: String },
    #[error("node {id}: {source}")]
    Node { id: u32, source: KernelError },
}

fn format_violations(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuantizeError {
    #[error("node {node} cannot be quantized: {reason}")]
    Unquantizable { node: u32, reason: String },
    #[error("calibration set is empty")]
    CalibrationEmpty,
    #[error("target width must be an integer width, got {0}")]
    NotIntegerWidth(crate::ElementWidth),
    #[error("source graph must be float32, got {0}")]
    NotFloatGraph(crate::ElementWidth),
    #[error(transparent)]
    Exec(#[from] ExecError),
}
