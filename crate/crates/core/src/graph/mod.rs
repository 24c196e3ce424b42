//! Immutable layer graphs.
//!
//! A [`Graph`] is a DAG of [`Node`]s over a single element width. Graph
//! inputs and nodes share one id space; node inputs refer to either.

mod analysis;
mod exec;
mod format;

use std::collections::{BTreeMap, HashMap};

use crate::kernels::{ConvParams, Padding};
use crate::sparse::AnySparse;
use crate::tensor::{ElementWidth, Tensor};

pub use analysis::{Analysis, ValueInfo, Violation};
pub use exec::{infer, ExecContext};

macro_rules! op_kinds {
    ($($name:ident = $code:literal),* $(,)?) => {
        #[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub enum OpKind {
            $($name,)*
        }

        impl OpKind {
            pub const ALL: &'static [OpKind] = &[$(OpKind::$name,)*];

            pub fn code(self) -> u16 {
                match self {
                    $(OpKind::$name => $code,)*
                }
            }

            pub fn from_code(code: u16) -> Option<Self> {
                match code {
                    $($code => Some(OpKind::$name),)*
                    _ => None,
                }
            }

            pub fn name(self) -> &'static str {
                match self {
                    $(OpKind::$name => stringify!($name),)*
                }
            }
        }
    };
}

op_kinds! {
    Const = 0,
    MatMul = 1,
    SparseMatMul = 2,
    Conv2D = 3,
    Conv2DTranspose = 4,
    Add = 5,
    BiasAdd = 6,
    Mul = 7,
    Concat = 8,
    MaxPool = 9,
    Maximum = 10,
    Relu = 11,
    PRelu = 12,
    LeakyRelu = 13,
    Flatten = 14,
    Transpose = 15,
    Reshape = 16,
    Slice = 17,
    Expand = 18,
    Shape = 19,
}

/// Number of inputs a kind accepts.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Arity {
    Exactly(usize),
    AtLeast(usize),
}

impl Arity {
    pub fn accepts(self, n: usize) -> bool {
        match self {
            Arity::Exactly(k) => n == k,
            Arity::AtLeast(k) => n >= k,
        }
    }
}

impl std::fmt::Display for Arity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Arity::Exactly(k) => write!(f, "{k}"),
            Arity::AtLeast(k) => write!(f, "at least {k}"),
        }
    }
}

impl OpKind {
    pub fn arity(self) -> Arity {
        use OpKind::*;
        match self {
            Const => Arity::Exactly(0),
            MatMul | Conv2D | Conv2DTranspose | Add | BiasAdd | Mul | Maximum | PRelu => Arity::Exactly(2),
            Concat => Arity::AtLeast(1),
            SparseMatMul | MaxPool | Relu | LeakyRelu | Flatten | Transpose | Reshape | Slice | Expand | Shape => {
                Arity::Exactly(1)
            }
        }
    }

    /// Kinds whose output quantizer is `q0 - q_i`.
    pub fn has_internal_shift(self) -> bool {
        matches!(
            self,
            OpKind::MatMul | OpKind::SparseMatMul | OpKind::Conv2D | OpKind::Conv2DTranspose | OpKind::Mul
        )
    }

    pub fn parse(s: &str) -> Option<Self> {
        OpKind::ALL.iter().copied().find(|k| k.name().eq_ignore_ascii_case(s))
    }
}

impl std::fmt::Display for OpKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Per-node attributes. Unset fields take the kind's default.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Attrs {
    pub stride: Option<u32>,
    pub groups: Option<u32>,
    pub padding: Option<Padding>,
    pub alpha: Option<f32>,
    pub q_i: Option<u32>,
    pub axis: Option<i64>,
    pub kernel: Option<u32>,
    pub shape: Option<Vec<i64>>,
    pub perm: Option<Vec<u32>>,
    pub start: Option<i64>,
    pub end: Option<i64>,
}

impl Attrs {
    pub fn q_i(&self) -> u32 {
        self.q_i.unwrap_or(0)
    }

    pub fn conv_params(&self) -> ConvParams {
        ConvParams {
            stride: self.stride.unwrap_or(1) as usize,
            groups: self.groups.unwrap_or(1) as usize,
            padding: self.padding.unwrap_or_default(),
        }
    }

    /// Concat and Slice default to the channel axis.
    pub fn axis(&self) -> i64 {
        self.axis.unwrap_or(-1)
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub enum Payload {
    #[default]
    None,
    Tensor(Tensor),
    Sparse(AnySparse),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Node {
    pub id: u32,
    pub kind: OpKind,
    pub inputs: Vec<u32>,
    pub attrs: Attrs,
    pub payload: Payload,
}

impl Node {
    pub fn op(id: u32, kind: OpKind, inputs: impl Into<Vec<u32>>) -> Self {
        Node {
            id,
            kind,
            inputs: inputs.into(),
            attrs: Attrs::default(),
            payload: Payload::None,
        }
    }

    pub fn constant(id: u32, value: impl Into<Tensor>) -> Self {
        Node {
            payload: Payload::Tensor(value.into()),
            ..Node::op(id, OpKind::Const, vec![])
        }
    }

    pub fn sparse_matmul(id: u32, input: u32, weights: impl Into<AnySparse>) -> Self {
        Node {
            payload: Payload::Sparse(weights.into()),
            ..Node::op(id, OpKind::SparseMatMul, vec![input])
        }
    }

    pub fn q_i(mut self, q_i: u32) -> Self {
        self.attrs.q_i = Some(q_i);
        self
    }

    pub fn alpha(mut self, alpha: f32) -> Self {
        self.attrs.alpha = Some(alpha);
        self
    }

    pub fn stride(mut self, stride: u32) -> Self {
        self.attrs.stride = Some(stride);
        self
    }

    pub fn groups(mut self, groups: u32) -> Self {
        self.attrs.groups = Some(groups);
        self
    }

    pub fn padding(mut self, padding: Padding) -> Self {
        self.attrs.padding = Some(padding);
        self
    }

    pub fn axis(mut self, axis: i64) -> Self {
        self.attrs.axis = Some(axis);
        self
    }

    pub fn kernel(mut self, kernel: u32) -> Self {
        self.attrs.kernel = Some(kernel);
        self
    }

    pub fn shape(mut self, shape: impl Into<Vec<i64>>) -> Self {
        self.attrs.shape = Some(shape.into());
        self
    }

    pub fn perm(mut self, perm: impl Into<Vec<u32>>) -> Self {
        self.attrs.perm = Some(perm.into());
        self
    }

    pub fn range(mut self, start: i64, end: i64) -> Self {
        self.attrs.start = Some(start);
        self.attrs.end = Some(end);
        self
    }

    pub fn tensor(&self) -> Option<&Tensor> {
        match &self.payload {
            Payload::Tensor(t) => Some(t),
            _ => None,
        }
    }

    pub fn sparse(&self) -> Option<&AnySparse> {
        match &self.payload {
            Payload::Sparse(s) => Some(s),
            _ => None,
        }
    }
}

/// A declared graph input. `q` is the input quantizer for integer graphs.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InputDesc {
    pub id: u32,
    pub dims: Vec<usize>,
    pub q: u32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Graph {
    width: ElementWidth,
    inputs: Vec<InputDesc>,
    nodes: Vec<Node>,
    outputs: Vec<u32>,
    metadata: BTreeMap<String, String>,
    index: HashMap<u32, usize>,
}

impl Graph {
    pub fn width(&self) -> ElementWidth {
        self.width
    }

    pub fn inputs(&self) -> &[InputDesc] {
        &self.inputs
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn outputs(&self) -> &[u32] {
        &self.outputs
    }

    pub fn metadata(&self) -> &BTreeMap<String, String> {
        &self.metadata
    }

    pub fn meta(&self, key: &str) -> Option<&str> {
        self.metadata.get(key).map(String::as_str)
    }

    pub fn node(&self, id: u32) -> Option<&Node> {
        self.index.get(&id).map(|&i| &self.nodes[i])
    }

    pub fn input(&self, id: u32) -> Option<&InputDesc> {
        self.inputs.iter().find(|d| d.id == id)
    }

    /// Structural and static checks; an empty list means the graph runs.
    pub fn validate(&self) -> Vec<Violation> {
        match Analysis::new(self) {
            Ok(_) => Vec::new(),
            Err(v) => v,
        }
    }

    pub fn analyze(&self) -> Result<Analysis, Vec<Violation>> {
        Analysis::new(self)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        format::save(self)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, crate::FormatError> {
        format::load(bytes)
    }

    /// Float32 twin: constants dequantized, quantizers dropped.
    pub fn to_float(&self) -> Graph {
        let mut b = GraphBuilder::new(ElementWidth::Float32);
        for d in &self.inputs {
            b = b.input(d.id, d.dims.clone(), 0);
        }
        for n in &self.nodes {
            let mut n = n.clone();
            n.payload = match n.payload {
                Payload::Tensor(t) => Payload::Tensor(Tensor::F32(t.dequantize())),
                Payload::Sparse(s) => Payload::Sparse(AnySparse::F32(s.to_f32())),
                Payload::None => Payload::None,
            };
            b = b.node(n);
        }
        b.outputs(self.outputs.iter().copied()).metadata(self.metadata.clone()).build()
    }

    pub fn to_builder(&self) -> GraphBuilder {
        GraphBuilder {
            width: self.width,
            inputs: self.inputs.clone(),
            nodes: self.nodes.clone(),
            outputs: self.outputs.clone(),
            metadata: self.metadata.clone(),
        }
    }
}

/// Assembles a [`Graph`]. Building never fails; call
/// [`Graph::validate`] to check the result.
#[derive(Clone, Debug)]
pub struct GraphBuilder {
    width: ElementWidth,
    inputs: Vec<InputDesc>,
    nodes: Vec<Node>,
    outputs: Vec<u32>,
    metadata: BTreeMap<String, String>,
}

impl GraphBuilder {
    pub fn new(width: ElementWidth) -> Self {
        GraphBuilder {
            width,
            inputs: Vec::new(),
            nodes: Vec::new(),
            outputs: Vec::new(),
            metadata: BTreeMap::new(),
        }
    }

    pub fn width(mut self, width: ElementWidth) -> Self {
        self.width = width;
        self
    }

    pub fn input(mut self, id: u32, dims: impl Into<Vec<usize>>, q: u32) -> Self {
        self.inputs.push(InputDesc { id, dims: dims.into(), q });
        self
    }

    pub fn node(mut self, node: Node) -> Self {
        self.nodes.push(node);
        self
    }

    pub fn output(mut self, id: u32) -> Self {
        self.outputs.push(id);
        self
    }

    pub fn outputs(mut self, ids: impl IntoIterator<Item = u32>) -> Self {
        self.outputs.extend(ids);
        self
    }

    pub fn meta(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.metadata.insert(key.into(), value.into());
        self
    }

    pub fn metadata(mut self, metadata: BTreeMap<String, String>) -> Self {
        self.metadata = metadata;
        self
    }

    pub fn inputs_mut(&mut self) -> &mut Vec<InputDesc> {
        &mut self.inputs
    }

    pub fn nodes_mut(&mut self) -> &mut Vec<Node> {
        &mut self.nodes
    }

    pub fn build(self) -> Graph {
        let mut index = HashMap::with_capacity(self.nodes.len());
        for (i, n) in self.nodes.iter().enumerate() {
            index.entry(n.id).or_insert(i);
        }
        Graph {
            width: self.width,
            inputs: self.inputs,
            nodes: self.nodes,
            outputs: self.outputs,
            metadata: self.metadata,
            index,
        }
    }
}
