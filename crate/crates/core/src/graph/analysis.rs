//! Validation, execution order, and static shape/quantizer prediction.

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap, HashMap, HashSet};
use std::fmt;

use super::{Graph, Node, OpKind, Payload};
use crate::error::KernelError;
use crate::kernels::{broadcast_binary, concat_dims, matmul_dims, shape, Broadcast, ConvGeometry};

#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    DuplicateId(u32),
    MissingInput { node: u32, input: u32 },
    Cycle(Vec<u32>),
    Arity { node: u32, kind: OpKind, expected: super::Arity, found: usize },
    Attribute { node: u32, reason: String },
    WidthMismatch { node: u32, reason: String },
    MissingPayload(u32),
    Shape { node: u32, reason: String },
    QuantizerOrder { node: u32, q0: u32, q1: u32 },
    MissingOutput(u32),
    UnreachableOutput(u32),
    NoOutputs,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DuplicateId(id) => write!(f, "id {id} defined more than once"),
            Violation::MissingInput { node, input } => write!(f, "node {node} reads undefined id {input}"),
            Violation::Cycle(ids) => write!(f, "cycle through nodes {ids:?}"),
            Violation::Arity { node, kind, expected, found } => {
                write!(f, "node {node} ({kind}) takes {expected} inputs, has {found}")
            }
            Violation::Attribute { node, reason } => write!(f, "node {node}: {reason}"),
            Violation::WidthMismatch { node, reason } => write!(f, "node {node}: {reason}"),
            Violation::MissingPayload(id) => write!(f, "node {id} lacks its weight payload"),
            Violation::Shape { node, reason } => write!(f, "node {node}: {reason}"),
            Violation::QuantizerOrder { node, q0, q1 } => {
                write!(f, "node {node}: quantizer order violated (q0={q0} < q1={q1})")
            }
            Violation::MissingOutput(id) => write!(f, "output {id} is not defined"),
            Violation::UnreachableOutput(id) => write!(f, "output {id} does not depend on any input"),
            Violation::NoOutputs => write!(f, "graph declares no outputs"),
        }
    }
}

/// Statically known dims and quantizer of a value.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ValueInfo {
    pub dims: Vec<usize>,
    pub q: u32,
}

/// Result of a successful validation.
#[derive(Clone, Debug)]
pub struct Analysis {
    /// Node ids in execution order.
    pub order: Vec<u32>,
    /// Dims and quantizer of every input and node.
    pub values: HashMap<u32, ValueInfo>,
}

impl Analysis {
    pub fn new(g: &Graph) -> Result<Self, Vec<Violation>> {
        let mut v = structural(g);
        if !v.is_empty() {
            return Err(v);
        }
        let order = match topo_order(g) {
            Ok(o) => o,
            Err(cycle) => return Err(vec![Violation::Cycle(cycle)]),
        };
        check_reachability(g, &mut v);
        let values = infer_values(g, &order, &mut v);
        if v.is_empty() {
            Ok(Analysis { order, values })
        } else {
            Err(v)
        }
    }

    pub fn info(&self, id: u32) -> Option<&ValueInfo> {
        self.values.get(&id)
    }
}

fn structural(g: &Graph) -> Vec<Violation> {
    let mut v = Vec::new();
    let mut seen = HashSet::new();
    for id in g.inputs.iter().map(|d| d.id).chain(g.nodes.iter().map(|n| n.id)) {
        if !seen.insert(id) {
            v.push(Violation::DuplicateId(id));
        }
    }
    for d in &g.inputs {
        if d.dims.is_empty() || d.dims.iter().any(|&x| x == 0) {
            v.push(Violation::Shape { node: d.id, reason: format!("input dims {:?} must be positive", d.dims) });
        }
        if !g.width.is_integer() && d.q != 0 {
            v.push(Violation::Attribute { node: d.id, reason: "float input with nonzero quantizer".into() });
        }
    }
    for n in &g.nodes {
        for &i in &n.inputs {
            if !seen.contains(&i) {
                v.push(Violation::MissingInput { node: n.id, input: i });
            }
        }
        let arity = n.kind.arity();
        if !arity.accepts(n.inputs.len()) {
            v.push(Violation::Arity { node: n.id, kind: n.kind, expected: arity, found: n.inputs.len() });
        }
        check_payload(g, n, &mut v);
        check_attrs(g, n, &mut v);
    }
    if g.outputs.is_empty() {
        v.push(Violation::NoOutputs);
    }
    for &o in &g.outputs {
        if !seen.contains(&o) {
            v.push(Violation::MissingOutput(o));
        }
    }
    v
}

fn check_payload(g: &Graph, n: &Node, v: &mut Vec<Violation>) {
    let width = match (&n.payload, n.kind) {
        (Payload::Tensor(t), OpKind::Const) => t.width(),
        (Payload::Sparse(s), OpKind::SparseMatMul) => s.width(),
        (Payload::None, OpKind::Const | OpKind::SparseMatMul) => {
            v.push(Violation::MissingPayload(n.id));
            return;
        }
        (Payload::None, _) => return,
        _ => {
            v.push(Violation::Attribute { node: n.id, reason: format!("{} cannot carry this payload", n.kind) });
            return;
        }
    };
    if width != g.width {
        v.push(Violation::WidthMismatch {
            node: n.id,
            reason: format!("payload is {width}, graph is {}", g.width),
        });
    }
}

fn check_attrs(g: &Graph, n: &Node, v: &mut Vec<Violation>) {
    let a = &n.attrs;
    let mut bad = |reason: String| v.push(Violation::Attribute { node: n.id, reason });
    if let Some(s) = a.stride {
        if s != 1 && s != 2 {
            bad(format!("stride {s} not in {{1, 2}}"));
        }
    }
    if a.groups == Some(0) {
        bad("groups must be positive".into());
    }
    match n.kind {
        OpKind::LeakyRelu => match a.alpha {
            None => bad("LeakyRelu needs alpha".into()),
            Some(al) if !al.is_finite() => bad(format!("alpha {al} is not finite")),
            Some(al) if g.width.is_integer() && al.abs() >= 1.0 => bad(format!("alpha {al} outside (-1, 1)")),
            _ => {}
        },
        OpKind::MaxPool if a.kernel.unwrap_or(0) == 0 => bad("MaxPool needs a positive kernel".into()),
        OpKind::Reshape | OpKind::Expand if a.shape.is_none() => bad(format!("{} needs a shape", n.kind)),
        OpKind::Transpose if a.perm.is_none() => bad("Transpose needs perm".into()),
        OpKind::Slice if a.start.is_none() || a.end.is_none() => bad("Slice needs start and end".into()),
        _ => {}
    }
}

/// Kahn's algorithm, taking the smallest ready id first.
fn topo_order(g: &Graph) -> Result<Vec<u32>, Vec<u32>> {
    let inputs: HashSet<u32> = g.inputs.iter().map(|d| d.id).collect();
    let mut pending: HashMap<u32, usize> = HashMap::new();
    let mut users: HashMap<u32, Vec<u32>> = HashMap::new();
    for n in &g.nodes {
        let deps: BTreeSet<u32> = n.inputs.iter().copied().filter(|i| !inputs.contains(i)).collect();
        pending.insert(n.id, deps.len());
        for d in deps {
            users.entry(d).or_default().push(n.id);
        }
    }
    let mut ready: BinaryHeap<Reverse<u32>> =
        pending.iter().filter(|(_, &c)| c == 0).map(|(&id, _)| Reverse(id)).collect();
    let mut order = Vec::with_capacity(g.nodes.len());
    while let Some(Reverse(id)) = ready.pop() {
        order.push(id);
        for &u in users.get(&id).map(Vec::as_slice).unwrap_or(&[]) {
            let c = pending.get_mut(&u).expect("user is a node");
            *c -= 1;
            if *c == 0 {
                ready.push(Reverse(u));
            }
        }
    }
    if order.len() == g.nodes.len() {
        Ok(order)
    } else {
        let done: HashSet<u32> = order.iter().copied().collect();
        let mut stuck: Vec<u32> = g.nodes.iter().map(|n| n.id).filter(|id| !done.contains(id)).collect();
        stuck.sort_unstable();
        Err(stuck)
    }
}

fn check_reachability(g: &Graph, v: &mut Vec<Violation>) {
    let mut memo: HashMap<u32, bool> = g.inputs.iter().map(|d| (d.id, true)).collect();
    fn reach(g: &Graph, id: u32, memo: &mut HashMap<u32, bool>) -> bool {
        if let Some(&r) = memo.get(&id) {
            return r;
        }
        let r = g
            .node(id)
            .map(|n| n.inputs.clone())
            .unwrap_or_default()
            .into_iter()
            .any(|i| reach(g, i, memo));
        memo.insert(id, r);
        r
    }
    for &o in &g.outputs {
        if !reach(g, o, &mut memo) {
            v.push(Violation::UnreachableOutput(o));
        }
    }
}

fn infer_values(g: &Graph, order: &[u32], v: &mut Vec<Violation>) -> HashMap<u32, ValueInfo> {
    let int = g.width.is_integer();
    let mut values: HashMap<u32, ValueInfo> =
        g.inputs.iter().map(|d| (d.id, ValueInfo { dims: d.dims.clone(), q: if int { d.q } else { 0 } })).collect();
    for &id in order {
        let n = g.node(id).expect("ordered node exists");
        let args: Option<Vec<&ValueInfo>> = n.inputs.iter().map(|i| values.get(i)).collect();
        // An earlier failure leaves inputs unknown; skip silently.
        let Some(args) = args else { continue };
        match node_info(n, &args) {
            Ok(mut info) => {
                if !int {
                    info.q = 0;
                }
                values.insert(id, info);
            }
            Err(NodeIssue::Shape(reason)) => v.push(Violation::Shape { node: id, reason }),
            Err(NodeIssue::Order(q0, q1)) if int => v.push(Violation::QuantizerOrder { node: id, q0, q1 }),
            Err(NodeIssue::Order(..)) => {}
        }
    }
    values
}

enum NodeIssue {
    Shape(String),
    Order(u32, u32),
}

impl From<KernelError> for NodeIssue {
    fn from(e: KernelError) -> Self {
        NodeIssue::Shape(e.to_string())
    }
}

fn ordered(q0: u32, q1: u32) -> Result<u32, NodeIssue> {
    q0.checked_sub(q1).ok_or(NodeIssue::Order(q0, q1))
}

/// Output dims and quantizer of one node given its inputs.
fn node_info(n: &Node, args: &[&ValueInfo]) -> Result<ValueInfo, NodeIssue> {
    let a = &n.attrs;
    let info = |dims: Vec<usize>, q: u32| Ok(ValueInfo { dims, q });
    let first = args.first().map(|x| (x.dims.as_slice(), x.q));
    let (d0, q0) = first.unwrap_or((&[], 0));
    match n.kind {
        OpKind::Const => {
            let t = n.tensor().expect("checked payload");
            info(t.dims().to_vec(), t.q())
        }
        OpKind::MatMul => {
            let (_, _, _, dims) = matmul_dims(d0, &args[1].dims)?;
            info(dims, ordered(q0, a.q_i())?)
        }
        OpKind::SparseMatMul => {
            let s = n.sparse().expect("checked payload");
            match d0.split_last() {
                Some((&k, lead)) if k == s.cols() => {
                    let mut dims = lead.to_vec();
                    dims.push(s.rows());
                    info(dims, ordered(q0, a.q_i())?)
                }
                _ => Err(NodeIssue::Shape(format!("input {d0:?} does not end in {}", s.cols()))),
            }
        }
        OpKind::Conv2D => {
            let geo = ConvGeometry::conv(d0, &args[1].dims, a.conv_params())?;
            info(geo.out_dims(), ordered(q0, a.q_i())?)
        }
        OpKind::Conv2DTranspose => {
            let geo = ConvGeometry::conv_transpose(d0, &args[1].dims, a.conv_params())?;
            info(geo.out_dims(), ordered(q0, a.q_i())?)
        }
        OpKind::Mul => {
            let (dims, _, _) = broadcast_binary(d0, &args[1].dims)?;
            info(dims, ordered(q0, a.q_i())?)
        }
        OpKind::Add => {
            let (dims, _, _) = broadcast_binary(d0, &args[1].dims)?;
            info(dims, q0.min(args[1].q))
        }
        OpKind::BiasAdd | OpKind::PRelu | OpKind::Maximum => {
            let (dims, b0, _) = broadcast_binary(d0, &args[1].dims)?;
            if n.kind != OpKind::Maximum && b0 != Broadcast::Same {
                return Err(NodeIssue::Shape(format!("second operand {:?} larger than {d0:?}", args[1].dims)));
            }
            let q1 = args[1].q;
            let q = match n.kind {
                OpKind::BiasAdd => {
                    ordered(q0, q1)?;
                    q1
                }
                OpKind::Maximum => {
                    ordered(q0, q1)?;
                    q0
                }
                _ => q0,
            };
            info(dims, q)
        }
        OpKind::Concat => {
            let dims: Vec<&[usize]> = args.iter().map(|x| x.dims.as_slice()).collect();
            let (_, out) = concat_dims(&dims, a.axis())?;
            info(out, args.iter().map(|x| x.q).min().unwrap_or(0))
        }
        OpKind::MaxPool => info(shape::maxpool_dims(d0, a.kernel.unwrap_or(1) as usize, a.conv_params())?, q0),
        OpKind::Relu | OpKind::LeakyRelu => info(d0.to_vec(), q0),
        OpKind::Flatten => info(vec![d0.iter().product()], q0),
        OpKind::Transpose => info(shape::transpose_dims(d0, a.perm.as_deref().unwrap_or(&[]))?, q0),
        OpKind::Reshape => info(shape::reshape_dims(d0, a.shape.as_deref().unwrap_or(&[]))?, q0),
        OpKind::Expand => info(shape::expand_dims(d0, a.shape.as_deref().unwrap_or(&[]))?, q0),
        OpKind::Slice => {
            let (_, _, dims) = shape::slice_dims(d0, a.axis(), a.start.unwrap_or(0), a.end.unwrap_or(0))?;
            info(dims, q0)
        }
        OpKind::Shape => info(vec![d0.len()], 0),
    }
}
