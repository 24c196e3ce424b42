//! SMF1 model files.
//!
//! ```text
//! "SMF1" | version u32 | width u8
//! inputs:  count u32, then per input: id u32 | q i8 | rank u8 | dims u32..
//! nodes:   count u32, then per node:
//!          id u32 | kind u16 | arity u8 | input ids u32..
//!          attr count u8 | (tag u8 | len u32 | value)..   tags ascending
//!          payload u8 (0 none, 1 tensor, 2 sparse) | len u32 | bytes
//! outputs: count u32 | ids u32..
//! meta:    count u32 | (len u32 | key utf8 | len u32 | value utf8)..  keys ascending
//! ```
//!
//! All integers are little-endian. Tensor payloads are STN1 blobs.

use std::collections::BTreeMap;

use super::{Attrs, Graph, GraphBuilder, InputDesc, Node, OpKind, Payload};
use crate::error::FormatError;
use crate::kernels::Padding;
use crate::sparse::AnySparse;
use crate::tensor::{ElementWidth, Tensor};

const MAGIC: &[u8; 4] = b"SMF1";
const VERSION: u32 = 1;

mod tag {
    pub const STRIDE: u8 = 1;
    pub const GROUPS: u8 = 2;
    pub const PADDING: u8 = 3;
    pub const ALPHA: u8 = 4;
    pub const Q_I: u8 = 5;
    pub const AXIS: u8 = 6;
    pub const KERNEL: u8 = 7;
    pub const SHAPE: u8 = 8;
    pub const PERM: u8 = 9;
    pub const START: u8 = 10;
    pub const END: u8 = 11;
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_blob(out: &mut Vec<u8>, bytes: &[u8]) {
    put_u32(out, bytes.len() as u32);
    out.extend_from_slice(bytes);
}

fn put_attr(out: &mut Vec<u8>, tag: u8, value: &[u8]) {
    out.push(tag);
    put_blob(out, value);
}

fn encode_attrs(a: &Attrs) -> Vec<(u8, Vec<u8>)> {
    let mut v = Vec::new();
    let u32b = |x: u32| x.to_le_bytes().to_vec();
    let i64b = |x: i64| x.to_le_bytes().to_vec();
    if let Some(x) = a.stride {
        v.push((tag::STRIDE, u32b(x)));
    }
    if let Some(x) = a.groups {
        v.push((tag::GROUPS, u32b(x)));
    }
    if let Some(p) = a.padding {
        v.push((tag::PADDING, vec![p.code()]));
    }
    if let Some(x) = a.alpha {
        v.push((tag::ALPHA, x.to_bits().to_le_bytes().to_vec()));
    }
    if let Some(x) = a.q_i {
        v.push((tag::Q_I, u32b(x)));
    }
    if let Some(x) = a.axis {
        v.push((tag::AXIS, i64b(x)));
    }
    if let Some(x) = a.kernel {
        v.push((tag::KERNEL, u32b(x)));
    }
    if let Some(s) = &a.shape {
        v.push((tag::SHAPE, s.iter().flat_map(|d| d.to_le_bytes()).collect()));
    }
    if let Some(p) = &a.perm {
        v.push((tag::PERM, p.iter().flat_map(|d| d.to_le_bytes()).collect()));
    }
    if let Some(x) = a.start {
        v.push((tag::START, i64b(x)));
    }
    if let Some(x) = a.end {
        v.push((tag::END, i64b(x)));
    }
    v
}

pub(super) fn save(g: &Graph) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    put_u32(&mut out, VERSION);
    out.push(g.width().code());
    put_u32(&mut out, g.inputs().len() as u32);
    for d in g.inputs() {
        put_u32(&mut out, d.id);
        out.push(d.q.min(127) as u8);
        out.push(d.dims.len() as u8);
        for &x in &d.dims {
            put_u32(&mut out, x as u32);
        }
    }
    put_u32(&mut out, g.nodes().len() as u32);
    for n in g.nodes() {
        put_u32(&mut out, n.id);
        out.extend_from_slice(&n.kind.code().to_le_bytes());
        out.push(n.inputs.len() as u8);
        for &i in &n.inputs {
            put_u32(&mut out, i);
        }
        let attrs = encode_attrs(&n.attrs);
        out.push(attrs.len() as u8);
        for (t, v) in attrs {
            put_attr(&mut out, t, &v);
        }
        match &n.payload {
            Payload::None => out.push(0),
            Payload::Tensor(t) => {
                out.push(1);
                put_blob(&mut out, &t.to_stn1());
            }
            Payload::Sparse(s) => {
                out.push(2);
                put_blob(&mut out, &s.to_bytes());
            }
        }
    }
    put_u32(&mut out, g.outputs().len() as u32);
    for &o in g.outputs() {
        put_u32(&mut out, o);
    }
    put_u32(&mut out, g.metadata().len() as u32);
    for (k, v) in g.metadata() {
        put_blob(&mut out, k.as_bytes());
        put_blob(&mut out, v.as_bytes());
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], FormatError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or(FormatError::Truncated { offset: self.pos })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, FormatError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, FormatError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, FormatError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn blob(&mut self) -> Result<&'a [u8], FormatError> {
        let n = self.u32()? as usize;
        self.take(n)
    }

    /// Count prefix, rejected early if it cannot fit in the rest of the file.
    fn count(&mut self, min_item: usize) -> Result<usize, FormatError> {
        let at = self.pos;
        let n = self.u32()? as usize;
        if n.saturating_mul(min_item) > self.bytes.len() - self.pos {
            return Err(FormatError::Truncated { offset: at });
        }
        Ok(n)
    }

    fn string(&mut self) -> Result<String, FormatError> {
        let at = self.pos;
        let b = self.blob()?;
        String::from_utf8(b.to_vec()).map_err(|_| FormatError::Invalid(format!("non-UTF-8 string at byte {at}")))
    }
}

fn decode_attr(a: &mut Attrs, tag: u8, v: &[u8]) -> Result<(), String> {
    let u32v = || -> Result<u32, String> { v.try_into().map(u32::from_le_bytes).map_err(|_| "bad u32".into()) };
    let i64v = || -> Result<i64, String> { v.try_into().map(i64::from_le_bytes).map_err(|_| "bad i64".into()) };
    match tag {
        tag::STRIDE => a.stride = Some(u32v()?),
        tag::GROUPS => a.groups = Some(u32v()?),
        tag::PADDING => {
            let [c] = v else { return Err("bad padding".into()) };
            a.padding = Some(Padding::from_code(*c).ok_or_else(|| format!("unknown padding {c}"))?);
        }
        tag::ALPHA => a.alpha = Some(f32::from_bits(u32v()?)),
        tag::Q_I => a.q_i = Some(u32v()?),
        tag::AXIS => a.axis = Some(i64v()?),
        tag::KERNEL => a.kernel = Some(u32v()?),
        tag::SHAPE => {
            if v.len() % 8 != 0 {
                return Err("bad shape list".into());
            }
            a.shape = Some(v.chunks_exact(8).map(|c| i64::from_le_bytes(c.try_into().unwrap())).collect());
        }
        tag::PERM => {
            if v.len() % 4 != 0 {
                return Err("bad perm list".into());
            }
            a.perm = Some(v.chunks_exact(4).map(|c| u32::from_le_bytes(c.try_into().unwrap())).collect());
        }
        tag::START => a.start = Some(i64v()?),
        tag::END => a.end = Some(i64v()?),
        t => return Err(format!("unknown attribute tag {t}")),
    }
    Ok(())
}

fn read_node(r: &mut Reader, width: ElementWidth) -> Result<Node, FormatError> {
    let offset = r.pos;
    let id = r.u32()?;
    let invalid = |reason: String| FormatError::InvalidNode { id, offset, reason };
    let code = r.u16()?;
    let kind = OpKind::from_code(code).ok_or_else(|| invalid(format!("unknown op code {code}")))?;
    let arity = r.u8()? as usize;
    let inputs = (0..arity).map(|_| r.u32()).collect::<Result<Vec<_>, _>>()?;
    let mut attrs = Attrs::default();
    let mut last_tag = 0u8;
    for _ in 0..r.u8()? {
        let t = r.u8()?;
        let v = r.blob()?;
        if t <= last_tag {
            return Err(invalid(format!("attribute tag {t} out of order")));
        }
        last_tag = t;
        decode_attr(&mut attrs, t, v).map_err(invalid)?;
    }
    let payload = match r.u8()? {
        0 => Payload::None,
        1 => {
            let b = r.blob()?;
            Payload::Tensor(Tensor::from_stn1(b).map_err(|e| invalid(format!("constant payload: {e}")))?)
        }
        2 => {
            let b = r.blob()?;
            let (m, used) = AnySparse::from_bytes(b, width).map_err(|e| invalid(format!("sparse payload: {e}")))?;
            if used != b.len() {
                return Err(invalid("trailing bytes in sparse payload".into()));
            }
            Payload::Sparse(m)
        }
        f => return Err(invalid(format!("unknown payload flag {f}"))),
    };
    Ok(Node { id, kind, inputs, attrs, payload })
}

pub(super) fn load(bytes: &[u8]) -> Result<Graph, FormatError> {
    let mut r = Reader { bytes, pos: 0 };
    if bytes.len() < 4 {
        return Err(if MAGIC.starts_with(bytes) { FormatError::Truncated { offset: bytes.len() } } else { FormatError::BadMagic });
    }
    if r.take(4)? != MAGIC {
        return Err(FormatError::BadMagic);
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(FormatError::BadVersion(version));
    }
    let wc = r.u8()?;
    let width = ElementWidth::from_code(wc).ok_or_else(|| FormatError::Invalid(format!("unknown width code {wc}")))?;
    let mut b = GraphBuilder::new(width);
    for _ in 0..r.count(6)? {
        let at = r.pos;
        let id = r.u32()?;
        let q = r.u8()? as i8;
        if q < 0 {
            return Err(FormatError::Invalid(format!("negative input quantizer at byte {at}")));
        }
        let rank = r.u8()?;
        let dims = (0..rank).map(|_| r.u32().map(|d| d as usize)).collect::<Result<Vec<_>, _>>()?;
        b.inputs_mut().push(InputDesc { id, dims, q: q as u32 });
    }
    for _ in 0..r.count(9)? {
        let n = read_node(&mut r, width)?;
        b = b.node(n);
    }
    for _ in 0..r.count(4)? {
        b = b.output(r.u32()?);
    }
    let mut meta = BTreeMap::new();
    let mut prev: Option<String> = None;
    for _ in 0..r.count(8)? {
        let k = r.string()?;
        let v = r.string()?;
        if prev.as_ref().is_some_and(|p| *p >= k) {
            return Err(FormatError::Invalid(format!("metadata key {k:?} out of order")));
        }
        prev = Some(k.clone());
        meta.insert(k, v);
    }
    if r.pos != bytes.len() {
        return Err(FormatError::Invalid(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    Ok(b.metadata(meta).build())
}
