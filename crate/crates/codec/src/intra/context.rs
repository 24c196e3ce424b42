//! L-shaped contexts of decoded reference samples.
//!
//! A context for an `h x w` block is stored on the grid of
//! `n_a + 2h + e_h` rows by `n_l + 2w + e_w` columns whose top-left corner
//! sits `n_a` rows above and `n_l` columns left of the block. Only cells
//! with `row < n_a` or `col < n_l` belong to the context.

use std::collections::BTreeMap;

use super::shape::{BlockShape, TransformRule};
use crate::error::CodecError;
use crate::plane::Plane;
use crate::{div_round, SamplePlane};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ContextSpec {
    /// Rows above the block.
    pub n_a: usize,
    /// Columns left of the block.
    pub n_l: usize,
    /// Extra rows below the `2h` left column.
    pub e_h: usize,
    /// Extra columns beyond the `2w` above row.
    pub e_w: usize,
}

impl ContextSpec {
    pub const fn uniform(n: usize) -> Self {
        ContextSpec { n_a: n, n_l: n, e_h: n, e_w: n }
    }

    /// Default for a network shape: 4 when the short side is 4, else 8.
    pub fn for_network(shape: BlockShape) -> Self {
        ContextSpec::uniform(if shape.0.min(shape.1) == 4 { 4 } else { 8 })
    }

    pub fn grid_dims(&self, h: usize, w: usize) -> (usize, usize) {
        (self.n_a + 2 * h + self.e_h, self.n_l + 2 * w + self.e_w)
    }

    pub fn flat_len(&self, h: usize, w: usize) -> usize {
        self.n_a * (self.n_l + 2 * w + self.e_w) + (2 * h + self.e_h) * self.n_l
    }

    /// The context a block needs so that, after `rule`, it matches this
    /// network-side spec exactly.
    pub fn for_block(&self, rule: &TransformRule) -> Self {
        let s = if rule.transpose {
            ContextSpec { n_a: self.n_l, n_l: self.n_a, e_h: self.e_w, e_w: self.e_h }
        } else {
            *self
        };
        ContextSpec { n_a: s.n_a * rule.delta, n_l: s.n_l * rule.gamma, e_h: s.e_h * rule.delta, e_w: s.e_w * rule.gamma }
    }

    pub fn to_metadata(&self, out: &mut BTreeMap<String, String>) {
        for (k, v) in [("n_a", self.n_a), ("n_l", self.n_l), ("e_h", self.e_h), ("e_w", self.e_w)] {
            out.insert(format!("intra.{k}"), v.to_string());
        }
    }

    pub fn from_metadata(meta: &BTreeMap<String, String>) -> Option<Self> {
        let get = |k: &str| meta.get(&format!("intra.{k}"))?.parse().ok();
        Some(ContextSpec { n_a: get("n_a")?, n_l: get("n_l")?, e_h: get("e_h")?, e_w: get("e_w")? })
    }
}

/// Which in-frame samples have been decoded when a block is predicted.
#[derive(Clone, Debug)]
pub enum Decoded {
    /// Every sample inside the frame.
    All,
    /// Rows above the block, plus samples left of the block within its rows.
    Causal,
    /// Nonzero entries are decoded.
    Mask(Plane<u8>),
}

impl Decoded {
    fn at(&self, sx: usize, sy: usize, x: usize, y: usize, h: usize) -> bool {
        match self {
            Decoded::All => true,
            Decoded::Causal => sy < y || (sx < x && sy < y + h),
            Decoded::Mask(m) => m.get(sx, sy) != 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IntraContext {
    pub h: usize,
    pub w: usize,
    pub spec: ContextSpec,
    /// Grid samples, row-major; zero outside the context and where unavailable.
    pub samples: Vec<i32>,
    pub available: Vec<bool>,
    /// Rounded mean of the available samples.
    pub mu: i32,
    pub bit_depth: u32,
}

impl IntraContext {
    pub fn grid_dims(&self) -> (usize, usize) {
        self.spec.grid_dims(self.h, self.w)
    }

    pub fn in_context(&self, r: usize, c: usize) -> bool {
        r < self.spec.n_a || c < self.spec.n_l
    }

    /// Context cells in flattening order: the above rows left to right,
    /// then the left columns row by row.
    pub fn cells(&self) -> impl Iterator<Item = usize> + '_ {
        let (rows, cols) = self.grid_dims();
        let above = (0..self.spec.n_a).flat_map(move |r| (0..cols).map(move |c| r * cols + c));
        let left = (self.spec.n_a..rows).flat_map(move |r| (0..self.spec.n_l).map(move |c| r * cols + c));
        above.chain(left)
    }

    pub fn available_count(&self) -> usize {
        self.cells().filter(|&i| self.available[i]).count()
    }

    fn refresh_mean(&mut self) {
        let (mut sum, mut n) = (0i64, 0i64);
        for i in self.cells() {
            if self.available[i] {
                sum += self.samples[i] as i64;
                n += 1;
            }
        }
        self.mu = if n == 0 { 1 << (self.bit_depth - 1) } else { div_round(sum, n) as i32 };
    }
}

/// Copies the context of the `h x w` block at `(x, y)`.
///
/// Samples outside the frame or not yet decoded are unavailable. When no
/// sample is available the mean defaults to `2^(b-1)`.
pub fn extract_context(
    frame: &SamplePlane,
    x: usize,
    y: usize,
    h: usize,
    w: usize,
    spec: ContextSpec,
    bit_depth: u32,
    decoded: &Decoded,
) -> Result<IntraContext, CodecError> {
    let (fw, fh) = frame.dims();
    if x + w > fw || y + h > fh {
        return Err(CodecError::BlockOutside { x, y, h, w, width: fw, height: fh });
    }
    if x < spec.n_l || y < spec.n_a {
        return Err(CodecError::OutOfFrame { x, y });
    }
    if let Decoded::Mask(m) = decoded {
        frame.same_dims(m)?;
    }
    let (rows, cols) = spec.grid_dims(h, w);
    let mut ctx = IntraContext {
        h,
        w,
        spec,
        samples: vec![0; rows * cols],
        available: vec![false; rows * cols],
        mu: 0,
        bit_depth,
    };
    let (x0, y0) = (x - spec.n_l, y - spec.n_a);
    for i in ctx.cells().collect::<Vec<_>>() {
        let (sx, sy) = (x0 + i % cols, y0 + i / cols);
        if sx < fw && sy < fh && decoded.at(sx, sy, x, y, h) {
            ctx.samples[i] = frame.get(sx, sy) as i32;
            ctx.available[i] = true;
        }
    }
    ctx.refresh_mean();
    Ok(ctx)
}

/// Down-samples by `(gamma, delta)` with window means over the available
/// samples, then transposes if the rule asks for it. The mean is
/// recomputed on the result.
pub fn apply_transform(ctx: &IntraContext, rule: &TransformRule) -> IntraContext {
    let (g, d) = (rule.gamma, rule.delta);
    let (rows, cols) = ctx.grid_dims();
    let spec = ContextSpec { n_a: ctx.spec.n_a / d, n_l: ctx.spec.n_l / g, e_h: ctx.spec.e_h / d, e_w: ctx.spec.e_w / g };
    let (h, w) = (ctx.h / d, ctx.w / g);
    let (r2, c2) = (rows / d, cols / g);
    let mut samples = vec![0; r2 * c2];
    let mut available = vec![false; r2 * c2];
    for r in 0..r2 {
        for c in 0..c2 {
            let (mut sum, mut n) = (0i64, 0i64);
            for rr in r * d..(r + 1) * d {
                for cc in c * g..(c + 1) * g {
                    if ctx.available[rr * cols + cc] {
                        sum += ctx.samples[rr * cols + cc] as i64;
                        n += 1;
                    }
                }
            }
            if n > 0 {
                samples[r * c2 + c] = div_round(sum, n) as i32;
                available[r * c2 + c] = true;
            }
        }
    }
    let mut out = IntraContext { h, w, spec, samples, available, mu: 0, bit_depth: ctx.bit_depth };
    if rule.transpose {
        out = transpose_context(&out);
    }
    out.refresh_mean();
    out
}

fn transpose_context(ctx: &IntraContext) -> IntraContext {
    let (rows, cols) = ctx.grid_dims();
    let spec = ContextSpec { n_a: ctx.spec.n_l, n_l: ctx.spec.n_a, e_h: ctx.spec.e_w, e_w: ctx.spec.e_h };
    let mut samples = vec![0; rows * cols];
    let mut available = vec![false; rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            samples[c * rows + r] = ctx.samples[r * cols + c];
            available[c * rows + r] = ctx.available[r * cols + c];
        }
    }
    IntraContext { h: ctx.w, w: ctx.h, spec, samples, available, mu: ctx.mu, bit_depth: ctx.bit_depth }
}

/// Maps a prediction of the network shape back to the block: transpose
/// first if flagged, then nearest-neighbour up-sampling by `delta`
/// vertically and `gamma` horizontally.
pub fn invert_transform<T: Copy>(pred: &Plane<T>, rule: &TransformRule) -> Plane<T> {
    let p = if rule.transpose { Plane::from_fn(pred.height(), pred.width(), |x, y| pred.get(y, x)) } else { pred.clone() };
    Plane::from_fn(p.width() * rule.gamma, p.height() * rule.delta, |x, y| p.get(x / rule.gamma, y / rule.delta))
}
