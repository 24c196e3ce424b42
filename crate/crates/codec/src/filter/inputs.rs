//! Input-plane assembly and patch-wise residual inference.
//!
//! A filter graph takes one `[H, W, C]` patch and returns the residual to
//! add to the reconstruction, shaped `[H, W, 1]` (the border is dropped)
//! or `[H - 16, W - 16, 1]`. Channels come in the order Rec, Pred, BS, QP,
//! then IPB for luma models, then Col0 and Col1 for temporal models. Each
//! patch carries an 8-sample border on every side; borders past the
//! picture edge replicate the edge samples, and only the core is written.

use qnn_core::quantize::quantize_inputs;
use qnn_core::{ExecContext, ExecOptions, Graph, Tensor, TypedTensor};

use crate::error::CodecError;
use crate::plane::clamp_sample;
use crate::{shift_round, SamplePlane};

/// Border width on each side of a patch.
pub const BORDER: usize = 8;

#[derive(Clone, Debug)]
pub struct FilterInputs {
    /// Reconstruction before any loop filter.
    pub rec: SamplePlane,
    pub pred: Option<SamplePlane>,
    /// Deblocking boundary strength, 0 to 2.
    pub bs: Option<SamplePlane>,
    /// Prediction type per sample: 0 intra, 1 uni-directional, 2 bi-directional.
    pub ipb: Option<SamplePlane>,
    /// Collocated samples from the first picture of each reference list.
    pub col: Option<(SamplePlane, SamplePlane)>,
    pub bit_depth: u32,
}

impl FilterInputs {
    pub fn new(rec: SamplePlane, bit_depth: u32) -> Self {
        FilterInputs { rec, pred: None, bs: None, ipb: None, col: None, bit_depth }
    }

    pub fn with_pred(mut self, p: SamplePlane) -> Self {
        self.pred = Some(p);
        self
    }

    pub fn with_bs(mut self, p: SamplePlane) -> Self {
        self.bs = Some(p);
        self
    }

    pub fn with_ipb(mut self, p: SamplePlane) -> Self {
        self.ipb = Some(p);
        self
    }

    pub fn with_col(mut self, c0: SamplePlane, c1: SamplePlane) -> Self {
        self.col = Some((c0, c1));
        self
    }

    fn check_dims(&self) -> Result<(), CodecError> {
        for p in [&self.pred, &self.bs, &self.ipb].into_iter().flatten() {
            self.rec.same_dims(p)?;
        }
        if let Some((a, b)) = &self.col {
            self.rec.same_dims(a)?;
            self.rec.same_dims(b)?;
        }
        Ok(())
    }

    /// Channel sources for a model with `c` input channels.
    fn channels(&self, c: usize, qp: i32) -> Result<Vec<Channel<'_>>, CodecError> {
        let (ipb, col) = match c {
            4 => (false, false),
            5 => (true, false),
            6 => (false, true),
            7 => (true, true),
            _ => return Err(CodecError::ModelLayout(format!("{c} input channels; expected 4 to 7"))),
        };
        let sample = 1.0 / (1u32 << self.bit_depth) as f32;
        let mut v = vec![
            Channel::Plane(&self.rec, sample),
            Channel::Plane(self.pred.as_ref().ok_or(CodecError::MissingPlane("pred"))?, sample),
            Channel::Plane(self.bs.as_ref().ok_or(CodecError::MissingPlane("bs"))?, 0.25),
            Channel::Const(qp as f32 / 64.0),
        ];
        if ipb {
            v.push(Channel::Plane(self.ipb.as_ref().ok_or(CodecError::MissingPlane("ipb"))?, 0.5));
        }
        if col {
            let (c0, c1) = self.col.as_ref().ok_or(CodecError::MissingPlane("col0"))?;
            v.push(Channel::Plane(c0, sample));
            v.push(Channel::Plane(c1, sample));
        }
        Ok(v)
    }
}

enum Channel<'a> {
    /// Plane samples times a normalization factor.
    Plane(&'a SamplePlane, f32),
    Const(f32),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PatchLayout {
    pub core_h: usize,
    pub core_w: usize,
    pub channels: usize,
    /// The output includes the border.
    pub bordered_output: bool,
}

impl PatchLayout {
    pub fn of(g: &Graph) -> Result<Self, CodecError> {
        let bad = |m: String| CodecError::ModelLayout(m);
        let [input] = g.inputs() else {
            return Err(bad("filter models take one input".into()));
        };
        let [h, w, c] = input.dims[..] else {
            return Err(bad(format!("input dims {:?}, expected [H, W, C]", input.dims)));
        };
        if h <= 2 * BORDER || w <= 2 * BORDER {
            return Err(bad(format!("patch {h}x{w} leaves no core inside the border")));
        }
        let (core_h, core_w) = (h - 2 * BORDER, w - 2 * BORDER);
        let analysis = g.analyze().map_err(|v| bad(format!("invalid graph: {v:?}")))?;
        let [out] = g.outputs() else {
            return Err(bad("filter models have one output".into()));
        };
        let dims = analysis.info(*out).map(|i| i.dims.clone()).unwrap_or_default();
        let bordered_output = match dims[..] {
            [oh, ow, 1] | [oh, ow] if (oh, ow) == (h, w) => true,
            [oh, ow, 1] | [oh, ow] if (oh, ow) == (core_h, core_w) => false,
            _ => return Err(bad(format!("output dims {dims:?} for input {:?}", input.dims))),
        };
        Ok(PatchLayout { core_h, core_w, channels: c, bordered_output })
    }
}

fn patch_tensor(ch: &[Channel<'_>], layout: &PatchLayout, x0: usize, y0: usize) -> TypedTensor<f32> {
    let (h, w) = (layout.core_h + 2 * BORDER, layout.core_w + 2 * BORDER);
    let mut data = Vec::with_capacity(h * w * ch.len());
    for r in 0..h {
        let y = y0 as isize + r as isize - BORDER as isize;
        for c in 0..w {
            let x = x0 as isize + c as isize - BORDER as isize;
            for src in ch {
                data.push(match *src {
                    Channel::Plane(p, s) => p.get_clamped(x, y) as f32 * s,
                    Channel::Const(v) => v,
                });
            }
        }
    }
    TypedTensor::new(vec![h, w, ch.len()], 0, data).expect("sized above")
}

/// Residual in samples at `(r, c)` of the patch core.
fn residual_at(out: &Tensor, values: &[i64], layout: &PatchLayout, r: usize, c: usize, bit_depth: u32) -> i64 {
    let (rr, cc, w) = if layout.bordered_output {
        (r + BORDER, c + BORDER, layout.core_w + 2 * BORDER)
    } else {
        (r, c, layout.core_w)
    };
    let i = rr * w + cc;
    match out {
        Tensor::F32(t) => (t.data()[i] as f64 * (bit_depth as f64).exp2()).round() as i64,
        other => shift_round(values[i], other.q() as i32 - bit_depth as i32),
    }
}

/// `R_nn = R_no + f(inputs)` with the QP channel set to `qp`, clamped to
/// the sample range. Patches run on up to `threads` threads; the result
/// does not depend on the thread count.
pub fn apply_nn_filter(
    inputs: &FilterInputs,
    g: &Graph,
    qp: i32,
    threads: usize,
    opts: ExecOptions,
) -> Result<SamplePlane, CodecError> {
    inputs.check_dims()?;
    let layout = PatchLayout::of(g)?;
    let ch = inputs.channels(layout.channels, qp)?;
    let (pw, ph) = inputs.rec.dims();
    let origins: Vec<(usize, usize)> = (0..ph)
        .step_by(layout.core_h)
        .flat_map(|y| (0..pw).step_by(layout.core_w).map(move |x| (x, y)))
        .collect();

    let run_chunk = |chunk: &[(usize, usize)]| -> Result<Vec<Tensor>, CodecError> {
        let mut ctx = ExecContext::new(g, opts)?;
        chunk
            .iter()
            .map(|&(x, y)| {
                let t = patch_tensor(&ch, &layout, x, y);
                let input = quantize_inputs(g, &[t])?;
                Ok(ctx.run(&input)?.swap_remove(0))
            })
            .collect()
    };
    let threads = threads.clamp(1, origins.len().max(1));
    let residuals: Vec<Tensor> = if threads == 1 {
        run_chunk(&origins)?
    } else {
        let per = origins.len().div_ceil(threads);
        std::thread::scope(|s| {
            let handles: Vec<_> = origins.chunks(per).map(|c| s.spawn(move || run_chunk(c))).collect();
            let mut all = Vec::with_capacity(origins.len());
            for h in handles {
                all.extend(h.join().expect("patch worker panicked")?);
            }
            Ok::<_, CodecError>(all)
        })?
    };

    let mut out = inputs.rec.clone();
    for (&(x0, y0), res) in origins.iter().zip(&residuals) {
        let values = res.to_i64_vec();
        for r in 0..layout.core_h.min(ph - y0) {
            for c in 0..layout.core_w.min(pw - x0) {
                let d = residual_at(res, &values, &layout, r, c, inputs.bit_depth);
                let v = inputs.rec.get(x0 + c, y0 + r) as i64 + d;
                out.set(x0 + c, y0 + r, clamp_sample(v, inputs.bit_depth));
            }
        }
    }
    Ok(out)
}
