use std::fmt::Write as _;
use std::path::Path;

use qnn_codec::filter::{
    candidate_list, compose, finalize, granularity, lambda, layer_class, select_params, temporal_gate, Bitrate,
    BlockChoice, FilterInputs, FilterKind, FilterMode, SelectOptions,
};
use qnn_codec::intra::{predict_block, Decoded, IntraModels, Prediction};
use qnn_codec::{SamplePlane, CodecError};
use qnn_core::{ExecOptions, Tensor};
use serde_json::json;

use crate::engine::{load_graph, read, write};
use crate::fail::CliError;
use crate::{PlaneFormat, RateClass, Report};

fn read_plane(path: &Path, format: PlaneFormat, bit_depth: u32) -> Result<SamplePlane, CliError> {
    let plane = match format {
        PlaneFormat::Pgm => SamplePlane::read_pgm(path),
        PlaneFormat::Stn1 => {
            let t = Tensor::from_stn1(&read(path)?).map_err(|e| CliError::Format(format!("{}: {e}", path.display())))?;
            SamplePlane::from_tensor(&t)
        }
    }
    .map_err(|e| CliError::Format(format!("{}: {e}", path.display())))?;
    plane.check_bit_depth(bit_depth).map_err(|e| CliError::Format(format!("{}: {e}", path.display())))?;
    Ok(plane)
}

fn pair(s: &str, sep: char, what: &str) -> Result<(usize, usize), CliError> {
    let bad = || CliError::Usage(format!("{what} {s:?}: expected two numbers separated by '{sep}'"));
    let (a, b) = s.split_once(sep).ok_or_else(bad)?;
    Ok((a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?))
}

fn check_bit_depth(b: u32) -> Result<(), CliError> {
    if (8..=16).contains(&b) {
        Ok(())
    } else {
        Err(CliError::Usage(format!("bit depth {b} outside 8..=16")))
    }
}

pub struct IntraArgs<'a> {
    pub frame: &'a Path,
    pub format: PlaneFormat,
    pub pos: &'a str,
    pub size: &'a str,
    pub models: &'a Path,
    pub bit_depth: u32,
    pub all_decoded: bool,
    pub out: Option<&'a Path>,
}

pub fn intra_predict(a: IntraArgs<'_>) -> Result<Report, CliError> {
    check_bit_depth(a.bit_depth)?;
    let (x, y) = pair(a.pos, ',', "--pos")?;
    let (h, w) = pair(&a.size.to_ascii_lowercase(), 'x', "--size")?;
    let frame = read_plane(a.frame, a.format, a.bit_depth)?;
    let models = IntraModels::load_dir(a.models)?;
    let decoded = if a.all_decoded { Decoded::All } else { Decoded::Causal };
    let pred = predict_block(&frame, x, y, h, w, &models, a.bit_depth, &decoded, ExecOptions::default())?;
    match pred {
        Prediction::Nn(o) => {
            if let Some(out) = a.out {
                write(out, &o.block.to_tensor().to_stn1())?;
            }
            Ok(Report {
                json: json!({
                    "rep_idx": o.rep_idx,
                    "grp_idx1": o.grp_idx1,
                    "grp_idx2": o.grp_idx2,
                    "fallback": false,
                    "block": o.block.data(),
                }),
                text: format!("rep_idx={} grp_idx1={} grp_idx2={} fallback=0\n", o.rep_idx, o.grp_idx1, o.grp_idx2),
            })
        }
        Prediction::PlanarFallback => Ok(Report {
            json: json!({ "fallback": true }),
            text: "fallback=1 mode=planar\n".into(),
        }),
    }
}

pub struct FilterArgs<'a> {
    pub orig: &'a Path,
    pub rec: &'a Path,
    pub db: &'a Path,
    pub pred: &'a Path,
    pub bs: &'a Path,
    pub ipb: Option<&'a Path>,
    pub col: Option<(&'a Path, &'a Path)>,
    pub format: PlaneFormat,
    pub qp: i32,
    pub tid: u32,
    pub model: &'a Path,
    pub bit_depth: u32,
    pub lambda: Option<f64>,
    pub bitrate: RateClass,
    pub all_intra: bool,
    pub threads: usize,
    pub out: Option<&'a Path>,
}

fn mode_text(mode: &FilterMode) -> String {
    match mode {
        FilterMode::Off => "off".into(),
        FilterMode::Uniform(i) => format!("uniform {i}"),
        FilterMode::PerBlock(c) => {
            let map: String = c
                .iter()
                .map(|b| match b {
                    BlockChoice::Off => '0',
                    BlockChoice::Param(i) => char::from(b'0' + i),
                })
                .collect();
            format!("per-block {map}")
        }
    }
}

pub fn filter_run(a: FilterArgs<'_>) -> Result<Report, CliError> {
    check_bit_depth(a.bit_depth)?;
    let plane = |p: &Path| read_plane(p, a.format, a.bit_depth);
    let orig = plane(a.orig)?;
    let db = plane(a.db)?;
    let mut inputs = FilterInputs::new(plane(a.rec)?, a.bit_depth).with_pred(plane(a.pred)?).with_bs(plane(a.bs)?);
    if let Some(p) = a.ipb {
        inputs = inputs.with_ipb(plane(p)?);
    }
    let kind = temporal_gate(a.tid);
    if kind == FilterKind::Temporal {
        if let Some((c0, c1)) = a.col {
            inputs = inputs.with_col(plane(c0)?, plane(c1)?);
        }
    }
    let g = load_graph(a.model)?;
    let list = candidate_list(a.qp, layer_class(a.tid));
    let rate = match a.bitrate {
        RateClass::Low => Bitrate::Low,
        RateClass::High => Bitrate::High,
    };
    let lam = a.lambda.unwrap_or_else(|| lambda(a.qp));
    if !(lam >= 0.0) {
        return Err(CliError::Usage(format!("lambda {lam} must be non-negative")));
    }
    let opts = SelectOptions { lambda: lam, block: granularity(orig.width(), orig.height(), rate), all_intra: a.all_intra };
    let (decision, filtered) = select_params(&orig, &db, &inputs, &g, &list, opts, a.threads, ExecOptions::default())
        .map_err(|e| match e {
            CodecError::PlaneDims { .. } => CliError::Format(e.to_string()),
            e => e.into(),
        })?;
    let composed = compose(&decision, &db, &filtered);
    let final_plane = finalize(&composed, &db, decision.scale.steps, a.bit_depth, None)?;
    if let Some(out) = a.out {
        write(out, &final_plane.to_tensor().to_stn1())?;
    }

    let s = decision.scale;
    let omega = format!("{}/{}", s.omega.numer(), s.omega.denom());
    let mut text = format!(
        "kind={} candidates={:?} lambda={lam:.4} block={}\nmode={}\nscale_steps={} omega={omega} degenerate={}\n",
        match kind {
            FilterKind::Regular => "regular",
            FilterKind::Temporal => "temporal",
        },
        list,
        decision.block,
        mode_text(&decision.mode),
        s.steps,
        s.degenerate as u8,
    );
    for (i, c) in decision.costs.iter().enumerate() {
        writeln!(text, "cost{i}={c:.2}").unwrap();
    }
    Ok(Report {
        json: json!({
            "kind": if kind == FilterKind::Temporal { "temporal" } else { "regular" },
            "candidates": list,
            "lambda": lam,
            "block": decision.block,
            "mode": mode_text(&decision.mode),
            "scale_steps": s.steps,
            "omega": omega,
            "degenerate": s.degenerate,
            "costs": decision.costs,
        }),
        text,
    })
}
