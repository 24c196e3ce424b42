use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use qnn_codec::filter::reference::{quantize_filter, reference_filter};
use qnn_codec::intra::reference::reference_models;
use qnn_core::complexity::{count_macs, kmac_per_pixel};
use qnn_core::quantize::{static_quantize, InputQuantizer, QuantizeOptions};
use qnn_core::{ElementWidth, ExecContext, ExecOptions, Graph, Tensor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::fail::CliError;
use crate::Report;

pub fn read(path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|e| CliError::io(path, e))
}

pub fn write(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

pub fn load_graph(path: &Path) -> Result<Graph, CliError> {
    Graph::from_bytes(&read(path)?).map_err(|e| CliError::Format(format!("{}: {e}", path.display())))
}

fn read_tensor(path: &Path) -> Result<Tensor, CliError> {
    Tensor::from_stn1(&read(path)?).map_err(|e| CliError::Format(format!("{}: {e}", path.display())))
}

fn parse_width(s: &str, allow_float: bool) -> Result<ElementWidth, CliError> {
    match ElementWidth::parse(s) {
        Some(ElementWidth::Float32) if !allow_float => Err(CliError::Usage("width must be 8, 16 or 32".into())),
        Some(w) => Ok(w),
        None => Err(CliError::Usage(format!("unknown width {s:?}"))),
    }
}

/// Brings a tensor to the element type the graph expects for input `i`.
fn adapt_input(g: &Graph, i: usize, t: Tensor) -> Result<Tensor, CliError> {
    let desc = &g.inputs()[i];
    if t.dims() != desc.dims.as_slice() {
        return Err(CliError::Format(format!("input {i} has dims {:?}, model expects {:?}", t.dims(), desc.dims)));
    }
    if t.width() == g.width() {
        return Ok(t);
    }
    match (t.width(), g.width()) {
        (_, ElementWidth::Float32) => Ok(Tensor::F32(t.dequantize())),
        (ElementWidth::Float32, w) => Ok(Tensor::quantize(desc.dims.clone(), t.dequantize().data(), desc.q, w)?),
        (tw, gw) => Err(CliError::Format(format!("input {i} is {tw}, model is {gw}"))),
    }
}

fn describe(t: &Tensor) -> serde_json::Value {
    json!({ "width": t.width().to_string(), "dims": t.dims(), "q": t.q() })
}

pub fn infer(model: &Path, inputs: &[PathBuf], float: bool, simd: bool, out_dir: &Path) -> Result<Report, CliError> {
    let mut g = load_graph(model)?;
    if float {
        g = g.to_float();
    }
    if inputs.len() != g.inputs().len() {
        return Err(CliError::Usage(format!("model takes {} inputs, got {}", g.inputs().len(), inputs.len())));
    }
    let tensors = inputs
        .iter()
        .enumerate()
        .map(|(i, p)| adapt_input(&g, i, read_tensor(p)?))
        .collect::<Result<Vec<_>, _>>()?;
    let outputs = ExecContext::new(&g, ExecOptions { simd })?.run(&tensors)?;
    std::fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
    let mut text = String::new();
    let mut files = Vec::new();
    for (i, t) in outputs.iter().enumerate() {
        let path = out_dir.join(format!("out{i}.stn1"));
        write(&path, &t.to_stn1())?;
        writeln!(text, "{} {} {:?} q={}", path.display(), t.width(), t.dims(), t.q()).unwrap();
        let mut d = describe(t);
        d["path"] = json!(path.display().to_string());
        files.push(d);
    }
    Ok(Report { json: json!({ "outputs": files }), text })
}

/// Calibration sets: every `*.stn1` file in `dir`, sorted by name, holding
/// one STN1 blob per graph input back to back.
fn calibration_sets(dir: &Path, g: &Graph) -> Result<Vec<Vec<Tensor>>, CliError> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| CliError::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "stn1"))
        .collect();
    paths.sort();
    paths
        .iter()
        .map(|p| {
            let bytes = read(p)?;
            let mut at = 0;
            let mut raw = Vec::new();
            while at < bytes.len() {
                let (t, used) = Tensor::from_stn1_prefix(&bytes[at..])
                    .map_err(|e| CliError::Format(format!("{} at byte {at}: {e}", p.display())))?;
                raw.push(t);
                at += used;
            }
            if raw.len() != g.inputs().len() {
                return Err(CliError::Format(format!(
                    "{} holds {} tensors, model takes {}",
                    p.display(),
                    raw.len(),
                    g.inputs().len()
                )));
            }
            let set = raw.into_iter().enumerate().map(|(i, t)| adapt_input(g, i, t)).collect::<Result<Vec<_>, _>>()?;
            Ok(set)
        })
        .collect()
}

pub fn quantize(
    model: &Path,
    calib: &Path,
    width: &str,
    input_q: &str,
    headroom: f64,
    out: &Path,
) -> Result<Report, CliError> {
    let g = load_graph(model)?;
    let width = parse_width(width, false)?;
    let input_q = match input_q {
        "default" => InputQuantizer::Default,
        "calibrated" => InputQuantizer::Calibrated,
        n => InputQuantizer::Fixed(
            n.parse().map_err(|_| CliError::Usage(format!("--input-q {n:?}: expected default, calibrated or a number")))?,
        ),
    };
    if !(headroom >= 1.0) {
        return Err(CliError::Usage(format!("headroom {headroom} must be at least 1")));
    }
    let sets = calibration_sets(calib, &g)?;
    let qg = static_quantize(&g, &sets, width, QuantizeOptions { headroom, input_q })?;
    write(out, &qg.to_bytes())?;
    let qs: Vec<u32> = qg.inputs().iter().map(|d| d.q).collect();
    Ok(Report {
        json: json!({ "out": out.display().to_string(), "width": width.to_string(), "calibration_sets": sets.len(), "input_q": qs }),
        text: format!("{} ({width}, {} calibration sets, input q {:?})\n", out.display(), sets.len(), qs),
    })
}

pub fn info(model: &Path, pixels: Option<u64>) -> Result<Report, CliError> {
    let g = load_graph(model)?;
    let report = count_macs(&g).map_err(|v| {
        CliError::Format(format!("invalid model: {}", v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")))
    })?;
    let pixels = match pixels {
        Some(p) => Some(p),
        None => g
            .meta("pixels")
            .map(|s| s.parse::<u64>().map_err(|_| CliError::Format(format!("metadata pixels={s:?}"))))
            .transpose()?,
    };
    if pixels == Some(0) {
        return Err(CliError::Usage("pixels must be positive".into()));
    }
    let mut text = format!("model: {} ({})\n{:>6}  {:<20} {:>14} {:>12}\n", model.display(), g.width(), "id", "op", "MACs", "ops");
    let mut rows = Vec::new();
    for n in report.nodes.iter().filter(|n| n.macs > 0 || n.ops > 0) {
        writeln!(text, "{:>6}  {:<20} {:>14} {:>12}", n.id, n.kind.name(), n.macs, n.ops).unwrap();
        rows.push(json!({ "id": n.id, "op": n.kind.name(), "macs": n.macs, "ops": n.ops }));
    }
    writeln!(text, "total MACs: {}\ntotal ops: {}", report.total_macs, report.total_ops).unwrap();
    let kmac = pixels.map(|p| kmac_per_pixel(report.total_macs, p));
    if let (Some(p), Some(k)) = (pixels, kmac) {
        writeln!(text, "pixels: {p}\nkMAC/pixel: {k:.1} ({k:.3})").unwrap();
    }
    Ok(Report {
        json: json!({
            "width": g.width().to_string(),
            "nodes": rows,
            "total_macs": report.total_macs,
            "total_ops": report.total_ops,
            "pixels": pixels,
            "kmac_per_pixel": kmac,
        }),
        text,
    })
}

pub fn convert_check(model: &Path) -> Result<Report, CliError> {
    let bytes = read(model)?;
    let g = Graph::from_bytes(&bytes).map_err(|e| CliError::Format(format!("{}: {e}", model.display())))?;
    let violations: Vec<String> = g.validate().iter().map(|v| v.to_string()).collect();
    let identical = g.to_bytes() == bytes;
    let json = json!({
        "valid": violations.is_empty(),
        "violations": violations,
        "resave_identical": identical,
        "width": g.width().to_string(),
        "inputs": g.inputs().len(),
        "nodes": g.nodes().len(),
        "outputs": g.outputs().len(),
    });
    if !violations.is_empty() {
        return Err(CliError::Format(format!("{}: {}", model.display(), violations.join("; "))));
    }
    if !identical {
        return Err(CliError::Format(format!("{}: re-saving changes the bytes", model.display())));
    }
    let text = format!(
        "ok: {} ({}, {} inputs, {} nodes, {} outputs), re-save identical\n",
        model.display(),
        g.width(),
        g.inputs().len(),
        g.nodes().len(),
        g.outputs().len()
    );
    Ok(Report { json, text })
}

/// Filter patch core written by `make-reference`.
const REFERENCE_FILTER_CORE: usize = 128;

pub fn make_reference(out: &Path, seed: u64, width: &str) -> Result<Report, CliError> {
    let width = parse_width(width, true)?;
    std::fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    let mut written = Vec::new();
    for m in reference_models(width, seed)? {
        let (h, w) = m.shape;
        let path = out.join(format!("intra_{h}x{w}.smf1"));
        write(&path, &m.graph.to_bytes())?;
        written.push(path.display().to_string());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = reference_filter(&mut rng, REFERENCE_FILTER_CORE, 4, 8, 0.05);
    let g = if width == ElementWidth::Float32 { g } else { quantize_filter(&mut rng, &g, width)? };
    let path = out.join("filter.smf1");
    write(&path, &g.to_bytes())?;
    written.push(path.display().to_string());
    let text = written.iter().map(|p| format!("{p}\n")).collect();
    Ok(Report { json: json!({ "written": written, "width": width.to_string() }), text })
}
