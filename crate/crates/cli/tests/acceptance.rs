//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use num_bigint::BigInt;
use num_rational::Ratio;
use num_traits::{One, Signed, Zero};
use qnn_codec::filter::select::{blocks, param_bits};
use qnn_codec::filter::*;
use qnn_codec::intra::shape::transform_rule;
use qnn_codec::intra::signal::{chroma_flag_present, signal_chroma, signal_luma, ChromaMode, LumaPath};
use qnn_codec::intra::{extract_context, apply_transform, postprocess, ContextSpec, Decoded};
use qnn_codec::{Plane, SamplePlane};
use qnn_core::complexity::count_macs;
use qnn_core::graph::infer;
use qnn_core::kernels::{int, ConvParams, ExecOptions, Padding};
use qnn_core::quantize::{quantize_inputs, static_quantize, InputQuantizer, QuantizeOptions};
use qnn_core::sparse::{spmv_q, Run};
use qnn_core::synth::{self, Activation};
use qnn_core::{
    Alignment, ElementWidth, Graph, GraphBuilder, Node, OpKind, QInt, SparseF32, Tensor, TensorF32,
    TypedTensor,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn main() {
    let work = std::env::temp_dir().join(format!("qnn-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&work).expect("temp dir");
    let checks: Vec<(&str, Box<dyn Fn() -> Outcome>)> = vec![
        ("integer kernel formulas vs big-integer oracle", Box::new(kernel_formulas)),
        ("bit-exact CLI inference across runs and SIMD on/off", Box::new(|| determinism(&work))),
        ("sparse run-packed product equals dense product", Box::new(sparse_equivalence)),
        ("sparse/dense MAC densities 7.2%, 7.9%, 9.0%", Box::new(density_table)),
        ("4x4 reference intra model near 7.7 kMAC/pixel", Box::new(|| intra_complexity(&work))),
        ("scaled residual round trip, b = 10", Box::new(round_trip)),
        ("shape transformation table", Box::new(transform_table)),
        ("luma and chroma signaling truth tables", Box::new(signaling)),
        ("least-squares residual scaling", Box::new(scaling)),
        ("filter parameter selection", Box::new(parameter_selection)),
        ("static quantization fidelity", Box::new(quantization_fidelity)),
    ];
    let mut failed = 0;
    for (i, (name, check)) in checks.iter().enumerate() {
        let t = Instant::now();
        let outcome = std::panic::catch_unwind(std::panic::AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let secs = t.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail} [{secs:.1}s]", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {detail} [{secs:.1}s]", i + 1);
            }
        }
    }
    let _ = std::fs::remove_dir_all(&work);
    println!("{} of {} criteria passed", checks.len() - failed, checks.len());
    if failed > 0 {
        std::process::exit(1);
    }
}

// ---------------------------------------------------------------------------
// 1. Integer kernels
// ---------------------------------------------------------------------------

const CASES: usize = 10_000;

fn qmax(width: ElementWidth) -> i64 {
    (1i64 << (width.bits() - 1)) - 1
}

/// Random storage value: a random magnitude class, then uniform inside it.
fn val(rng: &mut ChaCha8Rng, width: ElementWidth) -> i64 {
    let bits = rng.gen_range(0..width.bits());
    let m = ((1i64 << bits) - 1).min(qmax(width));
    rng.gen_range(-m..=m)
}

fn vals(rng: &mut ChaCha8Rng, n: usize, width: ElementWidth) -> Vec<i64> {
    (0..n).map(|_| val(rng, width)).collect()
}

fn tensor<T: QInt>(dims: Vec<usize>, q: u32, v: &[i64]) -> TypedTensor<T> {
    TypedTensor::new(dims, q, v.iter().map(|&x| T::from_i64_saturating(x)).collect()).unwrap()
}

fn out<T: QInt>(t: TypedTensor<T>) -> (Vec<i64>, u32, Vec<usize>) {
    let (q, dims) = (t.q(), t.dims().to_vec());
    (Tensor::from(t).to_i64_vec(), q, dims)
}

/// `floor(v / 2^s)`.
fn floor_shr(v: &BigInt, s: u32) -> BigInt {
    let d = BigInt::one() << s;
    let (quo, rem) = (v / &d, v % &d);
    if rem.is_negative() {
        quo - 1
    } else {
        quo
    }
}

/// Symmetric saturation of the storage width.
fn sat(v: BigInt, width: ElementWidth) -> i64 {
    let hi = BigInt::from(qmax(width));
    let v = if v > hi {
        hi
    } else if v < -hi.clone() {
        -hi
    } else {
        v
    };
    i64::try_from(v).unwrap()
}

fn big(v: i64) -> BigInt {
    BigInt::from(v)
}

struct KernelTally {
    name: String,
    mismatches: usize,
    first: Option<String>,
}

impl KernelTally {
    fn new(name: impl Into<String>) -> Self {
        KernelTally { name: name.into(), mismatches: 0, first: None }
    }

    fn check(&mut self, case: usize, got: (Vec<i64>, u32, Vec<usize>), want: (Vec<i64>, u32, Vec<usize>)) {
        if got != want {
            self.mismatches += 1;
            if self.first.is_none() {
                self.first = Some(format!("case {case}: got {got:?}, want {want:?}"));
            }
        }
    }
}

fn bias_add_cases(rng: &mut ChaCha8Rng) -> KernelTally {
    let w = ElementWidth::Int16;
    let mut t = KernelTally::new("BiasAdd");
    for case in 0..CASES {
        let (n, c) = (rng.gen_range(1..5), rng.gen_range(1..6));
        let q1 = rng.gen_range(0..16);
        let q0 = rng.gen_range(q1..=15);
        let (a, b) = (vals(rng, n * c, w), vals(rng, c, w));
        let got = out(int::bias_add_q(&tensor::<i16>(vec![n, c], q0, &a), &tensor::<i16>(vec![c], q1, &b)).unwrap());
        let want: Vec<i64> = (0..n * c).map(|i| sat(floor_shr(&big(a[i]), q0 - q1) + big(b[i % c]), w)).collect();
        t.check(case, got, (want, q1, vec![n, c]));
    }
    t
}

fn add_cases(rng: &mut ChaCha8Rng) -> KernelTally {
    let w = ElementWidth::Int16;
    let mut t = KernelTally::new("Add");
    for case in 0..CASES {
        let n = rng.gen_range(1..12);
        let (q0, q1) = (rng.gen_range(0..16), rng.gen_range(0..16));
        let (a, b) = (vals(rng, n, w), vals(rng, n, w));
        let got = out(int::add_q(&tensor::<i16>(vec![n], q0, &a), &tensor::<i16>(vec![n], q1, &b)).unwrap());
        let q = q0.min(q1);
        let want = (0..n).map(|i| sat(floor_shr(&big(a[i]), q0 - q) + floor_shr(&big(b[i]), q1 - q), w)).collect();
        t.check(case, got, (want, q, vec![n]));
    }
    t
}

fn mul_cases(rng: &mut ChaCha8Rng) -> KernelTally {
    let w = ElementWidth::Int16;
    let mut t = KernelTally::new("Mul");
    for case in 0..CASES {
        let n = rng.gen_range(1..12);
        let (q0, q1) = (rng.gen_range(0..16), rng.gen_range(0..16));
        let qi = rng.gen_range(0..=q0.min(4));
        let (a, b) = (vals(rng, n, w), vals(rng, n, w));
        let got = out(int::mul_q(&tensor::<i16>(vec![n], q0, &a), &tensor::<i16>(vec![n], q1, &b), qi).unwrap());
        let want = (0..n).map(|i| sat(floor_shr(&(big(a[i]) * big(b[i])), q1 + qi), w)).collect();
        t.check(case, got, (want, q0 - qi, vec![n]));
    }
    t
}

fn matmul_cases<T: QInt>(rng: &mut ChaCha8Rng) -> KernelTally {
    let w = T::WIDTH;
    let mut t = KernelTally::new(format!("MatMul/{w}"));
    let qtop = w.bits().min(24);
    for case in 0..CASES {
        let (rows, k, n) = (rng.gen_range(1..4), rng.gen_range(1..40), rng.gen_range(1..6));
        let (q0, q1) = (rng.gen_range(0..qtop), rng.gen_range(0..qtop));
        let qi = rng.gen_range(0..=q0.min(4));
        let (x, m) = (vals(rng, rows * k, w), vals(rng, k * n, w));
        let opts = ExecOptions { simd: rng.gen() };
        let got = out(int::matmul_q(&tensor::<T>(vec![rows, k], q0, &x), &tensor::<T>(vec![k, n], q1, &m), qi, opts).unwrap());
        let mut want = Vec::new();
        for r in 0..rows {
            for j in 0..n {
                let acc: BigInt = (0..k).map(|i| big(x[r * k + i]) * big(m[i * n + j])).sum();
                want.push(sat(floor_shr(&acc, q1 + qi), w));
            }
        }
        t.check(case, got, (want, q0 - qi, vec![rows, n]));
    }
    t
}

/// Output size and leading pad of a direct convolution along one axis.
fn conv_axis(input: usize, k: usize, s: usize, same: bool) -> (usize, usize) {
    if same {
        let out = (input + s - 1) / s;
        let need = ((out - 1) * s + k) as i64 - input as i64;
        (out, need.max(0) as usize / 2)
    } else {
        ((input - k) / s + 1, 0)
    }
}

fn conv_cases(rng: &mut ChaCha8Rng) -> KernelTally {
    let w = ElementWidth::Int16;
    let mut t = KernelTally::new("Conv2D");
    for case in 0..CASES {
        let groups = *[1usize, 1, 2].choose(rng).unwrap();
        let (ih, iw) = (rng.gen_range(1..7), rng.gen_range(1..7));
        let (cin, cout) = (groups * rng.gen_range(1..3), groups * rng.gen_range(1..3));
        let (kh, kw) = (rng.gen_range(1..4), rng.gen_range(1..4));
        let stride = rng.gen_range(1..3);
        let same = rng.gen_bool(0.5) || ih < kh || iw < kw;
        let (q0, q1) = (rng.gen_range(0..16), rng.gen_range(0..16));
        let qi = rng.gen_range(0..=q0.min(3));
        let cg = cin / groups;
        let x = vals(rng, ih * iw * cin, w);
        let k = vals(rng, kh * kw * cg * cout, w);
        let params = ConvParams { stride, groups, padding: if same { Padding::Same } else { Padding::Valid } };
        let got = out(
            int::conv2d_q(&tensor::<i16>(vec![ih, iw, cin], q0, &x), &tensor::<i16>(vec![kh, kw, cg, cout], q1, &k), params, qi)
                .unwrap(),
        );
        let (oh, pt) = conv_axis(ih, kh, stride, same);
        let (ow, pl) = conv_axis(iw, kw, stride, same);
        let og = cout / groups;
        let mut want = Vec::new();
        for oy in 0..oh {
            for ox in 0..ow {
                for oc in 0..cout {
                    let g = oc / og;
                    let mut acc = BigInt::zero();
                    for ky in 0..kh {
                        for kx in 0..kw {
                            let iy = (oy * stride + ky) as i64 - pt as i64;
                            let ix = (ox * stride + kx) as i64 - pl as i64;
                            if iy < 0 || ix < 0 || iy >= ih as i64 || ix >= iw as i64 {
                                continue;
                            }
                            for c in 0..cg {
                                let xv = x[(iy as usize * iw + ix as usize) * cin + g * cg + c];
                                let kv = k[((ky * kw + kx) * cg + c) * cout + oc];
                                acc += big(xv) * big(kv);
                            }
                        }
                    }
                    want.push(sat(floor_shr(&acc, q1 + qi), w));
                }
            }
        }
        t.check(case, got, (want, q0 - qi, vec![oh, ow, cout]));
    }
    t
}

fn conv_transpose_cases(rng: &mut ChaCha8Rng) -> KernelTally {
    let w = ElementWidth::Int16;
    let mut t = KernelTally::new("Conv2DTranspose");
    for case in 0..CASES {
        let (ih, iw, cin, cout) = (rng.gen_range(1..5), rng.gen_range(1..5), rng.gen_range(1..3), rng.gen_range(1..3));
        let (kh, kw) = (rng.gen_range(1..4), rng.gen_range(1..4));
        let s = rng.gen_range(1..3);
        let same = rng.gen_bool(0.5);
        let (q0, q1) = (rng.gen_range(0..16), rng.gen_range(0..16));
        let qi = rng.gen_range(0..=q0.min(3));
        let x = vals(rng, ih * iw * cin, w);
        let k = vals(rng, kh * kw * cin * cout, w);
        let params = ConvParams { stride: s, groups: 1, padding: if same { Padding::Same } else { Padding::Valid } };
        let got = out(
            int::conv2d_transpose_q(&tensor::<i16>(vec![ih, iw, cin], q0, &x), &tensor::<i16>(vec![kh, kw, cin, cout], q1, &k), params, qi)
                .unwrap(),
        );
        let axis = |i: usize, k: usize| -> (usize, usize) {
            if same {
                (i * s, (((i - 1) * s + k) as i64 - (i * s) as i64).max(0) as usize / 2)
            } else {
                ((i - 1) * s + k, 0)
            }
        };
        let ((oh, pt), (ow, pl)) = (axis(ih, kh), axis(iw, kw));
        let mut want = Vec::new();
        for oy in 0..oh {
            for ox in 0..ow {
                for oc in 0..cout {
                    let mut acc = BigInt::zero();
                    for ky in 0..kh {
                        for kx in 0..kw {
                            // oy = iy * s + ky - pt
                            let ny = oy as i64 + pt as i64 - ky as i64;
                            let nx = ox as i64 + pl as i64 - kx as i64;
                            if ny < 0 || nx < 0 || ny % s as i64 != 0 || nx % s as i64 != 0 {
                                continue;
                            }
                            let (iy, ix) = ((ny / s as i64) as usize, (nx / s as i64) as usize);
                            if iy >= ih || ix >= iw {
                                continue;
                            }
                            for c in 0..cin {
                                acc += big(x[(iy * iw + ix) * cin + c]) * big(k[((ky * kw + kx) * cin + c) * cout + oc]);
                            }
                        }
                    }
                    want.push(sat(floor_shr(&acc, q1 + qi), w));
                }
            }
        }
        t.check(case, got, (want, q0 - qi, vec![oh, ow, cout]));
    }
    t
}

fn concat_cases(rng: &mut ChaCha8Rng) -> KernelTally {
    let w = ElementWidth::Int16;
    let mut t = KernelTally::new("Concat");
    for case in 0..CASES {
        let (a, b) = (rng.gen_range(1..4), rng.gen_range(1..4));
        let parts = rng.gen_range(1..4);
        let axis = rng.gen_range(0..2);
        let mut tensors = Vec::new();
        let mut raw = Vec::new();
        for _ in 0..parts {
            let ext = rng.gen_range(1..4);
            let dims = if axis == 0 { vec![ext, b] } else { vec![a, ext] };
            let q = rng.gen_range(0..16);
            let v = vals(rng, dims[0] * dims[1], w);
            tensors.push(tensor::<i16>(dims.clone(), q, &v));
            raw.push((dims, q, v));
        }
        let refs: Vec<&TypedTensor<i16>> = tensors.iter().collect();
        let got = out(int::concat_q(&refs, axis as i64).unwrap());
        let q = raw.iter().map(|r| r.1).min().unwrap();
        let mut want = Vec::new();
        let dims = if axis == 0 {
            for (_, qk, v) in &raw {
                want.extend(v.iter().map(|&x| sat(floor_shr(&big(x), qk - q), w)));
            }
            vec![raw.iter().map(|r| r.0[0]).sum(), b]
        } else {
            for r in 0..a {
                for (d, qk, v) in &raw {
                    want.extend(v[r * d[1]..(r + 1) * d[1]].iter().map(|&x| sat(floor_shr(&big(x), qk - q), w)));
                }
            }
            vec![a, raw.iter().map(|r| r.0[1]).sum()]
        };
        t.check(case, got, (want, q, dims));
    }
    t
}

fn leaky_cases(rng: &mut ChaCha8Rng) -> KernelTally {
    let w = ElementWidth::Int16;
    let mut t = KernelTally::new("LeakyReLU");
    for case in 0..CASES {
        let n = rng.gen_range(1..12);
        let q0 = rng.gen_range(0..16);
        let alpha: f32 = rng.gen_range(-0.99..0.99);
        let x = vals(rng, n, w);
        let got = out(int::leaky_relu_q(&tensor::<i16>(vec![n], q0, &x), alpha).unwrap());
        let (a, qa) = int::slope_quantizer::<i16>(alpha).unwrap();
        if ((a as f64) / (qa as f64).exp2() - alpha as f64).abs() > (-(qa as f64)).exp2() {
            t.mismatches += 1;
            continue;
        }
        let want = x
            .iter()
            .map(|&v| if v < 0 { sat(floor_shr(&(big(a as i64) * big(v)), qa), w) } else { v })
            .collect();
        t.check(case, got, (want, q0, vec![n]));
    }
    t
}

fn prelu_cases(rng: &mut ChaCha8Rng) -> KernelTally {
    let w = ElementWidth::Int16;
    let mut t = KernelTally::new("PReLU");
    for case in 0..CASES {
        let (n, c) = (rng.gen_range(1..4), rng.gen_range(1..5));
        let (q0, qs) = (rng.gen_range(0..16), rng.gen_range(0..16));
        let (x, s) = (vals(rng, n * c, w), vals(rng, c, w));
        let got = out(int::prelu_q(&tensor::<i16>(vec![n, c], q0, &x), &tensor::<i16>(vec![c], qs, &s)).unwrap());
        let want = (0..n * c)
            .map(|i| if x[i] < 0 { sat(floor_shr(&(big(s[i % c]) * big(x[i])), qs), w) } else { x[i] })
            .collect();
        t.check(case, got, (want, q0, vec![n, c]));
    }
    t
}

fn maximum_cases(rng: &mut ChaCha8Rng) -> KernelTally {
    let w = ElementWidth::Int16;
    let mut t = KernelTally::new("Maximum");
    for case in 0..CASES {
        let n = rng.gen_range(1..12);
        let q1 = rng.gen_range(0..16);
        let q0 = rng.gen_range(q1..=15);
        let (a, b) = (vals(rng, n, w), vals(rng, n, w));
        let got = out(int::maximum_q(&tensor::<i16>(vec![n], q0, &a), &tensor::<i16>(vec![n], q1, &b)).unwrap());
        let want = (0..n).map(|i| a[i].max(sat(big(b[i]) << (q0 - q1), w))).collect();
        t.check(case, got, (want, q0, vec![n]));
    }
    t
}

fn kernel_formulas() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x1e4b);
    let tallies = vec![
        bias_add_cases(&mut rng),
        add_cases(&mut rng),
        mul_cases(&mut rng),
        matmul_cases::<i16>(&mut rng),
        matmul_cases::<i8>(&mut rng),
        matmul_cases::<i32>(&mut rng),
        conv_cases(&mut rng),
        conv_transpose_cases(&mut rng),
        concat_cases(&mut rng),
        leaky_cases(&mut rng),
        prelu_cases(&mut rng),
        maximum_cases(&mut rng),
    ];
    let elapsed = start.elapsed();
    for t in &tallies {
        ensure!(t.mismatches == 0, "{}: {} mismatches, {}", t.name, t.mismatches, t.first.clone().unwrap_or_default());
    }
    ensure!(elapsed < Duration::from_secs(30), "took {:.1}s, limit 30s", elapsed.as_secs_f64());
    Ok(format!("{} kernels x {CASES} cases, 0 mismatches in {:.1}s", tallies.len(), elapsed.as_secs_f64()))
}

// ---------------------------------------------------------------------------
// 2. Determinism through the CLI
// ---------------------------------------------------------------------------

fn qnn(args: &[&str]) -> Result<std::process::Output, String> {
    Command::new(env!("CARGO_BIN_EXE_qnn")).args(args).output().map_err(|e| format!("spawn qnn: {e}"))
}

fn qnn_ok(args: &[&str]) -> Result<String, String> {
    let o = qnn(args)?;
    if !o.status.success() {
        return Err(format!("qnn {args:?} exited {:?}: {}", o.status.code(), String::from_utf8_lossy(&o.stderr)));
    }
    Ok(String::from_utf8_lossy(&o.stdout).into_owned())
}

fn path_str(p: &Path) -> &str {
    p.to_str().expect("utf-8 temp path")
}

/// Writes the int16 reference models once and returns their directory.
fn reference_dir(work: &Path) -> Result<PathBuf, String> {
    let dir = work.join("reference");
    if !dir.join("intra_4x4.smf1").exists() {
        qnn_ok(&["make-reference", "--out", path_str(&dir), "--width", "16", "--seed", "7"])?;
    }
    Ok(dir)
}

fn determinism(work: &Path) -> Outcome {
    let dir = work.join("determinism");
    std::fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(2);

    let g = synth::mlp(&mut rng, &[24, 48, 48, 10], Activation::Leaky(0.1));
    let calib: Vec<Vec<Tensor>> = (0..16).map(|_| vec![synth::random_tensor(&mut rng, vec![24], 1.0).into()]).collect();
    let dense = static_quantize(&g, &calib, ElementWidth::Int16, QuantizeOptions::default()).map_err(|e| e.to_string())?;
    let dense_path = dir.join("mlp16.smf1");
    std::fs::write(&dense_path, dense.to_bytes()).map_err(|e| e.to_string())?;
    let x = synth::random_tensor(&mut rng, vec![24], 1.0);
    let x_path = dir.join("mlp_in.stn1");
    std::fs::write(&x_path, quantize_inputs(&dense, &[x]).unwrap()[0].to_stn1()).map_err(|e| e.to_string())?;

    let refs = reference_dir(work)?;
    let sparse_path = refs.join("intra_4x4.smf1");
    let ctx = synth::random_tensor(&mut rng, vec![112], 16.0);
    let ctx_path = dir.join("ctx_in.stn1");
    std::fs::write(&ctx_path, Tensor::F32(ctx).to_stn1()).map_err(|e| e.to_string())?;

    let mut compared = 0;
    for (name, model, input) in [("dense", &dense_path, &x_path), ("sparse", &sparse_path, &ctx_path)] {
        let mut first: Option<Vec<u8>> = None;
        for run in 0..10 {
            let out = dir.join(format!("{name}-{run}"));
            let mut args = vec!["infer", "--model", path_str(model), "--input", path_str(input), "--out-dir", path_str(&out)];
            if run % 2 == 1 {
                args.push("--no-simd");
            }
            qnn_ok(&args)?;
            let bytes = std::fs::read(out.join("out0.stn1")).map_err(|e| e.to_string())?;
            ensure!(Tensor::from_stn1(&bytes).map(|t| t.width()) == Ok(ElementWidth::Int16), "{name}: output is not int16");
            match &first {
                None => first = Some(bytes),
                Some(f) => ensure!(*f == bytes, "{name}: run {run} differs from run 0"),
            }
            compared += 1;
        }
    }
    Ok(format!("{compared} runs (2 int16 models, 5 with and 5 without SIMD each), 0 byte diffs"))
}

// ---------------------------------------------------------------------------
// 3. Sparse equivalence
// ---------------------------------------------------------------------------

fn sparse_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let w = ElementWidth::Int16;
    for case in 0..1000 {
        let (rows, cols) = (rng.gen_range(1..=256), rng.gen_range(1..=256));
        let density = rng.gen_range(0.05..=0.50);
        let alignment = if rng.gen() { Alignment::A8 } else { Alignment::A16 };
        let dense: Vec<i64> = (0..rows * cols).map(|_| if rng.gen_bool(density) { val(&mut rng, w) } else { 0 }).collect();
        let (q0, q1) = (rng.gen_range(4..16), rng.gen_range(0..16));
        let qi = rng.gen_range(0..=3);
        let m = tensor::<i16>(vec![rows, cols], q1, &dense);
        let packed = qnn_core::SparseI16::pack(&m, alignment).map_err(|e| e.to_string())?;
        let batch = rng.gen_range(1..3);
        let x = tensor::<i16>(vec![batch, cols], q0, &vals(&mut rng, batch * cols, w));
        let transposed: Vec<i64> = (0..cols * rows).map(|i| dense[(i % rows) * cols + i / rows]).collect();
        let wt = tensor::<i16>(vec![cols, rows], q1, &transposed);
        for simd in [true, false] {
            let opts = ExecOptions { simd };
            let s = spmv_q(&packed, &x, qi, opts).map_err(|e| e.to_string())?;
            let d = int::matmul_q(&x, &wt, qi, opts).map_err(|e| e.to_string())?;
            ensure!(s == d, "case {case} ({rows}x{cols}, {alignment:?}, simd {simd}): outputs differ");
        }
    }
    Ok("1000 matrices up to 256x256, density 5-50%, A8/A16, 0 mismatches".into())
}

// ---------------------------------------------------------------------------
// 4. Density table
// ---------------------------------------------------------------------------

/// A `[rows, cols]` matrix holding exactly `macs / 8` aligned runs of 8.
fn matrix_with_macs(rows: usize, cols: usize, macs: u64) -> SparseF32 {
    let runs_total = (macs / 8) as usize;
    let mut runs = Vec::with_capacity(runs_total);
    for r in 0..rows {
        let here = runs_total / rows + usize::from(r < runs_total % rows);
        for j in 0..here {
            runs.push(Run { row: r as u32, start: (8 * j) as u32, len: 8 });
        }
    }
    SparseF32::from_runs(rows, cols, Alignment::A8, runs, vec![1.0; runs_total * 8], 0).unwrap()
}

fn single_layer(cols: usize, layer: Node) -> Graph {
    GraphBuilder::new(ElementWidth::Float32).input(0, vec![cols], 0).node(layer).output(layer_id()).build()
}

fn layer_id() -> u32 {
    2
}

fn density_table() -> Outcome {
    // Dense and sparse kMAC/pixel of the 4x4, 8x8 and 16x16 models.
    let table = [((4, 4), 108_300u64, 7_773u64, "7.2"), ((8, 8), 33_155, 2_624, "7.9"), ((16, 16), 15_627, 1_411, "9.0")];
    let mut report = Vec::new();
    for ((h, w), dense_k, sparse_k, printed) in table {
        let pixels = (h * w) as u64;
        let (dense_macs, sparse_macs) = (dense_k * pixels, sparse_k * pixels);
        let rows = if h == 16 { 768 } else { 1216 };
        ensure!(dense_macs % rows as u64 == 0, "{h}x{w}: dense count not a multiple of {rows}");
        let cols = (dense_macs / rows as u64) as usize;
        let sparse = matrix_with_macs(rows, cols, sparse_macs);
        let dense = TensorF32::zeros(vec![cols, rows], 0);
        let gs = single_layer(cols, Node::sparse_matmul(layer_id(), 0, sparse.clone()));
        let gd = GraphBuilder::new(ElementWidth::Float32)
            .input(0, vec![cols], 0)
            .node(Node::constant(1, dense))
            .node(Node::op(layer_id(), OpKind::MatMul, vec![0, 1]))
            .output(layer_id())
            .build();
        let ms = count_macs(&gs).map_err(|v| format!("{v:?}"))?.total_macs;
        let md = count_macs(&gd).map_err(|v| format!("{v:?}"))?.total_macs;
        ensure!((ms, md) == (sparse_macs, dense_macs), "{h}x{w}: counted {ms}/{md}, built {sparse_macs}/{dense_macs}");
        ensure!(sparse.density() == Ratio::new(ms, md), "{h}x{w}: matrix density disagrees with MAC ratio");
        let pct = format!("{:.1}", 100.0 * ms as f64 / md as f64);
        ensure!(pct == printed, "{h}x{w}: {pct}% vs {printed}%");
        report.push(format!("{h}x{w} {rows}x{cols} {ms}/{md} = {pct}%"));
    }
    Ok(report.join("; "))
}

// ---------------------------------------------------------------------------
// 5. Intra complexity
// ---------------------------------------------------------------------------

fn intra_complexity(work: &Path) -> Outcome {
    let refs = reference_dir(work)?;
    let model = refs.join("intra_4x4.smf1");
    let text = qnn_ok(&["--json", "info", "--model", path_str(&model)])?;
    let v: serde_json::Value = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    let k = v["kmac_per_pixel"].as_f64().ok_or("no kmac_per_pixel")?;
    let g = Graph::from_bytes(&std::fs::read(&model).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    let layers: Vec<&Node> = g.nodes().iter().filter(|n| n.kind == OpKind::SparseMatMul).collect();
    ensure!(layers.len() == 3, "{} sparse FC layers, expected 3", layers.len());
    let hidden: Vec<usize> = layers.iter().map(|n| n.sparse().unwrap().rows()).collect();
    ensure!(hidden[0] == 1216 && hidden[1] == 1216, "hidden widths {hidden:?}");
    let (nz, all) = layers.iter().fold((0u64, 0u64), |(a, b), n| {
        let s = n.sparse().unwrap();
        (a + s.mac_count(), b + (s.rows() * s.cols()) as u64)
    });
    let density = 100.0 * nz as f64 / all as f64;
    let rel = (k - 7.7).abs() / 7.7;
    ensure!(rel <= 0.10, "{k:.3} kMAC/pixel is {:.1}% from 7.7", 100.0 * rel);
    Ok(format!("{k:.3} kMAC/pixel ({:.1}% from 7.7), 3 sparse FC layers, hidden {hidden:?}, density {density:.1}%", 100.0 * rel))
}

// ---------------------------------------------------------------------------
// 6. Round trip
// ---------------------------------------------------------------------------

fn round_trip() -> Outcome {
    let b = 10u32;
    let mut checked = 0;
    for mu in [0i64, 512, 1023] {
        let samples: Vec<i64> = (0..1024).collect();
        let scale = (8.0f64 - b as f64).exp2();
        let float: Vec<f32> = samples.iter().map(|&s| ((s - mu) as f64 * scale) as f32).collect();
        let t = Tensor::F32(TensorF32::new(vec![1024], 0, float).unwrap());
        let back = postprocess(&t, mu as i32, b, 32, 32).map_err(|e| e.to_string())?;
        let bad = back.data().iter().zip(&samples).filter(|(&a, &s)| a as i64 != s).count();
        ensure!(bad == 0, "float path, mu {mu}: {bad} mismatches");

        // Integer path at q = 7: (s - mu) * 2^(8 - b) * 2^7.
        let int: Vec<i64> = samples.iter().map(|&s| (s - mu) << (7 + 8 - b as i64)).collect();
        let t = Tensor::from_raw(vec![1024], &int, 7, ElementWidth::Int16).map_err(|e| e.to_string())?;
        let back = postprocess(&t, mu as i32, b, 32, 32).map_err(|e| e.to_string())?;
        let bad = back.data().iter().zip(&samples).filter(|(&a, &s)| a as i64 != s).count();
        ensure!(bad == 0, "int16 path, mu {mu}: {bad} mismatches");
        checked += 2 * samples.len();
    }
    Ok(format!("{checked} samples (float and int16, mu 0/512/1023), 0 mismatches"))
}

// ---------------------------------------------------------------------------
// 7. Shape transformation table
// ---------------------------------------------------------------------------

/// (h, w), gamma, delta, transposed, network (h, w).
const TABLE_I: [((usize, usize), usize, usize, bool, (usize, usize)); 17] = [
    ((4, 4), 1, 1, false, (4, 4)),
    ((4, 8), 1, 1, false, (4, 8)),
    ((8, 4), 1, 1, true, (4, 8)),
    ((4, 16), 1, 1, false, (4, 16)),
    ((16, 4), 1, 1, true, (4, 16)),
    ((4, 32), 1, 1, false, (4, 32)),
    ((32, 4), 1, 1, true, (4, 32)),
    ((8, 8), 1, 1, false, (8, 8)),
    ((8, 16), 1, 1, false, (8, 16)),
    ((16, 8), 1, 1, true, (8, 16)),
    ((8, 32), 2, 1, false, (8, 16)),
    ((32, 8), 1, 2, true, (8, 16)),
    ((16, 16), 1, 1, false, (16, 16)),
    ((16, 32), 2, 1, false, (16, 16)),
    ((32, 16), 1, 2, false, (16, 16)),
    ((32, 32), 2, 2, false, (16, 16)),
    ((64, 64), 4, 4, false, (16, 16)),
];

fn transform_table() -> Outcome {
    let start = Instant::now();
    for &(shape, gamma, delta, transpose, network) in &TABLE_I {
        let r = transform_rule(shape.0, shape.1).ok_or(format!("{shape:?} rejected"))?;
        ensure!(
            (r.gamma, r.delta, r.transpose, r.network) == (gamma, delta, transpose, network),
            "{shape:?}: got {r:?}"
        );
    }
    let mut rejected = 0;
    for h in 4..=64 {
        for w in 4..=64 {
            let listed = TABLE_I.iter().any(|row| row.0 == (h, w));
            let got = transform_rule(h, w).is_some();
            ensure!(got == listed, "({h}, {w}): accepted {got}, listed {listed}");
            rejected += usize::from(!got);
        }
    }
    let frame = Plane::filled(256, 256, 512u16);
    for &(shape, ..) in &TABLE_I {
        let rule = transform_rule(shape.0, shape.1).unwrap();
        let spec = ContextSpec::for_network(rule.network).for_block(&rule);
        let ctx = extract_context(&frame, 128, 128, shape.0, shape.1, spec, 10, &Decoded::All).map_err(|e| e.to_string())?;
        let t = apply_transform(&ctx, &rule);
        ensure!(t.spec.n_a <= 8 && t.spec.n_l <= 8, "{shape:?}: transformed context {}x{}", t.spec.n_a, t.spec.n_l);
    }
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(1), "took {:.2}s, limit 1s", elapsed.as_secs_f64());
    Ok(format!(
        "{} rows match (the table lists 17 shapes), {rejected} other shapes in {{4..64}}^2 rejected, contexts <= 8 after transform",
        TABLE_I.len()
    ))
}

// ---------------------------------------------------------------------------
// 8. Signaling
// ---------------------------------------------------------------------------

/// The predicted shapes written out directly.
fn in_s_bar(h: usize, w: usize) -> bool {
    const S: [(usize, usize); 7] = [(4, 4), (4, 8), (4, 16), (4, 32), (8, 8), (8, 16), (16, 16)];
    const EXTRA: [(usize, usize); 10] =
        [(8, 4), (16, 4), (32, 4), (16, 8), (8, 32), (32, 8), (16, 32), (32, 16), (32, 32), (64, 64)];
    S.contains(&(h, w)) || EXTRA.contains(&(h, w))
}

fn signaling() -> Outcome {
    let mut cases = 0;
    for h in 1..=128 {
        for w in 1..=128 {
            let s = in_s_bar(h, w);
            for flag in [false, true] {
                // Luma: nnFlagY exists only for predicted shapes; 1 selects the NN mode.
                let want = if !s {
                    LumaPath::Regular { flag_present: false }
                } else if flag {
                    LumaPath::NnMode
                } else {
                    LumaPath::Regular { flag_present: true }
                };
                ensure!(signal_luma((h, w), flag) == want, "luma ({h},{w}) flag {flag}");
                cases += 1;
                for collocated in [false, true] {
                    for dm in [false, true] {
                        let want = match (collocated, s) {
                            // DM inherits the NN mode, or PLANAR for other shapes.
                            (true, true) => if dm { ChromaMode::NnMode } else { ChromaMode::Regular },
                            (true, false) => if dm { ChromaMode::Planar } else { ChromaMode::Regular },
                            // nnFlagC precedes the DM flag.
                            (false, true) => if flag { ChromaMode::NnMode } else { ChromaMode::Regular },
                            (false, false) => ChromaMode::Regular,
                        };
                        ensure!(
                            signal_chroma(collocated, (h, w), flag, dm) == want,
                            "chroma ({h},{w}) collocated {collocated} flag {flag} dm {dm}"
                        );
                        ensure!(chroma_flag_present(collocated, (h, w)) == (!collocated && s), "nnFlagC presence ({h},{w})");
                        cases += 1;
                    }
                }
            }
        }
    }
    Ok(format!("{cases} luma/chroma combinations over shapes up to 128x128, 0 mismatches"))
}

// ---------------------------------------------------------------------------
// 9. Residual scaling
// ---------------------------------------------------------------------------

fn random_plane(rng: &mut ChaCha8Rng, w: usize, h: usize) -> SamplePlane {
    Plane::new(w, h, (0..w * h).map(|_| rng.gen_range(0..1024)).collect()).unwrap()
}

fn perturb(rng: &mut ChaCha8Rng, p: &SamplePlane, spread: i64) -> SamplePlane {
    let data = p.data().iter().map(|&v| (v as i64 + rng.gen_range(-spread..=spread)).clamp(0, 1023) as u16).collect();
    Plane::new(p.width(), p.height(), data).unwrap()
}

/// `SSE(omega) * den(omega)^2`, sample by sample.
fn scaled_sse(orig: &SamplePlane, nn: &SamplePlane, db: &SamplePlane, omega: Ratio<i64>) -> i128 {
    let (num, den) = (*omega.numer() as i128, *omega.denom() as i128);
    orig.data()
        .iter()
        .zip(nn.data())
        .zip(db.data())
        .map(|((&o, &n), &d)| {
            let e = den * (o as i128 - d as i128) - num * (n as i128 - d as i128);
            e * e
        })
        .sum()
}

fn scaling() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for case in 0..1000 {
        let (w, h) = (rng.gen_range(1..17), rng.gen_range(1..17));
        let (orig, db) = (random_plane(&mut rng, w, h), random_plane(&mut rng, w, h));
        let nn = match case % 3 {
            0 => random_plane(&mut rng, w, h),
            // nn close to db so omega varies widely
            1 => perturb(&mut rng, &db, 3),
            _ => perturb(&mut rng, &orig, 20),
        };
        let s = derive_scale(&orig, &nn, &db).map_err(|e| e.to_string())?;
        if s.degenerate {
            ensure!(nn == db && s.omega.is_zero(), "case {case}: degenerate flag on distinct planes");
            continue;
        }
        let best = scaled_sse(&orig, &nn, &db, s.omega);
        let bd = *s.omega.denom() as i128;
        for k in -128i64..=128 {
            let g = Ratio::new(k, 64);
            let gd = *g.denom() as i128;
            ensure!(best * gd * gd <= scaled_sse(&orig, &nn, &db, g) * bd * bd, "case {case}: grid point {k}/64 beats omega");
        }
        for (&n, &d) in nn.data().iter().zip(db.data()) {
            ensure!(
                scaled_residual(n as i64, d as i64, s.omega) == convex_combination(n as i64, d as i64, s.omega),
                "case {case}: the two scaling forms differ"
            );
        }
    }
    let db = random_plane(&mut rng, 8, 8);
    let s = derive_scale(&random_plane(&mut rng, 8, 8), &db, &db).map_err(|e| e.to_string())?;
    ensure!(s.degenerate && s.omega.is_zero() && s.steps == 0, "degenerate case gave {s:?}");
    let nn = random_plane(&mut rng, 8, 8);
    ensure!(apply_scale(&nn, &db, 0, 10).unwrap() == db, "omega 0 is not the deblocked plane");
    ensure!(apply_scale(&nn, &db, 64, 10).unwrap() == nn, "omega 1 is not the NN plane");
    Ok("1000 triples: least squares beats the 1/64 grid on [-2, 2], both scaling forms equal, degenerate omega = 0".into())
}

// ---------------------------------------------------------------------------
// 10. Parameter selection
// ---------------------------------------------------------------------------

const SEL_W: usize = 48;
const SEL_H: usize = 32;
const SEL_BLOCK: usize = 16;

/// Residual in samples: `qp` everywhere, minus 10 where BS = 2.
fn qp_bs_model() -> Graph {
    let side = SEL_BLOCK + 2 * BORDER;
    let w = TensorF32::new(vec![1, 1, 4, 1], 0, vec![0.0, 0.0, -5.0 / 256.0, 1.0 / 16.0]).unwrap();
    GraphBuilder::new(ElementWidth::Float32)
        .input(0, vec![side, side, 4], 0)
        .node(Node::constant(1, w))
        .node(Node::op(2, OpKind::Conv2D, vec![0, 1]).padding(Padding::Same))
        .output(2)
        .build()
}

struct Oracle {
    off: f64,
    uniform: Vec<f64>,
    maps: Vec<(f64, Vec<BlockChoice>)>,
    bits_uniform: f64,
}

/// Costs of every off / uniform / per-block-map choice, as SSE and bits.
fn enumerate(orig: &SamplePlane, db: &SamplePlane, f: &[SamplePlane]) -> (Oracle, Vec<(u64, f64)>) {
    let pb = param_bits(f.len()) as f64;
    let bl = blocks(orig.width(), orig.height(), SEL_BLOCK);
    let k = f.len() + 1;
    let mut sse_bits = Vec::new();
    for code in 0..k.pow(bl.len() as u32) {
        let mut rest = code;
        let mut composed = db.clone();
        let mut bits = 0.0;
        for &(x, y, w, h) in &bl {
            let c = rest % k;
            rest /= k;
            bits += 1.0;
            if c > 0 {
                bits += pb;
                composed.paste(x, y, &f[c - 1].crop(x, y, w, h));
            }
        }
        sse_bits.push((sse(orig, &composed), bits));
    }
    let maps = (0..sse_bits.len())
        .map(|code| {
            let mut rest = code;
            let choices = (0..bl.len())
                .map(|_| {
                    let c = rest % k;
                    rest /= k;
                    if c == 0 { BlockChoice::Off } else { BlockChoice::Param(c as u8) }
                })
                .collect();
            (0.0, choices)
        })
        .collect();
    let oracle = Oracle {
        off: sse(orig, db) as f64,
        uniform: f.iter().map(|fi| sse(orig, fi) as f64).collect(),
        maps,
        bits_uniform: pb,
    };
    (oracle, sse_bits)
}

fn oracle_decision(o: &Oracle, sse_bits: &[(u64, f64)], lam: f64) -> (f64, FilterMode) {
    let mut best = (o.off, FilterMode::Off);
    for (i, &s) in o.uniform.iter().enumerate() {
        let c = s + lam * o.bits_uniform;
        if c < best.0 {
            best = (c, FilterMode::Uniform(i as u8 + 1));
        }
    }
    let mut pb: Option<(f64, usize)> = None;
    for (i, &(s, b)) in sse_bits.iter().enumerate() {
        let c = s as f64 + lam * b;
        if pb.is_none_or(|(bc, _)| c < bc) {
            pb = Some((c, i));
        }
    }
    let (c, i) = pb.unwrap();
    if c < best.0 {
        best = (c, FilterMode::PerBlock(o.maps[i].1.clone()));
    }
    best
}

fn parameter_selection() -> Outcome {
    for q in 0..64 {
        ensure!(candidate_list(q, LayerClass::Low) == [q, q - 5, q - 10], "low list for {q}");
        ensure!(candidate_list(q, LayerClass::High) == [q, q - 5, q + 5], "high list for {q}");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let g = qp_bs_model();
    let list = candidate_list(32, LayerClass::Low);
    let bl = blocks(SEL_W, SEL_H, SEL_BLOCK);
    let mut thresholds = Vec::new();
    for pic in 0..12 {
        // Region B blocks carry BS = 2; at least one block in each region.
        let in_b: Vec<bool> = loop {
            let v: Vec<bool> = (0..bl.len()).map(|_| rng.gen()).collect();
            if v.iter().any(|&b| b) && v.iter().any(|&b| !b) {
                break v;
            }
        };
        let region = |x: usize, y: usize| in_b[(y / SEL_BLOCK) * (SEL_W / SEL_BLOCK) + x / SEL_BLOCK];
        let rec = Plane::from_fn(SEL_W, SEL_H, |x, y| (200 + (x * 7 + y * 13) % 400) as u16);
        let noise: Vec<i64> = (0..SEL_W * SEL_H).map(|_| rng.gen_range(-1..=1)).collect();
        // Region A is matched by the second parameter (27), region B by the first (32 - 10).
        let orig = Plane::from_fn(SEL_W, SEL_H, |x, y| {
            let target = if region(x, y) { 22 } else { 27 };
            (rec.get(x, y) as i64 + target + noise[y * SEL_W + x]) as u16
        });
        let db = rec.map(|v| v + 2);
        let bs = Plane::from_fn(SEL_W, SEL_H, |x, y| if region(x, y) { 2 } else { 0 });
        let inputs = FilterInputs::new(rec.clone(), 10).with_pred(rec.clone()).with_bs(bs);
        let expected: Vec<SamplePlane> = list
            .iter()
            .map(|&qp| Plane::from_fn(SEL_W, SEL_H, |x, y| (rec.get(x, y) as i32 + qp - if region(x, y) { 10 } else { 0 }) as u16))
            .collect();
        let (oracle, sse_bits) = enumerate(&orig, &db, &expected);

        // Per-block cost rises faster with lambda than any alternative, so
        // bisection finds the single crossing.
        let per_block_wins = |lam: f64| matches!(oracle_decision(&oracle, &sse_bits, lam).1, FilterMode::PerBlock(_));
        ensure!(per_block_wins(1e-6), "picture {pic}: per-block does not win at tiny lambda");
        let (mut lo, mut hi) = (1e-6, 1e7);
        ensure!(!per_block_wins(hi), "picture {pic}: per-block still wins at {hi}");
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if per_block_wins(mid) { lo = mid } else { hi = mid }
        }
        let threshold = 0.5 * (lo + hi);
        thresholds.push(threshold);

        for factor in [0.25, 0.5, 0.9, 1.1, 2.0, 8.0] {
            let lam = threshold * factor;
            let opts = SelectOptions { lambda: lam, block: SEL_BLOCK, all_intra: false };
            let (d, filtered) = select_params(&orig, &db, &inputs, &g, &list, opts, 2, ExecOptions::default())
                .map_err(|e| e.to_string())?;
            ensure!(filtered == expected, "picture {pic}: filtered planes differ from the model formula");
            let (cost, mode) = oracle_decision(&oracle, &sse_bits, lam);
            ensure!(d.mode == mode, "picture {pic}, lambda {lam:.3}: chose {:?}, oracle {mode:?}", d.mode);
            let below = factor < 1.0;
            ensure!(
                matches!(d.mode, FilterMode::PerBlock(_)) == below,
                "picture {pic}, lambda {lam:.3} ({factor} x threshold): {:?}",
                d.mode
            );
            let chosen = d.costs.iter().cloned().fold(f64::INFINITY, f64::min);
            ensure!((chosen - cost).abs() <= 1e-6 * cost.max(1.0), "picture {pic}: cost {chosen} vs oracle {cost}");
            ensure!(chosen <= d.costs[0], "picture {pic}: decision costs more than filtering off");
        }
    }
    let (lo, hi) = thresholds.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &t| (a.min(t), b.max(t)));
    Ok(format!(
        "candidate lists exact for q 0..63; 12 two-region pictures, per-block below and uniform/off above lambda thresholds {lo:.1}..{hi:.1}, all 72 decisions match enumeration"
    ))
}

// ---------------------------------------------------------------------------
// 11. Quantization fidelity
// ---------------------------------------------------------------------------

fn random_net(rng: &mut ChaCha8Rng, trial: usize) -> (Graph, Vec<usize>) {
    let layers = rng.gen_range(1..=5);
    let act = if rng.gen() { Activation::Relu } else { Activation::Leaky(rng.gen_range(0.05..0.3)) };
    if trial % 2 == 0 {
        let widths: Vec<usize> = (0..=layers).map(|_| rng.gen_range(4..33)).collect();
        let dims = vec![widths[0]];
        (synth::mlp(rng, &widths, act), dims)
    } else {
        let (h, w) = (rng.gen_range(4..11), rng.gen_range(4..11));
        let channels: Vec<usize> = (0..=layers).map(|_| rng.gen_range(1..7)).collect();
        let k = *[1usize, 3].choose(rng).unwrap();
        let dims = vec![h, w, channels[0]];
        (synth::cnn(rng, h, w, &channels, k, act), dims)
    }
}

fn quantization_fidelity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let tol = (-6.0f64).exp2();
    let (mut worst, mut min_q) = (0.0f64, u32::MAX);
    for trial in 0..50 {
        let (g, dims) = random_net(&mut rng, trial);
        let calib: Vec<Vec<Tensor>> =
            (0..32).map(|_| vec![synth::random_tensor(&mut rng, dims.clone(), 1.0).into()]).collect();
        let opts = QuantizeOptions { input_q: InputQuantizer::Calibrated, ..Default::default() };
        let q = static_quantize(&g, &calib, ElementWidth::Int16, opts).map_err(|e| format!("trial {trial}: {e}"))?;
        let analysis = q.analyze().map_err(|v| format!("trial {trial}: {v:?}"))?;
        let latent = q
            .inputs()
            .iter()
            .map(|d| d.q)
            .chain(q.nodes().iter().filter(|n| n.kind != OpKind::Const).map(|n| analysis.info(n.id).unwrap().q))
            .min()
            .unwrap();
        min_q = min_q.min(latent);
        ensure!(latent >= 10, "trial {trial}: latent q {latent}");
        for _ in 0..8 {
            let x = synth::random_tensor(&mut rng, dims.clone(), 1.0);
            let yf = infer(&g, &[x.clone().into()]).map_err(|e| e.to_string())?[0].dequantize();
            let yq = infer(&q, &quantize_inputs(&q, &[x]).unwrap()).map_err(|e| e.to_string())?[0].dequantize();
            for (a, b) in yf.data().iter().zip(yq.data()) {
                worst = worst.max((*a as f64 - *b as f64).abs());
            }
        }
        ensure!(worst <= tol, "trial {trial}: max-abs error {worst:.2e} > 2^-6");
    }
    Ok(format!("50 int16 MLP/CNN graphs, max-abs error {worst:.2e} <= 2^-6, min latent q {min_q}"))
}

