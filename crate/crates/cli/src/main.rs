//! `qnn`: run, quantize and inspect SMF1 models, and drive the intra
//! prediction and in-loop filter pipelines.
//!
//! Exit codes: 0 success, 2 usage, 3 format, 4 numeric.

use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

mod engine;
mod fail;
mod pipelines;

use fail::CliError;

#[derive(Parser)]
#[command(name = "qnn", version, about = "Fixed-point neural network engine and codec tools")]
struct Cli {
    /// Structured JSON output and diagnostics.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum PlaneFormat {
    Pgm,
    Stn1,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum RateClass {
    Low,
    High,
}

#[derive(Subcommand)]
enum Command {
    /// Run a model on STN1 inputs and write one STN1 file per output.
    Infer {
        #[arg(long)]
        model: PathBuf,
        /// One STN1 file per graph input, in declaration order.
        #[arg(long, required = true, num_args = 1..)]
        input: Vec<PathBuf>,
        /// Run the float32 twin of the model.
        #[arg(long)]
        float: bool,
        /// Plain accumulation loops instead of the lane-blocked ones.
        #[arg(long)]
        no_simd: bool,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Integerize a float model from calibration inputs.
    Quantize {
        #[arg(long)]
        model: PathBuf,
        /// Directory of `*.stn1` files, each holding one STN1 blob per graph input.
        #[arg(long)]
        calib: PathBuf,
        /// 8, 16 or 32.
        #[arg(long, default_value = "16")]
        width: String,
        /// `default`, `calibrated`, or a fixed quantizer.
        #[arg(long, default_value = "default")]
        input_q: String,
        #[arg(long, default_value_t = 1.25)]
        headroom: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Per-node MAC table and kMAC/pixel.
    Info {
        #[arg(long)]
        model: PathBuf,
        /// Pixels produced per inference; defaults to the model's `pixels` metadata.
        #[arg(long)]
        pixels: Option<u64>,
    },
    /// Validate a model file and check that re-saving reproduces its bytes.
    ConvertCheck {
        #[arg(long)]
        model: PathBuf,
    },
    /// Predict one block with the neural intra models in a directory.
    IntraPredict {
        #[arg(long)]
        frame: PathBuf,
        #[arg(long, value_enum, default_value = "pgm")]
        frame_format: PlaneFormat,
        /// Top-left sample as `x,y`.
        #[arg(long)]
        pos: String,
        /// Block size as `hxw`.
        #[arg(long)]
        size: String,
        #[arg(long)]
        models: PathBuf,
        #[arg(long, default_value_t = qnn_codec::DEFAULT_BIT_DEPTH)]
        bit_depth: u32,
        /// Treat the whole frame as decoded instead of only the causal part.
        #[arg(long)]
        all_decoded: bool,
        /// Where to write the predicted block as STN1.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Filter a picture, select parameters and combine with the deblocked picture.
    FilterRun {
        #[arg(long)]
        orig: PathBuf,
        #[arg(long)]
        rec: PathBuf,
        #[arg(long)]
        db: PathBuf,
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        bs: PathBuf,
        #[arg(long)]
        ipb: Option<PathBuf>,
        #[arg(long, requires = "col1")]
        col0: Option<PathBuf>,
        #[arg(long, requires = "col0")]
        col1: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "pgm")]
        plane_format: PlaneFormat,
        #[arg(long, allow_hyphen_values = true)]
        qp: i32,
        #[arg(long)]
        tid: u32,
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = qnn_codec::DEFAULT_BIT_DEPTH)]
        bit_depth: u32,
        /// Overrides the QP-derived lambda.
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long, value_enum, default_value = "low")]
        bitrate: RateClass,
        #[arg(long)]
        all_intra: bool,
        /// Where to write the final plane as STN1.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the untrained reference intra models and a reference filter model.
    MakeReference {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// `float`, 8, 16 or 32.
        #[arg(long, default_value = "16")]
        width: String,
    },
}

/// A command result in both renderings.
pub struct Report {
    pub json: serde_json::Value,
    pub text: String,
}

fn threads() -> Result<usize, CliError> {
    match std::env::var("QNN_THREADS") {
        Ok(v) => v
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| CliError::Usage(format!("QNN_THREADS={v} is not a positive integer"))),
        Err(_) => Ok(1),
    }
}

fn run(cmd: Command) -> Result<Report, CliError> {
    match cmd {
        Command::Infer { model, input, float, no_simd, out_dir } => {
            engine::infer(&model, &input, float, !no_simd, &out_dir)
        }
        Command::Quantize { model, calib, width, input_q, headroom, out } => {
            engine::quantize(&model, &calib, &width, &input_q, headroom, &out)
        }
        Command::Info { model, pixels } => engine::info(&model, pixels),
        Command::ConvertCheck { model } => engine::convert_check(&model),
        Command::IntraPredict { frame, frame_format, pos, size, models, bit_depth, all_decoded, out } => {
            pipelines::intra_predict(pipelines::IntraArgs {
                frame: &frame,
                format: frame_format,
                pos: &pos,
                size: &size,
                models: &models,
                bit_depth,
                all_decoded,
                out: out.as_deref(),
            })
        }
        Command::FilterRun {
            orig,
            rec,
            db,
            pred,
            bs,
            ipb,
            col0,
            col1,
            plane_format,
            qp,
            tid,
            model,
            bit_depth,
            lambda,
            bitrate,
            all_intra,
            out,
        } => pipelines::filter_run(pipelines::FilterArgs {
            orig: &orig,
            rec: &rec,
            db: &db,
            pred: &pred,
            bs: &bs,
            ipb: ipb.as_deref(),
            col: col0.as_deref().zip(col1.as_deref()),
            format: plane_format,
            qp,
            tid,
            model: &model,
            bit_depth,
            lambda,
            bitrate,
            all_intra,
            threads: threads()?,
            out: out.as_deref(),
        }),
        Command::MakeReference { out, seed, width } => engine::make_reference(&out, seed, &width),
    }
}

fn main() {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(r) if cli.json => println!("{}", r.json),
        Ok(r) => print!("{}", r.text),
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            if cli.json {
                eprintln!("{}", json!({ "error": { "kind": e.kind(), "code": e.exit_code(), "message": msg } }));
            } else {
                eprintln!("error[{}]: {msg}", e.kind());
            }
            std::process::exit(e.exit_code());
        }
    }
}
