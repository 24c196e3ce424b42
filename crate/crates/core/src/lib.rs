//! Fixed-point neural-network inference.
//!
//! Tensors carry a power-of-two quantizer `q` (stored `x` means `x / 2^q`),
//! integer kernels use shifts only and are bit-exact across platforms, and
//! graphs are immutable DAGs stored in the SMF1 format.
//!
//! ```
//! use qnn_core::{kernels::int::matmul_q, kernels::ExecOptions, TensorI16};
//!
//! let x = TensorI16::from_vec(vec![64, -32], 4);
//! let w = TensorI16::new(vec![2, 1], 7, vec![128, 64]).unwrap();
//! let y = matmul_q(&x, &w, 0, ExecOptions::default()).unwrap();
//! assert_eq!((y.data(), y.q()), (&[48i16][..], 4));
//! ```

pub mod complexity;
pub mod error;
pub mod graph;
pub mod kernels;
pub mod quantize;
pub mod scalar;
pub mod sparse;
pub mod synth;
pub mod tensor;

pub use error::{ExecError, FormatError, KernelError, QuantizeError, TensorError};
pub use graph::{ExecContext, Graph, GraphBuilder, Node, OpKind, Violation};
pub use kernels::ExecOptions;
pub use scalar::{Element, QInt, Real};
pub use sparse::{Alignment, AnySparse, SparsePackedMatrix};
pub use tensor::{clip, quantize_float, ElementWidth, Tensor, TypedTensor};

pub type TensorF32 = TypedTensor<f32>;
pub type TensorF64 = TypedTensor<f64>;
pub type TensorI32 = TypedTensor<i32>;
pub type TensorI16 = TypedTensor<i16>;
pub type TensorI8 = TypedTensor<i8>;

pub type SparseF32 = SparsePackedMatrix<f32>;
pub type SparseI32 = SparsePackedMatrix<i32>;
pub type SparseI16 = SparsePackedMatrix<i16>;
