//! Run-aligned compressed-row weights for dense layers.
//!
//! Each row stores a list of runs `(start, len)` with explicit values.
//! Runs start on a multiple of the alignment `A` and their length is a
//! multiple of `A`, so every run maps onto whole SIMD lanes. The one
//! exception is a run that ends at the last column of a row whose width is
//! not a multiple of `A`: it is cut at the matrix edge. Zeros inside a run
//! are stored and multiplied like any other value.
//!
//! The matrix is `rows x cols` and acts on vectors of length `cols`:
//! `y[r] = sum_c M[r, c] * x[c]`.

use num_rational::Ratio;
use num_traits::Zero;

use crate::error::{shape_err, KernelError, TensorError};
use crate::kernels::{ExecOptions, LANES};
use crate::scalar::{Element, QInt, Real};
use crate::tensor::{ElementWidth, Tensor, TypedTensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Alignment {
    A8,
    A16,
}

impl Alignment {
    pub fn value(self) -> usize {
        match self {
            Alignment::A8 => 8,
            Alignment::A16 => 16,
        }
    }

    pub fn from_value(v: usize) -> Option<Self> {
        match v {
            8 => Some(Alignment::A8),
            16 => Some(Alignment::A16),
            _ => None,
        }
    }
}

impl Default for Alignment {
    fn default() -> Self {
        Alignment::A8
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Run {
    pub row: u32,
    pub start: u32,
    pub len: u32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SparsePackedMatrix<T> {
    rows: usize,
    cols: usize,
    alignment: Alignment,
    runs: Vec<Run>,
    /// `row_ptr[r]..row_ptr[r + 1]` indexes the runs of row `r`.
    row_ptr: Vec<usize>,
    /// Offset of each run's first value in `values`.
    offsets: Vec<usize>,
    values: Vec<T>,
    q: u32,
}

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum SparseError {
    #[error("run {index} ({run:?}) is not aligned to {alignment}")]
    Unaligned { index: usize, run: Run, alignment: usize },
    #[error("run {index} ({run:?}) is out of bounds or out of order")]
    BadRun { index: usize, run: Run },
    #[error("run lengths sum to {expected} but {actual} values were given")]
    ValueCount { expected: usize, actual: usize },
    #[error("matrix must be rank 2, got {0:?}")]
    NotMatrix(Vec<usize>),
}

impl<T: Copy + Default + PartialEq> SparsePackedMatrix<T> {
    /// Packs a dense `[rows, cols]` matrix, covering each nonzero segment
    /// with the smallest set of aligned blocks.
    pub fn pack(dense: &TypedTensor<T>, alignment: Alignment) -> Result<Self, SparseError> {
        let [rows, cols] = *dense.dims() else {
            return Err(SparseError::NotMatrix(dense.dims().to_vec()));
        };
        let a = alignment.value();
        let zero = T::default();
        let mut runs = Vec::new();
        let mut values = Vec::new();
        for r in 0..rows {
            let row = &dense.data()[r * cols..(r + 1) * cols];
            let mut open: Option<usize> = None;
            for b in 0..cols.div_ceil(a) {
                let block = b * a..((b + 1) * a).min(cols);
                let live = row[block.clone()].iter().any(|&v| v != zero);
                match (live, open) {
                    (true, None) => open = Some(block.start),
                    (false, Some(start)) => {
                        runs.push(Run { row: r as u32, start: start as u32, len: (block.start - start) as u32 });
                        values.extend_from_slice(&row[start..block.start]);
                        open = None;
                    }
                    _ => {}
                }
            }
            if let Some(start) = open {
                runs.push(Run { row: r as u32, start: start as u32, len: (cols - start) as u32 });
                values.extend_from_slice(&row[start..]);
            }
        }
        Self::from_runs(rows, cols, alignment, runs, values, dense.q())
    }

    /// Builds a matrix from explicit runs (sorted by row, then start).
    pub fn from_runs(
        rows: usize,
        cols: usize,
        alignment: Alignment,
        runs: Vec<Run>,
        values: Vec<T>,
        q: u32,
    ) -> Result<Self, SparseError> {
        let a = alignment.value();
        let mut row_ptr = vec![0usize; rows + 1];
        let mut offsets = Vec::with_capacity(runs.len());
        let mut total = 0usize;
        let mut prev: Option<Run> = None;
        for (index, &run) in runs.iter().enumerate() {
            let (r, s, l) = (run.row as usize, run.start as usize, run.len as usize);
            let ordered = match prev {
                Some(p) => (p.row, p.start + p.len) < (run.row, run.start + 1) && (p.row < run.row || p.start + p.len <= run.start),
                None => true,
            };
            if r >= rows || l == 0 || s + l > cols || !ordered {
                return Err(SparseError::BadRun { index, run });
            }
            if s % a != 0 || (l % a != 0 && s + l != cols) {
                return Err(SparseError::Unaligned { index, run, alignment: a });
            }
            row_ptr[r + 1] += 1;
            offsets.push(total);
            total += l;
            prev = Some(run);
        }
        if total != values.len() {
            return Err(SparseError::ValueCount { expected: total, actual: values.len() });
        }
        for r in 0..rows {
            row_ptr[r + 1] += row_ptr[r];
        }
        Ok(SparsePackedMatrix { rows, cols, alignment, runs, row_ptr, offsets, values, q })
    }

    pub fn unpack(&self) -> TypedTensor<T> {
        let mut data = vec![T::default(); self.rows * self.cols];
        for (run, &off) in self.runs.iter().zip(&self.offsets) {
            let base = run.row as usize * self.cols + run.start as usize;
            data[base..base + run.len as usize].copy_from_slice(&self.values[off..off + run.len as usize]);
        }
        TypedTensor::new(vec![self.rows, self.cols], self.q, data).expect("dims match payload")
    }
}

impl<T> SparsePackedMatrix<T> {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn alignment(&self) -> Alignment {
        self.alignment
    }

    pub fn runs(&self) -> &[Run] {
        &self.runs
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn q(&self) -> u32 {
        self.q
    }

    pub fn row_runs(&self, r: usize) -> impl Iterator<Item = (&Run, &[T])> {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        self.runs[range.clone()]
            .iter()
            .zip(&self.offsets[range])
            .map(|(run, &off)| (run, &self.values[off..off + run.len as usize]))
    }

    /// Executed multiplies for one input vector: the sum of run lengths.
    pub fn mac_count(&self) -> u64 {
        self.runs.iter().map(|r| r.len as u64).sum()
    }

    pub fn dense_mac_count(&self) -> u64 {
        (self.rows * self.cols) as u64
    }

    /// `mac_count / (rows * cols)` as an exact ratio.
    pub fn density(&self) -> Ratio<u64> {
        Ratio::new(self.mac_count(), self.dense_mac_count())
    }

    /// Same structure with values mapped through `f`.
    pub fn map_values<U>(&self, q: u32, f: impl Fn(&T) -> U) -> SparsePackedMatrix<U> {
        SparsePackedMatrix {
            rows: self.rows,
            cols: self.cols,
            alignment: self.alignment,
            runs: self.runs.clone(),
            row_ptr: self.row_ptr.clone(),
            offsets: self.offsets.clone(),
            values: self.values.iter().map(f).collect(),
            q,
        }
    }
}

fn split_rows(x: &[usize], cols: usize) -> Result<(usize, Vec<usize>), KernelError> {
    match x.split_last() {
        Some((&k, lead)) if k == cols => Ok((lead.iter().product(), lead.to_vec())),
        _ => Err(shape_err(format!("sparse matrix expects last dim {cols}, got {x:?}"))),
    }
}

/// Sparse matrix-vector product with the MatMul quantizer rule; bit-exact
/// with `matmul_q` on the unpacked (transposed) weights.
pub fn spmv_q<T: QInt>(
    m: &SparsePackedMatrix<T>,
    x: &TypedTensor<T>,
    q_i: u32,
    opts: ExecOptions,
) -> Result<TypedTensor<T>, KernelError> {
    let q = x.q().checked_sub(q_i).ok_or(KernelError::QuantizerOrder { q0: x.q(), q1: q_i })?;
    let (batch, mut dims) = split_rows(x.dims(), m.cols)?;
    dims.push(m.rows);
    let shift = m.q + q_i;
    let mut out = Vec::with_capacity(batch * m.rows);
    for b in 0..batch {
        let xv = &x.data()[b * m.cols..(b + 1) * m.cols];
        for r in 0..m.rows {
            let mut acc = T::Acc::zero();
            for (run, vals) in m.row_runs(r) {
                let xs = &xv[run.start as usize..(run.start + run.len) as usize];
                acc += if opts.simd { dot_lanes(vals, xs) } else { dot(vals, xs) };
            }
            out.push(T::clip_acc(T::shr_acc(acc, shift)));
        }
    }
    Ok(TypedTensor::new(dims, q, out)?)
}

#[inline]
fn dot<T: QInt>(a: &[T], b: &[T]) -> T::Acc {
    let mut acc = T::Acc::zero();
    for (&u, &v) in a.iter().zip(b) {
        acc += u.widen() * v.widen();
    }
    acc
}

#[inline]
fn dot_lanes<T: QInt>(a: &[T], b: &[T]) -> T::Acc {
    let mut lanes = [T::Acc::zero(); LANES];
    let (ac, bc) = (a.chunks_exact(LANES), b.chunks_exact(LANES));
    let tail = dot(ac.remainder(), bc.remainder());
    for (ca, cb) in ac.zip(bc) {
        for l in 0..LANES {
            lanes[l] += ca[l].widen() * cb[l].widen();
        }
    }
    lanes.iter().fold(tail, |s, &l| s + l)
}

/// Float reference of [`spmv_q`].
pub fn spmv<F: Real>(m: &SparsePackedMatrix<F>, x: &TypedTensor<F>) -> Result<TypedTensor<F>, KernelError> {
    let (batch, mut dims) = split_rows(x.dims(), m.cols)?;
    dims.push(m.rows);
    let mut out = Vec::with_capacity(batch * m.rows);
    for b in 0..batch {
        let xv = &x.data()[b * m.cols..(b + 1) * m.cols];
        for r in 0..m.rows {
            let mut acc = F::zero();
            for (run, vals) in m.row_runs(r) {
                for (&v, &xi) in vals.iter().zip(&xv[run.start as usize..]) {
                    acc = acc + v * xi;
                }
            }
            out.push(acc);
        }
    }
    Ok(TypedTensor::new(dims, 0, out)?)
}

/// Sparse weights of any element width, as stored in a model.
#[derive(Clone, Debug, PartialEq)]
pub enum AnySparse {
    F32(SparsePackedMatrix<f32>),
    I32(SparsePackedMatrix<i32>),
    I16(SparsePackedMatrix<i16>),
    I8(SparsePackedMatrix<i8>),
}

macro_rules! with_sparse {
    ($m:expr, $s:ident => $body:expr) => {
        match $m {
            AnySparse::F32($s) => $body,
            AnySparse::I32($s) => $body,
            AnySparse::I16($s) => $body,
            AnySparse::I8($s) => $body,
        }
    };
}

impl AnySparse {
    pub fn width(&self) -> ElementWidth {
        match self {
            AnySparse::F32(_) => ElementWidth::Float32,
            AnySparse::I32(_) => ElementWidth::Int32,
            AnySparse::I16(_) => ElementWidth::Int16,
            AnySparse::I8(_) => ElementWidth::Int8,
        }
    }

    pub fn rows(&self) -> usize {
        with_sparse!(self, s => s.rows())
    }

    pub fn cols(&self) -> usize {
        with_sparse!(self, s => s.cols())
    }

    pub fn q(&self) -> u32 {
        with_sparse!(self, s => s.q())
    }

    pub fn mac_count(&self) -> u64 {
        with_sparse!(self, s => s.mac_count())
    }

    pub fn density(&self) -> Ratio<u64> {
        with_sparse!(self, s => s.density())
    }

    pub fn runs(&self) -> &[Run] {
        with_sparse!(self, s => s.runs())
    }

    pub fn alignment(&self) -> Alignment {
        with_sparse!(self, s => s.alignment())
    }

    /// Values as a 1-D tensor, `None` when there are no runs.
    pub fn values_tensor(&self) -> Option<Tensor> {
        fn mk<T: Element>(s: &SparsePackedMatrix<T>) -> Option<Tensor> {
            (!s.values().is_empty()).then(|| T::wrap(TypedTensor::from_vec(s.values().to_vec(), s.q())))
        }
        with_sparse!(self, s => mk(s))
    }

    /// Real-valued copy of the values (dequantized for integer widths).
    pub fn to_f32(&self) -> SparsePackedMatrix<f32> {
        match self {
            AnySparse::F32(s) => s.clone(),
            AnySparse::I32(s) => dequant(s),
            AnySparse::I16(s) => dequant(s),
            AnySparse::I8(s) => dequant(s),
        }
    }

    pub fn max_abs(&self) -> f64 {
        let s = self.to_f32();
        s.values().iter().fold(0.0f64, |m, &v| m.max((v as f64).abs()))
    }

    /// Serialized layout: rows u32, cols u32, A u8, run count u32, runs
    /// `(row, start, len)` as u32 triples, then the values as an STN1 blob
    /// (omitted when there are no runs).
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(&(self.rows() as u32).to_le_bytes());
        out.extend_from_slice(&(self.cols() as u32).to_le_bytes());
        out.push(self.alignment().value() as u8);
        out.extend_from_slice(&(self.runs().len() as u32).to_le_bytes());
        for r in self.runs() {
            for v in [r.row, r.start, r.len] {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        if let Some(t) = self.values_tensor() {
            out.extend_from_slice(&t.to_stn1());
        }
        out
    }

    /// Inverse of [`to_bytes`](Self::to_bytes); returns bytes consumed.
    pub fn from_bytes(bytes: &[u8], width: ElementWidth) -> Result<(AnySparse, usize), SparsePayloadError> {
        let mut pos = 0usize;
        let u32_at = |pos: &mut usize| -> Result<u32, SparsePayloadError> {
            let b = bytes.get(*pos..*pos + 4).ok_or(SparsePayloadError::Truncated(*pos))?;
            *pos += 4;
            Ok(u32::from_le_bytes(b.try_into().unwrap()))
        };
        let rows = u32_at(&mut pos)? as usize;
        let cols = u32_at(&mut pos)? as usize;
        let a = *bytes.get(pos).ok_or(SparsePayloadError::Truncated(pos))?;
        pos += 1;
        let alignment = Alignment::from_value(a as usize).ok_or(SparsePayloadError::BadAlignment(a))?;
        let n = u32_at(&mut pos)? as usize;
        if n > bytes.len() / 12 + 1 {
            return Err(SparsePayloadError::Truncated(pos));
        }
        let mut runs = Vec::with_capacity(n);
        for _ in 0..n {
            let row = u32_at(&mut pos)?;
            let start = u32_at(&mut pos)?;
            let len = u32_at(&mut pos)?;
            runs.push(Run { row, start, len });
        }
        let (values, q) = if n == 0 {
            (Tensor::F32(TypedTensor::from_vec(vec![0.0], 0)), 0)
        } else {
            let (t, used) = Tensor::from_stn1_prefix(&bytes[pos..]).map_err(SparsePayloadError::Tensor)?;
            pos += used;
            if t.width() != width {
                return Err(SparsePayloadError::Width(t.width()));
            }
            let q = t.q();
            (t, q)
        };
        fn build<T: Element>(
            rows: usize,
            cols: usize,
            alignment: Alignment,
            runs: Vec<Run>,
            values: &Tensor,
            q: u32,
        ) -> Result<SparsePackedMatrix<T>, SparsePayloadError> {
            let vals = if runs.is_empty() {
                Vec::new()
            } else {
                T::view(values).expect("width checked").data().to_vec()
            };
            SparsePackedMatrix::from_runs(rows, cols, alignment, runs, vals, q).map_err(SparsePayloadError::Structure)
        }
        let m = match width {
            ElementWidth::Float32 => AnySparse::F32(build(rows, cols, alignment, runs, &values, 0)?),
            ElementWidth::Int32 => AnySparse::I32(build(rows, cols, alignment, runs, &values, q)?),
            ElementWidth::Int16 => AnySparse::I16(build(rows, cols, alignment, runs, &values, q)?),
            ElementWidth::Int8 => AnySparse::I8(build(rows, cols, alignment, runs, &values, q)?),
        };
        Ok((m, pos))
    }
}

fn dequant<T: QInt>(s: &SparsePackedMatrix<T>) -> SparsePackedMatrix<f32> {
    let scale = (s.q() as f64).exp2();
    s.map_values(0, |&v| (v.to_f64() / scale) as f32)
}

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum SparsePayloadError {
    #[error("truncated sparse payload at byte {0}")]
    Truncated(usize),
    #[error("alignment {0} is not 8 or 16")]
    BadAlignment(u8),
    #[error("sparse values have width {0}, model width differs")]
    Width(ElementWidth),
    #[error(transparent)]
    Tensor(TensorError),
    #[error(transparent)]
    Structure(SparseError),
}

impl<T: Element> From<SparsePackedMatrix<T>> for AnySparse
where
    AnySparse: FromTyped<T>,
{
    fn from(m: SparsePackedMatrix<T>) -> Self {
        <AnySparse as FromTyped<T>>::from_typed(m)
    }
}

/// Helper for converting typed matrices into [`AnySparse`].
pub trait FromTyped<T> {
    fn from_typed(m: SparsePackedMatrix<T>) -> Self;
}

macro_rules! from_typed {
    ($t:ty, $v:ident) => {
        impl FromTyped<$t> for AnySparse {
            fn from_typed(m: SparsePackedMatrix<$t>) -> Self {
                AnySparse::$v(m)
            }
        }
    };
}
from_typed!(f32, F32);
from_typed!(i32, I32);
from_typed!(i16, I16);
from_typed!(i8, I8);

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{int::matmul_q, shape::transpose};
    use proptest::prelude::*;

    fn row(cols: usize, nz: &[(usize, i16)]) -> TypedTensor<i16> {
        let mut d = vec![0i16; cols];
        for &(c, v) in nz {
            d[c] = v;
        }
        TypedTensor::new(vec![1, cols], 0, d).unwrap()
    }

    #[test]
    fn aligned_segment_is_one_run() {
        let nz: Vec<_> = (8..16).map(|c| (c, 1)).collect();
        let m = SparsePackedMatrix::pack(&row(32, &nz), Alignment::A8).unwrap();
        assert_eq!(m.runs(), &[Run { row: 0, start: 8, len: 8 }]);
    }

    #[test]
    fn single_nonzero_gets_covering_block() {
        let d = row(32, &[(3, 5)]);
        let m = SparsePackedMatrix::pack(&d, Alignment::A8).unwrap();
        assert_eq!(m.runs(), &[Run { row: 0, start: 0, len: 8 }]);
        assert_eq!(m.values().iter().filter(|&&v| v == 0).count(), 7);
        assert_eq!(m.unpack(), d);
    }

    #[test]
    fn zero_matrix_has_no_runs() {
        let d = TypedTensor::<i16>::zeros(vec![4, 32], 3);
        let m = SparsePackedMatrix::pack(&d, Alignment::A16).unwrap();
        assert!(m.runs().is_empty());
        assert_eq!(m.mac_count(), 0);
        let x = TypedTensor::<i16>::from_vec(vec![9; 32], 5);
        let y = spmv_q(&m, &x, 0, ExecOptions::default()).unwrap();
        assert_eq!(y.data(), &[0; 4]);
    }

    #[test]
    fn dense_matrix_density_is_one() {
        let d = TypedTensor::<i16>::new(vec![3, 16], 0, vec![1; 48]).unwrap();
        let m = SparsePackedMatrix::pack(&d, Alignment::A8).unwrap();
        assert_eq!(m.mac_count(), 48);
        assert_eq!(m.density(), Ratio::from_integer(1));
    }

    #[test]
    fn adjacent_blocks_merge_and_tail_is_cut() {
        let d = row(20, &[(7, 1), (8, 2), (19, 3)]);
        let m = SparsePackedMatrix::pack(&d, Alignment::A8).unwrap();
        assert_eq!(
            m.runs(),
            &[Run { row: 0, start: 0, len: 20 }]
        );
        let d = row(20, &[(1, 1), (19, 3)]);
        let m = SparsePackedMatrix::pack(&d, Alignment::A8).unwrap();
        assert_eq!(
            m.runs(),
            &[Run { row: 0, start: 0, len: 8 }, Run { row: 0, start: 16, len: 4 }]
        );
    }

    #[test]
    fn identity_like_run_scales_input() {
        // one row, one run over the first 8 columns, value 2 at column 5
        let d = row(16, &[(5, 2)]);
        let m = SparsePackedMatrix::pack(&d, Alignment::A8).unwrap();
        let x = TypedTensor::<i16>::from_vec((0..16).collect(), 0);
        let y = spmv_q(&m, &x, 0, ExecOptions::default()).unwrap();
        assert_eq!(y.data(), &[10]);
    }

    #[test]
    fn from_runs_rejects_bad_structure() {
        let bad = SparsePackedMatrix::<i16>::from_runs(1, 32, Alignment::A8, vec![Run { row: 0, start: 4, len: 8 }], vec![0; 8], 0);
        assert!(matches!(bad, Err(SparseError::Unaligned { .. })));
        let overlap = SparsePackedMatrix::<i16>::from_runs(
            1,
            32,
            Alignment::A8,
            vec![Run { row: 0, start: 0, len: 16 }, Run { row: 0, start: 8, len: 8 }],
            vec![0; 24],
            0,
        );
        assert!(matches!(overlap, Err(SparseError::BadRun { .. })));
        let count = SparsePackedMatrix::<i16>::from_runs(1, 32, Alignment::A8, vec![Run { row: 0, start: 0, len: 8 }], vec![0; 7], 0);
        assert!(matches!(count, Err(SparseError::ValueCount { .. })));
    }

    #[test]
    fn payload_round_trip() {
        let d = TypedTensor::<i16>::new(vec![2, 16], 9, (0..32).map(|i| if i % 5 == 0 { i as i16 } else { 0 }).collect()).unwrap();
        let m = AnySparse::I16(SparsePackedMatrix::pack(&d, Alignment::A8).unwrap());
        let bytes = m.to_bytes();
        let (back, used) = AnySparse::from_bytes(&bytes, ElementWidth::Int16).unwrap();
        assert_eq!(used, bytes.len());
        assert_eq!(back, m);
        assert_eq!(back.to_bytes(), bytes);
    }

    fn dense_strategy() -> impl Strategy<Value = (usize, usize, Vec<i16>, bool)> {
        (1usize..12, 1usize..40, any::<bool>()).prop_flat_map(|(r, c, a16)| {
            let cell = prop_oneof![3 => Just(0i16), 1 => any::<i16>().prop_map(|v| v.max(-32767))];
            (Just(r), Just(c), proptest::collection::vec(cell, r * c), Just(a16))
        })
    }

    proptest! {
        #[test]
        fn pack_is_lossless_and_aligned((r, c, data, a16) in dense_strategy()) {
            let align = if a16 { Alignment::A16 } else { Alignment::A8 };
            let d = TypedTensor::new(vec![r, c], 4, data).unwrap();
            let m = SparsePackedMatrix::pack(&d, align).unwrap();
            prop_assert_eq!(m.unpack(), d);
            for run in m.runs() {
                prop_assert_eq!(run.start as usize % align.value(), 0);
                prop_assert!(run.len as usize % align.value() == 0 || (run.start + run.len) as usize == c);
            }
            prop_assert!(m.mac_count() <= (r * c) as u64);
            prop_assert_eq!(m.density() * Ratio::from_integer(m.dense_mac_count()), Ratio::from_integer(m.mac_count()));
        }

        #[test]
        fn spmv_matches_dense_matmul(
            (r, c, data, a16) in dense_strategy(),
            xs in proptest::collection::vec(-32767i16..=32767, 40),
            qx in 0u32..16,
            qw in 0u32..16,
            qi_frac in 0u32..4,
        ) {
            let align = if a16 { Alignment::A16 } else { Alignment::A8 };
            let d = TypedTensor::new(vec![r, c], qw, data).unwrap();
            let m = SparsePackedMatrix::pack(&d, align).unwrap();
            let x = TypedTensor::from_vec(xs[..c].to_vec(), qx);
            let qi = qx.min(qi_frac);
            let wt = transpose(&d, &[1, 0]).unwrap();
            let dense = matmul_q(&x, &wt, qi, ExecOptions::default()).unwrap();
            for simd in [false, true] {
                let sparse = spmv_q(&m, &x, qi, ExecOptions { simd }).unwrap();
                prop_assert_eq!(&sparse, &dense);
            }
        }
    }
}
