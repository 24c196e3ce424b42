//! Tensors with a power-of-two quantizer.
//!
//! A stored integer `x` with quantizer `q` represents the real value
//! `x / 2^q`. Float tensors carry `q = 0` and ignore it.

use crate::error::TensorError;
use crate::scalar::{Element, QInt};

/// Element storage width of a tensor or of a whole graph.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ElementWidth {
    Float32,
    Int32,
    Int16,
    Int8,
}

impl ElementWidth {
    /// Code used by the STN1 and SMF1 file formats.
    pub fn code(self) -> u8 {
        match self {
            ElementWidth::Float32 => 0,
            ElementWidth::Int32 => 1,
            ElementWidth::Int16 => 2,
            ElementWidth::Int8 => 3,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Some(match code {
            0 => ElementWidth::Float32,
            1 => ElementWidth::Int32,
            2 => ElementWidth::Int16,
            3 => ElementWidth::Int8,
            _ => return None,
        })
    }

    pub fn bits(self) -> u32 {
        match self {
            ElementWidth::Float32 | ElementWidth::Int32 => 32,
            ElementWidth::Int16 => 16,
            ElementWidth::Int8 => 8,
        }
    }

    pub fn byte_size(self) -> usize {
        self.bits() as usize / 8
    }

    pub fn is_integer(self) -> bool {
        self != ElementWidth::Float32
    }

    /// Nominal double-width type for intermediate sums.
    pub fn accumulator(self) -> Option<ElementWidth> {
        match self {
            ElementWidth::Float32 => None,
            ElementWidth::Int8 => Some(ElementWidth::Int16),
            ElementWidth::Int16 => Some(ElementWidth::Int32),
            // int64 has no tensor representation; report the width itself.
            ElementWidth::Int32 => Some(ElementWidth::Int32),
        }
    }

    /// Largest representable magnitude, `2^(w-1) - 1`.
    pub fn max_value(self) -> i64 {
        match self {
            ElementWidth::Float32 => i64::MAX,
            w => (1i64 << (w.bits() - 1)) - 1,
        }
    }

    /// Parses `16`, `int16`, `i16`, `f32`, `float` and friends.
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s.to_ascii_lowercase().as_str() {
            "8" | "i8" | "int8" => ElementWidth::Int8,
            "16" | "i16" | "int16" => ElementWidth::Int16,
            "32" | "i32" | "int32" => ElementWidth::Int32,
            "f32" | "float" | "float32" => ElementWidth::Float32,
            _ => return None,
        })
    }
}

impl std::fmt::Display for ElementWidth {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ElementWidth::Float32 => "float32",
            ElementWidth::Int32 => "int32",
            ElementWidth::Int16 => "int16",
            ElementWidth::Int8 => "int8",
        })
    }
}

/// `C(x)`: symmetric saturation to `[-2^(w-1)+1, 2^(w-1)-1]`.
///
/// Float32 has no clipping and returns `x` unchanged.
pub fn clip(x: i128, width: ElementWidth) -> i128 {
    if !width.is_integer() {
        return x;
    }
    let hi = width.max_value() as i128;
    x.clamp(-hi, hi)
}

/// Round-half-to-even of `v * 2^q`, then `C(.)`.
pub fn quantize_float(v: f64, q: u32, width: ElementWidth) -> i64 {
    let scaled = v * (q as f64).exp2();
    let hi = width.max_value() as f64;
    if !scaled.is_finite() {
        return if scaled > 0.0 { width.max_value() } else { -width.max_value() };
    }
    let r = scaled.round_ties_even();
    if r >= hi {
        width.max_value()
    } else if r <= -hi {
        -width.max_value()
    } else {
        r as i64
    }
}

/// Dense row-major tensor of a concrete element type.
#[derive(Clone, Debug, PartialEq)]
pub struct TypedTensor<T> {
    dims: Vec<usize>,
    q: u32,
    data: Vec<T>,
}

impl<T: Copy + Default> TypedTensor<T> {
    pub fn new(dims: Vec<usize>, q: u32, data: Vec<T>) -> Result<Self, TensorError> {
        let expected = element_count(&dims)?;
        if expected != data.len() {
            return Err(TensorError::PayloadLength {
                expected,
                actual: data.len(),
            });
        }
        Ok(TypedTensor { dims, q, data })
    }

    pub fn zeros(dims: Vec<usize>, q: u32) -> Self {
        let n = dims.iter().product();
        TypedTensor {
            dims,
            q,
            data: vec![T::default(); n],
        }
    }

    pub fn from_vec(data: Vec<T>, q: u32) -> Self {
        TypedTensor {
            dims: vec![data.len()],
            q,
            data,
        }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn q(&self) -> u32 {
        self.q
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn with_q(mut self, q: u32) -> Self {
        self.q = q;
        self
    }

    pub fn reshaped(mut self, dims: Vec<usize>) -> Result<Self, TensorError> {
        let n = element_count(&dims)?;
        if n != self.data.len() {
            return Err(TensorError::PayloadLength {
                expected: n,
                actual: self.data.len(),
            });
        }
        self.dims = dims;
        Ok(self)
    }
}

impl<T: QInt> TypedTensor<T> {
    /// Quantizes a float slice with round-half-to-even and saturation.
    pub fn quantize(dims: Vec<usize>, values: &[f32], q: u32) -> Result<Self, TensorError> {
        let data = values
            .iter()
            .map(|&v| T::from_i64_saturating(quantize_float(v as f64, q, <T as Element>::WIDTH)))
            .collect();
        Self::new(dims, q, data)
    }

    /// `f(x, q) = x / 2^q` elementwise.
    pub fn dequantize(&self) -> TypedTensor<f32> {
        let scale = (self.q as f64).exp2();
        TypedTensor {
            dims: self.dims.clone(),
            q: 0,
            data: self
                .data
                .iter()
                .map(|&x| (crate::scalar::as_f64(x) / scale) as f32)
                .collect(),
        }
    }
}

fn element_count(dims: &[usize]) -> Result<usize, TensorError> {
    if dims.iter().any(|&d| d == 0) {
        return Err(TensorError::ZeroExtent(dims.to_vec()));
    }
    dims.iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or(TensorError::TooLarge)
}

/// A tensor of any supported element width.
#[derive(Clone, Debug, PartialEq)]
pub enum Tensor {
    F32(TypedTensor<f32>),
    I32(TypedTensor<i32>),
    I16(TypedTensor<i16>),
    I8(TypedTensor<i8>),
}

/// Runs `$body` with `$t` bound to the typed tensor inside a [`Tensor`].
#[macro_export]
macro_rules! with_tensor {
    ($tensor:expr, $t:ident => $body:expr) => {
        match $tensor {
            $crate::tensor::Tensor::F32($t) => $body,
            $crate::tensor::Tensor::I32($t) => $body,
            $crate::tensor::Tensor::I16($t) => $body,
            $crate::tensor::Tensor::I8($t) => $body,
        }
    };
}

impl Tensor {
    pub fn width(&self) -> ElementWidth {
        match self {
            Tensor::F32(_) => ElementWidth::Float32,
            Tensor::I32(_) => ElementWidth::Int32,
            Tensor::I16(_) => ElementWidth::Int16,
            Tensor::I8(_) => ElementWidth::Int8,
        }
    }

    pub fn dims(&self) -> &[usize] {
        with_tensor!(self, t => t.dims())
    }

    pub fn q(&self) -> u32 {
        with_tensor!(self, t => t.q())
    }

    pub fn len(&self) -> usize {
        with_tensor!(self, t => t.len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn typed<T: Element>(&self) -> Option<&TypedTensor<T>> {
        T::view(self)
    }

    /// Real values as `f64` (`x / 2^q` for integer tensors).
    pub fn to_f64_vec(&self) -> Vec<f64> {
        let scale = match self {
            Tensor::F32(_) => 1.0,
            other => (other.q() as f64).exp2(),
        };
        with_tensor!(self, t => t.data().iter().map(|&v| v.to_f64() / scale).collect())
    }

    /// Raw stored values widened to `i64` (floats are truncated).
    pub fn to_i64_vec(&self) -> Vec<i64> {
        match self {
            Tensor::F32(t) => t.data().iter().map(|&v| v as i64).collect(),
            Tensor::I32(t) => t.data().iter().map(|&v| v as i64).collect(),
            Tensor::I16(t) => t.data().iter().map(|&v| v as i64).collect(),
            Tensor::I8(t) => t.data().iter().map(|&v| v as i64).collect(),
        }
    }

    /// Elementwise dequantization; float tensors are returned as-is.
    pub fn dequantize(&self) -> TypedTensor<f32> {
        match self {
            Tensor::F32(t) => t.clone(),
            Tensor::I32(t) => t.dequantize(),
            Tensor::I16(t) => t.dequantize(),
            Tensor::I8(t) => t.dequantize(),
        }
    }

    /// Quantizes float values into a tensor of `width`.
    pub fn quantize(
        dims: Vec<usize>,
        values: &[f32],
        q: u32,
        width: ElementWidth,
    ) -> Result<Tensor, TensorError> {
        Ok(match width {
            ElementWidth::Float32 => Tensor::F32(TypedTensor::new(dims, 0, values.to_vec())?),
            ElementWidth::Int32 => Tensor::I32(TypedTensor::quantize(dims, values, q)?),
            ElementWidth::Int16 => Tensor::I16(TypedTensor::quantize(dims, values, q)?),
            ElementWidth::Int8 => Tensor::I8(TypedTensor::quantize(dims, values, q)?),
        })
    }

    /// Builds an integer tensor from raw values, saturating with `C(.)`.
    pub fn from_raw(
        dims: Vec<usize>,
        values: &[i64],
        q: u32,
        width: ElementWidth,
    ) -> Result<Tensor, TensorError> {
        fn build<T: Element>(dims: Vec<usize>, values: &[i64], q: u32) -> Result<Tensor, TensorError> {
            let data = values.iter().map(|&v| T::from_i64_saturating(v)).collect();
            Ok(T::wrap(TypedTensor::new(dims, q, data)?))
        }
        match width {
            ElementWidth::Float32 => build::<f32>(dims, values, 0),
            ElementWidth::Int32 => build::<i32>(dims, values, q),
            ElementWidth::Int16 => build::<i16>(dims, values, q),
            ElementWidth::Int8 => build::<i8>(dims, values, q),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.to_f64_vec().iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// STN1 encoding: magic, width code, signed q, rank, u32 extents, payload.
    pub fn to_stn1(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 + 4 * self.dims().len() + self.len() * 4);
        out.extend_from_slice(b"STN1");
        out.push(self.width().code());
        out.push(self.q() as i8 as u8);
        out.push(self.dims().len() as u8);
        for &d in self.dims() {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        with_tensor!(self, t => {
            for &v in t.data() {
                v.write_le(&mut out);
            }
        });
        out
    }

    /// Decodes one STN1 blob and returns it with the number of bytes consumed.
    pub fn from_stn1_prefix(bytes: &[u8]) -> Result<(Tensor, usize), TensorError> {
        let header = bytes.get(..7).ok_or(TensorError::Truncated { offset: 0 })?;
        if &header[..4] != b"STN1" {
            return Err(TensorError::BadMagic);
        }
        let width = ElementWidth::from_code(header[4]).ok_or(TensorError::BadWidth(header[4]))?;
        let q = header[5] as i8;
        if q < 0 {
            return Err(TensorError::NegativeQuantizer(q));
        }
        let rank = header[6] as usize;
        let mut pos = 7;
        let mut dims = Vec::with_capacity(rank);
        for _ in 0..rank {
            let b = bytes
                .get(pos..pos + 4)
                .ok_or(TensorError::Truncated { offset: pos })?;
            dims.push(u32::from_le_bytes(b.try_into().unwrap()) as usize);
            pos += 4;
        }
        let n = element_count(&dims)?;
        let size = width.byte_size();
        let end = n
            .checked_mul(size)
            .and_then(|b| b.checked_add(pos))
            .ok_or(TensorError::TooLarge)?;
        let payload = bytes
            .get(pos..end)
            .ok_or(TensorError::Truncated { offset: bytes.len() })?;
        fn decode<T: Element>(dims: Vec<usize>, q: u32, payload: &[u8]) -> Result<Tensor, TensorError> {
            let size = std::mem::size_of::<T>();
            let data = payload.chunks_exact(size).map(T::read_le).collect();
            Ok(T::wrap(TypedTensor::new(dims, q, data)?))
        }
        let q = q as u32;
        let t = match width {
            ElementWidth::Float32 => decode::<f32>(dims, 0, payload)?,
            ElementWidth::Int32 => decode::<i32>(dims, q, payload)?,
            ElementWidth::Int16 => decode::<i16>(dims, q, payload)?,
            ElementWidth::Int8 => decode::<i8>(dims, q, payload)?,
        };
        Ok((t, end))
    }

    /// Decodes a whole STN1 file; trailing bytes are an error.
    pub fn from_stn1(bytes: &[u8]) -> Result<Tensor, TensorError> {
        let (t, used) = Self::from_stn1_prefix(bytes)?;
        if used != bytes.len() {
            return Err(TensorError::TrailingBytes(bytes.len() - used));
        }
        Ok(t)
    }
}

impl<T: Element> From<TypedTensor<T>> for Tensor {
    fn from(t: TypedTensor<T>) -> Self {
        T::wrap(t)
    }
}
