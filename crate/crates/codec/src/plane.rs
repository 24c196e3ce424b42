//! Single-component sample planes.

use std::path::Path;

use num_traits::{AsPrimitive, PrimInt};
use qnn_core::{Tensor, TensorI32};

use crate::error::CodecError;

/// Row-major `height x width` grid.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Plane<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

impl<T: Copy> Plane<T> {
    pub fn new(width: usize, height: usize, data: Vec<T>) -> Result<Self, CodecError> {
        if data.len() != width * height {
            return Err(CodecError::ShapeMismatch { expected: width * height, actual: data.len() });
        }
        Ok(Plane { width, height, data })
    }

    pub fn filled(width: usize, height: usize, v: T) -> Self {
        Plane { width, height, data: vec![v; width * height] }
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> T) -> Self {
        let data = (0..height).flat_map(|y| (0..width).map(move |x| (x, y))).map(|(x, y)| f(x, y)).collect();
        Plane { width, height, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// `(width, height)`.
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> T {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: T) {
        self.data[y * self.width + x] = v;
    }

    /// Sample at `(x, y)` with coordinates clamped into the plane.
    pub fn get_clamped(&self, x: isize, y: isize) -> T {
        let cx = x.clamp(0, self.width as isize - 1) as usize;
        let cy = y.clamp(0, self.height as isize - 1) as usize;
        self.get(cx, cy)
    }

    pub fn row(&self, y: usize) -> &[T] {
        &self.data[y * self.width..(y + 1) * self.width]
    }

    pub fn map<U: Copy>(&self, f: impl Fn(T) -> U) -> Plane<U> {
        Plane { width: self.width, height: self.height, data: self.data.iter().map(|&v| f(v)).collect() }
    }

    pub fn crop(&self, x: usize, y: usize, width: usize, height: usize) -> Plane<T> {
        Plane::from_fn(width, height, |cx, cy| self.get(x + cx, y + cy))
    }

    /// Writes `src` with its top-left corner at `(x, y)`, cut at the edges.
    pub fn paste(&mut self, x: usize, y: usize, src: &Plane<T>) {
        for sy in 0..src.height.min(self.height.saturating_sub(y)) {
            for sx in 0..src.width.min(self.width.saturating_sub(x)) {
                self.set(x + sx, y + sy, src.get(sx, sy));
            }
        }
    }

    pub fn same_dims<U>(&self, other: &Plane<U>) -> Result<(), CodecError> {
        if (self.width, self.height) != (other.width, other.height) {
            return Err(CodecError::PlaneDims { expected: self.dims(), found: (other.width, other.height) });
        }
        Ok(())
    }
}

impl<T: PrimInt + AsPrimitive<i64>> Plane<T> {
    /// `[height, width]` int32 tensor with `q = 0`.
    pub fn to_tensor(&self) -> Tensor {
        let data = self.data.iter().map(|&v| v.as_() as i32).collect();
        TensorI32::new(vec![self.height, self.width], 0, data).expect("dims match").into()
    }

    /// Accepts integer tensors shaped `[h, w]` or `[h, w, 1]` with `q = 0`.
    pub fn from_tensor(t: &Tensor) -> Result<Self, CodecError> {
        if !t.width().is_integer() || t.q() != 0 {
            return Err(CodecError::ModelLayout(format!("plane tensors are integer with q = 0, got {} q={}", t.width(), t.q())));
        }
        let (h, w) = match *t.dims() {
            [h, w] | [h, w, 1] => (h, w),
            ref d => return Err(CodecError::ModelLayout(format!("plane tensor dims {d:?}"))),
        };
        let data = t
            .to_i64_vec()
            .into_iter()
            .map(|v| T::from(v).ok_or(CodecError::SampleRange { value: v, bits: (8 * std::mem::size_of::<T>()) as u32 }))
            .collect::<Result<Vec<T>, _>>()?;
        Plane::new(w, h, data)
    }
}

impl Plane<u16> {
    /// Reads a PGM. Samples keep their stored values whatever the maxval.
    pub fn read_pgm(path: impl AsRef<Path>) -> Result<Self, CodecError> {
        let img_err = |e: image::ImageError| CodecError::Image(e.to_string());
        let file = std::fs::File::open(path.as_ref()).map_err(|e| CodecError::Image(e.to_string()))?;
        let decoder = image::codecs::pnm::PnmDecoder::new(std::io::BufReader::new(file)).map_err(img_err)?;
        let maxval = decoder.header().maximal_sample() as u64;
        // the decoder stretches samples to the full 16-bit range
        let luma = image::DynamicImage::from_decoder(decoder).map_err(img_err)?.into_luma16();
        let (w, h) = luma.dimensions();
        let data = luma.into_raw().into_iter().map(|v| ((v as u64 * maxval + 32767) / 65535) as u16).collect();
        Plane::new(w as usize, h as usize, data)
    }

    /// Writes a 16-bit binary PGM holding the raw sample values.
    pub fn write_pgm(&self, path: impl AsRef<Path>) -> Result<(), CodecError> {
        let buf = image::ImageBuffer::<image::Luma<u16>, _>::from_raw(self.width as u32, self.height as u32, self.data.clone())
            .expect("dims match");
        buf.save_with_format(path, image::ImageFormat::Pnm).map_err(|e| CodecError::Image(e.to_string()))
    }

    /// Checks that every sample fits `bits`.
    pub fn check_bit_depth(&self, bits: u32) -> Result<(), CodecError> {
        let max = (1u32 << bits) - 1;
        match self.data.iter().find(|&&v| v as u32 > max) {
            Some(&v) => Err(CodecError::SampleRange { value: v as i64, bits }),
            None => Ok(()),
        }
    }
}

/// Clamps `v` to `[0, 2^bits - 1]`.
pub fn clamp_sample(v: i64, bits: u32) -> u16 {
    v.clamp(0, (1i64 << bits) - 1) as u16
}
