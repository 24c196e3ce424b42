//! Scalar traits the kernels are generic over.
//!
//! Integer kernels are written once against [`QInt`], which pairs a storage
//! type with the wide accumulator used for sums of products. Float kernels
//! are written against [`Real`] so that the same reference code runs in
//! `f32` (the model format) and `f64` (test oracles).

use std::fmt::{Debug, Display};
use std::ops::AddAssign;

use num_traits::{Float, FromPrimitive, NumCast, PrimInt, Signed, ToPrimitive, Zero};

use crate::tensor::{ElementWidth, Tensor, TypedTensor};

/// A value that can live inside a [`Tensor`].
pub trait Element: Copy + Default + Debug + PartialOrd + Send + Sync + 'static {
    const WIDTH: ElementWidth;

    fn wrap(t: TypedTensor<Self>) -> Tensor;
    fn view(t: &Tensor) -> Option<&TypedTensor<Self>>;

    fn write_le(self, out: &mut Vec<u8>);
    fn read_le(bytes: &[u8]) -> Self;

    /// Lossy conversion used by `Shape` nodes and test helpers.
    fn from_i64_saturating(v: i64) -> Self;
    fn to_f64(self) -> f64;
}

/// Signed fixed-point storage type.
///
/// `Acc` must hold any sum of products the kernels form without wrapping;
/// [`clip_acc`](QInt::clip_acc) is the symmetric saturation `C(x)`.
pub trait QInt: Element + PrimInt + Signed + Display {
    type Acc: PrimInt + Signed + AddAssign + Debug + From<Self>;

    /// `2^(w-1) - 1`
    fn qmax() -> Self {
        Self::max_value()
    }

    #[inline]
    fn widen(self) -> Self::Acc {
        <Self::Acc as From<Self>>::from(self)
    }

    /// `max(-2^(w-1)+1, min(2^(w-1)-1, x))`
    #[inline]
    fn clip_acc(acc: Self::Acc) -> Self {
        let hi = <Self::Acc as From<Self>>::from(Self::max_value());
        let v = if acc > hi {
            hi
        } else if acc < -hi {
            -hi
        } else {
            acc
        };
        <Self as NumCast>::from(v).expect("clipped value fits storage")
    }

    fn acc_bits() -> u32 {
        Self::Acc::zero().count_zeros()
    }

    /// Arithmetic (flooring) right shift of an accumulator. Shifts wider than
    /// the accumulator saturate to 0 / -1, which is still the floor.
    #[inline]
    fn shr_acc(acc: Self::Acc, s: u32) -> Self::Acc {
        let s = s.min(Self::acc_bits() - 1);
        acc >> s as usize
    }

    /// Left shift of a storage value followed by `C(.)`.
    fn shl_clip(x: Self, s: u32) -> Self {
        let storage_bits = Self::zero().count_zeros();
        if x.is_zero() {
            return x;
        }
        if s + storage_bits >= Self::acc_bits() {
            return if x > Self::zero() { Self::qmax() } else { -Self::qmax() };
        }
        Self::clip_acc(x.widen() << s as usize)
    }

    fn acc_to_i128(acc: Self::Acc) -> i128 {
        acc.to_i128().expect("accumulator fits i128")
    }
}

/// Floating-point scalar for the reference kernels.
pub trait Real: Float + FromPrimitive + Default + Debug + Send + Sync + 'static {}

impl Real for f32 {}
impl Real for f64 {}

macro_rules! impl_element {
    ($t:ty, $width:ident, $variant:ident) => {
        impl Element for $t {
            const WIDTH: ElementWidth = ElementWidth::$width;

            fn wrap(t: TypedTensor<Self>) -> Tensor {
                Tensor::$variant(t)
            }

            fn view(t: &Tensor) -> Option<&TypedTensor<Self>> {
                match t {
                    Tensor::$variant(inner) => Some(inner),
                    _ => None,
                }
            }

            fn write_le(self, out: &mut Vec<u8>) {
                out.extend_from_slice(&self.to_le_bytes());
            }

            fn read_le(bytes: &[u8]) -> Self {
                let mut buf = [0u8; std::mem::size_of::<$t>()];
                buf.copy_from_slice(&bytes[..std::mem::size_of::<$t>()]);
                <$t>::from_le_bytes(buf)
            }

            fn from_i64_saturating(v: i64) -> Self {
                impl_element!(@sat $t, v)
            }

            fn to_f64(self) -> f64 {
                self as f64
            }
        }
    };
    (@sat f32, $v:ident) => { $v as f32 };
    (@sat $t:ty, $v:ident) => {
        $v.clamp(-(<$t>::MAX as i64), <$t>::MAX as i64) as $t
    };
}

impl_element!(f32, Float32, F32);
impl_element!(i32, Int32, I32);
impl_element!(i16, Int16, I16);
impl_element!(i8, Int8, I8);

impl QInt for i8 {
    type Acc = i32;
}

impl QInt for i16 {
    type Acc = i64;
}

impl QInt for i32 {
    type Acc = i128;
}

/// Converts any primitive to `f64`; used by dequantization.
pub(crate) fn as_f64<T: ToPrimitive>(v: T) -> f64 {
    v.to_f64().unwrap_or(0.0)
}
