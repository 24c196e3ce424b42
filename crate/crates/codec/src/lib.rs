//! Neural intra prediction and neural in-loop filter control.
//!
//! Both pipelines run models through [`qnn_core`] and never depend on
//! trained weights: any graph with the documented input and output layout
//! plugs in. [`intra`] covers context extraction, the per-shape context
//! transformations, pre/postprocessing, side outputs and signaling.
//! [`filter`] covers input-plane assembly, patch inference, least-squares
//! residual scaling and the rate-distortion parameter selection.

pub mod error;
pub mod filter;
pub mod intra;
pub mod plane;

pub use error::CodecError;
pub use plane::Plane;

/// Sample planes as decoded by the codec (bit depth up to 16).
pub type SamplePlane = Plane<u16>;

/// Internal bit depth used when none is given.
pub const DEFAULT_BIT_DEPTH: u32 = 10;

/// Rounds `num / den` to the nearest integer, halves away from zero.
pub(crate) fn div_round(num: i64, den: i64) -> i64 {
    debug_assert!(den > 0);
    let half = den / 2;
    if num >= 0 {
        (num + half) / den
    } else {
        -((-num + half) / den)
    }
}

/// `v * 2^-k` rounded to nearest, halves up; `k` may be negative.
pub(crate) fn shift_round(v: i64, k: i32) -> i64 {
    if k <= 0 {
        v << (-k)
    } else {
        (v + (1i64 << (k - 1))) >> k
    }
}
