//! Least-squares residual scaling between the NN-filtered and deblocked
//! reconstructions.

use num_rational::Ratio;

use crate::error::CodecError;
use crate::plane::clamp_sample;
use crate::SamplePlane;

/// Scale factors are signaled in steps of `1 / SCALE_STEPS`.
pub const SCALE_STEPS: i64 = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Scale {
    /// Exact least-squares factor.
    pub omega: Ratio<i64>,
    /// `omega` rounded to the signaling grid, halves away from zero.
    pub steps: i32,
    /// The NN and deblocked planes coincide; `omega` is then 0.
    pub degenerate: bool,
}

impl Scale {
    pub fn signaled(&self) -> Ratio<i64> {
        Ratio::new(self.steps as i64, SCALE_STEPS)
    }
}

/// Factor minimizing `|orig - (w (nn - db) + db)|^2` over real `w`:
/// `sum (orig - db)(nn - db) / sum (nn - db)^2`.
pub fn derive_scale(orig: &SamplePlane, nn: &SamplePlane, db: &SamplePlane) -> Result<Scale, CodecError> {
    orig.same_dims(nn)?;
    orig.same_dims(db)?;
    let (mut num, mut den) = (0i64, 0i64);
    for ((&o, &n), &d) in orig.data().iter().zip(nn.data()).zip(db.data()) {
        let r = n as i64 - d as i64;
        num += (o as i64 - d as i64) * r;
        den += r * r;
    }
    if den == 0 {
        return Ok(Scale { omega: Ratio::from_integer(0), steps: 0, degenerate: true });
    }
    let omega = Ratio::new(num, den);
    let steps = (omega * SCALE_STEPS).round().to_integer() as i32;
    Ok(Scale { omega, steps, degenerate: false })
}

/// `db + round(steps / 64 * (nn - db))`, clamped to the sample range.
pub fn apply_scale(nn: &SamplePlane, db: &SamplePlane, steps: i32, bit_depth: u32) -> Result<SamplePlane, CodecError> {
    nn.same_dims(db)?;
    let half = SCALE_STEPS / 2;
    let data = nn
        .data()
        .iter()
        .zip(db.data())
        .map(|(&n, &d)| {
            let r = n as i64 - d as i64;
            clamp_sample(d as i64 + ((steps as i64 * r + half) >> 6), bit_depth)
        })
        .collect();
    SamplePlane::new(nn.width(), nn.height(), data)
}

/// `w (nn - db) + db`.
pub fn scaled_residual(nn: i64, db: i64, w: Ratio<i64>) -> Ratio<i64> {
    w * (nn - db) + db
}

/// `w nn + (1 - w) db`.
pub fn convex_combination(nn: i64, db: i64, w: Ratio<i64>) -> Ratio<i64> {
    w * nn + (Ratio::from_integer(1) - w) * db
}

/// Sum of squared differences.
pub fn sse(a: &SamplePlane, b: &SamplePlane) -> u64 {
    a.data().iter().zip(b.data()).map(|(&x, &y)| (x as i64 - y as i64).pow(2) as u64).sum()
}
