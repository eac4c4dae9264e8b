//! Table-based inverse square root.
//!
//! The argument is range-reduced by powers of four onto `[1, 4)`, which is
//! exact in binary. The reduced mantissa indexes a 256-segment table (128
//! uniform segments on `[1, 2)` and 128 on `[2, 4)`) and the result is
//! linearly interpolated between knots.

use super::{shift_round, FixedFormat, FxReal};
use crate::{Error, Result};

/// Relative error bound of [`InvSqrtLut`].
pub const TOL_LUT: f64 = 1.0 / 1024.0;

const SEGMENTS_PER_OCTAVE: usize = 128;
const INDEX_BITS: u32 = 7;
/// Fraction bits kept of the normalized mantissa.
const MANT_FRAC: u32 = 32;

#[derive(Debug, Clone)]
pub struct InvSqrtLut {
    fmt: FixedFormat,
    knots: Vec<i64>,
}

impl InvSqrtLut {
    /// Table with knot values quantized to `fmt` (the extended-precision
    /// format).
    pub fn new(fmt: FixedFormat) -> Self {
        let mut knots = Vec::with_capacity(2 * SEGMENTS_PER_OCTAVE + 1);
        let step = fmt.frac_bits() as i32;
        let q = |x: f64| (x.powf(-0.5) * super::pow2(step)).round_ties_even() as i64;
        for i in 0..SEGMENTS_PER_OCTAVE {
            knots.push(q(1.0 + i as f64 / SEGMENTS_PER_OCTAVE as f64));
        }
        for i in 0..=SEGMENTS_PER_OCTAVE {
            knots.push(q(2.0 + 2.0 * i as f64 / SEGMENTS_PER_OCTAVE as f64));
        }
        Self { fmt, knots }
    }

    pub fn fmt(&self) -> FixedFormat {
        self.fmt
    }

    /// Number of table segments.
    pub fn segments(&self) -> usize {
        self.knots.len() - 1
    }

    /// `1/√x` for the exact value `x = mant · 2^lsb`.
    pub fn eval_exact(&self, mant: i128, lsb: i32) -> Result<FxReal> {
        if mant == 0 {
            return Err(Error::DegenerateNorm);
        }
        if mant < 0 {
            return Err(Error::Config("inverse square root of a negative value".into()));
        }
        let n = 127 - mant.leading_zeros() as i32; // mant in [2^n, 2^(n+1))
        // Normalized mantissa with MANT_FRAC fraction bits, truncated.
        let shift = n - MANT_FRAC as i32;
        let mn = if shift >= 0 { mant >> shift } else { mant << -shift } as u64;
        let frac = mn - (1u64 << MANT_FRAC);
        let total = n + lsb;
        let (idx, phi, phi_bits, q) = if total.rem_euclid(2) == 0 {
            // reduced mantissa in [1, 2)
            let b = MANT_FRAC - INDEX_BITS;
            ((frac >> b) as usize, frac & ((1 << b) - 1), b, total.div_euclid(2))
        } else {
            // reduced mantissa in [2, 4): (m - 2) / 2 == frac
            let b = MANT_FRAC - INDEX_BITS;
            (
                SEGMENTS_PER_OCTAVE + (frac >> b) as usize,
                frac & ((1 << b) - 1),
                b,
                (total - 1).div_euclid(2),
            )
        };
        let y0 = self.knots[idx] as i128;
        let y1 = self.knots[idx + 1] as i128;
        let y = y0 + shift_round((y1 - y0) * phi as i128, phi_bits as i32);
        // value = y · 2^(-frac_bits) · 2^(-q)
        Ok(FxReal {
            mant: y as i64,
            fmt: self.fmt,
            exp: -q,
        })
    }

    pub fn eval(&self, x: FxReal) -> Result<FxReal> {
        self.eval_exact(x.mant as i128, x.lsb())
    }

    /// `1/x` refined to roughly `fmt_wide` precision: the table seed for
    /// `1/√x` is improved by two Newton steps `y ← y(3 − x·y²)/2`, then
    /// squared.
    pub fn reciprocal_refined(&self, mant: i128, lsb: i32, fmt_wide: FixedFormat) -> Result<FxReal> {
        // Normalize x to a 31-bit mantissa so the products stay within i128.
        let n = 127 - mant.max(1).leading_zeros() as i32;
        let shift = n - 30;
        let xm = shift_round(mant, shift);
        let xl = lsb + shift;
        let seed = self.eval_exact(xm, xl)?;
        let f = fmt_wide.frac_bits() as i32;
        let q = -seed.exp;
        let mut y = shift_round(seed.mant as i128, self.fmt.frac_bits() as i32 - f);
        // x' = x·2^(-2q) lies in [1, 4); y tracks 1/√x' in units 2^-f.
        for _ in 0..2 {
            let y2 = shift_round(y * y, f);
            let t = shift_round(xm * y2, 2 * q - xl); // x'·y², units 2^-f
            let three = 3i128 << f;
            y = shift_round(y * (three - t), f + 1);
        }
        let c = shift_round(y * y, f); // 1/x', so 1/x = c · 2^-(f + 2q)
        let mut sat = super::SatCounter::default();
        Ok(FxReal::normalize(c, -(f + 2 * q), fmt_wide, 1, &mut sat))
    }
}
