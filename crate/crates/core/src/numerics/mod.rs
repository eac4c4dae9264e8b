//! Fixed-point complex arithmetic.
//!
//! All bit-true arithmetic in the crate goes through the primitives defined
//! here. Values are two's-complement mantissas interpreted against a
//! [`FixedFormat`]; rounding is round-to-nearest-even and overflow saturates.
//! Every saturation is counted in a [`SatCounter`] supplied by the caller.

mod block;
mod linalg;
mod lut;

pub use block::{AccMatrix, FxMatrix, FxReal};
pub use linalg::{matmul_exact, matmul_herm_exact, matmul_ref, outer_conj_exact, CMatrix};
pub(crate) use linalg::widen;
pub use lut::{InvSqrtLut, TOL_LUT};

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Signed two's-complement fixed-point format `Q(total_bits, frac_bits)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "(u32, u32)", into = "(u32, u32)")]
pub struct FixedFormat {
    total_bits: u32,
    frac_bits: u32,
}

impl FixedFormat {
    pub const MIN_BITS: u32 = 4;
    pub const MAX_BITS: u32 = 48;

    pub fn new(total_bits: u32, frac_bits: u32) -> Result<Self> {
        if !(Self::MIN_BITS..=Self::MAX_BITS).contains(&total_bits) || frac_bits >= total_bits {
            return Err(Error::Format {
                total: total_bits,
                frac: frac_bits,
            });
        }
        Ok(Self {
            total_bits,
            frac_bits,
        })
    }

    /// Const constructor for compile-time formats; panics on an invalid pair.
    pub const fn q(total_bits: u32, frac_bits: u32) -> Self {
        assert!(total_bits >= Self::MIN_BITS && total_bits <= Self::MAX_BITS);
        assert!(frac_bits < total_bits);
        Self {
            total_bits,
            frac_bits,
        }
    }

    pub fn total_bits(self) -> u32 {
        self.total_bits
    }

    pub fn frac_bits(self) -> u32 {
        self.frac_bits
    }

    pub fn max_mantissa(self) -> i64 {
        (1i64 << (self.total_bits - 1)) - 1
    }

    pub fn min_mantissa(self) -> i64 {
        -(1i64 << (self.total_bits - 1))
    }

    /// Quantization step, `2^-frac_bits`.
    pub fn step(self) -> f64 {
        pow2(-(self.frac_bits as i32))
    }

    pub fn max_value(self) -> f64 {
        self.max_mantissa() as f64 * self.step()
    }

    pub fn min_value(self) -> f64 {
        self.min_mantissa() as f64 * self.step()
    }

    /// Clamps a wide mantissa into range, reporting whether it saturated.
    pub fn saturate(self, m: i128) -> (i64, bool) {
        let hi = self.max_mantissa() as i128;
        let lo = self.min_mantissa() as i128;
        if m > hi {
            (hi as i64, true)
        } else if m < lo {
            (lo as i64, true)
        } else {
            (m as i64, false)
        }
    }
}

impl TryFrom<(u32, u32)> for FixedFormat {
    type Error = Error;
    fn try_from((t, f): (u32, u32)) -> Result<Self> {
        Self::new(t, f)
    }
}

impl From<FixedFormat> for (u32, u32) {
    fn from(f: FixedFormat) -> Self {
        (f.total_bits, f.frac_bits)
    }
}

impl std::fmt::Display for FixedFormat {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Q({},{})", self.total_bits, self.frac_bits)
    }
}

/// Running count of saturation events.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct SatCounter(pub u64);

impl SatCounter {
    pub fn hit(&mut self, saturated: bool) {
        self.0 += saturated as u64;
    }

    pub fn count(self) -> u64 {
        self.0
    }
}

/// Exact `2^e` as `f64` for the exponents used here.
pub fn pow2(e: i32) -> f64 {
    f64::powi(2.0, e)
}

/// Shifts `v` right by `shift` bits with round-half-to-even; a negative
/// shift is an exact left shift.
pub fn shift_round(v: i128, shift: i32) -> i128 {
    if shift <= 0 {
        return v << (-shift) as u32;
    }
    if shift >= 127 {
        return 0;
    }
    let s = shift as u32;
    let q = v >> s;
    let rem = v - (q << s);
    let half = 1i128 << (s - 1);
    if rem > half || (rem == half && (q & 1) == 1) {
        q + 1
    } else {
        q
    }
}

/// Real fixed-point scalar: mantissa plus format.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Fx {
    pub mant: i64,
    pub fmt: FixedFormat,
}

impl Fx {
    pub fn to_f64(self) -> f64 {
        self.mant as f64 * self.fmt.step()
    }
}

/// Round-to-nearest-even quantization of `x` into `fmt`, saturating.
///
/// NaN maps to zero and counts as a saturation event.
pub fn quantize(x: f64, fmt: FixedFormat, sat: &mut SatCounter) -> Fx {
    let (mant, s) = quantize_mantissa(x, fmt.frac_bits as i32, fmt);
    sat.hit(s);
    Fx { mant, fmt }
}

/// Quantizes `x` onto the grid `2^-frac` and saturates to `fmt`'s mantissa range.
pub fn quantize_mantissa(x: f64, frac: i32, fmt: FixedFormat) -> (i64, bool) {
    if x.is_nan() {
        return (0, true);
    }
    let scaled = (x * pow2(frac)).round_ties_even();
    let hi = fmt.max_mantissa() as f64;
    let lo = fmt.min_mantissa() as f64;
    if scaled > hi {
        (fmt.max_mantissa(), true)
    } else if scaled < lo {
        (fmt.min_mantissa(), true)
    } else {
        (scaled as i64, false)
    }
}

/// Complex fixed-point sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CFx {
    pub re: i64,
    pub im: i64,
    pub fmt: FixedFormat,
}

impl CFx {
    pub fn zero(fmt: FixedFormat) -> Self {
        Self { re: 0, im: 0, fmt }
    }

    pub fn quantize(z: crate::C64, fmt: FixedFormat, sat: &mut SatCounter) -> Self {
        let re = quantize(z.re, fmt, sat).mant;
        let im = quantize(z.im, fmt, sat).mant;
        Self { re, im, fmt }
    }

    pub fn to_c64(self) -> crate::C64 {
        let s = self.fmt.step();
        crate::C64::new(self.re as f64 * s, self.im as f64 * s)
    }

    pub fn mant(self) -> Complex<i64> {
        Complex::new(self.re, self.im)
    }
}

/// `acc + a·b`: the product is formed at full precision, rounded onto the
/// accumulator grid and the sum saturated into the accumulator format.
pub fn cmac(acc: CFx, a: CFx, b: CFx, sat: &mut SatCounter) -> CFx {
    let (ar, ai) = (a.re as i128, a.im as i128);
    let (br, bi) = (b.re as i128, b.im as i128);
    let pr = ar * br - ai * bi;
    let pi = ar * bi + ai * br;
    let shift = (a.fmt.frac_bits + b.fmt.frac_bits) as i32 - acc.fmt.frac_bits as i32;
    let (re, s1) = acc.fmt.saturate(acc.re as i128 + shift_round(pr, shift));
    let (im, s2) = acc.fmt.saturate(acc.im as i128 + shift_round(pi, shift));
    sat.hit(s1);
    sat.hit(s2);
    CFx {
        re,
        im,
        fmt: acc.fmt,
    }
}
