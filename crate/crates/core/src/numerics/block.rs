//! Block-floating-point matrices.
//!
//! A [`FxMatrix`] stores complex mantissas in one [`FixedFormat`] together
//! with a shared block exponent, so element `(i, j)` has the value
//! `mant · 2^(exp − frac_bits)`. The exponent is either fixed by the caller
//! (quantities with a known scale such as symbols or unit-norm vectors) or
//! chosen from the data by [`AccMatrix::normalize`], which models a
//! leading-zero detector on the accumulator outputs.
//!
//! [`AccMatrix`] holds exact sums of products on a single power-of-two grid.
//! Because accumulation is exact, any evaluation order yields identical
//! mantissas; rounding and saturation happen only when an accumulator is
//! written back into a narrower format.

use nalgebra::DMatrix;
use num_complex::Complex;

use super::{pow2, quantize_mantissa, shift_round, FixedFormat, SatCounter};
use crate::{CMat, Error, Result, C64};

/// Complex block-floating-point matrix, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FxMatrix {
    rows: usize,
    cols: usize,
    fmt: FixedFormat,
    exp: i32,
    data: Vec<Complex<i64>>,
}

impl FxMatrix {
    pub fn zeros(rows: usize, cols: usize, fmt: FixedFormat, exp: i32) -> Self {
        Self {
            rows,
            cols,
            fmt,
            exp,
            data: vec![Complex::new(0, 0); rows * cols],
        }
    }

    /// Builds a matrix from raw mantissas; they must already be in range.
    pub fn from_mantissas(
        rows: usize,
        cols: usize,
        fmt: FixedFormat,
        exp: i32,
        data: Vec<Complex<i64>>,
    ) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{} mantissas for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        let (lo, hi) = (fmt.min_mantissa(), fmt.max_mantissa());
        if data
            .iter()
            .any(|z| z.re < lo || z.re > hi || z.im < lo || z.im > hi)
        {
            return Err(Error::Config(format!("mantissa outside {fmt}")));
        }
        Ok(Self {
            rows,
            cols,
            fmt,
            exp,
            data,
        })
    }

    /// Quantizes with a caller-chosen block exponent (saturating).
    pub fn quantize_with_exp(m: &CMat, fmt: FixedFormat, exp: i32, sat: &mut SatCounter) -> Self {
        let frac = fmt.frac_bits() as i32 - exp;
        let mut data = Vec::with_capacity(m.len());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                let z = m[(i, j)];
                let (re, s1) = quantize_mantissa(z.re, frac, fmt);
                let (im, s2) = quantize_mantissa(z.im, frac, fmt);
                sat.hit(s1);
                sat.hit(s2);
                data.push(Complex::new(re, im));
            }
        }
        Self {
            rows: m.nrows(),
            cols: m.ncols(),
            fmt,
            exp,
            data,
        }
    }

    /// Quantizes with the block exponent chosen so the largest component
    /// keeps `headroom` spare integer bits.
    pub fn quantize_block(m: &CMat, fmt: FixedFormat, headroom: u32, sat: &mut SatCounter) -> Self {
        let max = m
            .iter()
            .map(|z| z.re.abs().max(z.im.abs()))
            .fold(0.0f64, f64::max);
        let exp = if max > 0.0 && max.is_finite() {
            let target = fmt.total_bits() as i32 - 1 - headroom as i32;
            // max < 2^(floor_log2 + 1)
            floor_log2(max) + 1 - target + fmt.frac_bits() as i32
        } else {
            0
        };
        Self::quantize_with_exp(m, fmt, exp, sat)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn fmt(&self) -> FixedFormat {
        self.fmt
    }

    pub fn exp(&self) -> i32 {
        self.exp
    }

    /// Power-of-two weight of one mantissa unit.
    pub fn lsb(&self) -> i32 {
        self.exp - self.fmt.frac_bits() as i32
    }

    pub fn get(&self, i: usize, j: usize) -> Complex<i64> {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: Complex<i64>) {
        self.data[i * self.cols + j] = v;
    }

    pub fn mantissas(&self) -> &[Complex<i64>] {
        &self.data
    }

    pub(crate) fn mantissas_mut(&mut self) -> &mut [Complex<i64>] {
        &mut self.data
    }

    pub fn value(&self, i: usize, j: usize) -> C64 {
        let s = pow2(self.lsb());
        let z = self.get(i, j);
        C64::new(z.re as f64 * s, z.im as f64 * s)
    }

    pub fn to_cmat(&self) -> CMat {
        DMatrix::from_fn(self.rows, self.cols, |i, j| self.value(i, j))
    }

    /// Column slice `[start, end)`.
    pub fn columns(&self, start: usize, end: usize) -> Self {
        let mut data = Vec::with_capacity(self.rows * (end - start));
        for i in 0..self.rows {
            data.extend_from_slice(&self.data[i * self.cols + start..i * self.cols + end]);
        }
        Self {
            rows: self.rows,
            cols: end - start,
            fmt: self.fmt,
            exp: self.exp,
            data,
        }
    }

    /// Row slice `[start, end)`.
    pub fn row_block(&self, start: usize, end: usize) -> Self {
        Self {
            rows: end - start,
            cols: self.cols,
            fmt: self.fmt,
            exp: self.exp,
            data: self.data[start * self.cols..end * self.cols].to_vec(),
        }
    }

    pub fn to_acc(&self) -> AccMatrix {
        AccMatrix {
            rows: self.rows,
            cols: self.cols,
            lsb: self.lsb(),
            data: self
                .data
                .iter()
                .map(|z| Complex::new(z.re as i128, z.im as i128))
                .collect(),
        }
    }
}

/// Exact accumulator matrix on the grid `2^lsb`, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AccMatrix {
    rows: usize,
    cols: usize,
    lsb: i32,
    data: Vec<Complex<i128>>,
}

impl AccMatrix {
    pub fn zeros(rows: usize, cols: usize, lsb: i32) -> Self {
        Self {
            rows,
            cols,
            lsb,
            data: vec![Complex::new(0, 0); rows * cols],
        }
    }

    pub fn from_raw(rows: usize, cols: usize, lsb: i32, data: Vec<Complex<i128>>) -> Self {
        assert_eq!(data.len(), rows * cols, "accumulator shape");
        Self {
            rows,
            cols,
            lsb,
            data,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn lsb(&self) -> i32 {
        self.lsb
    }

    pub fn get(&self, i: usize, j: usize) -> Complex<i128> {
        self.data[i * self.cols + j]
    }

    pub fn raw(&self) -> &[Complex<i128>] {
        &self.data
    }

    pub fn value(&self, i: usize, j: usize) -> C64 {
        let s = pow2(self.lsb);
        let z = self.get(i, j);
        C64::new(z.re as f64 * s, z.im as f64 * s)
    }

    pub fn to_cmat(&self) -> CMat {
        DMatrix::from_fn(self.rows, self.cols, |i, j| self.value(i, j))
    }

    fn max_component(&self) -> u128 {
        self.data
            .iter()
            .map(|z| z.re.unsigned_abs().max(z.im.unsigned_abs()))
            .max()
            .unwrap_or(0)
    }

    /// Re-expresses the matrix on the grid `2^lsb`; exact when moving to a
    /// finer grid, round-half-even otherwise.
    pub fn regrid(&self, lsb: i32) -> Self {
        let shift = lsb - self.lsb;
        Self {
            rows: self.rows,
            cols: self.cols,
            lsb,
            data: self
                .data
                .iter()
                .map(|z| Complex::new(shift_round(z.re, shift), shift_round(z.im, shift)))
                .collect(),
        }
    }

    /// Finest common grid for `self` and `other` that keeps 8 guard bits in
    /// `i128`.
    fn common_lsb(&self, other: &Self) -> i32 {
        let room = |m: &Self| {
            let bits = 128 - m.max_component().leading_zeros() as i32;
            m.lsb - (118 - bits)
        };
        self.lsb.min(other.lsb).max(room(self)).max(room(other))
    }

    /// `self − other`, exact on the finer grid.
    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.combine(other, |a, b| a - b)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.combine(other, |a, b| a + b)
    }

    fn combine(&self, other: &Self, f: impl Fn(Complex<i128>, Complex<i128>) -> Complex<i128>) -> Result<Self> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::Dimension(format!(
                "{}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let lsb = self.common_lsb(other);
        let a = self.regrid(lsb);
        let b = other.regrid(lsb);
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            lsb,
            data: a.data.iter().zip(&b.data).map(|(x, y)| f(*x, *y)).collect(),
        })
    }

    /// Exact product with a real scalar.
    pub fn scale(&self, s: FxReal) -> Self {
        let m = s.mant as i128;
        Self {
            rows: self.rows,
            cols: self.cols,
            lsb: self.lsb + s.lsb(),
            data: self.data.iter().map(|z| Complex::new(z.re * m, z.im * m)).collect(),
        }
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        let mut data = Vec::with_capacity(self.data.len());
        for j in 0..self.cols {
            for i in 0..self.rows {
                data.push(self.get(i, j).conj());
            }
        }
        Self {
            rows: self.cols,
            cols: self.rows,
            lsb: self.lsb,
            data,
        }
    }

    /// Column slice `[start, end)`.
    pub fn columns(&self, start: usize, end: usize) -> Self {
        let mut data = Vec::with_capacity(self.rows * (end - start));
        for i in 0..self.rows {
            data.extend_from_slice(&self.data[i * self.cols + start..i * self.cols + end]);
        }
        Self {
            rows: self.rows,
            cols: end - start,
            lsb: self.lsb,
            data,
        }
    }

    /// Horizontal concatenation `[self | right]` on the finer grid.
    pub fn hcat(&self, right: &Self) -> Result<Self> {
        if self.rows != right.rows {
            return Err(Error::Dimension("hcat row count".into()));
        }
        let lsb = self.common_lsb(right);
        let (a, b) = (self.regrid(lsb), right.regrid(lsb));
        let cols = self.cols + right.cols;
        let mut data = Vec::with_capacity(self.rows * cols);
        for i in 0..self.rows {
            data.extend_from_slice(&a.data[i * a.cols..(i + 1) * a.cols]);
            data.extend_from_slice(&b.data[i * b.cols..(i + 1) * b.cols]);
        }
        Ok(Self {
            rows: self.rows,
            cols,
            lsb,
            data,
        })
    }

    /// Sum of squared magnitudes, exact, on the grid `2^(2·lsb)`.
    pub fn energy(&self) -> (i128, i32) {
        let e = self
            .data
            .iter()
            .map(|z| z.re * z.re + z.im * z.im)
            .sum::<i128>();
        (e, 2 * self.lsb)
    }

    /// Block exponent that leaves `headroom` spare integer bits for the
    /// largest component in `fmt`.
    pub fn normalizing_exp(&self, fmt: FixedFormat, headroom: u32) -> i32 {
        let max = self.max_component();
        if max == 0 {
            return 0;
        }
        let bits = 128 - max.leading_zeros() as i32;
        let target = fmt.total_bits() as i32 - 1 - headroom as i32;
        self.lsb + bits - target + fmt.frac_bits() as i32
    }

    /// Write-back with a data-dependent block exponent.
    pub fn normalize(&self, fmt: FixedFormat, headroom: u32, sat: &mut SatCounter) -> FxMatrix {
        let exp = self.normalizing_exp(fmt, headroom);
        self.requantize(fmt, exp, sat)
    }

    /// Write-back onto `fmt` with block exponent `exp`: round-half-even and
    /// saturate.
    pub fn requantize(&self, fmt: FixedFormat, exp: i32, sat: &mut SatCounter) -> FxMatrix {
        let shift = (exp - fmt.frac_bits() as i32) - self.lsb;
        let data = self
            .data
            .iter()
            .map(|z| {
                let (re, s1) = fmt.saturate(shift_round(z.re, shift));
                let (im, s2) = fmt.saturate(shift_round(z.im, shift));
                sat.hit(s1);
                sat.hit(s2);
                Complex::new(re, im)
            })
            .collect();
        FxMatrix {
            rows: self.rows,
            cols: self.cols,
            fmt,
            exp,
            data,
        }
    }
}

/// Real block-floating-point scalar: `mant · 2^(exp − frac_bits)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FxReal {
    pub mant: i64,
    pub fmt: FixedFormat,
    pub exp: i32,
}

impl FxReal {
    pub fn lsb(self) -> i32 {
        self.exp - self.fmt.frac_bits() as i32
    }

    pub fn to_f64(self) -> f64 {
        self.mant as f64 * pow2(self.lsb())
    }

    /// Normalizes an exact value `m · 2^lsb` into `fmt`.
    pub fn normalize(m: i128, lsb: i32, fmt: FixedFormat, headroom: u32, sat: &mut SatCounter) -> Self {
        let acc = AccMatrix::from_raw(1, 1, lsb, vec![Complex::new(m, 0)]);
        let fx = acc.normalize(fmt, headroom, sat);
        Self {
            mant: fx.get(0, 0).re,
            fmt,
            exp: fx.exp(),
        }
    }

    /// Quantizes a float with a data-dependent exponent.
    pub fn quantize_block(x: f64, fmt: FixedFormat, headroom: u32, sat: &mut SatCounter) -> Self {
        let m = DMatrix::from_element(1, 1, C64::new(x, 0.0));
        let fx = FxMatrix::quantize_block(&m, fmt, headroom, sat);
        Self {
            mant: fx.get(0, 0).re,
            fmt,
            exp: fx.exp(),
        }
    }

    /// Exact product of two scalars as an `(mantissa, lsb)` pair.
    pub fn mul_exact(self, other: Self) -> (i128, i32) {
        (self.mant as i128 * other.mant as i128, self.lsb() + other.lsb())
    }
}

/// `floor(log2(x))` for finite positive `x`, exact.
pub(crate) fn floor_log2(x: f64) -> i32 {
    debug_assert!(x > 0.0 && x.is_finite());
    let bits = x.to_bits();
    let e = ((bits >> 52) & 0x7ff) as i32;
    if e == 0 {
        // subnormal
        let m = bits & ((1u64 << 52) - 1);
        -1074 + 63 - m.leading_zeros() as i32
    } else {
        e - 1023
    }
}
