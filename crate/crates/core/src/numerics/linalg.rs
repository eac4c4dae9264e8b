//! Reference matrix products.
//!
//! These straight-line loops are the oracle the processing-element array is
//! checked against, so they stay deliberately simple.

use nalgebra::DMatrix;
use num_complex::Complex;

use super::{AccMatrix, FixedFormat, FxMatrix, SatCounter};
use crate::{CMat, Error, Result, C64};

/// A complex matrix in either numeric mode.
#[derive(Debug, Clone, PartialEq)]
pub enum CMatrix {
    Float(CMat),
    Fixed(FxMatrix),
}

impl CMatrix {
    pub fn rows(&self) -> usize {
        match self {
            CMatrix::Float(m) => m.nrows(),
            CMatrix::Fixed(m) => m.rows(),
        }
    }

    pub fn cols(&self) -> usize {
        match self {
            CMatrix::Float(m) => m.ncols(),
            CMatrix::Fixed(m) => m.cols(),
        }
    }
}

fn check_inner(ar: usize, ac: usize, br: usize, bc: usize) -> Result<()> {
    if ac != br {
        return Err(Error::Dimension(format!(
            "cannot multiply {ar}x{ac} by {br}x{bc}"
        )));
    }
    Ok(())
}

/// `A·B`. Float operands use plain in-order accumulation; fixed operands use
/// full-precision products, exact accumulation and a single final saturation
/// into `Q(wa + wb, fa + fb)` (capped at 48 bits).
pub fn matmul_ref(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    match (a, b) {
        (CMatrix::Float(a), CMatrix::Float(b)) => {
            check_inner(a.nrows(), a.ncols(), b.nrows(), b.ncols())?;
            let mut c = DMatrix::from_element(a.nrows(), b.ncols(), C64::new(0.0, 0.0));
            for i in 0..a.nrows() {
                for j in 0..b.ncols() {
                    let mut acc = C64::new(0.0, 0.0);
                    for k in 0..a.ncols() {
                        acc += a[(i, k)] * b[(k, j)];
                    }
                    c[(i, j)] = acc;
                }
            }
            Ok(CMatrix::Float(c))
        }
        (CMatrix::Fixed(a), CMatrix::Fixed(b)) => {
            let acc = matmul_exact(a, b)?;
            let total = (a.fmt().total_bits() + b.fmt().total_bits()).min(FixedFormat::MAX_BITS);
            let frac = (a.fmt().frac_bits() + b.fmt().frac_bits()).min(total - 1);
            let fmt = FixedFormat::new(total, frac)?;
            // keep the product grid: lsb = lsb_a + lsb_b
            let exp = acc.lsb() + frac as i32;
            let mut sat = SatCounter::default();
            Ok(CMatrix::Fixed(acc.requantize(fmt, exp, &mut sat)))
        }
        _ => Err(Error::Config("matmul_ref operands in different numeric modes".into())),
    }
}

/// Exact `A·B` on the grid `lsb_a + lsb_b`.
pub fn matmul_exact(a: &FxMatrix, b: &FxMatrix) -> Result<AccMatrix> {
    check_inner(a.rows(), a.cols(), b.rows(), b.cols())?;
    let mut out = Vec::with_capacity(a.rows() * b.cols());
    for i in 0..a.rows() {
        for j in 0..b.cols() {
            let mut acc = Complex::<i128>::new(0, 0);
            for k in 0..a.cols() {
                acc += widen(a.get(i, k)) * widen(b.get(k, j));
            }
            out.push(acc);
        }
    }
    Ok(AccMatrix::from_raw(a.rows(), b.cols(), a.lsb() + b.lsb(), out))
}

/// Exact `Aᴴ·B` on the grid `lsb_a + lsb_b`.
pub fn matmul_herm_exact(a: &FxMatrix, b: &FxMatrix) -> Result<AccMatrix> {
    check_inner(a.cols(), a.rows(), b.rows(), b.cols())?;
    let mut out = Vec::with_capacity(a.cols() * b.cols());
    for i in 0..a.cols() {
        for j in 0..b.cols() {
            let mut acc = Complex::<i128>::new(0, 0);
            for k in 0..a.rows() {
                acc += widen(a.get(k, i)).conj() * widen(b.get(k, j));
            }
            out.push(acc);
        }
    }
    Ok(AccMatrix::from_raw(a.cols(), b.cols(), a.lsb() + b.lsb(), out))
}

/// Exact outer product `j·vᴴ` on the grid `lsb_j + lsb_v`.
pub fn outer_conj_exact(j: &FxMatrix, v: &FxMatrix) -> Result<AccMatrix> {
    if j.cols() != 1 || v.cols() != 1 {
        return Err(Error::Dimension("outer product takes column vectors".into()));
    }
    let mut out = Vec::with_capacity(j.rows() * v.rows());
    for b in 0..j.rows() {
        for k in 0..v.rows() {
            out.push(widen(j.get(b, 0)) * widen(v.get(k, 0)).conj());
        }
    }
    Ok(AccMatrix::from_raw(j.rows(), v.rows(), j.lsb() + v.lsb(), out))
}

pub(crate) fn widen(z: Complex<i64>) -> Complex<i128> {
    Complex::new(z.re as i128, z.im as i128)
}

#[cfg(test)]
mod tests {
    use super::super::{cmac, CFx};
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const PE: FixedFormat = FixedFormat::q(14, 11);

    fn random_fx(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> FxMatrix {
        let data = (0..rows * cols)
            .map(|_| Complex::new(rng.random_range(-2048..2048), rng.random_range(-2048..2048)))
            .collect();
        FxMatrix::from_mantissas(rows, cols, PE, 0, data).unwrap()
    }

    fn identity_fx(n: usize) -> FxMatrix {
        let mut m = FxMatrix::zeros(n, n, PE, 0);
        for i in 0..n {
            m.set(i, i, Complex::new(1 << 11, 0));
        }
        m
    }

    #[test]
    fn scalar_float_product() {
        let a = CMatrix::Float(DMatrix::from_element(1, 1, C64::new(2.0, 1.0)));
        let b = CMatrix::Float(DMatrix::from_element(1, 1, C64::new(3.0, -1.0)));
        let CMatrix::Float(c) = matmul_ref(&a, &b).unwrap() else { panic!() };
        assert_eq!(c[(0, 0)], C64::new(7.0, 1.0));
    }

    #[test]
    fn identity_is_neutral_in_both_modes() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = random_fx(&mut rng, 5, 8);
        let CMatrix::Fixed(p) = matmul_ref(&CMatrix::Fixed(a.clone()), &CMatrix::Fixed(identity_fx(8))).unwrap() else {
            panic!()
        };
        assert_eq!(p.to_cmat(), a.to_cmat());

        let af = a.to_cmat();
        let eye = CMat::identity(8, 8);
        let CMatrix::Float(q) = matmul_ref(&CMatrix::Float(af.clone()), &CMatrix::Float(eye)).unwrap() else {
            panic!()
        };
        assert_eq!(q, af);
    }

    #[test]
    fn dimension_mismatch() {
        let a = CMatrix::Float(CMat::zeros(2, 3));
        let b = CMatrix::Float(CMat::zeros(2, 3));
        assert!(matches!(matmul_ref(&a, &b), Err(Error::Dimension(_))));
    }

    #[test]
    fn fixed_product_matches_cmac_loop() {
        // triple loop of scalar MACs into a wide accumulator
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let acc_fmt = FixedFormat::q(28, 22);
        for _ in 0..20 {
            let a = random_fx(&mut rng, 8, 8);
            let b = random_fx(&mut rng, 8, 8);
            let CMatrix::Fixed(p) = matmul_ref(&CMatrix::Fixed(a.clone()), &CMatrix::Fixed(b.clone())).unwrap() else {
                panic!()
            };
            let mut sat = SatCounter::default();
            for i in 0..8 {
                for j in 0..8 {
                    let mut acc = CFx::zero(acc_fmt);
                    for k in 0..8 {
                        let x = a.get(i, k);
                        let y = b.get(k, j);
                        acc = cmac(
                            acc,
                            CFx { re: x.re, im: x.im, fmt: PE },
                            CFx { re: y.re, im: y.im, fmt: PE },
                            &mut sat,
                        );
                    }
                    assert_eq!(p.get(i, j), Complex::new(acc.re, acc.im));
                }
            }
            assert_eq!(sat.count(), 0);
        }
    }

    #[test]
    fn herm_product_matches_explicit_adjoint() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = random_fx(&mut rng, 6, 3);
        let b = random_fx(&mut rng, 6, 4);
        let mut ah = FxMatrix::zeros(3, 6, PE, 0);
        for i in 0..6 {
            for j in 0..3 {
                ah.set(j, i, a.get(i, j).conj());
            }
        }
        assert_eq!(matmul_herm_exact(&a, &b).unwrap(), matmul_exact(&ah, &b).unwrap());
    }
}
