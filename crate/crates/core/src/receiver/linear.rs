use nalgebra::DMatrix;

use super::{llr_block, DetectionResult};
use crate::airlink::{Constellation, QAM16_A};
use crate::{CMat, Error, Result, C64};

/// Least-squares channel estimate `Ĥ = Y_p·Pᴴ / P` for orthogonal pilots.
pub fn chest_ls(y_pilot: &CMat, pilots: &CMat) -> Result<CMat> {
    if y_pilot.ncols() != pilots.ncols() {
        return Err(Error::Dimension(format!(
            "{} received pilot columns for {} pilots",
            y_pilot.ncols(),
            pilots.ncols()
        )));
    }
    let p = pilots.ncols() as f64;
    Ok(y_pilot * pilots.adjoint() / C64::new(p, 0.0))
}

/// LMMSE equalizer `(ĤᴴĤ + N0/Es·I)⁻¹ĤᴴY_d` followed by the LLR map.
///
/// `n0 = 0` gives the zero-forcing solution and fails if `ĤᴴĤ` is singular.
pub fn lmmse_detect(
    y_data: &CMat,
    h_hat: &CMat,
    n0: f64,
    c: Constellation,
    n0_post: f64,
) -> Result<DetectionResult> {
    if y_data.nrows() != h_hat.nrows() {
        return Err(Error::Dimension("receive rows differ from channel rows".into()));
    }
    if !(n0 >= 0.0 && n0.is_finite()) {
        return Err(Error::Solve(format!("noise variance {n0}")));
    }
    let u = h_hat.ncols();
    let gram = h_hat.adjoint() * h_hat + DMatrix::identity(u, u) * C64::new(n0 / c.energy(), 0.0);
    let chol = gram
        .cholesky()
        .ok_or_else(|| Error::Solve("normal matrix is not positive definite".into()))?;
    let s_hat = chol.solve(&(h_hat.adjoint() * y_data));
    if s_hat.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Solve("non-finite solution".into()));
    }
    let llrs = llr_block(&s_hat, c, QAM16_A, n0_post);
    Ok(DetectionResult {
        s_hat,
        llrs,
        j_hat: CMat::zeros(h_hat.nrows(), 1),
        objective_trace: Vec::new(),
        saturation_count: 0,
        degenerate_iterations: Vec::new(),
        step_size: 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cm(rows: usize, cols: usize, v: &[(f64, f64)]) -> CMat {
        DMatrix::from_row_iterator(rows, cols, v.iter().map(|&(a, b)| C64::new(a, b)))
    }

    #[test]
    fn chest_recovers_channel_and_zero() {
        let h = cm(2, 2, &[(0.5, -1.0), (2.0, 0.25), (-0.75, 0.0), (1.0, 1.0)]);
        let p = cm(2, 4, &[(1.0, 0.), (1.0, 0.), (1.0, 0.), (1.0, 0.), (1.0, 0.), (-1.0, 0.), (1.0, 0.), (-1.0, 0.)]);
        assert_eq!(chest_ls(&(&h * &p), &p).unwrap(), h);
        assert_eq!(chest_ls(&CMat::zeros(2, 4), &p).unwrap(), CMat::zeros(2, 2));
    }

    #[test]
    fn identity_channel_limit() {
        let y = cm(2, 3, &[(0.3, 0.1), (-0.2, 0.5), (0.7, -0.7), (0.0, 0.2), (0.1, 0.1), (-0.4, 0.0)]);
        let r = lmmse_detect(&y, &CMat::identity(2, 2), 1e-12, Constellation::Qpsk, 1.0).unwrap();
        assert!((r.s_hat - &y).norm() < 1e-10);
    }

    #[test]
    fn normal_equation_oracle() {
        // 4×2 case against the explicit 2×2 inverse
        let h = cm(4, 2, &[(1.0, 0.5), (0.2, -0.3), (-0.4, 0.1), (0.9, 0.0), (0.3, 0.3), (-1.1, 0.2), (0.0, -0.6), (0.5, 0.5)]);
        let y = cm(4, 1, &[(0.4, -0.2), (1.0, 0.1), (-0.3, 0.8), (0.2, 0.2)]);
        let n0 = 0.1;
        let es = Constellation::Qpsk.energy();
        let mut g = [[C64::new(0.0, 0.0); 2]; 2];
        let mut b = [C64::new(0.0, 0.0); 2];
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..4 {
                    g[i][j] += h[(k, i)].conj() * h[(k, j)];
                }
            }
            g[i][i] += n0 / es;
            for k in 0..4 {
                b[i] += h[(k, i)].conj() * y[(k, 0)];
            }
        }
        let det = g[0][0] * g[1][1] - g[0][1] * g[1][0];
        let s0 = (g[1][1] * b[0] - g[0][1] * b[1]) / det;
        let s1 = (g[0][0] * b[1] - g[1][0] * b[0]) / det;
        let r = lmmse_detect(&y, &h, n0, Constellation::Qpsk, 1.0).unwrap();
        assert!((r.s_hat[(0, 0)] - s0).norm() < 1e-10);
        assert!((r.s_hat[(1, 0)] - s1).norm() < 1e-10);
    }

    #[test]
    fn singular_zero_forcing_fails() {
        let h = CMat::zeros(4, 2);
        let y = CMat::zeros(4, 3);
        assert!(matches!(lmmse_detect(&y, &h, 0.0, Constellation::Qpsk, 1.0), Err(Error::Solve(_))));
    }
}
