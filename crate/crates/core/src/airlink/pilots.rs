use std::f64::consts::PI;

use nalgebra::DMatrix;

use super::FrameConfig;
use crate::{CMat, C64};

/// `U×P` pilot matrix with `P·Pᴴ = P·I` and unit-modulus entries.
///
/// The first `U` rows of a Sylvester-Hadamard matrix of order
/// `n = next_pow2(U)`, tiled `P/n` times. When `n` does not divide `P`, rows
/// of the `P`-point DFT matrix are used instead.
pub fn pilot_matrix(cfg: &FrameConfig) -> CMat {
    let (u, p) = (cfg.u, cfg.p);
    let n = u.next_power_of_two();
    if n <= p && p % n == 0 {
        DMatrix::from_fn(u, p, |r, c| {
            let v = if hadamard_sign(r, c % n) { -1.0 } else { 1.0 };
            C64::new(v, 0.0)
        })
    } else {
        DMatrix::from_fn(u, p, |r, c| {
            C64::from_polar(1.0, -2.0 * PI * ((r * c) % p) as f64 / p as f64)
        })
    }
}

/// Sylvester construction: entry `(r, c)` is `(-1)^popcount(r & c)`.
fn hadamard_sign(r: usize, c: usize) -> bool {
    (r & c).count_ones() % 2 == 1
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(u: usize, p: usize) -> FrameConfig {
        FrameConfig {
            b: u.max(4),
            u,
            k: p + 4,
            p,
            d: 4,
            ..FrameConfig::default()
        }
    }

    #[test]
    fn default_pilots_are_orthogonal() {
        let p = pilot_matrix(&FrameConfig::default());
        assert_eq!(p.shape(), (8, 16));
        let g = &p * p.adjoint();
        assert_eq!(g, CMat::identity(8, 8) * C64::new(16.0, 0.0));
        assert!(p.iter().all(|z| z.norm() == 1.0));
    }

    #[test]
    fn single_user() {
        let p = pilot_matrix(&cfg(1, 2));
        assert_eq!(p.as_slice(), &[C64::new(1.0, 0.0), C64::new(1.0, 0.0)]);
    }

    #[test]
    fn dft_fallback_is_orthogonal() {
        let p = pilot_matrix(&cfg(3, 6));
        let g = &p * p.adjoint();
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 6.0 } else { 0.0 };
                assert!((g[(i, j)] - C64::new(want, 0.0)).norm() < 1e-12);
            }
        }
    }
}
