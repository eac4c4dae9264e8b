use std::f64::consts::SQRT_2;

use crate::airlink::{Constellation, QAM16_A};
use crate::C64;

/// Clamps real and imaginary parts to `[-r, r]`.
pub fn prox_box(v: C64, r: f64) -> C64 {
    C64::new(v.re.clamp(-r, r), v.im.clamp(-r, r))
}

/// Max-log LLR of the sign bit of one 16QAM dimension with inner level `a`.
fn qam16_sign(x: f64, a: f64) -> f64 {
    if x.abs() <= 2.0 * a {
        4.0 * a * x
    } else {
        8.0 * a * (x.abs() - a) * x.signum()
    }
}

/// Max-log LLR of the outer-level bit of one 16QAM dimension.
fn qam16_outer(x: f64, a: f64) -> f64 {
    4.0 * a * (2.0 * a - x.abs())
}

/// LLRs of one estimate with the 16QAM inner level given explicitly, so the
/// bit-true path can use its quantized level.
pub(crate) fn llr_with_level(s: C64, c: Constellation, a: f64, n0_post: f64, out: &mut Vec<f64>) {
    match c {
        Constellation::Qpsk => {
            let kappa = 2.0 * SQRT_2 / n0_post;
            out.push(kappa * s.re);
            out.push(kappa * s.im);
        }
        Constellation::Qam16 => {
            for x in [s.re, s.im] {
                out.push(qam16_sign(x, a) / n0_post);
                out.push(qam16_outer(x, a) / n0_post);
            }
        }
    }
}

/// Max-log LLRs of `s` under the Gray map, positive meaning bit 0.
///
/// QPSK gives `κ·(re, im)` with `κ = 2√2/N0`. 16QAM gives per dimension the
/// sign bit (linear within `|x| ≤ 2a`, slope doubled beyond) and the outer
/// bit `4a(2a − |x|)/N0`.
pub fn llr_map(s: C64, c: Constellation, n0_post: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(c.bits_per_symbol());
    llr_with_level(s, c, QAM16_A, n0_post, &mut out);
    out
}

/// Bit decisions from LLR signs: negative means 1.
pub fn hard_bits(llrs: &[f64]) -> Vec<u8> {
    llrs.iter().map(|&l| (l < 0.0) as u8).collect()
}
