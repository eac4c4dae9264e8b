use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result, C64};

/// Inner 16QAM level per dimension; the outer level is `3a = 1/√2`.
pub const QAM16_A: f64 = FRAC_1_SQRT_2 / 3.0;

/// Gray-mapped constellations scaled to the box `[-1/√2, 1/√2]²`.
///
/// QPSK: bit 0 selects the sign of the real part, bit 1 the sign of the
/// imaginary part (0 is positive). 16QAM uses a 2-bit Gray code per real
/// dimension, bits `(b0, b1)` on the real part and `(b2, b3)` on the
/// imaginary part, with `b0` the sign and `b1` set on the outer level:
/// `00 → +a`, `01 → +3a`, `10 → −a`, `11 → −3a`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Constellation {
    #[serde(rename = "qpsk")]
    Qpsk,
    #[serde(rename = "16qam")]
    Qam16,
}

impl Constellation {
    pub const ALL: [Constellation; 2] = [Constellation::Qpsk, Constellation::Qam16];

    pub fn name(self) -> &'static str {
        match self {
            Constellation::Qpsk => "qpsk",
            Constellation::Qam16 => "16qam",
        }
    }

    /// Bits per symbol (Q).
    pub fn bits_per_symbol(self) -> usize {
        match self {
            Constellation::Qpsk => 2,
            Constellation::Qam16 => 4,
        }
    }

    /// Half-width of the enclosing box.
    pub fn box_radius(self) -> f64 {
        FRAC_1_SQRT_2
    }

    /// Average symbol energy `Es`.
    pub fn energy(self) -> f64 {
        match self {
            Constellation::Qpsk => 1.0,
            Constellation::Qam16 => 5.0 / 9.0,
        }
    }

    /// Amplitude levels of one real dimension, ascending.
    pub fn levels(self) -> &'static [f64] {
        match self {
            Constellation::Qpsk => &[-FRAC_1_SQRT_2, FRAC_1_SQRT_2],
            Constellation::Qam16 => &[-FRAC_1_SQRT_2, -QAM16_A, QAM16_A, FRAC_1_SQRT_2],
        }
    }

    /// Bits per real dimension.
    pub fn bits_per_dim(self) -> usize {
        self.bits_per_symbol() / 2
    }

    /// Maps the bits of one real dimension to an amplitude.
    pub fn map_dim(self, bits: &[u8]) -> f64 {
        let sign = if bits[0] == 0 { 1.0 } else { -1.0 };
        match self {
            Constellation::Qpsk => sign * FRAC_1_SQRT_2,
            Constellation::Qam16 => sign * if bits[1] == 0 { QAM16_A } else { FRAC_1_SQRT_2 },
        }
    }

    /// Nearest-level bits for one real dimension. Ties go to bit 0.
    pub fn demap_dim(self, x: f64, out: &mut [u8]) {
        out[0] = (x < 0.0) as u8;
        if self == Constellation::Qam16 {
            out[1] = (x.abs() > 2.0 * QAM16_A) as u8;
        }
    }

    pub fn map_bits(self, bits: &[u8]) -> Result<C64> {
        if bits.len() != self.bits_per_symbol() {
            return Err(Error::Dimension(format!(
                "{} takes {} bits, got {}",
                self.name(),
                self.bits_per_symbol(),
                bits.len()
            )));
        }
        let h = self.bits_per_dim();
        Ok(C64::new(self.map_dim(&bits[..h]), self.map_dim(&bits[h..])))
    }

    /// Hard decision: bits of the nearest constellation point.
    pub fn demap(self, s: C64) -> Vec<u8> {
        let h = self.bits_per_dim();
        let mut out = vec![0; 2 * h];
        self.demap_dim(s.re, &mut out[..h]);
        self.demap_dim(s.im, &mut out[h..]);
        out
    }

    /// All points with their bit labels, in label order.
    pub fn points(self) -> Vec<(Vec<u8>, C64)> {
        let q = self.bits_per_symbol();
        (0..1usize << q)
            .map(|label| {
                let bits: Vec<u8> = (0..q).map(|i| ((label >> (q - 1 - i)) & 1) as u8).collect();
                let s = self.map_bits(&bits).expect("label width");
                (bits, s)
            })
            .collect()
    }
}

impl fmt::Display for Constellation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Constellation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "qpsk" => Ok(Constellation::Qpsk),
            "16qam" | "qam16" => Ok(Constellation::Qam16),
            _ => Err(Error::Config(format!("unknown constellation '{s}'"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mapping_examples() {
        let c = Constellation::Qpsk;
        assert_eq!(c.map_bits(&[0, 0]).unwrap(), C64::new(FRAC_1_SQRT_2, FRAC_1_SQRT_2));
        assert_eq!(c.map_bits(&[1, 1]).unwrap(), C64::new(-FRAC_1_SQRT_2, -FRAC_1_SQRT_2));
        let inner = 1.0 / (3.0 * 2f64.sqrt());
        let s = Constellation::Qam16.map_bits(&[1, 0, 1, 0]).unwrap();
        assert!((s.re + inner).abs() < 1e-15 && (s.im + inner).abs() < 1e-15);
        assert!(matches!(c.map_bits(&[0]), Err(Error::Dimension(_))));
    }

    #[test]
    fn energies_and_box() {
        for c in Constellation::ALL {
            let pts = c.points();
            let es = pts.iter().map(|(_, s)| s.norm_sqr()).sum::<f64>() / pts.len() as f64;
            assert!((es - c.energy()).abs() < 1e-12, "{c}");
            for (_, s) in &pts {
                assert!(s.re.abs() <= c.box_radius() && s.im.abs() <= c.box_radius());
            }
            assert_eq!(pts.iter().map(|(_, s)| s.re).fold(0.0, f64::max), c.box_radius());
        }
    }

    #[test]
    fn round_trip_all_labels() {
        for c in Constellation::ALL {
            for (bits, s) in c.points() {
                assert_eq!(c.demap(s), bits);
            }
        }
    }

    #[test]
    fn gray_adjacency() {
        for c in Constellation::ALL {
            let pts = c.points();
            let lv = c.levels();
            for (ba, a) in &pts {
                for (bb, b) in &pts {
                    let step = |x: f64, y: f64| {
                        let ix = lv.iter().position(|&l| l == x).unwrap() as i32;
                        let iy = lv.iter().position(|&l| l == y).unwrap() as i32;
                        (ix - iy).abs()
                    };
                    let adjacent = (a.im == b.im && step(a.re, b.re) == 1)
                        || (a.re == b.re && step(a.im, b.im) == 1);
                    if adjacent {
                        let d = ba.iter().zip(bb).filter(|(x, y)| x != y).count();
                        assert_eq!(d, 1, "{c}: {ba:?} vs {bb:?}");
                    }
                }
            }
        }
    }
}
