use std::f64::consts::FRAC_1_SQRT_2;

use crate::C64;

/// Fibonacci LFSR over `x^16 + x^14 + x^13 + x^11 + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Lfsr16 {
    state: u16,
}

impl Lfsr16 {
    pub const PERIOD: usize = 65_535;

    /// A zero seed would lock the register, so it is replaced by `0xACE1`.
    pub fn new(seed: u16) -> Self {
        Self {
            state: if seed == 0 { 0xACE1 } else { seed },
        }
    }

    pub fn state(&self) -> u16 {
        self.state
    }

    /// Emits the output bit and advances the register.
    pub fn next_bit(&mut self) -> u8 {
        let s = self.state;
        let out = (s & 1) as u8;
        let fb = (s ^ (s >> 2) ^ (s >> 3) ^ (s >> 5)) & 1;
        self.state = (s >> 1) | (fb << 15);
        out
    }
}

/// Pseudorandom QPSK chips `(±1 ± i)/√2`, two register bits per chip.
pub fn prs_vector(seed: u16, k: usize) -> Vec<C64> {
    let mut reg = Lfsr16::new(seed);
    let level = |b: u8| if b == 0 { FRAC_1_SQRT_2 } else { -FRAC_1_SQRT_2 };
    (0..k)
        .map(|_| {
            let re = level(reg.next_bit());
            let im = level(reg.next_bit());
            C64::new(re, im)
        })
        .collect()
}
