use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{pilot_matrix, Constellation};
use crate::{CMat, Error, Result, C64};

/// Block dimensions and modulation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FrameConfig {
    /// Basestation antennas.
    pub b: usize,
    /// Users.
    pub u: usize,
    /// Block length.
    pub k: usize,
    /// Pilot symbols.
    pub p: usize,
    /// Data symbols.
    pub d: usize,
    pub constellation: Constellation,
}

impl Default for FrameConfig {
    fn default() -> Self {
        Self {
            b: 32,
            u: 8,
            k: 64,
            p: 16,
            d: 48,
            constellation: Constellation::Qam16,
        }
    }
}

impl FrameConfig {
    pub fn validate(&self) -> Result<()> {
        if self.u == 0 || self.d == 0 {
            return Err(Error::Config("u and d must be at least 1".into()));
        }
        if self.k != self.p + self.d {
            return Err(Error::Config(format!("k = {} but p + d = {}", self.k, self.p + self.d)));
        }
        if self.u > self.p {
            return Err(Error::Config(format!("u = {} exceeds p = {}", self.u, self.p)));
        }
        if self.b < self.u {
            return Err(Error::Config(format!("b = {} is below u = {}", self.b, self.u)));
        }
        Ok(())
    }

    /// Data bits per block, `U·D·Q`.
    pub fn bits_per_block(&self) -> usize {
        self.u * self.d * self.constellation.bits_per_symbol()
    }

    pub fn with_constellation(mut self, c: Constellation) -> Self {
        self.constellation = c;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JammerKind {
    None,
    Barrage,
    #[serde(rename = "pilot")]
    PilotOnly,
    #[serde(rename = "data")]
    DataOnly,
}

impl JammerKind {
    pub const ALL: [JammerKind; 4] = [
        JammerKind::None,
        JammerKind::Barrage,
        JammerKind::PilotOnly,
        JammerKind::DataOnly,
    ];

    pub fn name(self) -> &'static str {
        match self {
            JammerKind::None => "none",
            JammerKind::Barrage => "barrage",
            JammerKind::PilotOnly => "pilot",
            JammerKind::DataOnly => "data",
        }
    }

    /// Whether column `col` of a block with `p` pilots is jammed.
    pub fn jams(self, col: usize, p: usize) -> bool {
        match self {
            JammerKind::None => false,
            JammerKind::Barrage => true,
            JammerKind::PilotOnly => col < p,
            JammerKind::DataOnly => col >= p,
        }
    }

    fn code(self) -> u8 {
        match self {
            JammerKind::None => 0,
            JammerKind::Barrage => 1,
            JammerKind::PilotOnly => 2,
            JammerKind::DataOnly => 3,
        }
    }
}

impl fmt::Display for JammerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for JammerKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Ok(JammerKind::None),
            "barrage" => Ok(JammerKind::Barrage),
            "pilot" | "pilot_only" => Ok(JammerKind::PilotOnly),
            "data" | "data_only" => Ok(JammerKind::DataOnly),
            _ => Err(Error::Config(format!("unknown jammer kind '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JammerProfile {
    pub kind: JammerKind,
    /// Jammer receive power over the receive power of an average user.
    pub power_ratio_db: f64,
}

impl JammerProfile {
    pub fn new(kind: JammerKind) -> Self {
        Self {
            kind,
            power_ratio_db: 30.0,
        }
    }
}

impl Default for JammerProfile {
    fn default() -> Self {
        Self::new(JammerKind::Barrage)
    }
}

/// Key of a ChaCha stream. The 256-bit key packs the base seed and the
/// identity of a simulation cell injectively; the stream id is the frame
/// index, so no two (cell, frame) pairs share random numbers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Seed {
    pub key: [u8; 32],
    pub stream: u64,
}

impl Seed {
    /// Seed outside any sweep cell.
    pub fn plain(seed: u64) -> Self {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&seed.to_le_bytes());
        key[24] = 0xff;
        Self { key, stream: 0 }
    }

    /// Seed of frame `frame` in the cell `(snr, jammer, constellation)`.
    pub fn cell(base: u64, snr_db: f64, jam: &JammerProfile, c: Constellation, frame: u64) -> Self {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&base.to_le_bytes());
        key[8..16].copy_from_slice(&snr_db.to_bits().to_le_bytes());
        key[16..24].copy_from_slice(&jam.power_ratio_db.to_bits().to_le_bytes());
        key[24] = match c {
            Constellation::Qpsk => 1,
            Constellation::Qam16 => 2,
        };
        key[25] = jam.kind.code();
        Self { key, stream: frame }
    }

    pub fn rng(&self) -> ChaCha12Rng {
        let mut rng = ChaCha12Rng::from_seed(self.key);
        rng.set_stream(self.stream);
        rng
    }
}

/// One received block with its ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub cfg: FrameConfig,
    pub jammer: JammerProfile,
    pub snr_db: f64,
    /// True channel, `B×U`.
    pub h: CMat,
    /// Jammer spatial signature, `B×1`.
    pub j_true: CMat,
    /// Pilots followed by data, `U×K`.
    pub s_true: CMat,
    /// Data bits, index `(u·D + d)·Q + q`.
    pub bits: Vec<u8>,
    /// Masked jammer transmit sequence, `1×K`.
    pub w_true: CMat,
    /// Received block, `B×K`.
    pub y: CMat,
    pub n0: f64,
    pub seed: Seed,
    /// Seed of the pseudorandom vector used by the detector for this frame.
    pub prs_seed: u16,
}

impl Frame {
    pub fn y_pilot(&self) -> CMat {
        self.y.columns(0, self.cfg.p).into_owned()
    }

    pub fn y_data(&self) -> CMat {
        self.y.columns(self.cfg.p, self.cfg.d).into_owned()
    }

    pub fn s_pilot(&self) -> CMat {
        self.s_true.columns(0, self.cfg.p).into_owned()
    }

    pub fn s_data(&self) -> CMat {
        self.s_true.columns(self.cfg.p, self.cfg.d).into_owned()
    }

    /// Jammer contribution `j·w` to `Y`.
    pub fn jammer_term(&self) -> CMat {
        &self.j_true * &self.w_true
    }
}

fn cn(rng: &mut ChaCha12Rng, var: f64) -> C64 {
    let s = (var / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(s * re, s * im)
}

fn cn_matrix(rng: &mut ChaCha12Rng, rows: usize, cols: usize, var: f64) -> CMat {
    // drawn column by column so the stream layout matches the dump layout
    let mut m = DMatrix::from_element(rows, cols, C64::new(0.0, 0.0));
    for c in 0..cols {
        for r in 0..rows {
            m[(r, c)] = cn(rng, var);
        }
    }
    m
}

/// Noise variance for a per-user receive SNR in dB.
pub fn noise_variance(c: Constellation, snr_db: f64) -> f64 {
    c.energy() / 10f64.powf(snr_db / 10.0)
}

/// Draws one block: bits, channel, jammer signature, jammer sequence, noise
/// and finally the detector's pseudorandom seed, in that order.
pub fn generate_frame(cfg: &FrameConfig, jam: &JammerProfile, snr_db: f64, seed: Seed) -> Result<Frame> {
    cfg.validate()?;
    let c = cfg.constellation;
    let q = c.bits_per_symbol();
    let mut rng = seed.rng();

    let bits: Vec<u8> = (0..cfg.u * cfg.d * q).map(|_| rng.random_range(0..2u8)).collect();
    let mut s_true = DMatrix::from_element(cfg.u, cfg.k, C64::new(0.0, 0.0));
    s_true.columns_mut(0, cfg.p).copy_from(&pilot_matrix(cfg));
    for u in 0..cfg.u {
        for d in 0..cfg.d {
            let at = (u * cfg.d + d) * q;
            s_true[(u, cfg.p + d)] = c.map_bits(&bits[at..at + q])?;
        }
    }

    let h = cn_matrix(&mut rng, cfg.b, cfg.u, 1.0);
    let j_true = cn_matrix(&mut rng, cfg.b, 1, 1.0);
    let jam_var = 10f64.powf(jam.power_ratio_db / 10.0) * c.energy();
    let mut w_true = cn_matrix(&mut rng, 1, cfg.k, jam_var);
    for col in 0..cfg.k {
        if !jam.kind.jams(col, cfg.p) {
            w_true[(0, col)] = C64::new(0.0, 0.0);
        }
    }
    let n0 = noise_variance(c, snr_db);
    let noise = cn_matrix(&mut rng, cfg.b, cfg.k, n0);
    let prs_seed = rng.random_range(1..=u16::MAX);

    let mut y = &h * &s_true;
    if jam.kind != JammerKind::None {
        y += &j_true * &w_true;
    }
    if n0 > 0.0 {
        y += noise;
    }
    Ok(Frame {
        cfg: *cfg,
        jammer: *jam,
        snr_db,
        h,
        j_true,
        s_true,
        bits,
        w_true,
        y,
        n0,
        seed,
        prs_seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation() {
        assert!(FrameConfig::default().validate().is_ok());
        let bad = FrameConfig {
            k: 63,
            ..FrameConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = FrameConfig {
            u: 17,
            b: 32,
            ..FrameConfig::default()
        };
        assert!(bad.validate().is_err());
        assert_eq!(FrameConfig::default().bits_per_block(), 1536);
    }

    #[test]
    fn seeds_are_distinct_across_cells() {
        let j = JammerProfile::default();
        let a = Seed::cell(1, 10.0, &j, Constellation::Qpsk, 0);
        let b = Seed::cell(1, 10.0, &JammerProfile::new(JammerKind::PilotOnly), Constellation::Qpsk, 0);
        let c = Seed::cell(1, 10.0, &j, Constellation::Qam16, 0);
        let d = Seed::cell(1, 10.0, &j, Constellation::Qpsk, 1);
        assert!(a != b && a != c && a != d && b != c);
        assert_ne!(Seed::plain(1), Seed::cell(1, 0.0, &j, Constellation::Qpsk, 0));
    }

    #[test]
    fn masks() {
        let p = 16;
        for col in 0..64 {
            assert!(JammerKind::Barrage.jams(col, p));
            assert!(!JammerKind::None.jams(col, p));
            assert_eq!(JammerKind::PilotOnly.jams(col, p), col < p);
            assert_eq!(JammerKind::DataOnly.jams(col, p), col >= p);
        }
    }

    #[test]
    fn kind_names_round_trip() {
        for k in JammerKind::ALL {
            assert_eq!(k.name().parse::<JammerKind>().unwrap(), k);
        }
        assert!("loud".parse::<JammerKind>().is_err());
    }
}
