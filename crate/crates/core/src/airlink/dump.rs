//! Frame dump format.
//!
//! A dump is one line of JSON (the header, terminated by `\n`) followed by
//! the arrays listed in `header.arrays`, in order. Each array is stored
//! column-major as little-endian `f64` pairs `(re, im)`. The data bits follow
//! as one byte per bit in the frame's bit order.

use std::io::{BufRead, Read, Write};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{Frame, FrameConfig, JammerProfile, Seed};
use crate::{CMat, Error, Result, C64};

pub const DUMP_FORMAT: &str = "sandman-frame/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DumpHeader {
    pub format: String,
    pub cfg: FrameConfig,
    pub jammer: JammerProfile,
    /// `None` encodes an infinite SNR.
    pub snr_db: Option<f64>,
    pub n0: f64,
    pub seed: Seed,
    pub prs_seed: u16,
    /// `(name, rows, cols)` in file order.
    pub arrays: Vec<(String, usize, usize)>,
    pub bits: usize,
}

fn arrays(f: &Frame) -> [(&'static str, &CMat); 5] {
    [
        ("H", &f.h),
        ("j", &f.j_true),
        ("S", &f.s_true),
        ("w", &f.w_true),
        ("Y", &f.y),
    ]
}

pub fn write_dump<W: Write>(frame: &Frame, mut out: W) -> Result<()> {
    let header = DumpHeader {
        format: DUMP_FORMAT.into(),
        cfg: frame.cfg,
        jammer: frame.jammer,
        snr_db: frame.snr_db.is_finite().then_some(frame.snr_db),
        n0: frame.n0,
        seed: frame.seed,
        prs_seed: frame.prs_seed,
        arrays: arrays(frame)
            .iter()
            .map(|(n, m)| (n.to_string(), m.nrows(), m.ncols()))
            .collect(),
        bits: frame.bits.len(),
    };
    let line = serde_json::to_string(&header).map_err(|e| Error::Io(e.to_string()))?;
    out.write_all(line.as_bytes())?;
    out.write_all(b"\n")?;
    for (_, m) in arrays(frame) {
        // nalgebra storage is already column-major
        for z in m.iter() {
            out.write_all(&z.re.to_le_bytes())?;
            out.write_all(&z.im.to_le_bytes())?;
        }
    }
    out.write_all(&frame.bits)?;
    Ok(())
}

fn read_matrix<R: Read>(input: &mut R, rows: usize, cols: usize) -> Result<CMat> {
    let mut buf = vec![0u8; rows * cols * 16];
    input.read_exact(&mut buf)?;
    let vals = buf.chunks_exact(16).map(|c| {
        let re = f64::from_le_bytes(c[..8].try_into().unwrap());
        let im = f64::from_le_bytes(c[8..].try_into().unwrap());
        C64::new(re, im)
    });
    Ok(DMatrix::from_iterator(rows, cols, vals))
}

pub fn read_dump<R: BufRead>(mut input: R) -> Result<Frame> {
    let mut line = String::new();
    input.read_line(&mut line)?;
    let header: DumpHeader = serde_json::from_str(line.trim_end()).map_err(|e| Error::Io(e.to_string()))?;
    if header.format != DUMP_FORMAT {
        return Err(Error::Io(format!("unsupported dump format '{}'", header.format)));
    }
    let mut mats = Vec::with_capacity(header.arrays.len());
    for (name, rows, cols) in &header.arrays {
        mats.push((name.clone(), read_matrix(&mut input, *rows, *cols)?));
    }
    let take = |n: &str| -> Result<CMat> {
        mats.iter()
            .find(|(m, _)| m == n)
            .map(|(_, m)| m.clone())
            .ok_or_else(|| Error::Io(format!("dump lacks array {n}")))
    };
    let mut bits = vec![0u8; header.bits];
    input.read_exact(&mut bits)?;
    Ok(Frame {
        cfg: header.cfg,
        jammer: header.jammer,
        snr_db: header.snr_db.unwrap_or(f64::INFINITY),
        h: take("H")?,
        j_true: take("j")?,
        s_true: take("S")?,
        bits,
        w_true: take("w")?,
        y: take("Y")?,
        n0: header.n0,
        seed: header.seed,
        prs_seed: header.prs_seed,
    })
}
