//! Monte-Carlo BER sweeps.
//!
//! Every grid cell (SNR, jammer, constellation, detector) draws its frames
//! from [`Seed::cell`], so detectors in the same (SNR, jammer,
//! constellation) family see the same frames. Frames run in fixed-size
//! batches; the early-stop test is applied only between batches, which keeps
//! the result independent of the worker count.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::airlink::{generate_frame, Constellation, FrameConfig, JammerProfile, Seed};
use crate::pe_array::{run_block, CycleModel};
use crate::receiver::{detect_block, lmmse_block, BlockInput, DetectionResult, DetectorConfig, NumericMode};
use crate::{Error, Result};

/// Schema tag written in the first line of every results file.
pub const CSV_SCHEMA: &str = "sandman-ber/1";
pub const CSV_HEADER: &str =
    "snr_db,detector,jammer,jammer_db,constellation,frames_run,bit_errors,bits,ber,ci95,status";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Detector {
    SandmanFloat,
    SandmanFixed,
    SandmanArray,
    Lmmse,
}

impl Detector {
    pub const ALL: [Detector; 4] = [
        Detector::SandmanFloat,
        Detector::SandmanFixed,
        Detector::SandmanArray,
        Detector::Lmmse,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Detector::SandmanFloat => "sandman_float",
            Detector::SandmanFixed => "sandman_fixed",
            Detector::SandmanArray => "sandman_array",
            Detector::Lmmse => "lmmse",
        }
    }

    pub fn run(self, input: &BlockInput, cfg: &DetectorConfig, model: &CycleModel) -> Result<DetectionResult> {
        let with = |numeric| DetectorConfig { numeric, ..*cfg };
        match self {
            Detector::SandmanFloat => detect_block(input, &with(NumericMode::Float)),
            Detector::SandmanFixed => detect_block(input, &with(NumericMode::Fixed)),
            Detector::SandmanArray => run_block(input, &with(NumericMode::Fixed), model).map(|(r, _)| r),
            Detector::Lmmse => lmmse_block(input, cfg),
        }
    }
}

impl fmt::Display for Detector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Detector {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Detector::ALL
            .into_iter()
            .find(|d| d.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown detector `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSpec {
    pub snr_points: Vec<f64>,
    pub jammers: Vec<JammerProfile>,
    pub constellations: Vec<Constellation>,
    pub detectors: Vec<Detector>,
    pub max_frames: u64,
    pub min_bit_errors: u64,
    pub base_seed: u64,
    /// Frames generated between two early-stop checks.
    pub batch_frames: u64,
    pub frame: FrameConfig,
    pub detector: DetectorConfig,
    pub cycle_model: CycleModel,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            snr_points: vec![-12.0, -9.0, -6.0, -3.0, 0.0],
            jammers: vec![JammerProfile::default()],
            constellations: vec![Constellation::Qpsk],
            detectors: vec![Detector::SandmanFloat, Detector::Lmmse],
            max_frames: 20_000,
            min_bit_errors: 200,
            base_seed: 0,
            batch_frames: 32,
            frame: FrameConfig::default(),
            detector: DetectorConfig::default(),
            cycle_model: CycleModel::default(),
        }
    }
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.max_frames < 1 {
            return Err(Error::Config("max_frames must be at least 1".into()));
        }
        if self.min_bit_errors < 1 {
            return Err(Error::Config("min_bit_errors must be at least 1".into()));
        }
        if self.batch_frames < 1 {
            return Err(Error::Config("batch_frames must be at least 1".into()));
        }
        if self.snr_points.iter().any(|s| s.is_nan()) {
            return Err(Error::Config("snr_points contains NaN".into()));
        }
        if self.snr_points.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("snr_points must be strictly increasing".into()));
        }
        self.frame.validate()?;
        self.detector.validate()
    }

    /// Grid cells in output order.
    pub fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::new();
        for &constellation in &self.constellations {
            for &jammer in &self.jammers {
                for &detector in &self.detectors {
                    for &snr_db in &self.snr_points {
                        out.push(Cell {
                            snr_db,
                            jammer,
                            constellation,
                            detector,
                        });
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub snr_db: f64,
    pub jammer: JammerProfile,
    pub constellation: Constellation,
    pub detector: Detector,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CellStatus {
    Ok,
    /// The detector returned an error; counts cover the frames before it.
    Failed(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BerPoint {
    pub snr_db: f64,
    pub detector: Detector,
    pub jammer: JammerProfile,
    pub constellation: Constellation,
    pub frames_run: u64,
    pub bit_errors: u64,
    pub bits_per_frame: u64,
    pub ber: f64,
    /// Half-width of the normal-approximation 95% interval.
    pub ci95: f64,
    pub status: CellStatus,
}

impl BerPoint {
    pub fn bits(&self) -> u64 {
        self.frames_run * self.bits_per_frame
    }

    pub fn failed(&self) -> bool {
        matches!(self.status, CellStatus::Failed(_))
    }

    pub fn csv_row(&self) -> String {
        let status = match &self.status {
            CellStatus::Ok => "ok".to_string(),
            CellStatus::Failed(m) => format!("failed: {}", m.replace([',', '\n'], ";")),
        };
        format!(
            "{},{},{},{},{},{},{},{},{:e},{:e},{}",
            fmt_snr(self.snr_db),
            self.detector,
            self.jammer.kind.name(),
            self.jammer.power_ratio_db,
            self.constellation,
            self.frames_run,
            self.bit_errors,
            self.bits(),
            self.ber,
            self.ci95,
            status
        )
    }
}

fn fmt_snr(s: f64) -> String {
    if s.is_infinite() {
        if s > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{s}")
    }
}

fn point(cell: &Cell, frames: u64, errors: u64, bits_per_frame: u64, status: CellStatus) -> BerPoint {
    let n = (frames * bits_per_frame) as f64;
    let (ber, ci95) = if n > 0.0 {
        let p = errors as f64 / n;
        (p, 1.96 * (p * (1.0 - p) / n).sqrt())
    } else {
        (0.0, 0.0)
    };
    BerPoint {
        snr_db: cell.snr_db,
        detector: cell.detector,
        jammer: cell.jammer,
        constellation: cell.constellation,
        frames_run: frames,
        bit_errors: errors,
        bits_per_frame,
        ber,
        ci95,
        status,
    }
}

fn frame_errors(spec: &SweepSpec, cell: &Cell, fc: &FrameConfig, index: u64) -> Result<u64> {
    let seed = Seed::cell(spec.base_seed, cell.snr_db, &cell.jammer, cell.constellation, index);
    let frame = generate_frame(fc, &cell.jammer, cell.snr_db, seed)?;
    let input = BlockInput::from_frame(&frame);
    let res = cell.detector.run(&input, &spec.detector, &spec.cycle_model)?;
    let hard = res.hard_bits();
    Ok(hard.iter().zip(&frame.bits).filter(|(a, b)| a != b).count() as u64)
}

/// Runs one cell to completion.
pub fn run_cell(spec: &SweepSpec, cell: &Cell) -> BerPoint {
    let fc = spec.frame.with_constellation(cell.constellation);
    let bits_per_frame = fc.bits_per_block() as u64;
    let (mut frames, mut errors) = (0u64, 0u64);
    while frames < spec.max_frames && errors < spec.min_bit_errors {
        let end = (frames + spec.batch_frames).min(spec.max_frames);
        let batch: Vec<Result<u64>> = (frames..end)
            .into_par_iter()
            .map(|i| frame_errors(spec, cell, &fc, i))
            .collect();
        for (i, r) in batch.into_iter().enumerate() {
            match r {
                Ok(e) => errors += e,
                Err(err) => {
                    let done = frames + i as u64;
                    return point(cell, done, errors, bits_per_frame, CellStatus::Failed(err.to_string()));
                }
            }
        }
        frames = end;
    }
    point(cell, frames, errors, bits_per_frame, CellStatus::Ok)
}

/// Runs every cell of the grid on the current rayon pool.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<BerPoint>> {
    spec.validate()?;
    Ok(spec.cells().par_iter().map(|c| run_cell(spec, c)).collect())
}

/// [`run_sweep`] on a dedicated pool of `threads` workers.
pub fn run_sweep_threads(spec: &SweepSpec, threads: usize) -> Result<Vec<BerPoint>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    pool.install(|| run_sweep(spec))
}

/// BER curve as `(snr, log10 ber)`. A zero count is placed at half an
/// error so that a curve dropping to zero still brackets its target.
fn log_curve(points: &[BerPoint]) -> Vec<(f64, f64)> {
    let mut v: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| !p.failed() && p.bits() > 0 && p.snr_db.is_finite())
        .map(|p| {
            let ber = if p.bit_errors == 0 { 0.5 / p.bits() as f64 } else { p.ber };
            (p.snr_db, ber.log10())
        })
        .collect();
    v.sort_by(|a, b| a.0.total_cmp(&b.0));
    v
}

/// SNR where the curve first falls to `target_ber`, interpolated linearly
/// in log-BER.
pub fn snr_at(points: &[BerPoint], target_ber: f64) -> Result<f64> {
    let t = target_ber.log10();
    let c = log_curve(points);
    for w in c.windows(2) {
        let ((s0, l0), (s1, l1)) = (w[0], w[1]);
        if l0 >= t && l1 <= t {
            if l0 == l1 {
                return Ok(s0);
            }
            return Ok(s0 + (t - l0) * (s1 - s0) / (l1 - l0));
        }
    }
    Err(Error::NotBracketed(target_ber))
}

/// `SNR(a) − SNR(b)` at `target_ber`.
pub fn compare_curves(a: &[BerPoint], b: &[BerPoint], target_ber: f64) -> Result<f64> {
    Ok(snr_at(a, target_ber)? - snr_at(b, target_ber)?)
}

/// Points of one curve, in SNR order.
pub fn curve(points: &[BerPoint], detector: Detector, jammer: JammerProfile, c: Constellation) -> Vec<BerPoint> {
    points
        .iter()
        .filter(|p| p.detector == detector && p.jammer == jammer && p.constellation == c)
        .cloned()
        .collect()
}

pub fn to_csv(points: &[BerPoint]) -> String {
    let mut s = format!("# schema: {CSV_SCHEMA}\n{CSV_HEADER}\n");
    for p in points {
        let _ = writeln!(s, "{}", p.csv_row());
    }
    s
}
