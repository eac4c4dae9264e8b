//! Channel estimation, the jammer-nulling detector and the LMMSE baseline.
//!
//! The detector alternates, for `t_max` iterations, between estimating the
//! dominant direction of the residual `E = Y − Ĥ·S` (the jammer), projecting
//! it out, and taking a box-constrained gradient step on the data symbols.
//! [`sandman_float`] is the double-precision reference; [`sandman_fixed`]
//! is the bit-true datapath, generic over the [`FxEvaluator`] that performs
//! its matrix products.

mod config;
mod fixed;
mod linear;
mod llr;
mod prs;
mod sandman;

pub use config::{DetectorConfig, FixedPlan, NumericMode};
pub use fixed::{chest_fixed, quantize_input, sandman_fixed, FxEvaluator, ReferenceEvaluator, Step};
pub use linear::{chest_ls, lmmse_detect};
pub use llr::{hard_bits, llr_map, prox_box};
pub use prs::{prs_vector, Lfsr16};
pub use sandman::{derived_step_size, sandman_float};

use crate::airlink::{pilot_matrix, Constellation, Frame};
use crate::numerics::{FxMatrix, SatCounter};
use crate::{CMat, Result};

/// Everything the receiver sees of one block.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockInput {
    /// Received block, `B×K`.
    pub y: CMat,
    /// Known pilots, `U×P`.
    pub pilots: CMat,
    pub constellation: Constellation,
    /// Noise variance, used for LMMSE regularization and LLR scaling.
    pub n0: f64,
    /// Per-frame seed of the pseudorandom vector.
    pub prs_seed: u16,
    /// Initial data estimate, `U×D`; zero when absent.
    pub s_init: Option<CMat>,
}

impl BlockInput {
    pub fn from_frame(f: &Frame) -> Self {
        Self {
            y: f.y.clone(),
            pilots: pilot_matrix(&f.cfg),
            constellation: f.cfg.constellation,
            n0: f.n0,
            prs_seed: f.prs_seed,
            s_init: None,
        }
    }

    pub fn data_columns(&self) -> CMat {
        let p = self.pilots.ncols();
        self.y.columns(p, self.y.ncols() - p).into_owned()
    }

    pub fn pilot_columns(&self) -> CMat {
        self.y.columns(0, self.pilots.ncols()).into_owned()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionResult {
    /// Data estimates, `U×D`.
    pub s_hat: CMat,
    /// LLRs in bit order `(u·D + d)·Q + q`; positive means bit 0.
    pub llrs: Vec<f64>,
    /// Final jammer direction, unit norm or zero.
    pub j_hat: CMat,
    /// `‖Ē‖²_F` per iteration.
    pub objective_trace: Vec<f64>,
    pub saturation_count: u64,
    /// Iterations whose jammer estimate collapsed to zero.
    pub degenerate_iterations: Vec<usize>,
    pub step_size: f64,
}

impl DetectionResult {
    pub fn hard_bits(&self) -> Vec<u8> {
        hard_bits(&self.llrs)
    }
}

/// State of one iteration, taken after the nulling step and before the
/// symbol update.
#[derive(Debug, Clone)]
pub struct IterationTrace {
    pub t: usize,
    pub j: CMat,
    pub degenerate: bool,
    /// `max_k |(jᴴ·Ē)_k|`.
    pub orthogonality: f64,
    /// `‖E‖_F` before nulling.
    pub residual_norm: f64,
    /// Weight of one LSB of `Ē` (bit-true path only).
    pub ebar_lsb: Option<f64>,
    /// Full symbol matrix entering the update.
    pub s: CMat,
    pub objective: f64,
}

pub trait Observer {
    fn iteration(&mut self, it: &IterationTrace);
    /// Full symbol matrix after the last iteration.
    fn finished(&mut self, _s: &CMat) {}
}

impl<F: FnMut(&IterationTrace)> Observer for F {
    fn iteration(&mut self, it: &IterationTrace) {
        self(it)
    }
}

/// LLRs of a `U×D` estimate in bit order.
pub(crate) fn llr_block(s: &CMat, c: Constellation, a: f64, n0_post: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(s.len() * c.bits_per_symbol());
    for r in 0..s.nrows() {
        for col in 0..s.ncols() {
            llr::llr_with_level(s[(r, col)], c, a, n0_post, &mut out);
        }
    }
    out
}

/// Detector on a given channel estimate in the configured numeric mode. In
/// fixed mode the estimate is block-quantized into the PE format first.
pub fn sandman_detect(input: &BlockInput, h_hat: &CMat, cfg: &DetectorConfig) -> Result<DetectionResult> {
    match cfg.numeric {
        NumericMode::Float => sandman_float(input, h_hat, cfg, None),
        NumericMode::Fixed => {
            let mut sat = SatCounter::default();
            let yq = quantize_input(&input.y, cfg, &mut sat);
            let h = FxMatrix::quantize_block(h_hat, cfg.formats.pe, 1, &mut sat);
            sandman_fixed(&mut ReferenceEvaluator, input, &yq, &h, cfg, &mut sat, None)
        }
    }
}

/// Channel estimation plus detection of one block.
pub fn detect_block(input: &BlockInput, cfg: &DetectorConfig) -> Result<DetectionResult> {
    detect_block_observed(input, cfg, None)
}

pub fn detect_block_observed(
    input: &BlockInput,
    cfg: &DetectorConfig,
    observer: Option<&mut dyn Observer>,
) -> Result<DetectionResult> {
    match cfg.numeric {
        NumericMode::Float => {
            let h = chest_ls(&input.pilot_columns(), &input.pilots)?;
            sandman_float(input, &h, cfg, observer)
        }
        NumericMode::Fixed => detect_block_with(&mut ReferenceEvaluator, input, cfg, observer),
    }
}

/// Bit-true channel estimation and detection on a chosen evaluator.
pub fn detect_block_with<E: FxEvaluator>(
    ev: &mut E,
    input: &BlockInput,
    cfg: &DetectorConfig,
    observer: Option<&mut dyn Observer>,
) -> Result<DetectionResult> {
    cfg.validate()?;
    let mut sat = SatCounter::default();
    let yq = quantize_input(&input.y, cfg, &mut sat);
    let h = chest_fixed(ev, &yq, &input.pilots, cfg, &mut sat)?;
    sandman_fixed(ev, input, &yq, &h, cfg, &mut sat, observer)
}

/// LMMSE baseline on the least-squares channel estimate.
pub fn lmmse_block(input: &BlockInput, cfg: &DetectorConfig) -> Result<DetectionResult> {
    let h = chest_ls(&input.pilot_columns(), &input.pilots)?;
    lmmse_detect(&input.data_columns(), &h, input.n0, input.constellation, cfg.llr_scale_noise(input.n0))
}
