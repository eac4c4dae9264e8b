use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::numerics::FixedFormat;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NumericMode {
    Float,
    Fixed,
}

impl fmt::Display for NumericMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NumericMode::Float => "float",
            NumericMode::Fixed => "fixed",
        })
    }
}

impl FromStr for NumericMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "float" | "float64" => Ok(NumericMode::Float),
            "fixed" => Ok(NumericMode::Fixed),
            _ => Err(Error::Config(format!("unknown numeric mode '{s}'"))),
        }
    }
}

/// Word formats of the bit-true datapath.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FixedPlan {
    /// Operands of the regular PEs.
    pub pe: FixedFormat,
    /// Write-back format of wide results (residual after nulling, gradient).
    pub pe_acc: FixedFormat,
    /// Extended-precision lanes (jammer vector, norms, step size).
    pub pe_plus: FixedFormat,
    /// Extended-precision accumulators (projection coefficients).
    pub pe_plus_acc: FixedFormat,
    /// Spare integer bits when the received block is quantized.
    pub input_headroom: u32,
}

impl Default for FixedPlan {
    fn default() -> Self {
        Self {
            pe: FixedFormat::q(14, 11),
            pe_acc: FixedFormat::q(28, 22),
            pe_plus: FixedFormat::q(24, 18),
            pe_plus_acc: FixedFormat::q(48, 36),
            input_headroom: 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectorConfig {
    pub t_max: usize,
    /// Fixed step size; `None` derives it per block from the channel estimate.
    pub step_size: Option<f64>,
    /// Multiplier on the derived step size.
    pub step_scale: f64,
    pub box_radius: f64,
    #[serde(alias = "power_iter_per_outer")]
    pub power_iters: usize,
    /// Seed of the pseudorandom vector; `None` takes the per-frame seed.
    pub pr_seed: Option<u16>,
    pub numeric: NumericMode,
    /// With `false` the jammer estimate is frozen at zero.
    pub jammer_nulling: bool,
    /// Post-equalization noise used to scale LLRs; `None` uses the frame's N0.
    pub llr_noise: Option<f64>,
    pub formats: FixedPlan,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            t_max: 10,
            step_size: None,
            step_scale: 0.8,
            box_radius: FRAC_1_SQRT_2,
            power_iters: 1,
            pr_seed: None,
            numeric: NumericMode::Float,
            jammer_nulling: true,
            llr_noise: None,
            formats: FixedPlan::default(),
        }
    }
}

impl DetectorConfig {
    pub fn fixed() -> Self {
        Self {
            numeric: NumericMode::Fixed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.t_max == 0 {
            return Err(Error::Config("t_max must be at least 1".into()));
        }
        if let Some(tau) = self.step_size {
            if !(tau > 0.0 && tau.is_finite()) {
                return Err(Error::Config(format!("step_size must be positive, got {tau}")));
            }
        }
        if !(self.step_scale > 0.0 && self.step_scale.is_finite()) {
            return Err(Error::Config("step_scale must be positive".into()));
        }
        if !(self.box_radius > 0.0 && self.box_radius.is_finite()) {
            return Err(Error::Config("box_radius must be positive".into()));
        }
        if self.pr_seed == Some(0) {
            return Err(Error::Config("pr_seed must be nonzero".into()));
        }
        if let Some(n) = self.llr_noise {
            if !(n > 0.0 && n.is_finite()) {
                return Err(Error::Config("llr_noise must be positive".into()));
            }
        }
        Ok(())
    }

    /// Noise proxy that scales the LLRs of a block received with noise `n0`.
    pub fn llr_scale_noise(&self, n0: f64) -> f64 {
        match self.llr_noise {
            Some(n) => n,
            None if n0 > 0.0 && n0.is_finite() => n0,
            None => 1.0,
        }
    }
}
