//! Run configuration: a TOML file plus command-line overrides.
//!
//! Every key is optional. Defaults:
//!
//! ```toml
//! seed = 0                 # base seed of all frame streams
//! clock_mhz = 320.0        # clock for the throughput figure
//! plot = true              # write ber.svg next to results.csv
//! jammer_power_db = 30.0   # jammer-to-signal power ratio
//!
//! [sweep]
//! snr_points = [-12.0, -9.0, -6.0, -3.0, 0.0]
//! jammers = ["barrage"]            # none | barrage | pilot | data
//! constellations = ["qpsk"]        # qpsk | 16qam
//! detectors = ["sandman", "lmmse"] # sandman | sandman_float | sandman_fixed | sandman_array | lmmse
//! max_frames = 20000
//! min_bit_errors = 200
//! batch_frames = 32
//!
//! [cycles]
//! snr_db = 10.0
//! jammer = "barrage"
//! constellation = "16qam"
//!
//! [frame]      # b = 32, u = 8, k = 64, p = 16, d = 48
//! [detector]   # t_max = 10, step_scale = 0.8, numeric = "float", ...
//! [cycle_model]
//! ```
//!
//! `sandman` resolves to the float or fixed detector by `detector.numeric`.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use sandman_core::airlink::{Constellation, FrameConfig, JammerKind, JammerProfile};
use sandman_core::harness::{Detector, SweepSpec};
use sandman_core::pe_array::CycleModel;
use sandman_core::receiver::{DetectorConfig, NumericMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectorChoice {
    Sandman,
    SandmanFloat,
    SandmanFixed,
    SandmanArray,
    Lmmse,
}

impl DetectorChoice {
    pub fn parse(s: &str) -> Result<Self, String> {
        Ok(match s {
            "sandman" => Self::Sandman,
            "sandman_float" => Self::SandmanFloat,
            "sandman_fixed" => Self::SandmanFixed,
            "sandman_array" => Self::SandmanArray,
            "lmmse" => Self::Lmmse,
            _ => return Err(format!("unknown detector `{s}`")),
        })
    }

    fn resolve(self, numeric: NumericMode) -> Detector {
        match self {
            Self::Sandman => match numeric {
                NumericMode::Float => Detector::SandmanFloat,
                NumericMode::Fixed => Detector::SandmanFixed,
            },
            Self::SandmanFloat => Detector::SandmanFloat,
            Self::SandmanFixed => Detector::SandmanFixed,
            Self::SandmanArray => Detector::SandmanArray,
            Self::Lmmse => Detector::Lmmse,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub snr_points: Vec<f64>,
    pub jammers: Vec<JammerKind>,
    pub constellations: Vec<Constellation>,
    pub detectors: Vec<DetectorChoice>,
    pub max_frames: u64,
    pub min_bit_errors: u64,
    pub batch_frames: u64,
}

impl Default for SweepSection {
    fn default() -> Self {
        let s = SweepSpec::default();
        Self {
            snr_points: s.snr_points,
            jammers: vec![JammerKind::Barrage],
            constellations: s.constellations,
            detectors: vec![DetectorChoice::Sandman, DetectorChoice::Lmmse],
            max_frames: s.max_frames,
            min_bit_errors: s.min_bit_errors,
            batch_frames: s.batch_frames,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CyclesSection {
    pub snr_db: f64,
    pub jammer: JammerKind,
    pub constellation: Constellation,
}

impl Default for CyclesSection {
    fn default() -> Self {
        Self {
            snr_db: 10.0,
            jammer: JammerKind::Barrage,
            constellation: Constellation::Qam16,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub out_dir: Option<PathBuf>,
    pub clock_mhz: f64,
    pub plot: bool,
    pub jammer_power_db: f64,
    pub sweep: SweepSection,
    pub cycles: CyclesSection,
    pub frame: FrameConfig,
    pub detector: DetectorConfig,
    pub cycle_model: CycleModel,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out_dir: None,
            clock_mhz: 320.0,
            plot: true,
            jammer_power_db: 30.0,
            sweep: SweepSection::default(),
            cycles: CyclesSection::default(),
            frame: FrameConfig::default(),
            detector: DetectorConfig::default(),
            cycle_model: CycleModel::default(),
        }
    }
}

/// Parses a config file. Errors carry the line of the offending key.
pub fn parse(text: &str, origin: &str) -> Result<RunConfig, String> {
    toml::from_str(text).map_err(|e| {
        let line = e
            .span()
            .map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1);
        match line {
            Some(l) => format!("{origin}:{l}: {}", e.message()),
            None => format!("{origin}: {}", e.message()),
        }
    })
}

impl RunConfig {
    pub fn jammer(&self, kind: JammerKind) -> JammerProfile {
        JammerProfile {
            kind,
            power_ratio_db: self.jammer_power_db,
        }
    }

    pub fn sweep_spec(&self) -> SweepSpec {
        let s = &self.sweep;
        let mut detectors: Vec<Detector> = Vec::new();
        for d in &s.detectors {
            let d = d.resolve(self.detector.numeric);
            if !detectors.contains(&d) {
                detectors.push(d);
            }
        }
        SweepSpec {
            snr_points: s.snr_points.clone(),
            jammers: s.jammers.iter().map(|&k| self.jammer(k)).collect(),
            constellations: s.constellations.clone(),
            detectors,
            max_frames: s.max_frames,
            min_bit_errors: s.min_bit_errors,
            base_seed: self.seed,
            batch_frames: s.batch_frames,
            frame: self.frame,
            detector: self.detector,
            cycle_model: self.cycle_model,
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).unwrap_or_default()
    }
}
