//! Cycle accounting for the PE array.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::grid::{tree_depth, SLICE};
use crate::airlink::FrameConfig;
use crate::receiver::{DetectorConfig, Step};

/// Latencies of the array. All counts are clock cycles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CycleModel {
    pub slices: usize,
    /// Operand pre-skew before a Cannon product.
    pub skew: u64,
    /// Result de-skew after a Cannon product.
    pub deskew: u64,
    /// One level of an adder tree.
    pub adder_stage: u64,
    /// Lanes of the extended-precision bank.
    pub plus_lanes: usize,
    pub lut_latency: u64,
    /// Scalar work of the step size besides `Ĥᴴj`.
    pub step_size: u64,
    /// Multiplying `Eᴴj` by the reciprocal.
    pub project_scale: u64,
    pub prox: u64,
    pub llr: u64,
}

impl Default for CycleModel {
    fn default() -> Self {
        Self {
            slices: 4,
            skew: 7,
            deskew: 7,
            adder_stage: 1,
            plus_lanes: 8,
            lut_latency: 9,
            step_size: 9,
            project_scale: 1,
            prox: 6,
            llr: 8,
        }
    }
}

/// Cost of one operation: cycles and busy PE-cycles.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Cost {
    pub cycles: u64,
    pub active: u64,
}

impl std::ops::Add for Cost {
    type Output = Cost;
    fn add(self, o: Cost) -> Cost {
        Cost {
            cycles: self.cycles + o.cycles,
            active: self.active + o.active,
        }
    }
}

fn blocks(n: usize) -> u64 {
    n.div_ceil(SLICE) as u64
}

impl CycleModel {
    pub fn pes(&self) -> u64 {
        (self.slices * SLICE * SLICE) as u64
    }

    fn row_passes(&self, rows: usize) -> u64 {
        (blocks(rows)).div_ceil(self.slices as u64).max(1)
    }

    /// `A·B` with `A` of `m×n` and `B` of `n×p`.
    pub fn product(&self, m: usize, n: usize, p: usize) -> Cost {
        let passes = self.row_passes(m);
        let mac = blocks(n) * blocks(p) * SLICE as u64;
        let used = blocks(m).min(self.slices as u64) * (SLICE * SLICE) as u64;
        Cost {
            cycles: passes * (self.skew + mac + self.deskew),
            active: used * mac * passes,
        }
    }

    /// `Aᴴ·B` with `A` of `m×n` and `B` of `m×p`.
    pub fn product_herm(&self, m: usize, n: usize, p: usize) -> Cost {
        let passes = self.row_passes(m);
        let mac = blocks(n) * blocks(p) * SLICE as u64;
        let used = blocks(m).min(self.slices as u64);
        Cost {
            cycles: passes * (self.skew + mac + self.deskew) + tree_depth(used as usize) * self.adder_stage,
            active: used * (SLICE * SLICE) as u64 * mac * passes,
        }
    }

    /// `A·v` with `A` of `m×n`.
    pub fn mat_vec(&self, m: usize, n: usize) -> Cost {
        let passes = self.row_passes(m);
        Cost {
            cycles: passes * (blocks(n) + tree_depth(SLICE) * self.adder_stage),
            active: (m * SLICE) as u64 * blocks(n),
        }
    }

    /// `Aᴴ·v` with `A` of `m×n`.
    pub fn mat_herm_vec(&self, m: usize, n: usize) -> Cost {
        let passes = self.row_passes(m);
        let used = blocks(m).min(self.slices as u64) as usize;
        Cost {
            cycles: passes * blocks(n) + (tree_depth(SLICE) + tree_depth(used)) * self.adder_stage,
            active: (m * SLICE) as u64 * blocks(n),
        }
    }

    /// `E − j·vᴴ` with `E` of `m×n`.
    pub fn outer_update(&self, m: usize, n: usize) -> Cost {
        Cost {
            cycles: self.row_passes(m) * blocks(n),
            active: (m * SLICE) as u64 * blocks(n),
        }
    }

    /// Renormalization of a `b`-vector on the extended-precision lanes:
    /// energy, reduction, LUT, scaling.
    pub fn renorm(&self, b: usize) -> Cost {
        let passes = b.div_ceil(self.plus_lanes) as u64;
        Cost {
            cycles: 2 * passes + tree_depth(self.plus_lanes) * self.adder_stage + self.lut_latency,
            active: 0,
        }
    }

    pub fn prox(&self, u: usize, d: usize) -> Cost {
        Cost {
            cycles: self.prox,
            active: (u * d) as u64,
        }
    }

    pub fn scalar(&self, cycles: u64) -> Cost {
        Cost { cycles, active: 0 }
    }
}

/// Dataflow pattern of a phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dataflow {
    Cannon,
    CannonStationary,
    BroadcastRows,
    BroadcastCols,
    Elementwise,
    Lanes,
}

/// One scheduled phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Phase {
    pub step: Step,
    pub dataflow: Dataflow,
    /// Executed once per block rather than per iteration.
    pub once: bool,
    pub cost: Cost,
}

/// Static schedule of one block.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseProgram {
    pub phases: Vec<Phase>,
    pub t_max: usize,
}

impl PhaseProgram {
    /// Schedule for a block where the first jammer estimate is not
    /// degenerate (the seed runs once and the step size is derived from
    /// the projected trace).
    pub fn for_block(fc: &FrameConfig, dc: &DetectorConfig, m: &CycleModel) -> Self {
        let (b, u, k, p, d) = (fc.b, fc.u, fc.k, fc.p, fc.d);
        let mut phases = Vec::new();
        let mut push = |step, dataflow, once, cost| {
            phases.push(Phase {
                step,
                dataflow,
                once,
                cost,
            })
        };
        push(Step::Chest, Dataflow::Cannon, true, m.product(b, p, u));
        push(Step::PilotResidual, Dataflow::Cannon, true, m.product(b, u, p));
        push(Step::Residual, Dataflow::Cannon, false, m.product(b, u, d));
        if dc.jammer_nulling {
            push(Step::Seed, Dataflow::BroadcastRows, true, m.mat_vec(b, k));
            for _ in 0..dc.power_iters {
                push(Step::PowerU, Dataflow::BroadcastCols, false, m.mat_herm_vec(b, k));
                push(Step::PowerJ, Dataflow::BroadcastRows, false, m.mat_vec(b, k));
            }
            push(Step::Renorm, Dataflow::Lanes, false, m.renorm(b));
        }
        if dc.step_size.is_none() {
            let mut c = m.scalar(m.step_size);
            if dc.jammer_nulling {
                c = c + m.mat_herm_vec(b, u);
            }
            push(Step::StepSize, Dataflow::Lanes, true, c);
        }
        push(
            Step::Project,
            Dataflow::BroadcastCols,
            false,
            m.mat_herm_vec(b, k) + m.scalar(m.project_scale),
        );
        push(Step::Update, Dataflow::Elementwise, false, m.outer_update(b, k));
        push(Step::Gradient, Dataflow::CannonStationary, false, m.product_herm(b, u, d));
        push(Step::Prox, Dataflow::Elementwise, false, m.prox(u, d));
        push(Step::Llr, Dataflow::Lanes, true, m.scalar(m.llr));
        Self {
            phases,
            t_max: dc.t_max,
        }
    }

    pub fn cycles_per_iteration(&self) -> u64 {
        self.phases.iter().filter(|p| !p.once).map(|p| p.cost.cycles).sum()
    }

    pub fn one_time_cycles(&self) -> u64 {
        self.phases.iter().filter(|p| p.once).map(|p| p.cost.cycles).sum()
    }

    pub fn cycles_per_block(&self) -> u64 {
        self.one_time_cycles() + self.t_max as u64 * self.cycles_per_iteration()
    }
}

/// Per-phase totals gathered while a block runs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PhaseTally {
    pub calls: u64,
    pub cycles: u64,
    pub active: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CycleReport {
    pub per_phase: BTreeMap<Step, PhaseTally>,
    pub t_max: usize,
    pub cycles_per_iteration: u64,
    pub cycles_per_block: u64,
    pub pe_utilization: f64,
    pub bits_per_block: usize,
    pub pes: u64,
}

/// Steps charged once per block.
pub fn is_one_time(step: Step) -> bool {
    matches!(step, Step::Chest | Step::PilotResidual | Step::Seed | Step::StepSize | Step::Llr)
}

impl CycleReport {
    pub fn from_tally(per_phase: BTreeMap<Step, PhaseTally>, t_max: usize, bits_per_block: usize, pes: u64) -> Self {
        let total: u64 = per_phase.values().map(|t| t.cycles).sum();
        let recurring: u64 = per_phase
            .iter()
            .filter(|(s, _)| !is_one_time(**s))
            .map(|(_, t)| t.cycles)
            .sum();
        let active: u64 = per_phase.values().map(|t| t.active).sum();
        Self {
            per_phase,
            t_max,
            cycles_per_iteration: if t_max == 0 { 0 } else { recurring / t_max as u64 },
            cycles_per_block: total,
            pe_utilization: if total == 0 { 0.0 } else { active as f64 / (pes * total) as f64 },
            bits_per_block,
            pes,
        }
    }

    pub fn phase_cycles(&self, step: Step) -> u64 {
        self.per_phase.get(&step).map_or(0, |t| t.cycles)
    }

    pub fn csv_header() -> &'static str {
        "phase,calls,cycles,share"
    }

    /// One CSV row per phase plus a `total` row.
    pub fn to_csv(&self) -> String {
        let mut s = String::from(Self::csv_header());
        s.push('\n');
        for step in Step::ALL {
            if let Some(t) = self.per_phase.get(&step) {
                let share = t.cycles as f64 / self.cycles_per_block.max(1) as f64;
                let _ = writeln!(s, "{},{},{},{:.4}", step.tag(), t.calls, t.cycles, share);
            }
        }
        let _ = writeln!(s, "total,1,{},1.0000", self.cycles_per_block);
        s
    }

    pub fn text_table(&self, f_clk_hz: f64) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:<6} {:>6} {:>8} {:>7}", "phase", "calls", "cycles", "share");
        for step in Step::ALL {
            if let Some(t) = self.per_phase.get(&step) {
                let share = 100.0 * t.cycles as f64 / self.cycles_per_block.max(1) as f64;
                let _ = writeln!(s, "{:<6} {:>6} {:>8} {:>6.1}%", step.tag(), t.calls, t.cycles, share);
            }
        }
        let _ = writeln!(s, "cycles_per_iteration = {}", self.cycles_per_iteration);
        let _ = writeln!(s, "cycles_per_block = {}", self.cycles_per_block);
        let _ = writeln!(s, "pe_utilization = {:.3}", self.pe_utilization);
        let _ = writeln!(s, "bits_per_block = {}", self.bits_per_block);
        let _ = writeln!(s, "clock_mhz = {}", f_clk_hz / 1e6);
        let _ = writeln!(s, "throughput_mbps = {:.1}", throughput(self, f_clk_hz) / 1e6);
        s
    }
}

/// Bits per second at clock `f_clk_hz`.
pub fn throughput(report: &CycleReport, f_clk_hz: f64) -> f64 {
    throughput_of(report.bits_per_block, report.cycles_per_block, f_clk_hz)
}

pub fn throughput_of(bits_per_block: usize, cycles_per_block: u64, f_clk_hz: f64) -> f64 {
    if cycles_per_block == 0 {
        return 0.0;
    }
    bits_per_block as f64 * f_clk_hz / cycles_per_block as f64
}
