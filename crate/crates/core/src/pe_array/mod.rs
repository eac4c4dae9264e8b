//! Cycle-level model of the processing-element array.
//!
//! [`ArrayEvaluator`] plugs into the bit-true detector and performs every
//! matrix product on the simulated grid, so its outputs are bit-identical
//! to the reference datapath while each call is charged its cycle cost.

mod cycles;
mod grid;

pub use cycles::{
    is_one_time, throughput, throughput_of, Cost, CycleModel, CycleReport, Dataflow, Phase, PhaseProgram, PhaseTally,
};
pub use grid::{tile_of, Direction, PEGrid, PeMode, Slice, Tile, SLICE};

use std::collections::BTreeMap;

use crate::airlink::FrameConfig;
use crate::numerics::{AccMatrix, FxMatrix};
use crate::receiver::{self, BlockInput, DetectionResult, DetectorConfig, FxEvaluator, NumericMode, Step};
use crate::{Error, Result};

fn check_tile(m: &FxMatrix) -> Result<()> {
    if m.rows() != SLICE || m.cols() != SLICE {
        return Err(Error::Dimension(format!("expected an 8x8 tile, got {}x{}", m.rows(), m.cols())));
    }
    Ok(())
}

/// `A·B` of two 8×8 tiles on one slice. Returns the exact product and the
/// cycle count (skew, eight MAC steps, deskew).
pub fn cannon_mm(a: &FxMatrix, b: &FxMatrix, model: &CycleModel) -> Result<(AccMatrix, u64)> {
    check_tile(a)?;
    check_tile(b)?;
    let mut grid = PEGrid::new(1);
    let out = grid.product(a, b)?;
    Ok((out, model.product(SLICE, SLICE, SLICE).cycles))
}

/// `Aᴴ·B` of two 8×8 tiles with `A` held stationary in natural layout.
pub fn cannon_mm_herm(a: &FxMatrix, b: &FxMatrix, model: &CycleModel) -> Result<(AccMatrix, u64)> {
    check_tile(a)?;
    check_tile(b)?;
    let mut grid = PEGrid::new(1);
    let out = grid.product_herm(a, b)?;
    Ok((out, model.product_herm(SLICE, SLICE, SLICE).cycles))
}

/// `M·v` (rows) or `Mᴴ·v` (cols) on the full grid.
pub fn mv_broadcast(m: &FxMatrix, v: &FxMatrix, dir: Direction, model: &CycleModel) -> Result<(AccMatrix, u64)> {
    let mut grid = PEGrid::new(model.slices);
    let out = grid.mat_vec(m, v, dir)?;
    let c = match dir {
        Direction::Rows => model.mat_vec(m.rows(), m.cols()),
        Direction::Cols => model.mat_herm_vec(m.rows(), m.cols()),
    };
    Ok((out, c.cycles))
}

/// Evaluator that runs every product on the simulated grid and tallies
/// cycles per step.
#[derive(Debug, Clone)]
pub struct ArrayEvaluator {
    pub grid: PEGrid,
    pub model: CycleModel,
    tally: BTreeMap<Step, PhaseTally>,
    dims: (usize, usize, usize),
}

impl ArrayEvaluator {
    /// `u` users and `d` data columns size the element-wise and scalar
    /// phases; the matrix phases are costed from their operands.
    pub fn new(model: CycleModel, b: usize, u: usize, d: usize) -> Self {
        Self {
            grid: PEGrid::new(model.slices),
            model,
            tally: BTreeMap::new(),
            dims: (b, u, d),
        }
    }

    fn charge(&mut self, step: Step, c: Cost) {
        let t = self.tally.entry(step).or_default();
        // the step size is marked by its scalar part; its product adds cycles only
        if !(step == Step::StepSize && c.active > 0) {
            t.calls += 1;
        }
        t.cycles += c.cycles;
        t.active += c.active;
    }

    pub fn tally(&self) -> &BTreeMap<Step, PhaseTally> {
        &self.tally
    }

    pub fn into_tally(self) -> BTreeMap<Step, PhaseTally> {
        self.tally
    }
}

impl FxEvaluator for ArrayEvaluator {
    fn product(&mut self, step: Step, a: &FxMatrix, b: &FxMatrix) -> Result<AccMatrix> {
        let out = self.grid.product(a, b)?;
        self.charge(step, self.model.product(a.rows(), a.cols(), b.cols()));
        Ok(out)
    }

    fn product_herm(&mut self, step: Step, a: &FxMatrix, b: &FxMatrix) -> Result<AccMatrix> {
        let out = self.grid.product_herm(a, b)?;
        self.charge(step, self.model.product_herm(a.rows(), a.cols(), b.cols()));
        Ok(out)
    }

    fn mat_vec(&mut self, step: Step, a: &FxMatrix, v: &FxMatrix) -> Result<AccMatrix> {
        let out = self.grid.mat_vec(a, v, Direction::Rows)?;
        self.charge(step, self.model.mat_vec(a.rows(), a.cols()));
        Ok(out)
    }

    fn mat_herm_vec(&mut self, step: Step, a: &FxMatrix, v: &FxMatrix) -> Result<AccMatrix> {
        let out = self.grid.mat_vec(a, v, Direction::Cols)?;
        let mut c = self.model.mat_herm_vec(a.rows(), a.cols());
        if step == Step::Project {
            c = c + self.model.scalar(self.model.project_scale);
        }
        self.charge(step, c);
        Ok(out)
    }

    fn outer_update(&mut self, step: Step, e: &FxMatrix, j: &FxMatrix, v: &FxMatrix) -> Result<AccMatrix> {
        let out = self.grid.outer_update(e, j, v)?;
        self.charge(step, self.model.outer_update(e.rows(), e.cols()));
        Ok(out)
    }

    fn scalar(&mut self, step: Step) {
        let (b, u, d) = self.dims;
        let m = self.model;
        let c = match step {
            Step::Renorm => m.renorm(b),
            Step::StepSize => m.scalar(m.step_size),
            Step::Prox => m.prox(u, d),
            Step::Llr => m.scalar(m.llr),
            _ => Cost::default(),
        };
        self.charge(step, c);
    }
}

/// Frame dimensions implied by a block.
pub fn frame_config_of(input: &BlockInput) -> FrameConfig {
    let (b, k) = input.y.shape();
    let (u, p) = input.pilots.shape();
    FrameConfig {
        b,
        u,
        k,
        p,
        d: k.saturating_sub(p),
        constellation: input.constellation,
    }
}

/// Runs one block on the array. Requires the fixed-point mode.
pub fn run_block(input: &BlockInput, cfg: &DetectorConfig, model: &CycleModel) -> Result<(DetectionResult, CycleReport)> {
    if cfg.numeric != NumericMode::Fixed {
        return Err(Error::Config("the PE array runs the fixed-point datapath only".into()));
    }
    let fc = frame_config_of(input);
    let mut ev = ArrayEvaluator::new(*model, fc.b, fc.u, fc.d);
    let res = receiver::detect_block_with(&mut ev, input, cfg, None)?;
    let report = CycleReport::from_tally(ev.into_tally(), cfg.t_max, fc.bits_per_block(), model.pes());
    Ok((res, report))
}
