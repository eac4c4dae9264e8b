//! Bit-true detector.
//!
//! Every matrix product is delegated to an [`FxEvaluator`]; the arithmetic
//! around the products (block normalization, the table-based inverse square
//! root, the box clamp) lives here and is shared by every evaluator. Products
//! are returned exactly, so two evaluators agree bit for bit whenever they
//! compute the same sums.

use std::fmt;

use super::sandman::check_dims;
use super::{llr_block, prs_vector, BlockInput, DetectionResult, DetectorConfig, IterationTrace, Observer};
use crate::airlink::QAM16_A;
use crate::numerics::{
    matmul_exact, matmul_herm_exact, outer_conj_exact, pow2, quantize_mantissa, AccMatrix, FixedFormat, FxMatrix,
    FxReal, InvSqrtLut, SatCounter,
};
use crate::{CMat, Result, C64};

/// Operation of the per-block schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Step {
    /// Channel estimation from the pilot columns.
    Chest,
    /// Pilot part of the residual, fixed for the whole block.
    PilotResidual,
    /// ① data part of the residual.
    Residual,
    /// ② jammer seed `E·x`.
    Seed,
    /// ③ `u = Eᴴj`.
    PowerU,
    /// ③ `j = E·u`.
    PowerJ,
    /// ④ renormalization.
    Renorm,
    /// Step size, once per block.
    StepSize,
    /// ⑤ projection coefficients.
    Project,
    /// ⑥ nulling update `E − j·r`.
    Update,
    /// ⑦ gradient.
    Gradient,
    /// ⑧ box-constrained update.
    Prox,
    /// Soft outputs.
    Llr,
}

impl Step {
    pub const ALL: [Step; 13] = [
        Step::Chest,
        Step::PilotResidual,
        Step::Residual,
        Step::Seed,
        Step::PowerU,
        Step::PowerJ,
        Step::Renorm,
        Step::StepSize,
        Step::Project,
        Step::Update,
        Step::Gradient,
        Step::Prox,
        Step::Llr,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Step::Chest => "chest",
            Step::PilotResidual => "ep",
            Step::Residual => "1",
            Step::Seed => "2",
            Step::PowerU => "3u",
            Step::PowerJ => "3j",
            Step::Renorm => "4",
            Step::StepSize => "tau",
            Step::Project => "5",
            Step::Update => "6",
            Step::Gradient => "7",
            Step::Prox => "8",
            Step::Llr => "llr",
        }
    }
}

impl fmt::Display for Step {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// Executes the matrix products of the detector.
pub trait FxEvaluator {
    /// Exact `A·B`.
    fn product(&mut self, step: Step, a: &FxMatrix, b: &FxMatrix) -> Result<AccMatrix>;
    /// Exact `Aᴴ·B`.
    fn product_herm(&mut self, step: Step, a: &FxMatrix, b: &FxMatrix) -> Result<AccMatrix>;
    /// Exact `A·v` for a column vector `v`.
    fn mat_vec(&mut self, step: Step, a: &FxMatrix, v: &FxMatrix) -> Result<AccMatrix>;
    /// Exact `Aᴴ·v`.
    fn mat_herm_vec(&mut self, step: Step, a: &FxMatrix, v: &FxMatrix) -> Result<AccMatrix>;
    /// `E − j·vᴴ`, exact.
    fn outer_update(&mut self, step: Step, e: &FxMatrix, j: &FxMatrix, v: &FxMatrix) -> Result<AccMatrix>;
    /// Marks a step without matrix products (scalar or element-wise work).
    fn scalar(&mut self, _step: Step) {}
}

/// Straight-line evaluator built on the reference products.
#[derive(Debug, Default, Clone, Copy)]
pub struct ReferenceEvaluator;

impl FxEvaluator for ReferenceEvaluator {
    fn product(&mut self, _: Step, a: &FxMatrix, b: &FxMatrix) -> Result<AccMatrix> {
        matmul_exact(a, b)
    }

    fn product_herm(&mut self, _: Step, a: &FxMatrix, b: &FxMatrix) -> Result<AccMatrix> {
        matmul_herm_exact(a, b)
    }

    fn mat_vec(&mut self, _: Step, a: &FxMatrix, v: &FxMatrix) -> Result<AccMatrix> {
        matmul_exact(a, v)
    }

    fn mat_herm_vec(&mut self, _: Step, a: &FxMatrix, v: &FxMatrix) -> Result<AccMatrix> {
        matmul_herm_exact(a, v)
    }

    fn outer_update(&mut self, _: Step, e: &FxMatrix, j: &FxMatrix, v: &FxMatrix) -> Result<AccMatrix> {
        e.to_acc().sub(&outer_conj_exact(j, v)?)
    }
}

/// Quantizes the received block with the configured input headroom.
pub fn quantize_input(y: &CMat, cfg: &DetectorConfig, sat: &mut SatCounter) -> FxMatrix {
    FxMatrix::quantize_block(y, cfg.formats.pe, cfg.formats.input_headroom, sat)
}

/// Bit-true channel estimate `Ĥ = Y_p·Pᴴ·(1/P)`, block-normalized into the
/// PE format.
pub fn chest_fixed<E: FxEvaluator>(
    ev: &mut E,
    yq: &FxMatrix,
    pilots: &CMat,
    cfg: &DetectorConfig,
    sat: &mut SatCounter,
) -> Result<FxMatrix> {
    let pe = cfg.formats.pe;
    let p = pilots.ncols();
    let ph = FxMatrix::quantize_with_exp(&pilots.adjoint(), pe, 0, sat);
    let acc = ev.product(Step::Chest, &yq.columns(0, p), &ph)?;
    let inv_p = FxReal::quantize_block(1.0 / p as f64, pe, 1, sat);
    Ok(acc.scale(inv_p).normalize(pe, 1, sat))
}

fn clamp_box(s: &mut FxMatrix, limit: i64) {
    for z in s.mantissas_mut() {
        z.re = z.re.clamp(-limit, limit);
        z.im = z.im.clamp(-limit, limit);
    }
}

/// Value of an exact `(mantissa, lsb)` pair.
fn exact_value(m: i128, lsb: i32) -> f64 {
    m as f64 * pow2(lsb)
}

/// `c·U·(1/√d)²` for the exact denominator `d = dm·2^dl`.
fn step_from_denominator(
    lut: &InvSqrtLut,
    dm: i128,
    dl: i32,
    scale_u: f64,
    fmt: FixedFormat,
    sat: &mut SatCounter,
) -> Result<FxReal> {
    let y = lut.eval_exact(dm, dl)?;
    let cu = FxReal::quantize_block(scale_u, fmt, 1, sat);
    let y2 = y.mant as i128 * y.mant as i128;
    Ok(FxReal::normalize(y2 * cu.mant as i128, 2 * y.lsb() + cu.lsb(), fmt, 1, sat))
}

/// Bit-true detector on a quantized block and channel estimate.
pub fn sandman_fixed<E: FxEvaluator>(
    ev: &mut E,
    input: &BlockInput,
    yq: &FxMatrix,
    h: &FxMatrix,
    cfg: &DetectorConfig,
    sat: &mut SatCounter,
    mut observer: Option<&mut dyn Observer>,
) -> Result<DetectionResult> {
    cfg.validate()?;
    check_dims(input, h.rows(), h.cols())?;
    let plan = cfg.formats;
    let pe = plan.pe;
    let (b, k) = (yq.rows(), yq.cols());
    let (u, p) = input.pilots.shape();
    let d = k - p;
    let lut = InvSqrtLut::new(plan.pe_plus);

    let s_p = FxMatrix::quantize_with_exp(&input.pilots, pe, 0, sat);
    let (box_m, _) = quantize_mantissa(cfg.box_radius, pe.frac_bits() as i32, pe);
    let mut s_d = match &input.s_init {
        Some(init) => FxMatrix::quantize_with_exp(init, pe, 0, sat),
        None => FxMatrix::zeros(u, d, pe, 0),
    };
    clamp_box(&mut s_d, box_m);
    let xs = prs_vector(cfg.pr_seed.unwrap_or(input.prs_seed), k);
    let x = FxMatrix::quantize_with_exp(&CMat::from_vec(k, 1, xs), pe, 0, sat);

    let yq_d = yq.columns(p, k).to_acc();
    let e_p = yq.columns(0, p).to_acc().sub(&ev.product(Step::PilotResidual, h, &s_p)?)?;

    let zero_j = FxMatrix::zeros(b, 1, pe, 0);
    let mut j = zero_j.clone();
    let mut j_live = false;
    let mut reseed = true;
    let mut tau = match cfg.step_size {
        Some(t) => FxReal::quantize_block(t, plan.pe_plus, 1, sat),
        None => FxReal {
            mant: 0,
            fmt: plan.pe_plus,
            exp: 0,
        },
    };
    let mut trace = Vec::with_capacity(cfg.t_max);
    let mut degenerate = Vec::new();

    for t in 0..cfg.t_max {
        // ① residual; the pilot part was formed once
        let e_d = yq_d.sub(&ev.product(Step::Residual, h, &s_d)?)?;
        let e = e_p.hcat(&e_d)?.normalize(pe, 1, sat);

        let mut degenerate_now = false;
        if cfg.jammer_nulling {
            // ②
            let mut jv = if reseed {
                ev.mat_vec(Step::Seed, &e, &x)?.normalize(plan.pe_plus, 1, sat)
            } else {
                j.clone()
            };
            reseed = false;
            // ③
            for _ in 0..cfg.power_iters {
                let uv = ev.mat_herm_vec(Step::PowerU, &e, &jv)?.normalize(pe, 1, sat);
                jv = ev.mat_vec(Step::PowerJ, &e, &uv)?.normalize(plan.pe_plus, 1, sat);
            }
            // ④ on the extended-precision lanes
            ev.scalar(Step::Renorm);
            let (n, nl) = jv.to_acc().energy();
            if n == 0 {
                j = zero_j.clone();
                j_live = false;
                degenerate.push(t);
                degenerate_now = true;
                reseed = true;
            } else {
                let nf = FxReal::normalize(n, nl, plan.pe_plus, 1, sat);
                let y = lut.eval(nf)?;
                j = jv.to_acc().scale(y).requantize(pe, 0, sat);
                j_live = j.mantissas().iter().any(|z| z.re != 0 || z.im != 0);
            }
        }

        if t == 0 && cfg.step_size.is_none() {
            ev.scalar(Step::StepSize);
            let (tr, trl) = h.to_acc().energy();
            if tr > 0 {
                let (mut dm, mut dl) = (tr, trl);
                if j_live {
                    let (pm, pl) = ev.mat_herm_vec(Step::StepSize, h, &j)?.energy();
                    let shift = trl - pl;
                    let diff = (tr << shift) - pm;
                    if diff > 0 {
                        (dm, dl) = (diff, pl);
                    }
                }
                tau = step_from_denominator(&lut, dm, dl, cfg.step_scale * u as f64, plan.pe_plus, sat)?;
            }
        }

        // ⑤ r = jᴴE, carried as (Eᴴj)·(1/‖j‖²)
        let v = ev.mat_herm_vec(Step::Project, &e, &j)?;
        let vc = if j_live {
            let (nj, njl) = j.to_acc().energy();
            let c = lut.reciprocal_refined(nj, njl, plan.pe_plus_acc)?;
            v.scale(c).normalize(plan.pe_plus_acc, 1, sat)
        } else {
            FxMatrix::zeros(k, 1, plan.pe_plus_acc, 0)
        };
        // ⑥
        let e_bar = ev.outer_update(Step::Update, &e, &j, &vc)?.normalize(plan.pe_acc, 1, sat);
        let (en, enl) = e_bar.to_acc().energy();
        trace.push(exact_value(en, enl));

        if let Some(obs) = observer.as_deref_mut() {
            let ortho = matmul_herm_exact(&e_bar, &j)?;
            let worst = ortho
                .raw()
                .iter()
                .map(|z| C64::new(z.re as f64, z.im as f64).norm())
                .fold(0.0, f64::max);
            obs.iteration(&IterationTrace {
                t,
                j: j.to_cmat(),
                degenerate: degenerate_now,
                orthogonality: worst * pow2(ortho.lsb()),
                residual_norm: e.to_cmat().norm(),
                ebar_lsb: Some(pow2(e_bar.lsb())),
                s: full_block(&s_p, &s_d),
                objective: trace[t],
            });
        }

        // ⑦
        let g = ev
            .product_herm(Step::Gradient, h, &e_bar.columns(p, k))?
            .normalize(plan.pe_acc, 1, sat);
        // ⑧
        ev.scalar(Step::Prox);
        let upd = s_d.to_acc().add(&g.to_acc().scale(tau))?;
        s_d = upd.requantize(pe, 0, sat);
        clamp_box(&mut s_d, box_m);
    }

    ev.scalar(Step::Llr);
    let s_hat = s_d.to_cmat();
    if let Some(obs) = observer.as_deref_mut() {
        obs.finished(&full_block(&s_p, &s_d));
    }
    let (a_m, _) = quantize_mantissa(QAM16_A, pe.frac_bits() as i32, pe);
    let a_q = a_m as f64 * pe.step();
    let llrs = llr_block(&s_hat, input.constellation, a_q, cfg.llr_scale_noise(input.n0));
    Ok(DetectionResult {
        s_hat,
        llrs,
        j_hat: j.to_cmat(),
        objective_trace: trace,
        saturation_count: sat.count(),
        degenerate_iterations: degenerate,
        step_size: tau.to_f64(),
    })
}

fn full_block(s_p: &FxMatrix, s_d: &FxMatrix) -> CMat {
    let (u, p, d) = (s_p.rows(), s_p.cols(), s_d.cols());
    CMat::from_fn(u, p + d, |r, c| if c < p { s_p.value(r, c) } else { s_d.value(r, c - p) })
}
