//! Double-precision reference of the detector.

use nalgebra::DMatrix;

use super::{llr_block, prox_box, prs_vector, BlockInput, DetectionResult, DetectorConfig, IterationTrace, Observer};
use crate::airlink::QAM16_A;
use crate::{CMat, Error, Result, C64};

/// Step size `c·U / (tr(ĤᴴĤ) − ‖jᴴĤ‖²)`. The jammer-projected trace falls
/// back to the plain trace when `j` is zero or the difference is not
/// positive.
pub fn derived_step_size(h_hat: &CMat, j: Option<&CMat>, scale: f64) -> f64 {
    let tr = h_hat.norm_squared();
    if tr <= 0.0 {
        return 0.0;
    }
    let mut denom = tr;
    if let Some(j) = j {
        let p = (j.adjoint() * h_hat).norm_squared();
        if tr - p > 0.0 {
            denom = tr - p;
        }
    }
    scale * h_hat.ncols() as f64 / denom
}

pub(crate) fn check_dims(input: &BlockInput, h_rows: usize, h_cols: usize) -> Result<()> {
    let (b, k) = input.y.shape();
    let (u, p) = input.pilots.shape();
    if h_rows != b || h_cols != u {
        return Err(Error::Dimension(format!("channel estimate {h_rows}x{h_cols} for a {b}x{k} block with {u} users")));
    }
    if p >= k {
        return Err(Error::Dimension(format!("{p} pilots leave no data in a {k}-symbol block")));
    }
    if let Some(s) = &input.s_init {
        if s.shape() != (u, k - p) {
            return Err(Error::Dimension("initial data estimate shape".into()));
        }
    }
    Ok(())
}

/// Float detector on a given channel estimate.
pub fn sandman_float(
    input: &BlockInput,
    h_hat: &CMat,
    cfg: &DetectorConfig,
    mut observer: Option<&mut dyn Observer>,
) -> Result<DetectionResult> {
    cfg.validate()?;
    check_dims(input, h_hat.nrows(), h_hat.ncols())?;
    let y = &input.y;
    let (b, k) = y.shape();
    let (u, p) = input.pilots.shape();
    let d = k - p;
    let zero = C64::new(0.0, 0.0);

    let mut s = DMatrix::from_element(u, k, zero);
    s.columns_mut(0, p).copy_from(&input.pilots);
    if let Some(init) = &input.s_init {
        s.columns_mut(p, d).copy_from(init);
    }
    let x = CMat::from_vec(k, 1, prs_vector(cfg.pr_seed.unwrap_or(input.prs_seed), k));
    let hh = h_hat.adjoint();

    let mut j = CMat::zeros(b, 1);
    let mut reseed = true;
    let mut tau = cfg.step_size.unwrap_or(0.0);
    let mut trace = Vec::with_capacity(cfg.t_max);
    let mut degenerate = Vec::new();

    for t in 0..cfg.t_max {
        // ① residual
        let e = y - h_hat * &s;
        let mut degenerate_now = false;
        if cfg.jammer_nulling {
            // ② seed the jammer direction
            let mut jv = if reseed { &e * &x } else { j.clone() };
            reseed = false;
            // ③ power iteration
            for _ in 0..cfg.power_iters {
                let uv = e.adjoint() * &jv;
                jv = &e * uv;
            }
            // ④ renormalization
            let n = jv.norm_squared();
            if n > 0.0 && n.is_finite() {
                j = jv / C64::new(n.sqrt(), 0.0);
            } else {
                j = CMat::zeros(b, 1);
                degenerate.push(t);
                degenerate_now = true;
                reseed = true;
            }
        }
        if t == 0 && cfg.step_size.is_none() {
            let jref = (cfg.jammer_nulling && !degenerate_now).then_some(&j);
            tau = derived_step_size(h_hat, jref, cfg.step_scale);
        }
        // ⑤ projection coefficients and ⑥ nulling
        let r = j.adjoint() * &e;
        let e_bar = &e - &j * &r;
        trace.push(e_bar.norm_squared());
        if let Some(obs) = observer.as_deref_mut() {
            let orth = (j.adjoint() * &e_bar).iter().map(|z| z.norm()).fold(0.0, f64::max);
            obs.iteration(&IterationTrace {
                t,
                j: j.clone(),
                degenerate: degenerate_now,
                orthogonality: orth,
                residual_norm: e.norm(),
                ebar_lsb: None,
                s: s.clone(),
                objective: trace[t],
            });
        }
        // ⑦ gradient and ⑧ box-constrained update of the data columns
        let g = &hh * e_bar.columns(p, d);
        for c in 0..d {
            for r in 0..u {
                s[(r, p + c)] = prox_box(s[(r, p + c)] + g[(r, c)] * tau, cfg.box_radius);
            }
        }
    }

    if let Some(obs) = observer.as_deref_mut() {
        obs.finished(&s);
    }
    let s_hat = s.columns(p, d).into_owned();
    let n0_post = cfg.llr_scale_noise(input.n0);
    let llrs = llr_block(&s_hat, input.constellation, QAM16_A, n0_post);
    Ok(DetectionResult {
        s_hat,
        llrs,
        j_hat: j,
        objective_trace: trace,
        saturation_count: 0,
        degenerate_iterations: degenerate,
        step_size: tau,
    })
}
