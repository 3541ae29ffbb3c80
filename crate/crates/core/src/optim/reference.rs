//! High-accuracy reference solver.
//!
//! Minimizes a quadratically smoothed surrogate by full-batch gradient
//! descent with backtracking line search, continuing through a homotopy
//! of decreasing smoothing coefficients down to `ν = 10⁻⁶·n`, then
//! polishes on the non-smooth objective with line-searched full-batch
//! subgradient steps, keeping the best value seen. Quality is certified
//! downstream by the requirement that the reference value dominate every
//! iterate any algorithm produces.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::fmath;
use crate::risk::{IndexedLoss, RegularizedObjective};
use crate::smoothing::{smoothed_oracle, SmoothingConfig};
use crate::spectra::Spectrum;

use super::{OptimizerConfig, RunRecord};

const MAX_STAGE_ITERS: usize = 20_000;
const POLISH_ITERS: usize = 500;

/// Default gradient-norm tolerance for the smoothed phase.
pub const DEFAULT_TOLERANCE: f64 = 1e-10;

pub fn reference_solve<L: IndexedLoss>(
    obj: &RegularizedObjective<'_, L>,
    tolerance: f64,
) -> Result<Vec<f64>> {
    if obj.mu() <= 0.0 {
        return Err(Error::InvalidConfig("the reference solver requires mu > 0".into()));
    }
    let n = obj.n();
    let d = obj.dim();
    let mu = obj.mu();

    let mut w = vec![0.0; d];
    let mut grad = vec![0.0; d];
    let mut grad_norm = f64::INFINITY;
    let mut hit_iteration_cap = false;
    for stage in [1e-2, 1e-4, 1e-6] {
        let smoothing = SmoothingConfig::quadratic(stage * n as f64)?;
        let value_and_grad = |w: &[f64], grad: &mut [f64]| -> Result<f64> {
            let losses = obj.losses(w);
            let eval = smoothed_oracle(&smoothing, obj.sigma(), &losses)?;
            grad.fill(0.0);
            let mut scratch = vec![0.0; d];
            for (i, &lam) in eval.lambda.iter().enumerate() {
                if lam != 0.0 {
                    obj.model().loss_grad(i, w, &mut scratch);
                    for (g, s) in grad.iter_mut().zip(scratch.iter()) {
                        *g += lam * s;
                    }
                }
            }
            let mut sq = 0.0;
            for (g, wi) in grad.iter_mut().zip(w.iter()) {
                *g += mu * wi;
                sq += wi * wi;
            }
            Ok(eval.value + 0.5 * mu * sq)
        };
        let mut value = value_and_grad(&w, &mut grad)?;
        let mut step = 1.0;
        let mut candidate = vec![0.0; d];
        let mut window_value = value;
        hit_iteration_cap = true;
        for iter in 0..MAX_STAGE_ITERS {
            let grad_sq: f64 = grad.iter().map(|g| g * g).sum();
            grad_norm = fmath::sqrt(grad_sq);
            if grad_norm <= tolerance {
                hit_iteration_cap = false;
                break;
            }
            // Near a kink of the surrogate the gradient stays sizable
            // while accepted steps shrink to nothing; stagnation over a
            // window is the floor there, and the polish phase takes over.
            if iter % 50 == 49 {
                if window_value - value <= 1e-14 * (1.0 + value.abs()) {
                    hit_iteration_cap = false;
                    break;
                }
                window_value = value;
            }
            let mut accepted = false;
            for _ in 0..60 {
                for j in 0..d {
                    candidate[j] = w[j] - step * grad[j];
                }
                let mut cand_grad = vec![0.0; d];
                let cand_value = value_and_grad(&candidate, &mut cand_grad)?;
                if cand_value <= value - 1e-4 * step * grad_sq {
                    w.copy_from_slice(&candidate);
                    grad = cand_grad;
                    value = cand_value;
                    step = (step * 2.0).min(1e6);
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            if !accepted {
                hit_iteration_cap = false;
                break;
            }
        }
    }

    // Polish on the non-smooth objective: backtracking subgradient steps,
    // keeping the best value seen.
    let mut best_w = w.clone();
    let mut best_value = obj.value(&w)?;
    let mut pw = w;
    let mut pv = best_value;
    let mut step = 1.0;
    let mut candidate = vec![0.0; d];
    for _ in 0..POLISH_ITERS {
        let g = obj.subgradient(&pw)?;
        let mut improved = false;
        for _ in 0..50 {
            for j in 0..d {
                candidate[j] = pw[j] - step * g[j];
            }
            let cv = obj.value(&candidate)?;
            if cv < pv {
                pw.copy_from_slice(&candidate);
                pv = cv;
                step *= 2.0;
                improved = true;
                break;
            }
            step *= 0.5;
        }
        if pv < best_value {
            best_value = pv;
            best_w.copy_from_slice(&pw);
        }
        if !improved {
            break;
        }
    }

    // Exhausting the final stage's iteration budget while still making
    // line-search progress means the surrogate was never solved; surface
    // it with the best iterate attached.
    if hit_iteration_cap {
        return Err(Error::ReferenceNotConverged { best: best_w, value: best_value, grad_norm });
    }
    Ok(best_w)
}

/// Dispatch wrapper: solves to the default tolerance and wraps the
/// solution in a single-row record.
pub(super) fn reference_cfg_run<L: IndexedLoss>(
    obj: &RegularizedObjective<'_, L>,
    _spectrum: &Spectrum,
    cfg: &OptimizerConfig,
    timer: &mut dyn FnMut() -> f64,
) -> Result<RunRecord> {
    let warnings = cfg.validate(obj.n())?;
    let w = reference_solve(obj, DEFAULT_TOLERANCE)?;
    let value = obj.value(&w)?;
    let row = super::MeasurementRow {
        pass: 0.0,
        objective: value,
        gap: None,
        elapsed_s: timer(),
        perm_disagreement: None,
    };
    Ok(RunRecord {
        config: cfg.clone(),
        warnings,
        rows: vec![row],
        final_w: w,
        averaged_w: None,
        diverged: false,
        grad_evals: 0,
        loss_evals: 0,
        measure_loss_evals: 0,
        epoch_permutations: Vec::new(),
    })
}
