//! Stochastic regularized dual averaging.
//!
//! With gradient sum `S_t = Σ_{s<t} g^{(s)}` the iterate is the proximal
//! solution `w^{(t)} = −S_t/(μt + 1/η)`. It is maintained through the
//! recurrence
//!
//! ```text
//!     w^{(t+1)} = (B_t w^{(t)} − η g^{(t)}) / B_{t+1},   B_t = 1 + ημt,
//! ```
//!
//! whose floating-point operations coincide exactly with the SGD update
//! when μ = 0 (B_t ≡ 1), realizing the reduction of dual averaging to
//! constant-rate SGD bit for bit.

use alloc::vec;

use crate::error::Result;
use crate::risk::{IndexedLoss, RegularizedObjective};
use crate::rng::SplitMix64;
use crate::spectra::Spectrum;

use super::{is_finite_vec, MinibatchEstimator, OptimizerConfig, Recorder, RunRecord, RUN_STREAM};

pub fn srda_run<L: IndexedLoss>(
    obj: &RegularizedObjective<'_, L>,
    spectrum: &Spectrum,
    cfg: &OptimizerConfig,
    timer: &mut dyn FnMut() -> f64,
) -> Result<RunRecord> {
    let n = obj.n();
    let d = obj.dim();
    let warnings = cfg.validate(n)?;
    let mu = obj.mu();
    let eta = cfg.constant_rate()?;
    let mut estimator = MinibatchEstimator::new(spectrum, cfg.batch_size, n, d)?;
    let mut rng = SplitMix64::substream(cfg.seed, RUN_STREAM);
    let mut rec = Recorder::new(n, cfg.max_passes, timer);

    let mut w = vec![0.0; d];
    let mut g = vec![0.0; d];
    let mut steps: u64 = 0;
    let mut losses_buf = alloc::vec::Vec::new();

    rec.measure_if_due(0, || {
        obj.model().losses_into(&w, &mut losses_buf);
        obj.value_from_losses(&losses_buf, &w).unwrap_or(f64::INFINITY)
    });
    while !rec.finished() {
        let ok = estimator.estimate(obj.model(), &w, &mut rng, &mut g);
        rec.loss_evals += estimator.m() as u64;
        if !ok {
            rec.mark_diverged(0);
            break;
        }
        rec.grad_evals += estimator.m() as u64;
        let b_now = 1.0 + eta * mu * steps as f64;
        let b_next = 1.0 + eta * mu * (steps + 1) as f64;
        for (wi, gi) in w.iter_mut().zip(g.iter()) {
            *wi = (b_now * *wi - eta * gi) / b_next;
        }
        steps += 1;
        if !is_finite_vec(&w) {
            rec.mark_diverged(0);
            break;
        }
        rec.measure_if_due(0, || {
            obj.model().losses_into(&w, &mut losses_buf);
            obj.value_from_losses(&losses_buf, &w).unwrap_or(f64::INFINITY)
        });
    }

    Ok(RunRecord {
        config: cfg.clone(),
        warnings,
        rows: rec.rows,
        final_w: w,
        averaged_w: None,
        diverged: rec.diverged,
        grad_evals: rec.grad_evals,
        loss_evals: rec.loss_evals,
        measure_loss_evals: rec.measure_loss_evals,
        epoch_permutations: alloc::vec::Vec::new(),
    })
}
