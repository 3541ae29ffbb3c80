//! Minibatch stochastic subgradient descent on the spectral risk.
//!
//! Each iteration samples `m` indices without replacement, sorts their
//! losses, and takes the step
//! `w ← (1 − η_t μ) w − η_t Σ_j σ̂_j ∇ℓ_{i_(j)}(w)` where `σ̂` is the
//! m-bin discretization of the spectrum. The estimator is biased for
//! non-uniform spectra at `m < n`; the running iterate average is also
//! recorded since that is the object controlled by the decaying-rate
//! analysis.

use alloc::vec;

use crate::error::Result;
use crate::risk::{IndexedLoss, RegularizedObjective};
use crate::rng::SplitMix64;
use crate::spectra::Spectrum;

use super::{
    is_finite_vec, LearningRate, MinibatchEstimator, OptimizerConfig, Recorder, RunRecord,
    RUN_STREAM,
};

pub fn sgd_run<L: IndexedLoss>(
    obj: &RegularizedObjective<'_, L>,
    spectrum: &Spectrum,
    cfg: &OptimizerConfig,
    timer: &mut dyn FnMut() -> f64,
) -> Result<RunRecord> {
    let n = obj.n();
    let d = obj.dim();
    let warnings = cfg.validate(n)?;
    let mu = obj.mu();
    if matches!(cfg.learning_rate, LearningRate::InverseMuDecay) && mu <= 0.0 {
        return Err(crate::error::Error::InvalidConfig(
            "the 1/(mu t) schedule requires mu > 0".into(),
        ));
    }
    let mut estimator = MinibatchEstimator::new(spectrum, cfg.batch_size, n, d)?;
    let mut rng = SplitMix64::substream(cfg.seed, RUN_STREAM);
    let mut rec = Recorder::new(n, cfg.max_passes, timer);

    let mut w = vec![0.0; d];
    let mut v = vec![0.0; d];
    let mut avg_sum = vec![0.0; d];
    let mut steps: u64 = 0;
    let mut losses_buf = alloc::vec::Vec::new();

    rec.measure_if_due(0, || {
        obj.model().losses_into(&w, &mut losses_buf);
        obj.value_from_losses(&losses_buf, &w).unwrap_or(f64::INFINITY)
    });
    while !rec.finished() {
        for (a, wi) in avg_sum.iter_mut().zip(w.iter()) {
            *a += wi;
        }
        let ok = estimator.estimate(obj.model(), &w, &mut rng, &mut v);
        rec.loss_evals += estimator.m() as u64;
        if !ok {
            rec.mark_diverged(0);
            break;
        }
        rec.grad_evals += estimator.m() as u64;
        let eta = match cfg.learning_rate {
            LearningRate::Constant(eta) => eta,
            LearningRate::InverseMuDecay => 1.0 / (mu * (steps + 1) as f64),
        };
        let shrink = 1.0 - eta * mu;
        for (wi, vi) in w.iter_mut().zip(v.iter()) {
            *wi = shrink * *wi - eta * vi;
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

    let averaged: alloc::vec::Vec<f64> =
        avg_sum.iter().map(|a| a / (steps.max(1)) as f64).collect();
    Ok(RunRecord {
        config: cfg.clone(),
        warnings,
        rows: rec.rows,
        final_w: w,
        averaged_w: Some(averaged),
        diverged: rec.diverged,
        grad_evals: rec.grad_evals,
        loss_evals: rec.loss_evals,
        measure_loss_evals: rec.measure_loss_evals,
        epoch_permutations: alloc::vec::Vec::new(),
    })
}
