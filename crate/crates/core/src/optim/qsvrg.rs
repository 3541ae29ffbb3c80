//! q-SVRG: SVRG with probabilistic checkpoint refresh on a plain finite
//! sum. Each component is the loss plus the full `ℓ2` term, so every
//! component is μ-strongly convex and the theoretical rate applies with
//! `η = 2/(8L + nμ)` and `q* = 1/n`.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::Result;
use crate::risk::{IndexedLoss, RegularizedObjective};
use crate::rng::SplitMix64;
use crate::spectra::Spectrum;

use super::{is_finite_vec, OptimizerConfig, Recorder, RunRecord, RUN_STREAM};

/// Final iterate plus snapshots at the requested step counts.
#[derive(Debug, Clone)]
pub struct QsvrgOutput {
    pub final_w: Vec<f64>,
    pub snapshots: Vec<Vec<f64>>,
}

/// Runs `steps` iterations of q-SVRG on `f(w) = (1/n) Σ_i [ℓ_i(w) +
/// (μ/2)‖w‖²]` from `w0`, snapshotting the iterate after each step count
/// listed in `snapshot_at` (which must be sorted ascending).
pub fn qsvrg_run<L: IndexedLoss>(
    model: &L,
    mu: f64,
    eta: f64,
    q_star: f64,
    steps: u64,
    seed: u64,
    snapshot_at: &[u64],
    w0: &[f64],
) -> Result<QsvrgOutput> {
    let n = model.n_components();
    let d = model.dim();
    let mut rng = SplitMix64::substream(seed, RUN_STREAM);
    let mut w = w0.to_vec();
    let mut checkpoint_w = w.clone();
    let mut checkpoint_g = vec![0.0; d];
    let mut grad_a = vec![0.0; d];
    let mut grad_b = vec![0.0; d];
    let mut snapshots = Vec::with_capacity(snapshot_at.len());
    let mut next_snap = snapshot_at.iter().copied().peekable();

    full_gradient(model, mu, &checkpoint_w, &mut checkpoint_g, &mut grad_a);
    for t in 0..steps {
        let q_t = rng.next_f64();
        if q_t <= q_star {
            checkpoint_w.copy_from_slice(&w);
            full_gradient(model, mu, &checkpoint_w, &mut checkpoint_g, &mut grad_a);
        }
        let i_t = rng.below(n);
        model.loss_grad(i_t, &w, &mut grad_a);
        model.loss_grad(i_t, &checkpoint_w, &mut grad_b);
        for j in 0..d {
            let v = (grad_a[j] + mu * w[j]) - (grad_b[j] + mu * checkpoint_w[j]) + checkpoint_g[j];
            w[j] -= eta * v;
        }
        while next_snap.peek() == Some(&(t + 1)) {
            snapshots.push(w.clone());
            next_snap.next();
        }
    }
    Ok(QsvrgOutput { final_w: w, snapshots })
}

fn full_gradient<L: IndexedLoss>(
    model: &L,
    mu: f64,
    w: &[f64],
    out: &mut [f64],
    scratch: &mut [f64],
) {
    let n = model.n_components();
    out.fill(0.0);
    for i in 0..n {
        model.loss_grad(i, w, scratch);
        for (o, s) in out.iter_mut().zip(scratch.iter()) {
            *o += s / n as f64;
        }
    }
    for (o, wi) in out.iter_mut().zip(w.iter()) {
        *o += mu * wi;
    }
}

/// Config-driven wrapper so q-SVRG participates in the common dispatch.
/// The spectrum is ignored (the method optimizes the mean objective);
/// measurements still report the configured spectral objective.
pub(super) fn qsvrg_cfg_run<L: IndexedLoss>(
    obj: &RegularizedObjective<'_, L>,
    spectrum: &Spectrum,
    cfg: &OptimizerConfig,
    timer: &mut dyn FnMut() -> f64,
) -> Result<RunRecord> {
    let n = obj.n();
    let d = obj.dim();
    let mut warnings = cfg.validate(n)?;
    if !matches!(spectrum.kind(), crate::spectra::SpectrumKind::Uniform) {
        warnings.push("qsvrg optimizes the mean objective; spectrum ignored".into());
    }
    let mu = obj.mu();
    let eta = cfg.constant_rate()?;
    let q_star = cfg.checkpoint_prob;
    let mut rng = SplitMix64::substream(cfg.seed, RUN_STREAM);
    let mut rec = Recorder::new(n, cfg.max_passes, timer);
    let mut w = vec![0.0; d];
    let mut checkpoint_w = w.clone();
    let mut checkpoint_g = vec![0.0; d];
    let mut grad_a = vec![0.0; d];
    let mut grad_b = vec![0.0; d];
    let mut losses_buf = Vec::new();

    rec.measure_if_due(0, || {
        obj.model().losses_into(&w, &mut losses_buf);
        obj.value_from_losses(&losses_buf, &w).unwrap_or(f64::INFINITY)
    });
    full_gradient(obj.model(), mu, &checkpoint_w, &mut checkpoint_g, &mut grad_a);
    rec.grad_evals += n as u64;
    while !rec.finished() {
        let q_t = rng.next_f64();
        if q_t <= q_star {
            checkpoint_w.copy_from_slice(&w);
            full_gradient(obj.model(), mu, &checkpoint_w, &mut checkpoint_g, &mut grad_a);
            rec.grad_evals += n as u64;
        }
        let i_t = rng.below(n);
        obj.model().loss_grad(i_t, &w, &mut grad_a);
        obj.model().loss_grad(i_t, &checkpoint_w, &mut grad_b);
        rec.grad_evals += 2;
        for j in 0..d {
            let v = (grad_a[j] + mu * w[j]) - (grad_b[j] + mu * checkpoint_w[j]) + checkpoint_g[j];
            w[j] -= eta * v;
        }
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
        epoch_permutations: Vec::new(),
    })
}
