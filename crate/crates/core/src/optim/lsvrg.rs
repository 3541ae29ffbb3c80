//! LSVRG: variance-reduced minimization of the spectral risk.
//!
//! The objective is treated as the weighted finite sum
//! `Σ_i λ_i ℓ_i(w) + (μ/2)‖w‖²` with `λ_i = σ_{rank(i)}` refreshed from
//! the sorted losses every `N` steps. Between refreshes the inner loop is
//! a q-SVRG step: checkpoints `(w̄, ḡ = Σ λ_i ∇ℓ_i(w̄))` are taken at
//! every weight refresh and additionally with probability `q*` per step,
//! and the update direction is
//! `v = nλ_{i}(∇ℓ_{i}(w) − ∇ℓ_{i}(w̄)) + ḡ` for a uniformly sampled `i`.
//!
//! Three variants are provided:
//! - [`lsvrg_run`]: weights from the sorting permutation;
//! - [`lsvrg_smoothed_run`]: weights from the smoothed max-oracle
//!   (falls back to the quadratic regularizer when the entropic one is
//!   undefined for the spectrum);
//! - [`lsvrg_epoch_run`]: epoch-based variant sampling indices from the
//!   weight distribution σ itself, with unscaled gradient differences.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::risk::{argsort_losses, IndexedLoss, RegularizedObjective};
use crate::rng::SplitMix64;
use crate::smoothing::{smoothed_oracle, Regularizer, SmoothingConfig};
use crate::spectra::Spectrum;

use super::{
    fill_disagreements, is_finite_vec, OptimizerConfig, Recorder, RunRecord, RUN_STREAM,
};

enum WeightRule {
    Sorting,
    Smoothed(SmoothingConfig),
}

pub fn lsvrg_run<L: IndexedLoss>(
    obj: &RegularizedObjective<'_, L>,
    spectrum: &Spectrum,
    cfg: &OptimizerConfig,
    timer: &mut dyn FnMut() -> f64,
) -> Result<RunRecord> {
    lsvrg_inner(obj, spectrum, cfg, timer, WeightRule::Sorting, Vec::new())
}

/// LSVRG with the permutahedron max-oracle supplying the weights.
pub fn lsvrg_smoothed_run<L: IndexedLoss>(
    obj: &RegularizedObjective<'_, L>,
    spectrum: &Spectrum,
    cfg: &OptimizerConfig,
    timer: &mut dyn FnMut() -> f64,
) -> Result<RunRecord> {
    let mut warnings = Vec::new();
    let smoothing = cfg
        .smoothing
        .ok_or_else(|| Error::InvalidConfig("smoothed LSVRG requires a smoothing config".into()))?;
    let smoothing = if matches!(smoothing.regularizer(), Regularizer::EntropicCentered)
        && obj.sigma().iter().any(|&s| s <= 0.0)
    {
        warnings.push(
            "entropic smoothing undefined for zero weights; using the quadratic regularizer"
                .into(),
        );
        SmoothingConfig::quadratic(smoothing.nu())?
    } else {
        smoothing
    };
    lsvrg_inner(obj, spectrum, cfg, timer, WeightRule::Smoothed(smoothing), warnings)
}

fn lsvrg_inner<L: IndexedLoss>(
    obj: &RegularizedObjective<'_, L>,
    _spectrum: &Spectrum,
    cfg: &OptimizerConfig,
    timer: &mut dyn FnMut() -> f64,
    rule: WeightRule,
    mut warnings: Vec<alloc::string::String>,
) -> Result<RunRecord> {
    let n = obj.n();
    let d = obj.dim();
    warnings.extend(cfg.validate(n)?);
    let mu = obj.mu();
    let eta = cfg.constant_rate()?;
    let period = if cfg.epoch_length == 0 { n } else { cfg.epoch_length };
    let q_star = cfg.checkpoint_prob;
    let sigma = obj.sigma();

    let mut rng = SplitMix64::substream(cfg.seed, RUN_STREAM);
    let mut rec = Recorder::new(n, cfg.max_passes, timer);

    let mut w = vec![0.0; d];
    let mut lambda = vec![0.0; n];
    let mut checkpoint_w = vec![0.0; d];
    let mut checkpoint_g = vec![0.0; d];
    let mut grad_at_w = vec![0.0; d];
    let mut grad_at_ck = vec![0.0; d];
    let mut losses_buf = Vec::new();
    let mut perms = Vec::new();
    let mut epoch = 0usize;

    rec.measure_if_due(0, || {
        obj.model().losses_into(&w, &mut losses_buf);
        obj.value_from_losses(&losses_buf, &w).unwrap_or(f64::INFINITY)
    });
    let mut t: u64 = 0;
    'outer: while !rec.finished() {
        if t % period as u64 == 0 {
            // Weight refresh from the current losses.
            obj.model().losses_into(&w, &mut losses_buf);
            rec.loss_evals += n as u64;
            if losses_buf.iter().any(|l| !l.is_finite()) {
                rec.mark_diverged(epoch);
                break;
            }
            let pi = argsort_losses(&losses_buf)?;
            match &rule {
                WeightRule::Sorting => {
                    for (rank, &idx) in pi.rank_to_index().iter().enumerate() {
                        lambda[idx as usize] = sigma[rank];
                    }
                }
                WeightRule::Smoothed(sm) => {
                    let eval = smoothed_oracle(sm, sigma, &losses_buf)?;
                    lambda.copy_from_slice(&eval.lambda);
                }
            }
            perms.push(pi);
            epoch = perms.len() - 1;
        }
        let q_t = rng.next_f64();
        if t % period as u64 == 0 || q_t <= q_star {
            checkpoint_w.copy_from_slice(&w);
            checkpoint_g.fill(0.0);
            for i in 0..n {
                obj.model().loss_grad(i, &checkpoint_w, &mut grad_at_ck);
                let li = lambda[i];
                if li != 0.0 {
                    for (g, s) in checkpoint_g.iter_mut().zip(grad_at_ck.iter()) {
                        *g += li * s;
                    }
                }
            }
            rec.grad_evals += n as u64;
            rec.measure_if_due(epoch, || {
                obj.model().losses_into(&w, &mut losses_buf);
                obj.value_from_losses(&losses_buf, &w).unwrap_or(f64::INFINITY)
            });
            if rec.finished() {
                break 'outer;
            }
        }
        let i_t = rng.below(n);
        obj.model().loss_grad(i_t, &w, &mut grad_at_w);
        obj.model().loss_grad(i_t, &checkpoint_w, &mut grad_at_ck);
        rec.grad_evals += 2;
        let scale = n as f64 * lambda[i_t];
        let shrink = 1.0 - eta * mu;
        for j in 0..d {
            let v = scale * (grad_at_w[j] - grad_at_ck[j]) + checkpoint_g[j];
            w[j] = shrink * w[j] - eta * v;
        }
        t += 1;
        if !is_finite_vec(&w) {
            rec.mark_diverged(epoch);
            break;
        }
        rec.measure_if_due(epoch, || {
            obj.model().losses_into(&w, &mut losses_buf);
            obj.value_from_losses(&losses_buf, &w).unwrap_or(f64::INFINITY)
        });
    }

    let row_epochs = rec.row_epochs.clone();
    let mut record = RunRecord {
        config: cfg.clone(),
        warnings,
        rows: rec.rows,
        final_w: w,
        averaged_w: None,
        diverged: rec.diverged,
        grad_evals: rec.grad_evals,
        loss_evals: rec.loss_evals,
        measure_loss_evals: rec.measure_loss_evals,
        epoch_permutations: perms,
    };
    fill_disagreements(&mut record, &row_epochs);
    Ok(record)
}

/// Epoch-based LSVRG with nonuniform sampling: indices are drawn from the
/// categorical distribution σ and gradient differences enter unscaled,
/// `v = ∇ℓ_{π(i)}(w) − ∇ℓ_{π(i)}(w̄) + ḡ`.
pub fn lsvrg_epoch_run<L: IndexedLoss>(
    obj: &RegularizedObjective<'_, L>,
    _spectrum: &Spectrum,
    cfg: &OptimizerConfig,
    timer: &mut dyn FnMut() -> f64,
) -> Result<RunRecord> {
    let n = obj.n();
    let d = obj.dim();
    let warnings = cfg.validate(n)?;
    let mu = obj.mu();
    let eta = cfg.constant_rate()?;
    let period = if cfg.epoch_length == 0 { n } else { cfg.epoch_length };
    let sigma = obj.sigma();
    let mut cumulative = Vec::with_capacity(n);
    let mut acc = 0.0;
    for &s in sigma.iter() {
        acc += s;
        cumulative.push(acc);
    }

    let mut rng = SplitMix64::substream(cfg.seed, RUN_STREAM);
    let mut rec = Recorder::new(n, cfg.max_passes, timer);

    let mut w = vec![0.0; d];
    let mut checkpoint_w = vec![0.0; d];
    let mut checkpoint_g = vec![0.0; d];
    let mut grad_at_w = vec![0.0; d];
    let mut grad_at_ck = vec![0.0; d];
    let mut losses_buf = Vec::new();
    let mut perms = Vec::new();
    let mut rank_to_index: Vec<u32> = Vec::new();

    rec.measure_if_due(0, || {
        obj.model().losses_into(&w, &mut losses_buf);
        obj.value_from_losses(&losses_buf, &w).unwrap_or(f64::INFINITY)
    });
    'outer: while !rec.finished() {
        // Start of epoch: sort at the checkpoint, full weighted gradient.
        checkpoint_w.copy_from_slice(&w);
        obj.model().losses_into(&checkpoint_w, &mut losses_buf);
        rec.loss_evals += n as u64;
        if losses_buf.iter().any(|l| !l.is_finite()) {
            let epoch = perms.len().saturating_sub(1);
            rec.mark_diverged(epoch);
            break;
        }
        let pi = argsort_losses(&losses_buf)?;
        rank_to_index.clear();
        rank_to_index.extend_from_slice(pi.rank_to_index());
        perms.push(pi);
        let epoch = perms.len() - 1;
        checkpoint_g.fill(0.0);
        for rank in 0..n {
            let idx = rank_to_index[rank] as usize;
            obj.model().loss_grad(idx, &checkpoint_w, &mut grad_at_ck);
            let s = sigma[rank];
            if s != 0.0 {
                for (g, gi) in checkpoint_g.iter_mut().zip(grad_at_ck.iter()) {
                    *g += s * gi;
                }
            }
        }
        rec.grad_evals += n as u64;
        rec.measure_if_due(epoch, || {
            obj.model().losses_into(&w, &mut losses_buf);
            obj.value_from_losses(&losses_buf, &w).unwrap_or(f64::INFINITY)
        });
        if rec.finished() {
            break 'outer;
        }
        for _ in 0..period {
            let rank = rng.categorical(&cumulative);
            let idx = rank_to_index[rank] as usize;
            obj.model().loss_grad(idx, &w, &mut grad_at_w);
            obj.model().loss_grad(idx, &checkpoint_w, &mut grad_at_ck);
            rec.grad_evals += 2;
            let shrink = 1.0 - eta * mu;
            for j in 0..d {
                let v = grad_at_w[j] - grad_at_ck[j] + checkpoint_g[j];
                w[j] = shrink * w[j] - eta * v;
            }
            if !is_finite_vec(&w) {
                rec.mark_diverged(epoch);
                break 'outer;
            }
            rec.measure_if_due(epoch, || {
                obj.model().losses_into(&w, &mut losses_buf);
                obj.value_from_losses(&losses_buf, &w).unwrap_or(f64::INFINITY)
            });
            if rec.finished() {
                break 'outer;
            }
        }
    }

    let row_epochs = rec.row_epochs.clone();
    let mut record = RunRecord {
        config: cfg.clone(),
        warnings,
        rows: rec.rows,
        final_w: w,
        averaged_w: None,
        diverged: rec.diverged,
        grad_evals: rec.grad_evals,
        loss_evals: rec.loss_evals,
        measure_loss_evals: rec.measure_loss_evals,
        epoch_permutations: perms,
    };
    fill_disagreements(&mut record, &row_epochs);
    Ok(record)
}
