//! Stochastic optimizers for the regularized spectral risk objective.
//!
//! All runs start from `w = 0`, draw randomness from a single
//! [`SplitMix64`](crate::rng::SplitMix64) substream of the configured
//! seed, and measure the full training objective once per effective pass
//! (`n` gradient evaluations). Identical configurations therefore produce
//! bit-identical records.

mod lsvrg;
mod qsvrg;
mod reference;
mod sgd;
mod srda;

pub use lsvrg::{lsvrg_epoch_run, lsvrg_run, lsvrg_smoothed_run};
pub use qsvrg::{qsvrg_run, QsvrgOutput};
pub use reference::reference_solve;
pub use sgd::sgd_run;
pub use srda::srda_run;

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::risk::{IndexedLoss, RegularizedObjective, SortPermutation};
use crate::rng::SplitMix64;
use crate::smoothing::SmoothingConfig;
use crate::spectra::{SigmaWeights, Spectrum};

/// Stream id shared by every optimizer so that algorithms consuming the
/// same estimator see the same sample sequence for a given seed.
const RUN_STREAM: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    Sgd,
    Srda,
    LsvrgUniform,
    LsvrgSmoothed,
    LsvrgEpochNonuniform,
    QSvrg,
    ReferenceFullBatch,
}

impl Algorithm {
    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Sgd => "sgd",
            Algorithm::Srda => "srda",
            Algorithm::LsvrgUniform => "lsvrg",
            Algorithm::LsvrgSmoothed => "lsvrg_smooth",
            Algorithm::LsvrgEpochNonuniform => "lsvrg_epoch",
            Algorithm::QSvrg => "qsvrg",
            Algorithm::ReferenceFullBatch => "reference",
        }
    }
}

/// Step-size schedule. `InverseMuDecay` is `η_t = 1/(μ(t+1))`, defined
/// for strongly convex objectives (μ > 0).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LearningRate {
    Constant(f64),
    InverseMuDecay,
}

/// Optimizer configuration. Fields not used by the chosen algorithm are
/// left at their neutral values (0 / None); setting them anyway is
/// reported as a warning in the run record.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerConfig {
    pub algorithm: Algorithm,
    pub learning_rate: LearningRate,
    /// Minibatch size for SGD/SRDA (0 = unset).
    pub batch_size: usize,
    /// Sorting/checkpoint period for LSVRG variants (0 = dataset size).
    pub epoch_length: usize,
    /// Per-step checkpoint refresh probability `q*`.
    pub checkpoint_prob: f64,
    pub smoothing: Option<SmoothingConfig>,
    pub seed: u64,
    pub max_passes: usize,
}

impl OptimizerConfig {
    pub fn new(algorithm: Algorithm, learning_rate: LearningRate, seed: u64, max_passes: usize) -> Self {
        Self {
            algorithm,
            learning_rate,
            batch_size: 0,
            epoch_length: 0,
            checkpoint_prob: 0.0,
            smoothing: None,
            seed,
            max_passes,
        }
    }

    pub fn with_batch_size(mut self, m: usize) -> Self {
        self.batch_size = m;
        self
    }

    pub fn with_epoch_length(mut self, n: usize) -> Self {
        self.epoch_length = n;
        self
    }

    pub fn with_checkpoint_prob(mut self, q: f64) -> Self {
        self.checkpoint_prob = q;
        self
    }

    pub fn with_smoothing(mut self, s: SmoothingConfig) -> Self {
        self.smoothing = Some(s);
        self
    }

    /// Basic invariants plus warnings about fields the algorithm ignores.
    pub(crate) fn validate(&self, n: usize) -> Result<Vec<String>> {
        if self.max_passes == 0 {
            return Err(Error::InvalidConfig("max_passes must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.checkpoint_prob) {
            return Err(Error::InvalidConfig(format!(
                "checkpoint_prob {} outside [0,1]",
                self.checkpoint_prob
            )));
        }
        if let LearningRate::Constant(eta) = self.learning_rate {
            if !(eta > 0.0) || !eta.is_finite() {
                return Err(Error::InvalidConfig(format!("learning rate {eta} must be positive")));
            }
        }
        if self.batch_size > n {
            return Err(Error::InvalidConfig(format!(
                "batch_size {} exceeds dataset size {n}",
                self.batch_size
            )));
        }
        let mut warnings = Vec::new();
        let uses_batch = matches!(self.algorithm, Algorithm::Sgd | Algorithm::Srda);
        let uses_epoch = matches!(
            self.algorithm,
            Algorithm::LsvrgUniform | Algorithm::LsvrgSmoothed | Algorithm::LsvrgEpochNonuniform
        );
        let uses_qstar = matches!(
            self.algorithm,
            Algorithm::LsvrgUniform | Algorithm::LsvrgSmoothed | Algorithm::QSvrg
        );
        let uses_smoothing = matches!(self.algorithm, Algorithm::LsvrgSmoothed);
        if !uses_batch && self.batch_size != 0 {
            warnings.push(format!("{}: batch_size ignored", self.algorithm.name()));
        }
        if uses_batch && self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size required".into()));
        }
        if !uses_epoch && self.epoch_length != 0 {
            warnings.push(format!("{}: epoch_length ignored", self.algorithm.name()));
        }
        if !uses_qstar && self.checkpoint_prob != 0.0 {
            warnings.push(format!("{}: checkpoint_prob ignored", self.algorithm.name()));
        }
        if !uses_smoothing && self.smoothing.is_some() {
            warnings.push(format!("{}: smoothing ignored", self.algorithm.name()));
        }
        if uses_smoothing && self.smoothing.is_none() {
            return Err(Error::InvalidConfig("smoothed LSVRG requires a smoothing config".into()));
        }
        Ok(warnings)
    }

    pub(crate) fn constant_rate(&self) -> Result<f64> {
        match self.learning_rate {
            LearningRate::Constant(eta) => Ok(eta),
            LearningRate::InverseMuDecay => Err(Error::InvalidConfig(
                "this algorithm requires a constant learning rate".into(),
            )),
        }
    }
}

/// The conservative theoretical parameterization of smoothed LSVRG for
/// an `L`-smooth, `G`-Lipschitz problem: smoothing `ν = 4nG²/μ`, epoch
/// length `N = 4(n + 8κ)`, and step size `η = 2/((n + 8κ)μ)`, where
/// `κ = nσ_max L/μ + 1`. Far more conservative than the practical
/// `N = n`, `q* = 0` defaults, but exposed for completeness.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoreticalPreset {
    pub nu: f64,
    pub epoch_length: usize,
    pub eta: f64,
    pub kappa: f64,
}

pub fn theoretical_lsvrg_preset(
    n: usize,
    sigma_max: f64,
    lipschitz: f64,
    smoothness: f64,
    mu: f64,
) -> TheoreticalPreset {
    let kappa = n as f64 * sigma_max * smoothness / mu + 1.0;
    TheoreticalPreset {
        nu: 4.0 * n as f64 * lipschitz * lipschitz / mu,
        epoch_length: (4.0 * (n as f64 + 8.0 * kappa)).ceil() as usize,
        eta: 2.0 / ((n as f64 + 8.0 * kappa) * mu),
        kappa,
    }
}

/// One objective measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementRow {
    /// Cumulative gradient evaluations divided by the dataset size.
    pub pass: f64,
    /// Regularized training objective at the current iterate.
    pub objective: f64,
    /// Normalized suboptimality, filled by the harness once a reference
    /// value is known.
    pub gap: Option<f64>,
    /// Wall-clock seconds since the run started (informational).
    pub elapsed_s: f64,
    /// Sorting disagreement of the current epoch permutation against the
    /// final one (LSVRG variants).
    pub perm_disagreement: Option<usize>,
}

/// Full trajectory of one optimizer run.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub config: OptimizerConfig,
    pub warnings: Vec<String>,
    pub rows: Vec<MeasurementRow>,
    pub final_w: Vec<f64>,
    /// Running average of iterates (SGD only; the object bounded by the
    /// averaged-iterate analysis).
    pub averaged_w: Option<Vec<f64>>,
    pub diverged: bool,
    /// Gradient-oracle calls made by the algorithm.
    pub grad_evals: u64,
    /// Loss-only oracle calls made by the algorithm (sorting, weights).
    pub loss_evals: u64,
    /// Loss calls spent measuring the objective (not part of the
    /// algorithm's pass accounting).
    pub measure_loss_evals: u64,
    /// Sorting permutations recorded at each weight update (LSVRG).
    pub epoch_permutations: Vec<SortPermutation>,
}

impl RunRecord {
    /// Objective value of the last measurement.
    pub fn final_objective(&self) -> f64 {
        self.rows.last().map_or(f64::INFINITY, |r| r.objective)
    }
}

/// Shared measurement bookkeeping: counts oracle calls and triggers one
/// objective evaluation per effective pass.
pub(crate) struct Recorder<'t> {
    n: u64,
    max_evals: u64,
    next_measure: u64,
    pub grad_evals: u64,
    pub loss_evals: u64,
    pub measure_loss_evals: u64,
    pub rows: Vec<MeasurementRow>,
    pub row_epochs: Vec<usize>,
    pub diverged: bool,
    timer: &'t mut dyn FnMut() -> f64,
}

impl<'t> Recorder<'t> {
    pub fn new(n: usize, max_passes: usize, timer: &'t mut dyn FnMut() -> f64) -> Self {
        Self {
            n: n as u64,
            max_evals: n as u64 * max_passes as u64,
            next_measure: 0,
            grad_evals: 0,
            loss_evals: 0,
            measure_loss_evals: 0,
            rows: Vec::new(),
            row_epochs: Vec::new(),
            diverged: false,
            timer,
        }
    }

    pub fn pass(&self) -> f64 {
        self.grad_evals as f64 / self.n as f64
    }

    pub fn finished(&self) -> bool {
        self.diverged || self.grad_evals >= self.max_evals
    }

    pub fn due(&self) -> bool {
        !self.diverged && self.grad_evals >= self.next_measure
    }

    /// Records a measurement if a pass boundary has been crossed.
    pub fn measure_if_due<F: FnMut() -> f64>(&mut self, epoch: usize, mut objective: F) {
        while self.due() {
            let value = objective();
            self.measure_loss_evals += self.n;
            let elapsed = (self.timer)();
            self.rows.push(MeasurementRow {
                pass: self.pass(),
                objective: value,
                gap: None,
                elapsed_s: elapsed,
                perm_disagreement: None,
            });
            self.row_epochs.push(epoch);
            // Next boundary strictly after the current eval count.
            self.next_measure = (self.grad_evals / self.n + 1) * self.n;
        }
    }

    /// Divergence: record a final +∞ row and stop the run.
    pub fn mark_diverged(&mut self, epoch: usize) {
        self.diverged = true;
        let elapsed = (self.timer)();
        self.rows.push(MeasurementRow {
            pass: self.pass(),
            objective: f64::INFINITY,
            gap: None,
            elapsed_s: elapsed,
            perm_disagreement: None,
        });
        self.row_epochs.push(epoch);
    }
}

pub(crate) fn is_finite_vec(w: &[f64]) -> bool {
    w.iter().all(|x| x.is_finite())
}

/// Fills per-row sorting disagreements against the final epoch
/// permutation.
pub(crate) fn fill_disagreements(record: &mut RunRecord, row_epochs: &[usize]) {
    let Some(last) = record.epoch_permutations.last() else {
        return;
    };
    let final_ranks = last.index_to_rank();
    let counts: Vec<usize> = record
        .epoch_permutations
        .iter()
        .map(|p| {
            p.index_to_rank()
                .iter()
                .zip(final_ranks.iter())
                .filter(|(a, b)| a != b)
                .count()
        })
        .collect();
    for (row, &e) in record.rows.iter_mut().zip(row_epochs.iter()) {
        row.perm_disagreement = counts.get(e).copied();
    }
}

/// The Alg-1 minibatch subgradient estimator: sample `m` indices without
/// replacement, sort their losses, and weight the sorted gradients by the
/// m-bin discretization of the spectrum.
pub(crate) struct MinibatchEstimator {
    sigma_hat: SigmaWeights,
    pool: Vec<usize>,
    m: usize,
    batch: Vec<(f64, usize)>,
    scratch: Vec<f64>,
}

impl MinibatchEstimator {
    pub fn new(spectrum: &Spectrum, m: usize, n: usize, dim: usize) -> Result<Self> {
        if m == 0 || m > n {
            return Err(Error::InvalidConfig(format!("batch size {m} outside 1..={n}")));
        }
        Ok(Self {
            sigma_hat: spectrum.discretize(m)?,
            pool: (0..n).collect(),
            m,
            batch: Vec::with_capacity(m),
            scratch: vec![0.0; dim],
        })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Writes `Σ_j σ̂_j ∇ℓ_{i_(j)}(w)` into `out` (no regularizer term).
    /// Costs `m` loss and `m` gradient evaluations. Returns `false` when
    /// a sampled loss is non-finite (the run has diverged).
    pub fn estimate<L: IndexedLoss + ?Sized>(
        &mut self,
        model: &L,
        w: &[f64],
        rng: &mut SplitMix64,
        out: &mut [f64],
    ) -> bool {
        rng.sample_without_replacement(&mut self.pool, self.m);
        self.batch.clear();
        for &i in &self.pool[..self.m] {
            let loss = model.loss(i, w);
            if !loss.is_finite() {
                return false;
            }
            self.batch.push((loss, i));
        }
        self.batch
            .sort_unstable_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        out.fill(0.0);
        for (j, &(_, i)) in self.batch.iter().enumerate() {
            let weight = self.sigma_hat[j];
            model.loss_grad(i, w, &mut self.scratch);
            if weight == 0.0 {
                continue;
            }
            for (o, s) in out.iter_mut().zip(self.scratch.iter()) {
                *o += weight * s;
            }
        }
        true
    }
}

/// Runs the configured algorithm. `timer` supplies elapsed seconds for
/// the informational timing column; pass `|| 0.0` for deterministic
/// records.
pub fn run<L: IndexedLoss>(
    obj: &RegularizedObjective<'_, L>,
    spectrum: &Spectrum,
    cfg: &OptimizerConfig,
    timer: &mut dyn FnMut() -> f64,
) -> Result<RunRecord> {
    match cfg.algorithm {
        Algorithm::Sgd => sgd_run(obj, spectrum, cfg, timer),
        Algorithm::Srda => srda_run(obj, spectrum, cfg, timer),
        Algorithm::LsvrgUniform => lsvrg_run(obj, spectrum, cfg, timer),
        Algorithm::LsvrgSmoothed => lsvrg_smoothed_run(obj, spectrum, cfg, timer),
        Algorithm::LsvrgEpochNonuniform => lsvrg_epoch_run(obj, spectrum, cfg, timer),
        Algorithm::QSvrg => qsvrg::qsvrg_cfg_run(obj, spectrum, cfg, timer),
        Algorithm::ReferenceFullBatch => reference::reference_cfg_run(obj, spectrum, cfg, timer),
    }
}
