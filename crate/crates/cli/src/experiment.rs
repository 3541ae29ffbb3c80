//! Experiment orchestration: learning-rate grid search, multi-seed
//! trajectory runs against a high-accuracy reference, and deterministic
//! emission of per-run JSON-lines, gap-curve CSVs, and a summary.

use std::collections::BTreeMap;
use std::time::Instant;

use srm_core::data::{generate_gaussian_clusters, generate_simulated, ClusterLayout, DataSplit, LossKind, LossModel};
use srm_core::optim::{
    reference_solve, run as run_optimizer, Algorithm, LearningRate, OptimizerConfig, RunRecord,
};
use srm_core::smoothing::SmoothingConfig;
use srm_core::{RegularizedObjective, Spectrum};

use crate::config::{spectrum_json, spectrum_token, DatasetSpec, ExperimentConfig, LossSpec};
use crate::json::Json;
use crate::{io, CliError};

/// Normalized suboptimality trajectory of one run.
#[derive(Debug, Clone)]
pub struct GapCurve {
    pub pass: Vec<f64>,
    pub gap: Vec<f64>,
}

impl GapCurve {
    /// Builds the curve `(R(w_t) − R(w*)) / (R(w_0) − R(w*))` from the
    /// measured objective rows, enforcing its invariants: the first
    /// value is exactly 1 and no value drops below −1e−9 (reference
    /// dominance).
    pub fn from_record(record: &RunRecord, ref_value: f64) -> Result<GapCurve, CliError> {
        let first = record
            .rows
            .first()
            .ok_or_else(|| CliError::failed("run produced no measurements"))?;
        let denom = first.objective - ref_value;
        if !(denom > 0.0) {
            return Err(CliError::failed(format!(
                "reference value {ref_value} does not improve on the start {}",
                first.objective
            )));
        }
        let mut pass = Vec::with_capacity(record.rows.len());
        let mut gap = Vec::with_capacity(record.rows.len());
        for row in &record.rows {
            let g = (row.objective - ref_value) / denom;
            if g < -1e-9 {
                return Err(CliError::failed(format!(
                    "gap {g} below -1e-9 at pass {}: reference dominance violated",
                    row.pass
                )));
            }
            pass.push(row.pass);
            gap.push(g);
        }
        Ok(GapCurve { pass, gap })
    }

    pub fn final_gap(&self) -> f64 {
        self.gap.last().copied().unwrap_or(f64::INFINITY)
    }
}

/// One completed run with its curve.
#[derive(Debug)]
pub struct RunOutcome {
    pub algorithm: Algorithm,
    pub seed: u64,
    pub eta: f64,
    pub record: RunRecord,
    pub curve: GapCurve,
}

/// Everything `run` produces, kept for tests and reporting.
#[derive(Debug)]
pub struct ExperimentSummary {
    pub ref_value: f64,
    pub initial_value: f64,
    pub chosen_eta: BTreeMap<&'static str, f64>,
    pub grid_losses: Vec<(Algorithm, f64, f64)>,
    pub runs: Vec<RunOutcome>,
}

/// Loads or generates the configured dataset.
pub fn load_dataset(cfg: &ExperimentConfig) -> Result<DataSplit, CliError> {
    match &cfg.dataset {
        DatasetSpec::Simulated { n, d } => Ok(generate_simulated(*n, *d, cfg.data_seed)),
        DatasetSpec::Clusters => {
            Ok(generate_gaussian_clusters(&ClusterLayout::default(), cfg.data_seed))
        }
        DatasetSpec::Csv { path, target } => io::load_csv(path, target, cfg.data_seed),
    }
}

pub fn loss_kind(spec: &LossSpec) -> LossKind {
    match spec {
        LossSpec::Squared => LossKind::Squared,
        LossSpec::Logistic { classes } => LossKind::MultinomialLogistic { classes: *classes },
        LossSpec::KMeans { k } => LossKind::KMeans { k: *k },
    }
}

/// Optimizer configuration for one (algorithm, η, seed) task.
fn task_config(
    cfg: &ExperimentConfig,
    n: usize,
    algorithm: Algorithm,
    eta: f64,
    seed: u64,
) -> OptimizerConfig {
    let mut oc = OptimizerConfig::new(algorithm, LearningRate::Constant(eta), seed, cfg.max_passes);
    match algorithm {
        Algorithm::Sgd | Algorithm::Srda => {
            oc = oc.with_batch_size(cfg.batch_size.min(n));
        }
        Algorithm::LsvrgUniform => {
            oc = oc
                .with_epoch_length(cfg.epoch_length.unwrap_or(n))
                .with_checkpoint_prob(cfg.qstar);
        }
        Algorithm::LsvrgEpochNonuniform => {
            oc = oc.with_epoch_length(cfg.epoch_length.unwrap_or(n));
        }
        Algorithm::LsvrgSmoothed => {
            let smoothing = cfg.smoothing.unwrap_or_else(|| {
                SmoothingConfig::quadratic(n as f64 * 1e-3).expect("positive nu")
            });
            oc = oc
                .with_epoch_length(cfg.epoch_length.unwrap_or(n))
                .with_checkpoint_prob(cfg.qstar)
                .with_smoothing(smoothing);
        }
        Algorithm::QSvrg => {
            oc = oc.with_checkpoint_prob(if cfg.qstar > 0.0 { cfg.qstar } else { 1.0 / n as f64 });
        }
        Algorithm::ReferenceFullBatch => {}
    }
    oc
}

/// Runs `f` over the items on up to `threads` workers, preserving input
/// order in the output.
pub fn parallel_map<T, R, F>(items: &[T], threads: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync,
{
    if threads <= 1 || items.len() <= 1 {
        return items.iter().map(&f).collect();
    }
    let workers = threads.min(items.len());
    let chunk = items.len().div_ceil(workers);
    let mut out: Vec<Vec<R>> = Vec::new();
    std::thread::scope(|scope| {
        let handles: Vec<_> = items
            .chunks(chunk)
            .map(|slice| scope.spawn(|| slice.iter().map(&f).collect::<Vec<R>>()))
            .collect();
        for h in handles {
            out.push(h.join().expect("worker panicked"));
        }
    });
    out.into_iter().flatten().collect()
}

struct Task {
    algorithm: Algorithm,
    eta: f64,
    seed: u64,
}

fn execute_tasks<L: srm_core::IndexedLoss>(
    obj: &RegularizedObjective<'_, L>,
    spectrum: &Spectrum,
    cfg: &ExperimentConfig,
    tasks: &[Task],
    threads: usize,
) -> Result<Vec<RunRecord>, CliError> {
    let n = obj.n();
    let results = parallel_map(tasks, threads, |task| {
        let oc = task_config(cfg, n, task.algorithm, task.eta, task.seed);
        let start = Instant::now();
        let mut timer = move || start.elapsed().as_secs_f64();
        run_optimizer(obj, spectrum, &oc, &mut timer)
    });
    results
        .into_iter()
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| CliError::failed(format!("optimizer run failed: {e}")))
}

/// Learning-rate selection: runs every `(η, seed)` pair to the pass
/// budget and picks, per algorithm, the η minimizing the mean final
/// train objective, breaking ties toward the smaller η. Diverged runs
/// score +∞; an algorithm whose every η diverges is an error.
pub fn grid_search<L: srm_core::IndexedLoss>(
    obj: &RegularizedObjective<'_, L>,
    spectrum: &Spectrum,
    cfg: &ExperimentConfig,
    threads: usize,
) -> Result<(BTreeMap<&'static str, f64>, Vec<(Algorithm, f64, f64)>, GridCache), CliError> {
    let mut tasks = Vec::new();
    for &algorithm in &cfg.algorithms {
        for &eta in &cfg.lr_grid {
            for &seed in &cfg.seeds {
                tasks.push(Task { algorithm, eta, seed });
            }
        }
    }
    let records = execute_tasks(obj, spectrum, cfg, &tasks, threads)?;
    let mut cache: GridCache = BTreeMap::new();
    for (task, record) in tasks.iter().zip(records.into_iter()) {
        cache.insert((task.algorithm.name(), task.eta.to_bits(), task.seed), record);
    }

    let mut chosen = BTreeMap::new();
    let mut grid_losses = Vec::new();
    for &algorithm in &cfg.algorithms {
        let mut best: Option<(f64, f64)> = None;
        for &eta in &cfg.lr_grid {
            let mut total = 0.0;
            for &seed in &cfg.seeds {
                let record = &cache[&(algorithm.name(), eta.to_bits(), seed)];
                let value =
                    if record.diverged { f64::INFINITY } else { record.final_objective() };
                total += value;
            }
            let mean = total / cfg.seeds.len() as f64;
            grid_losses.push((algorithm, eta, mean));
            let better = match best {
                None => mean.is_finite(),
                Some((_, best_mean)) => mean < best_mean,
            };
            if better {
                best = Some((eta, mean));
            }
        }
        match best {
            Some((eta, _)) => {
                chosen.insert(algorithm.name(), eta);
            }
            None => {
                return Err(CliError::diverged(format!(
                    "all learning rates diverged for {}",
                    algorithm.name()
                )))
            }
        }
    }
    Ok((chosen, grid_losses, cache))
}

pub type GridCache = BTreeMap<(&'static str, u64, u64), RunRecord>;

/// Full experiment: reference solve, grid search (when the grid has more
/// than one point), final multi-seed runs, gap curves, and file output.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    out_dir: &str,
    threads: usize,
) -> Result<ExperimentSummary, CliError> {
    let data = load_dataset(cfg)?;
    let n = data.train.n();
    let model = LossModel::new(loss_kind(&cfg.loss), &data.train)
        .map_err(|e| CliError::config(e.to_string()))?;
    let mu = cfg.effective_mu(n);
    let sigma = cfg
        .spectrum
        .discretize(n)
        .map_err(|e| CliError::config(e.to_string()))?;
    let obj = RegularizedObjective::new(sigma, mu, &model)
        .map_err(|e| CliError::config(e.to_string()))?;

    let w_ref = reference_solve(&obj, 1e-10)
        .map_err(|e| CliError::failed(format!("reference solve failed: {e}")))?;
    let ref_value = obj.value(&w_ref).map_err(|e| CliError::failed(e.to_string()))?;

    let (chosen, grid_losses, mut cache) = if cfg.lr_grid.len() == 1 {
        let mut chosen = BTreeMap::new();
        for &a in &cfg.algorithms {
            chosen.insert(a.name(), cfg.lr_grid[0]);
        }
        (chosen, Vec::new(), GridCache::new())
    } else {
        grid_search(&obj, &cfg.spectrum, cfg, threads)?
    };

    // Final runs at the chosen rates (reusing grid runs when present:
    // identical configuration implies an identical record).
    let mut missing = Vec::new();
    for &algorithm in &cfg.algorithms {
        let eta = chosen[algorithm.name()];
        for &seed in &cfg.seeds {
            if !cache.contains_key(&(algorithm.name(), eta.to_bits(), seed)) {
                missing.push(Task { algorithm, eta, seed });
            }
        }
    }
    let records = execute_tasks(&obj, &cfg.spectrum, cfg, &missing, threads)?;
    for (task, record) in missing.iter().zip(records.into_iter()) {
        cache.insert((task.algorithm.name(), task.eta.to_bits(), task.seed), record);
    }

    let mut runs = Vec::new();
    for &algorithm in &cfg.algorithms {
        let eta = chosen[algorithm.name()];
        for &seed in &cfg.seeds {
            let record = cache
                .remove(&(algorithm.name(), eta.to_bits(), seed))
                .expect("final run present");
            // The reference pseudo-algorithm starts at the solution, so
            // the start-normalized curve is identically zero.
            let curve = if matches!(algorithm, Algorithm::ReferenceFullBatch) {
                GapCurve {
                    pass: record.rows.iter().map(|r| r.pass).collect(),
                    gap: record.rows.iter().map(|_| 0.0).collect(),
                }
            } else {
                GapCurve::from_record(&record, ref_value)?
            };
            runs.push(RunOutcome { algorithm, seed, eta, record, curve });
        }
    }
    let initial_value =
        runs.first().map(|r| r.record.rows[0].objective).unwrap_or(f64::NAN);

    emit_outputs(cfg, out_dir, mu, ref_value, &chosen, &grid_losses, &runs)?;
    Ok(ExperimentSummary { ref_value, initial_value, chosen_eta: chosen, grid_losses, runs })
}

fn run_file_name(cfg: &ExperimentConfig, mu: f64, algorithm: Algorithm, seed: u64) -> String {
    format!(
        "{}_{}-mu{}_{}_{}.jsonl",
        cfg.name,
        spectrum_token(&cfg.spectrum),
        mu,
        algorithm.name(),
        seed
    )
}

/// Tidy long-format plot data: one `pass,seed,algorithm,gap` row per
/// measurement of every run. An empty run set yields a header-only file.
pub fn plot_data_csv(runs: &[RunOutcome]) -> String {
    let mut csv = String::from("pass,seed,algorithm,gap\n");
    for run in runs {
        for (p, g) in run.curve.pass.iter().zip(run.curve.gap.iter()) {
            csv.push_str(&format!("{p},{},{},{g}\n", run.seed, run.algorithm.name()));
        }
    }
    csv
}

fn emit_outputs(
    cfg: &ExperimentConfig,
    out_dir: &str,
    mu: f64,
    ref_value: f64,
    chosen: &BTreeMap<&'static str, f64>,
    grid_losses: &[(Algorithm, f64, f64)],
    runs: &[RunOutcome],
) -> Result<(), CliError> {
    // Per-run JSON lines: one measurement per line.
    for run in runs {
        let mut lines = String::new();
        for row in &run.record.rows {
            let mut o = Json::obj();
            o.push("pass", Json::Num(row.pass));
            o.push("objective", Json::Num(row.objective));
            o.push(
                "gap",
                Json::Num((row.objective - ref_value) / (run.record.rows[0].objective - ref_value)),
            );
            match row.perm_disagreement {
                Some(d) => o.push("perm_disagreement", Json::UInt(d as u64)),
                None => o.push("perm_disagreement", Json::Null),
            };
            lines.push_str(&o.render());
            lines.push('\n');
        }
        let path = io::out_path(out_dir, &run_file_name(cfg, mu, run.algorithm, run.seed));
        io::write_text(&path, &lines)?;
    }

    io::write_text(&io::out_path(out_dir, "curves.csv"), &plot_data_csv(runs))?;

    // Informational wall-clock report (excluded from the deterministic
    // output contract).
    let mut timing = String::from("algorithm,seed,pass,elapsed_s\n");
    for run in runs {
        for row in &run.record.rows {
            timing.push_str(&format!(
                "{},{},{},{}\n",
                run.algorithm.name(),
                run.seed,
                row.pass,
                row.elapsed_s
            ));
        }
    }
    io::write_text(&io::out_path(out_dir, "timings.csv"), &timing)?;

    // Summary.
    let mut summary = Json::obj();
    summary.push("dataset", Json::Str(cfg.name.clone()));
    summary.push("spectrum", spectrum_json(&cfg.spectrum));
    summary.push("mu", Json::Num(mu));
    summary.push("reference_value", Json::Num(ref_value));
    let mut chosen_obj = Json::obj();
    for (name, eta) in chosen {
        chosen_obj.push(name, Json::Num(*eta));
    }
    summary.push("chosen_eta", chosen_obj);
    if !grid_losses.is_empty() {
        let mut arr = Vec::new();
        for (alg, eta, loss) in grid_losses {
            let mut o = Json::obj();
            o.push("algorithm", Json::Str(alg.name().to_string()));
            o.push("eta", Json::Num(*eta));
            o.push("mean_final_objective", Json::Num(*loss));
            arr.push(o);
        }
        summary.push("grid", Json::Arr(arr));
    }
    let mut runs_arr = Vec::new();
    for run in runs {
        let mut o = Json::obj();
        o.push("algorithm", Json::Str(run.algorithm.name().to_string()));
        o.push("seed", Json::UInt(run.seed));
        o.push("eta", Json::Num(run.eta));
        o.push("final_gap", Json::Num(run.curve.final_gap()));
        o.push("diverged", Json::Bool(run.record.diverged));
        o.push("grad_evals", Json::UInt(run.record.grad_evals));
        if !run.record.warnings.is_empty() {
            o.push(
                "warnings",
                Json::Arr(
                    run.record.warnings.iter().map(|w| Json::Str(w.clone())).collect(),
                ),
            );
        }
        runs_arr.push(o);
    }
    summary.push("runs", Json::Arr(runs_arr));
    io::write_text(&io::out_path(out_dir, "summary.json"), &summary.render())?;
    Ok(())
}
