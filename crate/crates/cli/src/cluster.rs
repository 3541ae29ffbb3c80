//! Robust clustering pipeline: minibatch subgradient descent on the
//! spectrally weighted k-means objective, scored on held-out inliers
//! after the best relabeling of the clusters.

use srm_core::data::{nearest_center, Dataset, LossKind, LossModel};
use srm_core::optim::{run as run_optimizer, Algorithm, LearningRate, OptimizerConfig};
use srm_core::{RegularizedObjective, Spectrum};

use crate::config::{spectrum_token, ExperimentConfig, LossSpec};
use crate::experiment::{load_dataset, parallel_map};
use crate::json::Json;
use crate::{io, CliError};

#[derive(Debug, Clone)]
pub struct ClusterOutcome {
    pub spectrum: Spectrum,
    pub seed: u64,
    pub eta: f64,
    pub test_accuracy: f64,
    pub train_inlier_accuracy: f64,
    pub final_objective: f64,
    pub centers: Vec<f64>,
}

/// All injective maps from `0..k` into `classes` (length-k arrangements).
fn arrangements(k: usize, classes: &[usize]) -> Vec<Vec<usize>> {
    fn rec(k: usize, prefix: &mut Vec<usize>, rest: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == k {
            out.push(prefix.clone());
            return;
        }
        for i in 0..rest.len() {
            let x = rest.remove(i);
            prefix.push(x);
            rec(k, prefix, rest, out);
            prefix.pop();
            rest.insert(i, x);
        }
    }
    let mut out = Vec::new();
    rec(k, &mut Vec::new(), &mut classes.to_vec(), &mut out);
    out
}

/// Fraction of points whose relabeled assignment matches the true
/// cluster, maximized over injective center-to-class relabelings (so a
/// single center scores the largest class's share).
pub fn permuted_accuracy(
    centers: &[f64],
    d: usize,
    k: usize,
    data: &Dataset,
    keep: impl Fn(usize) -> bool,
) -> f64 {
    let mut assignments = Vec::new();
    let mut truths = Vec::new();
    for i in 0..data.n() {
        if !keep(i) {
            continue;
        }
        assignments.push(nearest_center(centers, d, k, data.row(i)).0);
        truths.push(data.cluster_label[i]);
    }
    if assignments.is_empty() {
        return 0.0;
    }
    let mut classes: Vec<usize> = truths.clone();
    classes.sort_unstable();
    classes.dedup();
    let maps = if classes.len() >= k {
        arrangements(k, &classes)
    } else {
        // Fewer true classes than centers: relabel within the padded
        // class set so every center still gets a distinct label.
        let mut padded = classes.clone();
        let mut next = classes.iter().copied().max().unwrap_or(0) + 1;
        while padded.len() < k {
            padded.push(next);
            next += 1;
        }
        arrangements(k, &padded)
    };
    let mut best = 0usize;
    for map in maps {
        let hits = assignments
            .iter()
            .zip(truths.iter())
            .filter(|(&a, &t)| map[a] == t)
            .count();
        best = best.max(hits);
    }
    best as f64 / assignments.len() as f64
}

/// Runs the clustering experiment over the uniform, truncated, and
/// risk-seeking-extremile spectra for every seed. The learning rate is
/// the single grid entry, or is selected per spectrum by the mean final
/// train objective when the grid has several.
pub fn run_clustering(
    cfg: &ExperimentConfig,
    out_dir: &str,
    threads: usize,
) -> Result<Vec<ClusterOutcome>, CliError> {
    let data = load_dataset(cfg)?;
    let train = &data.train;
    let n = train.n();
    let k = match cfg.loss {
        LossSpec::KMeans { k } => k,
        _ => 3,
    };
    if k > 6 {
        return Err(CliError::config("label-permutation scoring supports k <= 6"));
    }
    let model = LossModel::new(LossKind::KMeans { k }, train)
        .map_err(|e| CliError::config(e.to_string()))?;
    let d = train.dim();

    let spectra = vec![
        Spectrum::uniform(),
        Spectrum::truncated_risk_seeking(cfg.cluster_q)
            .map_err(|e| CliError::config(e.to_string()))?,
        Spectrum::extremile_risk_seeking(cfg.cluster_r)
            .map_err(|e| CliError::config(e.to_string()))?,
    ];

    let mut tasks = Vec::new();
    for &spectrum in &spectra {
        for &eta in &cfg.lr_grid {
            for &seed in &cfg.seeds {
                tasks.push((spectrum, eta, seed));
            }
        }
    }
    let records = parallel_map(&tasks, threads, |&(spectrum, eta, seed)| {
        let sigma = spectrum.discretize(n).map_err(|e| CliError::config(e.to_string()))?;
        let obj = RegularizedObjective::new(sigma, 0.0, &model)
            .map_err(|e| CliError::config(e.to_string()))?;
        let oc = OptimizerConfig::new(
            Algorithm::Sgd,
            LearningRate::Constant(eta),
            seed,
            cfg.max_passes,
        )
        .with_batch_size(cfg.batch_size.min(n));
        run_optimizer(&obj, &spectrum, &oc, &mut || 0.0)
            .map_err(|e| CliError::failed(e.to_string()))
    });

    let mut by_key = std::collections::BTreeMap::new();
    for ((spectrum, eta, seed), record) in tasks.iter().zip(records.into_iter()) {
        by_key.insert((spectrum_token(spectrum), eta.to_bits(), *seed), record?);
    }

    let mut outcomes = Vec::new();
    for &spectrum in &spectra {
        let token = spectrum_token(&spectrum);
        // Select eta by the mean final train objective across seeds.
        let mut best: Option<(f64, f64)> = None;
        for &eta in &cfg.lr_grid {
            let mut total = 0.0;
            for &seed in &cfg.seeds {
                let r = &by_key[&(token.clone(), eta.to_bits(), seed)];
                total += if r.diverged { f64::INFINITY } else { r.final_objective() };
            }
            let mean = total / cfg.seeds.len() as f64;
            let better = match best {
                None => mean.is_finite(),
                Some((_, b)) => mean < b,
            };
            if better {
                best = Some((eta, mean));
            }
        }
        let Some((eta, _)) = best else {
            return Err(CliError::diverged(format!("all learning rates diverged for {token}")));
        };
        for &seed in &cfg.seeds {
            let record = &by_key[&(token.clone(), eta.to_bits(), seed)];
            let centers = record.final_w.clone();
            let test_accuracy = permuted_accuracy(&centers, d, k, &data.test, |_| true);
            let train_inlier_accuracy =
                permuted_accuracy(&centers, d, k, train, |i| !train.outlier[i]);
            outcomes.push(ClusterOutcome {
                spectrum,
                seed,
                eta,
                test_accuracy,
                train_inlier_accuracy,
                final_objective: record.final_objective(),
                centers,
            });
        }
    }

    emit_cluster_outputs(cfg, out_dir, k, d, &outcomes)?;
    Ok(outcomes)
}

fn emit_cluster_outputs(
    cfg: &ExperimentConfig,
    out_dir: &str,
    k: usize,
    d: usize,
    outcomes: &[ClusterOutcome],
) -> Result<(), CliError> {
    let mut report = Json::obj();
    report.push("dataset", Json::Str(cfg.name.clone()));
    report.push("k", Json::UInt(k as u64));
    let mut arr = Vec::new();
    for o in outcomes {
        let mut entry = Json::obj();
        entry.push("spectrum", crate::config::spectrum_json(&o.spectrum));
        entry.push("seed", Json::UInt(o.seed));
        entry.push("eta", Json::Num(o.eta));
        entry.push("test_accuracy", Json::Num(o.test_accuracy));
        entry.push("train_inlier_accuracy", Json::Num(o.train_inlier_accuracy));
        entry.push("final_objective", Json::Num(o.final_objective));
        arr.push(entry);
    }
    report.push("runs", Json::Arr(arr));
    io::write_text(&io::out_path(out_dir, "cluster_accuracy.json"), &report.render())?;

    // Centers from each spectrum's first seed.
    let mut seen = std::collections::BTreeSet::new();
    for o in outcomes {
        let token = spectrum_token(&o.spectrum);
        if !seen.insert(token.clone()) {
            continue;
        }
        let mut csv = String::new();
        for j in 0..d {
            csv.push_str(&format!("c{j}{}", if j + 1 < d { "," } else { "\n" }));
        }
        for center in o.centers.chunks(d) {
            let cells: Vec<String> = center.iter().map(|x| format!("{x}")).collect();
            csv.push_str(&cells.join(","));
            csv.push('\n');
        }
        io::write_text(&io::out_path(out_dir, &format!("centers_{token}.csv")), &csv)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn permutations_count() {
        assert_eq!(arrangements(3, &[0, 1, 2]).len(), 6);
        assert_eq!(arrangements(4, &[0, 1, 2, 3]).len(), 24);
        assert_eq!(arrangements(1, &[0, 1, 2]).len(), 3);
    }

    #[test]
    fn single_center_scores_largest_class_share() {
        // One center absorbs everything; the best relabeling credits it
        // with the most populous class.
        let rows = vec![vec![0.0], vec![0.1], vec![0.2], vec![5.0], vec![9.0]];
        let mut data = Dataset::from_rows(
            &rows,
            srm_core::data::Targets::None,
            srm_core::data::Split::Test,
        )
        .unwrap();
        data.cluster_label = vec![2, 2, 2, 0, 1];
        data.outlier = vec![false; 5];
        let centers = [1.0];
        let acc = permuted_accuracy(&centers, 1, 1, &data, |_| true);
        assert_eq!(acc, 3.0 / 5.0);
    }

    #[test]
    fn permuted_accuracy_never_decreases_under_relabeling() {
        // Centers deliberately labeled in the "wrong" order still score
        // perfectly after relabeling.
        let rows = vec![
            vec![0.0, 0.0],
            vec![0.1, 0.0],
            vec![5.0, 5.0],
            vec![5.1, 5.0],
        ];
        let mut data =
            Dataset::from_rows(&rows, srm_core::data::Targets::None, srm_core::data::Split::Test).unwrap();
        data.cluster_label = vec![1, 1, 0, 0];
        data.outlier = vec![false; 4];
        let centers = [0.0, 0.0, 5.0, 5.0]; // center 0 near the label-1 cloud
        let acc = permuted_accuracy(&centers, 2, 2, &data, |_| true);
        assert_eq!(acc, 1.0);
    }
}
