//! Verification subcommands: bias enumeration, Monte-Carlo consistency,
//! sorting sensitivity, quantile differences, and the randomized PAV
//! invariant suite. Each emits a CSV plus a JSON summary.

use srm_core::analysis::{consistency_mse, exhaustive_bias, quantile_difference, Population};
use srm_core::data::LossModel;
use srm_core::optim::{
    reference_solve, run as run_optimizer, Algorithm, LearningRate, OptimizerConfig,
};
use srm_core::rng::SplitMix64;
use srm_core::smoothing::{
    in_permutahedron, smoothed_gap_bound_check, smoothed_oracle, SmoothingConfig,
};
use srm_core::{IndexedLoss, RegularizedObjective, Spectrum};

use crate::config::{spectrum_json, ExperimentConfig};
use crate::experiment::{grid_search, load_dataset, loss_kind};
use crate::json::Json;
use crate::{io, CliError};

/// Exhaustive bias audit over the three reference spectra:
/// `bias ≤ 2·C_s·B·(n−m)/n` for every `n ∈ 4..=10`, every `m`, and
/// `vectors` random loss vectors each.
pub fn bias_check(cfg: &ExperimentConfig, out_dir: &str) -> Result<(), CliError> {
    let spectra = [
        Spectrum::superquantile(0.5).expect("valid"),
        Spectrum::extremile(2.0).expect("valid"),
        Spectrum::esrm(1.0).expect("valid"),
    ];
    let vectors = 50usize;
    let mut rng = SplitMix64::substream(cfg.data_seed, 0xB1A5);
    let mut csv = String::from("spectrum,n,m,bias,bound\n");
    let mut violations = 0usize;
    let mut worst_margin = f64::NEG_INFINITY;
    let mut checks = 0usize;
    for spectrum in &spectra {
        for n in 4..=10usize {
            for _ in 0..vectors {
                let losses: Vec<f64> = (0..n).map(|_| 3.0 * rng.normal()).collect();
                for m in 1..=n {
                    let (bias, bound) = exhaustive_bias(spectrum, &losses, m)
                        .map_err(|e| CliError::failed(e.to_string()))?;
                    checks += 1;
                    let margin = bias - bound;
                    worst_margin = worst_margin.max(margin);
                    if margin > 1e-9 {
                        violations += 1;
                    }
                    csv.push_str(&format!(
                        "{},{n},{m},{bias},{bound}\n",
                        crate::config::spectrum_token(spectrum)
                    ));
                }
            }
        }
    }
    io::write_text(&io::out_path(out_dir, "bias_check.csv"), &csv)?;
    let mut summary = Json::obj();
    summary.push("checks", Json::UInt(checks as u64));
    summary.push("violations", Json::UInt(violations as u64));
    summary.push("worst_margin", Json::Num(worst_margin));
    summary.push("pass", Json::Bool(violations == 0));
    io::write_text(&io::out_path(out_dir, "bias_check.json"), &summary.render())?;
    println!(
        "bias-check: {} ({checks} checks, worst bias-bound margin {worst_margin:e})",
        if violations == 0 { "PASS" } else { "FAIL" }
    );
    if violations > 0 {
        return Err(CliError::failed("bias bound violated"));
    }
    Ok(())
}

/// Monte-Carlo consistency of the empirical L-functional on
/// Exponential(1) losses: the log-log MSE slope should sit near −1.
pub fn consistency_check(cfg: &ExperimentConfig, out_dir: &str) -> Result<(), CliError> {
    let population = Population::Exponential { rate: 1.0 };
    let report = consistency_mse(&cfg.spectrum, &population, &cfg.sizes, cfg.reps, cfg.data_seed)
        .map_err(|e| CliError::failed(e.to_string()))?;
    let mut csv = String::from("n,mse\n");
    for (n, mse) in report.sizes.iter().zip(report.mse.iter()) {
        csv.push_str(&format!("{n},{mse}\n"));
    }
    io::write_text(&io::out_path(out_dir, "consistency.csv"), &csv)?;
    let in_range = report.slope >= -1.25 && report.slope <= -0.75;
    let mut summary = Json::obj();
    summary.push("spectrum", spectrum_json(&cfg.spectrum));
    summary.push("population", Json::Str("exponential(1)".into()));
    summary.push("ground_truth", Json::Num(report.ground_truth));
    summary.push("reps", Json::UInt(cfg.reps as u64));
    summary.push("slope", Json::Num(report.slope));
    summary.push("slope_in_range", Json::Bool(in_range));
    io::write_text(&io::out_path(out_dir, "consistency.json"), &summary.render())?;
    println!(
        "consistency-check: slope {:.4} ({}), L_s[F] = {:.10}",
        report.slope,
        if in_range { "PASS" } else { "FAIL" },
        report.ground_truth
    );
    if !in_range {
        return Err(CliError::failed("consistency slope out of range"));
    }
    Ok(())
}

/// Sorting-sensitivity heatmap data: per epoch and index, whether the
/// rank of the index differs from the final epoch's rank.
pub fn sensitivity(cfg: &ExperimentConfig, out_dir: &str) -> Result<(), CliError> {
    let data = load_dataset(cfg)?;
    let n = data.train.n();
    let model = LossModel::new(loss_kind(&cfg.loss), &data.train)
        .map_err(|e| CliError::config(e.to_string()))?;
    let sigma =
        cfg.spectrum.discretize(n).map_err(|e| CliError::config(e.to_string()))?;
    let obj = RegularizedObjective::new(sigma, cfg.effective_mu(n), &model)
        .map_err(|e| CliError::config(e.to_string()))?;
    let eta = if cfg.lr_grid.len() == 1 {
        cfg.lr_grid[0]
    } else {
        let mut single = cfg.clone();
        single.algorithms = vec![Algorithm::LsvrgUniform];
        let (chosen, _, _) = grid_search(&obj, &cfg.spectrum, &single, 1)?;
        chosen[Algorithm::LsvrgUniform.name()]
    };
    let oc = OptimizerConfig::new(
        Algorithm::LsvrgUniform,
        LearningRate::Constant(eta),
        cfg.seeds[0],
        cfg.max_passes,
    )
    .with_epoch_length(cfg.epoch_length.unwrap_or(n))
    .with_checkpoint_prob(cfg.qstar);
    let record = run_optimizer(&obj, &cfg.spectrum, &oc, &mut || 0.0)
        .map_err(|e| CliError::failed(e.to_string()))?;

    let perms = &record.epoch_permutations;
    let Some(last) = perms.last() else {
        return Err(CliError::failed("run recorded no epoch permutations"));
    };
    let final_ranks = last.index_to_rank();
    let mut csv = String::from("epoch,index,disagreement\n");
    let mut counts = Vec::new();
    for (e, p) in perms.iter().enumerate() {
        let ranks = p.index_to_rank();
        let mut count = 0usize;
        for i in 0..n {
            let disagree = (ranks[i] != final_ranks[i]) as u8;
            count += disagree as usize;
            csv.push_str(&format!("{e},{i},{disagree}\n"));
        }
        counts.push(count);
    }
    io::write_text(&io::out_path(out_dir, "sensitivity.csv"), &csv)?;
    let mut summary = Json::obj();
    summary.push("spectrum", spectrum_json(&cfg.spectrum));
    summary.push("eta", Json::Num(eta));
    summary.push("epochs", Json::UInt(perms.len() as u64));
    summary.push(
        "per_epoch_disagreements",
        Json::Arr(counts.iter().map(|&c| Json::UInt(c as u64)).collect()),
    );
    io::write_text(&io::out_path(out_dir, "sensitivity.json"), &summary.render())?;
    println!("sensitivity: {} epochs, final-epoch disagreements {:?}", perms.len(), counts);
    Ok(())
}

/// Test-loss quantile differences between the ERM solution and the
/// configured L-risk solution.
pub fn quantile_diff(cfg: &ExperimentConfig, out_dir: &str) -> Result<(), CliError> {
    let data = load_dataset(cfg)?;
    let n = data.train.n();
    let model = LossModel::new(loss_kind(&cfg.loss), &data.train)
        .map_err(|e| CliError::config(e.to_string()))?;
    let mu = cfg.effective_mu(n);
    let solve = |spectrum: &Spectrum| -> Result<Vec<f64>, CliError> {
        let sigma = spectrum.discretize(n).map_err(|e| CliError::config(e.to_string()))?;
        let obj = RegularizedObjective::new(sigma, mu, &model)
            .map_err(|e| CliError::config(e.to_string()))?;
        reference_solve(&obj, 1e-10).map_err(|e| CliError::failed(e.to_string()))
    };
    let w_erm = solve(&Spectrum::uniform())?;
    let w_lrm = solve(&cfg.spectrum)?;

    let test_model = LossModel::new(loss_kind(&cfg.loss), &data.test)
        .map_err(|e| CliError::config(e.to_string()))?;
    let mut erm_losses = Vec::new();
    test_model.losses_into(&w_erm, &mut erm_losses);
    let mut lrm_losses = Vec::new();
    test_model.losses_into(&w_lrm, &mut lrm_losses);

    let raw = quantile_difference(&erm_losses, &lrm_losses, &cfg.p_grid, false)
        .map_err(|e| CliError::failed(e.to_string()))?;
    let normalized = quantile_difference(&erm_losses, &lrm_losses, &cfg.p_grid, true)
        .map_err(|e| CliError::failed(e.to_string()))?;
    let mut csv = String::from("p,diff,diff_normalized\n");
    for ((p, r), z) in cfg.p_grid.iter().zip(raw.iter()).zip(normalized.iter()) {
        csv.push_str(&format!("{p},{r},{z}\n"));
    }
    io::write_text(&io::out_path(out_dir, "quantile_diff.csv"), &csv)?;
    let mut summary = Json::obj();
    summary.push("spectrum", spectrum_json(&cfg.spectrum));
    summary.push("mu", Json::Num(mu));
    summary.push("max_diff", Json::Num(raw.iter().cloned().fold(f64::NEG_INFINITY, f64::max)));
    summary.push("p_grid", Json::Arr(cfg.p_grid.iter().map(|&p| Json::Num(p)).collect()));
    io::write_text(&io::out_path(out_dir, "quantile_diff.json"), &summary.render())?;
    println!("quantile-diff: wrote {} quantiles", cfg.p_grid.len());
    Ok(())
}

/// Randomized invariant suite for the smoothing oracle: feasibility,
/// duality-gap certificate, and the sandwich bound.
pub fn pav_check(cfg: &ExperimentConfig, out_dir: &str) -> Result<(), CliError> {
    let mut rng = SplitMix64::substream(cfg.data_seed, 0x9AB);
    let mut worst_gap = 0.0f64;
    let mut failures = 0usize;
    for trial in 0..cfg.trials {
        let n = 2 + rng.below(49);
        let spectrum = match rng.below(6) {
            0 => Spectrum::uniform(),
            1 => Spectrum::superquantile(0.1 + 0.8 * rng.next_f64()).expect("valid"),
            2 => Spectrum::extremile(1.0 + 3.0 * rng.next_f64()).expect("valid"),
            3 => Spectrum::esrm(0.2 + 3.0 * rng.next_f64()).expect("valid"),
            4 => Spectrum::truncated_risk_seeking(0.1 + 0.9 * rng.next_f64()).expect("valid"),
            _ => Spectrum::extremile_risk_seeking(1.0 + 3.0 * rng.next_f64()).expect("valid"),
        };
        let sigma = spectrum.discretize(n).map_err(|e| CliError::failed(e.to_string()))?;
        let losses: Vec<f64> = (0..n).map(|_| 5.0 * rng.normal()).collect();
        let nu = 10f64.powf(-2.0 + 3.0 * rng.next_f64());
        let entropic_ok = sigma.iter().all(|&s| s > 0.0);
        let config = if trial % 2 == 0 || !entropic_ok {
            SmoothingConfig::quadratic(nu).expect("valid")
        } else {
            SmoothingConfig::entropic(nu).expect("valid")
        };
        match smoothed_oracle(&config, &sigma, &losses) {
            Ok(eval) => {
                worst_gap = worst_gap.max(eval.dual_gap / (1.0 + eval.value.abs()));
                if !in_permutahedron(&eval.lambda, &sigma, 1e-10) {
                    failures += 1;
                }
                if spectrum.is_risk_averse()
                    && !smoothed_gap_bound_check(&config, &sigma, &losses)
                        .map_err(|e| CliError::failed(e.to_string()))?
                {
                    failures += 1;
                }
            }
            Err(e) => {
                eprintln!("pav-check trial {trial}: {e}");
                failures += 1;
            }
        }
    }
    let pass = failures == 0;
    let mut summary = Json::obj();
    summary.push("trials", Json::UInt(cfg.trials as u64));
    summary.push("failures", Json::UInt(failures as u64));
    summary.push("worst_relative_gap", Json::Num(worst_gap));
    summary.push("pass", Json::Bool(pass));
    io::write_text(&io::out_path(out_dir, "pav_check.json"), &summary.render())?;
    println!(
        "pav-check: {} ({} trials, worst relative duality gap {worst_gap:e})",
        if pass { "PASS" } else { "FAIL" },
        cfg.trials
    );
    if !pass {
        return Err(CliError::failed("pav-check found violations"));
    }
    Ok(())
}

/// Writes the configured dataset out as CSV files.
pub fn gen_data(cfg: &ExperimentConfig, out_dir: &str) -> Result<(), CliError> {
    let data = load_dataset(cfg)?;
    io::write_dataset_csv(&io::out_path(out_dir, &format!("{}_train.csv", cfg.name)), &data.train)?;
    io::write_dataset_csv(&io::out_path(out_dir, &format!("{}_test.csv", cfg.name)), &data.test)?;
    println!(
        "gen-data: wrote {} train rows and {} test rows",
        data.train.n(),
        data.test.n()
    );
    Ok(())
}
