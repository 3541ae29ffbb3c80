//! Experiment harness and command-line interface for spectral risk
//! minimization.
//!
//! Subcommands: `gen-data`, `run`, `grid-search`, `cluster`,
//! `bias-check`, `consistency-check`, `sensitivity`, `quantile-diff`,
//! `pav-check`. Common flags: `--config PATH`, `--seed N`, `--out DIR`,
//! `--threads K`. Exit codes: 0 on success, 2 on configuration errors,
//! 3 when every learning rate in a grid diverges.

pub mod cluster;
pub mod commands;
pub mod config;
pub mod experiment;
pub mod io;
pub mod json;

use std::fmt;

use config::ExperimentConfig;

/// Top-level error with the exit code it maps to.
#[derive(Debug, Clone)]
pub enum CliError {
    /// Bad configuration or arguments (exit 2).
    Config(String),
    /// Every learning rate diverged during grid search (exit 3).
    Diverged(String),
    /// File-system problem (exit 1).
    Io(String),
    /// Any other failure, including violated invariants (exit 1).
    Failed(String),
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }
    pub fn diverged(msg: impl Into<String>) -> Self {
        CliError::Diverged(msg.into())
    }
    pub fn io(msg: impl Into<String>) -> Self {
        CliError::Io(msg.into())
    }
    pub fn failed(msg: impl Into<String>) -> Self {
        CliError::Failed(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Diverged(_) => 3,
            CliError::Io(_) | CliError::Failed(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Diverged(m) => write!(f, "{m}"),
            CliError::Io(m) => write!(f, "io error: {m}"),
            CliError::Failed(m) => write!(f, "{m}"),
        }
    }
}

impl std::error::Error for CliError {}

/// Parsed command line.
#[derive(Debug, Clone)]
pub struct Args {
    pub command: String,
    pub config: Option<String>,
    pub seed: Option<u64>,
    pub out: String,
    pub threads: usize,
}

pub const USAGE: &str = "usage: srm <command> [--config PATH] [--seed N] [--out DIR] [--threads K]
commands: gen-data run grid-search cluster bias-check consistency-check sensitivity quantile-diff pav-check";

pub fn parse_args<I: Iterator<Item = String>>(mut argv: I) -> Result<Args, CliError> {
    let command = argv.next().ok_or_else(|| CliError::config(USAGE))?;
    let mut args = Args { command, config: None, seed: None, out: "out".into(), threads: 1 };
    while let Some(flag) = argv.next() {
        let mut value = || {
            argv.next().ok_or_else(|| CliError::config(format!("flag {flag} needs a value")))
        };
        match flag.as_str() {
            "--config" => args.config = Some(value()?),
            "--seed" => {
                let v = value()?;
                args.seed = Some(
                    v.parse::<u64>()
                        .map_err(|_| CliError::config(format!("bad --seed value `{v}`")))?,
                );
            }
            "--out" => args.out = value()?,
            "--threads" => {
                let v = value()?;
                args.threads = v
                    .parse::<usize>()
                    .map_err(|_| CliError::config(format!("bad --threads value `{v}`")))?
                    .max(1);
            }
            other => return Err(CliError::config(format!("unknown flag `{other}`\n{USAGE}"))),
        }
    }
    Ok(args)
}

/// Loads the config (or defaults) and applies the `--seed` override:
/// the given seed becomes both the data seed and the only run seed.
fn effective_config(args: &Args) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = args.seed {
        cfg.data_seed = seed;
        cfg.seeds = vec![seed];
    }
    Ok(cfg)
}

/// Runs one subcommand end to end.
pub fn run(args: &Args) -> Result<(), CliError> {
    let cfg = effective_config(args)?;
    match args.command.as_str() {
        "gen-data" => commands::gen_data(&cfg, &args.out),
        "run" => {
            let summary = experiment::run_experiment(&cfg, &args.out, args.threads)?;
            for (name, eta) in &summary.chosen_eta {
                println!("run: {name} eta {eta}");
            }
            for run in &summary.runs {
                println!(
                    "run: {} seed {} final gap {:e}",
                    run.algorithm.name(),
                    run.seed,
                    run.curve.final_gap()
                );
            }
            Ok(())
        }
        "grid-search" => {
            let data = experiment::load_dataset(&cfg)?;
            let n = data.train.n();
            let model =
                srm_core::data::LossModel::new(experiment::loss_kind(&cfg.loss), &data.train)
                    .map_err(|e| CliError::config(e.to_string()))?;
            let sigma = cfg
                .spectrum
                .discretize(n)
                .map_err(|e| CliError::config(e.to_string()))?;
            let obj = srm_core::RegularizedObjective::new(sigma, cfg.effective_mu(n), &model)
                .map_err(|e| CliError::config(e.to_string()))?;
            let (chosen, losses, _) =
                experiment::grid_search(&obj, &cfg.spectrum, &cfg, args.threads)?;
            let mut csv = String::from("algorithm,eta,mean_final_objective\n");
            for (alg, eta, loss) in &losses {
                csv.push_str(&format!("{},{eta},{loss}\n", alg.name()));
            }
            io::write_text(&io::out_path(&args.out, "grid_search.csv"), &csv)?;
            let mut summary = json::Json::obj();
            for (name, eta) in &chosen {
                summary.push(name, json::Json::Num(*eta));
            }
            io::write_text(&io::out_path(&args.out, "grid_search.json"), &summary.render())?;
            for (name, eta) in &chosen {
                println!("grid-search: {name} -> {eta}");
            }
            Ok(())
        }
        "cluster" => {
            let outcomes = cluster::run_clustering(&cfg, &args.out, args.threads)?;
            for o in &outcomes {
                println!(
                    "cluster: {} seed {} test accuracy {:.4}",
                    config::spectrum_token(&o.spectrum),
                    o.seed,
                    o.test_accuracy
                );
            }
            Ok(())
        }
        "bias-check" => commands::bias_check(&cfg, &args.out),
        "consistency-check" => commands::consistency_check(&cfg, &args.out),
        "sensitivity" => commands::sensitivity(&cfg, &args.out),
        "quantile-diff" => commands::quantile_diff(&cfg, &args.out),
        "pav-check" => commands::pav_check(&cfg, &args.out),
        other => Err(CliError::config(format!("unknown command `{other}`\n{USAGE}"))),
    }
}
