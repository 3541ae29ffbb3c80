//! Experiment configuration: a flat `key = value` text format.
//!
//! Lines are `key = value`; `#` starts a comment; lists are
//! comma-separated. The `spectrum` key accepts either a bare name with a
//! separate `param` key or the JSON object form
//! `{"kind": "extremile", "param": 2.0}`. The full grammar is documented
//! in the repository README.

use std::collections::BTreeMap;

use srm_core::optim::Algorithm;
use srm_core::smoothing::SmoothingConfig;
use srm_core::Spectrum;

use crate::CliError;

/// Which dataset the experiment runs on.
#[derive(Debug, Clone, PartialEq)]
pub enum DatasetSpec {
    Simulated { n: usize, d: usize },
    Clusters,
    Csv { path: String, target: String },
}

/// Which loss model is fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LossSpec {
    Squared,
    Logistic { classes: usize },
    KMeans { k: usize },
}

/// The learning-rate grid of the hyperparameter-selection protocol.
pub const DEFAULT_LR_GRID: [f64; 9] = [3e-4, 1e-3, 3e-3, 1e-2, 3e-2, 1e-1, 3e-1, 1e0, 3e0];

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    /// Label used in output file names.
    pub name: String,
    pub dataset: DatasetSpec,
    pub loss: LossSpec,
    pub spectrum: Spectrum,
    /// `ℓ2` coefficient; `None` means the 1/n default.
    pub mu: Option<f64>,
    pub algorithms: Vec<Algorithm>,
    pub lr_grid: Vec<f64>,
    pub seeds: Vec<u64>,
    pub batch_size: usize,
    /// Sorting/checkpoint period; `None` means the train size.
    pub epoch_length: Option<usize>,
    pub qstar: f64,
    pub max_passes: usize,
    pub smoothing: Option<SmoothingConfig>,
    /// Seed for dataset generation and splitting.
    pub data_seed: u64,
    /// Truncated-spectrum parameter for the clustering pipeline.
    pub cluster_q: f64,
    /// Risk-seeking extremile order for the clustering pipeline.
    pub cluster_r: f64,
    /// Quantile grid for `quantile-diff`.
    pub p_grid: Vec<f64>,
    /// Replicates for `consistency-check`.
    pub reps: usize,
    /// Sample sizes for `consistency-check`.
    pub sizes: Vec<usize>,
    /// Randomized trials for `pav-check`.
    pub trials: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            name: "simulated".into(),
            dataset: DatasetSpec::Simulated { n: 1000, d: 10 },
            loss: LossSpec::Squared,
            spectrum: Spectrum::extremile(2.0).expect("valid default"),
            mu: None,
            algorithms: vec![Algorithm::Sgd, Algorithm::Srda, Algorithm::LsvrgUniform],
            lr_grid: DEFAULT_LR_GRID.to_vec(),
            seeds: vec![1, 2, 3, 4, 5],
            batch_size: 64,
            epoch_length: None,
            qstar: 0.0,
            max_passes: 64,
            smoothing: None,
            data_seed: 1,
            cluster_q: 0.75,
            cluster_r: 5.0,
            p_grid: (1..=20).map(|k| k as f64 / 20.0).collect(),
            reps: 2000,
            sizes: (0..8).map(|j| 100 << j).collect(),
            trials: 10_000,
        }
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut cfg = ExperimentConfig::default();
        let mut kv: BTreeMap<String, String> = BTreeMap::new();
        let mut spectrum_param: Option<f64> = None;
        let mut smoothing_kind: Option<String> = None;
        let mut smoothing_nu: Option<f64> = None;

        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::config(format!(
                    "line {}: expected `key = value`, got `{line}`",
                    lineno + 1
                )));
            };
            let key = key.trim().to_ascii_lowercase();
            let value = value.trim().trim_matches('"').to_string();
            kv.insert(key, value);
        }

        // Structural keys first so their parameter keys can attach to
        // them regardless of line order.
        if let Some(value) = kv.get("dataset") {
            cfg.dataset = match value.as_str() {
                "simulated" => DatasetSpec::Simulated { n: 1000, d: 10 },
                "clusters" => DatasetSpec::Clusters,
                "csv" => DatasetSpec::Csv { path: String::new(), target: "target".into() },
                other => return Err(CliError::config(format!("unknown dataset `{other}`"))),
            };
        }
        if let Some(value) = kv.get("loss") {
            cfg.loss = match value.as_str() {
                "squared" => LossSpec::Squared,
                "logistic" => LossSpec::Logistic { classes: 2 },
                "kmeans" => LossSpec::KMeans { k: 3 },
                other => return Err(CliError::config(format!("unknown loss `{other}`"))),
            };
        }

        for (key, value) in &kv {
            match key.as_str() {
                "name" => cfg.name = value.clone(),
                "dataset" | "loss" => {} // handled above
                "n" => {
                    if let DatasetSpec::Simulated { ref mut n, .. } = cfg.dataset {
                        *n = parse_usize(key, value)?;
                    }
                }
                "d" => {
                    if let DatasetSpec::Simulated { ref mut d, .. } = cfg.dataset {
                        *d = parse_usize(key, value)?;
                    }
                }
                "csv_path" => {
                    if let DatasetSpec::Csv { ref mut path, .. } = cfg.dataset {
                        *path = value.clone();
                    } else {
                        cfg.dataset =
                            DatasetSpec::Csv { path: value.clone(), target: "target".into() };
                    }
                }
                "target_column" => {
                    if let DatasetSpec::Csv { ref mut target, .. } = cfg.dataset {
                        *target = value.clone();
                    }
                }
                "classes" => {
                    if let LossSpec::Logistic { ref mut classes } = cfg.loss {
                        *classes = parse_usize(key, value)?;
                    }
                }
                "k" => {
                    if let LossSpec::KMeans { ref mut k } = cfg.loss {
                        *k = parse_usize(key, value)?;
                    }
                }
                "spectrum" => {} // handled below, after `param` is known
                "param" => spectrum_param = Some(parse_f64(key, value)?),
                "mu" => cfg.mu = Some(parse_f64(key, value)?),
                "algorithms" => {
                    cfg.algorithms = value
                        .split(',')
                        .map(|s| parse_algorithm(s.trim()))
                        .collect::<Result<_, _>>()?;
                }
                "lr_grid" => cfg.lr_grid = parse_f64_list(key, value)?,
                "seeds" => {
                    cfg.seeds = value
                        .split(',')
                        .map(|s| {
                            s.trim().parse::<u64>().map_err(|_| {
                                CliError::config(format!("bad seed `{}`", s.trim()))
                            })
                        })
                        .collect::<Result<_, _>>()?;
                }
                "batch_size" => cfg.batch_size = parse_usize(key, value)?,
                "epoch_length" => cfg.epoch_length = Some(parse_usize(key, value)?),
                "qstar" => cfg.qstar = parse_f64(key, value)?,
                "max_passes" => cfg.max_passes = parse_usize(key, value)?,
                "smoothing" => smoothing_kind = Some(value.clone()),
                "smoothing_nu" => smoothing_nu = Some(parse_f64(key, value)?),
                "data_seed" => {
                    cfg.data_seed = value
                        .parse::<u64>()
                        .map_err(|_| CliError::config(format!("bad data_seed `{value}`")))?;
                }
                "cluster_q" => cfg.cluster_q = parse_f64(key, value)?,
                "cluster_r" => cfg.cluster_r = parse_f64(key, value)?,
                "p_grid" => cfg.p_grid = parse_f64_list(key, value)?,
                "reps" => cfg.reps = parse_usize(key, value)?,
                "sizes" => {
                    cfg.sizes = value
                        .split(',')
                        .map(|s| parse_usize("sizes", s.trim()))
                        .collect::<Result<_, _>>()?;
                }
                "trials" => cfg.trials = parse_usize(key, value)?,
                other => return Err(CliError::config(format!("unknown key `{other}`"))),
            }
        }

        if let Some(spec_text) = kv.get("spectrum") {
            cfg.spectrum = parse_spectrum(spec_text, spectrum_param)?;
        }
        match smoothing_kind.as_deref() {
            None | Some("none") => {}
            Some(kind) => {
                let nu = smoothing_nu
                    .ok_or_else(|| CliError::config("smoothing requires smoothing_nu"))?;
                let sm = match kind {
                    "quadratic" => SmoothingConfig::quadratic(nu),
                    "entropic" => SmoothingConfig::entropic(nu),
                    other => {
                        return Err(CliError::config(format!("unknown smoothing `{other}`")))
                    }
                };
                cfg.smoothing = Some(sm.map_err(|e| CliError::config(e.to_string()))?);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &str) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read config {path}: {e}")))?;
        Self::parse(&text)
    }

    fn validate(&self) -> Result<(), CliError> {
        if self.lr_grid.is_empty() {
            return Err(CliError::config("lr_grid must be non-empty"));
        }
        if self.seeds.is_empty() {
            return Err(CliError::config("seeds must be non-empty"));
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.seeds.len() {
            return Err(CliError::config("seeds must be distinct"));
        }
        if self.algorithms.is_empty() {
            return Err(CliError::config("algorithms must be non-empty"));
        }
        if matches!(self.dataset, DatasetSpec::Csv { ref path, .. } if path.is_empty()) {
            return Err(CliError::config("csv dataset requires csv_path"));
        }
        Ok(())
    }

    /// Effective regularization: the configured μ or the 1/n default.
    pub fn effective_mu(&self, n_train: usize) -> f64 {
        self.mu.unwrap_or(1.0 / n_train as f64)
    }
}

fn parse_usize(key: &str, value: &str) -> Result<usize, CliError> {
    value.parse::<usize>().map_err(|_| CliError::config(format!("bad integer for {key}: `{value}`")))
}

fn parse_f64(key: &str, value: &str) -> Result<f64, CliError> {
    value.parse::<f64>().map_err(|_| CliError::config(format!("bad number for {key}: `{value}`")))
}

fn parse_f64_list(key: &str, value: &str) -> Result<Vec<f64>, CliError> {
    value.split(',').map(|s| parse_f64(key, s.trim())).collect()
}

pub fn parse_algorithm(name: &str) -> Result<Algorithm, CliError> {
    Ok(match name {
        "sgd" => Algorithm::Sgd,
        "srda" => Algorithm::Srda,
        "lsvrg" => Algorithm::LsvrgUniform,
        "lsvrg_smooth" => Algorithm::LsvrgSmoothed,
        "lsvrg_epoch" => Algorithm::LsvrgEpochNonuniform,
        "qsvrg" => Algorithm::QSvrg,
        "reference" => Algorithm::ReferenceFullBatch,
        other => return Err(CliError::config(format!("unknown algorithm `{other}`"))),
    })
}

/// Accepts `uniform`, `extremile` (+ separate param), or the JSON object
/// form `{"kind": "extremile", "param": 2.0}`.
pub fn parse_spectrum(text: &str, param: Option<f64>) -> Result<Spectrum, CliError> {
    let (kind, param) = if text.trim_start().starts_with('{') {
        parse_spectrum_object(text)?
    } else {
        (text.trim().to_ascii_lowercase(), param)
    };
    build_spectrum(&kind, param)
}

fn parse_spectrum_object(text: &str) -> Result<(String, Option<f64>), CliError> {
    let inner = text
        .trim()
        .strip_prefix('{')
        .and_then(|s| s.strip_suffix('}'))
        .ok_or_else(|| CliError::config(format!("malformed spectrum object `{text}`")))?;
    let mut kind = None;
    let mut param = None;
    for field in split_top_level(inner) {
        let Some((k, v)) = field.split_once(':') else {
            return Err(CliError::config(format!("malformed spectrum field `{field}`")));
        };
        let k = k.trim().trim_matches('"');
        let v = v.trim();
        match k {
            "kind" => kind = Some(v.trim_matches('"').to_ascii_lowercase()),
            "param" if v == "null" => param = None,
            "param" => {
                param = Some(v.parse::<f64>().map_err(|_| {
                    CliError::config(format!("bad spectrum param `{v}`"))
                })?)
            }
            other => return Err(CliError::config(format!("unknown spectrum field `{other}`"))),
        }
    }
    let kind = kind.ok_or_else(|| CliError::config("spectrum object missing `kind`"))?;
    Ok((kind, param))
}

fn split_top_level(s: &str) -> Vec<&str> {
    let mut parts = Vec::new();
    let mut depth = 0usize;
    let mut start = 0usize;
    let mut in_str = false;
    for (i, c) in s.char_indices() {
        match c {
            '"' => in_str = !in_str,
            '{' | '[' if !in_str => depth += 1,
            '}' | ']' if !in_str => depth = depth.saturating_sub(1),
            ',' if !in_str && depth == 0 => {
                parts.push(&s[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    if start < s.len() {
        parts.push(&s[start..]);
    }
    parts
}

fn build_spectrum(kind: &str, param: Option<f64>) -> Result<Spectrum, CliError> {
    let need = |what: &str| {
        param.ok_or_else(|| CliError::config(format!("spectrum `{what}` requires a param")))
    };
    let spec = match kind {
        "uniform" | "mean" => Ok(Spectrum::uniform()),
        "superquantile" | "cvar" => Spectrum::superquantile(need("superquantile")?),
        "extremile" => Spectrum::extremile(need("extremile")?),
        "esrm" => Spectrum::esrm(need("esrm")?),
        "truncated" => Spectrum::truncated_risk_seeking(need("truncated")?),
        "extremile_rs" => Spectrum::extremile_risk_seeking(need("extremile_rs")?),
        other => return Err(CliError::config(format!("unknown spectrum kind `{other}`"))),
    };
    spec.map_err(|e| CliError::config(e.to_string()))
}

/// The JSON object serialization of a spectrum (fixed `param` field).
pub fn spectrum_json(spectrum: &Spectrum) -> crate::json::Json {
    let mut o = crate::json::Json::obj();
    o.push("kind", crate::json::Json::Str(spectrum.name().to_string()));
    match spectrum.param() {
        Some(p) => o.push("param", crate::json::Json::Num(p)),
        None => o.push("param", crate::json::Json::Null),
    };
    o
}

/// Compact token used in output file names, e.g. `extremile2`.
pub fn spectrum_token(spectrum: &Spectrum) -> String {
    match spectrum.param() {
        Some(p) => format!("{}{}", spectrum.name(), p),
        None => spectrum.name().to_string(),
    }
}
