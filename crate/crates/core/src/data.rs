//! Dataset generation, standardization, splitting, and loss models.
//!
//! Feature matrices are dense row-major `f64`. Generated datasets are
//! bit-reproducible: all draws come from [`crate::rng::SplitMix64`] in a
//! documented order (rows first, coordinates within a row, then targets,
//! then the split shuffle).

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::risk::{dot, IndexedLoss};
use crate::rng::SplitMix64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

/// Supervision attached to the feature rows.
#[derive(Debug, Clone, PartialEq)]
pub enum Targets {
    /// Real-valued regression targets.
    Real(Vec<f64>),
    /// Class indices in `0..classes`.
    Class { labels: Vec<usize>, classes: usize },
    /// Unsupervised (clustering).
    None,
}

/// An immutable dataset: `n` rows of `d` features plus optional targets
/// and clustering bookkeeping.
#[derive(Debug, Clone)]
pub struct Dataset {
    features: Vec<f64>,
    n: usize,
    d: usize,
    pub targets: Targets,
    pub split: Split,
    /// Outlier flags for clustering data (empty otherwise).
    pub outlier: Vec<bool>,
    /// True cluster labels for clustering data (empty otherwise).
    pub cluster_label: Vec<usize>,
}

impl Dataset {
    pub fn from_rows(rows: &[Vec<f64>], targets: Targets, split: Split) -> Result<Self> {
        let n = rows.len();
        let d = rows.first().map_or(0, Vec::len);
        let mut features = Vec::with_capacity(n * d);
        for row in rows {
            if row.len() != d {
                return Err(Error::DimensionMismatch { expected: d, got: row.len() });
            }
            if row.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite { what: "feature row" });
            }
            features.extend_from_slice(row);
        }
        match &targets {
            Targets::Real(y) if y.len() != n => {
                return Err(Error::DimensionMismatch { expected: n, got: y.len() })
            }
            Targets::Real(y) if y.iter().any(|v| !v.is_finite()) => {
                return Err(Error::NonFinite { what: "targets" })
            }
            Targets::Class { labels, classes } => {
                if labels.len() != n {
                    return Err(Error::DimensionMismatch { expected: n, got: labels.len() });
                }
                if let Some(&bad) = labels.iter().find(|&&c| c >= *classes) {
                    return Err(Error::IndexOutOfRange { index: bad, len: *classes });
                }
            }
            _ => {}
        }
        Ok(Self { features, n, d, targets, split, outlier: Vec::new(), cluster_label: Vec::new() })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.d..(i + 1) * self.d]
    }

    pub fn feature(&self, i: usize, j: usize) -> f64 {
        self.features[i * self.d + j]
    }
}

/// Train/test pair produced by generators and loaders.
#[derive(Debug, Clone)]
pub struct DataSplit {
    pub train: Dataset,
    pub test: Dataset,
}

/// Deterministic 80/20 split: a seeded Fisher-Yates shuffle of `0..n`,
/// with the first `⌊4n/5⌋` indices as train. Disjoint and exhaustive.
pub fn split_80_20(n: usize, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = SplitMix64::substream(seed, 0x5117);
    rng.sample_without_replacement(&mut idx, n);
    let n_train = 4 * n / 5;
    let test = idx.split_off(n_train);
    (idx, test)
}

fn gather(rows: &[Vec<f64>], y: &[f64], idx: &[usize], split: Split) -> Dataset {
    let picked: Vec<Vec<f64>> = idx.iter().map(|&i| rows[i].clone()).collect();
    let targets = Targets::Real(idx.iter().map(|&i| y[i]).collect());
    Dataset::from_rows(&picked, targets, split).expect("generated rows are finite")
}

/// Noisy linear regression data: `x_i ~ N(0, I_d)`, `w* ~ N(0, I_d)`,
/// `y_i = w*ᵀx_i + ε_i` with unit noise. Split 80/20 by a shuffled index
/// permutation, then standardized (features and targets) on the train
/// statistics.
pub fn generate_simulated(n: usize, d: usize, seed: u64) -> DataSplit {
    let mut rng = SplitMix64::substream(seed, 0x51_4D);
    let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.normal()).collect()).collect();
    let w_star: Vec<f64> = (0..d).map(|_| rng.normal()).collect();
    let y: Vec<f64> = rows.iter().map(|x| dot(x, &w_star) + rng.normal()).collect();
    let (train_idx, test_idx) = split_80_20(n, seed);
    let mut train = gather(&rows, &y, &train_idx, Split::Train);
    let mut test = gather(&rows, &y, &test_idx, Split::Test);
    standardize(&mut train, &mut test);
    DataSplit { train, test }
}

/// Layout of the synthetic clustering task: Gaussian inlier clouds plus
/// one outlier cloud. Coordinates are kept in the layout's raw scale.
#[derive(Debug, Clone)]
pub struct ClusterLayout {
    pub centers: Vec<Vec<f64>>,
    pub points_per_cluster: usize,
    /// Per-axis variance of the inlier clouds.
    pub cluster_variance: f64,
    pub outliers: usize,
    pub outlier_center: Vec<f64>,
    pub outlier_variance: f64,
    pub test_per_cluster: usize,
}

impl Default for ClusterLayout {
    /// Three clouds of 100 two-dimensional points (variance 0.1) centered
    /// at (−3,0), (0,1), (3,0), plus 100 outliers (variance 5) centered
    /// at (−1,−5); the test set has 100 fresh inliers per cloud.
    fn default() -> Self {
        Self {
            centers: vec![vec![-3.0, 0.0], vec![0.0, 1.0], vec![3.0, 0.0]],
            points_per_cluster: 100,
            cluster_variance: 0.1,
            outliers: 100,
            outlier_center: vec![-1.0, -5.0],
            outlier_variance: 5.0,
            test_per_cluster: 100,
        }
    }
}

/// Synthetic clustering data per the layout. The train set carries
/// outlier flags and true cluster labels (outliers are labeled `k`); the
/// test set contains inliers only.
pub fn generate_gaussian_clusters(layout: &ClusterLayout, seed: u64) -> DataSplit {
    let k = layout.centers.len();
    let std_in = crate::fmath::sqrt(layout.cluster_variance);
    let std_out = crate::fmath::sqrt(layout.outlier_variance);
    let mut rng = SplitMix64::substream(seed, 0xC1_05);

    let mut rows = Vec::new();
    let mut labels = Vec::new();
    let mut outlier = Vec::new();
    for (c, center) in layout.centers.iter().enumerate() {
        for _ in 0..layout.points_per_cluster {
            rows.push(center.iter().map(|&m| m + std_in * rng.normal()).collect::<Vec<f64>>());
            labels.push(c);
            outlier.push(false);
        }
    }
    for _ in 0..layout.outliers {
        rows.push(
            layout.outlier_center.iter().map(|&m| m + std_out * rng.normal()).collect::<Vec<f64>>(),
        );
        labels.push(k);
        outlier.push(true);
    }
    let mut train = Dataset::from_rows(&rows, Targets::None, Split::Train).expect("finite rows");
    train.outlier = outlier;
    train.cluster_label = labels;

    let mut test_rows = Vec::new();
    let mut test_labels = Vec::new();
    for (c, center) in layout.centers.iter().enumerate() {
        for _ in 0..layout.test_per_cluster {
            test_rows
                .push(center.iter().map(|&m| m + std_in * rng.normal()).collect::<Vec<f64>>());
            test_labels.push(c);
        }
    }
    let mut test = Dataset::from_rows(&test_rows, Targets::None, Split::Test).expect("finite rows");
    test.outlier = vec![false; test.n()];
    test.cluster_label = test_labels;
    DataSplit { train, test }
}

/// Column statistics fitted on the train split.
#[derive(Debug, Clone)]
pub struct Standardization {
    /// Indices of columns kept (constant columns are dropped).
    pub kept: Vec<usize>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    /// `(mean, std)` of the regression target, when standardized.
    pub target: Option<(f64, f64)>,
    /// Human-readable notes, e.g. dropped columns.
    pub notes: Vec<String>,
}

const CONSTANT_VARIANCE: f64 = 1e-12;

/// Standardizes features (and regression targets) to zero mean and unit
/// variance using train statistics; applies the same transform to the
/// test split. Constant train columns are dropped from both splits.
/// Idempotent: re-standardizing already standardized data is a no-op.
pub fn standardize(train: &mut Dataset, test: &mut Dataset) -> Standardization {
    let n = train.n;
    let d = train.d;
    let mut kept = Vec::new();
    let mut mean = Vec::new();
    let mut std = Vec::new();
    let mut notes = Vec::new();
    for j in 0..d {
        let m = (0..n).map(|i| train.feature(i, j)).sum::<f64>() / n as f64;
        let var = (0..n).map(|i| {
            let c = train.feature(i, j) - m;
            c * c
        }).sum::<f64>() / n as f64;
        if var <= CONSTANT_VARIANCE {
            notes.push(alloc::format!("dropped constant feature column {j}"));
            continue;
        }
        kept.push(j);
        mean.push(m);
        std.push(crate::fmath::sqrt(var));
    }
    for ds in [&mut *train, &mut *test] {
        let mut out = Vec::with_capacity(ds.n * kept.len());
        for i in 0..ds.n {
            for (col, &j) in kept.iter().enumerate() {
                out.push((ds.feature(i, j) - mean[col]) / std[col]);
            }
        }
        ds.features = out;
        ds.d = kept.len();
    }
    let mut target = None;
    if let Targets::Real(y) = &train.targets {
        let m = y.iter().sum::<f64>() / n as f64;
        let var = y.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n as f64;
        if var > CONSTANT_VARIANCE {
            let s = crate::fmath::sqrt(var);
            target = Some((m, s));
            for ds in [&mut *train, &mut *test] {
                if let Targets::Real(y) = &mut ds.targets {
                    for v in y.iter_mut() {
                        *v = (*v - m) / s;
                    }
                }
            }
        }
    }
    Standardization { kept, mean, std, target, notes }
}

/// The three loss families over a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    /// `ℓ_i(w) = ½ (y_i − wᵀx_i)²` with `w ∈ R^d`.
    Squared,
    /// Multinomial logistic regression: `ℓ_i(w)` is the negative
    /// log-probability of the true class; `w ∈ R^{d·C}`, class-major.
    MultinomialLogistic { classes: usize },
    /// Nearest-center squared distance `min_j ‖x_i − c_j‖²`;
    /// `w ∈ R^{d·k}`, center-major. Non-convex.
    KMeans { k: usize },
}

/// Per-index loss/gradient oracle bound to a dataset split.
#[derive(Debug, Clone, Copy)]
pub struct LossModel<'a> {
    kind: LossKind,
    data: &'a Dataset,
}

impl<'a> LossModel<'a> {
    pub fn new(kind: LossKind, data: &'a Dataset) -> Result<Self> {
        match kind {
            LossKind::Squared => {
                if !matches!(data.targets, Targets::Real(_)) {
                    return Err(Error::InvalidConfig(
                        "squared loss requires real-valued targets".into(),
                    ));
                }
            }
            LossKind::MultinomialLogistic { classes } => match &data.targets {
                Targets::Class { classes: have, .. } if *have == classes && classes >= 2 => {}
                _ => {
                    return Err(Error::InvalidConfig(
                        "logistic loss requires class targets with matching class count".into(),
                    ))
                }
            },
            LossKind::KMeans { k } => {
                if k == 0 || k > data.n() {
                    return Err(Error::InvalidConfig("k must be in 1..=n".into()));
                }
            }
        }
        Ok(Self { kind, data })
    }

    pub fn kind(&self) -> LossKind {
        self.kind
    }

    pub fn data(&self) -> &'a Dataset {
        self.data
    }

    pub fn is_convex(&self) -> bool {
        !matches!(self.kind, LossKind::KMeans { .. })
    }

    /// Loss and gradient with typed errors (index and dimension checks).
    pub fn loss_and_grad(&self, index: usize, w: &[f64]) -> Result<(f64, Vec<f64>)> {
        if index >= self.data.n() {
            return Err(Error::IndexOutOfRange { index, len: self.data.n() });
        }
        if w.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: w.len() });
        }
        if w.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite { what: "parameters" });
        }
        let mut grad = vec![0.0; self.dim()];
        let loss = self.loss_grad(index, w, &mut grad);
        Ok((loss, grad))
    }

    fn squared(&self, i: usize, w: &[f64], grad: Option<&mut [f64]>) -> f64 {
        let y = match &self.data.targets {
            Targets::Real(y) => y[i],
            _ => unreachable!(),
        };
        let x = self.data.row(i);
        let residual = dot(w, x) - y;
        if let Some(g) = grad {
            for (gj, xj) in g.iter_mut().zip(x.iter()) {
                *gj = residual * xj;
            }
        }
        0.5 * residual * residual
    }

    fn logistic(&self, i: usize, w: &[f64], grad: Option<&mut [f64]>, classes: usize) -> f64 {
        let y = match &self.data.targets {
            Targets::Class { labels, .. } => labels[i],
            _ => unreachable!(),
        };
        let x = self.data.row(i);
        let d = self.data.dim();
        let mut scores: Vec<f64> = (0..classes).map(|c| dot(&w[c * d..(c + 1) * d], x)).collect();
        let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        for s in scores.iter_mut() {
            *s -= max;
        }
        let total: f64 = scores.iter().map(|&s| crate::fmath::exp(s)).sum();
        let loss = crate::fmath::ln(total) - scores[y];
        if let Some(g) = grad {
            for c in 0..classes {
                let p = crate::fmath::exp(scores[c]) / total;
                let coeff = p - if c == y { 1.0 } else { 0.0 };
                for (gj, xj) in g[c * d..(c + 1) * d].iter_mut().zip(x.iter()) {
                    *gj = coeff * xj;
                }
            }
        }
        loss
    }

    fn kmeans(&self, i: usize, w: &[f64], grad: Option<&mut [f64]>, k: usize) -> f64 {
        let x = self.data.row(i);
        let d = self.data.dim();
        let (best, dist) = nearest_center(w, d, k, x);
        if let Some(g) = grad {
            g.fill(0.0);
            let block = &mut g[best * d..(best + 1) * d];
            let center = &w[best * d..(best + 1) * d];
            for ((gj, cj), xj) in block.iter_mut().zip(center.iter()).zip(x.iter()) {
                *gj = 2.0 * (cj - xj);
            }
        }
        dist
    }
}

/// Index and squared distance of the nearest center (ties break to the
/// lowest center index).
pub fn nearest_center(centers: &[f64], d: usize, k: usize, x: &[f64]) -> (usize, f64) {
    let mut best = 0usize;
    let mut best_dist = f64::INFINITY;
    for j in 0..k {
        let c = &centers[j * d..(j + 1) * d];
        let dist: f64 = c.iter().zip(x.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
        if dist < best_dist {
            best = j;
            best_dist = dist;
        }
    }
    (best, best_dist)
}

impl<'a> IndexedLoss for LossModel<'a> {
    fn n_components(&self) -> usize {
        self.data.n()
    }

    fn dim(&self) -> usize {
        match self.kind {
            LossKind::Squared => self.data.dim(),
            LossKind::MultinomialLogistic { classes } => self.data.dim() * classes,
            LossKind::KMeans { k } => self.data.dim() * k,
        }
    }

    fn loss(&self, index: usize, w: &[f64]) -> f64 {
        match self.kind {
            LossKind::Squared => self.squared(index, w, None),
            LossKind::MultinomialLogistic { classes } => self.logistic(index, w, None, classes),
            LossKind::KMeans { k } => self.kmeans(index, w, None, k),
        }
    }

    fn loss_grad(&self, index: usize, w: &[f64], grad: &mut [f64]) -> f64 {
        match self.kind {
            LossKind::Squared => self.squared(index, w, Some(grad)),
            LossKind::MultinomialLogistic { classes } => {
                self.logistic(index, w, Some(grad), classes)
            }
            LossKind::KMeans { k } => self.kmeans(index, w, Some(grad), k),
        }
    }
}
