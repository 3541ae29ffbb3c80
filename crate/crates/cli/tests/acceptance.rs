//! Acceptance suite: one test per documented acceptance criterion, each
//! printing a `criterion NN: pass` line (visible with `--nocapture`).

use std::path::PathBuf;
use std::time::Instant;

use srm_cli::config::{DatasetSpec, ExperimentConfig, LossSpec};
use srm_cli::{cluster, experiment};
use srm_core::analysis::{consistency_mse, exhaustive_bias, Population};
use srm_core::data::{generate_simulated, Dataset, LossKind, LossModel, Split, Targets};
use srm_core::optim::{qsvrg_run, Algorithm};
use srm_core::quad;
use srm_core::rng::SplitMix64;
use srm_core::smoothing::{
    in_permutahedron, omega_value, smoothed_oracle, SmoothingConfig,
};
use srm_core::spectra::SpectrumKind;
use srm_core::{fd, IndexedLoss, RegularizedObjective, Spectrum};

fn pass(criterion: u32, started: Instant, detail: &str) {
    println!(
        "criterion {criterion:02}: pass ({:.2}s) {detail}",
        started.elapsed().as_secs_f64()
    );
}

fn tempdir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("srm_accept_{tag}_{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

/// Solves `A w = b` by Gaussian elimination with partial pivoting.
fn solve_linear(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let d = b.len();
    for col in 0..d {
        let pivot = (col..d)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())
            .unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in (col + 1)..d {
            let f = a[row][col] / a[col][col];
            for k in col..d {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut w = vec![0.0; d];
    for col in (0..d).rev() {
        let mut acc = b[col];
        for k in (col + 1)..d {
            acc -= a[col][k] * w[k];
        }
        w[col] = acc / a[col][col];
    }
    w
}

fn ridge_solution(data: &Dataset, mu: f64) -> Vec<f64> {
    let n = data.n();
    let d = data.dim();
    let y = match &data.targets {
        Targets::Real(y) => y.clone(),
        _ => panic!("ridge needs regression targets"),
    };
    let mut a = vec![vec![0.0; d]; d];
    let mut b = vec![0.0; d];
    for i in 0..n {
        let x = data.row(i);
        for j in 0..d {
            for k in 0..d {
                a[j][k] += x[j] * x[k] / n as f64;
            }
            b[j] += x[j] * y[i] / n as f64;
        }
    }
    for j in 0..d {
        a[j][j] += mu;
    }
    solve_linear(a, b)
}

fn all_kinds() -> Vec<Spectrum> {
    vec![
        Spectrum::uniform(),
        Spectrum::superquantile(0.5).unwrap(),
        Spectrum::extremile(2.0).unwrap(),
        Spectrum::esrm(1.0).unwrap(),
        Spectrum::truncated_risk_seeking(0.75).unwrap(),
        Spectrum::extremile_risk_seeking(5.0).unwrap(),
    ]
}

fn bin_quadrature(spec: &Spectrum, lo: f64, hi: f64) -> f64 {
    let jump = match spec.kind() {
        SpectrumKind::Superquantile { q } => Some(q),
        SpectrumKind::TruncatedRiskSeeking { q } => Some(q),
        _ => None,
    };
    let f = |t: f64| if t <= 0.0 || t >= 1.0 { 0.0 } else { spec.density(t) };
    match jump {
        Some(q) if q > lo && q < hi => {
            quad::integrate(&f, lo, q, 5e-13).0 + quad::integrate(&f, q, hi, 5e-13).0
        }
        _ => quad::integrate(&f, lo, hi, 1e-12).0,
    }
}

#[test]
fn acceptance_01_spectrum_discretization() {
    let started = Instant::now();
    for spec in all_kinds() {
        for n in [1usize, 2, 5, 100] {
            let sigma = spec.discretize(n).unwrap();
            let sum: f64 = sigma.iter().sum();
            assert!((sum - 1.0).abs() <= 1e-12, "{spec:?} n={n}: sum {sum}");
            let slice = sigma.as_slice();
            let monotone = if spec.is_risk_averse() {
                slice.windows(2).all(|w| w[0] <= w[1] + 1e-12)
            } else {
                slice.windows(2).all(|w| w[0] + 1e-12 >= w[1])
            };
            assert!(monotone, "{spec:?} n={n}: not monotone");
            for i in 0..n {
                let q = bin_quadrature(&spec, i as f64 / n as f64, (i + 1) as f64 / n as f64);
                assert!(
                    (slice[i] - q).abs() <= 1e-9,
                    "{spec:?} n={n} bin {i}: {} vs {q}",
                    slice[i]
                );
            }
        }
    }
    let sigma = Spectrum::extremile(2.0).unwrap().discretize(5).unwrap();
    let expected = [0.04, 0.12, 0.20, 0.28, 0.36];
    for (got, want) in sigma.iter().zip(expected.iter()) {
        assert!((got - want).abs() < 1e-15, "{got} vs {want}");
    }
    pass(1, started, "discretization exact for all kinds, n in {1,2,5,100}");
}

#[test]
fn acceptance_02_subgradient_correctness() {
    let started = Instant::now();
    let mut rng = SplitMix64::new(0xACC2);

    // Datasets for the three loss models.
    let n = 60;
    let d = 4;
    let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.normal()).collect()).collect();
    let y: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
    let labels: Vec<usize> = (0..n).map(|_| rng.below(3)).collect();
    let reg_data = Dataset::from_rows(&rows, Targets::Real(y), Split::Train).unwrap();
    let cls_data =
        Dataset::from_rows(&rows, Targets::Class { labels, classes: 3 }, Split::Train).unwrap();
    let clu_data = Dataset::from_rows(&rows, Targets::None, Split::Train).unwrap();
    let squared = LossModel::new(LossKind::Squared, &reg_data).unwrap();
    let logistic = LossModel::new(LossKind::MultinomialLogistic { classes: 3 }, &cls_data).unwrap();
    let kmeans = LossModel::new(LossKind::KMeans { k: 2 }, &clu_data).unwrap();

    let spectra = [
        Spectrum::superquantile(0.5).unwrap(),
        Spectrum::extremile(2.0).unwrap(),
        Spectrum::esrm(1.0).unwrap(),
    ];

    // Finite-difference agreement at 100 distinct-loss points per
    // (loss model, spectrum).
    let models: [(&str, &dyn IndexedLoss); 3] =
        [("squared", &squared), ("logistic", &logistic), ("kmeans", &kmeans)];
    for (name, model) in models {
        for spec in &spectra {
            let sigma = spec.discretize(n).unwrap();
            let obj = RegularizedObjective::new(sigma, 0.01, &model).unwrap();
            let mut checked = 0;
            let mut attempts = 0;
            while checked < 100 {
                attempts += 1;
                assert!(attempts < 10_000, "{name}/{spec:?}: cannot find distinct-loss points");
                let w: Vec<f64> = (0..obj.dim()).map(|_| rng.normal()).collect();
                let mut losses = obj.losses(&w);
                losses.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
                if losses.windows(2).any(|p| p[1] - p[0] < 1e-4) {
                    continue;
                }
                if name == "kmeans" {
                    // Exclude assignment ties as well.
                    let mut tie = false;
                    for i in 0..n {
                        let x = clu_data.row(i);
                        let mut dist: Vec<f64> = (0..2)
                            .map(|j| {
                                w[j * d..(j + 1) * d]
                                    .iter()
                                    .zip(x.iter())
                                    .map(|(a, b)| (a - b) * (a - b))
                                    .sum()
                            })
                            .collect();
                        dist.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
                        if dist[1] - dist[0] < 1e-3 {
                            tie = true;
                            break;
                        }
                    }
                    if tie {
                        continue;
                    }
                }
                checked += 1;
                let g = obj.subgradient(&w).unwrap();
                let fdg = fd::central_diff_grad(|v: &[f64]| obj.value(v).unwrap(), &w, 1e-6);
                let err = fd::max_relative_error(&g, &fdg);
                assert!(err <= 1e-5, "{name}/{spec:?}: fd error {err}");
            }
        }
    }

    // Subgradient inequality on 10^4 random pairs (convex models).
    let mut count = 0;
    while count < 10_000 {
        let (obj, dim): (RegularizedObjective<'_, &dyn IndexedLoss>, usize) = if count % 2 == 0 {
            let sigma = spectra[count % 3].discretize(n).unwrap();
            (
                RegularizedObjective::new(sigma, 0.05, &models[0].1).unwrap(),
                d,
            )
        } else {
            let sigma = spectra[count % 3].discretize(n).unwrap();
            (
                RegularizedObjective::new(sigma, 0.05, &models[1].1).unwrap(),
                d * 3,
            )
        };
        let w: Vec<f64> = (0..dim).map(|_| 1.5 * rng.normal()).collect();
        let v: Vec<f64> = (0..dim).map(|_| 1.5 * rng.normal()).collect();
        let g = obj.subgradient(&w).unwrap();
        let lhs = obj.value(&v).unwrap();
        let rhs = obj.value(&w).unwrap()
            + g.iter().zip(v.iter().zip(w.iter())).map(|(gi, (vi, wi))| gi * (vi - wi)).sum::<f64>();
        assert!(lhs >= rhs - 1e-10, "subgradient inequality violated: {lhs} < {rhs}");
        count += 1;
    }
    pass(2, started, "fd agreement at 900 points; inequality on 10^4 pairs");
}

#[test]
fn acceptance_03_permutahedron_smoothing() {
    let started = Instant::now();
    let mut rng = SplitMix64::new(0xACC3);
    // Duality gap, feasibility, sandwich on 10^4 random instances.
    for trial in 0..10_000 {
        let n = 2 + rng.below(49);
        let spec = match rng.below(4) {
            0 => Spectrum::uniform(),
            1 => Spectrum::superquantile(0.1 + 0.8 * rng.next_f64()).unwrap(),
            2 => Spectrum::extremile(1.0 + 3.0 * rng.next_f64()).unwrap(),
            _ => Spectrum::esrm(0.2 + 3.0 * rng.next_f64()).unwrap(),
        };
        let sigma = spec.discretize(n).unwrap();
        let losses: Vec<f64> = (0..n).map(|_| 4.0 * rng.normal()).collect();
        let nu = 10f64.powf(-2.0 + 3.0 * rng.next_f64());
        let entropic_ok = sigma.iter().all(|&s| s > 0.0);
        let cfg = if trial % 2 == 0 || !entropic_ok {
            SmoothingConfig::quadratic(nu).unwrap()
        } else {
            SmoothingConfig::entropic(nu).unwrap()
        };
        let eval = smoothed_oracle(&cfg, &sigma, &losses).unwrap();
        assert!(eval.dual_gap <= 1e-8 * (1.0 + eval.value.abs()), "gap {}", eval.dual_gap);
        assert!(in_permutahedron(&eval.lambda, &sigma, 1e-10), "infeasible lambda");
        let h = srm_core::risk::l_statistic(&sigma, &losses).unwrap();
        let bound = nu * omega_value(cfg.regularizer(), sigma.as_slice());
        let gap = h - eval.value;
        assert!(gap >= -1e-10 && gap <= bound + 1e-10, "sandwich violated: {gap} vs {bound}");
    }

    // n = 2 segment-grid oracle agreement within 1e-7.
    for trial in 0..300 {
        let spec = match trial % 3 {
            0 => Spectrum::extremile(1.0 + 3.0 * rng.next_f64()).unwrap(),
            1 => Spectrum::esrm(0.2 + 3.0 * rng.next_f64()).unwrap(),
            _ => Spectrum::superquantile(0.1 + 0.8 * rng.next_f64()).unwrap(),
        };
        let sigma = spec.discretize(2).unwrap();
        let losses = [2.0 * rng.normal(), 2.0 * rng.normal()];
        let nu = 10f64.powf(-1.5 + 2.0 * rng.next_f64());
        let cfg = SmoothingConfig::quadratic(nu).unwrap();
        let eval = smoothed_oracle(&cfg, &sigma, &losses).unwrap();
        let (a, b) = (sigma[0], sigma[1]);
        let mut grid_max = f64::NEG_INFINITY;
        for k in 0..=100_000 {
            let t = k as f64 / 1e5;
            let lam = [a + t * (b - a), b + t * (a - b)];
            let v = lam[0] * losses[0] + lam[1] * losses[1]
                - nu * omega_value(cfg.regularizer(), &lam);
            grid_max = grid_max.max(v);
        }
        assert!(grid_max <= eval.value + 1e-9);
        assert!(eval.value - grid_max <= 1e-7, "{} vs {grid_max}", eval.value);
    }

    // Divergence closed forms matched by quadrature within 1e-8.
    let sq = Spectrum::superquantile(0.5).unwrap();
    let (kl, chi2) = sq.divergence_to_uniform().unwrap();
    assert!((kl - std::f64::consts::LN_2).abs() < 1e-12);
    assert!((chi2 - 1.0).abs() < 1e-12);
    let f_kl = |t: f64| {
        let s = sq.density(t);
        if s > 0.0 {
            s * s.ln()
        } else {
            0.0
        }
    };
    let f_chi = |t: f64| {
        let d = sq.density(t) - 1.0;
        d * d
    };
    let kl_quad =
        quad::integrate(&f_kl, 0.5, 1.0 - 1e-16, 1e-10).0 + quad::integrate(&f_kl, 1e-12, 0.5, 1e-10).0;
    let chi_quad =
        quad::integrate(&f_chi, 0.5, 1.0 - 1e-16, 1e-10).0 + quad::integrate(&f_chi, 1e-12, 0.5, 1e-10).0;
    assert!((kl - kl_quad).abs() <= 1e-8, "superquantile KL {kl} vs quadrature {kl_quad}");
    assert!((chi2 - chi_quad).abs() <= 1e-8);
    let ex = Spectrum::extremile(2.0).unwrap();
    let (_, chi2) = ex.divergence_to_uniform().unwrap();
    assert!((chi2 - 1.0 / 3.0).abs() < 1e-12);
    let g_chi = |t: f64| {
        let d = ex.density(t) - 1.0;
        d * d
    };
    let chi_quad = quad::integrate(&g_chi, 1e-14, 1.0 - 1e-16, 1e-10).0;
    assert!((chi2 - chi_quad).abs() <= 1e-8);
    pass(3, started, "10^4 certificates, n=2 grid oracle, divergence closed forms");
}

#[test]
fn acceptance_04_bias_bound() {
    let started = Instant::now();
    let spectra = [
        Spectrum::superquantile(0.5).unwrap(),
        Spectrum::extremile(2.0).unwrap(),
        Spectrum::esrm(1.0).unwrap(),
    ];
    let mut rng = SplitMix64::new(0xACC4);
    for spec in &spectra {
        for n in 4..=10usize {
            for _ in 0..50 {
                let losses: Vec<f64> = (0..n).map(|_| 3.0 * rng.normal()).collect();
                for m in 1..=n {
                    let (bias, bound) = exhaustive_bias(spec, &losses, m).unwrap();
                    assert!(
                        bias <= bound + 1e-12,
                        "{spec:?} n={n} m={m}: bias {bias} > bound {bound}"
                    );
                    if m == n {
                        assert!(bias <= 1e-12, "full batch bias {bias}");
                    }
                }
            }
        }
    }
    // Uniform spectrum: zero bias at every m.
    let uniform = Spectrum::uniform();
    for n in 4..=10usize {
        let losses: Vec<f64> = (0..n).map(|_| 3.0 * rng.normal()).collect();
        for m in 1..=n {
            let (bias, _) = exhaustive_bias(&uniform, &losses, m).unwrap();
            assert!(bias <= 1e-12, "uniform n={n} m={m}: bias {bias}");
        }
    }
    pass(4, started, "exhaustive enumeration n=4..10, all m, 3 spectra");
}

#[test]
fn acceptance_05_consistency_rate() {
    let started = Instant::now();
    let spec = Spectrum::superquantile(0.5).unwrap();
    let population = Population::Exponential { rate: 1.0 };
    let sizes: Vec<usize> = (0..8).map(|j| 100usize << j).collect();
    let report = consistency_mse(&spec, &population, &sizes, 2000, 0xACC5).unwrap();
    assert!(
        (report.ground_truth - (1.0 + std::f64::consts::LN_2)).abs() <= 1e-8,
        "ground truth {} vs 1+ln2",
        report.ground_truth
    );
    assert!(
        report.slope >= -1.25 && report.slope <= -0.75,
        "slope {} outside [-1.25,-0.75]; mse {:?}",
        report.slope,
        report.mse
    );
    pass(5, started, &format!("slope {:.4}, L_s[F] = 1 + ln 2", report.slope));
}

#[test]
fn acceptance_06_qsvrg_rate() {
    let started = Instant::now();
    let n = 200usize;
    let d = 20usize;
    let mu = 0.1;
    let mut rng = SplitMix64::new(0xACC6);
    let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.normal()).collect()).collect();
    let w_true: Vec<f64> = (0..d).map(|_| rng.normal()).collect();
    let y: Vec<f64> = rows
        .iter()
        .map(|x| x.iter().zip(w_true.iter()).map(|(a, b)| a * b).sum::<f64>() + rng.normal())
        .collect();
    let data = Dataset::from_rows(&rows, Targets::Real(y), Split::Train).unwrap();
    let model = LossModel::new(LossKind::Squared, &data).unwrap();
    let w_star = ridge_solution(&data, mu);

    // Component smoothness: each ℓ_i + (μ/2)‖w‖² is (‖x_i‖² + μ)-smooth.
    let l_max = (0..n)
        .map(|i| data.row(i).iter().map(|v| v * v).sum::<f64>() + mu)
        .fold(0.0f64, f64::max);
    let eta = 2.0 / (8.0 * l_max + n as f64 * mu);
    let kappa = l_max / mu;
    let big_n = n as u64;
    let snapshots = [big_n, 2 * big_n, 4 * big_n];
    let w0 = vec![0.0; d];
    let d0: f64 = w_star.iter().map(|x| x * x).sum();

    let mut mean_sq = [0.0f64; 3];
    let seeds = 100;
    for seed in 0..seeds {
        let out = qsvrg_run(&model, mu, eta, 1.0 / n as f64, 4 * big_n, seed, &snapshots, &w0)
            .unwrap();
        for (k, snap) in out.snapshots.iter().enumerate() {
            let dist: f64 =
                snap.iter().zip(w_star.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
            mean_sq[k] += dist / seeds as f64;
        }
    }
    for (k, &t) in snapshots.iter().enumerate() {
        let bound = 1.25 * (-(t as f64) / (8.0 * kappa + n as f64)).exp() * d0;
        assert!(
            mean_sq[k] <= bound,
            "t={t}: E‖w−w*‖² = {} > bound {bound}",
            mean_sq[k]
        );
    }
    pass(6, started, &format!("rate bound held at t = N, 2N, 4N (kappa {kappa:.1})"));
}

fn comparison_protocol_config(spectrum: Spectrum) -> ExperimentConfig {
    ExperimentConfig {
        name: "simulated".into(),
        dataset: DatasetSpec::Simulated { n: 1000, d: 10 },
        loss: LossSpec::Squared,
        spectrum,
        algorithms: vec![Algorithm::Sgd, Algorithm::Srda, Algorithm::LsvrgUniform],
        ..ExperimentConfig::default()
    }
}

#[test]
fn acceptance_07_optimizer_separation() {
    let started = Instant::now();
    for spectrum in [Spectrum::extremile(2.0).unwrap(), Spectrum::esrm(1.0).unwrap()] {
        let cfg = comparison_protocol_config(spectrum);
        let dir = tempdir(&format!("c7_{}", spectrum.name()));
        let summary = experiment::run_experiment(&cfg, dir.to_str().unwrap(), 2).unwrap();
        let mut lsvrg_hits = 0;
        let mut sgd_hits = 0;
        let mut srda_hits = 0;
        for run in &summary.runs {
            let final_gap = run.curve.final_gap();
            println!(
                "criterion 07 [{}]: {} seed {} eta {} final gap {final_gap:e}",
                spectrum.name(),
                run.algorithm.name(),
                run.seed,
                run.eta
            );
            match run.algorithm {
                Algorithm::LsvrgUniform => {
                    if final_gap <= 1e-6 {
                        lsvrg_hits += 1;
                    }
                }
                Algorithm::Sgd => {
                    if final_gap >= 1e-3 {
                        sgd_hits += 1;
                    }
                }
                Algorithm::Srda => {
                    if final_gap >= 1e-3 {
                        srda_hits += 1;
                    }
                }
                _ => {}
            }
        }
        assert!(
            lsvrg_hits >= 4,
            "{}: tuned LSVRG reached 1e-6 on only {lsvrg_hits}/5 seeds",
            spectrum.name()
        );
        assert!(
            sgd_hits >= 4 && srda_hits >= 4,
            "{}: tuned SGD/SRDA fell below the 1e-3 floor (sgd {sgd_hits}/5, srda {srda_hits}/5); \
             their measured plateau sits near 1e-4 on this instance",
            spectrum.name()
        );
    }
    pass(7, started, "lsvrg <= 1e-6 and sgd/srda >= 1e-3 on >= 4/5 seeds");
}

#[test]
fn acceptance_08_smoothed_vs_nonsmooth_lsvrg() {
    let started = Instant::now();
    let mut cfg = comparison_protocol_config(Spectrum::extremile(2.0).unwrap());
    cfg.algorithms = vec![Algorithm::LsvrgUniform, Algorithm::LsvrgSmoothed];
    // ν₂ = n·10⁻³ with the quadratic regularizer (n = 800 train rows).
    cfg.smoothing = Some(SmoothingConfig::quadratic(800.0 * 1e-3).unwrap());
    let dir = tempdir("c8");
    let summary = experiment::run_experiment(&cfg, dir.to_str().unwrap(), 2).unwrap();
    for &seed in &cfg.seeds {
        let find = |alg: Algorithm| {
            summary
                .runs
                .iter()
                .find(|r| r.algorithm == alg && r.seed == seed)
                .map(|r| r.curve.final_gap())
                .unwrap()
        };
        let plain = find(Algorithm::LsvrgUniform);
        let smooth = find(Algorithm::LsvrgSmoothed);
        // Floor at 1e-10: below that both sit in summation noise on the
        // normalized scale.
        let ratio = (plain.max(1e-10) / smooth.max(1e-10)).log10().abs();
        assert!(
            ratio <= 1.0,
            "seed {seed}: smoothed {smooth:e} vs non-smooth {plain:e} differ by 10^{ratio:.2}"
        );
    }
    pass(8, started, "final gaps within one order of magnitude on all seeds");
}

#[test]
fn acceptance_09_robust_clustering() {
    let started = Instant::now();
    let cfg = ExperimentConfig {
        name: "clusters".into(),
        dataset: DatasetSpec::Clusters,
        loss: LossSpec::KMeans { k: 3 },
        lr_grid: vec![1.0],
        batch_size: 64,
        max_passes: 64,
        ..ExperimentConfig::default()
    };
    let dir = tempdir("c9");
    let outcomes = cluster::run_clustering(&cfg, dir.to_str().unwrap(), 2).unwrap();
    let hits = |name: &str, f: &dyn Fn(f64) -> bool| {
        outcomes
            .iter()
            .filter(|o| o.spectrum.name() == name && f(o.test_accuracy))
            .count()
    };
    let truncated_perfect = hits("truncated", &|a| a == 1.0);
    let extremile_perfect = hits("extremile_rs", &|a| a == 1.0);
    let uniform_imperfect = hits("uniform", &|a| a < 1.0);
    assert!(truncated_perfect >= 4, "truncated reached 100% on {truncated_perfect}/5 seeds");
    assert!(extremile_perfect >= 4, "extremile_rs reached 100% on {extremile_perfect}/5 seeds");
    assert!(uniform_imperfect >= 4, "uniform was perfect on {}/5 seeds", 5 - uniform_imperfect);
    pass(
        9,
        started,
        &format!(
            "truncated {truncated_perfect}/5, extremile_rs {extremile_perfect}/5 perfect; uniform {uniform_imperfect}/5 imperfect"
        ),
    );
}

#[test]
fn acceptance_10_srda_sgd_equivalence() {
    let started = Instant::now();
    // 1000 steps: n = 800 train rows, m = 64, 80 passes.
    let ds = generate_simulated(1000, 10, 3);
    let n = ds.train.n();
    let model = LossModel::new(LossKind::Squared, &ds.train).unwrap();
    let spectrum = Spectrum::extremile(2.0).unwrap();
    let sigma = spectrum.discretize(n).unwrap();
    let obj = RegularizedObjective::new(sigma, 0.0, &model).unwrap();
    let mk = |alg| {
        srm_core::optim::OptimizerConfig::new(
            alg,
            srm_core::optim::LearningRate::Constant(0.01),
            7,
            80,
        )
        .with_batch_size(64)
    };
    let sgd = srm_core::optim::run(&obj, &spectrum, &mk(Algorithm::Sgd), &mut || 0.0).unwrap();
    let srda = srm_core::optim::run(&obj, &spectrum, &mk(Algorithm::Srda), &mut || 0.0).unwrap();
    assert_eq!(sgd.grad_evals, 80 * n as u64);
    assert_eq!(sgd.final_w, srda.final_w, "final iterates not bit-identical");
    assert_eq!(sgd.rows.len(), srda.rows.len());
    for (a, b) in sgd.rows.iter().zip(srda.rows.iter()) {
        assert_eq!(a.objective.to_bits(), b.objective.to_bits(), "objective differs at {}", a.pass);
    }
    pass(10, started, "bit-identical iterates over 1000 steps at mu = 0");
}

fn snapshot_dir(dir: &std::path::Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap())
        .filter(|e| e.file_name() != "timings.csv")
        .map(|e| (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn acceptance_11_end_to_end_determinism() {
    let started = Instant::now();
    let cfg = ExperimentConfig {
        name: "det".into(),
        dataset: DatasetSpec::Simulated { n: 200, d: 5 },
        spectrum: Spectrum::esrm(1.0).unwrap(),
        algorithms: vec![Algorithm::Sgd, Algorithm::LsvrgUniform],
        lr_grid: vec![0.01, 0.1],
        seeds: vec![1, 2],
        batch_size: 16,
        max_passes: 16,
        ..ExperimentConfig::default()
    };
    let a = tempdir("c11a");
    let b = tempdir("c11b");
    experiment::run_experiment(&cfg, a.to_str().unwrap(), 2).unwrap();
    experiment::run_experiment(&cfg, b.to_str().unwrap(), 1).unwrap();
    let fa = snapshot_dir(&a);
    let fb = snapshot_dir(&b);
    assert_eq!(fa.len(), fb.len());
    for ((na, ca), (nb, cb)) in fa.iter().zip(fb.iter()) {
        assert_eq!(na, nb);
        assert_eq!(ca, cb, "file {na} differs between reruns");
    }

    // Clustering and the verification commands are byte-stable too.
    let ccfg = ExperimentConfig {
        name: "det_cl".into(),
        dataset: DatasetSpec::Clusters,
        loss: LossSpec::KMeans { k: 3 },
        lr_grid: vec![1.0],
        seeds: vec![1, 2],
        max_passes: 16,
        ..ExperimentConfig::default()
    };
    let a = tempdir("c11c");
    let b = tempdir("c11d");
    cluster::run_clustering(&ccfg, a.to_str().unwrap(), 2).unwrap();
    cluster::run_clustering(&ccfg, b.to_str().unwrap(), 1).unwrap();
    assert_eq!(snapshot_dir(&a), snapshot_dir(&b));

    let gcfg = ExperimentConfig {
        name: "det_gen".into(),
        dataset: DatasetSpec::Simulated { n: 100, d: 3 },
        ..ExperimentConfig::default()
    };
    let a = tempdir("c11e");
    let b = tempdir("c11f");
    srm_cli::commands::gen_data(&gcfg, a.to_str().unwrap()).unwrap();
    srm_cli::commands::gen_data(&gcfg, b.to_str().unwrap()).unwrap();
    assert_eq!(snapshot_dir(&a), snapshot_dir(&b));
    pass(11, started, "byte-identical outputs across reruns and thread counts");
}
