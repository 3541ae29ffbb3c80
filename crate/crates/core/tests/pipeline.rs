//! Cross-module integration: datasets feed loss models, loss models feed
//! the risk objective, the smoothing oracle brackets the objective along
//! real optimizer trajectories, and the reference solver dominates them.

use srm_core::data::{generate_simulated, LossKind, LossModel};
use srm_core::optim::{
    reference_solve, run, Algorithm, LearningRate, OptimizerConfig,
};
use srm_core::risk::l_statistic;
use srm_core::smoothing::{omega_value, smoothed_oracle, Regularizer, SmoothingConfig};
use srm_core::{RegularizedObjective, Spectrum};

#[test]
fn smoothing_brackets_objective_along_trajectory() {
    let ds = generate_simulated(150, 6, 21);
    let n = ds.train.n();
    let model = LossModel::new(LossKind::Squared, &ds.train).unwrap();
    let spectrum = Spectrum::esrm(1.0).unwrap();
    let sigma = spectrum.discretize(n).unwrap();
    let mu = 1.0 / n as f64;
    let obj = RegularizedObjective::new(sigma.clone(), mu, &model).unwrap();
    let nu = 0.25;
    let cfg_sm = SmoothingConfig::quadratic(nu).unwrap();
    let omega_sigma = nu * omega_value(Regularizer::QuadraticCentered, sigma.as_slice());

    // Walk an SGD trajectory and check the sandwich at every measured
    // iterate via fresh loss vectors.
    let oc = OptimizerConfig::new(Algorithm::Sgd, LearningRate::Constant(0.05), 3, 10)
        .with_batch_size(12);
    let record = run(&obj, &spectrum, &oc, &mut || 0.0).unwrap();
    assert!(!record.diverged);
    let mut w = vec![0.0; obj.dim()];
    for step in 0..5 {
        // Probe a few points including the trajectory endpoints.
        let scale = step as f64 / 4.0;
        for (wi, fi) in w.iter_mut().zip(record.final_w.iter()) {
            *wi = scale * fi;
        }
        let losses = obj.losses(&w);
        let h = l_statistic(obj.sigma(), &losses).unwrap();
        let eval = smoothed_oracle(&cfg_sm, obj.sigma(), &losses).unwrap();
        let gap = h - eval.value;
        assert!(gap >= -1e-10 && gap <= omega_sigma + 1e-10);
    }
}

#[test]
fn reference_dominates_every_algorithm() {
    let ds = generate_simulated(120, 5, 33);
    let n = ds.train.n();
    let model = LossModel::new(LossKind::Squared, &ds.train).unwrap();
    let spectrum = Spectrum::extremile(2.0).unwrap();
    let sigma = spectrum.discretize(n).unwrap();
    let mu = 1.0 / n as f64;
    let obj = RegularizedObjective::new(sigma, mu, &model).unwrap();
    let w_ref = reference_solve(&obj, 1e-10).unwrap();
    let ref_value = obj.value(&w_ref).unwrap();

    for algorithm in [
        Algorithm::Sgd,
        Algorithm::Srda,
        Algorithm::LsvrgUniform,
        Algorithm::LsvrgSmoothed,
        Algorithm::LsvrgEpochNonuniform,
        Algorithm::QSvrg,
    ] {
        let mut oc = OptimizerConfig::new(algorithm, LearningRate::Constant(0.03), 5, 15);
        if matches!(algorithm, Algorithm::Sgd | Algorithm::Srda) {
            oc = oc.with_batch_size(12);
        }
        if matches!(algorithm, Algorithm::LsvrgSmoothed) {
            oc = oc.with_smoothing(SmoothingConfig::quadratic(n as f64 * 1e-3).unwrap());
        }
        let record = run(&obj, &spectrum, &oc, &mut || 0.0).unwrap();
        for row in &record.rows {
            assert!(
                row.objective >= ref_value - 1e-9 * (1.0 + ref_value.abs()),
                "{algorithm:?}: objective {} beat the reference {ref_value}",
                row.objective
            );
        }
    }
}

#[test]
fn risk_seeking_weights_drive_weighted_kmeans() {
    // The clustering pathway end to end at the library level: a
    // risk-seeking spectrum discretizes to non-increasing weights, the
    // k-means model consumes them through the generic objective, and
    // minibatch SGD runs without divergence.
    let layout = srm_core::data::ClusterLayout::default();
    let ds = srm_core::data::generate_gaussian_clusters(&layout, 7);
    let n = ds.train.n();
    let model = LossModel::new(LossKind::KMeans { k: 3 }, &ds.train).unwrap();
    let spectrum = Spectrum::truncated_risk_seeking(0.75).unwrap();
    let sigma = spectrum.discretize(n).unwrap();
    assert!(sigma.as_slice().windows(2).all(|w| w[0] + 1e-12 >= w[1]));
    let obj = RegularizedObjective::new(sigma, 0.0, &model).unwrap();
    let oc = OptimizerConfig::new(Algorithm::Sgd, LearningRate::Constant(1.0), 1, 32)
        .with_batch_size(64);
    let record = run(&obj, &spectrum, &oc, &mut || 0.0).unwrap();
    assert!(!record.diverged);
    // The objective decreased substantially from the all-zero centers.
    assert!(record.final_objective() < 0.5 * record.rows[0].objective);
}
