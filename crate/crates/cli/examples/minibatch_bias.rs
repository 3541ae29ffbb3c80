//! Diagnostic: measures the bias of the minibatch L-statistic estimator
//! at the solved optimum of the simulated regression task, i.e. how far
//! `E[Σ_j σ̂_j ℓ_{i_(j)}(w*)]` sits from `R_σ(w*)` for m = 64 of n = 800.
//! This is the quantity that floors the SGD/SRDA trajectories.

use srm_core::data::{generate_simulated, LossKind, LossModel};
use srm_core::optim::reference_solve;
use srm_core::risk::l_statistic;
use srm_core::rng::SplitMix64;
use srm_core::{IndexedLoss, RegularizedObjective, Spectrum};

fn main() {
    let ds = generate_simulated(1000, 10, 1);
    let n = ds.train.n();
    let model = LossModel::new(LossKind::Squared, &ds.train).unwrap();
    let spectrum = Spectrum::extremile(2.0).unwrap();
    let sigma = spectrum.discretize(n).unwrap();
    let mu = 1.0 / n as f64;
    let obj = RegularizedObjective::new(sigma.clone(), mu, &model).unwrap();
    let w_ref = reference_solve(&obj, 1e-10).unwrap();
    let mut losses = Vec::new();
    model.losses_into(&w_ref, &mut losses);
    let full = l_statistic(&sigma, &losses).unwrap();

    let m = 64;
    let sigma_m = spectrum.discretize(m).unwrap();
    let mut rng = SplitMix64::new(7);
    let mut pool: Vec<usize> = (0..n).collect();
    let reps = 2_000_000u64;
    let mut acc = 0.0;
    for _ in 0..reps {
        rng.sample_without_replacement(&mut pool, m);
        let mut batch: Vec<f64> = pool[..m].iter().map(|&i| losses[i]).collect();
        batch.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
        let est: f64 = sigma_m.iter().zip(batch.iter()).map(|(s, l)| s * l).sum();
        acc += est;
    }
    let mean = acc / reps as f64;
    let w0 = vec![0.0; ds.train.dim()];
    let init = obj.value(&w0).unwrap();
    let refv = obj.value(&w_ref).unwrap();
    println!("R_sigma(w*)            = {full:.8}");
    println!("E[minibatch estimate]  = {mean:.8}");
    println!("value bias             = {:.3e}", (mean - full).abs());
    println!("initial gap            = {:.6}", init - refv);
    println!("normalized bias        = {:.3e}", (mean - full).abs() / (init - refv));
}
