//! The empirical L-statistic `h(ℓ) = Σ σ_i ℓ_(i)`, its subgradient via
//! sorting, and the `ℓ2`-regularized objective built on a per-index loss
//! oracle.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::spectra::SigmaWeights;

/// Per-index loss oracle: `n` component losses over a `dim`-dimensional
/// parameter vector. Implementations must be read-only so concurrent
/// runs can share them.
pub trait IndexedLoss: Sync {
    /// Number of loss components (dataset size).
    fn n_components(&self) -> usize;

    /// Parameter dimension.
    fn dim(&self) -> usize;

    /// Loss of component `index` at `w`.
    fn loss(&self, index: usize, w: &[f64]) -> f64;

    /// Writes the gradient of component `index` at `w` into `grad`
    /// (overwriting it) and returns the loss value.
    fn loss_grad(&self, index: usize, w: &[f64], grad: &mut [f64]) -> f64;

    /// All component losses at `w`, into a reused buffer.
    fn losses_into(&self, w: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend((0..self.n_components()).map(|i| self.loss(i, w)));
    }
}

impl<L: IndexedLoss + ?Sized> IndexedLoss for &L {
    fn n_components(&self) -> usize {
        (**self).n_components()
    }
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn loss(&self, index: usize, w: &[f64]) -> f64 {
        (**self).loss(index, w)
    }
    fn loss_grad(&self, index: usize, w: &[f64], grad: &mut [f64]) -> f64 {
        (**self).loss_grad(index, w, grad)
    }
}

/// A sorting permutation: `rank_to_index()[j]` is the (0-based) index of
/// the j-th smallest loss. Ties break by original index, so the
/// permutation is deterministic.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SortPermutation {
    pi: Vec<u32>,
}

impl SortPermutation {
    pub fn n(&self) -> usize {
        self.pi.len()
    }

    pub fn rank_to_index(&self) -> &[u32] {
        &self.pi
    }

    /// Inverse map: `index_to_rank()[i]` is the rank of component `i`.
    pub fn index_to_rank(&self) -> Vec<u32> {
        let mut inv = vec![0u32; self.pi.len()];
        for (rank, &idx) in self.pi.iter().enumerate() {
            inv[idx as usize] = rank as u32;
        }
        inv
    }
}

fn check_finite(losses: &[f64]) -> Result<()> {
    if losses.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite { what: "loss vector" });
    }
    Ok(())
}

/// Stable argsort of a loss vector (ties by original index ascending).
pub fn argsort_losses(losses: &[f64]) -> Result<SortPermutation> {
    check_finite(losses)?;
    let mut pi: Vec<u32> = (0..losses.len() as u32).collect();
    pi.sort_unstable_by(|&a, &b| {
        losses[a as usize]
            .partial_cmp(&losses[b as usize])
            .unwrap()
            .then(a.cmp(&b))
    });
    Ok(SortPermutation { pi })
}

/// `Σ σ_i ℓ_(i)`: the spectral risk of a loss vector.
pub fn l_statistic(sigma: &SigmaWeights, losses: &[f64]) -> Result<f64> {
    if sigma.n() != losses.len() {
        return Err(Error::DimensionMismatch { expected: sigma.n(), got: losses.len() });
    }
    check_finite(losses)?;
    let mut sorted = losses.to_vec();
    sorted.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
    let mut acc = crate::fmath::KahanSum::new();
    for (s, l) in sigma.iter().zip(sorted.iter()) {
        acc.add(s * l);
    }
    Ok(acc.value())
}

/// The regularized spectral risk `R_σ(w) + (μ/2)‖w‖²` over a loss model.
pub struct RegularizedObjective<'a, L: IndexedLoss + ?Sized> {
    sigma: SigmaWeights,
    mu: f64,
    model: &'a L,
}

impl<'a, L: IndexedLoss + ?Sized> RegularizedObjective<'a, L> {
    pub fn new(sigma: SigmaWeights, mu: f64, model: &'a L) -> Result<Self> {
        if !mu.is_finite() || mu < 0.0 {
            return Err(Error::InvalidParameter { what: "mu", value: mu });
        }
        if sigma.n() != model.n_components() {
            return Err(Error::DimensionMismatch {
                expected: model.n_components(),
                got: sigma.n(),
            });
        }
        Ok(Self { sigma, mu, model })
    }

    pub fn sigma(&self) -> &SigmaWeights {
        &self.sigma
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn model(&self) -> &'a L {
        self.model
    }

    pub fn n(&self) -> usize {
        self.sigma.n()
    }

    pub fn dim(&self) -> usize {
        self.model.dim()
    }

    /// All component losses at `w`.
    pub fn losses(&self, w: &[f64]) -> Vec<f64> {
        let mut out = Vec::new();
        self.model.losses_into(w, &mut out);
        out
    }

    /// Objective value at `w`.
    pub fn value(&self, w: &[f64]) -> Result<f64> {
        let losses = self.losses(w);
        self.value_from_losses(&losses, w)
    }

    /// Objective value when the losses at `w` are already available.
    pub fn value_from_losses(&self, losses: &[f64], w: &[f64]) -> Result<f64> {
        Ok(l_statistic(&self.sigma, losses)? + 0.5 * self.mu * dot(w, w))
    }

    /// One subgradient: `Σ_i σ_i ∇ℓ_{π(i)}(w) + μw` for the deterministic
    /// sorting permutation π. Components with zero weight are skipped.
    pub fn subgradient(&self, w: &[f64]) -> Result<Vec<f64>> {
        let losses = self.losses(w);
        check_finite(&losses)?;
        let pi = argsort_losses(&losses)?;
        let d = self.model.dim();
        let mut grad = vec![0.0; d];
        let mut scratch = vec![0.0; d];
        for (rank, &idx) in pi.rank_to_index().iter().enumerate() {
            let weight = self.sigma[rank];
            if weight == 0.0 {
                continue;
            }
            self.model.loss_grad(idx as usize, w, &mut scratch);
            for (g, s) in grad.iter_mut().zip(scratch.iter()) {
                *g += weight * s;
            }
        }
        for (g, wi) in grad.iter_mut().zip(w.iter()) {
            *g += self.mu * wi;
        }
        Ok(grad)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fd;
    use crate::rng::SplitMix64;
    use crate::spectra::Spectrum;
    use alloc::vec;
    use proptest::prelude::*;

    /// Smooth synthetic family: ℓ_i(w) = ½ (aᵢᵀw − bᵢ)² + cᵢ.
    /// Convex and differentiable, with distinct values generically.
    pub(crate) struct SyntheticQuadratics {
        pub a: Vec<Vec<f64>>,
        pub b: Vec<f64>,
        pub c: Vec<f64>,
    }

    impl SyntheticQuadratics {
        pub fn random(n: usize, d: usize, seed: u64) -> Self {
            let mut rng = SplitMix64::new(seed);
            let a = (0..n).map(|_| (0..d).map(|_| rng.normal()).collect()).collect();
            let b = (0..n).map(|_| rng.normal()).collect();
            let c = (0..n).map(|_| rng.normal()).collect();
            Self { a, b, c }
        }
    }

    impl IndexedLoss for SyntheticQuadratics {
        fn n_components(&self) -> usize {
            self.b.len()
        }
        fn dim(&self) -> usize {
            self.a[0].len()
        }
        fn loss(&self, i: usize, w: &[f64]) -> f64 {
            let r = dot(&self.a[i], w) - self.b[i];
            0.5 * r * r + self.c[i]
        }
        fn loss_grad(&self, i: usize, w: &[f64], grad: &mut [f64]) -> f64 {
            let r = dot(&self.a[i], w) - self.b[i];
            for (g, ai) in grad.iter_mut().zip(self.a[i].iter()) {
                *g = r * ai;
            }
            0.5 * r * r + self.c[i]
        }
    }

    fn sigma3() -> SigmaWeights {
        SigmaWeights::new(vec![0.2, 0.3, 0.5]).unwrap()
    }

    #[test]
    fn l_statistic_hand_example() {
        let v = l_statistic(&sigma3(), &[3.0, 1.0, 2.0]).unwrap();
        assert!((v - 2.3).abs() < 1e-15);
    }

    #[test]
    fn l_statistic_uniform_is_mean() {
        let sigma = Spectrum::uniform().discretize(4).unwrap();
        let v = l_statistic(&sigma, &[4.0, -2.0, 10.0, 0.0]).unwrap();
        assert!((v - 3.0).abs() < 1e-15);
    }

    #[test]
    fn l_statistic_worst_case_is_max() {
        let sigma = SigmaWeights::new(vec![0.0, 0.0, 1.0]).unwrap();
        let v = l_statistic(&sigma, &[5.0, -1.0, 3.0]).unwrap();
        assert_eq!(v, 5.0);
    }

    #[test]
    fn l_statistic_errors() {
        assert!(matches!(
            l_statistic(&sigma3(), &[1.0, 2.0]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            l_statistic(&sigma3(), &[1.0, f64::NAN, 2.0]),
            Err(Error::NonFinite { .. })
        ));
        assert!(matches!(
            l_statistic(&sigma3(), &[1.0, f64::INFINITY, 2.0]),
            Err(Error::NonFinite { .. })
        ));
    }

    #[test]
    fn argsort_examples() {
        let pi = argsort_losses(&[3.0, 1.0, 2.0]).unwrap();
        assert_eq!(pi.rank_to_index(), &[1, 2, 0]);
        let pi = argsort_losses(&[5.0, 5.0, 1.0]).unwrap();
        assert_eq!(pi.rank_to_index(), &[2, 0, 1]);
        let pi = argsort_losses(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(pi.rank_to_index(), &[0, 1, 2]);
        assert!(argsort_losses(&[f64::NAN]).is_err());
    }

    #[test]
    fn index_to_rank_inverts() {
        let pi = argsort_losses(&[3.0, 1.0, 2.0]).unwrap();
        let inv = pi.index_to_rank();
        for (rank, &idx) in pi.rank_to_index().iter().enumerate() {
            assert_eq!(inv[idx as usize] as usize, rank);
        }
    }

    #[test]
    fn subgradient_uniform_is_erm_gradient() {
        let model = SyntheticQuadratics::random(8, 3, 1);
        let sigma = Spectrum::uniform().discretize(8).unwrap();
        let obj = RegularizedObjective::new(sigma, 0.0, &model).unwrap();
        let w = [0.3, -0.7, 1.1];
        let g = obj.subgradient(&w).unwrap();
        let mut erm = vec![0.0; 3];
        let mut scratch = vec![0.0; 3];
        for i in 0..8 {
            model.loss_grad(i, &w, &mut scratch);
            for (e, s) in erm.iter_mut().zip(scratch.iter()) {
                *e += s / 8.0;
            }
        }
        for (a, b) in g.iter().zip(erm.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn subgradient_matches_finite_differences() {
        let model = SyntheticQuadratics::random(10, 4, 2);
        let spectra = [
            Spectrum::superquantile(0.5).unwrap(),
            Spectrum::extremile(2.0).unwrap(),
            Spectrum::esrm(1.0).unwrap(),
        ];
        let mut rng = SplitMix64::new(77);
        for spec in spectra {
            let sigma = spec.discretize(10).unwrap();
            let obj = RegularizedObjective::new(sigma.clone(), 0.0, &model).unwrap();
            let mut checked = 0;
            while checked < 20 {
                let w: Vec<f64> = (0..4).map(|_| rng.normal()).collect();
                // Finite differences need distinct losses; resample near ties.
                let mut losses = obj.losses(&w);
                losses.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
                if losses.windows(2).any(|p| (p[1] - p[0]).abs() < 1e-4) {
                    continue;
                }
                checked += 1;
                let g = obj.subgradient(&w).unwrap();
                let fdg = fd::central_diff_grad(
                    |v: &[f64]| obj.value(v).unwrap(),
                    &w,
                    1e-6,
                );
                assert!(
                    fd::max_relative_error(&g, &fdg) < 1e-5,
                    "{spec:?}: {g:?} vs {fdg:?}"
                );
            }
        }
    }

    #[test]
    fn subgradient_regularizer_is_additive() {
        let model = SyntheticQuadratics::random(6, 3, 3);
        let sigma = Spectrum::extremile(2.0).unwrap().discretize(6).unwrap();
        let w = [0.5, -1.0, 2.0];
        let g0 = RegularizedObjective::new(sigma.clone(), 0.0, &model)
            .unwrap()
            .subgradient(&w)
            .unwrap();
        let mu = 0.37;
        let g1 = RegularizedObjective::new(sigma, mu, &model).unwrap().subgradient(&w).unwrap();
        for i in 0..3 {
            assert_eq!(g1[i], g0[i] + mu * w[i]);
        }
    }

    #[test]
    fn subgradient_inequality_holds() {
        // R_σ(v) ≥ R_σ(w) + g·(v−w) for g ∈ ∂R_σ(w).
        let model = SyntheticQuadratics::random(12, 4, 4);
        let sigma = Spectrum::superquantile(0.5).unwrap().discretize(12).unwrap();
        let obj = RegularizedObjective::new(sigma, 0.1, &model).unwrap();
        let mut rng = SplitMix64::new(5);
        for _ in 0..2000 {
            let w: Vec<f64> = (0..4).map(|_| 2.0 * rng.normal()).collect();
            let v: Vec<f64> = (0..4).map(|_| 2.0 * rng.normal()).collect();
            let g = obj.subgradient(&w).unwrap();
            let lhs = obj.value(&v).unwrap();
            let rhs = obj.value(&w).unwrap()
                + g.iter().zip(v.iter().zip(w.iter())).map(|(gi, (vi, wi))| gi * (vi - wi)).sum::<f64>();
            assert!(lhs >= rhs - 1e-10, "violated: {lhs} < {rhs}");
        }
    }

    #[test]
    fn lipschitz_transfer() {
        // For G-Lipschitz losses, |R_σ(w)−R_σ(v)| ≤ G‖w−v‖. Use
        // piecewise-linear losses |aᵢᵀw − bᵢ| with ‖aᵢ‖ ≤ G.
        struct AbsLosses {
            a: Vec<Vec<f64>>,
            b: Vec<f64>,
        }
        impl IndexedLoss for AbsLosses {
            fn n_components(&self) -> usize {
                self.b.len()
            }
            fn dim(&self) -> usize {
                self.a[0].len()
            }
            fn loss(&self, i: usize, w: &[f64]) -> f64 {
                (dot(&self.a[i], w) - self.b[i]).abs()
            }
            fn loss_grad(&self, i: usize, w: &[f64], grad: &mut [f64]) -> f64 {
                let r = dot(&self.a[i], w) - self.b[i];
                let s = if r >= 0.0 { 1.0 } else { -1.0 };
                for (g, ai) in grad.iter_mut().zip(self.a[i].iter()) {
                    *g = s * ai;
                }
                r.abs()
            }
        }
        let mut rng = SplitMix64::new(9);
        let n = 10;
        let d = 3;
        let mut a: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.normal()).collect()).collect();
        let mut lipschitz: f64 = 0.0;
        for row in &a {
            lipschitz = lipschitz.max(dot(row, row).sqrt());
        }
        // Normalize so G = 1.
        for row in a.iter_mut() {
            for x in row.iter_mut() {
                *x /= lipschitz;
            }
        }
        let model = AbsLosses { a, b: (0..n).map(|_| rng.normal()).collect() };
        let sigma = Spectrum::esrm(1.0).unwrap().discretize(n).unwrap();
        let obj = RegularizedObjective::new(sigma, 0.0, &model).unwrap();
        for _ in 0..500 {
            let w: Vec<f64> = (0..d).map(|_| 3.0 * rng.normal()).collect();
            let v: Vec<f64> = (0..d).map(|_| 3.0 * rng.normal()).collect();
            let dist = w
                .iter()
                .zip(v.iter())
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt();
            let dv = (obj.value(&w).unwrap() - obj.value(&v).unwrap()).abs();
            assert!(dv <= dist + 1e-10, "|ΔR| = {dv} > ‖Δw‖ = {dist}");
        }
    }

    #[test]
    fn objective_value_examples() {
        // Constant losses: value increases by exactly (μ/2)‖w‖².
        struct Constant(usize);
        impl IndexedLoss for Constant {
            fn n_components(&self) -> usize {
                self.0
            }
            fn dim(&self) -> usize {
                2
            }
            fn loss(&self, _i: usize, _w: &[f64]) -> f64 {
                3.5
            }
            fn loss_grad(&self, _i: usize, _w: &[f64], grad: &mut [f64]) -> f64 {
                grad.fill(0.0);
                3.5
            }
        }
        let model = Constant(5);
        let sigma = Spectrum::extremile(2.0).unwrap().discretize(5).unwrap();
        let mu = 10.0;
        let obj = RegularizedObjective::new(sigma, mu, &model).unwrap();
        let at0 = obj.value(&[0.0, 0.0]).unwrap();
        let w = [1.0, 2.0];
        let atw = obj.value(&w).unwrap();
        assert!((atw - at0 - 0.5 * mu * 5.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn l_statistic_permutation_invariant(
            mut losses in proptest::collection::vec(-100.0..100.0f64, 6),
            swap_a in 0usize..6,
            swap_b in 0usize..6,
        ) {
            let sigma = Spectrum::extremile(2.0).unwrap().discretize(6).unwrap();
            let before = l_statistic(&sigma, &losses).unwrap();
            losses.swap(swap_a, swap_b);
            let after = l_statistic(&sigma, &losses).unwrap();
            prop_assert!((before - after).abs() < 1e-12);
        }

        #[test]
        fn l_statistic_monotone_in_each_entry(
            losses in proptest::collection::vec(-50.0..50.0f64, 5),
            which in 0usize..5,
            bump in 0.0..10.0f64,
        ) {
            let sigma = Spectrum::superquantile(0.4).unwrap().discretize(5).unwrap();
            let before = l_statistic(&sigma, &losses).unwrap();
            let mut bumped = losses.clone();
            bumped[which] += bump;
            let after = l_statistic(&sigma, &bumped).unwrap();
            prop_assert!(after >= before - 1e-12);
        }

        #[test]
        fn convexity_along_segments(
            seed in 0u64..5000,
            lambda in 0.0..1.0f64,
        ) {
            let model = SyntheticQuadratics::random(7, 3, seed);
            let sigma = Spectrum::extremile(2.0).unwrap().discretize(7).unwrap();
            let obj = RegularizedObjective::new(sigma, 0.0, &model).unwrap();
            let mut rng = SplitMix64::new(seed ^ 0xABCD);
            let w1: Vec<f64> = (0..3).map(|_| 2.0 * rng.normal()).collect();
            let w2: Vec<f64> = (0..3).map(|_| 2.0 * rng.normal()).collect();
            let mid: Vec<f64> = w1.iter().zip(w2.iter())
                .map(|(a, b)| lambda * a + (1.0 - lambda) * b)
                .collect();
            let lhs = obj.value(&mid).unwrap();
            let rhs = lambda * obj.value(&w1).unwrap() + (1.0 - lambda) * obj.value(&w2).unwrap();
            prop_assert!(lhs <= rhs + 1e-10);
        }
    }
}
