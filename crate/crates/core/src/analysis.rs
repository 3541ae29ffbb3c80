//! Verification experiments: exhaustive bias enumeration for the
//! minibatch estimator, Monte-Carlo consistency of the empirical
//! L-functional, sorting-sensitivity counts, test-loss quantile
//! differences, and randomized audits of the smoothing bounds.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::fmath::{self, KahanSum};
use crate::quad;
use crate::risk::{l_statistic, SortPermutation};
use crate::rng::SplitMix64;
use crate::smoothing::{omega_value, smoothed_oracle, Regularizer, SmoothingConfig};
use crate::spectra::Spectrum;

/// Cap on the number of minibatches enumerated exhaustively.
pub const ENUMERATION_CAP: u128 = 1_000_000;

fn binomial(n: usize, m: usize) -> u128 {
    let mut c: u128 = 1;
    for j in 0..m.min(n - m) {
        c = c * (n - j) as u128 / (j + 1) as u128;
    }
    c
}

/// Exhaustively measures the minibatch bias
/// `|E[Σ_j σ̂_j ℓ_{i_(j)}] − R_σ(ℓ)|` over all `C(n,m)` minibatches, and
/// the bound `2·C_s·B·(n−m)/n` with `B` the loss range.
pub fn exhaustive_bias(spectrum: &Spectrum, losses: &[f64], m: usize) -> Result<(f64, f64)> {
    let n = losses.len();
    if n == 0 || m == 0 || m > n {
        return Err(Error::InvalidConfig(alloc::format!("bad enumeration sizes n={n} m={m}")));
    }
    if n > 14 {
        return Err(Error::CombinatorialCap { combinations: u128::MAX, cap: ENUMERATION_CAP });
    }
    let combinations = binomial(n, m);
    if combinations > ENUMERATION_CAP {
        return Err(Error::CombinatorialCap { combinations, cap: ENUMERATION_CAP });
    }
    let sigma_n = spectrum.discretize(n)?;
    let sigma_m = spectrum.discretize(m)?;
    let full = l_statistic(&sigma_n, losses)?;

    let mut combo: Vec<usize> = (0..m).collect();
    let mut batch = alloc::vec![0.0; m];
    let mut mean = KahanSum::new();
    loop {
        for (slot, &i) in batch.iter_mut().zip(combo.iter()) {
            *slot = losses[i];
        }
        batch.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
        let mut est = 0.0;
        for (s, l) in sigma_m.iter().zip(batch.iter()) {
            est += s * l;
        }
        mean.add(est);
        // Advance to the next lexicographic combination.
        let mut k = m;
        while k > 0 && combo[k - 1] == k - 1 + n - m {
            k -= 1;
        }
        if k == 0 {
            break;
        }
        combo[k - 1] += 1;
        for j in k..m {
            combo[j] = combo[j - 1] + 1;
        }
    }
    let mean = mean.value() / combinations as f64;
    let bias = (mean - full).abs();
    let range = losses.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - losses.iter().cloned().fold(f64::INFINITY, f64::min);
    let bound = 2.0 * spectrum.uniform_deviation() * range * (n - m) as f64 / n as f64;
    Ok((bias, bound))
}

/// Loss populations for the consistency experiment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Population {
    Exponential { rate: f64 },
    LogNormal { mu: f64, sigma: f64 },
}

impl Population {
    /// Quantile function F⁻¹(t).
    pub fn quantile(&self, t: f64) -> f64 {
        match *self {
            Population::Exponential { rate } => -fmath::ln(1.0 - t) / rate,
            Population::LogNormal { mu, sigma } => {
                fmath::exp(mu + sigma * fmath::normal_quantile(t))
            }
        }
    }

    /// Inverse-CDF sample.
    pub fn sample(&self, rng: &mut SplitMix64) -> f64 {
        self.quantile(rng.next_open01())
    }
}

/// Ground truth `L_s[F] = ∫₀¹ s(t) F⁻¹(t) dt` by adaptive quadrature.
///
/// The exponential integrand's endpoint singularity is removed by the
/// substitution `t = 1 − e⁻ˣ`; the lognormal integrand is integrated in
/// `t` up to `1 − 1e−14` (the truncated tail mass is below 1e-10 for
/// moderate σ). Piecewise-constant spectra are split at their jump.
pub fn population_l_functional(spectrum: &Spectrum, population: &Population) -> f64 {
    use crate::spectra::SpectrumKind;
    let jump = match spectrum.kind() {
        SpectrumKind::Superquantile { q } => Some(q),
        SpectrumKind::TruncatedRiskSeeking { q } if q < 1.0 => Some(q),
        _ => None,
    };
    match *population {
        Population::Exponential { rate } => {
            let f = |x: f64| {
                let t = 1.0 - fmath::exp(-x);
                if t <= 0.0 || t >= 1.0 {
                    return 0.0;
                }
                spectrum.density(t) * (x / rate) * fmath::exp(-x)
            };
            let upper = 60.0;
            match jump {
                Some(q) => {
                    let xq = -fmath::ln(1.0 - q);
                    let (a, _) = quad::integrate(&f, 0.0, xq, 5e-11);
                    let (b, _) = quad::integrate(&f, xq, upper, 5e-11);
                    a + b
                }
                None => quad::integrate(&f, 0.0, upper, 1e-10).0,
            }
        }
        Population::LogNormal { .. } => {
            let f = |t: f64| {
                if t <= 0.0 || t >= 1.0 {
                    return 0.0;
                }
                spectrum.density(t) * population.quantile(t)
            };
            let (lo, hi) = (1e-14, 1.0 - 1e-14);
            match jump {
                Some(q) => {
                    let (a, _) = quad::integrate(&f, lo, q, 5e-11);
                    let (b, _) = quad::integrate(&f, q, hi, 5e-11);
                    a + b
                }
                None => quad::integrate(&f, lo, hi, 1e-10).0,
            }
        }
    }
}

/// Monte-Carlo consistency report: per-size MSE of `L_s[F_n]` against
/// `L_s[F]` and the fitted log-log slope.
#[derive(Debug, Clone)]
pub struct ConsistencyReport {
    pub sizes: Vec<usize>,
    pub mse: Vec<f64>,
    pub slope: f64,
    pub ground_truth: f64,
}

/// Estimates `E|L_s[F_n] − L_s[F]|²` for each sample size. Replicates
/// use independent substreams of `seed`, so the result is independent of
/// evaluation order.
pub fn consistency_mse(
    spectrum: &Spectrum,
    population: &Population,
    sizes: &[usize],
    reps: usize,
    seed: u64,
) -> Result<ConsistencyReport> {
    if sizes.is_empty() || reps == 0 {
        return Err(Error::InvalidConfig("consistency requires sizes and reps".into()));
    }
    let truth = population_l_functional(spectrum, population);
    let mut mse = Vec::with_capacity(sizes.len());
    let mut sample = Vec::new();
    for (j, &n) in sizes.iter().enumerate() {
        let sigma = spectrum.discretize(n)?;
        let mut acc = KahanSum::new();
        for rep in 0..reps {
            let stream = (j as u64) << 32 | rep as u64;
            let mut rng = SplitMix64::substream(seed, stream);
            sample.clear();
            sample.extend((0..n).map(|_| population.sample(&mut rng)));
            sample.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
            let mut stat = KahanSum::new();
            for (s, z) in sigma.iter().zip(sample.iter()) {
                stat.add(s * z);
            }
            let err = stat.value() - truth;
            acc.add(err * err);
        }
        mse.push(acc.value() / reps as f64);
    }
    // Least-squares slope of ln(mse) against ln(n).
    let k = sizes.len() as f64;
    let xs: Vec<f64> = sizes.iter().map(|&n| fmath::ln(n as f64)).collect();
    let ys: Vec<f64> = mse.iter().map(|&v| fmath::ln(v)).collect();
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys.iter()).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    Ok(ConsistencyReport { sizes: sizes.to_vec(), mse, slope, ground_truth: truth })
}

/// Hamming distance between two sorting permutations (number of indices
/// whose rank differs).
pub fn permutation_disagreement(a: &SortPermutation, b: &SortPermutation) -> Result<usize> {
    if a.n() != b.n() {
        return Err(Error::DimensionMismatch { expected: a.n(), got: b.n() });
    }
    let ra = a.index_to_rank();
    let rb = b.index_to_rank();
    Ok(ra.iter().zip(rb.iter()).filter(|(x, y)| x != y).count())
}

/// Per-quantile differences `ℓ_(⌈np⌉)(ERM) − ℓ_(⌈np⌉)(LRM)`, optionally
/// normalized by the ERM mean loss.
pub fn quantile_difference(
    losses_erm: &[f64],
    losses_lrm: &[f64],
    p_grid: &[f64],
    normalize_by_mean: bool,
) -> Result<Vec<f64>> {
    let n = losses_erm.len();
    if losses_lrm.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: losses_lrm.len() });
    }
    if n == 0 || p_grid.is_empty() {
        return Err(Error::InvalidConfig("quantile difference needs data and a p grid".into()));
    }
    if p_grid.iter().any(|&p| !(p > 0.0 && p <= 1.0)) {
        return Err(Error::InvalidConfig("quantiles must lie in (0, 1]".into()));
    }
    let mut erm = losses_erm.to_vec();
    let mut lrm = losses_lrm.to_vec();
    erm.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
    lrm.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
    let scale = if normalize_by_mean {
        fmath::kahan_sum(losses_erm) / n as f64
    } else {
        1.0
    };
    Ok(p_grid
        .iter()
        .map(|&p| {
            let idx = (fmath::ceil(n as f64 * p) as usize).clamp(1, n) - 1;
            (erm[idx] - lrm[idx]) / scale
        })
        .collect())
}

/// Outcome of a randomized smoothing-bound audit.
#[derive(Debug, Clone)]
pub struct SmoothingAudit {
    pub trials: usize,
    pub violations: usize,
    /// Largest observed `gap − bound` (negative when all bounds hold).
    pub max_excess: f64,
}

/// Randomized audit of `0 ≤ h − h_{νΩ} ≤ νΩ(σ)` together with the
/// divergence refinements `νχ²/(2n)` (quadratic) and `ν·KL` (entropic).
pub fn smoothing_bound_audit(
    spectrum: &Spectrum,
    n: usize,
    trials: usize,
    nu_list: &[f64],
    seed: u64,
) -> Result<SmoothingAudit> {
    if !spectrum.is_risk_averse() {
        return Err(Error::UnsupportedSpectrum { reason: "audit requires a risk-averse spectrum" });
    }
    let sigma = spectrum.discretize(n)?;
    let (kl, chi2) = spectrum.divergence_to_uniform()?;
    let entropic_ok = sigma.iter().all(|&s| s > 0.0);
    let mut rng = SplitMix64::substream(seed, 0xA_0D17);
    let mut violations = 0usize;
    let mut max_excess = f64::NEG_INFINITY;
    let mut count = 0usize;
    for _ in 0..trials {
        let losses: Vec<f64> = (0..n).map(|_| 4.0 * rng.normal()).collect();
        let h = l_statistic(&sigma, &losses)?;
        for &nu in nu_list {
            count += 1;
            let quad_cfg = SmoothingConfig::quadratic(nu)?;
            let eval = smoothed_oracle(&quad_cfg, &sigma, &losses)?;
            let gap = h - eval.value;
            let bound = (nu * omega_value(Regularizer::QuadraticCentered, sigma.as_slice()))
                .min(nu / (2.0 * n as f64) * chi2);
            let excess = gap - bound;
            max_excess = max_excess.max(excess);
            if gap < -1e-10 || excess > 1e-9 {
                violations += 1;
            }
            if entropic_ok {
                let ent_cfg = SmoothingConfig::entropic(nu)?;
                let eval = smoothed_oracle(&ent_cfg, &sigma, &losses)?;
                let gap = h - eval.value;
                let bound = (nu * omega_value(Regularizer::EntropicCentered, sigma.as_slice()))
                    .min(nu * kl);
                let excess = gap - bound;
                max_excess = max_excess.max(excess);
                if gap < -1e-10 || excess > 1e-9 {
                    violations += 1;
                }
            }
        }
    }
    Ok(SmoothingAudit { trials: count, violations, max_excess })
}
