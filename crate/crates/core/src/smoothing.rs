//! Smoothed L-statistic `h_{νΩ}(ℓ) = max_{λ∈P(σ)} {λᵀℓ − νΩ(λ)}` over the
//! permutahedron `P(σ)`, evaluated by pool-adjacent-violators isotonic
//! regression.
//!
//! Two regularizers are supported, both centered at the uniform weights
//! `u_n = 1/n`:
//!
//! - quadratic: `Ω₂(λ) = ½‖λ − u_n‖²`;
//! - entropic:  `Ω₁(λ) = Σ λ_i ln(n λ_i)` (the KL divergence to `u_n`).
//!
//! Writing the smoothing as an inf-convolution,
//! `h_{νΩ}(ℓ) = min_z { h(z) + νΩ*((ℓ−z)/ν) }`, the minimizer `z*` is
//! isotone in the sorted order of `ℓ`, so it is found by PAV on
//! `ℓ_τ/ν` and the gradient is `λ* = ∇Ω*((ℓ−z*)/ν)`. Block values are
//! kept in a decomposed form (raw-loss accumulator plus weight offset) so
//! the residuals `(ℓ_i − z*_i)/ν` stay accurate even for ν near zero.
//! Every evaluation returns both the dual value `λ*ᵀℓ − νΩ(λ*)` and the
//! primal inf-convolution value; their gap certifies correctness per
//! instance.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::fmath;
use crate::risk::{argsort_losses, l_statistic};
use crate::spectra::SigmaWeights;

/// Choice of strongly convex regularizer on the permutahedron.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regularizer {
    /// `Ω₂(λ) = ½‖λ − u_n‖₂²`.
    QuadraticCentered,
    /// `Ω₁(λ) = Σ λ_i ln(n λ_i)`.
    EntropicCentered,
}

/// Smoothing coefficient and regularizer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothingConfig {
    nu: f64,
    regularizer: Regularizer,
}

impl SmoothingConfig {
    pub fn new(nu: f64, regularizer: Regularizer) -> Result<Self> {
        if !(nu > 0.0) || !nu.is_finite() {
            return Err(Error::InvalidParameter { what: "smoothing nu", value: nu });
        }
        Ok(Self { nu, regularizer })
    }

    pub fn quadratic(nu: f64) -> Result<Self> {
        Self::new(nu, Regularizer::QuadraticCentered)
    }

    pub fn entropic(nu: f64) -> Result<Self> {
        Self::new(nu, Regularizer::EntropicCentered)
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn regularizer(&self) -> Regularizer {
        self.regularizer
    }
}

/// Result of the permutahedron max-oracle.
#[derive(Debug, Clone)]
pub struct SmoothedEval {
    /// `h_{νΩ}(ℓ)`, the dual (maximization) value.
    pub value: f64,
    /// The maximizer `λ* = ∇h_{νΩ}(ℓ)`, in the original loss order.
    pub lambda: Vec<f64>,
    /// The inf-convolution value computed from `z*`.
    pub primal_value: f64,
    /// `|value − primal_value|`; certified ≤ 1e-8·(1+|value|).
    pub dual_gap: f64,
}

/// Contiguous blocks produced by PAV: strictly increasing block values
/// and the exclusive end index of each block.
#[derive(Debug, Clone)]
pub struct PavBlocks {
    ends: Vec<usize>,
    values: Vec<f64>,
}

impl PavBlocks {
    pub fn n_blocks(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Half-open coordinate ranges of the blocks.
    pub fn ranges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let starts = core::iter::once(0).chain(self.ends.iter().copied());
        starts.zip(self.ends.iter().copied())
    }

    /// Expands block values into a full-length solution vector.
    pub fn expand(&self) -> Vec<f64> {
        let n = *self.ends.last().unwrap_or(&0);
        let mut z = Vec::with_capacity(n);
        for ((start, end), &v) in self.ranges().zip(self.values.iter()) {
            z.extend(core::iter::repeat(v).take(end - start));
        }
        z
    }
}

fn check_sorted(l: &[f64]) -> Result<()> {
    if l.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite { what: "pav input" });
    }
    if l.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::UnsortedInput);
    }
    Ok(())
}

/// Quadratic-case blocks in decomposed form: per block, the count, the
/// sum of raw losses, and the sum of offsets `b_i = 1/n − σ_i`. The block
/// value of the isotonic solution on `l/ν` is `mean_l/ν + mean_b`.
struct QuadBlocks {
    ends: Vec<usize>,
    count: Vec<f64>,
    sum_l: Vec<f64>,
    sum_b: Vec<f64>,
}

fn quad_blocks(l_sorted: &[f64], sigma_asc: &[f64], nu: f64) -> QuadBlocks {
    let n = l_sorted.len();
    let inv_n = 1.0 / n as f64;
    let mut ends: Vec<usize> = Vec::with_capacity(n);
    let mut count: Vec<f64> = Vec::with_capacity(n);
    let mut sum_l: Vec<f64> = Vec::with_capacity(n);
    let mut sum_b: Vec<f64> = Vec::with_capacity(n);
    let value = |sl: f64, sb: f64, c: f64| (sl / c) / nu + sb / c;
    for i in 0..n {
        ends.push(i + 1);
        count.push(1.0);
        sum_l.push(l_sorted[i]);
        sum_b.push(inv_n - sigma_asc[i]);
        while ends.len() >= 2 {
            let d = ends.len() - 1;
            let prev = value(sum_l[d - 1], sum_b[d - 1], count[d - 1]);
            let last = value(sum_l[d], sum_b[d], count[d]);
            if prev < last {
                break;
            }
            count[d - 1] += count[d];
            sum_l[d - 1] += sum_l[d];
            sum_b[d - 1] += sum_b[d];
            ends[d - 1] = ends[d];
            ends.pop();
            count.pop();
            sum_l.pop();
            sum_b.pop();
        }
    }
    QuadBlocks { ends, count, sum_l, sum_b }
}

/// Entropic-case blocks: per block the max raw loss, the log-sum-exp of
/// `(l_j − max)/ν`, and the log-sum-exp of `ln σ`. The block value is
/// `max_l/ν + lse_rel − lse_s − ln n`.
struct EntBlocks {
    ends: Vec<usize>,
    max_l: Vec<f64>,
    lse_rel: Vec<f64>,
    lse_s: Vec<f64>,
}

fn ent_blocks(l_sorted: &[f64], log_sigma_asc: &[f64], nu: f64) -> EntBlocks {
    let n = l_sorted.len();
    let ln_n = fmath::ln(n as f64);
    let mut ends: Vec<usize> = Vec::with_capacity(n);
    let mut max_l: Vec<f64> = Vec::with_capacity(n);
    let mut lse_rel: Vec<f64> = Vec::with_capacity(n);
    let mut lse_s: Vec<f64> = Vec::with_capacity(n);
    let value =
        |ml: f64, lr: f64, ls: f64| ml / nu + lr - ls - ln_n;
    for i in 0..n {
        ends.push(i + 1);
        max_l.push(l_sorted[i]);
        lse_rel.push(0.0);
        lse_s.push(log_sigma_asc[i]);
        while ends.len() >= 2 {
            let d = ends.len() - 1;
            let prev = value(max_l[d - 1], lse_rel[d - 1], lse_s[d - 1]);
            let last = value(max_l[d], lse_rel[d], lse_s[d]);
            if prev < last {
                break;
            }
            let m = max_l[d - 1].max(max_l[d]);
            lse_rel[d - 1] = fmath::log_sum_exp2(
                lse_rel[d - 1] + (max_l[d - 1] - m) / nu,
                lse_rel[d] + (max_l[d] - m) / nu,
            );
            max_l[d - 1] = m;
            lse_s[d - 1] = fmath::log_sum_exp2(lse_s[d - 1], lse_s[d]);
            ends[d - 1] = ends[d];
            ends.pop();
            max_l.pop();
            lse_rel.pop();
            lse_s.pop();
        }
    }
    EntBlocks { ends, max_l, lse_rel, lse_s }
}

/// PAV for the quadratic regularizer: solves
/// `min_{z₁≤…≤z_n} Σ_i [σ_i z_i + ω₂*(l_i − z_i)]` in O(n).
///
/// Per-coordinate optima are `l_i + 1/n − σ_i`; merged blocks take the
/// count-weighted average.
pub fn pav_quadratic_blocks(l_sorted: &[f64], sigma: &SigmaWeights) -> Result<PavBlocks> {
    check_sorted(l_sorted)?;
    if sigma.n() != l_sorted.len() {
        return Err(Error::DimensionMismatch { expected: sigma.n(), got: l_sorted.len() });
    }
    let blocks = quad_blocks(l_sorted, sigma.as_slice(), 1.0);
    let values = blocks
        .ends
        .iter()
        .enumerate()
        .map(|(s, _)| blocks.sum_l[s] / blocks.count[s] + blocks.sum_b[s] / blocks.count[s])
        .collect();
    Ok(PavBlocks { ends: blocks.ends, values })
}

/// Quadratic PAV, expanded to a full solution vector.
pub fn pav_quadratic(l_sorted: &[f64], sigma: &SigmaWeights) -> Result<Vec<f64>> {
    Ok(pav_quadratic_blocks(l_sorted, sigma)?.expand())
}

/// PAV for the entropic regularizer. Block values are
/// `LSE(l_S) − LSE(s_S) − ln n` for `s_i = ln σ_i`, maintained through
/// shifted log-sum-exp accumulators.
pub fn pav_entropic_blocks(l_sorted: &[f64], log_sigma: &[f64]) -> Result<PavBlocks> {
    check_sorted(l_sorted)?;
    if log_sigma.len() != l_sorted.len() {
        return Err(Error::DimensionMismatch { expected: log_sigma.len(), got: l_sorted.len() });
    }
    if log_sigma.iter().any(|x| !x.is_finite()) {
        return Err(Error::UnsupportedSpectrum {
            reason: "entropic smoothing requires strictly positive sigma",
        });
    }
    let n = l_sorted.len();
    let ln_n = fmath::ln(n as f64);
    let blocks = ent_blocks(l_sorted, log_sigma, 1.0);
    let values = (0..blocks.ends.len())
        .map(|s| blocks.max_l[s] + blocks.lse_rel[s] - blocks.lse_s[s] - ln_n)
        .collect();
    let _ = n;
    Ok(PavBlocks { ends: blocks.ends, values })
}

/// Entropic PAV, expanded to a full solution vector.
pub fn pav_entropic(l_sorted: &[f64], log_sigma: &[f64]) -> Result<Vec<f64>> {
    Ok(pav_entropic_blocks(l_sorted, log_sigma)?.expand())
}

/// `Ω(λ)` for the chosen regularizer, with `0·ln 0 := 0`.
pub fn omega_value(reg: Regularizer, lambda: &[f64]) -> f64 {
    let n = lambda.len() as f64;
    match reg {
        Regularizer::QuadraticCentered => {
            let u = 1.0 / n;
            0.5 * lambda.iter().map(|&x| (x - u) * (x - u)).sum::<f64>()
        }
        Regularizer::EntropicCentered => lambda
            .iter()
            .map(|&x| if x > 0.0 { x * fmath::ln(n * x) } else { 0.0 })
            .sum(),
    }
}

/// Conjugate integrand `ω*(g)` matching the PAV formulations above:
/// `g/n + g²/2` for the quadratic and `(e^g − 1)/n` for the entropic.
fn conjugate_term(reg: Regularizer, g: f64, n: usize) -> f64 {
    let inv_n = 1.0 / n as f64;
    match reg {
        Regularizer::QuadraticCentered => g * inv_n + 0.5 * g * g,
        Regularizer::EntropicCentered => (fmath::exp(g) - 1.0) * inv_n,
    }
}

/// Evaluates the smoothed L-statistic and its gradient at `losses`.
///
/// The weights are used in ascending order (the permutahedron is
/// permutation-invariant, so this loses no generality). Losses are sorted
/// by the deterministic permutation τ, the matching PAV runs on `ℓ_τ/ν`,
/// and the residuals map through `∇Ω*`: quadratic
/// `λ_i = 1/n + (ℓ_i − z*_i)/ν`, entropic `λ_i = e^{(ℓ_i − z*_i)/ν}/n`.
/// Fails with [`Error::DualityGap`] if the primal-dual certificate
/// exceeds `1e-8·(1+|value|)`.
pub fn smoothed_oracle(
    config: &SmoothingConfig,
    sigma: &SigmaWeights,
    losses: &[f64],
) -> Result<SmoothedEval> {
    let n = sigma.n();
    if losses.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: losses.len() });
    }
    let nu = config.nu;
    let tau = argsort_losses(losses)?;
    let mut l_sorted: Vec<f64> = Vec::with_capacity(n);
    for &idx in tau.rank_to_index() {
        l_sorted.push(losses[idx as usize]);
    }
    let mut sigma_asc = sigma.as_slice().to_vec();
    sigma_asc.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());

    let inv_n = 1.0 / n as f64;
    // Per sorted coordinate: the residual g_rank = (ℓ − z*)/ν and the
    // block value scaled back to the loss domain, ν·z̃.
    let mut g = vec![0.0; n];
    let mut nu_z = vec![0.0; n];
    match config.regularizer {
        Regularizer::QuadraticCentered => {
            let blocks = quad_blocks(&l_sorted, &sigma_asc, nu);
            let mut start = 0;
            for s in 0..blocks.ends.len() {
                let end = blocks.ends[s];
                let mean_l = blocks.sum_l[s] / blocks.count[s];
                let mean_b = blocks.sum_b[s] / blocks.count[s];
                for rank in start..end {
                    g[rank] = (l_sorted[rank] - mean_l) / nu - mean_b;
                    nu_z[rank] = mean_l + nu * mean_b;
                }
                start = end;
            }
        }
        Regularizer::EntropicCentered => {
            if sigma_asc.first().copied().unwrap_or(0.0) <= 0.0 {
                return Err(Error::UnsupportedSpectrum {
                    reason: "entropic smoothing requires strictly positive sigma",
                });
            }
            let log_sigma: Vec<f64> = sigma_asc.iter().map(|&s| fmath::ln(s)).collect();
            let ln_n = fmath::ln(n as f64);
            let blocks = ent_blocks(&l_sorted, &log_sigma, nu);
            let mut start = 0;
            for s in 0..blocks.ends.len() {
                let end = blocks.ends[s];
                let tail = blocks.lse_rel[s] - blocks.lse_s[s] - ln_n;
                for rank in start..end {
                    g[rank] = (l_sorted[rank] - blocks.max_l[s]) / nu - tail;
                    nu_z[rank] = blocks.max_l[s] + nu * tail;
                }
                start = end;
            }
        }
    }

    let mut lambda = vec![0.0; n];
    let mut dual = crate::fmath::KahanSum::new();
    let mut primal = crate::fmath::KahanSum::new();
    for rank in 0..n {
        let idx = tau.rank_to_index()[rank] as usize;
        let lam = match config.regularizer {
            Regularizer::QuadraticCentered => inv_n + g[rank],
            Regularizer::EntropicCentered => fmath::exp(g[rank]) * inv_n,
        };
        lambda[idx] = lam;
        dual.add(lam * losses[idx]);
        primal.add(sigma_asc[rank] * nu_z[rank]);
        primal.add(nu * conjugate_term(config.regularizer, g[rank], n));
    }
    let value = dual.value() - nu * omega_value(config.regularizer, &lambda);
    let primal_value = primal.value();
    let dual_gap = (value - primal_value).abs();
    if dual_gap > 1e-8 * (1.0 + value.abs()) {
        return Err(Error::DualityGap { gap: dual_gap, value });
    }
    Ok(SmoothedEval { value, lambda, primal_value, dual_gap })
}

/// Majorization test for membership of `lambda` in the permutahedron
/// `P(σ)`: equal totals and sorted-descending prefix-sum dominance, with
/// slack at least `-tol`.
pub fn in_permutahedron(lambda: &[f64], sigma: &SigmaWeights, tol: f64) -> bool {
    if lambda.len() != sigma.n() {
        return false;
    }
    let mut lam = lambda.to_vec();
    lam.sort_unstable_by(|a, b| b.partial_cmp(a).unwrap());
    let sig = sigma.sorted_desc();
    let mut prefix_lam = 0.0;
    let mut prefix_sig = 0.0;
    for (l, s) in lam.iter().zip(sig.iter()) {
        prefix_lam += l;
        prefix_sig += s;
        if prefix_lam > prefix_sig + tol {
            return false;
        }
    }
    (prefix_lam - prefix_sig).abs() <= tol
}

/// Checks the sandwich `0 ≤ h(ℓ) − h_{νΩ}(ℓ) ≤ νΩ(σ)` (within 1e-10) for
/// a risk-averse weight vector.
pub fn smoothed_gap_bound_check(
    config: &SmoothingConfig,
    sigma: &SigmaWeights,
    losses: &[f64],
) -> Result<bool> {
    if !sigma.is_nondecreasing() {
        return Err(Error::UnsupportedSpectrum {
            reason: "gap bound requires non-decreasing (risk-averse) weights",
        });
    }
    let h = l_statistic(sigma, losses)?;
    let eval = smoothed_oracle(config, sigma, losses)?;
    let gap = h - eval.value;
    let bound = config.nu * omega_value(config.regularizer, sigma.as_slice());
    Ok(gap >= -1e-10 && gap <= bound + 1e-10)
}
