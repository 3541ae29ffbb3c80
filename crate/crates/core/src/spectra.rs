//! Spectral densities on (0,1) and their exact discretization.
//!
//! A spectrum is a probability density `s` on (0,1). Discretizing it into
//! `n` bins, `σ_i = ∫_{(i-1)/n}^{i/n} s(t) dt`, yields the weight placed
//! on the i-th smallest loss. Risk-averse spectra have non-decreasing
//! densities (weight on the upper tail); risk-seeking ones are
//! non-increasing (weight on the lower tail, used for robust clustering).

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::fmath;
use crate::quad;

/// The supported spectral families with their parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpectrumKind {
    /// `s(t) = 1`; the empirical mean.
    Uniform,
    /// `s(t) = 1_{[q,1]}(t)/(1−q)`; expected loss above the q-quantile
    /// (CVaR).
    Superquantile { q: f64 },
    /// `s(t) = r t^{r−1}`; expected maximum of r i.i.d. draws.
    Extremile { r: f64 },
    /// `s(t) = ρ e^{−ρ} e^{ρt}/(1−e^{−ρ})`; exponential spectral risk
    /// measure.
    Esrm { rho: f64 },
    /// `s(t) = 1_{[0,q]}(t)/q`; discards the largest losses.
    TruncatedRiskSeeking { q: f64 },
    /// `s(t) = r (1−t)^{r−1}`; the reflection of the extremile.
    ExtremileRiskSeeking { r: f64 },
}

/// A validated spectral density. Construct through the named
/// constructors; parameters are checked once so downstream code can
/// assume validity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Spectrum {
    kind: SpectrumKind,
}

impl Spectrum {
    pub fn uniform() -> Self {
        Self { kind: SpectrumKind::Uniform }
    }

    /// Superquantile with tail level `q ∈ (0, 1)`.
    pub fn superquantile(q: f64) -> Result<Self> {
        if !(q > 0.0 && q < 1.0) || !q.is_finite() {
            return Err(Error::InvalidParameter { what: "superquantile q", value: q });
        }
        Ok(Self { kind: SpectrumKind::Superquantile { q } })
    }

    /// Extremile with order `r ≥ 1`.
    pub fn extremile(r: f64) -> Result<Self> {
        if !(r >= 1.0) || !r.is_finite() {
            return Err(Error::InvalidParameter { what: "extremile r", value: r });
        }
        Ok(Self { kind: SpectrumKind::Extremile { r } })
    }

    /// Exponential spectral risk measure with `ρ > 0`.
    pub fn esrm(rho: f64) -> Result<Self> {
        if !(rho > 0.0) || !rho.is_finite() {
            return Err(Error::InvalidParameter { what: "esrm rho", value: rho });
        }
        Ok(Self { kind: SpectrumKind::Esrm { rho } })
    }

    /// Truncated (risk-seeking) spectrum keeping the fraction `q ∈ (0, 1]`
    /// of smallest losses.
    pub fn truncated_risk_seeking(q: f64) -> Result<Self> {
        if !(q > 0.0 && q <= 1.0) || !q.is_finite() {
            return Err(Error::InvalidParameter { what: "truncated q", value: q });
        }
        Ok(Self { kind: SpectrumKind::TruncatedRiskSeeking { q } })
    }

    /// Risk-seeking extremile with order `r ≥ 1`.
    pub fn extremile_risk_seeking(r: f64) -> Result<Self> {
        if !(r >= 1.0) || !r.is_finite() {
            return Err(Error::InvalidParameter { what: "risk-seeking extremile r", value: r });
        }
        Ok(Self { kind: SpectrumKind::ExtremileRiskSeeking { r } })
    }

    pub fn kind(&self) -> SpectrumKind {
        self.kind
    }

    /// True for the families with non-decreasing densities.
    pub fn is_risk_averse(&self) -> bool {
        matches!(
            self.kind,
            SpectrumKind::Uniform
                | SpectrumKind::Superquantile { .. }
                | SpectrumKind::Extremile { .. }
                | SpectrumKind::Esrm { .. }
        )
    }

    /// Short lowercase name, used in file names and reports.
    pub fn name(&self) -> &'static str {
        match self.kind {
            SpectrumKind::Uniform => "uniform",
            SpectrumKind::Superquantile { .. } => "superquantile",
            SpectrumKind::Extremile { .. } => "extremile",
            SpectrumKind::Esrm { .. } => "esrm",
            SpectrumKind::TruncatedRiskSeeking { .. } => "truncated",
            SpectrumKind::ExtremileRiskSeeking { .. } => "extremile_rs",
        }
    }

    /// The family parameter, if any.
    pub fn param(&self) -> Option<f64> {
        match self.kind {
            SpectrumKind::Uniform => None,
            SpectrumKind::Superquantile { q } | SpectrumKind::TruncatedRiskSeeking { q } => Some(q),
            SpectrumKind::Extremile { r } | SpectrumKind::ExtremileRiskSeeking { r } => Some(r),
            SpectrumKind::Esrm { rho } => Some(rho),
        }
    }

    /// Density `s(t)` at `t` strictly inside (0, 1).
    pub fn density(&self, t: f64) -> f64 {
        assert!(t > 0.0 && t < 1.0, "density requires t in (0,1), got {t}");
        match self.kind {
            SpectrumKind::Uniform => 1.0,
            SpectrumKind::Superquantile { q } => {
                if t >= q {
                    1.0 / (1.0 - q)
                } else {
                    0.0
                }
            }
            SpectrumKind::Extremile { r } => r * fmath::powf(t, r - 1.0),
            SpectrumKind::Esrm { rho } => {
                rho * fmath::exp(rho * (t - 1.0)) / (1.0 - fmath::exp(-rho))
            }
            SpectrumKind::TruncatedRiskSeeking { q } => {
                if t <= q {
                    1.0 / q
                } else {
                    0.0
                }
            }
            SpectrumKind::ExtremileRiskSeeking { r } => r * fmath::powf(1.0 - t, r - 1.0),
        }
    }

    /// Exact bin integrals `σ_i = ∫_{(i-1)/n}^{i/n} s(t) dt`, computed in
    /// closed form. Bins straddling a discontinuity are split exactly.
    pub fn discretize(&self, n: usize) -> Result<SigmaWeights> {
        if n == 0 {
            return Err(Error::InvalidParameter { what: "discretize n", value: 0.0 });
        }
        let nf = n as f64;
        let mut sigma = Vec::with_capacity(n);
        match self.kind {
            SpectrumKind::Uniform => {
                sigma.resize(n, 1.0 / nf);
            }
            SpectrumKind::Superquantile { q } => {
                for i in 1..=n {
                    let lo = ((i - 1) as f64 / nf).max(q);
                    let hi = i as f64 / nf;
                    sigma.push((hi - lo).max(0.0) / (1.0 - q));
                }
            }
            SpectrumKind::Extremile { r } => {
                for i in 1..=n {
                    let hi = fmath::powf(i as f64 / nf, r);
                    let lo = fmath::powf((i - 1) as f64 / nf, r);
                    sigma.push(hi - lo);
                }
            }
            SpectrumKind::Esrm { rho } => {
                let scale = fmath::exp(-rho) / (1.0 - fmath::exp(-rho));
                for i in 1..=n {
                    let hi = fmath::exp(rho * i as f64 / nf);
                    let lo = fmath::exp(rho * (i - 1) as f64 / nf);
                    sigma.push(scale * (hi - lo));
                }
            }
            SpectrumKind::TruncatedRiskSeeking { q } => {
                for i in 1..=n {
                    let lo = (i - 1) as f64 / nf;
                    let hi = (i as f64 / nf).min(q);
                    sigma.push((hi - lo).max(0.0) / q);
                }
            }
            SpectrumKind::ExtremileRiskSeeking { r } => {
                for i in 1..=n {
                    let lo = fmath::powf(1.0 - i as f64 / nf, r);
                    let hi = fmath::powf(1.0 - (i - 1) as f64 / nf, r);
                    sigma.push(hi - lo);
                }
            }
        }
        Ok(SigmaWeights { sigma })
    }

    /// `C_s = sup_{t∈(0,1)} |s(t) − 1|`, the uniform deviation of the
    /// density. All supported densities are monotone or piecewise
    /// constant, so the supremum is a closed form of the one-sided limits.
    pub fn uniform_deviation(&self) -> f64 {
        match self.kind {
            SpectrumKind::Uniform => 0.0,
            SpectrumKind::Superquantile { q } => {
                // s is 0 below q and 1/(1−q) above.
                let above = 1.0 / (1.0 - q) - 1.0;
                above.max(1.0)
            }
            SpectrumKind::Extremile { r } => {
                if r == 1.0 {
                    0.0
                } else {
                    // s(0+) = 0, s(1−) = r.
                    (r - 1.0).max(1.0)
                }
            }
            SpectrumKind::Esrm { rho } => {
                let denom = 1.0 - fmath::exp(-rho);
                let at0 = rho * fmath::exp(-rho) / denom;
                let at1 = rho / denom;
                (1.0 - at0).max(at1 - 1.0)
            }
            SpectrumKind::TruncatedRiskSeeking { q } => {
                if q == 1.0 {
                    0.0
                } else {
                    (1.0 / q - 1.0).max(1.0)
                }
            }
            SpectrumKind::ExtremileRiskSeeking { r } => {
                if r == 1.0 {
                    0.0
                } else {
                    // s(0+) = r, s(1−) = 0.
                    (r - 1.0).max(1.0)
                }
            }
        }
    }

    /// Divergences of the density from uniform: `(KL(s‖u), χ²(s‖u))`.
    /// Closed forms for the superquantile and extremile; adaptive
    /// quadrature elsewhere. Defined for risk-averse spectra.
    pub fn divergence_to_uniform(&self) -> Result<(f64, f64)> {
        if !self.is_risk_averse() {
            return Err(Error::UnsupportedSpectrum {
                reason: "divergence to uniform is defined for risk-averse spectra",
            });
        }
        match self.kind {
            SpectrumKind::Uniform => Ok((0.0, 0.0)),
            SpectrumKind::Superquantile { q } => Ok((-fmath::ln(1.0 - q), q / (1.0 - q))),
            SpectrumKind::Extremile { r } => {
                Ok((fmath::ln(r) + 1.0 / r - 1.0, (r - 1.0) * (r - 1.0) / (2.0 * r - 1.0)))
            }
            SpectrumKind::Esrm { .. } => {
                let spec = *self;
                let kl_f = move |t: f64| {
                    let s = spec.density(t);
                    s * fmath::ln(s)
                };
                let chi_f = move |t: f64| {
                    let d = spec.density(t) - 1.0;
                    d * d
                };
                let (kl, _) = quad::integrate(&kl_f, 1e-300, 1.0 - 1e-16, 1e-10);
                let (chi2, _) = quad::integrate(&chi_f, 1e-300, 1.0 - 1e-16, 1e-10);
                Ok((kl, chi2))
            }
            _ => unreachable!(),
        }
    }
}

/// Discretized spectrum weights: non-negative, summing to one, monotone
/// in the direction dictated by the family.
#[derive(Debug, Clone, PartialEq)]
pub struct SigmaWeights {
    sigma: Vec<f64>,
}

impl SigmaWeights {
    /// Wraps an explicit weight vector, validating the simplex and
    /// monotonicity invariants (either direction is accepted).
    pub fn new(sigma: Vec<f64>) -> Result<Self> {
        if sigma.is_empty() {
            return Err(Error::InvalidParameter { what: "sigma length", value: 0.0 });
        }
        let mut sum = 0.0;
        for &s in &sigma {
            if !s.is_finite() || !(0.0..=1.0 + 1e-12).contains(&s) {
                return Err(Error::InvalidParameter { what: "sigma entry", value: s });
            }
            sum += s;
        }
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter { what: "sigma sum", value: sum });
        }
        let nondecreasing = sigma.windows(2).all(|w| w[0] <= w[1] + 1e-12);
        let nonincreasing = sigma.windows(2).all(|w| w[0] + 1e-12 >= w[1]);
        if !nondecreasing && !nonincreasing {
            return Err(Error::InvalidParameter { what: "sigma monotonicity", value: f64::NAN });
        }
        Ok(Self { sigma })
    }

    pub fn n(&self) -> usize {
        self.sigma.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.sigma
    }

    pub fn iter(&self) -> core::slice::Iter<'_, f64> {
        self.sigma.iter()
    }

    pub fn max_weight(&self) -> f64 {
        self.sigma.iter().cloned().fold(0.0, f64::max)
    }

    /// Weights sorted in non-increasing order (for majorization tests).
    pub fn sorted_desc(&self) -> Vec<f64> {
        let mut v = self.sigma.clone();
        v.sort_unstable_by(|a, b| b.partial_cmp(a).unwrap());
        v
    }

    /// True if the weights are non-decreasing (risk-averse direction),
    /// up to rounding noise in the bin integrals.
    pub fn is_nondecreasing(&self) -> bool {
        self.sigma.windows(2).all(|w| w[0] <= w[1] + 1e-12)
    }
}

impl core::ops::Index<usize> for SigmaWeights {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.sigma[i]
    }
}
