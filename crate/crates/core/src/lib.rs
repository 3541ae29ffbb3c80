//! Minimization of spectral risk measures (L-risks) over finite datasets.
//!
//! A spectral risk weights the *sorted* losses `ℓ_(1) ≤ … ≤ ℓ_(n)` by a
//! vector `σ` obtained by discretizing a density on (0,1):
//!
//! ```text
//!     R_σ(w) = Σ_i σ_i ℓ_(i)(w),      σ_i = ∫_{(i-1)/n}^{i/n} s(t) dt.
//! ```
//!
//! Non-decreasing weights put mass on the upper tail of the loss
//! distribution (superquantile/CVaR, extremile, exponential spectral risk
//! measure); non-increasing weights discount it, which is useful for
//! outlier-robust clustering.
//!
//! The crate provides:
//!
//! - [`spectra`]: spectral densities and their exact discretization;
//! - [`risk`]: the L-statistic, its sorting-based subgradient, and the
//!   `ℓ2`-regularized objective;
//! - [`smoothing`]: the smoothed L-statistic `h_{νΩ}` computed by
//!   pool-adjacent-violators isotonic regression on the permutahedron,
//!   with a primal-dual gap certificate;
//! - [`optim`]: minibatch subgradient descent, dual averaging, and a
//!   family of variance-reduced (SVRG-style) methods that re-sort losses
//!   at checkpoints;
//! - [`data`]: dataset generation, standardization, and the squared /
//!   multinomial-logistic / k-means loss models;
//! - [`analysis`]: verification experiments (exhaustive bias enumeration,
//!   Monte-Carlo consistency, sorting sensitivity, quantile differences).
//!
//! The core is `no_std`-compatible (`--no-default-features --features
//! libm`); everything is deterministic given a seed, built on the
//! [`rng::SplitMix64`] generator.

#![cfg_attr(not(feature = "std"), no_std)]

#[cfg(all(not(feature = "std"), not(feature = "libm")))]
compile_error!("srm-core requires either the `std` or the `libm` feature");

extern crate alloc;

pub mod analysis;
pub mod data;
pub mod error;
pub mod fd;
pub(crate) mod fmath;
pub mod optim;
pub mod quad;
pub mod risk;
pub mod rng;
pub mod smoothing;
pub mod spectra;

pub use error::{Error, Result};
pub use risk::{IndexedLoss, RegularizedObjective, SortPermutation};
pub use spectra::{SigmaWeights, Spectrum};
