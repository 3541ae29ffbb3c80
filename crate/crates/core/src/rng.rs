//! Deterministic pseudo-random numbers.
//!
//! All randomness in the crate flows through [`SplitMix64`], a 64-bit
//! counter-based generator chosen so that datasets and optimizer runs are
//! bit-reproducible across platforms and easy to re-implement in other
//! languages. The full specification:
//!
//! - state update: `state ← state + 0x9E3779B97F4A7C15 (mod 2^64)`;
//! - output: `mix64(state)` where `mix64` is
//!   `z ^= z >> 30; z *= 0xBF58476D1CE4E5B9; z ^= z >> 27;
//!    z *= 0x94D049BB133111EB; z ^= z >> 31` (all mod 2^64);
//! - uniform in `[0,1)`: `(next_u64() >> 11) · 2⁻⁵³`;
//! - uniform in `(0,1)`: `((next_u64() >> 11) + 0.5) · 2⁻⁵³`;
//! - integer below `n`: `⌊u01 · n⌋` (clamped to `n−1`);
//! - standard normal: `Φ⁻¹(open01)` via Wichura's AS 241;
//! - exponential(rate): `−ln(1 − open01)/rate`;
//! - substream `k` of seed `s`: a generator seeded with
//!   `mix64(s ^ mix64(k ^ 0xB5AD4ECEDA1CE2A9))`.

use crate::fmath;

/// SplitMix64 generator. Copy-cheap; owns an 8-byte state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitMix64 {
    state: u64,
}

/// Weyl increment of the SplitMix64 counter.
pub const GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

const SUBSTREAM_SALT: u64 = 0xB5AD_4ECE_DA1C_E2A9;

/// The SplitMix64 output mix (finalizer of Stafford's Mix13 variant).
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z ^= z >> 30;
    z = z.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z ^= z >> 27;
    z = z.wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    /// Independent stream derived from `(seed, stream)`; used to give
    /// Monte-Carlo replicates and per-seed runs their own generators.
    pub fn substream(seed: u64, stream: u64) -> Self {
        Self::new(mix64(seed ^ mix64(stream ^ SUBSTREAM_SALT)))
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GAMMA);
        mix64(self.state)
    }

    /// Uniform on `[0, 1)` with 53 random bits.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform on the open interval `(0, 1)`; safe to pass to `ln` or Φ⁻¹.
    #[inline]
    pub fn next_open01(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `[0, n)`.
    #[inline]
    pub fn below(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        let i = fmath::floor(self.next_f64() * n as f64) as usize;
        i.min(n - 1)
    }

    /// Standard normal deviate via inverse-CDF sampling.
    #[inline]
    pub fn normal(&mut self) -> f64 {
        fmath::normal_quantile(self.next_open01())
    }

    /// Exponential deviate with the given rate.
    #[inline]
    pub fn exponential(&mut self, rate: f64) -> f64 {
        -fmath::ln(1.0 - self.next_open01()) / rate
    }

    /// Partial Fisher-Yates shuffle: after the call, `pool[..m]` is a
    /// uniform sample without replacement from the elements of `pool`.
    pub fn sample_without_replacement(&mut self, pool: &mut [usize], m: usize) {
        let n = pool.len();
        debug_assert!(m <= n);
        for j in 0..m {
            let k = j + self.below(n - j);
            pool.swap(j, k);
        }
    }

    /// Index draw from the categorical distribution whose cumulative
    /// weights are `cumulative` (non-decreasing, last entry ≈ 1).
    pub fn categorical(&mut self, cumulative: &[f64]) -> usize {
        let u = self.next_f64();
        // Binary search for the first cumulative weight exceeding u.
        let mut lo = 0usize;
        let mut hi = cumulative.len();
        while lo < hi {
            let mid = (lo + hi) / 2;
            if cumulative[mid] <= u {
                lo = mid + 1;
            } else {
                hi = mid;
            }
        }
        lo.min(cumulative.len() - 1)
    }
}
