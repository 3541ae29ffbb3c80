//! Error type shared across the crate.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

/// Errors produced by the library.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A constructor received a parameter outside its domain.
    InvalidParameter { what: &'static str, value: f64 },
    /// Two inputs that must agree in length do not.
    DimensionMismatch { expected: usize, got: usize },
    /// An input contained NaN or an infinity.
    NonFinite { what: &'static str },
    /// An input that must be sorted non-decreasing is not.
    UnsortedInput,
    /// An index into a dataset or loss model is out of range.
    IndexOutOfRange { index: usize, len: usize },
    /// The requested operation is not defined for this spectrum
    /// (e.g. entropic smoothing with zero weights).
    UnsupportedSpectrum { reason: &'static str },
    /// The primal-dual certificate of the smoothed oracle exceeded its
    /// tolerance, indicating a numerical failure.
    DualityGap { gap: f64, value: f64 },
    /// An exhaustive enumeration would exceed the configured cap.
    CombinatorialCap { combinations: u128, cap: u128 },
    /// An optimizer configuration is inconsistent.
    InvalidConfig(String),
    /// The reference solver hit its iteration cap; carries the best
    /// iterate found and its objective value.
    ReferenceNotConverged {
        best: Vec<f64>,
        value: f64,
        grad_norm: f64,
    },
    /// Every learning rate in a grid diverged for the named algorithm.
    AllRatesDiverged { algorithm: String },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidParameter { what, value } => {
                write!(f, "invalid parameter {what} = {value}")
            }
            Error::DimensionMismatch { expected, got } => {
                write!(f, "dimension mismatch: expected {expected}, got {got}")
            }
            Error::NonFinite { what } => write!(f, "non-finite value in {what}"),
            Error::UnsortedInput => write!(f, "input must be sorted non-decreasing"),
            Error::IndexOutOfRange { index, len } => {
                write!(f, "index {index} out of range for length {len}")
            }
            Error::UnsupportedSpectrum { reason } => write!(f, "unsupported spectrum: {reason}"),
            Error::DualityGap { gap, value } => {
                write!(f, "duality gap {gap:e} too large for value {value:e}")
            }
            Error::CombinatorialCap { combinations, cap } => {
                write!(f, "enumeration of {combinations} minibatches exceeds cap {cap}")
            }
            Error::InvalidConfig(reason) => write!(f, "invalid configuration: {reason}"),
            Error::ReferenceNotConverged { value, grad_norm, .. } => write!(
                f,
                "reference solver did not converge (best value {value:e}, gradient norm {grad_norm:e})"
            ),
            Error::AllRatesDiverged { algorithm } => {
                write!(f, "all learning rates diverged for {algorithm}")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;
