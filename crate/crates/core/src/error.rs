//! Error taxonomy shared by all modules.
//!
//! Grid measures are truncations: they represent a measure exactly on a
//! finite window at a finite resolution. Operations that would need mass
//! outside the window report [`Error::WindowExhausted`] instead of
//! silently returning zero, and operations that would need cells finer
//! than the stored resolution report [`Error::ResolutionExhausted`].
//! Both are recoverable by rebuilding the state deeper or finer.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    /// A digit fell outside `0..p`.
    #[error("invalid digit {digit} for base {p}")]
    InvalidDigit { digit: u32, p: u32 },

    /// An interval or map does not land on the measure's grid.
    #[error("not grid-aligned: {0}")]
    Alignment(String),

    /// The operation needs cells finer than the stored resolution.
    #[error("resolution exhausted: {0}")]
    ResolutionExhausted(String),

    /// The operation needs mass outside the stored window.
    #[error("window exhausted: {0}")]
    WindowExhausted(String),

    /// The operation needs more stored history than the state carries.
    #[error("depth exhausted: {0}")]
    DepthExhausted(String),

    /// psi of the zero measure is undefined.
    #[error("psi undefined for the zero measure")]
    UndefinedPsi,

    /// The state cannot be advanced (zero measure, or no forward digit).
    #[error("cannot advance: {0}")]
    CannotAdvance(String),

    /// A stored history violates an exact identity it should satisfy.
    #[error("consistency violation: {0}")]
    ConsistencyViolation(String),

    /// An exhaustive enumeration would exceed the configured cap.
    #[error("combinatorial budget exceeded: {need} group words > cap {cap}")]
    CombinatorialBudget { need: u128, cap: u128 },

    /// Window auto-extension gave up after the configured retries.
    #[error("retry budget exceeded: {0}")]
    RetryBudgetExceeded(String),

    /// Backward extension is only defined for self-similar systems.
    #[error("not a self-similar system: {0}")]
    NotSelfSimilar(String),

    /// A system specification failed validation.
    #[error("invalid system: {0}")]
    InvalidSystem(String),

    /// Cell indexing left the i128 range.
    #[error("index overflow: {0}")]
    IndexOverflow(String),

    /// Two independent computations of the same quantity disagreed.
    #[error("cross-check mismatch: {0}")]
    CrossCheckMismatch(String),
}
