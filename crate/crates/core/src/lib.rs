//! Exact-arithmetic laboratory for CP chain systems.
//!
//! The crate manipulates nonnegative measures stored as exact rational
//! masses on p-adic grid cells. On top of that representation it builds:
//!
//! * self-similar chain systems (Cantor, Bernoulli) and their adapted
//!   forward sampler ([`chain`]),
//! * the chain-to-measure construction and the magnification map
//!   ([`extension`]),
//! * the symbolic/measure translation actions and the induced nonsingular
//!   first-return transformation ([`translation`]),
//! * Radon-Nikodym derivatives against group translates, entropy-rate
//!   estimates and conservativity witnesses ([`diagnostics`]),
//! * Hurewicz operator powers, discrete/continuous ergodic averages and
//!   the Chacon-Ornstein ratio ([`ergodic`]).
//!
//! All structural identities (group laws, equivariance, cocycle
//! telescoping) hold as exact rational equalities; floating point enters
//! only through logarithms, which are evaluated on the exact rationals.
//!
//! Trajectory batches run on a rayon pool when the `parallel` feature is
//! enabled (the default); [`exec`] provides a sequential fallback either
//! way.

pub mod chain;
pub mod diagnostics;
pub mod ergodic;
pub mod error;
pub mod exec;
pub mod extension;
pub mod measure;
pub mod ratio;
pub mod session;
pub mod translation;
pub mod verify;

pub use chain::{ChainState, ChainSystem};
pub use error::{Error, Result};
pub use extension::ExtendedState;
pub use measure::{GridMeasure, Homothety, PAdicInterval};
pub use ratio::Ratio;
pub use translation::GroupWord;
