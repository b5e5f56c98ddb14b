//! From chain states to extended states: the measure built from a
//! history, and the magnification dynamics on it.
//!
//! A digit past `i_- = (i_n)_{n <= 0}` determines the unique well-based
//! compatible interval sequence `I_0 = [0,1) c I_{-1} c I_{-2} c ...`
//! where `I_n` is the interval whose `i_{n+1}`-th subinterval is
//! `I_{n+1}`. Pushing each `mu_n` onto `I_n` and normalizing gives a
//! tower of measures that agree (up to a positive constant, eventually
//! exactly) on nested windows; their limit is the extended measure `nu`.
//!
//! At finite depth the tower is verified rather than assumed: for every
//! stored level the proportionality constant is computed and checked
//! exactly, and `nu` is represented by the deepest level. Because the
//! tower stabilizes, this truncation is exact on its window, not an
//! approximation: extending the past refines the window without
//! changing any stored mass.

use std::collections::VecDeque;

use num_traits::{One, Signed, Zero};
use rand::Rng;

use crate::chain::{sample_index_exact, ChainState};
use crate::error::{Error, Result};
use crate::measure::{pow_i128, GridMeasure, Homothety, PAdicInterval};
use crate::ratio::{ratio_i128, Ratio};

/// Integer-endpoint interval `[lo, lo + p^len_exp)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IntInterval {
    pub lo: i128,
    pub len_exp: u32,
}

impl IntInterval {
    pub fn hi(&self, p: u32) -> Result<i128> {
        self.lo
            .checked_add(pow_i128(p, self.len_exp)?)
            .ok_or_else(|| Error::IndexOverflow("interval upper bound".into()))
    }

    pub fn contains_unit(&self, p: u32, k: i128) -> bool {
        match self.hi(p) {
            Ok(hi) => self.lo <= k && k + 1 <= hi,
            Err(_) => false,
        }
    }
}

/// The unique well-based interval sequence compatible with the digit
/// past: entry `k` is `I_{-k}`, so the result has `depth + 1` entries.
///
/// `digits` are `i_{-(len-1)}, ..., i_0`, deepest first, and `depth`
/// may not exceed their count.
pub fn compatible_intervals(p: u32, digits: &[u8], depth: usize) -> Result<Vec<IntInterval>> {
    if depth > digits.len() {
        return Err(Error::DepthExhausted(format!(
            "{depth} interval levels need {depth} digits, got {}",
            digits.len()
        )));
    }
    let mut out = Vec::with_capacity(depth + 1);
    out.push(IntInterval { lo: 0, len_exp: 0 });
    let mut lo: i128 = 0;
    for k in 1..=depth {
        // I_{-k} is the interval whose d-th subinterval is I_{-k+1},
        // where d = i_{-k+1}.
        let d = digits[digits.len() - k] as i128;
        let width = pow_i128(p, (k - 1) as u32)?;
        lo = lo
            .checked_sub(d.checked_mul(width).ok_or_else(overflow)?)
            .ok_or_else(overflow)?;
        out.push(IntInterval { lo, len_exp: k as u32 });
    }
    Ok(out)
}

fn overflow() -> Error {
    Error::IndexOverflow("compatible interval".into())
}

/// The measure `mu_n` rescaled onto its compatible interval and
/// normalized: `N rho_{I_0}^{I_n} mu_n`, supported in `I_n`.
pub fn mu_tilde(state: &ChainState, n: i64) -> Result<GridMeasure> {
    if n > 0 {
        return Err(Error::DepthExhausted(format!("mu_tilde at positive index {n}")));
    }
    let p = state.p();
    let depth = n.unsigned_abs() as usize;
    let intervals = compatible_intervals(p, state.digits(), depth)?;
    let target = intervals[depth];
    let mu = state.measure(n)?;
    let map = Homothety::interval_map(
        p,
        &Ratio::zero(),
        0,
        &ratio_i128(target.lo),
        target.len_exp as i32,
    );
    mu.push(&map)?.normalize()
}

/// Per-level proportionality record from building an extended state.
#[derive(Debug, Clone)]
pub struct ThetaReport {
    /// `(n, lambda)` with `tilde mu_{n-1} = lambda tilde mu_n` on `I_n`.
    pub lambdas: Vec<(i64, Ratio)>,
    /// Largest index at or below which every lambda equals one. For
    /// adapted states this is 0: the tower is exact from the start.
    pub stabilized_from: i64,
}

/// A point of the extended system: the measure `nu` on the window
/// `I_{-(m-1)}`, the digit past that produced it, and optional forward
/// digits consumed by magnification.
///
/// `nu` restricted to `[0, 1)` is a probability measure or zero, and
/// its window always equals the deepest compatible interval of the
/// stored past.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedState {
    p: u32,
    nu: GridMeasure,
    past: Vec<u8>,
    forward: VecDeque<u8>,
}

impl ExtendedState {
    pub fn new(nu: GridMeasure, past: Vec<u8>, forward: Vec<u8>) -> Result<Self> {
        let p = nu.p();
        for &d in past.iter().chain(forward.iter()) {
            if d as u32 >= p {
                return Err(Error::InvalidDigit { digit: d as u32, p });
            }
        }
        let intervals = compatible_intervals(p, &past, past.len())?;
        let deepest = intervals[past.len()];
        let q = nu.resolution();
        let scale = pow_i128(p, q)?;
        let want = (
            deepest.lo.checked_mul(scale).ok_or_else(overflow)?,
            deepest.hi(p)?.checked_mul(scale).ok_or_else(overflow)?,
        );
        if nu.window_cells() != want {
            return Err(Error::ConsistencyViolation(format!(
                "window {:?} does not match the deepest compatible interval {:?}",
                nu.window_cells(),
                want
            )));
        }
        let unit = nu.mass_units(0, 1)?;
        if !unit.is_zero() && !unit.is_one() {
            return Err(Error::ConsistencyViolation(format!(
                "nu[0,1) = {unit}, expected 0 or 1"
            )));
        }
        Ok(Self { p, nu, past, forward: forward.into() })
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    pub fn nu(&self) -> &GridMeasure {
        &self.nu
    }

    /// Past digits `i_{-(m-2)}, ..., i_0`, deepest first.
    pub fn past(&self) -> &[u8] {
        &self.past
    }

    pub fn forward(&self) -> impl Iterator<Item = u8> + '_ {
        self.forward.iter().copied()
    }

    pub fn forward_len(&self) -> usize {
        self.forward.len()
    }

    /// Stores forward digits for later magnification steps.
    pub fn with_forward(mut self, digits: &[u8]) -> Result<Self> {
        for &d in digits {
            if d as u32 >= self.p {
                return Err(Error::InvalidDigit { digit: d as u32, p: self.p });
            }
            self.forward.push_back(d);
        }
        Ok(self)
    }

    /// Draws one forward digit with probability `nu[j]_p` (the adapted
    /// law) and stores it.
    pub fn sample_forward_digit<R: Rng + ?Sized>(mut self, rng: &mut R) -> Result<(Self, u8)> {
        if self.nu.resolution() < 1 {
            return Err(Error::ResolutionExhausted(
                "forward sampling needs resolution >= 1".into(),
            ));
        }
        let weights: Result<Vec<Ratio>> = (0..self.p as u8)
            .map(|j| self.nu.mass(&PAdicInterval::digit_cell(self.p, j)?))
            .collect();
        let j = sample_index_exact(&weights?, rng)? as u8;
        self.forward.push_back(j);
        Ok((self, j))
    }

    /// One magnification step: zoom into the first forward digit's cell
    /// and renormalize; the digit moves from the forward queue to the
    /// past and the window rescales accordingly.
    pub fn magnify(&self) -> Result<Self> {
        let &i1 = self
            .forward
            .front()
            .ok_or_else(|| Error::CannotAdvance("no forward digit stored".into()))?;
        let zoomed = self.nu.push(&Homothety::digit_zoom(self.p, i1)?)?.normalize()?;
        let mut past = self.past.clone();
        past.push(i1);
        let mut forward = self.forward.clone();
        forward.pop_front();
        Self::new(zoomed, past, Vec::new()).map(|mut s| {
            s.forward = forward;
            s
        })
    }
}

/// The chain-to-measure map: builds `nu` from the stored history,
/// verifying the tower's exact proportionality at every level.
pub fn theta(state: &ChainState) -> Result<ExtendedState> {
    theta_with_report(state).map(|(e, _)| e)
}

pub fn theta_with_report(state: &ChainState) -> Result<(ExtendedState, ThetaReport)> {
    let p = state.p();
    let levels = state.depth() - 1;
    let mut tildes: Vec<GridMeasure> = Vec::with_capacity(levels + 1);
    for k in 0..=levels {
        tildes.push(mu_tilde(state, -(k as i64))?);
    }
    let intervals = compatible_intervals(p, state.digits(), levels)?;

    let mut lambdas = Vec::with_capacity(levels);
    for k in 0..levels {
        // tilde mu at index -(k+1) restricted to I_{-k} against tilde mu
        // at index -k.
        let inner = intervals[k];
        let deeper = tildes[k + 1].restrict_units(inner.lo, inner.hi(p)?)?;
        let shallower = &tildes[k];
        let lambda = match (deeper.is_zero(), shallower.is_zero()) {
            (true, true) => Ratio::one(),
            (false, false) => deeper.total_mass() / shallower.total_mass(),
            _ => {
                return Err(Error::ConsistencyViolation(format!(
                    "tower level {} vanishes on one side only",
                    -(k as i64)
                )))
            }
        };
        if !lambda.is_positive() && !(deeper.is_zero() && shallower.is_zero()) {
            return Err(Error::ConsistencyViolation(format!(
                "nonpositive tower constant at level {}",
                -(k as i64)
            )));
        }
        if !deeper.eq_on_common_window(&shallower.scale(&lambda))? {
            return Err(Error::ConsistencyViolation(format!(
                "tower mismatch at level {}: measures are not proportional",
                -(k as i64)
            )));
        }
        lambdas.push((-(k as i64), lambda));
    }

    let mut stabilized_from = -(levels as i64) - 1;
    for (n, lambda) in lambdas.iter().rev() {
        if lambda.is_one() {
            stabilized_from = *n;
        } else {
            break;
        }
    }
    if lambdas.is_empty() {
        stabilized_from = 0;
    }

    let nu = tildes.pop().expect("at least one level");
    let extended = ExtendedState::new(nu, state.digits().to_vec(), Vec::new())?;
    Ok((extended, ThetaReport { lambdas, stabilized_from }))
}

/// Recovers `mu_n` from the extended measure:
/// `N R rho_{I_n}^{I_0} (nu | I_n)`, exactly.
pub fn theta_inverse(e: &ExtendedState, n: i64) -> Result<GridMeasure> {
    if n > 0 {
        return Err(Error::DepthExhausted(format!("index {n} is positive")));
    }
    let p = e.p();
    let depth = n.unsigned_abs() as usize;
    let intervals = compatible_intervals(p, e.past(), depth)?;
    let source = intervals[depth];
    let restricted = e.nu().restrict_units(source.lo, source.hi(p)?)?;
    let map = Homothety::interval_map(
        p,
        &ratio_i128(source.lo),
        source.len_exp as i32,
        &Ratio::zero(),
        0,
    );
    let pulled = restricted.push(&map)?;
    if pulled.is_zero() {
        return GridMeasure::new_zero(p, pulled.resolution(), 0, 1);
    }
    pulled.normalize()?.restrict(&PAdicInterval::unit(p, 0))
}
