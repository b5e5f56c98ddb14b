//! CP chain systems and their legal-sequence states.
//!
//! A state is a truncated legal sequence `(mu_n, i_n)_{n <= 0}`:
//! consecutive measures satisfy `mu_{n+1} = mu_n ^ {i_{n+1}}` (one zoom
//! step), exactly at the shared resolution. The built-in generators are
//! self-similar: the Cantor system (base 3, weights 1/2, 0, 1/2) and
//! Bernoulli systems with arbitrary rational weights. For those, every
//! measure in a legal sequence equals the base measure, forward digits
//! are drawn with probability exactly `mu_0[j]_p`, and backward
//! extension draws i.i.d. digits from the weight vector.
//!
//! Arbitrary legal histories can also be supplied directly (see
//! [`ChainState::from_history`]); they are validated but cannot be
//! extended backwards, since no stationary law for them is known.
//!
//! A stored digit word never certifies membership in an eventually
//! constant tail class: states remain extendable past any truncation.

use std::sync::Arc;

use num_bigint::{BigInt, BigUint, RandBigInt};
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::Rng;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::measure::{GridMeasure, PAdicInterval};
use crate::ratio::{parse_ratio, Ratio};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SystemKind {
    Cantor,
    Bernoulli,
}

/// A self-similar chain system: base `p` and a rational weight vector
/// summing to one. The base measure gives digit `j` of every word the
/// factor `w_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainSystem {
    p: u32,
    kind: SystemKind,
    weights: Vec<Ratio>,
}

#[derive(Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
enum SystemSpecFile {
    Cantor,
    Bernoulli { p: u32, weights: Vec<String> },
}

impl ChainSystem {
    /// The Cantor system: base 3, weights (1/2, 0, 1/2).
    pub fn cantor() -> Arc<Self> {
        let half = Ratio::new(BigInt::one(), BigInt::from(2));
        Arc::new(Self {
            p: 3,
            kind: SystemKind::Cantor,
            weights: vec![half.clone(), Ratio::zero(), half],
        })
    }

    /// A Bernoulli system over base `p` with the given weights.
    pub fn bernoulli(p: u32, weights: Vec<Ratio>) -> Result<Arc<Self>> {
        if p < 2 {
            return Err(Error::InvalidSystem(format!("base {p} < 2")));
        }
        if weights.len() != p as usize {
            return Err(Error::InvalidSystem(format!(
                "weights: expected {p} entries, got {}",
                weights.len()
            )));
        }
        if weights.iter().any(|w| w.is_negative()) {
            return Err(Error::InvalidSystem("weights: negative entry".into()));
        }
        let total: Ratio = weights.iter().fold(Ratio::zero(), |a, w| a + w);
        if total != Ratio::one() {
            return Err(Error::InvalidSystem(format!("weights: sum {total} != 1")));
        }
        Ok(Arc::new(Self { p, kind: SystemKind::Bernoulli, weights }))
    }

    /// Parses a system-spec file: `{"type":"cantor"}` or
    /// `{"type":"bernoulli","p":2,"weights":["2/3","1/3"]}`.
    pub fn from_json(text: &str) -> Result<Arc<Self>> {
        let spec: SystemSpecFile = serde_json::from_str(text)
            .map_err(|e| Error::InvalidSystem(format!("system spec: {e}")))?;
        match spec {
            SystemSpecFile::Cantor => Ok(Self::cantor()),
            SystemSpecFile::Bernoulli { p, weights } => {
                let parsed: Result<Vec<Ratio>> = weights.iter().map(|w| parse_ratio(w)).collect();
                Self::bernoulli(p, parsed?)
            }
        }
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    pub fn kind(&self) -> SystemKind {
        self.kind
    }

    pub fn weights(&self) -> &[Ratio] {
        &self.weights
    }

    /// Deterministic systems concentrate the digit law on one digit; the
    /// conservativity diagnostics are vacuous for them.
    pub fn is_deterministic(&self) -> bool {
        self.weights.iter().filter(|w| w.is_positive()).count() == 1
    }

    /// Closed-form word mass of the base measure: the product of the
    /// digit weights. Serves as an arithmetic oracle independent of the
    /// grid representation.
    pub fn word_mass(&self, word: &[u8]) -> Result<Ratio> {
        let mut out = Ratio::one();
        for &d in word {
            if d as u32 >= self.p {
                return Err(Error::InvalidDigit { digit: d as u32, p: self.p });
            }
            out *= &self.weights[d as usize];
        }
        Ok(out)
    }

    /// The base measure on `[0, 1)` at the given resolution: the word
    /// `(i_1..i_r)` cell carries mass `prod w_{i_j}`.
    pub fn base_measure(&self, resolution: u32) -> Result<GridMeasure> {
        let mut cells: Vec<(i128, Ratio)> = vec![(0, Ratio::one())];
        for _ in 0..resolution {
            let mut next = Vec::with_capacity(cells.len() * 2);
            for (c, m) in &cells {
                for (j, w) in self.weights.iter().enumerate() {
                    if w.is_positive() {
                        let idx = c
                            .checked_mul(self.p as i128)
                            .and_then(|x| x.checked_add(j as i128))
                            .ok_or_else(|| Error::IndexOverflow("base measure cell".into()))?;
                        next.push((idx, m * w));
                    }
                }
            }
            cells = next;
        }
        GridMeasure::from_cell_masses(self.p, resolution, (0, 1), cells)
    }
}

/// Draws index `j` with probability exactly `weights[j] / sum(weights)`.
///
/// The weights are cleared to a common denominator and a uniform integer
/// below the total is drawn (through the 64-bit fast path when possible),
/// so the law is exact, not a float approximation.
pub fn sample_index_exact<R: Rng + ?Sized>(weights: &[Ratio], rng: &mut R) -> Result<usize> {
    // Any common denominator works; the product avoids an lcm dependency.
    let mut denom = BigInt::one();
    for w in weights {
        denom *= w.denom();
    }
    let numerators: Vec<BigUint> = weights
        .iter()
        .map(|w| {
            let scaled = w * Ratio::from_integer(denom.clone());
            debug_assert!(scaled.is_integer());
            scaled
                .to_integer()
                .to_biguint()
                .expect("weights validated nonnegative")
        })
        .collect();
    let total: BigUint = numerators.iter().sum();
    if total.is_zero() {
        return Err(Error::CannotAdvance("all weights are zero".into()));
    }
    let draw: BigUint = match total.to_u64() {
        Some(t) => BigUint::from(rng.gen_range(0..t)),
        None => rng.gen_biguint_below(&total),
    };
    let mut acc = BigUint::zero();
    for (j, n) in numerators.iter().enumerate() {
        acc += n;
        if draw < acc {
            return Ok(j);
        }
    }
    unreachable!("draw below total")
}

#[derive(Debug, Clone)]
enum Origin {
    System(Arc<ChainSystem>),
    Custom,
}

/// A truncated legal sequence with depth-m history: measures
/// `mu_{-m+1}, ..., mu_0` on `[0, 1)` and digits `i_{-m+2}, ..., i_0`
/// connecting them.
#[derive(Debug, Clone)]
pub struct ChainState {
    p: u32,
    origin: Origin,
    /// `measures[k]` is `mu_{k - (depth-1)}`; the last entry is `mu_0`.
    measures: Vec<Arc<GridMeasure>>,
    /// `digits[k]` is `i_{k - (depth-2)}`; the last entry is `i_0`.
    digits: Vec<u8>,
    /// Base-measure handle for the self-similar fast path.
    base: Option<Arc<GridMeasure>>,
}

impl ChainState {
    /// Depth-1 state of a built-in system: just `mu_0 = ` base measure.
    pub fn initial(system: &Arc<ChainSystem>, resolution: u32) -> Result<Self> {
        let base = Arc::new(system.base_measure(resolution)?);
        Ok(Self {
            p: system.p(),
            origin: Origin::System(system.clone()),
            measures: vec![base.clone()],
            digits: Vec::new(),
            base: Some(base),
        })
    }

    /// A built-in-system state with prescribed past digits
    /// `i_{-m+2}, ..., i_0` (deepest first). All measures are the base
    /// measure at `resolution`; each digit must carry positive weight.
    pub fn from_digits(system: &Arc<ChainSystem>, digits: &[u8], resolution: u32) -> Result<Self> {
        let base = Arc::new(system.base_measure(resolution)?);
        for &d in digits {
            if d as u32 >= system.p() {
                return Err(Error::InvalidDigit { digit: d as u32, p: system.p() });
            }
            if !system.weights()[d as usize].is_positive() {
                return Err(Error::ConsistencyViolation(format!(
                    "digit {d} has zero weight; the history is illegal"
                )));
            }
        }
        Ok(Self {
            p: system.p(),
            origin: Origin::System(system.clone()),
            measures: vec![base.clone(); digits.len() + 1],
            digits: digits.to_vec(),
            base: Some(base),
        })
    }

    /// Wraps an externally supplied legal history (deepest first) after
    /// verifying legality exactly at the shared resolutions. No
    /// stationarity is claimed and backward extension is unavailable.
    pub fn from_history(p: u32, measures: Vec<GridMeasure>, digits: Vec<u8>) -> Result<Self> {
        if measures.is_empty() {
            return Err(Error::ConsistencyViolation("empty history".into()));
        }
        if digits.len() + 1 != measures.len() {
            return Err(Error::ConsistencyViolation(format!(
                "{} measures need {} digits, got {}",
                measures.len(),
                measures.len() - 1,
                digits.len()
            )));
        }
        let state = Self {
            p,
            origin: Origin::Custom,
            measures: measures.into_iter().map(Arc::new).collect(),
            digits,
            base: None,
        };
        state.check_legal()?;
        Ok(state)
    }

    /// Constructor for histories that are legal by construction (the
    /// group action replays the zoom recursion itself), skipping the
    /// redundant legality re-verification.
    pub(crate) fn from_replayed(p: u32, measures: Vec<GridMeasure>, digits: Vec<u8>) -> Self {
        Self {
            p,
            origin: Origin::Custom,
            measures: measures.into_iter().map(Arc::new).collect(),
            digits,
            base: None,
        }
    }

    #[cfg(test)]
    pub(crate) fn from_history_unchecked(
        p: u32,
        measures: Vec<GridMeasure>,
        digits: Vec<u8>,
    ) -> Self {
        Self::from_replayed(p, measures, digits)
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    pub fn depth(&self) -> usize {
        self.measures.len()
    }

    pub fn system(&self) -> Option<&Arc<ChainSystem>> {
        match &self.origin {
            Origin::System(s) => Some(s),
            Origin::Custom => None,
        }
    }

    /// Lowest stored measure index (`-depth + 1`).
    pub fn min_measure_index(&self) -> i64 {
        -(self.depth() as i64) + 1
    }

    /// Lowest stored digit index (`-depth + 2`), when depth >= 2.
    pub fn min_digit_index(&self) -> Option<i64> {
        (self.depth() >= 2).then(|| -(self.depth() as i64) + 2)
    }

    /// The measure `mu_n`, `n <= 0`.
    pub fn measure(&self, n: i64) -> Result<&Arc<GridMeasure>> {
        let idx = n + self.depth() as i64 - 1;
        if n > 0 || idx < 0 {
            return Err(Error::DepthExhausted(format!("measure index {n}")));
        }
        Ok(&self.measures[idx as usize])
    }

    /// The digit `i_n`, `n <= 0`.
    pub fn digit(&self, n: i64) -> Result<u8> {
        let idx = n + self.depth() as i64 - 2;
        if n > 0 || idx < 0 {
            return Err(Error::DepthExhausted(format!("digit index {n}")));
        }
        Ok(self.digits[idx as usize])
    }

    /// All stored digits `i_{-m+2}, ..., i_0`, deepest first.
    pub fn digits(&self) -> &[u8] {
        &self.digits
    }

    /// Verifies `mu_{n+1} = mu_n ^ {i_{n+1}}` exactly at shared
    /// resolutions for every stored pair.
    pub fn check_legal(&self) -> Result<()> {
        for k in 0..self.digits.len() {
            let zoomed = self.measures[k].zoom(self.digits[k])?;
            if !zoomed.eq_on_common_window(&self.measures[k + 1])? {
                return Err(Error::ConsistencyViolation(format!(
                    "mu_{} != mu_{} ^ {}",
                    k as i64 - self.depth() as i64 + 2,
                    k as i64 - self.depth() as i64 + 1,
                    self.digits[k]
                )));
            }
        }
        Ok(())
    }

    fn digit_weights(&self) -> Result<Vec<Ratio>> {
        let mu0 = self.measures.last().expect("nonempty");
        if mu0.is_zero() {
            return Err(Error::CannotAdvance("mu_0 is the zero measure".into()));
        }
        if mu0.resolution() < 1 {
            return Err(Error::ResolutionExhausted(
                "digit sampling needs resolution >= 1".into(),
            ));
        }
        (0..self.p as u8)
            .map(|j| mu0.mass(&PAdicInterval::digit_cell(self.p, j)?))
            .collect()
    }

    /// Draws the next digit with probability exactly `mu_0[j]_p` and
    /// appends the zoomed measure; the new state is legal by
    /// construction. Also returns the drawn digit.
    pub fn sample_forward<R: Rng + ?Sized>(mut self, rng: &mut R) -> Result<(Self, u8)> {
        let weights = self.digit_weights()?;
        let j = sample_index_exact(&weights, rng)? as u8;
        let mu0 = self.measures.last().expect("nonempty");
        let next = match &self.base {
            // Self-similar fast path: zooming the base measure along a
            // positive-weight digit reproduces the base measure, so the
            // stored resolution does not erode along the trajectory.
            Some(base) if Arc::ptr_eq(mu0, base) => base.clone(),
            _ => Arc::new(mu0.zoom(j)?),
        };
        self.measures.push(next);
        self.digits.push(j);
        Ok((self, j))
    }

    /// Drops the deepest entries, keeping `keep` measures. Long forward
    /// walks (Monte Carlo sampling) use this to stay O(1) in memory.
    pub fn trim_past(&mut self, keep: usize) {
        let keep = keep.max(1);
        if self.measures.len() > keep {
            let drop = self.measures.len() - keep;
            self.measures.drain(..drop);
            self.digits.drain(..drop.min(self.digits.len()));
        }
    }

    /// Prepends `extra` i.i.d. digits from the weight vector, each with
    /// the base measure at the resolution chosen by `res_for`, which
    /// receives `|n|` for the new measure index `n`. Legality is
    /// automatic for self-similar systems.
    pub fn extend_past_with<R: Rng + ?Sized>(
        &self,
        extra: usize,
        rng: &mut R,
        mut res_for: impl FnMut(u32) -> u32,
    ) -> Result<Self> {
        let system = match &self.origin {
            Origin::System(s) => s.clone(),
            Origin::Custom => {
                return Err(Error::NotSelfSimilar(
                    "backward extension needs a built-in system".into(),
                ))
            }
        };
        if extra == 0 {
            return Ok(self.clone());
        }
        let old_min = self.min_measure_index();
        let mut new_measures: Vec<Arc<GridMeasure>> = Vec::with_capacity(self.depth() + extra);
        let mut new_digits: Vec<u8> = Vec::with_capacity(self.digits.len() + extra);
        // New indices run old_min - extra .. old_min - 1, deepest first.
        for off in (1..=extra).rev() {
            let n = old_min - off as i64;
            let res = res_for(n.unsigned_abs() as u32);
            new_measures.push(Arc::new(system.base_measure(res)?));
            new_digits.push(sample_index_exact(system.weights(), rng)? as u8);
        }
        new_measures.extend(self.measures.iter().cloned());
        // The digit at the seam (index old_min + 1) exists whenever the
        // old state had depth >= 2 and stays where it was.
        new_digits.extend(self.digits.iter().copied());
        Ok(Self {
            p: self.p,
            origin: self.origin.clone(),
            measures: new_measures,
            digits: new_digits,
            base: self.base.clone(),
        })
    }

    /// Backward extension at the current uniform resolution.
    pub fn extend_past<R: Rng + ?Sized>(&self, extra: usize, rng: &mut R) -> Result<Self> {
        let res = self.measures.first().expect("nonempty").resolution();
        self.extend_past_with(extra, rng, |_| res)
    }

    /// Conditional probability of the next `word.len()` digits:
    /// `mu_0[word]`.
    pub fn word_probability(&self, word: &[u8]) -> Result<Ratio> {
        let mu0 = self.measures.last().expect("nonempty");
        if (mu0.resolution() as usize) < word.len() {
            return Err(Error::ResolutionExhausted(format!(
                "word of length {} at resolution {}",
                word.len(),
                mu0.resolution()
            )));
        }
        mu0.mass(&PAdicInterval::from_word(self.p, word)?)
    }
}

/// Empirical estimate of `P(phi_0 < 1)` over `samples` forward steps:
/// positive estimates witness non-determinism. For the built-in systems
/// the step law is i.i.d., so a single rolling trajectory samples the
/// stationary law exactly.
pub fn determinism_estimate<R: Rng + ?Sized>(
    system: &Arc<ChainSystem>,
    samples: u64,
    resolution: u32,
    rng: &mut R,
) -> Result<f64> {
    assert!(samples >= 1);
    let mut state = ChainState::initial(system, resolution)?;
    let mut below_one: u64 = 0;
    for _ in 0..samples {
        let mu0 = state.measure(0)?.clone();
        let (next, j) = state.sample_forward(rng)?;
        state = next;
        state.trim_past(2);
        let phi0 = mu0.mass(&PAdicInterval::digit_cell(system.p(), j)?)?;
        if phi0 < Ratio::one() {
            below_one += 1;
        }
    }
    Ok(below_one as f64 / samples as f64)
}
