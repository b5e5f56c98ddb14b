//! Translation actions on digit pasts, chain states and extended
//! states, and the induced first-return transformation.
//!
//! Translating the extended measure by an integer k must be matched on
//! the symbolic side: `s_k` rewrites the digit past so that its
//! compatible interval sequence is the old one shifted by -k from some
//! level down. The rewritten tail differs from the original in finitely
//! many coordinates, so the difference is a group word: a finitely
//! supported digit vector under coordinatewise addition mod p. Acting
//! by a group word on a chain state replaces the digits and replays the
//! zoom recursion above the first changed level.
//!
//! The plain translation action is singular (it can move all mass off
//! the unit interval), so the dynamics use the induced map: translate by
//! the first `tau >= 1` with mass on `[tau, tau+1)`. Auto-extension on
//! window exhaustion lives in [`crate::session`]; everything here is a
//! pure function of its inputs.

use std::sync::Arc;

use crate::chain::ChainState;
use crate::error::{Error, Result};
use crate::extension::{compatible_intervals, ExtendedState};
use crate::measure::{pow_i128, GridMeasure, Homothety};

/// A finitely supported digit vector under coordinatewise addition
/// mod p: digits at positions `start..=0`, implicitly zero below.
///
/// Canonical form trims leading (deepest) zeros, so the identity is the
/// empty word and equality is structural.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GroupWord {
    p: u32,
    /// `digits[j]` sits at position `start + j`; `digits.last()` is the
    /// position-0 entry. Empty for the identity.
    digits: Vec<u8>,
}

impl GroupWord {
    /// Builds a group word from digits at positions `-(len-1)..=0`,
    /// deepest first.
    pub fn from_digits(p: u32, digits: &[u8]) -> Result<Self> {
        assert!(p >= 2);
        for &d in digits {
            if d as u32 >= p {
                return Err(Error::InvalidDigit { digit: d as u32, p });
            }
        }
        let mut v = digits.to_vec();
        while v.first() == Some(&0) {
            v.remove(0);
        }
        Ok(Self { p, digits: v })
    }

    pub fn identity(p: u32) -> Self {
        Self { p, digits: Vec::new() }
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    pub fn is_identity(&self) -> bool {
        self.digits.is_empty()
    }

    /// Position of the deepest (possibly zero after addition) stored
    /// digit; 0 for the identity.
    pub fn start(&self) -> i64 {
        -(self.digits.len() as i64) + 1
    }

    /// Digit at position `n <= 0` (zero below the support).
    pub fn digit_at(&self, n: i64) -> u8 {
        let idx = n + self.digits.len() as i64 - 1;
        if n > 0 || idx < 0 {
            0
        } else {
            self.digits[idx as usize]
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.p, other.p, "mixed bases");
        let len = self.digits.len().max(other.digits.len());
        let mut digits = Vec::with_capacity(len);
        for j in 0..len {
            let n = -(len as i64) + 1 + j as i64;
            let sum = (self.digit_at(n) as u32 + other.digit_at(n) as u32) % self.p;
            digits.push(sum as u8);
        }
        Self::from_digits(self.p, &digits).expect("digits already reduced")
    }

    pub fn neg(&self) -> Self {
        let digits: Vec<u8> = self
            .digits
            .iter()
            .map(|&d| ((self.p - d as u32) % self.p) as u8)
            .collect();
        Self::from_digits(self.p, &digits).expect("digits already reduced")
    }
}

/// The symbolic translation `s_k`: the unique digit past agreeing with
/// the input below some level whose compatible intervals are the input's
/// shifted by `-k` from that level down.
///
/// Fails with `DepthExhausted` when no stored interval contains
/// `[k, k+1)`; the caller extends the past and retries.
pub fn s_k(p: u32, digits: &[u8], k: i128) -> Result<Vec<u8>> {
    let intervals = compatible_intervals(p, digits, digits.len())?;
    let level = intervals
        .iter()
        .position(|iv| iv.contains_unit(p, k))
        .ok_or_else(|| {
            Error::DepthExhausted(format!(
                "[{k}, {k}+1) is outside every stored compatible interval"
            ))
        })?;
    // Walk from I_{-level} down to [k, k+1), reading off the digits.
    let mut out = digits.to_vec();
    let mut lo = intervals[level].lo;
    for step in (0..level).rev() {
        let width = pow_i128(p, step as u32)?;
        let child = (k - lo).div_euclid(width);
        debug_assert!((0..p as i128).contains(&child));
        lo += child * width;
        out[digits.len() - 1 - step] = child as u8;
    }
    debug_assert_eq!(lo, k);
    Ok(out)
}

/// The group word `a` with `s_k(i) = i + a`.
pub fn a_for_k(p: u32, digits: &[u8], k: i128) -> Result<GroupWord> {
    let shifted = s_k(p, digits, k)?;
    let diff: Vec<u8> = shifted
        .iter()
        .zip(digits)
        .map(|(&s, &i)| ((s as u32 + p - i as u32) % p) as u8)
        .collect();
    GroupWord::from_digits(p, &diff)
}

/// The integer `k` with `s_k(i) = i + a`: build the interval sequence
/// compatible with `i + a` that agrees with the input's below the word's
/// support, and read off how far its base sits from `[0, 1)`.
pub fn k_for_a(p: u32, digits: &[u8], a: &GroupWord) -> Result<i128> {
    if a.is_identity() {
        return Ok(0);
    }
    let span = (-a.start()) as usize + 1; // positions start..=0
    if span > digits.len() {
        return Err(Error::DepthExhausted(format!(
            "group word reaches position {}, state stores {} digits",
            a.start(),
            digits.len()
        )));
    }
    let intervals = compatible_intervals(p, digits, digits.len())?;
    // J agrees with I at level start(a) - 1 and descends along i + a.
    let mut lo = intervals[span].lo;
    for j in 0..span {
        let n = a.start() + j as i64;
        let digit = {
            let i_n = digits[digits.len() - span + j];
            ((i_n as u32 + a.digit_at(n) as u32) % p) as u8
        };
        let width = pow_i128(p, (span - 1 - j) as u32)?;
        lo += digit as i128 * width;
    }
    Ok(lo)
}

/// The group action on chain states: digits become `i + a`, measures
/// below the word's support are kept, and the levels above are replayed
/// through the zoom recursion. The result is legal by construction
/// (levels zoomed through zero-mass digits carry the zero measure).
pub fn group_translate(state: &ChainState, a: &GroupWord) -> Result<ChainState> {
    assert_eq!(state.p(), a.p(), "mixed bases");
    if a.is_identity() {
        return Ok(state.clone());
    }
    let start = a.start();
    let min_digit = state
        .min_digit_index()
        .ok_or_else(|| Error::DepthExhausted("depth-1 state has no digits to act on".into()))?;
    if start < min_digit {
        return Err(Error::DepthExhausted(format!(
            "group word reaches position {start}, state stores digits from {min_digit}"
        )));
    }
    let mut new_digits = state.digits().to_vec();
    let len = new_digits.len();
    let span = (-start) as usize + 1;
    for j in 0..span {
        let n = start + j as i64;
        let idx = len - span + j;
        new_digits[idx] = ((new_digits[idx] as u32 + a.digit_at(n) as u32) % state.p()) as u8;
    }
    let mut measures: Vec<GridMeasure> = Vec::with_capacity(state.depth());
    for n in state.min_measure_index()..start {
        measures.push(state.measure(n)?.as_ref().clone());
    }
    // eta_start = mu_{start-1} ^ {j_start}, then upward.
    let mut current = state.measure(start - 1)?.as_ref().clone();
    for j in 0..span {
        let idx = len - span + j;
        current = current.zoom(new_digits[idx])?;
        measures.push(current.clone());
    }
    Ok(ChainState::from_replayed(state.p(), measures, new_digits))
}

/// The translation action on extended states:
/// `T_k(nu, i) = (N t_k nu, s_k(i))`.
pub fn t_k(e: &ExtendedState, k: i128) -> Result<ExtendedState> {
    let nu = translate_measure(e.nu(), k)?;
    let digits = s_k(e.p(), e.past(), k)?;
    let forward: Vec<u8> = e.forward().collect();
    ExtendedState::new(nu, digits, forward)
}

/// Measure half of the action: `t_k^* nu = N t_k nu`.
pub fn translate_measure(nu: &GridMeasure, k: i128) -> Result<GridMeasure> {
    nu.push(&Homothety::translation_int(nu.p(), k))?.normalize()
}

/// First positive translate with mass: `tau(nu) = min{n >= 1 :
/// nu[n, n+1) > 0}`. Window exhaustion means the stored window cannot
/// certify any occupied unit interval to the right.
pub fn tau(nu: &GridMeasure) -> Result<i128> {
    first_occupied(nu, true)
}

/// Mirror image: first `n >= 1` with `nu[-n, -n+1) > 0`.
pub fn tau_minus(nu: &GridMeasure) -> Result<i128> {
    first_occupied(nu, false)
}

fn first_occupied(nu: &GridMeasure, right: bool) -> Result<i128> {
    let side = if right { "right" } else { "left" };
    let exhausted = || {
        Error::WindowExhausted(format!(
            "no occupied unit interval to the {side} inside the window"
        ))
    };
    if nu.is_zero() {
        return Err(exhausted());
    }
    let scan = nu.occupied_units();
    let n = if right {
        scan.iter().find(|&&u| u >= 1).copied()
    } else {
        scan.iter().rev().find(|&&u| u <= -1).map(|&u| -u)
    };
    match n {
        Some(n) => {
            let certified = if right {
                nu.covers_units(1, n + 1)
            } else {
                nu.covers_units(-n, 0)
            };
            if certified {
                Ok(n)
            } else {
                Err(exhausted())
            }
        }
        None => Err(exhausted()),
    }
}

/// The induced nonsingular map `T = T_{tau(nu)}`; the result has
/// `nu[0, 1) = 1`.
pub fn t_map(e: &ExtendedState) -> Result<ExtendedState> {
    t_k(e, tau(e.nu())?)
}

/// Inverse of the induced map: `T^{-1} = T_{-tau_-(nu)}`.
pub fn t_map_inverse(e: &ExtendedState) -> Result<ExtendedState> {
    t_k(e, -tau_minus(e.nu())?)
}

/// n-th return position: `tau_n = tau_{n-1} + tau(t_{tau_{n-1}}^* nu)`.
/// The first `n` occupied unit intervals to the right of 0 are exactly
/// `tau_1 < ... < tau_n`.
pub fn tau_n(nu: &GridMeasure, n: u32) -> Result<i128> {
    assert!(n >= 1, "tau_n needs n >= 1");
    let mut current = nu.clone();
    let mut acc: i128 = 0;
    for _ in 0..n {
        let step = tau(&current)?;
        acc += step;
        current = translate_measure(&current, step)?;
    }
    Ok(acc)
}

/// Convenience for acting by `S_{a_for_k}` without computing the word
/// twice in tests.
pub fn s_a_for_k(state: &ChainState, k: i128) -> Result<(ChainState, GroupWord)> {
    let a = a_for_k(state.p(), state.digits(), k)?;
    Ok((group_translate(state, &a)?, a))
}

/// Acts on a chain state by the word matched to `k` and checks the
/// conjugacy `theta(S_a s) = T_k(theta(s))` exactly on the common
/// window; returns both sides.
pub fn conjugacy_pair(
    state: &ChainState,
    k: i128,
) -> Result<(ExtendedState, ExtendedState)> {
    let e = crate::extension::theta(state)?;
    let (translated_state, _) = s_a_for_k(state, k)?;
    Ok((crate::extension::theta(&translated_state)?, t_k(&e, k)?))
}

/// Builds a random chain state of the given depth with uniform
/// resolution, for tests and the verification suite.
pub fn random_state<R: rand::Rng + ?Sized>(
    system: &Arc<crate::chain::ChainSystem>,
    depth: usize,
    resolution: u32,
    rng: &mut R,
) -> Result<ChainState> {
    ChainState::initial(system, resolution)?.extend_past(depth.saturating_sub(1), rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::ChainSystem;
    use crate::exec::trajectory_rng;
    use crate::extension::theta;
    use crate::measure::GridMeasure;
    use crate::ratio::{ratio, ratio_int};

    fn cantor_state(digits: &[u8], res: u32) -> ChainState {
        ChainState::from_digits(&ChainSystem::cantor(), digits, res).unwrap()
    }

    #[test]
    fn group_word_algebra() {
        let a = GroupWord::from_digits(3, &[1, 2]).unwrap();
        let b = GroupWord::from_digits(3, &[2, 2]).unwrap();
        assert_eq!(a.add(&b), GroupWord::from_digits(3, &[0, 1]).unwrap());
        assert!(a.add(&a.neg()).is_identity());
        assert_eq!(GroupWord::from_digits(3, &[0, 0]).unwrap(), GroupWord::identity(3));
        assert_eq!(a.start(), -1);
        // order divides p
        let triple = a.add(&a).add(&a);
        assert!(triple.is_identity());
    }

    #[test]
    fn s_k_examples() {
        // s_0 is the identity
        assert_eq!(s_k(3, &[2, 0], 0).unwrap(), vec![2, 0]);
        // p=3, i_0 = 0 (I_{-1} = [0,3)), k = 1: last digit becomes 1
        assert_eq!(s_k(3, &[2, 0], 1).unwrap(), vec![2, 1]);
        // out of every stored interval
        assert!(matches!(s_k(3, &[2, 0], 100), Err(Error::DepthExhausted(_))));
    }

    #[test]
    fn s_k_group_law_on_random_deep_states() {
        let sys = ChainSystem::cantor();
        let mut rng = trajectory_rng(3, 5);
        for _ in 0..10 {
            let s = random_state(&sys, 10, 2, &mut rng).unwrap();
            let digits = s.digits();
            for (k, l) in [(1i128, 2i128), (-3, 5), (7, -2), (4, 4)] {
                let two = match s_k(3, digits, k).and_then(|d| s_k(3, &d, l)) {
                    Ok(d) => d,
                    Err(Error::DepthExhausted(_)) => continue,
                    Err(e) => panic!("{e}"),
                };
                let one = s_k(3, digits, k + l).unwrap();
                assert_eq!(two, one, "digits {digits:?}, k={k}, l={l}");
            }
        }
    }

    #[test]
    fn a_for_k_examples() {
        // k = 0 <-> a = 0
        let a = a_for_k(3, &[2, 0], 0).unwrap();
        assert!(a.is_identity());
        assert_eq!(k_for_a(3, &[2, 0], &a).unwrap(), 0);
        // p=3, i_0=0, k=1: the word is the single digit 1 at position 0
        let a = a_for_k(3, &[2, 0], 1).unwrap();
        assert_eq!(a, GroupWord::from_digits(3, &[1]).unwrap());
        assert_eq!(k_for_a(3, &[2, 0], &a).unwrap(), 1);
    }

    #[test]
    fn a_k_round_trips_on_random_states() {
        let sys = ChainSystem::cantor();
        let mut rng = trajectory_rng(9, 2);
        for _ in 0..20 {
            let s = random_state(&sys, 10, 2, &mut rng).unwrap();
            for k in [-81i128, -17, -1, 1, 5, 81] {
                match a_for_k(3, s.digits(), k) {
                    Ok(a) => {
                        assert_eq!(k_for_a(3, s.digits(), &a).unwrap(), k);
                        assert_eq!(a.is_identity(), k == 0);
                    }
                    Err(Error::DepthExhausted(_)) => continue,
                    Err(e) => panic!("{e}"),
                }
            }
        }
    }

    #[test]
    fn group_translate_identity_and_composition() {
        let sys = ChainSystem::cantor();
        let mut rng = trajectory_rng(15, 3);
        let s = random_state(&sys, 8, 9, &mut rng).unwrap();
        let id = GroupWord::identity(3);
        let same = group_translate(&s, &id).unwrap();
        assert_eq!(same.digits(), s.digits());

        // S_a S_b = S_{a+b}, exactly, on words of span <= 4
        for (da, db) in [(&[1u8][..], &[2u8][..]), (&[1, 0, 2][..], &[0, 2, 1][..])] {
            let a = GroupWord::from_digits(3, da).unwrap();
            let b = GroupWord::from_digits(3, db).unwrap();
            let lhs = group_translate(&group_translate(&s, &b).unwrap(), &a).unwrap();
            let rhs = group_translate(&s, &a.add(&b)).unwrap();
            assert_eq!(lhs.digits(), rhs.digits());
            for n in lhs.min_measure_index()..=0 {
                assert!(lhs
                    .measure(n)
                    .unwrap()
                    .eq_on_common_window(rhs.measure(n).unwrap())
                    .unwrap());
            }
        }
    }

    #[test]
    fn cantor_digit_flip_recovers_the_base_measure() {
        // flipping i_0 from 0 to 2 lands back on mu_C
        let s = cantor_state(&[2, 0], 5);
        let a = GroupWord::from_digits(3, &[2]).unwrap();
        let t = group_translate(&s, &a).unwrap();
        assert_eq!(t.digits(), &[2, 2]);
        assert!(t
            .measure(0)
            .unwrap()
            .eq_on_common_window(&ChainSystem::cantor().base_measure(4).unwrap())
            .unwrap());
    }

    #[test]
    fn group_translate_through_zero_weight_digits() {
        // translating into the middle third zeroes the replayed levels
        let s = cantor_state(&[2, 0], 5);
        let a = GroupWord::from_digits(3, &[1]).unwrap();
        let t = group_translate(&s, &a).unwrap();
        assert!(t.measure(0).unwrap().is_zero());
        t.check_legal().unwrap();
    }

    #[test]
    fn t_k_examples() {
        let s = cantor_state(&[2, 0], 6);
        let e = theta(&s).unwrap();
        // T_0 is the identity
        let same = t_k(&e, 0).unwrap();
        assert_eq!(&same, &e);
        // the worked example has tau = 2 and T_2 moves [2,3) onto [0,1)
        assert_eq!(tau(e.nu()).unwrap(), 2);
        let moved = t_k(&e, 2).unwrap();
        assert_eq!(moved.nu().mass_unit(0).unwrap(), ratio_int(1));
    }

    #[test]
    fn uniform_measure_is_fixed_by_every_translation() {
        let sys = ChainSystem::bernoulli(2, vec![ratio(1, 2), ratio(1, 2)]).unwrap();
        let mut rng = trajectory_rng(12, 8);
        let s = random_state(&sys, 7, 8, &mut rng).unwrap();
        let e = theta(&s).unwrap();
        for k in [-3i128, -1, 1, 2, 5] {
            let moved = match t_k(&e, k) {
                Ok(m) => m,
                Err(Error::DepthExhausted(_)) | Err(Error::WindowExhausted(_)) => continue,
                Err(e) => panic!("{e}"),
            };
            // the measure component agrees with the original on the
            // common window
            assert!(moved.nu().eq_on_common_window(e.nu()).unwrap());
        }
    }

    #[test]
    fn conjugacy_matches_on_common_window() {
        let sys = ChainSystem::cantor();
        let mut rng = trajectory_rng(77, 4);
        for _ in 0..10 {
            let s = random_state(&sys, 9, 10, &mut rng).unwrap();
            for k in [-9i128, -2, 1, 3, 9] {
                match conjugacy_pair(&s, k) {
                    // full structural equality: same digits, window,
                    // resolution and masses
                    Ok((lhs, rhs)) => assert_eq!(lhs, rhs),
                    Err(Error::DepthExhausted(_)) | Err(Error::WindowExhausted(_)) => continue,
                    Err(e) => panic!("{e}"),
                }
            }
        }
    }

    #[test]
    fn tau_examples() {
        // Lebesgue-like nu: tau = 1
        let sys = ChainSystem::bernoulli(2, vec![ratio(1, 2), ratio(1, 2)]).unwrap();
        let s = ChainState::from_digits(&sys, &[0, 1], 4).unwrap();
        let e = theta(&s).unwrap();
        assert_eq!(tau(e.nu()).unwrap(), 1);

        // worked Cantor state: mass on [0,1) and [2,3), so tau = 2
        let s = cantor_state(&[2, 0], 5);
        let e = theta(&s).unwrap();
        assert_eq!(tau(e.nu()).unwrap(), 2);

        // mirrored state: tau_minus of digits (0,2) mirrors tau of (2,0).
        // i_0 = 2 puts I_{-1} = [-2, 1) and the gap on [-2,-1).
        let s_mirror = cantor_state(&[0, 2], 5);
        let e_mirror = theta(&s_mirror).unwrap();
        assert_eq!(tau_minus(e_mirror.nu()).unwrap(), 2);
    }

    #[test]
    fn tau_window_exhaustion_is_reported() {
        let m = GridMeasure::from_cell_masses(3, 0, (0, 3), [(0, ratio_int(1))]).unwrap();
        assert!(matches!(tau(&m), Err(Error::WindowExhausted(_))));
    }

    #[test]
    fn t_map_round_trip_and_tau_n() {
        let sys = ChainSystem::cantor();
        let mut rng = trajectory_rng(19, 6);
        for _ in 0..10 {
            let s = random_state(&sys, 9, 10, &mut rng).unwrap();
            let e = theta(&s).unwrap();
            let forward = match t_map(&e) {
                Ok(f) => f,
                Err(Error::WindowExhausted(_)) => continue,
                Err(err) => panic!("{err}"),
            };
            assert_eq!(forward.nu().mass_unit(0).unwrap(), ratio_int(1));
            let back = match t_map_inverse(&forward) {
                Ok(b) => b,
                Err(Error::WindowExhausted(_)) => continue,
                Err(err) => panic!("{err}"),
            };
            assert_eq!(&back, &e);
        }

        // tau_n enumerates the occupied intervals right of zero
        let s = cantor_state(&[2, 0, 2, 0, 2, 0], 8);
        let e = theta(&s).unwrap();
        let occupied: Vec<i128> = e
            .nu()
            .occupied_units()
            .into_iter()
            .filter(|&k| k >= 1)
            .collect();
        let n_max = occupied.len().min(6) as u32;
        for n in 1..=n_max {
            assert_eq!(tau_n(e.nu(), n).unwrap(), occupied[(n - 1) as usize]);
        }
        assert_eq!(tau_n(e.nu(), 1).unwrap(), tau(e.nu()).unwrap());
    }

    #[test]
    fn lebesgue_tau_n_is_n() {
        let sys = ChainSystem::bernoulli(2, vec![ratio(1, 2), ratio(1, 2)]).unwrap();
        let mut rng = trajectory_rng(4, 4);
        let s = random_state(&sys, 8, 9, &mut rng).unwrap();
        let e = theta(&s).unwrap();
        let (_, hi) = e.nu().window_cells();
        let room = hi / 2i128.pow(e.nu().resolution());
        for n in 1..=(room - 1).min(6) as u32 {
            assert_eq!(tau_n(e.nu(), n).unwrap(), n as i128);
        }
    }
}
