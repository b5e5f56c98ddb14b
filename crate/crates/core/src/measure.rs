//! Exact nonnegative measures on p-adic grids.
//!
//! A [`GridMeasure`] stores rational masses on the level-`r` cells
//! `[c p^-r, (c+1) p^-r)` that fall inside a finite window. It is a
//! truncation: masses inside the window are exact, nothing is claimed
//! outside it. Operations that would need mass beyond the window fail
//! with a window-exhausted error rather than returning zero, so "known
//! zero" and "unknown" stay distinguishable. The zero measure is the
//! empty mass map.
//!
//! The normalization map rescales a nonzero measure so that the first
//! symmetric window `[-(psi-1), psi)` carrying mass has mass one; on
//! measures with mass in `[0, 1)` this is the usual normalization to a
//! probability on the unit interval.
//!
//! Values are immutable after construction and all operations are pure,
//! so measures can be shared freely across threads.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::ratio::Ratio;

/// Checked `p^e` as a cell index quantity.
pub fn pow_i128(p: u32, e: u32) -> Result<i128> {
    (p as i128)
        .checked_pow(e)
        .ok_or_else(|| Error::IndexOverflow(format!("{p}^{e} exceeds i128")))
}

fn big_pow(p: u32, e: u32) -> BigInt {
    BigInt::from(p).pow(e)
}

/// `p^e` as an exact rational, for any sign of `e`.
pub fn pow_ratio(p: u32, e: i32) -> Ratio {
    if e >= 0 {
        Ratio::from_integer(big_pow(p, e as u32))
    } else {
        Ratio::new(BigInt::one(), big_pow(p, (-e) as u32))
    }
}

/// The half-open interval `[c p^-k, (c+1) p^-k)` on the base-p grid.
///
/// Negative levels give intervals of integer length `p^|k|`. A digit
/// word `(i_1, ..., i_n)` corresponds to the level-n interval with
/// index `sum i_j p^(n-j)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PAdicInterval {
    p: u32,
    level: i32,
    index: i128,
}

impl PAdicInterval {
    pub fn new(p: u32, level: i32, index: i128) -> Self {
        assert!(p >= 2, "base must be at least 2");
        Self { p, level, index }
    }

    /// The unit interval `[k, k+1)`.
    pub fn unit(p: u32, k: i128) -> Self {
        Self::new(p, 0, k)
    }

    /// The level-1 cell `[j/p, (j+1)/p)` of the unit interval.
    pub fn digit_cell(p: u32, j: u8) -> Result<Self> {
        check_digit(p, j)?;
        Ok(Self::new(p, 1, j as i128))
    }

    /// Level-n interval addressed by a digit word in `{0, ..., p-1}^n`.
    pub fn from_word(p: u32, word: &[u8]) -> Result<Self> {
        assert!(p >= 2);
        let mut index: i128 = 0;
        for &d in word {
            check_digit(p, d)?;
            index = index
                .checked_mul(p as i128)
                .and_then(|x| x.checked_add(d as i128))
                .ok_or_else(|| Error::IndexOverflow(format!("word of length {}", word.len())))?;
        }
        Ok(Self::new(p, word.len() as i32, index))
    }

    /// The j-th of the p equal subintervals.
    pub fn child(&self, j: u8) -> Result<Self> {
        check_digit(self.p, j)?;
        let index = self
            .index
            .checked_mul(self.p as i128)
            .and_then(|x| x.checked_add(j as i128))
            .ok_or_else(|| Error::IndexOverflow("interval child".into()))?;
        Ok(Self::new(self.p, self.level + 1, index))
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    pub fn level(&self) -> i32 {
        self.level
    }

    pub fn index(&self) -> i128 {
        self.index
    }

    pub fn lower(&self) -> Ratio {
        Ratio::from_integer(BigInt::from(self.index)) * pow_ratio(self.p, -self.level)
    }

    pub fn upper(&self) -> Ratio {
        Ratio::from_integer(BigInt::from(self.index) + 1) * pow_ratio(self.p, -self.level)
    }

    pub fn length(&self) -> Ratio {
        pow_ratio(self.p, -self.level)
    }
}

fn check_digit(p: u32, d: u8) -> Result<()> {
    if (d as u32) < p {
        Ok(())
    } else {
        Err(Error::InvalidDigit { digit: d as u32, p })
    }
}

/// Orientation-preserving homothety `x -> p^e x + b` with `p`-power scale.
///
/// Restricting scales to powers of p keeps every map grid-compatible
/// after at most a resolution shift: a level-r cell maps onto a level
/// `(r - e)` cell whenever `b` is a multiple of `p^-(r-e)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Homothety {
    p: u32,
    exp: i32,
    offset: Ratio,
}

impl Homothety {
    pub fn new(p: u32, exp: i32, offset: Ratio) -> Self {
        assert!(p >= 2);
        Self { p, exp, offset }
    }

    pub fn identity(p: u32) -> Self {
        Self::new(p, 0, Ratio::zero())
    }

    /// The zoom `x -> p x - i` taking the digit cell `[i/p, (i+1)/p)`
    /// onto `[0, 1)`.
    pub fn digit_zoom(p: u32, i: u8) -> Result<Self> {
        check_digit(p, i)?;
        Ok(Self::new(p, 1, -Ratio::from_integer(BigInt::from(i))))
    }

    /// The translation `y -> y - x`.
    pub fn translation(p: u32, x: Ratio) -> Self {
        Self::new(p, 0, -x)
    }

    pub fn translation_int(p: u32, k: i128) -> Self {
        Self::translation(p, Ratio::from_integer(BigInt::from(k)))
    }

    /// The unique homothety in this family taking `[from_lo, from_lo + p^from_exp)`
    /// onto `[to_lo, to_lo + p^to_exp)`.
    pub fn interval_map(p: u32, from_lo: &Ratio, from_exp: i32, to_lo: &Ratio, to_exp: i32) -> Self {
        let exp = to_exp - from_exp;
        let offset = to_lo - from_lo * pow_ratio(p, exp);
        Self::new(p, exp, offset)
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    pub fn scale_exp(&self) -> i32 {
        self.exp
    }

    pub fn offset(&self) -> &Ratio {
        &self.offset
    }

    pub fn apply(&self, x: &Ratio) -> Ratio {
        x * pow_ratio(self.p, self.exp) + self.offset.clone()
    }

    /// `self` after `inner`: `(self * inner)(x) = self(inner(x))`.
    pub fn compose(&self, inner: &Self) -> Self {
        assert_eq!(self.p, inner.p, "mixed bases");
        Self::new(self.p, self.exp + inner.exp, self.apply(&inner.offset))
    }

    pub fn inverse(&self) -> Self {
        let inv = pow_ratio(self.p, -self.exp);
        Self::new(self.p, -self.exp, -self.offset.clone() * inv)
    }

    pub fn is_identity(&self) -> bool {
        self.exp == 0 && self.offset.is_zero()
    }
}

/// A nonnegative measure stored exactly on level-`resolution` grid cells
/// inside a window.
///
/// The window is the cell range `[cell_lo, cell_hi)`; its endpoints are
/// p-adic rationals (integers for freshly constructed measures, shifted
/// by p-adic amounts after translation). Only strictly positive masses
/// are stored, so the zero measure is the empty map and structural
/// equality of equal-resolution measures is plain `==`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridMeasure {
    p: u32,
    resolution: u32,
    cell_lo: i128,
    cell_hi: i128,
    masses: BTreeMap<i128, Ratio>,
}

impl GridMeasure {
    /// The zero measure on the integer window `[window_lo, window_hi)`.
    pub fn new_zero(p: u32, resolution: u32, window_lo: i128, window_hi: i128) -> Result<Self> {
        assert!(p >= 2);
        assert!(window_lo < window_hi, "empty window");
        let scale = pow_i128(p, resolution)?;
        let cell_lo = window_lo
            .checked_mul(scale)
            .ok_or_else(|| Error::IndexOverflow("window lower bound".into()))?;
        let cell_hi = window_hi
            .checked_mul(scale)
            .ok_or_else(|| Error::IndexOverflow("window upper bound".into()))?;
        Ok(Self { p, resolution, cell_lo, cell_hi, masses: BTreeMap::new() })
    }

    /// Builds a measure from explicit cell masses on an integer window.
    ///
    /// Rejects negative masses and cells outside the window; zero masses
    /// are dropped.
    pub fn from_cell_masses(
        p: u32,
        resolution: u32,
        window: (i128, i128),
        cells: impl IntoIterator<Item = (i128, Ratio)>,
    ) -> Result<Self> {
        let mut m = Self::new_zero(p, resolution, window.0, window.1)?;
        for (c, mass) in cells {
            if mass.is_negative() {
                return Err(Error::ConsistencyViolation(format!(
                    "negative mass on cell {c}"
                )));
            }
            if mass.is_zero() {
                continue;
            }
            if c < m.cell_lo || c >= m.cell_hi {
                return Err(Error::Alignment(format!("cell {c} outside window")));
            }
            let slot = m.masses.entry(c).or_insert_with(Ratio::zero);
            *slot += mass;
        }
        Ok(m)
    }

    /// Lebesgue measure restricted to `[k, k+1)`: every cell gets `p^-r`.
    pub fn uniform_on_unit(p: u32, resolution: u32, k: i128) -> Result<Self> {
        let scale = pow_i128(p, resolution)?;
        let w = pow_ratio(p, -(resolution as i32));
        let cells = (k * scale..(k + 1) * scale).map(|c| (c, w.clone()));
        Self::from_cell_masses(p, resolution, (k, k + 1), cells)
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    pub fn resolution(&self) -> u32 {
        self.resolution
    }

    fn cell_scale(&self) -> i128 {
        // resolution was validated at construction
        (self.p as i128).pow(self.resolution)
    }

    /// Window as a cell-index range at this measure's resolution.
    pub fn window_cells(&self) -> (i128, i128) {
        (self.cell_lo, self.cell_hi)
    }

    pub fn window_lo(&self) -> Ratio {
        Ratio::from_integer(BigInt::from(self.cell_lo)) * pow_ratio(self.p, -(self.resolution as i32))
    }

    pub fn window_hi(&self) -> Ratio {
        Ratio::from_integer(BigInt::from(self.cell_hi)) * pow_ratio(self.p, -(self.resolution as i32))
    }

    pub fn is_zero(&self) -> bool {
        self.masses.is_empty()
    }

    pub fn total_mass(&self) -> Ratio {
        self.masses.values().fold(Ratio::zero(), |a, b| a + b)
    }

    pub fn cell_mass(&self, c: i128) -> Ratio {
        self.masses.get(&c).cloned().unwrap_or_else(Ratio::zero)
    }

    /// Iterates `(cell index, mass)` in increasing cell order.
    pub fn cells(&self) -> impl Iterator<Item = (i128, &Ratio)> {
        self.masses.iter().map(|(c, m)| (*c, m))
    }

    pub fn cell_count(&self) -> usize {
        self.masses.len()
    }

    fn mass_cells(&self, lo: i128, hi: i128) -> Ratio {
        if lo >= hi {
            return Ratio::zero();
        }
        self.masses
            .range(lo..hi)
            .fold(Ratio::zero(), |acc, (_, m)| acc + m)
    }

    fn interval_cells(&self, interval: &PAdicInterval) -> Result<(i128, i128)> {
        assert_eq!(self.p, interval.p, "mixed bases");
        let shift = self.resolution as i64 - interval.level as i64;
        if shift < 0 {
            return Err(Error::Alignment(format!(
                "interval level {} finer than resolution {}; refine the measure first",
                interval.level, self.resolution
            )));
        }
        let w = pow_i128(self.p, shift as u32)?;
        let lo = interval
            .index
            .checked_mul(w)
            .ok_or_else(|| Error::IndexOverflow("interval lower cell".into()))?;
        let hi = lo
            .checked_add(w)
            .ok_or_else(|| Error::IndexOverflow("interval upper cell".into()))?;
        Ok((lo, hi))
    }

    /// Exact mass of a grid-aligned interval. Cells outside the window
    /// contribute zero.
    pub fn mass(&self, interval: &PAdicInterval) -> Result<Ratio> {
        let (lo, hi) = self.interval_cells(interval)?;
        Ok(self.mass_cells(lo, hi))
    }

    /// Mass of the integer range `[lo, hi)`.
    pub fn mass_units(&self, lo: i128, hi: i128) -> Result<Ratio> {
        let scale = self.cell_scale();
        let clo = lo.checked_mul(scale).ok_or_else(|| Error::IndexOverflow("unit range".into()))?;
        let chi = hi.checked_mul(scale).ok_or_else(|| Error::IndexOverflow("unit range".into()))?;
        Ok(self.mass_cells(clo, chi))
    }

    /// Mass of the unit interval `[k, k+1)`.
    pub fn mass_unit(&self, k: i128) -> Result<Ratio> {
        self.mass_units(k, k + 1)
    }

    /// Whether the window certifies masses on all of `[lo, hi)`.
    pub fn covers_units(&self, lo: i128, hi: i128) -> bool {
        let scale = self.cell_scale();
        match (lo.checked_mul(scale), hi.checked_mul(scale)) {
            (Some(clo), Some(chi)) => clo >= self.cell_lo && chi <= self.cell_hi,
            _ => false,
        }
    }

    /// Unit intervals `[k, k+1)` carrying positive mass, in increasing order.
    pub fn occupied_units(&self) -> Vec<i128> {
        let scale = self.cell_scale();
        let mut out: Vec<i128> = Vec::new();
        for c in self.masses.keys() {
            let k = c.div_euclid(scale);
            if out.last() != Some(&k) {
                out.push(k);
            }
        }
        out
    }

    /// Restriction `1_A dm` to a grid-aligned interval; the window
    /// shrinks to the intersection with `A`.
    pub fn restrict(&self, interval: &PAdicInterval) -> Result<Self> {
        let (lo, hi) = self.interval_cells(interval)?;
        Ok(self.restrict_cells(lo, hi))
    }

    /// Restriction to the integer range `[lo, hi)`.
    pub fn restrict_units(&self, lo: i128, hi: i128) -> Result<Self> {
        let scale = self.cell_scale();
        let clo = lo.checked_mul(scale).ok_or_else(|| Error::IndexOverflow("unit range".into()))?;
        let chi = hi.checked_mul(scale).ok_or_else(|| Error::IndexOverflow("unit range".into()))?;
        Ok(self.restrict_cells(clo, chi))
    }

    fn restrict_cells(&self, lo: i128, hi: i128) -> Self {
        let cell_lo = self.cell_lo.max(lo);
        let cell_hi = self.cell_hi.min(hi).max(cell_lo);
        let masses = self
            .masses
            .range(cell_lo..cell_hi)
            .map(|(c, m)| (*c, m.clone()))
            .collect();
        Self { p: self.p, resolution: self.resolution, cell_lo, cell_hi, masses }
    }

    /// Pushforward along a grid-compatible homothety. Total mass is
    /// preserved; the resolution changes by the scale exponent.
    pub fn push(&self, h: &Homothety) -> Result<Self> {
        assert_eq!(self.p, h.p, "mixed bases");
        let new_res = self.resolution as i64 - h.exp as i64;
        if new_res < 0 {
            return Err(Error::ResolutionExhausted(format!(
                "push by scale p^{} from resolution {}",
                h.exp, self.resolution
            )));
        }
        let shift_ratio = &h.offset * pow_ratio(self.p, new_res as i32);
        if !shift_ratio.is_integer() {
            return Err(Error::Alignment(format!(
                "offset {} is not a multiple of p^-{new_res}",
                h.offset
            )));
        }
        let t = shift_ratio
            .to_integer()
            .to_i128()
            .ok_or_else(|| Error::IndexOverflow("push shift".into()))?;
        let move_cell = |c: i128| -> Result<i128> {
            c.checked_add(t).ok_or_else(|| Error::IndexOverflow("push cell".into()))
        };
        let mut masses = BTreeMap::new();
        for (c, m) in &self.masses {
            masses.insert(move_cell(*c)?, m.clone());
        }
        Ok(Self {
            p: self.p,
            resolution: new_res as u32,
            cell_lo: move_cell(self.cell_lo)?,
            cell_hi: move_cell(self.cell_hi)?,
            masses,
        })
    }

    /// Smallest `n >= 1` with positive mass on `[-(n-1), n)`.
    ///
    /// Errors with `UndefinedPsi` on the zero measure, and with
    /// `WindowExhausted` when the window cannot certify the minimality
    /// of the first region found to carry mass.
    pub fn psi(&self) -> Result<u32> {
        if self.is_zero() {
            return Err(Error::UndefinedPsi);
        }
        let scale = self.cell_scale();
        let mut n: u32 = 1;
        loop {
            let lo = -(n as i128 - 1) * scale;
            let hi = n as i128 * scale;
            if self.mass_cells(lo, hi).is_positive() {
                if n == 1 {
                    return Ok(1);
                }
                let (plo, phi) = (-(n as i128 - 2) * scale, (n as i128 - 1) * scale);
                if plo >= self.cell_lo && phi <= self.cell_hi {
                    return Ok(n);
                }
                return Err(Error::WindowExhausted(format!(
                    "mass found on [-{}, {}) but [-{}, {}) is not fully inside the window",
                    n - 1,
                    n,
                    n - 2,
                    n - 1
                )));
            }
            if lo < self.cell_lo || hi > self.cell_hi {
                return Err(Error::WindowExhausted(format!(
                    "no mass on [-{}, {}) and the region leaves the window",
                    n - 1,
                    n
                )));
            }
            n += 1;
        }
    }

    /// Normalizing map: zero stays zero, otherwise the measure is scaled
    /// so that `[-(psi-1), psi)` has mass one. Idempotent and invariant
    /// under positive scaling.
    pub fn normalize(&self) -> Result<Self> {
        if self.is_zero() {
            return Ok(self.clone());
        }
        let n = self.psi()?;
        let scale = self.cell_scale();
        let c = self.mass_cells(-(n as i128 - 1) * scale, n as i128 * scale);
        debug_assert!(c.is_positive());
        Ok(self.scale(&c.recip()))
    }

    /// Multiplies every mass by a nonnegative constant.
    pub fn scale(&self, factor: &Ratio) -> Self {
        assert!(!factor.is_negative(), "negative scaling factor");
        let masses = if factor.is_zero() {
            BTreeMap::new()
        } else {
            self.masses.iter().map(|(c, m)| (*c, m * factor)).collect()
        };
        Self { masses, ..self.clone() }
    }

    /// One zoom step: the restriction to `[0, 1)` of `N(rho_i m)`. The
    /// result is zero or a probability measure on `[0, 1)` one
    /// resolution level coarser.
    pub fn zoom(&self, digit: u8) -> Result<Self> {
        check_digit(self.p, digit)?;
        if self.resolution == 0 {
            return Err(Error::ResolutionExhausted("zoom at resolution 0".into()));
        }
        let pushed = self.push(&Homothety::digit_zoom(self.p, digit)?)?;
        let on_unit = pushed.mass_units(0, 1)?;
        if on_unit.is_zero() {
            // The restriction to [0, 1) of the normalized pushforward is
            // zero regardless of the normalizing constant.
            return GridMeasure::new_zero(self.p, self.resolution - 1, 0, 1);
        }
        pushed.normalize()?.restrict(&PAdicInterval::unit(self.p, 0))
    }

    /// Exact coarsening to a lower resolution by summing sibling cells.
    pub fn coarsen(&self, new_resolution: u32) -> Result<Self> {
        if new_resolution > self.resolution {
            return Err(Error::Alignment("cannot refine a grid measure".into()));
        }
        if new_resolution == self.resolution {
            return Ok(self.clone());
        }
        let factor = pow_i128(self.p, self.resolution - new_resolution)?;
        if self.cell_lo.rem_euclid(factor) != 0 || self.cell_hi.rem_euclid(factor) != 0 {
            return Err(Error::Alignment(format!(
                "window not aligned to resolution {new_resolution}"
            )));
        }
        let mut masses: BTreeMap<i128, Ratio> = BTreeMap::new();
        for (c, m) in &self.masses {
            let slot = masses.entry(c.div_euclid(factor)).or_insert_with(Ratio::zero);
            *slot += m;
        }
        Ok(Self {
            p: self.p,
            resolution: new_resolution,
            cell_lo: self.cell_lo.div_euclid(factor),
            cell_hi: self.cell_hi.div_euclid(factor),
            masses,
        })
    }

    fn aligned_pair(&self, other: &Self) -> Result<(Self, Self)> {
        assert_eq!(self.p, other.p, "mixed bases");
        let r = self.resolution.min(other.resolution);
        Ok((self.coarsen(r)?, other.coarsen(r)?))
    }

    /// Exact equality on the intersection of the windows, compared at
    /// the shared (coarser) resolution.
    pub fn eq_on_common_window(&self, other: &Self) -> Result<bool> {
        let (a, b) = self.aligned_pair(other)?;
        let lo = a.cell_lo.max(b.cell_lo);
        let hi = a.cell_hi.min(b.cell_hi);
        for (c, m) in a.masses.range(lo..hi) {
            if b.cell_mass(*c) != *m {
                return Ok(false);
            }
        }
        for (c, m) in b.masses.range(lo..hi) {
            if a.cell_mass(*c) != *m {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Total variation over cells of the common window, at the shared
    /// resolution.
    ///
    /// This is only a proxy for weak-topology closeness: it upper-bounds
    /// the discrepancy against test functions supported on the common
    /// window and constant on cells, and says nothing beyond the window.
    pub fn tv_proxy(&self, other: &Self) -> Result<Ratio> {
        let (a, b) = self.aligned_pair(other)?;
        let lo = a.cell_lo.max(b.cell_lo);
        let hi = a.cell_hi.min(b.cell_hi);
        let mut total = Ratio::zero();
        for (c, m) in a.masses.range(lo..hi) {
            total += (m - b.cell_mass(*c)).abs();
        }
        for (c, m) in b.masses.range(lo..hi) {
            if !a.masses.contains_key(c) {
                total += m.abs();
            }
        }
        Ok(total)
    }
}


#[cfg(test)]
mod tests {
    use super::testutil::cantor;
    use super::*;
    use crate::ratio::{ratio, ratio_int};
    use proptest::prelude::*;

    fn lebesgue(p: u32, resolution: u32) -> GridMeasure {
        GridMeasure::uniform_on_unit(p, resolution, 0).unwrap()
    }

    #[test]
    fn interval_of_word_examples() {
        // p=3, (0) -> [0, 1/3)
        let i = PAdicInterval::from_word(3, &[0]).unwrap();
        assert_eq!((i.level(), i.index()), (1, 0));
        assert_eq!(i.lower(), ratio(0, 1));
        assert_eq!(i.upper(), ratio(1, 3));
        // p=3, (1,2) -> [5/9, 6/9)
        let i = PAdicInterval::from_word(3, &[1, 2]).unwrap();
        assert_eq!(i.lower(), ratio(5, 9));
        assert_eq!(i.upper(), ratio(6, 9));
        // p=2, (1,1,1) -> [7/8, 1)
        let i = PAdicInterval::from_word(2, &[1, 1, 1]).unwrap();
        assert_eq!(i.lower(), ratio(7, 8));
        assert_eq!(i.upper(), ratio(1, 1));
        // digit out of range
        assert!(matches!(
            PAdicInterval::from_word(3, &[3]),
            Err(Error::InvalidDigit { digit: 3, p: 3 })
        ));
    }

    #[test]
    fn cantor_masses() {
        let m = cantor(2);
        // mu_C[0, 1/3) = 1/2, middle third empty
        assert_eq!(m.mass(&PAdicInterval::digit_cell(3, 0).unwrap()).unwrap(), ratio(1, 2));
        assert_eq!(m.mass(&PAdicInterval::digit_cell(3, 1).unwrap()).unwrap(), ratio(0, 1));
        // word masses 2^-n over the support
        for w in [[0u8, 0], [0, 2], [2, 0], [2, 2]] {
            let i = PAdicInterval::from_word(3, &w).unwrap();
            assert_eq!(m.mass(&i).unwrap(), ratio(1, 4));
        }
        // interval disjoint from the window
        assert_eq!(m.mass(&PAdicInterval::unit(3, 7)).unwrap(), ratio(0, 1));
    }

    #[test]
    fn mass_rejects_finer_intervals() {
        let m = cantor(2);
        let fine = PAdicInterval::from_word(3, &[0, 0, 0]).unwrap();
        assert!(matches!(m.mass(&fine), Err(Error::Alignment(_))));
    }

    #[test]
    fn restrict_examples() {
        let m = cantor(2);
        // full support: identity
        assert_eq!(m.restrict(&PAdicInterval::unit(3, 0)).unwrap(), m);
        // zero-mass middle third
        let mid = m.restrict(&PAdicInterval::digit_cell(3, 1).unwrap()).unwrap();
        assert!(mid.is_zero());
        // Lebesgue at r=1, p=2: restriction to [0, 1/2) is the single cell
        let l = lebesgue(2, 1);
        let half = l.restrict(&PAdicInterval::digit_cell(2, 0).unwrap()).unwrap();
        assert_eq!(half.cell_count(), 1);
        assert_eq!(half.total_mass(), ratio(1, 2));
    }

    #[test]
    fn push_examples() {
        let m = cantor(2);
        // Oracle for push(mu_C, rho_0): map each level-2 support cell
        // [i1 i2] through rho_0(x) = 3x; cells with i1 = 0 land in [0,1).
        let pushed = m.push(&Homothety::digit_zoom(3, 0).unwrap()).unwrap();
        let inside = pushed.restrict(&PAdicInterval::unit(3, 0)).unwrap();
        assert_eq!(inside.total_mass(), ratio(1, 2));
        assert_eq!(pushed.total_mass(), ratio(1, 1)); // mass conserved

        // identity
        assert_eq!(m.push(&Homothety::identity(3)).unwrap(), m);

        // unit mass on [2,3) translated down to [0,1)
        let u = GridMeasure::uniform_on_unit(3, 1, 2).unwrap();
        let t = u.push(&Homothety::translation_int(3, 2)).unwrap();
        assert_eq!(t.mass_unit(0).unwrap(), ratio(1, 1));
        assert_eq!(t.window_cells(), (0, 3));
    }

    #[test]
    fn push_rejects_misaligned_offsets() {
        let m = cantor(2);
        let h = Homothety::translation(3, ratio(1, 27));
        assert!(matches!(m.push(&h), Err(Error::Alignment(_))));
    }

    #[test]
    fn psi_examples() {
        assert_eq!(cantor(2).psi().unwrap(), 1);

        // unit mass on [1,2): [0,1) empty, [-1,2) hits it
        let m = GridMeasure::from_cell_masses(3, 0, (-3, 6), [(1, ratio_int(1))]).unwrap();
        assert_eq!(m.psi().unwrap(), 2);

        // unit mass on [-3,-2): first n with -(n-1) <= -3 is 4
        let m = GridMeasure::from_cell_masses(3, 0, (-9, 18), [(-3, ratio_int(1))]).unwrap();
        assert_eq!(m.psi().unwrap(), 4);

        // zero measure
        let z = GridMeasure::new_zero(3, 0, 0, 1).unwrap();
        assert!(matches!(z.psi(), Err(Error::UndefinedPsi)));

        // mass beyond what the window can certify
        let m = GridMeasure::from_cell_masses(3, 0, (3, 12), [(5, ratio_int(1))]).unwrap();
        assert!(matches!(m.psi(), Err(Error::WindowExhausted(_))));
    }

    #[test]
    fn normalize_examples() {
        // N(0) = 0
        let z = GridMeasure::new_zero(3, 1, 0, 1).unwrap();
        assert_eq!(z.normalize().unwrap(), z);
        // already normalized
        let m = cantor(3);
        assert_eq!(m.normalize().unwrap(), m);
        // 3 x Lebesgue on [1,2): psi = 2, normalizing mass 3
        let l = GridMeasure::uniform_on_unit(3, 2, 1).unwrap();
        let scaled = l.scale(&ratio_int(3));
        // widen the window so psi can certify
        let wide = GridMeasure::from_cell_masses(
            3,
            2,
            (-3, 6),
            scaled.cells().map(|(c, m)| (c, m.clone())),
        )
        .unwrap();
        let n = wide.normalize().unwrap();
        assert_eq!(n.mass_unit(1).unwrap(), ratio(1, 1));
        assert_eq!(n.cell_mass(9 + 3), ratio(1, 9));
    }

    #[test]
    fn zoom_examples() {
        let m = cantor(3);
        // mu_C^0 = mu_C and mu_C^2 = mu_C at the stored resolution
        for d in [0u8, 2] {
            let z = m.zoom(d).unwrap();
            assert_eq!(z, cantor(2));
        }
        // the middle third forces the zero measure; oracle is the mass query
        assert_eq!(m.mass(&PAdicInterval::digit_cell(3, 1).unwrap()).unwrap(), ratio(0, 1));
        assert!(m.zoom(1).unwrap().is_zero());
        // Lebesgue is self-similar for every digit
        let l = lebesgue(3, 3);
        for d in 0..3u8 {
            assert_eq!(l.zoom(d).unwrap(), lebesgue(3, 2));
        }
        // resolution floor
        let flat = lebesgue(3, 0);
        assert!(matches!(flat.zoom(0), Err(Error::ResolutionExhausted(_))));
    }

    #[test]
    fn homothety_composition_takes_intervals_through() {
        // rho_J^K rho_I^J = rho_I^K on concrete intervals
        let lo = |x: i64| ratio_int(x);
        let a = Homothety::interval_map(3, &lo(0), 2, &lo(-6), 1); // I -> J
        let b = Homothety::interval_map(3, &lo(-6), 1, &lo(5), 3); // J -> K
        let c = Homothety::interval_map(3, &lo(0), 2, &lo(5), 3); // I -> K
        assert_eq!(b.compose(&a), c);
        assert!(a.inverse().compose(&a).is_identity());
    }

    #[test]
    fn coarsen_sums_siblings() {
        let m = cantor(3);
        assert_eq!(m.coarsen(1).unwrap(), cantor(1));
        assert_eq!(m.coarsen(3).unwrap(), m);
    }

    #[test]
    fn tv_proxy_zero_iff_equal_on_common_window() {
        let a = cantor(2);
        let b = cantor(3);
        assert!(a.eq_on_common_window(&b).unwrap());
        assert!(a.tv_proxy(&b).unwrap().is_zero());
        let l = lebesgue(3, 2);
        assert!(!a.eq_on_common_window(&l).unwrap());
        assert!(a.tv_proxy(&l).unwrap().is_positive());
    }

    // A small strategy for measures: random positive masses on a few
    // cells of [-p, p) at resolution <= 3.
    fn arb_measure(p: u32) -> impl Strategy<Value = GridMeasure> {
        let res = 0u32..=3;
        res.prop_flat_map(move |r| {
            let ncells = (p as i128).pow(r) * 2 * p as i128;
            proptest::collection::vec((0..ncells, 1u32..60, 1u32..60), 0..6).prop_map(
                move |entries| {
                    let lo = -(p as i128) * (p as i128).pow(r);
                    let cells = entries
                        .into_iter()
                        .map(|(off, n, d)| (lo + off, ratio(n as i64, d as i64)));
                    GridMeasure::from_cell_masses(p, r, (-(p as i128), p as i128), cells).unwrap()
                },
            )
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn normalize_is_idempotent(m in arb_measure(3)) {
            if let Ok(n) = m.normalize() {
                prop_assert_eq!(n.normalize().unwrap(), n);
            }
        }

        #[test]
        fn normalize_ignores_positive_scaling(m in arb_measure(3), num in 1u32..40, den in 1u32..40) {
            let s = m.scale(&ratio(num as i64, den as i64));
            match (m.normalize(), s.normalize()) {
                (Ok(a), Ok(b)) => prop_assert_eq!(a, b),
                (Err(e1), Err(e2)) => prop_assert_eq!(e1, e2),
                (a, b) => prop_assert!(false, "divergent outcomes {:?} vs {:?}", a, b),
            }
        }

        #[test]
        fn normalize_commutes_with_push(m in arb_measure(3), k in -4i128..=4) {
            // N(rho(N m)) = N(rho m) for grid-compatible rho
            let h = Homothety::translation_int(3, k);
            let lhs = m.normalize().and_then(|n| n.push(&h)).and_then(|x| x.normalize());
            let rhs = m.push(&h).unwrap().normalize();
            match (lhs, rhs) {
                (Ok(a), Ok(b)) => prop_assert_eq!(a, b),
                (Err(_), Err(_)) => {}
                (a, b) => prop_assert!(false, "divergent outcomes {:?} vs {:?}", a, b),
            }
        }

        #[test]
        fn push_composes(m in arb_measure(3), k in -3i128..=3, e in 0i32..=1) {
            let h1 = Homothety::translation_int(3, k);
            let h2 = Homothety::new(3, e, ratio_int(0));
            if let (Ok(two_step), Ok(one_step)) =
                (m.push(&h1).and_then(|x| x.push(&h2)), m.push(&h2.compose(&h1)))
            {
                prop_assert_eq!(two_step, one_step);
            }
        }

        #[test]
        fn push_preserves_total_mass(m in arb_measure(3), k in -4i128..=4) {
            let pushed = m.push(&Homothety::translation_int(3, k)).unwrap();
            prop_assert_eq!(pushed.total_mass(), m.total_mass());
        }

        #[test]
        fn restrict_never_increases_cell_mass(m in arb_measure(3), k in -3i128..=3) {
            let r = m.restrict(&PAdicInterval::unit(3, k)).unwrap();
            for (c, mass) in r.cells() {
                prop_assert!(mass <= &m.cell_mass(c));
            }
        }

        #[test]
        fn word_nesting(word in proptest::collection::vec(0u8..3, 0..6), j in 0u8..3) {
            // interval_of_word(w ++ (j)) is the j-th subinterval of interval_of_word(w)
            let parent = PAdicInterval::from_word(3, &word).unwrap();
            let mut extended = word.clone();
            extended.push(j);
            let direct = PAdicInterval::from_word(3, &extended).unwrap();
            prop_assert_eq!(parent.child(j).unwrap(), direct);
        }

        #[test]
        fn zoom_yields_probability_or_zero(m in arb_measure(3), d in 0u8..3) {
            let unit = m.restrict(&PAdicInterval::unit(3, 0)).unwrap();
            let normalized = match unit.normalize() {
                Ok(n) => n,
                Err(Error::UndefinedPsi) => unit,
                Err(e) => return Err(TestCaseError::fail(format!("{e}"))),
            };
            if normalized.resolution() == 0 { return Ok(()); }
            let z = normalized.zoom(d).unwrap();
            let total = z.total_mass();
            prop_assert!(total.is_zero() || total == ratio(1, 1));
            prop_assert_eq!(z.window_cells().0, 0);
        }
    }
}
