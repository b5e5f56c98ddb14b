//! Exact rational scalars and the few float conversions we allow.

use num_bigint::{BigInt, Sign};
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Exact nonnegative masses and exact scalars throughout the crate.
pub type Ratio = BigRational;

/// Shorthand for small literal rationals in code and tests.
pub fn ratio(num: i64, den: i64) -> Ratio {
    Ratio::new(BigInt::from(num), BigInt::from(den))
}

pub fn ratio_int(n: i64) -> Ratio {
    Ratio::from_integer(BigInt::from(n))
}

pub fn ratio_i128(n: i128) -> Ratio {
    Ratio::from_integer(BigInt::from(n))
}

/// Parses `"num/den"` or a bare integer, as used in system-spec files.
pub fn parse_ratio(s: &str) -> Result<Ratio> {
    let bad = || Error::InvalidSystem(format!("cannot parse rational {s:?}"));
    let s = s.trim();
    let (num, den) = match s.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (s, "1"),
    };
    let num: BigInt = num.parse().map_err(|_| bad())?;
    let den: BigInt = den.parse().map_err(|_| bad())?;
    if den.is_zero() {
        return Err(bad());
    }
    Ok(Ratio::new(num, den))
}

/// Formats as `"num/den"` (denominator kept even when 1, so the format
/// round-trips through `parse_ratio` unambiguously).
pub fn format_ratio(r: &Ratio) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

fn ln_bigint(b: &BigInt) -> f64 {
    debug_assert!(b.sign() == Sign::Plus);
    let bits = b.bits();
    if bits <= 63 {
        return b.to_f64().expect("fits f64").ln();
    }
    // Keep the top 64 bits; the discarded tail perturbs ln by < 2^-63.
    let shift = bits - 64;
    let top = (b >> shift).to_f64().expect("64-bit window fits f64");
    top.ln() + shift as f64 * std::f64::consts::LN_2
}

/// Natural log of a positive rational, evaluated on the exact value.
///
/// Works for magnitudes far outside the f64 range (e.g. word masses at
/// depth hundreds), with error bounded by a few ulp.
pub fn ln_ratio(r: &Ratio) -> f64 {
    assert!(r.is_positive(), "ln_ratio needs a positive rational");
    ln_bigint(r.numer()) - ln_bigint(r.denom())
}

/// f64 view of a rational; exact conversions stay exact.
pub fn ratio_to_f64(r: &Ratio) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}
