//! Exact rational and modular arithmetic.
//!
//! Every point, mass and function value in the crate is an arbitrary-precision
//! rational. Points of the unit interval use the [`Rat01`] newtype; signed
//! intermediates (residuals, affine intercepts, sums) are plain
//! [`BigRational`]s. The canonical text form of any rational is `num/den`.

use std::fmt;
use std::str::FromStr;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Default cap on the number of summands of a pointwise transfer-operator sum.
pub const DEFAULT_TERM_BUDGET: u64 = 1 << 26;

/// Environment variable overriding [`DEFAULT_TERM_BUDGET`].
pub const BUDGET_ENV: &str = "PICM_BUDGET";

/// An exact rational number in the closed unit interval, always reduced.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Rat01(BigRational);

/// Builds `num/den` in lowest terms, rejecting anything outside `[0, 1]`.
pub fn reduce(num: impl Into<BigInt>, den: impl Into<BigInt>) -> Result<Rat01> {
    let (num, den) = (num.into(), den.into());
    if !den.is_positive() {
        return Err(Error::Range(format!("denominator {den} must be positive")));
    }
    if num.is_negative() || num > den {
        return Err(Error::Range(format!("{num}/{den} is not in [0, 1]")));
    }
    Ok(Rat01(BigRational::new(num, den)))
}

impl Rat01 {
    pub fn new(num: impl Into<BigInt>, den: impl Into<BigInt>) -> Result<Self> {
        reduce(num, den)
    }

    pub fn zero() -> Self {
        Rat01(BigRational::zero())
    }

    pub fn one() -> Self {
        Rat01(BigRational::one())
    }

    pub fn from_ratio(r: BigRational) -> Result<Self> {
        if r.is_negative() || r > BigRational::one() {
            return Err(Error::Range(format!("{} is not in [0, 1]", fmt_ratio(&r))));
        }
        Ok(Rat01(r))
    }

    pub fn numer(&self) -> &BigInt {
        self.0.numer()
    }

    pub fn denom(&self) -> &BigInt {
        self.0.denom()
    }

    pub fn as_ratio(&self) -> &BigRational {
        &self.0
    }

    pub fn into_ratio(self) -> BigRational {
        self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn is_one(&self) -> bool {
        self.0.is_one()
    }

    pub fn to_f64(&self) -> f64 {
        ratio_to_f64(&self.0)
    }
}

impl fmt::Display for Rat01 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&fmt_ratio(&self.0))
    }
}

impl FromStr for Rat01 {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Rat01::from_ratio(parse_ratio(s)?)
    }
}

impl Serialize for Rat01 {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Rat01 {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// `num/den` with the denominator always present (`0/1`, `1/1`, `-1/2`).
pub fn fmt_ratio(r: &BigRational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

/// Parses `a/b`, a bare integer `a`, or a finite decimal such as `0.25`.
pub fn parse_ratio(s: &str) -> Result<BigRational> {
    let s = s.trim();
    let bad = || Error::Parse(format!("`{s}` is not a rational number"));
    if let Some((n, d)) = s.split_once('/') {
        let n: BigInt = n.trim().parse().map_err(|_| bad())?;
        let d: BigInt = d.trim().parse().map_err(|_| bad())?;
        if d.is_zero() {
            return Err(bad());
        }
        return Ok(BigRational::new(n, d));
    }
    if let Some((int, frac)) = s.split_once('.') {
        let negative = int.starts_with('-');
        let int: BigInt = if int.is_empty() || int == "-" {
            BigInt::zero()
        } else {
            int.parse().map_err(|_| bad())?
        };
        if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let scale = num_traits::pow(BigInt::from(10u32), frac.len());
        let frac: BigInt = frac.parse().map_err(|_| bad())?;
        let mut r = BigRational::from_integer(int.abs()) + BigRational::new(frac, scale);
        if negative {
            r = -r;
        }
        return Ok(r);
    }
    let n: BigInt = s.parse().map_err(|_| bad())?;
    Ok(BigRational::from_integer(n))
}

/// Nearest `f64`; exact for rationals with small numerator and denominator.
pub fn ratio_to_f64(r: &BigRational) -> f64 {
    if let (Some(n), Some(d)) = (r.numer().to_f64(), r.denom().to_f64()) {
        if n.is_finite() && d.is_finite() && d != 0.0 {
            return n / d;
        }
    }
    // Shift both parts down so they fit in f64 without losing the ratio.
    let bits = r.numer().bits().max(r.denom().bits()).saturating_sub(1000);
    let n = (r.numer() >> bits).to_f64().unwrap_or(0.0);
    let d = (r.denom() >> bits).to_f64().unwrap_or(f64::INFINITY);
    n / d
}

/// Serde adapter storing a [`BigRational`] as its `num/den` string.
pub mod ratio_text {
    use super::*;

    pub fn serialize<S: Serializer>(r: &BigRational, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&fmt_ratio(r))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<BigRational, D::Error> {
        let s = String::deserialize(d)?;
        parse_ratio(&s).map_err(serde::de::Error::custom)
    }
}

/// `x mod 1` for a non-negative rational.
pub fn frac(x: &BigRational) -> BigRational {
    x - x.floor()
}

/// `floor(x)` as an integer.
pub fn floor_int(x: &BigRational) -> BigInt {
    x.floor().to_integer()
}

pub fn ceil_int(x: &BigRational) -> BigInt {
    x.ceil().to_integer()
}

/// `base^exp mod modulus`.
pub fn mod_pow(base: &BigUint, exp: &BigUint, modulus: &BigUint) -> BigUint {
    assert!(!modulus.is_zero(), "modulus must be at least 1");
    base.modpow(exp, modulus)
}

/// The least `m >= 1` with `p^m = 1 (mod b)`.
///
/// Returns 1 for `b = 1`. Fails when `p` is not invertible modulo `b`.
pub fn mul_order(p: u32, b: &BigUint) -> Result<u64> {
    if b.is_zero() {
        return Err(Error::Domain("modulus must be at least 1".into()));
    }
    let p = BigUint::from(p);
    if !p.gcd(b).is_one() {
        return Err(Error::Domain(format!("gcd({p}, {b}) != 1, no multiplicative order")));
    }
    if b.is_one() {
        return Ok(1);
    }
    let base = &p % b;
    let mut acc = base.clone();
    let mut m = 1u64;
    while !acc.is_one() {
        acc = (acc * &base) % b;
        m += 1;
    }
    Ok(m)
}

/// `p^m` as an arbitrary-precision integer.
pub fn big_pow(p: u32, m: u64) -> BigUint {
    num_traits::pow(BigUint::from(p), m as usize)
}

/// Cap on pointwise summation work.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Budget {
    pub max_terms: u64,
}

impl Default for Budget {
    fn default() -> Self {
        Budget { max_terms: DEFAULT_TERM_BUDGET }
    }
}

impl Budget {
    pub fn new(max_terms: u64) -> Self {
        Budget { max_terms }
    }

    /// The default budget, overridden by `PICM_BUDGET` when it parses.
    pub fn from_env() -> Self {
        std::env::var(BUDGET_ENV)
            .ok()
            .and_then(|v| v.trim().parse::<u64>().ok())
            .filter(|&v| v > 0)
            .map(Budget::new)
            .unwrap_or_default()
    }

    /// Checks that `terms` summands fit, returning the count as `u64`.
    pub fn admit(&self, terms: &BigUint) -> Result<u64> {
        match terms.to_u64() {
            Some(t) if t <= self.max_terms => Ok(t),
            _ => Err(Error::Budget { required: terms.to_string(), budget: self.max_terms }),
        }
    }
}

/// Draws `count` rationals `a/b` with `1 <= b <= max_den` and `0 <= a <= b`.
pub fn sample_rationals<R: Rng>(rng: &mut R, count: usize, max_den: u64) -> Vec<Rat01> {
    (0..count)
        .map(|_| {
            let den = rng.gen_range(1..=max_den.max(1));
            let num = rng.gen_range(0..=den);
            Rat01(BigRational::new(num.into(), den.into()))
        })
        .collect()
}

/// Like [`sample_rationals`] but excludes 1.
pub fn sample_half_open<R: Rng>(rng: &mut R, count: usize, max_den: u64) -> Vec<Rat01> {
    (0..count)
        .map(|_| {
            let den = rng.gen_range(1..=max_den.max(1));
            let num = rng.gen_range(0..den);
            Rat01(BigRational::new(num.into(), den.into()))
        })
        .collect()
}

/// Uniform grid `i/n`, `i = 0..=n`.
pub fn uniform_grid(n: u64) -> Vec<Rat01> {
    let n = n.max(1);
    (0..=n).map(|i| Rat01(BigRational::new(i.into(), n.into()))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn r(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn reduce_examples() {
        assert_eq!(reduce(2, 6).unwrap().to_string(), "1/3");
        assert_eq!(reduce(0, 5).unwrap().to_string(), "0/1");
        assert_eq!(reduce(7, 7).unwrap().to_string(), "1/1");
    }

    #[test]
    fn reduce_rejects_out_of_range() {
        assert!(matches!(reduce(3, 2), Err(Error::Range(_))));
        assert!(matches!(reduce(-1, 2), Err(Error::Range(_))));
        assert!(matches!(reduce(1, 0), Err(Error::Range(_))));
        assert!(matches!(reduce(1, -2), Err(Error::Range(_))));
    }

    #[test]
    fn mul_order_examples() {
        assert_eq!(mul_order(2, &BigUint::from(7u32)).unwrap(), 3);
        assert_eq!(mul_order(3, &BigUint::from(8u32)).unwrap(), 2);
        assert_eq!(mul_order(5, &BigUint::from(1u32)).unwrap(), 1);
        assert!(matches!(mul_order(2, &BigUint::from(6u32)), Err(Error::Domain(_))));
    }

    #[test]
    fn mod_pow_examples() {
        let b = |v: u64| BigUint::from(v);
        assert_eq!(mod_pow(&b(2), &b(10), &b(1000)), b(24));
        assert_eq!(mod_pow(&b(3), &b(0), &b(7)), b(1));
        assert_eq!(mod_pow(&b(2), &b(5), &b(31)), b(1));
        assert_eq!(mod_pow(&b(9), &b(4), &b(1)), b(0));
    }

    fn totient(n: u64) -> u64 {
        (1..=n).filter(|k| k.gcd(&n) == 1).count() as u64
    }

    fn brute_order(p: u64, b: u64) -> u64 {
        let mut acc = p % b;
        let mut m = 1;
        while acc != 1 % b {
            acc = acc * p % b;
            m += 1;
        }
        m
    }

    #[test]
    fn mul_order_divides_totient() {
        for p in [2u32, 3, 5, 10] {
            for b in (1..=10_000u64).step_by(37) {
                if (p as u64).gcd(&b) != 1 {
                    continue;
                }
                let m = mul_order(p, &BigUint::from(b)).unwrap();
                assert_eq!(m, brute_order(p as u64, b), "p={p} b={b}");
                assert_eq!(totient(b) % m, 0, "p={p} b={b}");
            }
        }
    }

    #[test]
    fn text_form_round_trips() {
        for s in ["0/1", "1/1", "3/7", "-1/2", "5/1"] {
            assert_eq!(fmt_ratio(&parse_ratio(s).unwrap()), s);
        }
        assert_eq!(parse_ratio("0.25").unwrap(), r(1, 4));
        assert_eq!(parse_ratio("-1.5").unwrap(), r(-3, 2));
        assert_eq!(parse_ratio("4").unwrap(), r(4, 1));
        assert_eq!(parse_ratio("2/4").unwrap(), r(1, 2));
        assert!(parse_ratio("1/0").is_err());
        assert!(parse_ratio("x").is_err());
        assert!(parse_ratio("1.").is_err());
    }

    #[test]
    fn budget_admits_and_refuses() {
        let b = Budget::new(100);
        assert_eq!(b.admit(&BigUint::from(100u32)).unwrap(), 100);
        let err = b.admit(&BigUint::from(101u32)).unwrap_err();
        assert!(err.to_string().contains("101"));
    }

    #[test]
    fn large_ratio_to_f64() {
        let big = BigInt::from(3u32) * num_traits::pow(BigInt::from(2u32), 2000);
        let den = num_traits::pow(BigInt::from(2u32), 2002);
        assert!((ratio_to_f64(&BigRational::new(big, den)) - 0.75).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn reduce_preserves_value(a in 0u64..1_000_000, extra in 0u64..1_000_000) {
            let b = a + extra + 1;
            let x = reduce(a, b).unwrap();
            // cross-multiplication compares the fractions exactly
            prop_assert_eq!(x.numer() * BigInt::from(b), x.denom() * BigInt::from(a));
            prop_assert!(x.numer().gcd(x.denom()).is_one());
        }
    }
}
