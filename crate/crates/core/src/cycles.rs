//! The set `D` of possible discontinuities of invariant CDFs of `S_p` and its
//! decomposition into periodic orbits.
//!
//! `D` is the union over `m` of `{ i/(p^m - 1) : 0 <= i <= p^m - 2 }`, which is
//! exactly the set of rationals in `[0, 1)` whose reduced denominator is
//! coprime to `p`. Each point lies on a unique periodic orbit of `S_p`; the
//! orbit of exact period `m` through `l/(p^m - 1)` is the cycle set of level
//! `m`. Its canonical label is the least orbit element of
//! `l -> l*p mod (p^m - 1)`, i.e. the base-`p` word of `l` (most significant
//! digit first) is a Lyndon word.

use num_bigint::BigUint;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::Serialize;

use crate::dynamics::{BranchMap, PadicMap};
use crate::error::{Error, Result};
use crate::exact::{big_pow, mul_order, Budget, Rat01};

/// One periodic orbit of `S_p` inside `D`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CycleSet {
    p: u32,
    level: u64,
    #[serde(serialize_with = "label_text")]
    label: BigUint,
    points: Vec<Rat01>,
}

fn label_text<S: serde::Serializer>(l: &BigUint, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&l.to_string())
}

impl CycleSet {
    /// Builds the cycle set with canonical label `label` at exact level `level`.
    ///
    /// Fails unless `label` is the least element of an orbit of exact
    /// period `level` and differs from `p^level - 1`.
    pub fn new(p: u32, level: u64, label: BigUint) -> Result<Self> {
        PadicMap::new(p)?;
        if level == 0 {
            return Err(Error::Key("level must be at least 1".into()));
        }
        let modulus = big_pow(p, level) - 1u32;
        if label >= modulus {
            return Err(Error::Key(format!("label {label} must be below {modulus}")));
        }
        let orbit = orbit(p, level, &label, &modulus);
        if orbit.len() as u64 != level {
            return Err(Error::Key(format!(
                "label {label} has period {} rather than {level}",
                orbit.len()
            )));
        }
        if orbit.iter().any(|o| o < &label) {
            return Err(Error::Key(format!("label {label} is not the least element of its orbit")));
        }
        Ok(CycleSet::from_orbit(p, level, label, &orbit, &modulus))
    }

    fn from_orbit(p: u32, level: u64, label: BigUint, orbit: &[BigUint], modulus: &BigUint) -> Self {
        let den = BigRational::from_integer(modulus.clone().into());
        let mut points: Vec<Rat01> = orbit
            .iter()
            .map(|o| {
                Rat01::from_ratio(BigRational::from_integer(o.clone().into()) / &den)
                    .expect("orbit element below modulus")
            })
            .collect();
        points.sort();
        CycleSet { p, level, label, points }
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    pub fn level(&self) -> u64 {
        self.level
    }

    pub fn label(&self) -> &BigUint {
        &self.label
    }

    /// Sorted orbit points.
    pub fn points(&self) -> &[Rat01] {
        &self.points
    }

    /// `p^level - 1`.
    pub fn modulus(&self) -> BigUint {
        big_pow(self.p, self.level) - 1u32
    }

    /// The point `label / (p^level - 1)`.
    pub fn representative(&self) -> Rat01 {
        let r = BigRational::new(self.label.clone().into(), self.modulus().into());
        Rat01::from_ratio(r).expect("label below modulus")
    }

    pub fn contains(&self, x: &Rat01) -> bool {
        self.points.binary_search(x).is_ok()
    }
}

/// Orbit of `label` under multiplication by `p` modulo `modulus`, in visiting
/// order, stopping at the first return (at most `level` steps).
fn orbit(p: u32, level: u64, label: &BigUint, modulus: &BigUint) -> Vec<BigUint> {
    let mut out = vec![label.clone()];
    let mut cur = label.clone();
    for _ in 1..level {
        cur = (cur * p) % modulus;
        if &cur == label {
            break;
        }
        out.push(cur.clone());
    }
    out
}

/// The level of `x` when `x` lies in `D`, `None` otherwise.
pub fn d_membership(p: u32, x: &Rat01) -> Option<u64> {
    if x.is_one() {
        return None;
    }
    let den = x.denom().to_biguint().expect("positive denominator");
    if !den.gcd(&BigUint::from(p)).is_one() {
        return None;
    }
    mul_order(p, &den).ok()
}

/// The cycle set containing `x`.
pub fn cycle_of(p: u32, x: &Rat01) -> Result<CycleSet> {
    PadicMap::new(p)?;
    let level = d_membership(p, x).ok_or_else(|| Error::Domain(format!("{x} is not in D for p = {p}")))?;
    let modulus = big_pow(p, level) - 1u32;
    let scaled = x.as_ratio() * BigRational::from_integer(modulus.clone().into());
    debug_assert!(scaled.is_integer());
    let start = scaled.to_integer().to_biguint().expect("non-negative");
    let orbit = orbit(p, level, &start, &modulus);
    let label = orbit.iter().min().expect("non-empty orbit").clone();
    Ok(CycleSet::from_orbit(p, level, label, &orbit, &modulus))
}

/// The unique `(y, k)` with `y` in `D` and `x = (y + k)/p`; here `y = S_p(x)`.
pub fn unique_preimage_in_d(p: u32, x: &Rat01) -> Result<(Rat01, u32)> {
    let map = PadicMap::new(p)?;
    if d_membership(p, x).is_none() {
        return Err(Error::Domain(format!("{x} is not in D for p = {p}")));
    }
    Ok((map.apply(x)?, map.branch_of(x)?))
}

/// The unique `(z, q)` with `z = (x + q)/p` in `D`; `z` precedes `x` on its cycle.
pub fn successor_in_d(p: u32, x: &Rat01) -> Result<(Rat01, u32)> {
    let map = PadicMap::new(p)?;
    if d_membership(p, x).is_none() {
        return Err(Error::Domain(format!("{x} is not in D for p = {p}")));
    }
    map.preimages(x)
        .into_iter()
        .zip(0u32..)
        .find(|(z, _)| d_membership(p, z).is_some())
        .ok_or_else(|| Error::Validation(format!("no preimage of {x} lies in D")))
}

/// Lyndon words of length exactly `len` over `0..alphabet`, in lexicographic
/// order (Duval's generation algorithm).
fn lyndon_words(alphabet: u32, len: usize) -> impl Iterator<Item = Vec<u32>> {
    let mut w: Vec<i64> = vec![-1];
    std::iter::from_fn(move || loop {
        let last = w.last_mut()?;
        *last += 1;
        let out = (w.len() == len).then(|| w.iter().map(|&d| d as u32).collect());
        let m = w.len();
        while w.len() < len {
            w.push(w[w.len() - m]);
        }
        while w.last() == Some(&(alphabet as i64 - 1)) {
            w.pop();
        }
        if out.is_some() {
            return out;
        }
    })
}

/// Every cycle set of exact level `m`, canonical labels ascending.
pub fn enumerate_levels(p: u32, m: u64, budget: &Budget) -> Result<Vec<CycleSet>> {
    PadicMap::new(p)?;
    if m == 0 {
        return Err(Error::Range("level must be at least 1".into()));
    }
    let words = budget.admit(&big_pow(p, m))?;
    let modulus = words - 1;
    let mut out = Vec::new();
    for word in lyndon_words(p, m as usize) {
        let label = word.iter().fold(0u64, |acc, &d| acc * p as u64 + d as u64);
        if label == modulus {
            continue; // the word (p-1) at level 1, i.e. x = 1
        }
        let mut orbit = Vec::with_capacity(m as usize);
        let mut cur = label;
        for _ in 0..m {
            orbit.push(BigUint::from(cur));
            cur = ((cur as u128 * p as u128) % modulus as u128) as u64;
        }
        out.push(CycleSet::from_orbit(p, m, label.into(), &orbit, &modulus.into()));
    }
    Ok(out)
}

fn mobius(mut n: u64) -> i32 {
    let mut sign = 1;
    let mut d = 2;
    while d * d <= n {
        if n % d == 0 {
            n /= d;
            if n % d == 0 {
                return 0;
            }
            sign = -sign;
        }
        d += 1;
    }
    if n > 1 {
        sign = -sign;
    }
    sign
}

/// Number of cycle sets of exact level `m`: the aperiodic necklace count
/// `(1/m) sum_{d | m} mu(d) p^{m/d}`, minus one at `m = 1`.
pub fn count_levels(p: u32, m: u64) -> Result<BigUint> {
    PadicMap::new(p)?;
    if m == 0 {
        return Err(Error::Range("level must be at least 1".into()));
    }
    let (mut plus, mut minus) = (BigUint::zero(), BigUint::zero());
    for d in (1..=m).filter(|d| m % d == 0) {
        match mobius(d) {
            1 => plus += big_pow(p, m / d),
            -1 => minus += big_pow(p, m / d),
            _ => {}
        }
    }
    let necklaces = (plus - minus) / m;
    Ok(if m == 1 { necklaces - 1u32 } else { necklaces })
}

/// Total number of points of `D` up to level `max_level`, as a sanity figure.
pub fn points_through_level(p: u32, max_level: u64) -> Result<BigUint> {
    (1..=max_level).try_fold(BigUint::zero(), |acc, m| Ok(acc + count_levels(p, m)? * m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::ToPrimitive;
    use std::collections::{BTreeMap, BTreeSet};

    fn q(n: i64, d: i64) -> Rat01 {
        Rat01::new(n, d).unwrap()
    }

    fn small(n: &BigUint) -> u64 {
        n.to_u64().unwrap_or(u64::MAX)
    }

    fn labels(sets: &[CycleSet]) -> Vec<u64> {
        sets.iter().map(|c| small(c.label())).collect()
    }

    /// Groups `0..p^m-1` into orbits of multiplication by p and keeps those of
    /// exact period m, keyed by their minimum.
    fn brute_orbits(p: u64, m: u32) -> BTreeMap<u64, BTreeSet<u64>> {
        let modulus = p.pow(m) - 1;
        let mut out = BTreeMap::new();
        for l in 0..modulus {
            let mut orbit = BTreeSet::new();
            let mut cur = l;
            loop {
                orbit.insert(cur);
                cur = cur * p % modulus;
                if cur == l {
                    break;
                }
            }
            if orbit.len() == m as usize {
                out.insert(*orbit.iter().next().unwrap(), orbit);
            }
        }
        out
    }

    #[test]
    fn membership_examples() {
        assert_eq!(d_membership(2, &q(1, 3)), Some(2));
        assert_eq!(d_membership(2, &q(1, 2)), None);
        assert_eq!(d_membership(3, &q(1, 2)), Some(1));
        assert_eq!(d_membership(2, &Rat01::zero()), Some(1));
        assert_eq!(d_membership(2, &Rat01::one()), None);
    }

    #[test]
    fn membership_matches_brute_force_search() {
        // every order of 2 modulo an odd b <= 40 is at most 36
        for den in 1..=40i64 {
            for num in 0..den {
                let x = q(num, den);
                let found = (1..=40u32).find(|&m| {
                    let modulus = (1i64 << m) - 1;
                    (x.as_ratio() * BigRational::from_integer(modulus.into())).is_integer()
                });
                assert_eq!(d_membership(2, &x).map(|m| m as u32), found, "x={x}");
            }
        }
    }

    #[test]
    fn cycle_of_examples() {
        let c = cycle_of(2, &q(1, 7)).unwrap();
        assert_eq!((c.level(), small(c.label())), (3, 1));
        assert_eq!(c.points(), &[q(1, 7), q(2, 7), q(4, 7)]);
        let c = cycle_of(2, &q(3, 7)).unwrap();
        assert_eq!((c.level(), small(c.label())), (3, 3));
        assert_eq!(c.points(), &[q(3, 7), q(5, 7), q(6, 7)]);
        let c = cycle_of(3, &q(1, 2)).unwrap();
        assert_eq!((c.level(), small(c.label())), (1, 1));
        assert_eq!(c.points(), &[q(1, 2)]);
        assert!(matches!(cycle_of(2, &q(1, 2)), Err(Error::Domain(_))));
    }

    #[test]
    fn preimage_in_d_examples() {
        assert_eq!(unique_preimage_in_d(2, &q(1, 3)).unwrap(), (q(2, 3), 0));
        assert_eq!(unique_preimage_in_d(2, &q(2, 3)).unwrap(), (q(1, 3), 1));
        assert!(matches!(unique_preimage_in_d(2, &q(1, 2)), Err(Error::Domain(_))));
        // brute force over k confirms uniqueness
        for x in [q(1, 3), q(2, 3), q(1, 7), q(5, 7)] {
            let hits: Vec<u32> = (0..2u32)
                .filter(|&k| {
                    let y = x.as_ratio() * BigRational::from_integer(2.into())
                        - BigRational::from_integer(k.into());
                    Rat01::from_ratio(y).ok().and_then(|y| d_membership(2, &y)).is_some()
                })
                .collect();
            assert_eq!(hits, vec![unique_preimage_in_d(2, &x).unwrap().1]);
        }
    }

    #[test]
    fn successor_stays_on_cycle() {
        for p in 2..=5u32 {
            for c in enumerate_levels(p, 3, &Budget::default()).unwrap() {
                for x in c.points() {
                    let (z, q) = successor_in_d(p, x).unwrap();
                    assert!(c.contains(&z));
                    assert!(q < p);
                    assert_eq!(&PadicMap::new(p).unwrap().apply(&z).unwrap(), x);
                }
            }
        }
    }

    #[test]
    fn enumeration_examples() {
        let b = Budget::default();
        let l1 = enumerate_levels(2, 1, &b).unwrap();
        assert_eq!(labels(&l1), vec![0]);
        assert_eq!(l1[0].points(), &[Rat01::zero()]);
        assert_eq!(labels(&enumerate_levels(2, 3, &b).unwrap()), vec![1, 3]);
        let l = enumerate_levels(3, 2, &b).unwrap();
        assert_eq!(labels(&l), vec![1, 2, 5]);
        assert_eq!(l[0].points(), &[q(1, 8), q(3, 8)]);
        assert_eq!(l[1].points(), &[q(1, 4), q(3, 4)]);
        assert_eq!(l[2].points(), &[q(5, 8), q(7, 8)]);
    }

    #[test]
    fn count_examples() {
        assert_eq!(count_levels(2, 2).unwrap(), BigUint::from(1u32));
        assert_eq!(count_levels(5, 3).unwrap(), BigUint::from(40u32));
        assert_eq!(count_levels(2, 6).unwrap(), BigUint::from(9u32));
        assert_eq!(brute_orbits(2, 6).len(), 9);
        // counts past 64 bits
        let big = count_levels(2, 67).unwrap();
        assert_eq!(big * 67u32, big_pow(2, 67) - 2u32);
    }

    #[test]
    fn enumeration_matches_brute_force_and_count() {
        for (p, max_m) in [(2u32, 10u32), (3, 7), (5, 5), (6, 4)] {
            for m in 1..=max_m {
                let sets = enumerate_levels(p, m as u64, &Budget::default()).unwrap();
                let mut brute = brute_orbits(p as u64, m);
                if m == 1 {
                    brute.remove(&(p as u64 - 1));
                }
                assert_eq!(labels(&sets), brute.keys().copied().collect::<Vec<_>>(), "p={p} m={m}");
                assert_eq!(BigUint::from(sets.len()), count_levels(p, m as u64).unwrap());
                for c in &sets {
                    assert_eq!(c, &CycleSet::new(p, m as u64, c.label().clone()).unwrap());
                }
            }
        }
    }

    #[test]
    fn levels_partition_d() {
        for (p, max_m) in [(2u32, 8u64), (3, 6)] {
            let mut seen = BTreeSet::new();
            for m in 1..=max_m {
                for c in enumerate_levels(p, m, &Budget::default()).unwrap() {
                    for x in c.points() {
                        assert!(seen.insert(x.clone()), "{x} in two sets");
                        assert_eq!(d_membership(p, x), Some(m));
                    }
                }
            }
            let mut expected = BTreeSet::new();
            for m in 1..=max_m as u32 {
                let modulus = (p as i64).pow(m) - 1;
                for i in 0..modulus {
                    expected.insert(q(i, modulus));
                }
            }
            assert_eq!(seen, expected);
            assert_eq!(BigUint::from(seen.len()), points_through_level(p, max_m).unwrap());
        }
    }

    #[test]
    fn labels_are_aperiodic_words_closed_under_rotation() {
        for p in [2u32, 3] {
            for m in 2..=6u64 {
                for c in enumerate_levels(p, m, &Budget::default()).unwrap() {
                    let mut digits = Vec::new();
                    let mut l = small(c.label());
                    for _ in 0..m {
                        digits.push(l % p as u64);
                        l /= p as u64;
                    }
                    for shift in 1..m as usize {
                        if m as usize % shift == 0 {
                            let rotated: Vec<_> =
                                digits.iter().cycle().skip(shift).take(m as usize).copied().collect();
                            assert_ne!(rotated, digits, "label {} periodic", c.label());
                        }
                    }
                    let modulus = small(&c.modulus());
                    let mut cur = small(c.label());
                    for _ in 0..m {
                        assert!(c.contains(&q(cur as i64, modulus as i64)));
                        cur = cur * p as u64 % modulus;
                    }
                }
            }
        }
    }

    #[test]
    fn cycle_set_rejects_bad_labels() {
        assert!(CycleSet::new(2, 3, 2u32.into()).is_err()); // 2 is in the orbit of 1
        assert!(CycleSet::new(2, 2, 0u32.into()).is_err()); // period 1
        assert!(CycleSet::new(2, 1, 1u32.into()).is_err()); // x = 1
        assert!(CycleSet::new(3, 2, 4u32.into()).is_err()); // 4/8 = 1/2 has period 1
        assert!(CycleSet::new(3, 1, 1u32.into()).is_ok());
    }

    #[test]
    fn enumeration_respects_budget() {
        let err = enumerate_levels(2, 30, &Budget::new(1 << 20)).unwrap_err();
        assert!(matches!(err, Error::Budget { .. }));
    }
}
