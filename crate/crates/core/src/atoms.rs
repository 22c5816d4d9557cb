//! Jump solutions of the invariance equation and atomic invariant measures.
//!
//! Every invariant jump CDF of `S_p` with finitely many atoms is a convex
//! combination `sum alpha^m_l phi^m_l`, where `phi^m_l` puts mass `1/m` on each
//! point of the cycle set of level `m` and label `l`.

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::cdf::{measure_from_cdf, AtomicMeasure, Cdf};
use crate::cycles::{cycle_of, d_membership, CycleSet};
use crate::dynamics::{BranchMap, PadicMap};
use crate::error::{Error, Result};
use crate::exact::{fmt_ratio, ratio_text, Rat01};

pub const COEFFS_SCHEMA: &str = "picm.coeffs/1";

/// Weights `alpha^m_l` keyed by `(level, canonical label)`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct JumpCoefficients {
    entries: BTreeMap<(u64, BigUint), BigRational>,
}

impl JumpCoefficients {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `weight` to the entry for `(level, label)`; zero weights are dropped.
    pub fn add(&mut self, level: u64, label: impl Into<BigUint>, weight: BigRational) {
        if weight.is_zero() {
            return;
        }
        let e = self.entries.entry((level, label.into())).or_insert_with(BigRational::zero);
        *e += weight;
    }

    pub fn with(mut self, level: u64, label: impl Into<BigUint>, weight: BigRational) -> Self {
        self.add(level, label, weight);
        self
    }

    pub fn get(&self, level: u64, label: impl Into<BigUint>) -> Option<&BigRational> {
        self.entries.get(&(level, label.into()))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&(u64, BigUint), &BigRational)> {
        self.entries.iter()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn total(&self) -> BigRational {
        self.entries.values().sum()
    }

    /// The cycle sets behind the keys, rejecting non-canonical keys.
    pub fn cycles(&self, p: u32) -> Result<Vec<(CycleSet, &BigRational)>> {
        self.entries
            .iter()
            .map(|((m, l), a)| {
                if a.is_negative() {
                    return Err(Error::Validation(format!("weight for ({m}, {l}) is negative")));
                }
                Ok((CycleSet::new(p, *m, l.clone())?, a))
            })
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&CoeffsDoc::from(self)).expect("coefficients serialize")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: CoeffsDoc = serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
        if doc.schema != COEFFS_SCHEMA {
            return Err(Error::Parse(format!("unsupported coefficients schema `{}`", doc.schema)));
        }
        let mut out = JumpCoefficients::new();
        for e in doc.entries {
            let label: BigUint =
                e.label.parse().map_err(|_| Error::Parse(format!("bad label `{}`", e.label)))?;
            if out.entries.contains_key(&(e.level, label.clone())) {
                return Err(Error::Parse(format!("duplicate entry ({}, {label})", e.level)));
            }
            out.entries.insert((e.level, label), e.weight);
        }
        Ok(out)
    }
}

#[derive(Serialize, Deserialize)]
pub(crate) struct CoeffEntry {
    pub level: u64,
    pub label: String,
    #[serde(with = "ratio_text")]
    pub weight: BigRational,
}

#[derive(Serialize, Deserialize)]
struct CoeffsDoc {
    schema: String,
    entries: Vec<CoeffEntry>,
}

impl From<&JumpCoefficients> for CoeffsDoc {
    fn from(c: &JumpCoefficients) -> Self {
        CoeffsDoc { schema: COEFFS_SCHEMA.into(), entries: c.entries_out() }
    }
}

impl JumpCoefficients {
    pub(crate) fn entries_out(&self) -> Vec<CoeffEntry> {
        self.entries
            .iter()
            .map(|((m, l), a)| CoeffEntry { level: *m, label: l.to_string(), weight: a.clone() })
            .collect()
    }
}

impl Serialize for JumpCoefficients {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.entries_out().serialize(s)
    }
}

/// `phi^1_l`, the indicator of `(l/(p-1), 1]`.
pub fn jump_level1(p: u32, l: u32) -> Result<Cdf> {
    PadicMap::new(p)?;
    if l > p - 2 {
        return Err(Error::Index(format!("level-1 label {l} must be at most {}", p - 2)));
    }
    Cdf::jump(AtomicMeasure::dirac(Rat01::new(l, p - 1)?)?)
}

/// `phi^m_l`: mass `1/m` at each point of the cycle set.
pub fn jump_from_cycle(c: &CycleSet) -> Result<Cdf> {
    let fresh = CycleSet::new(c.p(), c.level(), c.label().clone())
        .map_err(|e| Error::Validation(format!("malformed cycle set: {e}")))?;
    if &fresh != c {
        return Err(Error::Validation("cycle set points do not match its label".into()));
    }
    let mass = BigRational::new(1.into(), c.level().into());
    Cdf::jump_from_atoms(c.points().iter().map(|y| (y.clone(), mass.clone())))
}

/// The atomic measure `sum alpha^m_l mu^m_l`, with no normalization requirement.
pub fn synthesize_measure(p: u32, coeffs: &JumpCoefficients) -> Result<AtomicMeasure> {
    let mut atoms = Vec::new();
    for (c, a) in coeffs.cycles(p)? {
        let mass = a / BigRational::from_integer(c.level().into());
        atoms.extend(c.points().iter().map(|y| (y.clone(), mass.clone())));
    }
    AtomicMeasure::new(atoms)
}

/// The jump CDF `sum alpha^m_l phi^m_l`; the weights must sum to 1.
pub fn synthesize_jump(p: u32, coeffs: &JumpCoefficients) -> Result<Cdf> {
    let total = coeffs.total();
    if !total.is_one() {
        return Err(Error::Normalization(format!("coefficients sum to {}, not 1", fmt_ratio(&total))));
    }
    Cdf::jump(synthesize_measure(p, coeffs)?)
}

/// Greedy decomposition of a jump CDF into cycle solutions.
pub fn decompose_jump(p: u32, cdf: &Cdf) -> Result<JumpCoefficients> {
    decompose_measure(p, &measure_from_cdf(cdf)?, &BigRational::zero())
}

/// Decomposes an atomic measure whose total mass is within `tail` of 1.
///
/// Atoms are visited by descending mass, then ascending location.
pub fn decompose_measure(p: u32, mu: &AtomicMeasure, tail: &BigRational) -> Result<JumpCoefficients> {
    PadicMap::new(p)?;
    let mut remaining: BTreeMap<Rat01, BigRational> =
        mu.atoms().iter().map(|a| (a.location.clone(), a.mass.clone())).collect();
    let mut order: Vec<_> = mu.atoms().iter().collect();
    order.sort_by(|a, b| b.mass.cmp(&a.mass).then_with(|| a.location.cmp(&b.location)));

    let mut out = JumpCoefficients::new();
    for atom in order {
        let Some(mass) = remaining.get(&atom.location).cloned() else {
            continue;
        };
        if d_membership(p, &atom.location).is_none() {
            return Err(Error::NotInvariant(format!(
                "atom at {} lies outside D for p = {p}",
                atom.location
            )));
        }
        let cycle = cycle_of(p, &atom.location)?;
        for y in cycle.points() {
            match remaining.remove(y) {
                Some(m) if m == mass => {}
                Some(m) => {
                    return Err(Error::NotInvariant(format!(
                        "cycle point {y} carries mass {}, expected {}",
                        fmt_ratio(&m),
                        fmt_ratio(&mass)
                    )))
                }
                None => {
                    return Err(Error::NotInvariant(format!(
                        "cycle point {y} carries no mass, expected {}",
                        fmt_ratio(&mass)
                    )))
                }
            }
        }
        out.add(cycle.level(), cycle.label().clone(), mass * BigRational::from_integer(cycle.level().into()));
    }
    let residual = BigRational::one() - out.total();
    if residual.abs() > *tail {
        return Err(Error::Validation(format!(
            "residual mass {} exceeds the tail tolerance {}",
            fmt_ratio(&residual),
            fmt_ratio(tail)
        )));
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct IntervalResidual {
    pub lo: Rat01,
    pub hi: Rat01,
    #[serde(with = "ratio_text")]
    pub mass: BigRational,
    #[serde(with = "ratio_text")]
    pub preimage_mass: BigRational,
    /// `mu(S^{-1}[lo, hi)) - mu([lo, hi))`.
    #[serde(with = "ratio_text")]
    pub residual: BigRational,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct InvarianceReport {
    pub intervals: Vec<IntervalResidual>,
    pub pass: bool,
}

/// Compares `mu(S_p^{-1}[x, y))` with `mu([x, y))` on each half-open interval.
pub fn check_invariance_measure(
    p: u32,
    mu: &AtomicMeasure,
    intervals: &[(Rat01, Rat01)],
) -> Result<InvarianceReport> {
    let map = PadicMap::new(p)?;
    let mut out = Vec::with_capacity(intervals.len());
    for (lo, hi) in intervals {
        if lo > hi {
            return Err(Error::Validation(format!("interval [{lo}, {hi}) is reversed")));
        }
        let mass = mu.mass_in(lo, hi);
        let lows = map.preimages(lo);
        let highs = map.preimages(hi);
        let preimage_mass: BigRational = lows.iter().zip(&highs).map(|(a, b)| mu.mass_in(a, b)).sum();
        let residual = &preimage_mass - &mass;
        out.push(IntervalResidual { lo: lo.clone(), hi: hi.clone(), mass, preimage_mass, residual });
    }
    let pass = out.iter().all(|r| r.residual.is_zero());
    Ok(InvarianceReport { intervals: out, pass })
}

/// Half-open intervals cut at 0, 1, every atom and every atom image.
///
/// An atomic measure is invariant iff it passes on these intervals.
pub fn support_partition(p: u32, mu: &AtomicMeasure) -> Result<Vec<(Rat01, Rat01)>> {
    let map = PadicMap::new(p)?;
    let mut cuts = BTreeSet::from([Rat01::zero(), Rat01::one()]);
    for a in mu.atoms() {
        cuts.insert(a.location.clone());
        cuts.insert(map.apply(&a.location)?);
    }
    let cuts: Vec<_> = cuts.into_iter().collect();
    Ok(cuts.windows(2).map(|w| (w[0].clone(), w[1].clone())).collect())
}

/// True iff no atom sits at an interior breakpoint `k/p`.
pub fn breakpoint_atom_check(p: u32, mu: &AtomicMeasure) -> Result<bool> {
    PadicMap::new(p)?;
    Ok((1..p).all(|k| mu.mass_at(&Rat01::new(k, p).expect("k < p")).is_zero()))
}
