//! Distribution functions on `[0, 1]` and the bridge to atomic measures.
//!
//! Every [`Cdf`] is non-decreasing and left-continuous with `F(0) = 0` and
//! `F(1) = 1`, corresponding to a probability measure through
//! `F(x) = mu([0, x))`. Right-continuous CDFs are converted at the CLI
//! boundary only.

use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{fmt_ratio, ratio_text, Rat01};
use crate::singular::{BernoulliCdf, BernoulliWeights, Precision};

pub const CDF_SCHEMA: &str = "picm.cdf/1";

/// A function value together with a flag telling whether it is exact.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Evaluated {
    pub value: BigRational,
    pub approximate: bool,
}

impl Evaluated {
    pub fn exact(value: BigRational) -> Self {
        Evaluated { value, approximate: false }
    }

    pub fn approx(value: BigRational) -> Self {
        Evaluated { value, approximate: true }
    }

    pub fn zero() -> Self {
        Evaluated::exact(BigRational::zero())
    }

    pub fn scale(self, w: &BigRational) -> Self {
        Evaluated { value: self.value * w, approximate: self.approximate }
    }

    pub fn add(self, other: Evaluated) -> Self {
        Evaluated {
            value: self.value + other.value,
            approximate: self.approximate || other.approximate,
        }
    }

    pub fn sub(self, other: Evaluated) -> Self {
        Evaluated {
            value: self.value - other.value,
            approximate: self.approximate || other.approximate,
        }
    }
}

/// A point mass.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Atom {
    pub location: Rat01,
    #[serde(with = "ratio_text")]
    pub mass: BigRational,
}

/// Finitely many point masses on `[0, 1)` with distinct sorted locations and
/// total mass at most 1.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AtomicMeasure {
    atoms: Vec<Atom>,
}

impl AtomicMeasure {
    pub fn new(atoms: impl IntoIterator<Item = (Rat01, BigRational)>) -> Result<Self> {
        let mut atoms: Vec<Atom> =
            atoms.into_iter().map(|(location, mass)| Atom { location, mass }).collect();
        atoms.sort_by(|a, b| a.location.cmp(&b.location));
        for a in &atoms {
            if a.location.is_one() {
                return Err(Error::Validation("atoms must lie in [0, 1)".into()));
            }
            if !a.mass.is_positive() {
                return Err(Error::Validation(format!("atom at {} has non-positive mass", a.location)));
            }
        }
        if let Some(w) = atoms.windows(2).find(|w| w[0].location == w[1].location) {
            return Err(Error::Validation(format!("two atoms at {}", w[0].location)));
        }
        let m = AtomicMeasure { atoms };
        if m.total_mass() > BigRational::one() {
            return Err(Error::Validation(format!(
                "total mass {} exceeds 1",
                fmt_ratio(&m.total_mass())
            )));
        }
        Ok(m)
    }

    /// The Dirac measure at `x`.
    pub fn dirac(x: Rat01) -> Result<Self> {
        AtomicMeasure::new([(x, BigRational::one())])
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn total_mass(&self) -> BigRational {
        self.atoms.iter().map(|a| &a.mass).sum()
    }

    /// `mu([lo, hi))`.
    pub fn mass_in(&self, lo: &Rat01, hi: &Rat01) -> BigRational {
        let start = self.atoms.partition_point(|a| &a.location < lo);
        self.atoms[start..]
            .iter()
            .take_while(|a| &a.location < hi)
            .map(|a| &a.mass)
            .sum()
    }

    pub fn mass_at(&self, x: &Rat01) -> BigRational {
        self.atoms
            .binary_search_by(|a| a.location.cmp(x))
            .map(|i| self.atoms[i].mass.clone())
            .unwrap_or_else(|_| BigRational::zero())
    }
}

impl<'de> Deserialize<'de> for AtomicMeasure {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            atoms: Vec<Atom>,
        }
        let raw = Raw::deserialize(d)?;
        AtomicMeasure::new(raw.atoms.into_iter().map(|a| (a.location, a.mass)))
            .map_err(serde::de::Error::custom)
    }
}

/// Continuous piecewise-linear CDF through strictly increasing knots from
/// `(0, 0)` to `(1, 1)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PiecewiseLinear {
    knots: Vec<(Rat01, BigRational)>,
}

impl PiecewiseLinear {
    pub fn knots(&self) -> &[(Rat01, BigRational)] {
        &self.knots
    }

    fn eval(&self, x: &Rat01) -> BigRational {
        let i = self.knots.partition_point(|(t, _)| t <= x);
        if i == self.knots.len() {
            return self.knots[i - 1].1.clone();
        }
        let (x0, v0) = &self.knots[i - 1];
        let (x1, v1) = &self.knots[i];
        let t = (x.as_ratio() - x0.as_ratio()) / (x1.as_ratio() - x0.as_ratio());
        v0 + (v1 - v0) * t
    }

    /// Slope on each of the `knots.len() - 1` segments.
    pub fn slopes(&self) -> Vec<BigRational> {
        self.knots
            .windows(2)
            .map(|w| (&w[1].1 - &w[0].1) / (w[1].0.as_ratio() - w[0].0.as_ratio()))
            .collect()
    }
}

/// Pure jump CDF `F(x) = mu([0, x)) / mu([0, 1))`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct JumpCdf {
    measure: AtomicMeasure,
    // cumulative[i] = mass of the first i atoms
    cumulative: Vec<BigRational>,
}

impl JumpCdf {
    fn new(measure: AtomicMeasure) -> Result<Self> {
        if measure.atoms.is_empty() {
            return Err(Error::Normalization("a jump CDF needs at least one atom".into()));
        }
        let mut cumulative = Vec::with_capacity(measure.atoms.len() + 1);
        let mut acc = BigRational::zero();
        cumulative.push(acc.clone());
        for a in &measure.atoms {
            acc += &a.mass;
            cumulative.push(acc.clone());
        }
        Ok(JumpCdf { measure, cumulative })
    }

    pub fn measure(&self) -> &AtomicMeasure {
        &self.measure
    }

    pub fn total_mass(&self) -> &BigRational {
        self.cumulative.last().expect("non-empty")
    }

    fn eval(&self, x: &Rat01) -> BigRational {
        let i = self.measure.atoms.partition_point(|a| &a.location < x);
        &self.cumulative[i] / self.total_mass()
    }

    fn eval_right(&self, x: &Rat01) -> BigRational {
        let i = self.measure.atoms.partition_point(|a| &a.location <= x);
        &self.cumulative[i] / self.total_mass()
    }
}

/// Tabulated values `(x, F(x))`, linearly interpolated between entries.
///
/// Locations are non-decreasing. A repeated location encodes a jump: the
/// first entry is the left limit, the last the right limit.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SampledGrid {
    entries: Vec<(Rat01, BigRational)>,
}

impl SampledGrid {
    pub fn new(entries: Vec<(Rat01, BigRational)>) -> Result<Self> {
        if entries.len() < 2 {
            return Err(Error::Validation("a sampled grid needs at least two entries".into()));
        }
        if !entries[0].0.is_zero() || !entries[entries.len() - 1].0.is_one() {
            return Err(Error::Validation("a sampled grid must cover 0 and 1".into()));
        }
        for w in entries.windows(2) {
            if w[1].0 < w[0].0 {
                return Err(Error::Validation("grid locations must be non-decreasing".into()));
            }
            if w[1].1 < w[0].1 {
                return Err(Error::Validation(format!(
                    "values decrease between {} and {}",
                    w[0].0, w[1].0
                )));
            }
        }
        if entries.iter().any(|(_, v)| v.is_negative() || v > &BigRational::one()) {
            return Err(Error::Validation("grid values must lie in [0, 1]".into()));
        }
        Ok(SampledGrid { entries })
    }

    pub fn entries(&self) -> &[(Rat01, BigRational)] {
        &self.entries
    }

    /// Left-continuous value; exact on grid locations, interpolated elsewhere.
    /// At `x = 1` the last entry is returned.
    pub fn eval(&self, x: &Rat01) -> Evaluated {
        if x.is_one() {
            return Evaluated::exact(self.entries[self.entries.len() - 1].1.clone());
        }
        let i = self.entries.partition_point(|(t, _)| t < x);
        if self.entries[i].0 == *x {
            return Evaluated::exact(self.entries[i].1.clone());
        }
        self.interpolate(i, x)
    }

    /// Right limit; exact on grid locations, interpolated elsewhere.
    pub fn eval_right(&self, x: &Rat01) -> Evaluated {
        let i = self.entries.partition_point(|(t, _)| t <= x);
        if i > 0 && self.entries[i - 1].0 == *x {
            return Evaluated::exact(self.entries[i - 1].1.clone());
        }
        self.interpolate(i, x)
    }

    // entries[i-1].0 < x < entries[i].0
    fn interpolate(&self, i: usize, x: &Rat01) -> Evaluated {
        let (x0, v0) = &self.entries[i - 1];
        let (x1, v1) = &self.entries[i];
        let t = (x.as_ratio() - x0.as_ratio()) / (x1.as_ratio() - x0.as_ratio());
        Evaluated::approx(v0 + (v1 - v0) * t)
    }
}

/// A candidate distribution function in class P.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "CdfRepr", into = "CdfRepr")]
pub enum Cdf {
    Identity,
    PiecewiseLinear(PiecewiseLinear),
    Jump(JumpCdf),
    BernoulliSingular(BernoulliCdf),
    Mixture(Vec<(BigRational, Cdf)>),
    Sampled(SampledGrid),
}

impl Cdf {
    pub fn piecewise_linear(knots: Vec<(Rat01, BigRational)>) -> Result<Self> {
        if knots.len() < 2 {
            return Err(Error::Validation("need at least two knots".into()));
        }
        let (first, last) = (&knots[0], &knots[knots.len() - 1]);
        if !first.0.is_zero() || !first.1.is_zero() || !last.0.is_one() || !last.1.is_one() {
            return Err(Error::Validation("knots must run from (0, 0) to (1, 1)".into()));
        }
        for w in knots.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(Error::Validation("knot locations must be strictly increasing".into()));
            }
            if w[1].1 < w[0].1 {
                return Err(Error::Validation("knot values must be non-decreasing".into()));
            }
        }
        Ok(Cdf::PiecewiseLinear(PiecewiseLinear { knots }))
    }

    /// Jump CDF of a measure; the measure is rescaled to total mass 1.
    pub fn jump(measure: AtomicMeasure) -> Result<Self> {
        Ok(Cdf::Jump(JumpCdf::new(measure)?))
    }

    pub fn jump_from_atoms(atoms: impl IntoIterator<Item = (Rat01, BigRational)>) -> Result<Self> {
        Cdf::jump(AtomicMeasure::new(atoms)?)
    }

    pub fn bernoulli(weights: BernoulliWeights, precision: Precision) -> Self {
        Cdf::BernoulliSingular(BernoulliCdf::new(weights, precision))
    }

    pub fn mixture(components: Vec<(BigRational, Cdf)>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::Normalization("a mixture needs at least one component".into()));
        }
        if components.iter().any(|(w, _)| w.is_negative()) {
            return Err(Error::Validation("mixture weights must be non-negative".into()));
        }
        let total: BigRational = components.iter().map(|(w, _)| w).sum();
        if !total.is_one() {
            return Err(Error::Normalization(format!(
                "mixture weights sum to {}, not 1",
                fmt_ratio(&total)
            )));
        }
        Ok(Cdf::Mixture(components))
    }

    /// A sampled CDF; the grid must satisfy `F(0) = 0`, `F(1) = 1`.
    pub fn sampled(grid: SampledGrid) -> Result<Self> {
        let e = grid.entries();
        if !e[0].1.is_zero() || !e[e.len() - 1].1.is_one() {
            return Err(Error::Normalization("sampled CDF must run from 0 to 1".into()));
        }
        Ok(Cdf::Sampled(grid))
    }

    /// `F(x)`, flagged approximate for interpolated or truncated evaluations.
    pub fn eval_flagged(&self, x: &Rat01) -> Evaluated {
        match self {
            Cdf::Identity => Evaluated::exact(x.as_ratio().clone()),
            Cdf::PiecewiseLinear(pl) => Evaluated::exact(pl.eval(x)),
            Cdf::Jump(j) => Evaluated::exact(j.eval(x)),
            Cdf::BernoulliSingular(b) => b.eval(x),
            Cdf::Mixture(parts) => parts
                .iter()
                .filter(|(w, _)| !w.is_zero())
                .fold(Evaluated::zero(), |acc, (w, c)| acc.add(c.eval_flagged(x).scale(w))),
            Cdf::Sampled(g) => g.eval(x),
        }
    }

    pub fn eval(&self, x: &Rat01) -> BigRational {
        self.eval_flagged(x).value
    }

    /// `F(x+)`, the right limit at `x` in `[0, 1)`.
    pub fn eval_right_flagged(&self, x: &Rat01) -> Result<Evaluated> {
        if x.is_one() {
            return Err(Error::Domain("the right limit is taken on [0, 1)".into()));
        }
        Ok(match self {
            Cdf::Identity => Evaluated::exact(x.as_ratio().clone()),
            Cdf::PiecewiseLinear(pl) => Evaluated::exact(pl.eval(x)),
            Cdf::Jump(j) => Evaluated::exact(j.eval_right(x)),
            Cdf::BernoulliSingular(b) => b.eval_right(x),
            Cdf::Mixture(parts) => {
                let mut acc = Evaluated::zero();
                for (w, c) in parts.iter().filter(|(w, _)| !w.is_zero()) {
                    acc = acc.add(c.eval_right_flagged(x)?.scale(w));
                }
                acc
            }
            Cdf::Sampled(g) => g.eval_right(x),
        })
    }

    pub fn eval_right(&self, x: &Rat01) -> Result<BigRational> {
        Ok(self.eval_right_flagged(x)?.value)
    }

    /// False when any part is sampled or evaluated by digit truncation.
    pub fn is_exact(&self) -> bool {
        match self {
            Cdf::Identity | Cdf::PiecewiseLinear(_) | Cdf::Jump(_) => true,
            Cdf::BernoulliSingular(b) => b.precision() == Precision::Exact,
            Cdf::Mixture(parts) => parts.iter().all(|(_, c)| c.is_exact()),
            Cdf::Sampled(_) => false,
        }
    }

    pub fn to_json(&self) -> String {
        let doc = CdfDoc { schema: CDF_SCHEMA.to_string(), cdf: CdfRepr::from(self.clone()) };
        serde_json::to_string_pretty(&doc).expect("cdf serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: CdfDoc = serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
        if doc.schema != CDF_SCHEMA {
            return Err(Error::Parse(format!("unsupported CDF schema `{}`", doc.schema)));
        }
        Cdf::try_from(doc.cdf)
    }
}

/// The Jump CDF of a probability measure.
pub fn cdf_from_measure(m: &AtomicMeasure) -> Result<Cdf> {
    let total = m.total_mass();
    if !total.is_one() {
        return Err(Error::Normalization(format!("total mass is {}, not 1", fmt_ratio(&total))));
    }
    Cdf::jump(m.clone())
}

/// The atoms behind a Jump CDF, normalized to total mass 1.
pub fn measure_from_cdf(cdf: &Cdf) -> Result<AtomicMeasure> {
    match cdf {
        Cdf::Jump(j) => {
            let total = j.total_mass();
            AtomicMeasure::new(
                j.measure.atoms.iter().map(|a| (a.location.clone(), &a.mass / total)),
            )
        }
        _ => Err(Error::Validation("only a Jump CDF carries an atomic measure".into())),
    }
}

#[derive(Serialize, Deserialize)]
struct CdfDoc {
    schema: String,
    #[serde(flatten)]
    cdf: CdfRepr,
}

#[derive(Serialize, Deserialize)]
struct Knot {
    x: Rat01,
    #[serde(with = "ratio_text")]
    value: BigRational,
}

#[derive(Serialize, Deserialize)]
struct Component {
    #[serde(with = "ratio_text")]
    weight: BigRational,
    cdf: CdfRepr,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum CdfRepr {
    Identity,
    PiecewiseLinear { knots: Vec<Knot> },
    Jump { atoms: Vec<Atom> },
    Bernoulli {
        p: u32,
        weights: Vec<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        digits: Option<u32>,
    },
    Mixture { components: Vec<Component> },
    Sampled { grid: Vec<Knot> },
}

fn knots_to_repr(k: &[(Rat01, BigRational)]) -> Vec<Knot> {
    k.iter().map(|(x, v)| Knot { x: x.clone(), value: v.clone() }).collect()
}

fn knots_from_repr(k: Vec<Knot>) -> Vec<(Rat01, BigRational)> {
    k.into_iter().map(|k| (k.x, k.value)).collect()
}

impl From<Cdf> for CdfRepr {
    fn from(c: Cdf) -> Self {
        match c {
            Cdf::Identity => CdfRepr::Identity,
            Cdf::PiecewiseLinear(pl) => CdfRepr::PiecewiseLinear { knots: knots_to_repr(&pl.knots) },
            Cdf::Jump(j) => CdfRepr::Jump { atoms: j.measure.atoms },
            Cdf::BernoulliSingular(b) => CdfRepr::Bernoulli {
                p: b.weights().p(),
                weights: b.weights().weights().iter().map(fmt_ratio).collect(),
                digits: match b.precision() {
                    Precision::Exact => None,
                    Precision::Digits(d) => Some(d),
                },
            },
            Cdf::Mixture(parts) => CdfRepr::Mixture {
                components: parts
                    .into_iter()
                    .map(|(weight, c)| Component { weight, cdf: c.into() })
                    .collect(),
            },
            Cdf::Sampled(g) => CdfRepr::Sampled { grid: knots_to_repr(&g.entries) },
        }
    }
}

impl TryFrom<CdfRepr> for Cdf {
    type Error = Error;

    fn try_from(r: CdfRepr) -> Result<Self> {
        match r {
            CdfRepr::Identity => Ok(Cdf::Identity),
            CdfRepr::PiecewiseLinear { knots } => Cdf::piecewise_linear(knots_from_repr(knots)),
            CdfRepr::Jump { atoms } => {
                Cdf::jump_from_atoms(atoms.into_iter().map(|a| (a.location, a.mass)))
            }
            CdfRepr::Bernoulli { p, weights, digits } => {
                let w = weights
                    .iter()
                    .map(|s| crate::exact::parse_ratio(s))
                    .collect::<Result<Vec<_>>>()?;
                let precision = digits.map_or(Precision::Exact, Precision::Digits);
                Ok(Cdf::bernoulli(BernoulliWeights::new(p, w)?, precision))
            }
            CdfRepr::Mixture { components } => Cdf::mixture(
                components
                    .into_iter()
                    .map(|c| Ok((c.weight, Cdf::try_from(c.cdf)?)))
                    .collect::<Result<Vec<_>>>()?,
            ),
            CdfRepr::Sampled { grid } => Cdf::sampled(SampledGrid::new(knots_from_repr(grid))?),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn q(n: i64, d: i64) -> Rat01 {
        Rat01::new(n, d).unwrap()
    }

    fn r(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    fn half_mix() -> Cdf {
        Cdf::mixture(vec![
            (r(1, 2), Cdf::Identity),
            (r(1, 2), Cdf::jump_from_atoms([(q(1, 3), r(1, 1))]).unwrap()),
        ])
        .unwrap()
    }

    fn ramp() -> Cdf {
        Cdf::piecewise_linear(vec![
            (q(0, 1), r(0, 1)),
            (q(1, 4), r(1, 10)),
            (q(1, 2), r(1, 2)),
            (q(3, 4), r(7, 10)),
            (q(1, 1), r(1, 1)),
        ])
        .unwrap()
    }

    #[test]
    fn eval_examples() {
        assert_eq!(Cdf::Identity.eval(&q(3, 7)), r(3, 7));
        let dirac0 = Cdf::jump_from_atoms([(q(0, 1), r(1, 1))]).unwrap();
        assert_eq!(dirac0.eval(&q(0, 1)), r(0, 1));
        assert_eq!(dirac0.eval(&q(1, 2)), r(1, 1));
        assert_eq!(half_mix().eval(&q(1, 3)), r(1, 6));
        assert_eq!(ramp().eval(&q(3, 8)), r(3, 10));
    }

    #[test]
    fn eval_right_examples() {
        let d = Cdf::jump_from_atoms([(q(1, 3), r(1, 1))]).unwrap();
        assert_eq!(d.eval_right(&q(1, 3)).unwrap(), r(1, 1));
        assert_eq!(d.eval(&q(1, 3)), r(0, 1));
        assert_eq!(Cdf::Identity.eval_right(&q(2, 5)).unwrap(), r(2, 5));
        let cycle2 = Cdf::jump_from_atoms([(q(1, 3), r(1, 2)), (q(2, 3), r(1, 2))]).unwrap();
        assert_eq!(cycle2.eval_right(&q(1, 3)).unwrap(), r(1, 2));
        assert!(matches!(d.eval_right(&Rat01::one()), Err(Error::Domain(_))));
    }

    #[test]
    fn jump_rescales_sub_probability() {
        let j = Cdf::jump_from_atoms([(q(1, 4), r(1, 8)), (q(1, 2), r(1, 8))]).unwrap();
        assert_eq!(j.eval(&q(1, 3)), r(1, 2));
        assert_eq!(j.eval(&Rat01::one()), r(1, 1));
    }

    #[test]
    fn measure_bridge() {
        let m = AtomicMeasure::new([(q(0, 1), r(1, 1))]).unwrap();
        let c = cdf_from_measure(&m).unwrap();
        assert_eq!(c.eval(&Rat01::zero()), r(0, 1));
        assert_eq!(c.eval(&q(1, 1000)), r(1, 1));

        let m = AtomicMeasure::new([(q(2, 3), r(1, 2)), (q(1, 3), r(1, 2))]).unwrap();
        let back = measure_from_cdf(&cdf_from_measure(&m).unwrap()).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.atoms()[0].location, q(1, 3));

        let short = AtomicMeasure::new([(q(1, 3), r(1, 2))]).unwrap();
        assert!(matches!(cdf_from_measure(&short), Err(Error::Normalization(_))));
        assert!(measure_from_cdf(&Cdf::Identity).is_err());
    }

    #[test]
    fn measure_validation() {
        assert!(AtomicMeasure::new([(q(1, 2), r(1, 2)), (q(1, 2), r(1, 4))]).is_err());
        assert!(AtomicMeasure::new([(q(1, 1), r(1, 2))]).is_err());
        assert!(AtomicMeasure::new([(q(1, 2), r(0, 1))]).is_err());
        assert!(AtomicMeasure::new([(q(1, 2), r(3, 4)), (q(1, 3), r(1, 2))]).is_err());
        let m = AtomicMeasure::new([(q(1, 4), r(1, 4)), (q(1, 2), r(3, 4))]).unwrap();
        assert_eq!(m.mass_in(&q(1, 4), &q(1, 2)), r(1, 4));
        assert_eq!(m.mass_in(&q(0, 1), &q(1, 1)), r(1, 1));
        assert_eq!(m.mass_at(&q(1, 2)), r(3, 4));
        assert_eq!(m.mass_at(&q(1, 3)), r(0, 1));
    }

    #[test]
    fn constructor_validation() {
        assert!(Cdf::piecewise_linear(vec![(q(0, 1), r(0, 1)), (q(1, 1), r(1, 2))]).is_err());
        assert!(Cdf::piecewise_linear(vec![
            (q(0, 1), r(0, 1)),
            (q(1, 2), r(3, 4)),
            (q(1, 2), r(4, 5)),
            (q(1, 1), r(1, 1))
        ])
        .is_err());
        assert!(matches!(
            Cdf::mixture(vec![(r(1, 2), Cdf::Identity)]),
            Err(Error::Normalization(_))
        ));
        assert!(Cdf::mixture(vec![(r(3, 2), Cdf::Identity), (r(-1, 2), Cdf::Identity)]).is_err());
    }

    #[test]
    fn sampled_grid_flags_and_jumps() {
        let g = SampledGrid::new(vec![
            (q(0, 1), r(0, 1)),
            (q(1, 2), r(1, 4)),
            (q(1, 2), r(3, 4)),
            (q(1, 1), r(1, 1)),
        ])
        .unwrap();
        let c = Cdf::sampled(g).unwrap();
        assert_eq!(c.eval_flagged(&q(1, 2)), Evaluated::exact(r(1, 4)));
        assert_eq!(c.eval_right_flagged(&q(1, 2)).unwrap(), Evaluated::exact(r(3, 4)));
        assert_eq!(c.eval_flagged(&q(1, 4)), Evaluated::approx(r(1, 8)));
        assert_eq!(c.eval_flagged(&q(3, 4)), Evaluated::approx(r(7, 8)));
        assert!(!c.is_exact());
        let bad = SampledGrid::new(vec![(q(0, 1), r(1, 2)), (q(1, 1), r(1, 4))]);
        assert!(matches!(bad, Err(Error::Validation(_))));
    }

    #[test]
    fn json_round_trip() {
        let w = BernoulliWeights::new(2, vec![r(1, 4), r(3, 4)]).unwrap();
        let c = Cdf::mixture(vec![
            (r(3, 10), Cdf::Identity),
            (r(1, 2), Cdf::jump_from_atoms([(q(0, 1), r(1, 1))]).unwrap()),
            (r(1, 5), Cdf::bernoulli(w, Precision::Exact)),
        ])
        .unwrap();
        let text = c.to_json();
        assert!(text.contains("\"schema\": \"picm.cdf/1\""));
        assert!(text.contains("\"3/10\""));
        assert_eq!(Cdf::from_json(&text).unwrap(), c);
        assert_eq!(Cdf::from_json(&ramp().to_json()).unwrap(), ramp());
        let wrong = text.replace("picm.cdf/1", "picm.cdf/9");
        assert!(Cdf::from_json(&wrong).is_err());
    }

    fn variants() -> Vec<Cdf> {
        let w = BernoulliWeights::new(3, vec![r(1, 2), r(1, 3), r(1, 6)]).unwrap();
        vec![
            Cdf::Identity,
            ramp(),
            Cdf::jump_from_atoms([(q(1, 7), r(1, 3)), (q(2, 7), r(1, 3)), (q(4, 7), r(1, 3))])
                .unwrap(),
            Cdf::bernoulli(w.clone(), Precision::Exact),
            Cdf::bernoulli(w, Precision::Digits(12)),
            half_mix(),
            Cdf::sampled(
                SampledGrid::new(vec![(q(0, 1), r(0, 1)), (q(1, 3), r(1, 2)), (q(1, 1), r(1, 1))])
                    .unwrap(),
            )
            .unwrap(),
        ]
    }

    #[test]
    fn endpoints_are_normalized() {
        for c in variants() {
            assert_eq!(c.eval(&Rat01::zero()), r(0, 1), "{c:?}");
            assert_eq!(c.eval(&Rat01::one()), r(1, 1), "{c:?}");
        }
    }

    proptest! {
        #[test]
        fn eval_is_monotone(a in 0u64..=500, b in 0u64..=500, den in 1u64..=97) {
            let (lo, hi) = (a.min(b), a.max(b));
            let x = Rat01::new(lo * den / 500, den).unwrap();
            let y = Rat01::new(hi * den / 500, den).unwrap();
            for c in variants() {
                prop_assert!(c.eval(&x) <= c.eval(&y));
            }
        }

        #[test]
        fn right_limit_dominates(num in 0u64..200, den in 1u64..=200) {
            prop_assume!(num < den);
            let x = Rat01::new(num, den).unwrap();
            for c in variants() {
                prop_assert!(c.eval_right(&x).unwrap() >= c.eval(&x));
            }
            let j = &variants()[2];
            let gap = j.eval_right(&x).unwrap() - j.eval(&x);
            let atom = [q(1, 7), q(2, 7), q(4, 7)].contains(&x);
            prop_assert_eq!(gap.is_positive(), atom);
        }
    }
}
