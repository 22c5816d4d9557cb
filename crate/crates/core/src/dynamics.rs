//! Interval maps: the p-adic transformation `x -> px mod 1` and general
//! piecewise-increasing maps whose branches are rational affine bijections
//! onto `[0, 1]`.
//!
//! Maps act on the half-open interval `[0, 1)`. The point 1 is rejected
//! rather than wrapped to 0. Inverse branches are defined on all of `[0, 1]`.

use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{floor_int, frac, ratio_text, Rat01};

/// Anything with finitely many increasing inverse branches `f_k^{-1}: [0,1] -> [a_k, a_{k+1}]`.
///
/// Branch indices are zero-based.
pub trait BranchMap {
    fn branch_count(&self) -> usize;

    fn apply(&self, x: &Rat01) -> Result<Rat01>;

    fn branch_inverse(&self, k: usize, y: &Rat01) -> Result<Rat01>;
}

/// `S_p(x) = px mod 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct PadicMap {
    p: u32,
}

impl PadicMap {
    pub fn new(p: u32) -> Result<Self> {
        if p < 2 {
            return Err(Error::Range(format!("p = {p} must be at least 2")));
        }
        Ok(PadicMap { p })
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    /// All `p` preimages `(x + k)/p`, ascending. Accepts `x = 1`.
    pub fn preimages(&self, x: &Rat01) -> Vec<Rat01> {
        let p = BigRational::from_integer(self.p.into());
        (0..self.p)
            .map(|k| {
                let y = (x.as_ratio() + BigRational::from_integer(k.into())) / &p;
                Rat01::from_ratio(y).expect("(x+k)/p stays in [0,1]")
            })
            .collect()
    }

    /// The index `k = floor(px)` of the branch containing `x`.
    pub fn branch_of(&self, x: &Rat01) -> Result<u32> {
        check_half_open(x)?;
        let k = floor_int(&(x.as_ratio() * BigRational::from_integer(self.p.into())));
        Ok(u32::try_from(k).expect("branch index below p"))
    }

    /// `delta_x` is invariant iff `S_p(x) = x`. False for `x = 1`.
    pub fn dirac_invariant(&self, x: &Rat01) -> bool {
        matches!(self.apply(x), Ok(y) if &y == x)
    }

    /// The fixed points `k/(p-1)`, `k = 0..=p-2`.
    pub fn fixed_points(&self) -> Vec<Rat01> {
        (0..self.p - 1)
            .map(|k| Rat01::new(k, self.p - 1).expect("k < p-1"))
            .collect()
    }
}

impl BranchMap for PadicMap {
    fn branch_count(&self) -> usize {
        self.p as usize
    }

    fn apply(&self, x: &Rat01) -> Result<Rat01> {
        check_half_open(x)?;
        let y = frac(&(x.as_ratio() * BigRational::from_integer(self.p.into())));
        Ok(Rat01::from_ratio(y).expect("fractional part lies in [0,1)"))
    }

    fn branch_inverse(&self, k: usize, y: &Rat01) -> Result<Rat01> {
        if k >= self.p as usize {
            return Err(Error::Index(format!("branch {k} of a {}-branch map", self.p)));
        }
        let z = (y.as_ratio() + BigRational::from_integer(k.into()))
            / BigRational::from_integer(self.p.into());
        Rat01::from_ratio(z)
    }
}

fn check_half_open(x: &Rat01) -> Result<()> {
    if x.is_one() {
        return Err(Error::Domain("maps act on [0, 1); x = 1 is not in the domain".into()));
    }
    Ok(())
}

/// The increasing affine bijection `x -> slope*x + intercept` of one branch.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AffineBranch {
    #[serde(with = "ratio_text")]
    pub slope: BigRational,
    #[serde(with = "ratio_text")]
    pub intercept: BigRational,
}

impl AffineBranch {
    /// The unique increasing affine map sending `lo -> 0` and `hi -> 1`.
    pub fn onto_unit(lo: &Rat01, hi: &Rat01) -> Self {
        let slope = BigRational::one() / (hi.as_ratio() - lo.as_ratio());
        let intercept = -(lo.as_ratio() * &slope);
        AffineBranch { slope, intercept }
    }

    pub fn eval(&self, x: &BigRational) -> BigRational {
        &self.slope * x + &self.intercept
    }

    pub fn inverse(&self, y: &BigRational) -> BigRational {
        (y - &self.intercept) / &self.slope
    }
}

/// `S(x) = f_k(x)` for `x` in `[a_k, a_{k+1})`, with affine branches.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "PiecewiseMapDoc", into = "PiecewiseMapDoc")]
pub struct PiecewiseMap {
    breakpoints: Vec<Rat01>,
    branches: Vec<AffineBranch>,
}

pub const MAP_SCHEMA: &str = "picm.map/1";

#[derive(Serialize, Deserialize)]
struct PiecewiseMapDoc {
    #[serde(default = "map_schema")]
    schema: String,
    breakpoints: Vec<Rat01>,
    branches: Vec<AffineBranch>,
}

fn map_schema() -> String {
    MAP_SCHEMA.to_string()
}

impl TryFrom<PiecewiseMapDoc> for PiecewiseMap {
    type Error = Error;

    fn try_from(doc: PiecewiseMapDoc) -> Result<Self> {
        if doc.schema != MAP_SCHEMA {
            return Err(Error::Parse(format!("unsupported map schema `{}`", doc.schema)));
        }
        PiecewiseMap::from_branches(doc.breakpoints, doc.branches)
    }
}

impl From<PiecewiseMap> for PiecewiseMapDoc {
    fn from(m: PiecewiseMap) -> Self {
        PiecewiseMapDoc { schema: map_schema(), breakpoints: m.breakpoints, branches: m.branches }
    }
}

impl PiecewiseMap {
    /// Builds the map whose branches are the affine bijections determined by
    /// consecutive breakpoints.
    pub fn from_breakpoints(breakpoints: Vec<Rat01>) -> Result<Self> {
        check_breakpoints(&breakpoints)?;
        let branches = breakpoints
            .windows(2)
            .map(|w| AffineBranch::onto_unit(&w[0], &w[1]))
            .collect();
        Ok(PiecewiseMap { breakpoints, branches })
    }

    /// Builds the map from explicit branches, checking that branch `k` sends
    /// `a_k -> 0` and `a_{k+1} -> 1` with positive slope.
    pub fn from_branches(breakpoints: Vec<Rat01>, branches: Vec<AffineBranch>) -> Result<Self> {
        check_breakpoints(&breakpoints)?;
        if branches.len() + 1 != breakpoints.len() {
            return Err(Error::Validation(format!(
                "{} breakpoints need {} branches, got {}",
                breakpoints.len(),
                breakpoints.len() - 1,
                branches.len()
            )));
        }
        for (k, (b, w)) in branches.iter().zip(breakpoints.windows(2)).enumerate() {
            if !b.slope.is_positive() {
                return Err(Error::Validation(format!("branch {k} has non-positive slope")));
            }
            if !b.eval(w[0].as_ratio()).is_zero() || !b.eval(w[1].as_ratio()).is_one() {
                return Err(Error::Validation(format!(
                    "branch {k} does not map [{}, {}] onto [0, 1]",
                    w[0], w[1]
                )));
            }
        }
        Ok(PiecewiseMap { breakpoints, branches })
    }

    /// `S_p` written as `p` equal-width affine branches.
    pub fn padic(p: u32) -> Result<Self> {
        PadicMap::new(p)?;
        let breakpoints = (0..=p).map(|k| Rat01::new(k, p).expect("k <= p")).collect();
        PiecewiseMap::from_breakpoints(breakpoints)
    }

    pub fn breakpoints(&self) -> &[Rat01] {
        &self.breakpoints
    }

    pub fn branches(&self) -> &[AffineBranch] {
        &self.branches
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("map serializes")
    }
}

fn check_breakpoints(a: &[Rat01]) -> Result<()> {
    if a.len() < 3 {
        return Err(Error::Validation("a map needs at least two branches".into()));
    }
    if !a[0].is_zero() || !a[a.len() - 1].is_one() {
        return Err(Error::Validation("breakpoints must start at 0 and end at 1".into()));
    }
    if a.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Validation("breakpoints must be strictly increasing".into()));
    }
    Ok(())
}

impl BranchMap for PiecewiseMap {
    fn branch_count(&self) -> usize {
        self.branches.len()
    }

    fn apply(&self, x: &Rat01) -> Result<Rat01> {
        check_half_open(x)?;
        // last breakpoint a_k with a_k <= x
        let k = self.breakpoints.partition_point(|a| a <= x) - 1;
        Rat01::from_ratio(self.branches[k].eval(x.as_ratio()))
    }

    fn branch_inverse(&self, k: usize, y: &Rat01) -> Result<Rat01> {
        let b = self
            .branches
            .get(k)
            .ok_or_else(|| Error::Index(format!("branch {k} of a {}-branch map", self.branches.len())))?;
        Rat01::from_ratio(b.inverse(y.as_ratio()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn q(n: i64, d: i64) -> Rat01 {
        Rat01::new(n, d).unwrap()
    }

    #[test]
    fn apply_padic_examples() {
        let s2 = PadicMap::new(2).unwrap();
        let s3 = PadicMap::new(3).unwrap();
        assert_eq!(s2.apply(&q(1, 3)).unwrap(), q(2, 3));
        assert_eq!(s2.apply(&q(2, 3)).unwrap(), q(1, 3));
        assert_eq!(s3.apply(&q(1, 2)).unwrap(), q(1, 2));
        assert!(matches!(s2.apply(&Rat01::one()), Err(Error::Domain(_))));
        assert!(PadicMap::new(1).is_err());
    }

    #[test]
    fn preimage_examples() {
        let s2 = PadicMap::new(2).unwrap();
        let s3 = PadicMap::new(3).unwrap();
        assert_eq!(s2.preimages(&Rat01::zero()), vec![q(0, 1), q(1, 2)]);
        assert_eq!(s2.preimages(&q(1, 3)), vec![q(1, 6), q(2, 3)]);
        assert_eq!(s3.preimages(&Rat01::one()), vec![q(1, 3), q(2, 3), q(1, 1)]);
    }

    #[test]
    fn piecewise_examples() {
        let s2 = PiecewiseMap::padic(2).unwrap();
        assert_eq!(s2.apply(&q(3, 4)).unwrap(), q(1, 2));
        assert_eq!(s2.branch_inverse(0, &Rat01::zero()).unwrap(), Rat01::zero());
        assert!(matches!(s2.branch_inverse(2, &Rat01::zero()), Err(Error::Index(_))));
        assert!(matches!(s2.apply(&Rat01::one()), Err(Error::Domain(_))));

        let tent = PiecewiseMap::from_breakpoints(vec![q(0, 1), q(1, 3), q(1, 1)]).unwrap();
        assert_eq!(tent.apply(&q(1, 6)).unwrap(), q(1, 2));
        assert_eq!(tent.apply(&q(2, 3)).unwrap(), q(1, 2));
        assert_eq!(tent.branch_inverse(1, &q(1, 2)).unwrap(), q(2, 3));
    }

    #[test]
    fn dirac_examples() {
        let s2 = PadicMap::new(2).unwrap();
        let s3 = PadicMap::new(3).unwrap();
        assert!(s2.dirac_invariant(&Rat01::zero()));
        assert!(s3.dirac_invariant(&q(1, 2)));
        assert!(!s2.dirac_invariant(&q(1, 3)));
        assert!(!s2.dirac_invariant(&Rat01::one()));
    }

    #[test]
    fn fixed_point_characterizations_agree() {
        for p in 2..=7u32 {
            let s = PadicMap::new(p).unwrap();
            let fixed = s.fixed_points();
            for den in 1..=60i64 {
                for num in 0..den {
                    let x = q(num, den);
                    assert_eq!(s.dirac_invariant(&x), fixed.contains(&x), "p={p} x={x}");
                }
            }
        }
    }

    #[test]
    fn branch_validation() {
        let bp = vec![q(0, 1), q(1, 2), q(1, 1)];
        let good = PiecewiseMap::padic(2).unwrap().branches().to_vec();
        assert!(PiecewiseMap::from_branches(bp.clone(), good).is_ok());
        let wrong = vec![
            AffineBranch { slope: BigRational::from_integer(2.into()), intercept: BigRational::zero() },
            AffineBranch { slope: BigRational::from_integer(3.into()), intercept: BigRational::zero() },
        ];
        assert!(matches!(PiecewiseMap::from_branches(bp, wrong), Err(Error::Validation(_))));
        assert!(PiecewiseMap::from_breakpoints(vec![q(0, 1), q(1, 1)]).is_err());
        assert!(PiecewiseMap::from_breakpoints(vec![q(0, 1), q(1, 2), q(1, 2), q(1, 1)]).is_err());
    }

    #[test]
    fn json_round_trip() {
        let tent = PiecewiseMap::from_breakpoints(vec![q(0, 1), q(1, 3), q(1, 1)]).unwrap();
        let text = tent.to_json();
        assert!(text.contains("\"3/2\""));
        assert!(text.contains("\"-1/2\""));
        assert_eq!(PiecewiseMap::from_json(&text).unwrap(), tent);
        let bad = text.replace("\"3/2\"", "\"2/1\"");
        assert!(PiecewiseMap::from_json(&bad).is_err());
    }

    proptest! {
        #[test]
        fn preimages_map_back(p in 2u32..9, den in 1u64..500, num_frac in 0.0f64..1.0) {
            let s = PadicMap::new(p).unwrap();
            let num = ((den as f64) * num_frac).floor() as u64;
            let x = Rat01::new(num, den).unwrap();
            for y in s.preimages(&x) {
                if y.is_one() {
                    // (1 + (p-1))/p = 1 sits outside [0,1)
                    prop_assert!(x.is_one());
                    continue;
                }
                let back = s.apply(&y).unwrap();
                // on [0,1) the image equals x; x = 1 wraps to 0 on the half-open convention
                if x.is_one() {
                    prop_assert!(back.is_zero());
                } else {
                    prop_assert_eq!(back, x.clone());
                }
            }
        }

        #[test]
        fn piecewise_padic_matches_padic(p in 2u32..9, den in 1u64..500, num_frac in 0.0f64..1.0) {
            let num = (((den as f64) * num_frac).floor() as u64).min(den - 1);
            let x = Rat01::new(num, den).unwrap();
            let a = PadicMap::new(p).unwrap().apply(&x).unwrap();
            let b = PiecewiseMap::padic(p).unwrap().apply(&x).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
