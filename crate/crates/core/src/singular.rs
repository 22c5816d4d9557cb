//! Bernoulli digit measures, residual checks of the invariance equation, and
//! splitting a CDF into absolutely continuous, jump and singular parts.
//!
//! The Bernoulli measure with digit weights `w_0..w_{p-1}` gives the base-`p`
//! digits of `x` independent laws `P(d = k) = w_k`. Its CDF is
//! `F(x) = sum_n (prod_{i<n} w_{d_i}) (sum_{j<d_n} w_j)`, which is invariant under
//! `S_p` and singular unless the weights are uniform.

use std::collections::HashMap;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::Serialize;

use crate::atoms::JumpCoefficients;
use crate::cdf::{Cdf, Evaluated};
use crate::cycles::enumerate_levels;
use crate::dynamics::PadicMap;
use crate::error::{Error, Result};
use crate::exact::{fmt_ratio, ratio_text, ratio_to_f64, uniform_grid, Budget, Rat01};
use crate::transfer::Candidate;

pub const PARTS_SCHEMA: &str = "picm.parts/1";
pub const FESP_SCHEMA: &str = "picm.fesp/1";

/// Digit weights of a Bernoulli measure.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BernoulliWeights {
    p: u32,
    w: Vec<BigRational>,
    // prefix[k] = w_0 + ... + w_{k-1}
    prefix: Vec<BigRational>,
    // w and prefix as integers over their common denominator
    den: BigInt,
    w_int: Vec<BigInt>,
    prefix_int: Vec<BigInt>,
}

impl BernoulliWeights {
    pub fn new(p: u32, w: Vec<BigRational>) -> Result<Self> {
        PadicMap::new(p)?;
        if w.len() != p as usize {
            return Err(Error::Validation(format!("expected {p} weights, got {}", w.len())));
        }
        if w.iter().any(|x| x.is_negative()) {
            return Err(Error::Validation("weights must be non-negative".into()));
        }
        let mut prefix = vec![BigRational::zero()];
        for x in &w {
            prefix.push(prefix.last().expect("non-empty") + x);
        }
        if !prefix[p as usize].is_one() {
            return Err(Error::Normalization(format!(
                "weights sum to {}, not 1",
                fmt_ratio(&prefix[p as usize])
            )));
        }
        let den = w.iter().fold(BigInt::one(), |acc, x| acc.lcm(x.denom()));
        let scaled = |r: &BigRational| (r * BigRational::from_integer(den.clone())).to_integer();
        let w_int = w.iter().map(scaled).collect();
        let prefix_int = prefix.iter().map(scaled).collect();
        Ok(BernoulliWeights { p, w, prefix, den, w_int, prefix_int })
    }

    pub fn uniform(p: u32) -> Result<Self> {
        BernoulliWeights::new(p, vec![BigRational::new(1.into(), p.into()); p as usize])
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    pub fn weights(&self) -> &[BigRational] {
        &self.w
    }

    /// True unless the weights are uniform (which gives the identity).
    pub fn is_singular(&self) -> bool {
        let u = BigRational::new(1.into(), self.p.into());
        self.w.iter().any(|x| *x != u)
    }

    pub fn max_weight(&self) -> &BigRational {
        self.w.iter().max().expect("p >= 2 weights")
    }

    /// The digit `k < p-1` carrying all the mass, if any; the measure is then
    /// the Dirac mass at `k/(p-1)`.
    fn atom_digit(&self) -> Option<usize> {
        self.w[..self.p as usize - 1].iter().position(|x| x.is_one())
    }
}

/// How a Bernoulli CDF is evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Precision {
    /// Exact, through the eventually periodic digit expansion.
    Exact,
    /// The first `n` digits only.
    Digits(u32),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BernoulliCdf {
    weights: BernoulliWeights,
    precision: Precision,
}

impl BernoulliCdf {
    pub fn new(weights: BernoulliWeights, precision: Precision) -> Self {
        BernoulliCdf { weights, precision }
    }

    pub fn weights(&self) -> &BernoulliWeights {
        &self.weights
    }

    pub fn precision(&self) -> Precision {
        self.precision
    }

    pub fn eval(&self, x: &Rat01) -> Evaluated {
        match self.precision {
            Precision::Exact => Evaluated::exact(bernoulli_exact(&self.weights, x)),
            Precision::Digits(n) => {
                let (value, exact) = truncated(&self.weights, x, n);
                if exact {
                    Evaluated::exact(value)
                } else {
                    Evaluated::approx(value)
                }
            }
        }
    }

    /// Right limit; differs from [`BernoulliCdf::eval`] only at the atom of a
    /// degenerate weight vector.
    pub fn eval_right(&self, x: &Rat01) -> Evaluated {
        let left = self.eval(x);
        match self.weights.atom_digit() {
            Some(k) if *x.as_ratio() == BigRational::new(k.into(), (self.weights.p - 1).into()) => {
                left.add(Evaluated::exact(BigRational::one()))
            }
            _ => left,
        }
    }
}

/// Digit step on `a/b`: returns `(floor(p a / b), p a mod b)`.
fn digit_step(p: u32, a: &BigInt, b: &BigInt) -> (usize, BigInt) {
    let (d, r) = (a * p).div_rem(b);
    (d.to_usize().expect("digit below p"), r)
}

/// The digit series over a finite word, as `(sum, product of weights)`.
///
/// Weights are held as integers over their common denominator so that the
/// running sums need no gcd until the end.
fn series(bw: &BernoulliWeights, digits: &[usize]) -> (BigRational, BigRational) {
    let (den, w, c) = (&bw.den, &bw.w_int, &bw.prefix_int);
    let mut acc = BigInt::zero();
    let mut weight = BigInt::one();
    let mut scale = BigInt::one();
    for &d in digits {
        acc = acc * den + &weight * &c[d];
        weight *= &w[d];
        scale *= den;
    }
    (BigRational::new(acc, scale.clone()), BigRational::new(weight, scale))
}

/// The first `digits` terms of the digit series; the flag is true when the
/// expansion of `x` ends within those digits, so nothing was cut off.
fn truncated(bw: &BernoulliWeights, x: &Rat01, digits: u32) -> (BigRational, bool) {
    if x.is_one() {
        return (BigRational::one(), true);
    }
    let b = x.denom().clone();
    let mut a = x.numer().clone();
    let mut word = Vec::new();
    for _ in 0..digits {
        if a.is_zero() {
            break;
        }
        let (d, r) = digit_step(bw.p, &a, &b);
        word.push(d);
        a = r;
    }
    let (value, weight) = series(bw, &word);
    (value, a.is_zero() || weight.is_zero())
}

/// Truncated Bernoulli CDF: the first `digits` terms of the digit series.
///
/// The error against the exact value is at most `max_k w_k ^ digits`.
pub fn bernoulli_eval(bw: &BernoulliWeights, x: &Rat01, digits: u32) -> BigRational {
    truncated(bw, x, digits).0
}

/// Exact Bernoulli CDF at a rational point.
///
/// The expansion of `a/b` is eventually periodic, so `F(x) = A + P F(y)` with
/// `y` at the start of the period and `F(y) = B / (1 - Q)` summed over one
/// period. When `Q = 1` the period is a constant digit carrying all the mass,
/// `y` is that atom, and the left-continuous value there is 0.
pub fn bernoulli_exact(bw: &BernoulliWeights, x: &Rat01) -> BigRational {
    if x.is_one() {
        return BigRational::one();
    }
    let b = x.denom().clone();
    let mut a = x.numer().clone();
    let mut seen: HashMap<BigInt, usize> = HashMap::new();
    let mut digits = Vec::new();
    while !seen.contains_key(&a) {
        seen.insert(a.clone(), digits.len());
        let (d, r) = digit_step(bw.p, &a, &b);
        digits.push(d);
        a = r;
    }
    let start = seen[&a];
    let (head, head_weight) = series(bw, &digits[..start]);
    let (period, period_weight) = series(bw, &digits[start..]);
    let tail = if period_weight.is_one() {
        BigRational::zero()
    } else {
        period / (BigRational::one() - period_weight)
    };
    head + head_weight * tail
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PointResidual {
    pub x: Rat01,
    #[serde(with = "ratio_text")]
    pub residual: BigRational,
    pub approximate: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FespReport {
    pub schema: &'static str,
    pub p: u32,
    pub tol: f64,
    pub points: Vec<PointResidual>,
    #[serde(with = "ratio_text")]
    pub max_residual: BigRational,
    pub pass: bool,
}

/// `|phi(x) - sum_k [phi((x+k)/p) - phi(k/p)]|` at each point.
pub fn verify_fesp(p: u32, phi: &dyn Candidate, points: &[Rat01], tol: f64) -> Result<FespReport> {
    let map = PadicMap::new(p)?;
    let tol_exact = BigRational::from_float(tol)
        .filter(|t| !t.is_negative())
        .ok_or_else(|| Error::Validation(format!("tolerance {tol} must be finite and non-negative")))?;
    let zero_pre: Vec<Evaluated> = map.preimages(&Rat01::zero()).iter().map(|z| phi.value(z)).collect();
    let residuals: Vec<PointResidual> = points
        .par_iter()
        .map(|x| {
            let sum = map
                .preimages(x)
                .iter()
                .zip(&zero_pre)
                .fold(Evaluated::zero(), |acc, (y, z)| acc.add(phi.value(y).sub(z.clone())));
            let diff = phi.value(x).sub(sum);
            PointResidual { x: x.clone(), residual: diff.value.abs(), approximate: diff.approximate }
        })
        .collect();
    let max_residual = residuals.iter().map(|r| &r.residual).max().cloned().unwrap_or_else(BigRational::zero);
    Ok(FespReport {
        schema: FESP_SCHEMA,
        p,
        tol,
        pass: max_residual <= tol_exact,
        points: residuals,
        max_residual,
    })
}

/// Increments of the singular remainder may dip below zero by this much
/// before the split is declared inconsistent.
pub const PARTS_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GridValue {
    pub x: Rat01,
    #[serde(with = "ratio_text")]
    pub value: BigRational,
}

/// Split of a CDF as `alpha x + sum alpha^m_l phi^m_l + singular remainder`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PartsReport {
    pub schema: &'static str,
    pub p: u32,
    pub max_level: u64,
    pub grid_n: u64,
    #[serde(with = "ratio_text")]
    pub ac_slope: BigRational,
    pub ac_slope_f64: f64,
    pub jump: JumpCoefficients,
    #[serde(with = "ratio_text")]
    pub jump_mass: BigRational,
    #[serde(with = "ratio_text")]
    pub singular_mass: BigRational,
    pub singular_mass_f64: f64,
    pub tolerance: f64,
    /// Remainder `F - alpha x - J` on the grid.
    pub residual_grid: Vec<GridValue>,
    /// Why the split is inconsistent, when it is.
    pub failure: Option<String>,
}

impl PartsReport {
    pub fn consistent(&self) -> bool {
        self.failure.is_none()
    }
}

/// Estimates the three parts of `cdf` from a uniform grid of `grid_n` cells
/// and the jumps at all cycle points of level at most `max_level`.
///
/// Jumps are read off exactly as right-limit gaps. The slope is then the
/// least difference quotient of `F - J` over the grid: the singular part only
/// ever adds to a quotient, so this bounds the continuous density from above
/// and is attained on cells the singular part barely charges.
pub fn extract_parts(p: u32, cdf: &Cdf, max_level: u64, grid_n: u64, budget: &Budget) -> Result<PartsReport> {
    PadicMap::new(p)?;
    if grid_n == 0 || max_level == 0 {
        return Err(Error::Range("grid size and level must be positive".into()));
    }
    budget.admit(&BigUint::from(grid_n))?;
    let mut failure = None;
    let mut jump = JumpCoefficients::new();
    let mut atoms: Vec<(Rat01, BigRational)> = Vec::new();
    for m in 1..=max_level {
        for c in enumerate_levels(p, m, budget)? {
            let gaps = c
                .points()
                .par_iter()
                .map(|y| Ok(cdf.eval_right(y)? - cdf.eval(y)))
                .collect::<Result<Vec<_>>>()?;
            if gaps.iter().any(|g| g != &gaps[0]) && failure.is_none() {
                failure = Some(format!("unequal jumps on the cycle of level {m}, label {}", c.label()));
            }
            let rep = c.representative();
            let gap = &gaps[c.points().binary_search(&rep).expect("representative on cycle")];
            if gap.is_positive() {
                jump.add(m, c.label().clone(), gap * BigRational::from_integer(m.into()));
                atoms.extend(c.points().iter().map(|y| (y.clone(), gap.clone())));
            }
        }
    }
    atoms.sort();
    let mut cumulative = vec![BigRational::zero()];
    for (_, mass) in &atoms {
        cumulative.push(cumulative.last().expect("non-empty") + mass);
    }
    let jump_mass = cumulative.last().expect("non-empty").clone();

    // F - J on the grid
    let grid = uniform_grid(grid_n);
    let continuous: Vec<BigRational> = grid
        .par_iter()
        .map(|x| cdf.eval(x) - &cumulative[atoms.partition_point(|(loc, _)| loc < x)])
        .collect();
    let n = BigRational::from_integer(grid_n.into());
    let ac_slope = continuous
        .windows(2)
        .map(|w| (&w[1] - &w[0]) * &n)
        .min()
        .expect("at least one cell")
        .max(BigRational::zero());
    let residual_grid: Vec<GridValue> = grid
        .iter()
        .zip(&continuous)
        .map(|(x, v)| GridValue { x: x.clone(), value: v - &ac_slope * x.as_ratio() })
        .collect();
    let tol = BigRational::from_float(PARTS_TOLERANCE).expect("finite");
    if failure.is_none() {
        if let Some(w) = residual_grid.windows(2).find(|w| &w[1].value - &w[0].value < -tol.clone()) {
            failure = Some(format!("singular remainder decreases on [{}, {}]", w[0].x, w[1].x));
        }
    }
    let singular_mass = BigRational::one() - &ac_slope - &jump_mass;
    if failure.is_none() && singular_mass < -tol {
        failure = Some(format!("parts exceed total mass by {}", fmt_ratio(&-singular_mass.clone())));
    }
    Ok(PartsReport {
        schema: PARTS_SCHEMA,
        p,
        max_level,
        grid_n,
        ac_slope_f64: ratio_to_f64(&ac_slope),
        ac_slope,
        jump,
        jump_mass,
        singular_mass_f64: ratio_to_f64(&singular_mass),
        singular_mass,
        tolerance: PARTS_TOLERANCE,
        residual_grid,
        failure,
    })
}
