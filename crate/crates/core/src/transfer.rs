//! The transfer operator `T_S phi(x) = sum_k [phi(f_k^{-1}(x)) - phi(f_k^{-1}(0))]`
//! on candidate distribution functions.
//!
//! For `S_p` the `m`-th power has the closed form
//! `T^m phi(x) = sum_{k < p^m} [phi((x+k)/p^m) - phi(k/p^m)]`. Candidates with a
//! closed form for that shifted sum (polynomials, piecewise-linear and jump
//! CDFs, Bernoulli CDFs of the same base) are evaluated without touching the
//! `p^m` summands; everything else is summed pointwise under a term budget.

use num_bigint::BigUint;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::Serialize;

use crate::cdf::{Cdf, Evaluated, SampledGrid};
use crate::dynamics::BranchMap;
use crate::error::{Error, Result};
use crate::exact::{big_pow, ceil_int, floor_int, fmt_ratio, Budget, Rat01};
use crate::singular::Precision;

/// A function on `[0, 1]` the transfer operator can act on.
pub trait Candidate: Sync {
    fn value(&self, x: &Rat01) -> Evaluated;

    /// `sum_{k < n} [phi((x+k)/n) - phi(k/n)]` in closed form, when known.
    fn shifted_sum(&self, _x: &Rat01, _n: &BigUint) -> Option<Evaluated> {
        None
    }
}

/// A polynomial `sum_j c_j x^j` with `c_0 = 0` and `sum_j c_j = 1`.
///
/// Monotonicity on `[0, 1]` is the caller's responsibility.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Polynomial {
    coeffs: Vec<BigRational>,
}

impl Polynomial {
    pub fn new(coeffs: Vec<BigRational>) -> Result<Self> {
        if coeffs.first().map_or(true, |c| !c.is_zero()) {
            return Err(Error::Validation("a candidate polynomial must vanish at 0".into()));
        }
        let total: BigRational = coeffs.iter().sum();
        if !total.is_one() {
            return Err(Error::Normalization(format!("polynomial takes {} at 1", fmt_ratio(&total))));
        }
        Ok(Polynomial { coeffs })
    }

    /// `x^2`.
    pub fn square() -> Self {
        Polynomial::new(vec![BigRational::zero(), BigRational::zero(), BigRational::one()])
            .expect("x^2 is normalized")
    }

    /// `(x^3 + x)/2`.
    pub fn cubic() -> Self {
        let h = BigRational::new(1.into(), 2.into());
        Polynomial::new(vec![BigRational::zero(), h.clone(), BigRational::zero(), h]).expect("normalized")
    }

    pub fn coeffs(&self) -> &[BigRational] {
        &self.coeffs
    }

    pub fn eval(&self, x: &BigRational) -> BigRational {
        self.coeffs.iter().rev().fold(BigRational::zero(), |acc, c| acc * x + c)
    }
}

/// `S_r(n) = sum_{k < n} k^r` for `r = 0..=degree`, from
/// `n^{r+1} = sum_{i <= r} C(r+1, i) S_i(n)`.
fn power_sums(n: &BigUint, degree: usize) -> Vec<BigRational> {
    let n = BigRational::from_integer(n.clone().into());
    let mut sums: Vec<BigRational> = Vec::with_capacity(degree + 1);
    for r in 0..=degree {
        let mut acc = num_traits::pow(n.clone(), r + 1);
        for (i, s) in sums.iter().enumerate() {
            acc -= BigRational::from_integer(binomial(r + 1, i).into()) * s;
        }
        sums.push(acc / BigRational::from_integer((r + 1).into()));
    }
    sums
}

fn binomial(n: usize, k: usize) -> BigUint {
    (0..k).fold(BigUint::one(), |acc, i| acc * (n - i) / (i + 1))
}

impl Candidate for Polynomial {
    fn value(&self, x: &Rat01) -> Evaluated {
        Evaluated::exact(self.eval(x.as_ratio()))
    }

    // sum_k [(x+k)^j - k^j] = sum_{i=1..j} C(j,i) x^i S_{j-i}(n)
    fn shifted_sum(&self, x: &Rat01, n: &BigUint) -> Option<Evaluated> {
        let degree = self.coeffs.len() - 1;
        let sums = power_sums(n, degree);
        let nr = BigRational::from_integer(n.clone().into());
        let x = x.as_ratio();
        let mut total = BigRational::zero();
        for (j, c) in self.coeffs.iter().enumerate().skip(1) {
            if c.is_zero() {
                continue;
            }
            let mut inner = BigRational::zero();
            for i in 1..=j {
                inner += BigRational::from_integer(binomial(j, i).into()) * num_traits::pow(x.clone(), i) * &sums[j - i];
            }
            total += c * inner / num_traits::pow(nr.clone(), j);
        }
        Some(Evaluated::exact(total))
    }
}

/// `sum_{k < n} [((x+k)/n - t)_+ - (k/n - t)_+]` for `0 < t < 1`.
///
/// Cells with `k >= nt` contribute `x/n` each; only the cell just below `nt`
/// can contribute a partial amount.
fn hinge_sum(t: &BigRational, x: &BigRational, n: &BigRational) -> BigRational {
    let nt = n * t;
    let above = ceil_int(&nt);
    let full = n - BigRational::from_integer(above.clone());
    let mut s = full * x / n;
    let k0 = BigRational::from_integer(above - 1);
    if !k0.is_negative() && k0 > &nt - x {
        s += (x + k0) / n - t;
    }
    s
}

fn cdf_shifted_sum(cdf: &Cdf, x: &Rat01, n: &BigUint) -> Option<Evaluated> {
    let nr = BigRational::from_integer(n.clone().into());
    match cdf {
        Cdf::Identity => Some(Evaluated::exact(x.as_ratio().clone())),
        Cdf::PiecewiseLinear(pl) => {
            let slopes = pl.slopes();
            let mut total = &slopes[0] * x.as_ratio();
            for (i, (t, _)) in pl.knots().iter().enumerate().skip(1).take(slopes.len() - 1) {
                let ds = &slopes[i] - &slopes[i - 1];
                if !ds.is_zero() {
                    total += ds * hinge_sum(t.as_ratio(), x.as_ratio(), &nr);
                }
            }
            Some(Evaluated::exact(total))
        }
        Cdf::Jump(j) => {
            // each atom counts floor(n loc) - floor(n loc - x) cells
            let mut total = BigRational::zero();
            for a in j.measure().atoms() {
                let nl = &nr * a.location.as_ratio();
                let count = floor_int(&nl) - floor_int(&(&nl - x.as_ratio()));
                total += &a.mass * BigRational::from_integer(count);
            }
            Some(Evaluated::exact(total / j.total_mass()))
        }
        Cdf::BernoulliSingular(b) => {
            let exact_power = b.precision() == Precision::Exact && is_power_of(n, b.weights().p());
            exact_power.then(|| b.eval(x))
        }
        Cdf::Mixture(parts) => {
            let mut acc = Evaluated::zero();
            for (w, c) in parts.iter().filter(|(w, _)| !w.is_zero()) {
                acc = acc.add(cdf_shifted_sum(c, x, n)?.scale(w));
            }
            Some(acc)
        }
        Cdf::Sampled(_) => None,
    }
}

fn is_power_of(n: &BigUint, p: u32) -> bool {
    let mut n = n.clone();
    let p = BigUint::from(p);
    while n > BigUint::one() {
        let (q, r) = n.div_rem(&p);
        if !r.is_zero() {
            return false;
        }
        n = q;
    }
    n.is_one()
}

impl Candidate for Cdf {
    fn value(&self, x: &Rat01) -> Evaluated {
        self.eval_flagged(x)
    }

    fn shifted_sum(&self, x: &Rat01, n: &BigUint) -> Option<Evaluated> {
        cdf_shifted_sum(self, x, n)
    }
}

/// Either kind of candidate, as selected on the command line.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Phi {
    Cdf(Cdf),
    Polynomial(Polynomial),
}

impl Candidate for Phi {
    fn value(&self, x: &Rat01) -> Evaluated {
        match self {
            Phi::Cdf(c) => c.value(x),
            Phi::Polynomial(p) => p.value(x),
        }
    }

    fn shifted_sum(&self, x: &Rat01, n: &BigUint) -> Option<Evaluated> {
        match self {
            Phi::Cdf(c) => c.shifted_sum(x, n),
            Phi::Polynomial(p) => p.shifted_sum(x, n),
        }
    }
}

/// `T_S phi(x)` for any map with affine inverse branches.
pub fn transfer_apply<M: BranchMap + ?Sized>(map: &M, phi: &dyn Candidate, x: &Rat01) -> Result<Evaluated> {
    let zero = Rat01::zero();
    let mut acc = Evaluated::zero();
    for k in 0..map.branch_count() {
        let hi = phi.value(&map.branch_inverse(k, x)?);
        let lo = phi.value(&map.branch_inverse(k, &zero)?);
        acc = acc.add(hi.sub(lo));
    }
    Ok(acc)
}

fn check_power(p: u32, m: u64) -> Result<BigUint> {
    if p < 2 {
        return Err(Error::Range(format!("p must be at least 2, got {p}")));
    }
    if m == 0 {
        return Err(Error::Range("the power m must be at least 1".into()));
    }
    Ok(big_pow(p, m))
}

/// `T_{S_p}^m phi(x)`, in closed form when `phi` has one.
pub fn transfer_power_padic(p: u32, phi: &dyn Candidate, m: u64, x: &Rat01, budget: &Budget) -> Result<Evaluated> {
    let n = check_power(p, m)?;
    match phi.shifted_sum(x, &n) {
        Some(v) => Ok(v),
        None => pointwise_sum(phi, x, &n, budget),
    }
}

/// `T_{S_p}^m phi(x)` summed term by term, whatever `phi` is.
pub fn transfer_power_direct(p: u32, phi: &dyn Candidate, m: u64, x: &Rat01, budget: &Budget) -> Result<Evaluated> {
    let n = check_power(p, m)?;
    pointwise_sum(phi, x, &n, budget)
}

fn pointwise_sum(phi: &dyn Candidate, x: &Rat01, n: &BigUint, budget: &Budget) -> Result<Evaluated> {
    let terms = budget.admit(n)?;
    let nr = BigRational::from_integer(n.clone().into());
    let at = |num: BigRational| Rat01::from_ratio(num / &nr).expect("point in [0, 1]");
    let total = (0..terms)
        .into_par_iter()
        .map(|k| {
            let k = BigRational::from_integer(k.into());
            phi.value(&at(x.as_ratio() + &k)).sub(phi.value(&at(k)))
        })
        .reduce(Evaluated::zero, Evaluated::add);
    Ok(total)
}

/// Cesàro mean of `T^m phi(x)` over `m_lo..=m_hi`, standing in for a Banach
/// limit. It agrees with every Banach limit when the sequence converges.
pub fn banach_proxy(
    p: u32,
    phi: &dyn Candidate,
    x: &Rat01,
    m_lo: u64,
    m_hi: u64,
    budget: &Budget,
) -> Result<Evaluated> {
    if m_lo == 0 || m_hi < m_lo {
        return Err(Error::Range(format!("window {m_lo}..{m_hi} must satisfy 1 <= lo <= hi")));
    }
    let mut acc = Evaluated::zero();
    for m in m_lo..=m_hi {
        acc = acc.add(transfer_power_padic(p, phi, m, x, budget)?);
    }
    Ok(acc.scale(&BigRational::new(1.into(), (m_hi - m_lo + 1).into())))
}

/// Normalizes tabulated proxy values into a CDF of class P.
///
/// Repeated locations encode jumps (first entry left value, last entry right
/// value) and are collapsed to those two entries. The scale `alpha` is the
/// left value at 1. A zero scale gives the indicator of `{1}`; otherwise
/// every value is divided by `alpha` and the value at 1 becomes 1.
pub fn normalize_bb(raw: &SampledGrid) -> Result<Cdf> {
    let mut entries: Vec<(Rat01, BigRational)> = Vec::new();
    for (x, v) in raw.entries() {
        let run = entries.iter().rev().take_while(|(t, _)| t == x).count();
        if run >= 2 {
            entries.last_mut().expect("run").1 = v.clone();
        } else {
            entries.push((x.clone(), v.clone()));
        }
    }
    let first_at_one = entries.iter().position(|(x, _)| x.is_one()).expect("grid covers 1");
    let alpha = entries[first_at_one].1.clone();
    if alpha.is_zero() {
        return Cdf::sampled(SampledGrid::new(vec![
            (Rat01::zero(), BigRational::zero()),
            (Rat01::one(), BigRational::zero()),
            (Rat01::one(), BigRational::one()),
        ])?);
    }
    let mut scaled: Vec<_> = entries[..=first_at_one].iter().map(|(x, v)| (x.clone(), v / &alpha)).collect();
    scaled.last_mut().expect("non-empty").1 = BigRational::one();
    let cdf = Cdf::sampled(SampledGrid::new(scaled)?)?;
    Ok(match &cdf {
        Cdf::Sampled(g) if g.entries().iter().all(|(x, v)| x.as_ratio() == v) => Cdf::Identity,
        _ => cdf,
    })
}

/// Proxy values `B(x)` on a grid, as raw input for [`normalize_bb`].
pub fn proxy_grid(
    p: u32,
    phi: &dyn Candidate,
    grid: &[Rat01],
    m_lo: u64,
    m_hi: u64,
    budget: &Budget,
) -> Result<SampledGrid> {
    let values = grid
        .par_iter()
        .map(|x| Ok((x.clone(), banach_proxy(p, phi, x, m_lo, m_hi, budget)?.value)))
        .collect::<Result<Vec<_>>>()?;
    SampledGrid::new(values)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub m_values: Vec<u64>,
    /// `max_x |T^m phi(x) - x|` over the grid.
    #[serde(serialize_with = "ratio_list")]
    pub sup_errors: Vec<BigRational>,
    pub grid: Vec<Rat01>,
    pub approximate: bool,
}

fn ratio_list<S: serde::Serializer>(v: &[BigRational], s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(v.iter().map(fmt_ratio))
}

impl ConvergenceReport {
    pub fn sup_errors_f64(&self) -> Vec<f64> {
        self.sup_errors.iter().map(|e| e.to_f64().unwrap_or(f64::NAN)).collect()
    }
}

/// Distance of `T^m phi` from the identity on `grid`, for `m = 1..=m_max`.
pub fn convergence_profile(
    p: u32,
    phi: &dyn Candidate,
    grid: &[Rat01],
    m_max: u64,
    budget: &Budget,
) -> Result<ConvergenceReport> {
    let mut sup_errors = Vec::new();
    let mut approximate = false;
    for m in 1..=m_max {
        let errs = grid
            .par_iter()
            .map(|x| {
                let v = transfer_power_padic(p, phi, m, x, budget)?;
                Ok(((v.value - x.as_ratio()).abs(), v.approximate))
            })
            .collect::<Result<Vec<_>>>()?;
        approximate |= errs.iter().any(|(_, a)| *a);
        sup_errors.push(errs.into_iter().map(|(e, _)| e).max().unwrap_or_else(BigRational::zero));
    }
    Ok(ConvergenceReport { m_values: (1..=m_max).collect(), sup_errors, grid: grid.to_vec(), approximate })
}
