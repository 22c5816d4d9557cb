//! Invariant probability measures of the p-adic map `S_p(x) = px mod 1`,
//! handled through their distribution functions in exact rational arithmetic.

pub mod atoms;
pub mod cdf;
pub mod cli;
pub mod cycles;
pub mod dynamics;
pub mod error;
pub mod exact;
pub mod singular;
pub mod transfer;

pub use atoms::{
    breakpoint_atom_check, check_invariance_measure, decompose_jump, decompose_measure, jump_from_cycle,
    jump_level1, support_partition, synthesize_jump, synthesize_measure, InvarianceReport, JumpCoefficients,
};
pub use cdf::{cdf_from_measure, measure_from_cdf, Atom, AtomicMeasure, Cdf, Evaluated, SampledGrid};
pub use cycles::{count_levels, cycle_of, d_membership, enumerate_levels, successor_in_d, unique_preimage_in_d, CycleSet};
pub use dynamics::{AffineBranch, BranchMap, PadicMap, PiecewiseMap};
pub use error::{Error, Result};
pub use exact::{mod_pow, mul_order, reduce, Budget, Rat01};
pub use singular::{
    bernoulli_eval, bernoulli_exact, extract_parts, verify_fesp, BernoulliCdf, BernoulliWeights, FespReport,
    PartsReport, Precision,
};
pub use transfer::{
    banach_proxy, convergence_profile, normalize_bb, transfer_apply, transfer_power_direct, transfer_power_padic,
    Candidate, ConvergenceReport, Phi, Polynomial,
};
