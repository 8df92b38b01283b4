//! Finite-horizon planning, optimality verdicts, Bellman checks and
//! constrained-class searches.
//!
//! Values are exact rationals. A verdict is only `Optimal` or
//! `Suboptimal` when exact numbers (or disjoint bounds) settle it.

mod checks;
mod classes;
mod decompose;
mod value;

use std::fmt;
use std::sync::Arc;

use crate::prob::{Probability, Rational};
use crate::teleo::Policy;

pub use checks::{
    bellman_check, check_optimal, check_specifiable, sensorimotor_bellman_check, specifiability_preconditions, BellmanReport,
    PreconditionReport, SpecifiabilityReport,
};
pub use classes::{det_ufs_search, iid_policy, iid_sweep, ufs_counterexample_report, ufs_expected_value, DetUfsReport, EvolvedComparison, SweepReport, UfsReport};
pub use decompose::{pointwise_decompose, Decomposition};
pub use value::{deterministify, extract_optimal_policy, optimal_value, upper_bound, PolicyTree, ValueCache};

/// Policy class an optimality question is asked in.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConstraintClass {
    All,
    Deterministic,
    /// I.i.d. policies on a simplex grid with this many steps per unit.
    Iid(u32),
    /// Deterministic unifilar policies with at most this many states.
    DetUfs(usize),
}

impl fmt::Display for ConstraintClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConstraintClass::All => write!(f, "all"),
            ConstraintClass::Deterministic => write!(f, "deterministic"),
            ConstraintClass::Iid(g) => write!(f, "iid({g})"),
            ConstraintClass::DetUfs(n) => write!(f, "det_ufs({n})"),
        }
    }
}

/// A policy doing better than the one under test.
#[derive(Clone, Debug)]
pub enum Witness {
    Tree(Arc<PolicyTree>),
    Iid(Vec<Probability>),
    Machine(Policy),
}

impl Witness {
    pub fn policy(&self, states: u32, actions: u32) -> Policy {
        match self {
            Witness::Tree(t) => t.to_policy(states, actions),
            Witness::Iid(p) => iid_policy(p, states),
            Witness::Machine(p) => p.clone(),
        }
    }
}

/// `lo..hi` bounds the policy's success, `optimum_lo..optimum_hi` bounds
/// the best achievable one.
#[derive(Clone, Debug)]
pub enum OptimalityVerdict {
    Optimal,
    Suboptimal { witness: Witness, margin: Rational },
    Inconclusive { lo: Probability, hi: Probability, optimum_lo: Probability, optimum_hi: Probability },
}

impl OptimalityVerdict {
    pub fn is_optimal(&self) -> bool {
        matches!(self, OptimalityVerdict::Optimal)
    }

    pub fn is_suboptimal(&self) -> bool {
        matches!(self, OptimalityVerdict::Suboptimal { .. })
    }

    pub fn label(&self) -> &'static str {
        match self {
            OptimalityVerdict::Optimal => "optimal",
            OptimalityVerdict::Suboptimal { .. } => "suboptimal",
            OptimalityVerdict::Inconclusive { .. } => "inconclusive",
        }
    }
}
