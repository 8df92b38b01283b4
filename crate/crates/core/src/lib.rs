//! Coinductive stochastic transducers, teleo-environments and exact
//! success-probability analysis.
//!
//! All probabilities are exact rationals. Transducers are lazy: a node is an
//! output distribution plus a step function evaluated on demand.

pub mod error;
pub mod machines;
pub mod planner;
pub mod prob;
pub mod teleo;
pub mod transducer;

pub use error::{Error, Result};
pub use prob::{FiniteDist, Probability, Rational, Symbol, Trajectory};
pub use transducer::{behaviorally_equal, mix, reroll, unroll, unrolled_step, Behavior, StateKey, Transducer, UnrolledTable};
