use thiserror::Error;

/// Errors raised by the library. Evolution failure is not an error: it is
/// reported as `None` by [`crate::transducer::Transducer::evolve`].
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("alphabet is empty")]
    EmptyAlphabet,
    #[error("weights sum to {0}, expected exactly 1")]
    WeightSumMismatch(String),
    #[error("{0} weights for {1} components")]
    LengthMismatch(usize, usize),
    #[error("value {0} is not a probability")]
    InvalidProbability(String),
    #[error("cannot parse rational literal {0:?}")]
    BadRational(String),
    #[error("output has probability zero and cannot be conditioned on")]
    UnsupportedOutput,
    #[error("trajectory is not valid for this transducer")]
    InvalidTrajectory,
    #[error("unknown state {0}")]
    UnknownState(String),
    #[error("alphabets do not agree: {0}")]
    AlphabetMismatch(String),
    #[error("machine is ill-formed: {0}")]
    MalformedMachine(String),
    #[error("behaviour is not finite-state: {0}")]
    NotFiniteState(String),
    #[error("observation has probability zero under both telos symbols")]
    UnsupportedObservation,
    #[error("policy is not deterministic")]
    NonDeterministicPolicy,
    #[error("constraint class not supported here: {0}")]
    ClassUnsupported(String),
    #[error("unrolled table has depth 0; nothing to condition")]
    TableExhausted,
    #[error("format error: {0}")]
    Format(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
