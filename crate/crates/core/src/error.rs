use alloc::string::String;
use alloc::vec::Vec;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch in {context}: expected {expected:?}, found {found:?}")]
    Shape {
        context: &'static str,
        expected: Vec<usize>,
        found: Vec<usize>,
    },
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("{context} needs at least {needed} samples, got {found}")]
    TooFewSamples {
        context: &'static str,
        needed: usize,
        found: usize,
    },
    #[error("invalid config field `{field}`: {constraint}")]
    Config {
        field: &'static str,
        constraint: &'static str,
    },
    #[error("unknown environment `{0}` (expected `bimodal_bandit` or `point_mass`)")]
    UnknownEnv(String),
    #[error("env {env}: step called after the episode finished")]
    EpisodeFinished { env: usize },
    #[error("non-finite {term} at iteration {iteration}")]
    NonFiniteLoss {
        iteration: usize,
        term: &'static str,
    },
}

impl Error {
    pub(crate) fn shape(context: &'static str, expected: &[usize], found: &[usize]) -> Self {
        Error::Shape {
            context,
            expected: expected.to_vec(),
            found: found.to_vec(),
        }
    }
}
