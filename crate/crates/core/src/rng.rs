//! Named, independent random streams derived from one master seed.
//!
//! Every consumer of randomness gets its own ChaCha stream keyed by
//! `(master_seed, stream id)`, so adding draws in one place never shifts the
//! numbers seen anywhere else.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::tensor::Matrix;

pub type Rng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    ActorInit,
    CriticInit,
    BaselineInit,
    /// Rollout action noise.
    Policy,
    /// Candidate noise for the drifting loss.
    Candidates,
    /// Minibatch shuffling.
    Minibatch,
    /// Reset distribution of environment `i`.
    Env(u32),
    /// Synthetic draws for diagnostics and tests.
    Synthetic(u32),
}

impl Stream {
    fn id(self) -> u64 {
        match self {
            Stream::ActorInit => 1,
            Stream::CriticInit => 2,
            Stream::BaselineInit => 3,
            Stream::Policy => 4,
            Stream::Candidates => 5,
            Stream::Minibatch => 6,
            Stream::Env(i) => (1 << 32) | u64::from(i),
            Stream::Synthetic(i) => (2 << 32) | u64::from(i),
        }
    }
}

pub fn stream(master_seed: u64, which: Stream) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(which.id());
    rng
}

pub fn standard_normal(rng: &mut Rng) -> f64 {
    StandardNormal.sample(rng)
}

pub fn normal_matrix(rng: &mut Rng, rows: usize, cols: usize) -> Matrix {
    let mut m = Matrix::zeros(rows, cols);
    for v in m.as_mut_slice() {
        *v = standard_normal(rng);
    }
    m
}
