//! PODPO: a generative policy trained only on positive-advantage samples.
//!
//! A likelihood-free generative policy (observation + noise → action in a
//! single forward pass) trained by pulling freshly generated candidate
//! actions toward positive-advantage rollout actions with a multi-temperature
//! contrastive drifting field. A Gaussian PPO actor is included as the
//! baseline, together with two small continuous-control environments.
//!
//! The crate is `no_std` and only needs `alloc`. Everything here is a pure
//! function of its inputs plus explicitly threaded RNG streams, so training
//! runs are bit-reproducible from a master seed. File formats, the CLI and
//! wall-clock measurements live in the `podpo-cli` crate.
//!
//! Module map:
//!
//! - [`nn`]: dense tanh MLP with exact backprop, Adam, finite-difference oracle.
//! - [`drift`]: the drifting vector plus RV / ESS diagnostics.
//! - [`policy`]: generative actor, Gaussian baseline actor, critic.
//! - [`envs`]: `bimodal_bandit` and `point_mass`.
//! - [`rollout`]: trajectory collection, GAE, advantage normalization, positive filtering.
//! - [`trainer`]: losses and the per-iteration training loops.
//! - [`gradcheck`]: finite-difference suites for every analytic gradient.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod drift;
pub mod envs;
mod error;
pub mod gradcheck;
pub mod nn;
pub mod policy;
pub mod rng;
pub mod rollout;
pub mod tensor;
pub mod trainer;

pub use error::{Error, Result};
