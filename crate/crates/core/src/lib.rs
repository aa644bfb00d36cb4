//! Network-slicing reinforcement-learning testbed.
//!
//! The crate couples a C-RAN radio and compute cost model with a seeded
//! Markov decision process (`sliceenv`) and trains off-policy actor-critic
//! agents on it: the twin-delayed double-Q soft actor-critic (TDSAC) plus
//! DDPG, TD3 and SAC baselines.
//!
//! Layering, bottom-up:
//! - [`netmodel`]: channel draws, regularized zero-forcing beamforming, SINR, rate, per-AP power.
//! - [`costmodel`]: per-user CPU fraction and total network energy.
//! - [`sliceenv`]: the environment (`reset`/`step`), constraints, penalties and reward.
//! - [`tensorcore`]: dense networks with exact gradients, ADAM, squashed-Gaussian sampling.
//! - [`agents`]: replay buffer and the four agent variants.
//! - [`harness`]: configuration, training loop, evaluation protocol, metrics, checkpoints and plots.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::large_enum_variant, clippy::needless_range_loop)]

pub mod agents;
pub mod codec;
pub mod costmodel;
pub mod error;
pub mod harness;
pub mod netmodel;
pub mod parallel;
pub mod sliceenv;
pub mod tensorcore;

pub use error::{Error, Result};
