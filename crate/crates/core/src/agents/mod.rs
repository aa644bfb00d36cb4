//! Off-policy continuous-control agents and their replay buffer.

mod common;
mod config;
mod deterministic;
mod noise;
mod replay;
mod soft;

pub use common::{concat_rows, soft_target, Diagnostics, UpdateCounters};
pub use config::{ActorCritic, AgentConfig, Algorithm, EntropyPlacement, PolicySmoothing};
pub use deterministic::DeterministicAgent;
pub use noise::{smoothing_noise, ExplorationNoise, NoiseProcess};
pub use replay::{Batch, ReplayBuffer};
pub use soft::{temperature_gradient, SoftAgent};

use crate::codec::{ByteReader, ByteWriter};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    /// Stochastic sample or noisy action.
    Explore,
    /// Deterministic action.
    Eval,
}

/// Any of the four agents behind one interface.
#[derive(Clone, Debug)]
pub enum Agent {
    Soft(SoftAgent),
    Deterministic(DeterministicAgent),
}

impl Agent {
    pub fn new(cfg: AgentConfig, obs_dim: usize, act_dim: usize, seed: u64) -> Result<Self> {
        Ok(if cfg.algorithm.is_stochastic() {
            Agent::Soft(SoftAgent::new(cfg, obs_dim, act_dim, seed)?)
        } else {
            Agent::Deterministic(DeterministicAgent::new(cfg, obs_dim, act_dim, seed)?)
        })
    }

    pub fn config(&self) -> &AgentConfig {
        match self {
            Agent::Soft(a) => a.config(),
            Agent::Deterministic(a) => a.config(),
        }
    }

    pub fn algorithm(&self) -> Algorithm {
        self.config().algorithm
    }

    pub fn select_action(&mut self, state: &[f64], mode: Mode) -> Vec<f64> {
        let explore = mode == Mode::Explore;
        match self {
            Agent::Soft(a) => a.select_action(state, explore),
            Agent::Deterministic(a) => a.select_action(state, explore),
        }
    }

    /// Deterministic action without touching any RNG.
    pub fn act(&self, state: &[f64]) -> Vec<f64> {
        match self {
            Agent::Soft(a) => a.act(state),
            Agent::Deterministic(a) => a.act(state),
        }
    }

    pub fn train_step(&mut self, buffer: &mut ReplayBuffer) -> Option<Diagnostics> {
        match self {
            Agent::Soft(a) => a.train_step(buffer),
            Agent::Deterministic(a) => a.train_step(buffer),
        }
    }

    pub fn episode_reset(&mut self) {
        if let Agent::Deterministic(a) = self {
            a.episode_reset();
        }
    }

    pub fn counters(&self) -> UpdateCounters {
        match self {
            Agent::Soft(a) => a.counters(),
            Agent::Deterministic(a) => a.counters(),
        }
    }

    pub fn network_count(&self) -> usize {
        match self {
            Agent::Soft(a) => a.network_count(),
            Agent::Deterministic(a) => a.network_count(),
        }
    }

    /// Temperature of entropy-regularized agents.
    pub fn alpha(&self) -> Option<f64> {
        match self {
            Agent::Soft(a) => Some(a.alpha()),
            Agent::Deterministic(_) => None,
        }
    }

    pub fn all_finite(&self) -> bool {
        match self {
            Agent::Soft(a) => a.all_finite(),
            Agent::Deterministic(a) => a.all_finite(),
        }
    }

    /// Serialized agent state, for equality checks.
    pub fn state_bytes(&self) -> Vec<u8> {
        let mut w = ByteWriter::new();
        self.write(&mut w);
        w.into_bytes()
    }

    pub fn write(&self, w: &mut ByteWriter) {
        let cfg = toml::to_string(self.config()).expect("agent config serializes");
        w.str(&cfg);
        match self {
            Agent::Soft(a) => {
                w.u8(0);
                a.write(w);
            }
            Agent::Deterministic(a) => {
                w.u8(1);
                a.write(w);
            }
        }
    }

    pub fn read(r: &mut ByteReader) -> Result<Self> {
        let cfg: AgentConfig = toml::from_str(&r.str()?)
            .map_err(|e| Error::Checkpoint(format!("agent config: {e}")))?;
        match (r.u8()?, cfg.algorithm.is_stochastic()) {
            (0, true) => Ok(Agent::Soft(SoftAgent::read(cfg, r)?)),
            (1, false) => Ok(Agent::Deterministic(DeterministicAgent::read(cfg, r)?)),
            (tag, _) => Err(Error::Checkpoint(format!("agent tag {tag} does not match {}", cfg.algorithm))),
        }
    }
}
