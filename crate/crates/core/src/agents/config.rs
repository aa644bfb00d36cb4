use serde::{Deserialize, Serialize};

use super::noise::ExplorationNoise;
use crate::tensorcore::Activation;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Tdsac,
    Sac,
    Td3,
    Ddpg,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [Algorithm::Tdsac, Algorithm::Sac, Algorithm::Td3, Algorithm::Ddpg];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Tdsac => "tdsac",
            Algorithm::Sac => "sac",
            Algorithm::Td3 => "td3",
            Algorithm::Ddpg => "ddpg",
        }
    }

    pub fn is_stochastic(self) -> bool {
        matches!(self, Algorithm::Tdsac | Algorithm::Sac)
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown algorithm {s:?}")))
    }
}

/// Where the entropy bonus enters the soft target.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntropyPlacement {
    /// `y = r + gamma * min Q' - alpha * log pi`
    OutsideDiscount,
    /// `y = r + gamma * (min Q' - alpha * log pi)`
    InsideDiscount,
}

/// Which critic the soft actor maximizes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActorCritic {
    First,
    Min,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicySmoothing {
    pub std: f64,
    pub clip: f64,
}

/// Hyperparameters of one agent. [`AgentConfig::for_algorithm`] gives the
/// per-algorithm reference values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentConfig {
    pub algorithm: Algorithm,
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub batch_size: usize,
    pub buffer_size: usize,
    pub lr_actor: f64,
    pub lr_critic: f64,
    pub lr_alpha: f64,
    pub gamma: f64,
    pub tau: f64,
    /// Critic updates per actor/target update.
    pub update_interval: usize,
    pub exploration: ExplorationNoise,
    pub policy_smoothing: Option<PolicySmoothing>,
    /// Entropy target; `None` means `-dim(action)`.
    pub target_entropy: Option<f64>,
    pub initial_alpha: f64,
    pub entropy_placement: EntropyPlacement,
    pub actor_critic: ActorCritic,
    /// Sample the next action from a target actor (SAC layout) instead of the online one.
    pub target_actor: bool,
    /// Global-norm gradient clip applied to every network update.
    pub grad_clip: Option<f64>,
    pub actor_final_scale: f64,
}

impl AgentConfig {
    pub fn for_algorithm(algorithm: Algorithm) -> Self {
        let base = Self {
            algorithm,
            hidden: vec![128; 5],
            activation: Activation::Gelu,
            batch_size: 128,
            buffer_size: 1_000_000,
            lr_actor: 1e-3,
            lr_critic: 1e-3,
            lr_alpha: 1e-3,
            gamma: 0.99,
            tau: 0.001,
            update_interval: 2,
            exploration: ExplorationNoise::None,
            policy_smoothing: None,
            target_entropy: None,
            initial_alpha: 1.0,
            entropy_placement: EntropyPlacement::OutsideDiscount,
            actor_critic: ActorCritic::First,
            target_actor: false,
            grad_clip: Some(10.0),
            actor_final_scale: 1e-2,
        };
        match algorithm {
            Algorithm::Tdsac => base,
            Algorithm::Sac => Self {
                hidden: vec![256, 256],
                activation: Activation::Relu,
                batch_size: 256,
                lr_actor: 1e-4,
                lr_critic: 1e-4,
                lr_alpha: 1e-4,
                tau: 0.005,
                update_interval: 1,
                entropy_placement: EntropyPlacement::InsideDiscount,
                actor_critic: ActorCritic::Min,
                target_actor: true,
                ..base
            },
            Algorithm::Td3 => Self {
                hidden: vec![400, 300],
                activation: Activation::Relu,
                batch_size: 100,
                tau: 0.005,
                update_interval: 2,
                exploration: ExplorationNoise::Gaussian { std: 0.1 },
                policy_smoothing: Some(PolicySmoothing { std: 0.2, clip: 0.5 }),
                ..base
            },
            Algorithm::Ddpg => Self {
                hidden: vec![200, 200],
                activation: Activation::Relu,
                batch_size: 64,
                lr_actor: 1e-4,
                lr_critic: 1e-3,
                tau: 0.001,
                update_interval: 1,
                exploration: ExplorationNoise::OrnsteinUhlenbeck { theta: 0.15, sigma: 0.2 },
                ..base
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let err = |m: &str| Err(Error::Config(format!("agent: {m}")));
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return err("hidden layer widths must be positive");
        }
        if self.batch_size == 0 || self.buffer_size == 0 || self.update_interval == 0 {
            return err("batch_size, buffer_size and update_interval must be positive");
        }
        if !(0.0..=1.0).contains(&self.tau) || !(0.0..=1.0).contains(&self.gamma) {
            return err("tau and gamma must lie in [0, 1]");
        }
        if [self.lr_actor, self.lr_critic, self.lr_alpha].iter().any(|l| !(*l > 0.0)) {
            return err("learning rates must be positive");
        }
        if self.algorithm.is_stochastic() && !(self.initial_alpha > 0.0) {
            return err("initial_alpha must be positive");
        }
        Ok(())
    }

    pub fn target_entropy_for(&self, act_dim: usize) -> f64 {
        self.target_entropy.unwrap_or(-(act_dim as f64))
    }
}
