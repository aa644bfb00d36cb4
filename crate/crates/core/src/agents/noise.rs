use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

/// Exploration noise added to deterministic policies.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExplorationNoise {
    None,
    Gaussian { std: f64 },
    OrnsteinUhlenbeck { theta: f64, sigma: f64 },
}

/// Stateful noise generator; the OU process keeps its last value.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseProcess {
    kind: ExplorationNoise,
    state: Vec<f64>,
}

impl NoiseProcess {
    pub fn new(kind: ExplorationNoise, dim: usize) -> Self {
        Self { kind, state: vec![0.0; dim] }
    }

    pub fn reset(&mut self) {
        self.state.iter_mut().for_each(|x| *x = 0.0);
    }

    pub fn state(&self) -> &[f64] {
        &self.state
    }

    pub fn set_state(&mut self, state: Vec<f64>) {
        assert_eq!(state.len(), self.state.len());
        self.state = state;
    }

    pub fn sample<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Vec<f64> {
        match self.kind {
            ExplorationNoise::None => vec![0.0; self.state.len()],
            ExplorationNoise::Gaussian { std } => (0..self.state.len())
                .map(|_| std * Distribution::<f64>::sample(&StandardNormal, rng))
                .collect(),
            ExplorationNoise::OrnsteinUhlenbeck { theta, sigma } => {
                for x in &mut self.state {
                    let z: f64 = StandardNormal.sample(rng);
                    *x += -theta * *x + sigma * z;
                }
                self.state.clone()
            }
        }
    }
}

/// Target-policy smoothing noise `clip(N(0, std), -clip, clip)`.
pub fn smoothing_noise<R: Rng + ?Sized>(std: f64, clip: f64, rng: &mut R) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    (std * z).clamp(-clip, clip)
}
