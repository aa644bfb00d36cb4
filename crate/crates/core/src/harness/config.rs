use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::agents::{AgentConfig, Algorithm};
use crate::sliceenv::EnvConfig;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    /// 4 APs, up to 8 users, 5e4 steps.
    Desk,
    /// 20 APs, up to 50 users, 2e6 steps.
    Paper,
}

/// Everything a training run needs. Load with [`RunConfig::from_toml_str`]:
/// the `profile` and `algorithm` keys pick a preset and every other key
/// overrides it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub profile: Profile,
    pub algorithm: Algorithm,
    pub max_timesteps: u64,
    /// Uniform-random warmup steps before the policy acts and learns.
    pub start_timesteps: u64,
    /// Environment steps between evaluations and checkpoints.
    pub eval_interval: u64,
    /// Also evaluate the untrained policy at step 0.
    pub eval_at_start: bool,
    pub eval_episodes: usize,
    pub eval_best: usize,
    /// Environment steps per loss-summary record.
    pub log_interval: u64,
    /// Training steps per wall-clock measurement window.
    pub timing_window: u64,
    /// Store replay contents in checkpoints (needed for exact resume).
    pub checkpoint_buffer: bool,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
    pub agent: AgentConfig,
    pub env: EnvConfig,
}

impl RunConfig {
    pub fn preset(profile: Profile, algorithm: Algorithm) -> Self {
        let mut agent = AgentConfig::for_algorithm(algorithm);
        match profile {
            Profile::Desk => Self {
                profile,
                algorithm,
                max_timesteps: 50_000,
                start_timesteps: 10_000,
                eval_interval: 5_000,
                eval_at_start: true,
                eval_episodes: 5,
                eval_best: 3,
                log_interval: 1_000,
                timing_window: 50,
                checkpoint_buffer: true,
                seeds: vec![0, 1, 2],
                output_dir: PathBuf::from("runs"),
                agent: {
                    agent.batch_size = 64;
                    agent.buffer_size = 100_000;
                    agent
                },
                env: EnvConfig::desk(),
            },
            Profile::Paper => Self {
                profile,
                algorithm,
                max_timesteps: 2_000_000,
                start_timesteps: 10_000,
                eval_interval: 20_000,
                eval_at_start: false,
                eval_episodes: 5,
                eval_best: 3,
                log_interval: 10_000,
                timing_window: 50,
                checkpoint_buffer: true,
                seeds: vec![0, 1, 2],
                output_dir: PathBuf::from("runs"),
                agent,
                env: EnvConfig::paper(),
            },
        }
    }

    pub fn desk(algorithm: Algorithm) -> Self {
        Self::preset(Profile::Desk, algorithm)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let user: toml::Table = toml::from_str(text)?;
        let pick = |key: &str, default: &str| -> Result<String> {
            match user.get(key) {
                None => Ok(default.to_string()),
                Some(toml::Value::String(s)) => Ok(s.clone()),
                Some(v) => Err(Error::Config(format!("{key} must be a string, got {v}"))),
            }
        };
        let profile = match pick("profile", "desk")?.as_str() {
            "desk" => Profile::Desk,
            "paper" => Profile::Paper,
            p => return Err(Error::Config(format!("unknown profile {p:?}"))),
        };
        let algorithm: Algorithm = pick("algorithm", "tdsac")?.parse()?;
        let mut merged = toml::Table::try_from(Self::preset(profile, algorithm))
            .map_err(|e| Error::Config(e.to_string()))?;
        merge(&mut merged, user);
        let cfg: Self = merged.try_into()?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.env.validate()?;
        self.agent.validate()?;
        if self.agent.algorithm != self.algorithm {
            return Err(Error::Config(format!(
                "agent.algorithm = {} contradicts algorithm = {}",
                self.agent.algorithm, self.algorithm
            )));
        }
        if self.eval_best == 0 || self.eval_best > self.eval_episodes {
            return Err(Error::Config("need 1 <= eval_best <= eval_episodes".into()));
        }
        if self.max_timesteps < self.start_timesteps {
            return Err(Error::Config("max_timesteps must be >= start_timesteps".into()));
        }
        if self.eval_interval == 0 || self.log_interval == 0 || self.timing_window == 0 {
            return Err(Error::Config("eval_interval, log_interval and timing_window must be positive".into()));
        }
        Ok(())
    }
}

/// Recursively overlays `over` onto `base`; non-table values replace.
fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_desk_tdsac() {
        let cfg = RunConfig::from_toml_str("").unwrap();
        assert_eq!(cfg, RunConfig::desk(Algorithm::Tdsac));
        assert_eq!(cfg.agent.batch_size, 64);
        assert_eq!(cfg.env.radio.n_aps, 4);
    }

    #[test]
    fn overrides_merge_deeply() {
        let cfg = RunConfig::from_toml_str(
            "algorithm = \"td3\"\nmax_timesteps = 20000\n[agent]\ntau = 0.01\n[env.radio]\nn_aps = 3\n",
        )
        .unwrap();
        assert_eq!(cfg.algorithm, Algorithm::Td3);
        assert_eq!(cfg.agent.hidden, vec![400, 300]);
        assert_eq!(cfg.agent.tau, 0.01);
        assert_eq!(cfg.env.radio.n_aps, 3);
        assert_eq!(cfg.env.radio.n_users_max, 8);
        assert_eq!(cfg.max_timesteps, 20000);
    }

    #[test]
    fn round_trips_through_text() {
        for algorithm in Algorithm::ALL {
            for profile in [Profile::Desk, Profile::Paper] {
                let cfg = RunConfig::preset(profile, algorithm);
                assert_eq!(RunConfig::from_toml_str(&cfg.to_toml_string()).unwrap(), cfg);
            }
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(RunConfig::from_toml_str("bogus = 1"), Err(Error::Config(_))));
        assert!(matches!(RunConfig::from_toml_str("[agent]\nbogus = 1"), Err(Error::Config(_))));
        assert!(matches!(RunConfig::from_toml_str("eval_best = 6"), Err(Error::Config(_))));
        assert!(matches!(RunConfig::from_toml_str("algorithm = \"ppo\""), Err(Error::Config(_))));
        assert!(matches!(RunConfig::from_toml_str("max_timesteps = 5"), Err(Error::Config(_))));
        assert!(matches!(RunConfig::from_toml_str("[agent]\nalgorithm = \"sac\""), Err(Error::Config(_))));
        assert!(matches!(RunConfig::from_toml_str("= broken"), Err(Error::Config(_))));
    }
}
