use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::metrics::TimingRecord;
use crate::agents::{Agent, Algorithm};
use crate::parallel::Exec;
use crate::sliceenv::{EnvConfig, SliceEnv};
use crate::{Error, Result};

/// Mean of the `best` largest values.
pub fn best_of(returns: &[f64], best: usize) -> f64 {
    assert!(best >= 1 && best <= returns.len(), "need 1 <= best <= episodes");
    let mut sorted = returns.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    sorted[..best].iter().sum::<f64>() / best as f64
}

/// Fixed evaluation seeds of a run, identical at every evaluation point.
pub fn eval_seeds(run_seed: u64, episodes: usize) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(run_seed);
    rng.set_stream(1);
    (0..episodes).map(|_| rng.random()).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub returns: Vec<f64>,
    pub score: f64,
}

/// Runs one full episode per seed; `make_policy(k)` builds the policy of episode `k`.
fn run_episodes<F, P>(env_cfg: &EnvConfig, seeds: &[u64], best: usize, exec: Exec, make_policy: F) -> Result<EvalReport>
where
    F: Fn(usize) -> P + Sync,
    P: FnMut(&[f64], &SliceEnv) -> Vec<f64>,
{
    let template = SliceEnv::new(env_cfg.clone())?;
    let episode = |k: usize| -> Result<f64> {
        let mut env = template.clone();
        let mut policy = make_policy(k);
        let mut obs = env.reset(seeds[k]);
        let mut total = 0.0;
        loop {
            let a = policy(&obs, &env);
            let out = env.step(&a)?;
            total += out.reward;
            obs = out.observation;
            if out.done {
                return Ok(total);
            }
        }
    };
    let returns = exec.map_range(seeds.len(), episode).into_iter().collect::<Result<Vec<_>>>()?;
    if returns.len() < best {
        return Err(Error::Config("fewer evaluation episodes than best".into()));
    }
    Ok(EvalReport { score: best_of(&returns, best), returns })
}

/// Deterministic-policy evaluation. The agent is borrowed immutably, so
/// neither its parameters nor any replay buffer can change.
pub fn evaluate(agent: &Agent, env_cfg: &EnvConfig, seeds: &[u64], best: usize, exec: Exec) -> Result<EvalReport> {
    run_episodes(env_cfg, seeds, best, exec, |_| |obs: &[f64], _: &SliceEnv| agent.act(obs))
}

/// The same protocol with uniform-random actions.
pub fn random_baseline(env_cfg: &EnvConfig, seeds: &[u64], best: usize, action_seed: u64, exec: Exec) -> Result<EvalReport> {
    run_episodes(env_cfg, seeds, best, exec, |k| {
        let mut rng = ChaCha8Rng::seed_from_u64(action_seed);
        rng.set_stream(2 + k as u64);
        move |_: &[f64], env: &SliceEnv| env.sample_action(&mut rng)
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct WallclockRow {
    pub algorithm: Algorithm,
    pub windows: usize,
    pub mean_s: f64,
    pub std_s: f64,
}

/// Mean and spread of seconds per timing window over the last `last`
/// windows of every run of each algorithm.
pub fn report_wallclock(runs: &[(Algorithm, Vec<TimingRecord>)], last: usize) -> Vec<WallclockRow> {
    let mut algos: Vec<Algorithm> = runs.iter().map(|(a, _)| *a).collect();
    algos.sort();
    algos.dedup();
    algos
        .into_iter()
        .filter_map(|algorithm| {
            let xs: Vec<f64> = runs
                .iter()
                .filter(|(a, _)| *a == algorithm)
                .flat_map(|(_, t)| t[t.len().saturating_sub(last)..].iter().map(|r| r.seconds))
                .collect();
            if xs.is_empty() {
                return None;
            }
            let n = xs.len() as f64;
            let mean_s = xs.iter().sum::<f64>() / n;
            let std_s = (xs.iter().map(|x| (x - mean_s).powi(2)).sum::<f64>() / n).sqrt();
            Some(WallclockRow { algorithm, windows: xs.len(), mean_s, std_s })
        })
        .collect()
}

pub fn format_wallclock(rows: &[WallclockRow]) -> String {
    let mut out = String::from("algorithm  windows  mean_s_per_window  std_s\n");
    for r in rows {
        out.push_str(&format!("{:<10} {:>7}  {:>17.6}  {:.6}\n", r.algorithm, r.windows, r.mean_s, r.std_s));
    }
    out
}
