//! Deterministic-policy baselines: TD3 (twin critics) and DDPG (one critic).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::common::{
    apply_gradient, column_slice, concat_rows, regress_critic, Diagnostics, UpdateCounters,
};
use super::config::{AgentConfig, Algorithm};
use super::noise::{smoothing_noise, NoiseProcess};
use super::replay::{Batch, ReplayBuffer};
use crate::codec::{ByteReader, ByteWriter};
use crate::tensorcore::{AdamState, Mlp};
use crate::{Error, Result};

/// `tanh`-bounded actor with a target copy and one or two critics.
#[derive(Clone, Debug)]
pub struct DeterministicAgent {
    cfg: AgentConfig,
    obs_dim: usize,
    act_dim: usize,
    actor: Mlp,
    actor_target: Mlp,
    critics: Vec<Mlp>,
    targets: Vec<Mlp>,
    actor_opt: AdamState,
    critic_opts: Vec<AdamState>,
    noise: NoiseProcess,
    rng: ChaCha8Rng,
    counters: UpdateCounters,
}

impl DeterministicAgent {
    pub fn new(cfg: AgentConfig, obs_dim: usize, act_dim: usize, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let n_critics = match cfg.algorithm {
            Algorithm::Td3 => 2,
            Algorithm::Ddpg => 1,
            a => return Err(Error::Config(format!("{a} is not a deterministic-policy algorithm"))),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut actor_sizes = vec![obs_dim];
        actor_sizes.extend(&cfg.hidden);
        actor_sizes.push(act_dim);
        let mut critic_sizes = vec![obs_dim + act_dim];
        critic_sizes.extend(&cfg.hidden);
        critic_sizes.push(1);
        let actor = Mlp::new(&actor_sizes, cfg.activation, cfg.actor_final_scale, &mut rng)?;
        let critics = (0..n_critics)
            .map(|_| Mlp::new(&critic_sizes, cfg.activation, 1.0, &mut rng))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            obs_dim,
            act_dim,
            actor_target: actor.clone(),
            actor_opt: AdamState::new(actor.n_params(), cfg.lr_actor),
            actor,
            targets: critics.clone(),
            critic_opts: critics.iter().map(|c| AdamState::new(c.n_params(), cfg.lr_critic)).collect(),
            critics,
            noise: NoiseProcess::new(cfg.exploration, act_dim),
            rng,
            counters: UpdateCounters::default(),
            cfg,
        })
    }

    pub fn config(&self) -> &AgentConfig {
        &self.cfg
    }

    pub fn counters(&self) -> UpdateCounters {
        self.counters
    }

    pub fn actor(&self) -> &Mlp {
        &self.actor
    }

    pub fn actor_target(&self) -> &Mlp {
        &self.actor_target
    }

    pub fn critics(&self) -> &[Mlp] {
        &self.critics
    }

    pub fn targets(&self) -> &[Mlp] {
        &self.targets
    }

    pub fn network_count(&self) -> usize {
        2 + 2 * self.critics.len()
    }

    pub fn all_finite(&self) -> bool {
        self.actor.all_finite()
            && self.actor_target.all_finite()
            && self.critics.iter().chain(&self.targets).all(Mlp::all_finite)
    }

    /// Restarts the exploration process (OU state) at an episode boundary.
    pub fn episode_reset(&mut self) {
        self.noise.reset();
    }

    pub fn act(&self, state: &[f64]) -> Vec<f64> {
        assert_eq!(state.len(), self.obs_dim, "state width");
        self.actor.forward(state).into_iter().map(f64::tanh).collect()
    }

    /// Policy output plus exploration noise when `explore`, clipped to `[-1, 1]`.
    pub fn select_action(&mut self, state: &[f64], explore: bool) -> Vec<f64> {
        let mut a = self.act(state);
        if explore {
            let eps = self.noise.sample(&mut self.rng);
            for (x, e) in a.iter_mut().zip(eps) {
                *x = (*x + e).clamp(-1.0, 1.0);
            }
        }
        a
    }

    pub fn compute_target(&mut self, batch: &Batch) -> Vec<f64> {
        let n = batch.size;
        let tape = self.actor_target.forward_batch(&batch.next_states, n);
        let mut next: Vec<f64> = tape.output().iter().map(|x| x.tanh()).collect();
        if let Some(s) = self.cfg.policy_smoothing {
            for a in &mut next {
                *a = (*a + smoothing_noise(s.std, s.clip, &mut self.rng)).clamp(-1.0, 1.0);
            }
        }
        let input = concat_rows(&batch.next_states, self.obs_dim, &next, self.act_dim);
        let qs: Vec<Vec<f64>> =
            self.targets.iter().map(|t| t.forward_batch(&input, n).output().to_vec()).collect();
        (0..n)
            .map(|i| {
                let q = qs.iter().map(|q| q[i]).fold(f64::INFINITY, f64::min);
                batch.rewards[i] + self.cfg.gamma * (1.0 - batch.dones[i]) * q
            })
            .collect()
    }

    /// Returns the loss per critic and the mean prediction of the first.
    pub fn critic_update(&mut self, batch: &Batch) -> (Vec<f64>, f64) {
        let y = self.compute_target(batch);
        let input = concat_rows(&batch.states, self.obs_dim, &batch.actions, self.act_dim);
        let mut losses = Vec::with_capacity(self.critics.len());
        let mut mean_q = 0.0;
        for (k, (c, o)) in self.critics.iter_mut().zip(&mut self.critic_opts).enumerate() {
            let (l, mq) = regress_critic(c, o, &input, &y, self.cfg.grad_clip);
            if k == 0 {
                mean_q = mq;
            }
            losses.push(l);
        }
        (losses, mean_q)
    }

    /// Ascends a critic through `a = tanh(actor(s))`. `critic` maps a
    /// `n x (obs_dim + act_dim)` input to `(Q, dQ/da)`.
    pub fn actor_step<F>(&mut self, states: &[f64], critic: F) -> f64
    where
        F: FnMut(&[f64]) -> (Vec<f64>, Vec<f64>),
    {
        actor_step(&mut self.actor, &mut self.actor_opt, self.obs_dim, self.cfg.grad_clip, states, critic)
    }

    /// Ascends the first critic.
    pub fn actor_update(&mut self, batch: &Batch) -> f64 {
        let (od, d) = (self.obs_dim, self.act_dim);
        let critic = &self.critics[0];
        let q = |input: &[f64]| {
            let n = input.len() / (od + d);
            let tape = critic.forward_batch(input, n);
            let g = critic.input_gradient(&tape, &vec![1.0; n]);
            (tape.output().to_vec(), column_slice(&g, od + d, od, d))
        };
        actor_step(&mut self.actor, &mut self.actor_opt, od, self.cfg.grad_clip, &batch.states, q)
    }

    pub fn polyak_update(&mut self, tau: f64) {
        self.actor_target.polyak_from(&self.actor, tau);
        for (t, c) in self.targets.iter_mut().zip(&self.critics) {
            t.polyak_from(c, tau);
        }
    }

    pub fn train_step(&mut self, buffer: &mut ReplayBuffer) -> Option<Diagnostics> {
        if buffer.len() < self.cfg.batch_size {
            log::debug!("replay holds {} < batch {}; update skipped", buffer.len(), self.cfg.batch_size);
            return None;
        }
        let batch = buffer.sample(self.cfg.batch_size);
        let (losses, mean_q) = self.critic_update(&batch);
        self.counters.critic += 1;
        let mut diag = Diagnostics {
            critic1_loss: losses[0],
            critic2_loss: losses.get(1).copied(),
            mean_q,
            ..Diagnostics::default()
        };
        if self.counters.critic.is_multiple_of(self.cfg.update_interval as u64) {
            diag.actor_loss = Some(self.actor_update(&batch));
            self.counters.actor += 1;
            self.polyak_update(self.cfg.tau);
            self.counters.target += 1;
        }
        Some(diag)
    }

    pub(crate) fn write(&self, w: &mut ByteWriter) {
        w.usize(self.obs_dim);
        w.usize(self.act_dim);
        self.actor.write(w);
        self.actor_target.write(w);
        w.usize(self.critics.len());
        for net in self.critics.iter().chain(&self.targets) {
            net.write(w);
        }
        self.actor_opt.write(w);
        for o in &self.critic_opts {
            o.write(w);
        }
        w.f64s(self.noise.state());
        w.rng(&self.rng);
        self.counters.write(w);
    }

    pub(crate) fn read(cfg: AgentConfig, r: &mut ByteReader) -> Result<Self> {
        let obs_dim = r.usize()?;
        let act_dim = r.usize()?;
        let actor = Mlp::read(r)?;
        let actor_target = Mlp::read(r)?;
        let n = r.usize()?;
        if !(1..=2).contains(&n) {
            return Err(Error::Checkpoint(format!("implausible critic count {n}")));
        }
        let critics = (0..n).map(|_| Mlp::read(r)).collect::<Result<Vec<_>>>()?;
        let targets = (0..n).map(|_| Mlp::read(r)).collect::<Result<Vec<_>>>()?;
        let actor_opt = AdamState::read(r)?;
        let critic_opts = (0..n).map(|_| AdamState::read(r)).collect::<Result<Vec<_>>>()?;
        let noise_state = r.f64s()?;
        let rng = r.rng()?;
        let counters = UpdateCounters::read(r)?;
        if actor.input_dim() != obs_dim
            || actor.output_dim() != act_dim
            || noise_state.len() != act_dim
            || critics.iter().chain(&targets).any(|c| c.input_dim() != obs_dim + act_dim)
        {
            return Err(Error::Checkpoint("deterministic agent shapes are inconsistent".into()));
        }
        let mut noise = NoiseProcess::new(cfg.exploration, act_dim);
        noise.set_state(noise_state);
        Ok(Self {
            cfg,
            obs_dim,
            act_dim,
            actor,
            actor_target,
            critics,
            targets,
            actor_opt,
            critic_opts,
            noise,
            rng,
            counters,
        })
    }
}

fn actor_step<F>(
    actor: &mut Mlp,
    opt: &mut AdamState,
    obs_dim: usize,
    clip: Option<f64>,
    states: &[f64],
    mut critic: F,
) -> f64
where
    F: FnMut(&[f64]) -> (Vec<f64>, Vec<f64>),
{
    let n = states.len() / obs_dim;
    let tape = actor.forward_batch(states, n);
    let actions: Vec<f64> = tape.output().iter().map(|x| x.tanh()).collect();
    let input = concat_rows(states, obs_dim, &actions, actor.output_dim());
    let (q, dq_da) = critic(&input);
    let inv = 1.0 / n as f64;
    let d_out: Vec<f64> = dq_da.iter().zip(&actions).map(|(g, a)| -g * (1.0 - a * a) * inv).collect();
    apply_gradient(actor, opt, &tape, &d_out, clip);
    -q.iter().sum::<f64>() * inv
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(algorithm: Algorithm) -> AgentConfig {
        AgentConfig { hidden: vec![8, 8], batch_size: 4, ..AgentConfig::for_algorithm(algorithm) }
    }

    #[test]
    fn network_counts() {
        assert_eq!(DeterministicAgent::new(tiny(Algorithm::Ddpg), 3, 2, 0).unwrap().network_count(), 4);
        assert_eq!(DeterministicAgent::new(tiny(Algorithm::Td3), 3, 2, 0).unwrap().network_count(), 6);
        assert!(DeterministicAgent::new(tiny(Algorithm::Sac), 3, 2, 0).is_err());
    }

    #[test]
    fn target_takes_minimum_of_twin_critics() {
        let cfg = AgentConfig { policy_smoothing: None, ..tiny(Algorithm::Td3) };
        let mut agent = DeterministicAgent::new(cfg, 2, 1, 0).unwrap();
        for (t, c) in agent.targets.iter_mut().zip([1.0, 3.0]) {
            t.params_mut().iter_mut().for_each(|p| *p = 0.0);
            let last = t.n_layers() - 1;
            t.layer_mut(last).1[0] = c;
        }
        let b = Batch {
            size: 2,
            states: vec![0.0; 4],
            actions: vec![0.0; 2],
            rewards: vec![0.0; 2],
            next_states: vec![0.3, -0.2, 1.0, 0.5],
            dones: vec![0.0, 1.0],
        };
        assert_eq!(agent.compute_target(&b), vec![0.99, 0.0]);
    }

    #[test]
    fn exploration_stays_in_box() {
        let mut agent = DeterministicAgent::new(tiny(Algorithm::Ddpg), 2, 3, 1).unwrap();
        for k in 0..500 {
            let a = agent.select_action(&[k as f64 * 0.01, 1.0], true);
            assert!(a.iter().all(|x| (-1.0..=1.0).contains(x)));
        }
        let s = [0.1, 0.2];
        assert_eq!(agent.select_action(&s, false), agent.act(&s));
    }

    #[test]
    fn td3_delays_actor_and_targets() {
        let mut agent = DeterministicAgent::new(tiny(Algorithm::Td3), 2, 1, 2).unwrap();
        let mut buf = ReplayBuffer::new(32, 2, 1, 2);
        for k in 0..8 {
            buf.push(&[k as f64, 0.0], &[0.2], 0.1, &[0.0, 1.0], false);
        }
        let targets_before = agent.targets.clone();
        agent.train_step(&mut buf).unwrap();
        assert_eq!(agent.targets, targets_before);
        for _ in 0..6 {
            agent.train_step(&mut buf).unwrap();
        }
        let c = agent.counters();
        assert_eq!((c.critic, c.actor, c.target), (7, 3, 3));
    }

    #[test]
    fn hill_climbs_quadratic_critic() {
        for algorithm in [Algorithm::Td3, Algorithm::Ddpg] {
            let cfg = AgentConfig { lr_actor: 1e-3, ..tiny(algorithm) };
            let mut agent = DeterministicAgent::new(cfg, 1, 1, 4).unwrap();
            let target = 0.5f64.tanh();
            let states = vec![1.0; 8];
            let start = (agent.act(&[1.0])[0] - target).abs();
            for _ in 0..2000 {
                agent.actor_step(&states, |input| {
                    let acts: Vec<f64> = input.chunks_exact(2).map(|r| r[1]).collect();
                    let q = acts.iter().map(|a| -(a - target).powi(2)).collect();
                    let g = acts.iter().map(|a| -2.0 * (a - target)).collect();
                    (q, g)
                });
            }
            let end = (agent.act(&[1.0])[0] - target).abs();
            assert!(end < 0.02 && end < start, "{algorithm}: {start} -> {end}");
        }
    }

    #[test]
    fn checkpoint_round_trip() {
        let mut agent = DeterministicAgent::new(tiny(Algorithm::Ddpg), 2, 1, 6).unwrap();
        agent.select_action(&[0.0, 0.0], true);
        let mut w = ByteWriter::new();
        agent.write(&mut w);
        let bytes = w.into_bytes();
        let mut back = DeterministicAgent::read(agent.cfg.clone(), &mut ByteReader::new(&bytes)).unwrap();
        assert_eq!(agent.select_action(&[0.3, 0.1], true), back.select_action(&[0.3, 0.1], true));
    }
}
