//! Stochastic-policy agents: TDSAC and the SAC baseline.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::common::{
    apply_gradient, column_slice, concat_rows, regress_critic, soft_target, Diagnostics,
    UpdateCounters,
};
use super::config::{ActorCritic, AgentConfig, EntropyPlacement};
use super::replay::{Batch, ReplayBuffer};
use crate::codec::{ByteReader, ByteWriter};
use crate::tensorcore::{
    reparam_grads, sample_squashed_gaussian, AdamState, Mlp, SquashedSample, LOG_STD_MAX,
    LOG_STD_MIN,
};
use crate::{Error, Result};

/// Squashed-Gaussian actor, twin critics with Polyak targets, and a learned
/// temperature kept in the log domain.
#[derive(Clone, Debug)]
pub struct SoftAgent {
    cfg: AgentConfig,
    obs_dim: usize,
    act_dim: usize,
    actor: Mlp,
    actor_target: Option<Mlp>,
    critics: [Mlp; 2],
    targets: [Mlp; 2],
    actor_opt: AdamState,
    critic_opts: [AdamState; 2],
    log_alpha: f64,
    alpha_opt: AdamState,
    target_entropy: f64,
    rng: ChaCha8Rng,
    counters: UpdateCounters,
}

/// Actor pass over a batch with the noise held fixed.
struct PolicyPass {
    tape: crate::tensorcore::Tape,
    samples: Vec<SquashedSample>,
    log_stds: Vec<Vec<f64>>,
    /// Whether each log-std entry sat inside the clamp range.
    unclamped: Vec<Vec<bool>>,
}

impl PolicyPass {
    fn actions(&self) -> Vec<f64> {
        self.samples.iter().flat_map(|s| s.action.iter().copied()).collect()
    }

    fn log_probs(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.log_prob).collect()
    }
}

/// Mean gradient of the temperature loss with respect to `log_alpha`.
pub fn temperature_gradient(log_pis: &[f64], target_entropy: f64) -> f64 {
    log_pis.iter().map(|lp| -lp - target_entropy).sum::<f64>() / log_pis.len() as f64
}

impl SoftAgent {
    pub fn new(cfg: AgentConfig, obs_dim: usize, act_dim: usize, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut actor_sizes = vec![obs_dim];
        actor_sizes.extend(&cfg.hidden);
        actor_sizes.push(2 * act_dim);
        let mut critic_sizes = vec![obs_dim + act_dim];
        critic_sizes.extend(&cfg.hidden);
        critic_sizes.push(1);
        let actor = Mlp::new(&actor_sizes, cfg.activation, cfg.actor_final_scale, &mut rng)?;
        let c1 = Mlp::new(&critic_sizes, cfg.activation, 1.0, &mut rng)?;
        let c2 = Mlp::new(&critic_sizes, cfg.activation, 1.0, &mut rng)?;
        let actor_opt = AdamState::new(actor.n_params(), cfg.lr_actor);
        let critic_opts = [
            AdamState::new(c1.n_params(), cfg.lr_critic),
            AdamState::new(c2.n_params(), cfg.lr_critic),
        ];
        Ok(Self {
            obs_dim,
            act_dim,
            actor_target: cfg.target_actor.then(|| actor.clone()),
            targets: [c1.clone(), c2.clone()],
            critics: [c1, c2],
            actor,
            actor_opt,
            critic_opts,
            log_alpha: cfg.initial_alpha.ln(),
            alpha_opt: AdamState::new(1, cfg.lr_alpha),
            target_entropy: cfg.target_entropy_for(act_dim),
            rng,
            counters: UpdateCounters::default(),
            cfg,
        })
    }

    pub fn config(&self) -> &AgentConfig {
        &self.cfg
    }

    pub fn alpha(&self) -> f64 {
        self.log_alpha.exp()
    }

    pub fn log_alpha(&self) -> f64 {
        self.log_alpha
    }

    pub fn target_entropy(&self) -> f64 {
        self.target_entropy
    }

    pub fn counters(&self) -> UpdateCounters {
        self.counters
    }

    pub fn actor(&self) -> &Mlp {
        &self.actor
    }

    pub fn actor_mut(&mut self) -> &mut Mlp {
        &mut self.actor
    }

    pub fn critics(&self) -> &[Mlp; 2] {
        &self.critics
    }

    pub fn critics_mut(&mut self) -> &mut [Mlp; 2] {
        &mut self.critics
    }

    pub fn targets(&self) -> &[Mlp; 2] {
        &self.targets
    }

    pub fn targets_mut(&mut self) -> &mut [Mlp; 2] {
        &mut self.targets
    }

    pub fn network_count(&self) -> usize {
        5 + usize::from(self.actor_target.is_some())
    }

    pub fn all_finite(&self) -> bool {
        self.actor.all_finite()
            && self.actor_target.as_ref().is_none_or(Mlp::all_finite)
            && self.critics.iter().chain(&self.targets).all(Mlp::all_finite)
            && self.log_alpha.is_finite()
    }

    fn draw_noise(&mut self, n: usize) -> Vec<f64> {
        (0..n).map(|_| StandardNormal.sample(&mut self.rng)).collect()
    }

    fn policy_pass(net: &Mlp, states: &[f64], n: usize, xi: &[f64]) -> PolicyPass {
        let d = net.output_dim() / 2;
        let tape = net.forward_batch(states, n);
        let mut samples = Vec::with_capacity(n);
        let mut log_stds = Vec::with_capacity(n);
        let mut unclamped = Vec::with_capacity(n);
        for (i, row) in tape.output().chunks_exact(2 * d).enumerate() {
            let (mean, raw) = row.split_at(d);
            let ls: Vec<f64> = raw.iter().map(|x| x.clamp(LOG_STD_MIN, LOG_STD_MAX)).collect();
            unclamped.push(raw.iter().map(|x| (LOG_STD_MIN..=LOG_STD_MAX).contains(x)).collect());
            samples.push(sample_squashed_gaussian(mean, &ls, &xi[i * d..(i + 1) * d]));
            log_stds.push(ls);
        }
        PolicyPass { tape, samples, log_stds, unclamped }
    }

    /// Reparameterized draw when `explore`, else `tanh(mean)`.
    pub fn select_action(&mut self, state: &[f64], explore: bool) -> Vec<f64> {
        assert_eq!(state.len(), self.obs_dim, "state width");
        if explore {
            let xi = self.draw_noise(self.act_dim);
            Self::policy_pass(&self.actor, state, 1, &xi).samples.remove(0).action
        } else {
            self.act(state)
        }
    }

    pub fn act(&self, state: &[f64]) -> Vec<f64> {
        assert_eq!(state.len(), self.obs_dim, "state width");
        let out = self.actor.forward(state);
        out[..self.act_dim].iter().map(|m| m.tanh()).collect()
    }

    /// Bootstrapped targets with the next-action noise `xi` supplied
    /// (`batch x act_dim`).
    pub fn compute_target_with_noise(&self, batch: &Batch, xi: &[f64]) -> Vec<f64> {
        let n = batch.size;
        let policy = self.actor_target.as_ref().unwrap_or(&self.actor);
        let pass = Self::policy_pass(policy, &batch.next_states, n, xi);
        let input = concat_rows(&batch.next_states, self.obs_dim, &pass.actions(), self.act_dim);
        let q1 = self.targets[0].forward_batch(&input, n);
        let q2 = self.targets[1].forward_batch(&input, n);
        let alpha = self.alpha();
        let inside = self.cfg.entropy_placement == EntropyPlacement::InsideDiscount;
        (0..n)
            .map(|i| {
                soft_target(
                    batch.rewards[i],
                    batch.dones[i],
                    q1.output()[i],
                    q2.output()[i],
                    pass.samples[i].log_prob,
                    self.cfg.gamma,
                    alpha,
                    inside,
                )
            })
            .collect()
    }

    pub fn compute_target(&mut self, batch: &Batch) -> Vec<f64> {
        let xi = self.draw_noise(batch.size * self.act_dim);
        self.compute_target_with_noise(batch, &xi)
    }

    /// One ADAM step on each critic; returns `(J_Q1, J_Q2, mean Q1)`.
    pub fn critic_update(&mut self, batch: &Batch) -> (f64, f64, f64) {
        let y = self.compute_target(batch);
        self.critic_update_towards(batch, &y)
    }

    pub fn critic_update_towards(&mut self, batch: &Batch, y: &[f64]) -> (f64, f64, f64) {
        let input = concat_rows(&batch.states, self.obs_dim, &batch.actions, self.act_dim);
        let clip = self.cfg.grad_clip;
        let [c1, c2] = &mut self.critics;
        let [o1, o2] = &mut self.critic_opts;
        let (l1, mq) = regress_critic(c1, o1, &input, y, clip);
        let (l2, _) = regress_critic(c2, o2, &input, y, clip);
        (l1, l2, mq)
    }

    /// Actor step against an arbitrary critic. `critic` maps a
    /// `n x (obs_dim + act_dim)` input to `(Q, dQ/da)`.
    /// Returns the loss and the sampled log-probabilities.
    pub fn actor_step<F>(&mut self, states: &[f64], xi: &[f64], critic: F) -> (f64, Vec<f64>)
    where
        F: FnMut(&[f64]) -> (Vec<f64>, Vec<f64>),
    {
        let alpha = self.alpha();
        let clip = self.cfg.grad_clip;
        actor_step(&mut self.actor, &mut self.actor_opt, self.obs_dim, alpha, clip, states, xi, critic)
    }

    /// Minimizes `E[alpha log pi - Q]` through the reparameterized action.
    pub fn actor_update(&mut self, batch: &Batch) -> (f64, Vec<f64>) {
        let xi = self.draw_noise(batch.size * self.act_dim);
        let (od, d) = (self.obs_dim, self.act_dim);
        let use_min = self.cfg.actor_critic == ActorCritic::Min;
        let alpha = self.alpha();
        let critics = &self.critics;
        let critic = |input: &[f64]| {
            let n = input.len() / (od + d);
            let t1 = critics[0].forward_batch(input, n);
            let ones = vec![1.0; n];
            if !use_min {
                let g = critics[0].input_gradient(&t1, &ones);
                return (t1.output().to_vec(), column_slice(&g, od + d, od, d));
            }
            let t2 = critics[1].forward_batch(input, n);
            let first: Vec<bool> = t1.output().iter().zip(t2.output()).map(|(a, b)| a <= b).collect();
            let q = t1.output().iter().zip(t2.output()).map(|(a, b)| a.min(*b)).collect();
            let w1: Vec<f64> = first.iter().map(|&f| f64::from(u8::from(f))).collect();
            let w2: Vec<f64> = first.iter().map(|&f| f64::from(u8::from(!f))).collect();
            let g1 = critics[0].input_gradient(&t1, &w1);
            let g2 = critics[1].input_gradient(&t2, &w2);
            let g: Vec<f64> = g1.iter().zip(&g2).map(|(a, b)| a + b).collect();
            (q, column_slice(&g, od + d, od, d))
        };
        let clip = self.cfg.grad_clip;
        actor_step(&mut self.actor, &mut self.actor_opt, od, alpha, clip, &batch.states, &xi, critic)
    }

    /// One ADAM step on `log_alpha`; returns `J(alpha)` before the step.
    pub fn temperature_update(&mut self, log_pis: &[f64]) -> f64 {
        let alpha = self.alpha();
        let h = self.target_entropy;
        let loss = log_pis.iter().map(|lp| -alpha * (lp + h)).sum::<f64>() / log_pis.len() as f64;
        let g = temperature_gradient(log_pis, h);
        let mut p = [self.log_alpha];
        self.alpha_opt.step(&mut p, &[g]);
        self.log_alpha = p[0];
        loss
    }

    pub fn polyak_update(&mut self, tau: f64) {
        for (t, c) in self.targets.iter_mut().zip(&self.critics) {
            t.polyak_from(c, tau);
        }
        if let Some(t) = &mut self.actor_target {
            t.polyak_from(&self.actor, tau);
        }
    }

    /// Critic update every call; actor, temperature and targets every
    /// `update_interval` critic updates. `None` while the buffer is smaller
    /// than a batch.
    pub fn train_step(&mut self, buffer: &mut ReplayBuffer) -> Option<Diagnostics> {
        if buffer.len() < self.cfg.batch_size {
            log::debug!("replay holds {} < batch {}; update skipped", buffer.len(), self.cfg.batch_size);
            return None;
        }
        let batch = buffer.sample(self.cfg.batch_size);
        let (l1, l2, mean_q) = self.critic_update(&batch);
        self.counters.critic += 1;
        let mut diag = Diagnostics {
            critic1_loss: l1,
            critic2_loss: Some(l2),
            mean_q,
            alpha: Some(self.alpha()),
            ..Diagnostics::default()
        };
        if self.counters.critic.is_multiple_of(self.cfg.update_interval as u64) {
            let (actor_loss, log_pis) = self.actor_update(&batch);
            self.counters.actor += 1;
            diag.actor_loss = Some(actor_loss);
            diag.alpha_loss = Some(self.temperature_update(&log_pis));
            self.counters.temperature += 1;
            self.polyak_update(self.cfg.tau);
            self.counters.target += 1;
            diag.alpha = Some(self.alpha());
        }
        Some(diag)
    }

    pub(crate) fn write(&self, w: &mut ByteWriter) {
        w.usize(self.obs_dim);
        w.usize(self.act_dim);
        self.actor.write(w);
        w.bool(self.actor_target.is_some());
        if let Some(t) = &self.actor_target {
            t.write(w);
        }
        for net in self.critics.iter().chain(&self.targets) {
            net.write(w);
        }
        self.actor_opt.write(w);
        for o in &self.critic_opts {
            o.write(w);
        }
        w.f64(self.log_alpha);
        self.alpha_opt.write(w);
        w.f64(self.target_entropy);
        w.rng(&self.rng);
        self.counters.write(w);
    }

    pub(crate) fn read(cfg: AgentConfig, r: &mut ByteReader) -> Result<Self> {
        let obs_dim = r.usize()?;
        let act_dim = r.usize()?;
        let actor = Mlp::read(r)?;
        let actor_target = if r.bool()? { Some(Mlp::read(r)?) } else { None };
        let critics = [Mlp::read(r)?, Mlp::read(r)?];
        let targets = [Mlp::read(r)?, Mlp::read(r)?];
        let actor_opt = AdamState::read(r)?;
        let critic_opts = [AdamState::read(r)?, AdamState::read(r)?];
        let log_alpha = r.f64()?;
        let alpha_opt = AdamState::read(r)?;
        let target_entropy = r.f64()?;
        let rng = r.rng()?;
        let counters = UpdateCounters::read(r)?;
        if actor.input_dim() != obs_dim
            || actor.output_dim() != 2 * act_dim
            || critics.iter().chain(&targets).any(|c| c.input_dim() != obs_dim + act_dim)
            || actor_opt.len() != actor.n_params()
        {
            return Err(Error::Checkpoint("soft agent shapes are inconsistent".into()));
        }
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
            log_alpha,
            alpha_opt,
            target_entropy,
            rng,
            counters,
        })
    }
}

#[allow(clippy::too_many_arguments)]
fn actor_step<F>(
    actor: &mut Mlp,
    opt: &mut AdamState,
    obs_dim: usize,
    alpha: f64,
    clip: Option<f64>,
    states: &[f64],
    xi: &[f64],
    mut critic: F,
) -> (f64, Vec<f64>)
where
    F: FnMut(&[f64]) -> (Vec<f64>, Vec<f64>),
{
    let d = actor.output_dim() / 2;
    let n = states.len() / obs_dim;
    let pass = SoftAgent::policy_pass(actor, states, n, xi);
    let input = concat_rows(states, obs_dim, &pass.actions(), d);
    let (q, dq_da) = critic(&input);
    let inv = 1.0 / n as f64;
    let mut loss = 0.0;
    let mut d_out = Vec::with_capacity(n * 2 * d);
    for i in 0..n {
        let s = &pass.samples[i];
        loss += (alpha * s.log_prob - q[i]) * inv;
        let d_action: Vec<f64> = dq_da[i * d..(i + 1) * d].iter().map(|g| -g * inv).collect();
        let (dm, mut dls) =
            reparam_grads(s, &pass.log_stds[i], &xi[i * d..(i + 1) * d], &d_action, alpha * inv);
        for (g, free) in dls.iter_mut().zip(&pass.unclamped[i]) {
            if !free {
                *g = 0.0;
            }
        }
        d_out.extend(dm);
        d_out.extend(dls);
    }
    apply_gradient(actor, opt, &pass.tape, &d_out, clip);
    (loss, pass.log_probs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::config::Algorithm;

    fn tiny(algorithm: Algorithm) -> AgentConfig {
        AgentConfig {
            hidden: vec![8, 8],
            batch_size: 4,
            ..AgentConfig::for_algorithm(algorithm)
        }
    }

    fn set_constant(net: &mut Mlp, c: f64) {
        net.params_mut().iter_mut().for_each(|p| *p = 0.0);
        let last = net.n_layers() - 1;
        net.layer_mut(last).1[0] = c;
    }

    fn batch(n: usize, od: usize, ad: usize) -> Batch {
        Batch {
            size: n,
            states: (0..n * od).map(|k| (k as f64 * 0.37).sin()).collect(),
            actions: (0..n * ad).map(|k| (k as f64 * 0.91).cos() * 0.9).collect(),
            rewards: (0..n).map(|k| 0.1 * k as f64).collect(),
            next_states: (0..n * od).map(|k| (k as f64 * 0.53).cos()).collect(),
            dones: vec![0.0; n],
        }
    }

    #[test]
    fn target_uses_smaller_constant_critic() {
        let mut agent = SoftAgent::new(tiny(Algorithm::Tdsac), 3, 2, 1).unwrap();
        set_constant(&mut agent.targets[0], 1.0);
        set_constant(&mut agent.targets[1], 3.0);
        agent.log_alpha = f64::NEG_INFINITY;
        let mut b = batch(5, 3, 2);
        b.rewards = vec![0.0; 5];
        for y in agent.compute_target(&b) {
            assert!((y - 0.99).abs() < 1e-15, "{y}");
        }
    }

    #[test]
    fn eval_action_is_deterministic_and_near_zero_at_start() {
        let mut agent = SoftAgent::new(tiny(Algorithm::Tdsac), 4, 3, 9).unwrap();
        let s = [0.2, -0.4, 0.9, 0.0];
        let a = agent.select_action(&s, false);
        assert_eq!(a, agent.select_action(&s, false));
        assert!(a.iter().all(|x| x.abs() < 0.05), "{a:?}");
        let mut twin = SoftAgent::new(tiny(Algorithm::Tdsac), 4, 3, 9).unwrap();
        assert_eq!(agent.select_action(&s, true), twin.select_action(&s, true));
    }

    #[test]
    fn critic_converges_on_frozen_transition() {
        let mut agent = SoftAgent::new(tiny(Algorithm::Tdsac), 3, 2, 4).unwrap();
        let b = batch(1, 3, 2);
        let y = [0.8];
        let mut last = f64::INFINITY;
        for _ in 0..2000 {
            last = agent.critic_update_towards(&b, &y).0;
        }
        let input = concat_rows(&b.states, 3, &b.actions, 2);
        let q = agent.critics[0].forward(&input)[0];
        assert!((q - 0.8).powi(2) < 1e-3, "q = {q}, last loss {last}");
    }

    #[test]
    fn exact_critic_is_left_unchanged() {
        let mut agent = SoftAgent::new(tiny(Algorithm::Tdsac), 2, 1, 0).unwrap();
        set_constant(&mut agent.critics[0], 0.5);
        set_constant(&mut agent.critics[1], 0.5);
        let before = agent.critics.clone();
        let (l1, l2, _) = agent.critic_update_towards(&batch(3, 2, 1), &[0.5; 3]);
        assert_eq!((l1, l2), (0.0, 0.0));
        assert_eq!(agent.critics, before);
    }

    #[test]
    fn constant_critic_without_entropy_gives_no_actor_gradient() {
        let mut agent = SoftAgent::new(tiny(Algorithm::Tdsac), 2, 2, 3).unwrap();
        agent.log_alpha = f64::NEG_INFINITY;
        let before = agent.actor.clone();
        let b = batch(4, 2, 2);
        let xi = vec![0.3; 8];
        agent.actor_step(&b.states, &xi, |input| (vec![1.0; input.len() / 4], vec![0.0; input.len() / 2]));
        assert_eq!(agent.actor, before);
    }

    #[test]
    fn temperature_gradient_is_sample_mean() {
        let lp = [0.3, -1.2, 2.0, 0.5];
        let h = -2.0;
        let expect = ((-0.3 + 2.0) + (1.2 + 2.0) + (-2.0 + 2.0) + (-0.5 + 2.0)) / 4.0;
        assert!((temperature_gradient(&lp, h) - expect).abs() < 1e-15);
    }

    #[test]
    fn temperature_follows_entropy_gap() {
        let mut agent = SoftAgent::new(tiny(Algorithm::Tdsac), 2, 2, 3).unwrap();
        let h = agent.target_entropy;
        assert_eq!(h, -2.0);
        let a0 = agent.alpha();
        // entropy exactly at target
        agent.temperature_update(&[-h, -h]);
        assert_eq!(agent.alpha(), a0);
        // entropy below target: log pi large
        agent.temperature_update(&[5.0, 4.0]);
        assert!(agent.alpha() > a0);
        let a1 = agent.alpha();
        agent.temperature_update(&[-9.0, -8.0]);
        assert!(agent.alpha() < a1);
        assert!(agent.alpha() > 0.0);
    }

    #[test]
    fn polyak_extremes() {
        let mut agent = SoftAgent::new(tiny(Algorithm::Sac), 2, 1, 3).unwrap();
        agent.critics[0].params_mut()[0] += 1.0;
        let frozen = agent.targets.clone();
        agent.polyak_update(0.0);
        assert_eq!(agent.targets, frozen);
        agent.polyak_update(1.0);
        assert_eq!(agent.targets, agent.critics);
        assert_eq!(agent.actor_target.as_ref(), Some(&agent.actor));
    }

    #[test]
    fn delayed_update_counts() {
        let mut agent = SoftAgent::new(tiny(Algorithm::Tdsac), 2, 1, 5).unwrap();
        let mut buf = ReplayBuffer::new(64, 2, 1, 5);
        assert!(agent.train_step(&mut buf).is_none());
        for k in 0..10 {
            buf.push(&[k as f64, 1.0], &[0.1], 0.0, &[1.0, 0.0], false);
        }
        for _ in 0..101 {
            agent.train_step(&mut buf).unwrap();
        }
        let c = agent.counters();
        assert_eq!((c.critic, c.actor, c.temperature, c.target), (101, 50, 50, 50));
    }

    #[test]
    fn network_counts() {
        assert_eq!(SoftAgent::new(tiny(Algorithm::Tdsac), 2, 1, 0).unwrap().network_count(), 5);
        assert_eq!(SoftAgent::new(tiny(Algorithm::Sac), 2, 1, 0).unwrap().network_count(), 6);
    }

    #[test]
    fn hill_climbs_quadratic_critic() {
        let cfg = AgentConfig { initial_alpha: 1e-9, ..tiny(Algorithm::Tdsac) };
        let mut agent = SoftAgent::new(cfg, 1, 1, 11).unwrap();
        let target = 0.5f64.tanh();
        let states = vec![1.0; 16];
        let dist = |a: &SoftAgent| (a.act(&[1.0])[0] - target).abs();
        let mut history = vec![dist(&agent)];
        for step in 0..3000 {
            let xi: Vec<f64> = agent.draw_noise(16);
            agent.actor_step(&states, &xi, |input| {
                let acts: Vec<f64> = input.chunks_exact(2).map(|r| r[1]).collect();
                let q = acts.iter().map(|a| -(a - target).powi(2)).collect();
                let g = acts.iter().map(|a| -2.0 * (a - target)).collect();
                (q, g)
            });
            if step % 100 == 99 {
                history.push(dist(&agent));
            }
        }
        // after burn-in the distance shrinks until it settles inside a 0.01 band
        let settled = history.iter().position(|&d| d < 0.01).expect("never reached the optimum");
        for w in history[3..=settled.max(3)].windows(2) {
            assert!(w[1] <= w[0], "{history:?}");
        }
        assert!(history[settled..].iter().all(|&d| d < 0.01), "{history:?}");
    }

    #[test]
    fn checkpoint_round_trip() {
        let mut agent = SoftAgent::new(tiny(Algorithm::Sac), 3, 2, 8).unwrap();
        let mut buf = ReplayBuffer::new(16, 3, 2, 1);
        for k in 0..8 {
            let x = k as f64 * 0.1;
            buf.push(&[x, 0.0, 1.0], &[0.2, -0.2], x, &[x, 1.0, 0.0], false);
        }
        agent.train_step(&mut buf);
        let mut w = ByteWriter::new();
        agent.write(&mut w);
        let bytes = w.into_bytes();
        let mut back = SoftAgent::read(agent.cfg.clone(), &mut ByteReader::new(&bytes)).unwrap();
        let mut buf2 = buf.clone();
        let d1 = agent.train_step(&mut buf).unwrap();
        let d2 = back.train_step(&mut buf2).unwrap();
        assert_eq!(d1, d2);
        assert_eq!(agent.actor, back.actor);
    }
}
