use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::config::RunConfig;
use super::eval::{eval_seeds, evaluate};
use super::metrics::{MetricsRecord, MetricsWriter, RecordKind, TimingRecord, TimingWriter};
use crate::agents::{Agent, Diagnostics, Mode, ReplayBuffer};
use crate::codec::{self, ByteReader, ByteWriter};
use crate::parallel::Exec;
use crate::sliceenv::{SliceEnv, StepOutcome};
use crate::{Error, Result};

const CHECKPOINT_MAGIC: &[u8; 8] = b"NSLCKPT\0";
const CHECKPOINT_VERSION: u32 = 1;
pub const CHECKPOINT_FILE: &str = "checkpoint.bin";
pub const METRICS_FILE: &str = "metrics.csv";
pub const TIMING_FILE: &str = "timing.csv";
pub const CONFIG_FILE: &str = "config.toml";
pub const SUMMARY_FILE: &str = "summary.toml";

/// Running sums over the current episode.
#[derive(Clone, Debug, Default, PartialEq)]
struct EpisodeStats {
    steps: u64,
    ret: f64,
    energy: f64,
    energy_per_slice: Vec<f64>,
    cpu_util: f64,
    sinr_violations: u64,
    cpu_violations: u64,
}

impl EpisodeStats {
    fn new(n_slices: usize) -> Self {
        Self { energy_per_slice: vec![0.0; n_slices], ..Self::default() }
    }

    fn add(&mut self, out: &StepOutcome) {
        self.steps += 1;
        self.ret += out.reward;
        self.energy += out.info.breakdown.total_w;
        for (a, e) in self.energy_per_slice.iter_mut().zip(&out.info.energy_per_slice_w) {
            *a += e;
        }
        self.cpu_util += out.info.cpu_utilization;
        self.sinr_violations += out.info.sinr_violations as u64;
        self.cpu_violations += out.info.cpu_violations as u64;
    }

    fn write(&self, w: &mut ByteWriter) {
        w.u64(self.steps);
        w.f64(self.ret);
        w.f64(self.energy);
        w.f64s(&self.energy_per_slice);
        w.f64(self.cpu_util);
        w.u64(self.sinr_violations);
        w.u64(self.cpu_violations);
    }

    fn read(r: &mut ByteReader) -> Result<Self> {
        Ok(Self {
            steps: r.u64()?,
            ret: r.f64()?,
            energy: r.f64()?,
            energy_per_slice: r.f64s()?,
            cpu_util: r.f64()?,
            sinr_violations: r.u64()?,
            cpu_violations: r.u64()?,
        })
    }
}

/// Loss sums over the current logging window.
#[derive(Clone, Debug, Default, PartialEq)]
struct WindowStats {
    steps: u64,
    reward: f64,
    updates: u64,
    critic1: f64,
    critic2_updates: u64,
    critic2: f64,
    mean_q: f64,
    actor_updates: u64,
    actor: f64,
    alpha_loss: f64,
}

impl WindowStats {
    fn add(&mut self, reward: f64, diag: Option<&Diagnostics>) {
        self.steps += 1;
        self.reward += reward;
        if let Some(d) = diag {
            self.updates += 1;
            self.critic1 += d.critic1_loss;
            if let Some(c) = d.critic2_loss {
                self.critic2_updates += 1;
                self.critic2 += c;
            }
            self.mean_q += d.mean_q;
            if let Some(a) = d.actor_loss {
                self.actor_updates += 1;
                self.actor += a;
                self.alpha_loss += d.alpha_loss.unwrap_or(0.0);
            }
        }
    }

    fn write(&self, w: &mut ByteWriter) {
        for v in [self.steps, self.updates, self.critic2_updates, self.actor_updates] {
            w.u64(v);
        }
        for v in [self.reward, self.critic1, self.critic2, self.mean_q, self.actor, self.alpha_loss] {
            w.f64(v);
        }
    }

    fn read(r: &mut ByteReader) -> Result<Self> {
        let (steps, updates, critic2_updates, actor_updates) = (r.u64()?, r.u64()?, r.u64()?, r.u64()?);
        Ok(Self {
            steps,
            updates,
            critic2_updates,
            actor_updates,
            reward: r.f64()?,
            critic1: r.f64()?,
            critic2: r.f64()?,
            mean_q: r.f64()?,
            actor: r.f64()?,
            alpha_loss: r.f64()?,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunSummary {
    pub algorithm: String,
    pub seed: u64,
    pub global_step: u64,
    pub episodes: u64,
    pub network_count: usize,
    pub eval_steps: Vec<u64>,
    pub eval_scores: Vec<f64>,
    pub final_eval_score: Option<f64>,
    pub mean_seconds_per_window: Option<f64>,
    pub all_finite: bool,
    pub alpha: Option<f64>,
}

/// Complete training state; enough to continue a run bit-exactly.
pub struct Checkpoint {
    pub config: RunConfig,
    pub seed: u64,
    pub global_step: u64,
    pub agent: Agent,
    state: Vec<u8>,
}

impl Checkpoint {
    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path)
            .map_err(|e| Error::Checkpoint(format!("cannot read {}: {e}", path.display())))?;
        let (_, payload) = codec::open(&bytes, CHECKPOINT_MAGIC, CHECKPOINT_VERSION)?;
        let mut r = ByteReader::new(payload);
        let config = RunConfig::from_toml_str(&r.str()?)?;
        let seed = r.u64()?;
        let global_step = r.u64()?;
        let agent = Agent::read(&mut r)?;
        let state = r.bytes()?;
        if !r.is_empty() {
            return Err(Error::Checkpoint("trailing bytes after checkpoint".into()));
        }
        Ok(Self { config, seed, global_step, agent, state })
    }
}

pub struct Trainer {
    cfg: RunConfig,
    seed: u64,
    out_dir: PathBuf,
    env: SliceEnv,
    agent: Agent,
    buffer: ReplayBuffer,
    rng: ChaCha8Rng,
    global_step: u64,
    episode: u64,
    obs: Vec<f64>,
    ep: EpisodeStats,
    window: WindowStats,
    evals: Vec<(u64, f64)>,
    timed_steps: u64,
    timed_seconds: f64,
    timing_windows: u64,
    exec: Exec,
    metrics: MetricsWriter,
    timing: TimingWriter,
}

fn slice_ids(cfg: &RunConfig) -> Vec<String> {
    cfg.env.slices.iter().map(|s| s.id.clone()).collect()
}

fn prepare_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", dir.display()))))
}

impl Trainer {
    pub fn new(cfg: RunConfig, seed: u64, out_dir: &Path) -> Result<Self> {
        cfg.validate()?;
        prepare_dir(out_dir)?;
        std::fs::write(out_dir.join(CONFIG_FILE), cfg.to_toml_string())?;
        let metrics = MetricsWriter::create(&out_dir.join(METRICS_FILE), &slice_ids(&cfg))?;
        let timing = TimingWriter::open(&out_dir.join(TIMING_FILE), false)?;
        let mut env = SliceEnv::new(cfg.env.clone())?;
        let (od, ad) = (env.obs_dim(), env.action_dim());
        let agent = Agent::new(cfg.agent.clone(), od, ad, seed)?;
        let mut buf_seed = ChaCha8Rng::seed_from_u64(seed);
        buf_seed.set_stream(3);
        let buffer = ReplayBuffer::new(cfg.agent.buffer_size, od, ad, buf_seed.random());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(4);
        let obs = env.reset(rng.random());
        Ok(Self {
            ep: EpisodeStats::new(cfg.env.n_slices()),
            window: WindowStats::default(),
            cfg,
            seed,
            out_dir: out_dir.to_path_buf(),
            env,
            agent,
            buffer,
            rng,
            global_step: 0,
            episode: 0,
            obs,
            evals: Vec::new(),
            timed_steps: 0,
            timed_seconds: 0.0,
            timing_windows: 0,
            exec: Exec::default(),
            metrics,
            timing,
        })
    }

    /// Continues a run from its checkpoint, writing into `out_dir` (the
    /// checkpoint's own directory when `None`). Metrics rows written after
    /// the checkpoint are discarded.
    pub fn resume(checkpoint: &Path, out_dir: Option<&Path>) -> Result<Self> {
        let ckpt = Checkpoint::load(checkpoint)?;
        let dir = match out_dir {
            Some(d) => d.to_path_buf(),
            None => checkpoint.parent().map(Path::to_path_buf).unwrap_or_default(),
        };
        prepare_dir(&dir)?;
        let cfg = ckpt.config;
        let metrics_path = dir.join(METRICS_FILE);
        let metrics = if metrics_path.exists() {
            MetricsWriter::resume(&metrics_path, &slice_ids(&cfg), ckpt.global_step)?
        } else {
            MetricsWriter::create(&metrics_path, &slice_ids(&cfg))?
        };
        std::fs::write(dir.join(CONFIG_FILE), cfg.to_toml_string())?;
        let timing = TimingWriter::open(&dir.join(TIMING_FILE), true)?;
        let mut r = ByteReader::new(&ckpt.state);
        let mut env = SliceEnv::new(cfg.env.clone())?;
        env.read_state(&mut r)?;
        let buffer = ReplayBuffer::read(&mut r)?;
        let rng = r.rng()?;
        let episode = r.u64()?;
        let obs = r.f64s()?;
        let ep = EpisodeStats::read(&mut r)?;
        let window = WindowStats::read(&mut r)?;
        let n = r.usize()?;
        let evals = (0..n).map(|_| Ok((r.u64()?, r.f64()?))).collect::<Result<Vec<_>>>()?;
        let timing_windows = r.u64()?;
        if obs.len() != env.obs_dim() || !r.is_empty() {
            return Err(Error::Checkpoint("trainer state does not match its configuration".into()));
        }
        Ok(Self {
            cfg,
            seed: ckpt.seed,
            out_dir: dir,
            env,
            agent: ckpt.agent,
            buffer,
            rng,
            global_step: ckpt.global_step,
            episode,
            obs,
            ep,
            window,
            evals,
            timed_steps: 0,
            timed_seconds: 0.0,
            timing_windows,
            exec: Exec::default(),
            metrics,
            timing,
        })
    }

    pub fn with_exec(mut self, exec: Exec) -> Self {
        self.exec = exec;
        self
    }

    pub fn config(&self) -> &RunConfig {
        &self.cfg
    }

    pub fn agent(&self) -> &Agent {
        &self.agent
    }

    pub fn buffer(&self) -> &ReplayBuffer {
        &self.buffer
    }

    pub fn env(&self) -> &SliceEnv {
        &self.env
    }

    pub fn global_step(&self) -> u64 {
        self.global_step
    }

    pub fn evals(&self) -> &[(u64, f64)] {
        &self.evals
    }

    pub fn out_dir(&self) -> &Path {
        &self.out_dir
    }

    /// One iteration of the outer loop: act, step, store, learn.
    pub fn step(&mut self) -> Result<()> {
        let started = Instant::now();
        let learning = self.global_step >= self.cfg.start_timesteps;
        let action = if learning {
            self.agent.select_action(&self.obs, Mode::Explore)
        } else {
            self.env.sample_action(&mut self.rng)
        };
        let out = self.env.step(&action)?;
        // Horizon truncation is not a terminal state, so the bootstrap stays on.
        self.buffer.push(&self.obs, &action, out.reward, &out.observation, false);
        let diag = if learning { self.agent.train_step(&mut self.buffer) } else { None };
        if learning {
            self.timed_steps += 1;
            self.timed_seconds += started.elapsed().as_secs_f64();
        }
        self.ep.add(&out);
        self.window.add(out.reward, diag.as_ref());
        self.global_step += 1;
        self.obs = out.observation;

        if self.timed_steps == self.cfg.timing_window {
            self.timing.write(&TimingRecord {
                window: self.timing_windows,
                end_step: self.global_step,
                seconds: self.timed_seconds,
            })?;
            self.timing_windows += 1;
            self.timed_steps = 0;
            self.timed_seconds = 0.0;
        }
        if out.done {
            self.finish_episode()?;
        }
        if self.global_step.is_multiple_of(self.cfg.log_interval) {
            self.write_window()?;
        }
        if self.global_step.is_multiple_of(self.cfg.eval_interval) {
            self.evaluate_now()?;
            self.save_checkpoint(&self.out_dir.join(CHECKPOINT_FILE))?;
        }
        Ok(())
    }

    fn finish_episode(&mut self) -> Result<()> {
        let n = self.ep.steps.max(1) as f64;
        let mut rec = MetricsRecord::new(RecordKind::Episode, self.global_step, self.episode);
        rec.episode_return = Some(self.ep.ret);
        rec.mean_reward = Some(self.ep.ret / n);
        rec.energy_total_w = Some(self.ep.energy / n);
        rec.energy_per_slice_w = self.ep.energy_per_slice.iter().map(|e| e / n).collect();
        rec.cpu_utilization = Some(self.ep.cpu_util / n);
        rec.sinr_violations = Some(self.ep.sinr_violations);
        rec.cpu_violations = Some(self.ep.cpu_violations);
        rec.alpha = self.agent.alpha();
        self.metrics.write(&rec)?;
        self.episode += 1;
        self.ep = EpisodeStats::new(self.cfg.env.n_slices());
        self.agent.episode_reset();
        self.obs = self.env.reset(self.rng.random());
        Ok(())
    }

    fn write_window(&mut self) -> Result<()> {
        let w = std::mem::take(&mut self.window);
        let mut rec = MetricsRecord::new(RecordKind::Window, self.global_step, self.episode);
        if w.steps > 0 {
            rec.mean_reward = Some(w.reward / w.steps as f64);
        }
        if w.updates > 0 {
            let n = w.updates as f64;
            rec.critic1_loss = Some(w.critic1 / n);
            if w.critic2_updates > 0 {
                rec.critic2_loss = Some(w.critic2 / w.critic2_updates as f64);
            }
            rec.mean_q = Some(w.mean_q / n);
        }
        if w.actor_updates > 0 {
            let n = w.actor_updates as f64;
            rec.actor_loss = Some(w.actor / n);
            if self.agent.alpha().is_some() {
                rec.alpha_loss = Some(w.alpha_loss / n);
            }
        }
        rec.alpha = self.agent.alpha();
        self.metrics.write(&rec)
    }

    /// Best-of evaluation of the current deterministic policy; recorded in
    /// the metrics and returned.
    pub fn evaluate_now(&mut self) -> Result<f64> {
        let seeds = eval_seeds(self.seed, self.cfg.eval_episodes);
        let report = evaluate(&self.agent, &self.cfg.env, &seeds, self.cfg.eval_best, self.exec)?;
        let mut rec = MetricsRecord::new(RecordKind::Eval, self.global_step, self.episode);
        rec.eval_score = Some(report.score);
        rec.episode_return = Some(report.returns.iter().sum::<f64>() / report.returns.len() as f64);
        rec.alpha = self.agent.alpha();
        self.metrics.write(&rec)?;
        self.metrics.flush()?;
        self.evals.push((self.global_step, report.score));
        log::info!(
            "{} seed {} step {}: eval score {:.4}",
            self.cfg.algorithm,
            self.seed,
            self.global_step,
            report.score
        );
        Ok(report.score)
    }

    /// Steps until `global_step` reaches `step` (or the configured maximum).
    pub fn run_until(&mut self, step: u64) -> Result<()> {
        if self.global_step == 0 && self.cfg.eval_at_start && self.evals.is_empty() {
            self.evaluate_now()?;
        }
        while self.global_step < step.min(self.cfg.max_timesteps) {
            self.step()?;
        }
        self.metrics.flush()?;
        self.timing.flush()
    }

    /// Runs to `max_timesteps`, then writes the final record and summary.
    pub fn run(mut self) -> Result<RunSummary> {
        self.run_until(self.cfg.max_timesteps)?;
        let summary = self.summary()?;
        let mut rec = MetricsRecord::new(RecordKind::Final, self.global_step, self.episode);
        rec.eval_score = summary.final_eval_score;
        rec.alpha = summary.alpha;
        self.metrics.write(&rec)?;
        self.metrics.flush()?;
        self.timing.flush()?;
        let text = toml::to_string(&summary).map_err(|e| Error::Metrics(e.to_string()))?;
        std::fs::write(self.out_dir.join(SUMMARY_FILE), text)?;
        Ok(summary)
    }

    fn summary(&self) -> Result<RunSummary> {
        let timing = super::metrics::read_timing(&self.out_dir.join(TIMING_FILE))?;
        let mean = (!timing.is_empty())
            .then(|| timing.iter().map(|t| t.seconds).sum::<f64>() / timing.len() as f64);
        Ok(RunSummary {
            algorithm: self.cfg.algorithm.to_string(),
            seed: self.seed,
            global_step: self.global_step,
            episodes: self.episode,
            network_count: self.agent.network_count(),
            eval_steps: self.evals.iter().map(|e| e.0).collect(),
            eval_scores: self.evals.iter().map(|e| e.1).collect(),
            final_eval_score: self.evals.last().map(|e| e.1),
            mean_seconds_per_window: mean,
            all_finite: self.agent.all_finite(),
            alpha: self.agent.alpha(),
        })
    }

    pub fn save_checkpoint(&mut self, path: &Path) -> Result<()> {
        self.metrics.flush()?;
        let mut state = ByteWriter::new();
        self.env.write_state(&mut state);
        self.buffer.write(&mut state, self.cfg.checkpoint_buffer);
        state.rng(&self.rng);
        state.u64(self.episode);
        state.f64s(&self.obs);
        self.ep.write(&mut state);
        self.window.write(&mut state);
        state.usize(self.evals.len());
        for (s, v) in &self.evals {
            state.u64(*s);
            state.f64(*v);
        }
        state.u64(self.timing_windows);

        let mut w = ByteWriter::new();
        w.str(&self.cfg.to_toml_string());
        w.u64(self.seed);
        w.u64(self.global_step);
        self.agent.write(&mut w);
        w.bytes(&state.into_bytes());
        let sealed = codec::seal(CHECKPOINT_MAGIC, CHECKPOINT_VERSION, &w.into_bytes());
        // write-then-rename so an interrupted save never leaves a torn file
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, sealed)?;
        std::fs::rename(&tmp, path)?;
        Ok(())
    }
}

/// Trains one run per seed (in parallel under `Exec::Parallel`), each in
/// `out_dir/seed_<n>`.
pub fn sweep(cfg: &RunConfig, seeds: &[u64], out_dir: &Path, exec: Exec) -> Result<Vec<RunSummary>> {
    cfg.validate()?;
    exec.map(seeds, |&seed| {
        let dir = out_dir.join(format!("seed_{seed}"));
        Trainer::new(cfg.clone(), seed, &dir)?.with_exec(Exec::Sequential).run()
    })
    .into_iter()
    .collect()
}
