//! The network-slicing environment.
//!
//! Each step the agent sets the provisioned CPU pool (vertical scaling) and
//! one beamforming power level per slice. The environment then churns the
//! user population, draws a fresh channel, beamforms, evaluates SINR, rate,
//! CPU demand and energy, checks per-slice QoS constraints and returns the
//! normalized reward.
//!
//! Observation layout for `L` slices (length `3L + 1`):
//! `[arrivals (L), granted cores per slice (L), energy status (1), users per slice (L)]`.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, weighted::WeightedIndex};
use serde::{Deserialize, Serialize};

use crate::codec::{ByteReader, ByteWriter};
use crate::costmodel::{cpu_fraction, provisioned_energy, ComputeModel, CostBreakdown};
use crate::netmodel::{self, beamform, draw_channel, RadioParams, RadioTopology};
use crate::{Error, Result};

/// QoS contract and traffic of one slice.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SliceSpec {
    pub id: String,
    /// Minimum SINR (linear).
    pub sinr_threshold: f64,
    /// Maximum CPU cores one user of this slice may need.
    pub cpu_threshold: f64,
    /// Mean new requests per step (Poisson).
    pub arrival_rate: f64,
    pub penalty_sinr: f64,
    pub penalty_cpu: f64,
}

impl SliceSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.sinr_threshold > 0.0 && self.cpu_threshold > 0.0) {
            return Err(Error::Config(format!("slice {}: thresholds must be positive", self.id)));
        }
        if !(self.arrival_rate >= 0.0) || !self.arrival_rate.is_finite() {
            return Err(Error::Config(format!("slice {}: arrival rate must be >= 0", self.id)));
        }
        if !(self.penalty_sinr > self.penalty_cpu && self.penalty_cpu >= 0.0) {
            return Err(Error::Config(format!(
                "slice {}: need penalty_sinr > penalty_cpu >= 0",
                self.id
            )));
        }
        Ok(())
    }
}

pub fn default_slices() -> Vec<SliceSpec> {
    let slice = |id: &str, sinr_db: f64, cpu: f64, rate: f64| SliceSpec {
        id: id.to_string(),
        sinr_threshold: netmodel::db_to_linear(sinr_db),
        cpu_threshold: cpu,
        arrival_rate: rate,
        penalty_sinr: 0.5,
        penalty_cpu: 0.2,
    };
    vec![
        slice("A", 3.0, 1.2, 1.0),
        slice("B", 0.0, 1.0, 2.0),
        slice("C", -3.0, 0.8, 2.0),
    ]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvConfig {
    pub radio: RadioParams,
    pub compute: ComputeModel,
    pub slices: Vec<SliceSpec>,
    /// Steps per episode.
    pub horizon: usize,
    /// Reward normalizer.
    pub omega_hat: f64,
    /// Energy floor applied before inverting the cost.
    pub energy_floor_w: f64,
    /// Energy that maps to 1.0 in the energy-status feature.
    pub energy_cap_w: f64,
    /// Mean of the geometric user lifetime, in steps.
    pub mean_lifetime_steps: f64,
    /// Users present right after reset; `None` means half of `n_users_max`.
    pub initial_users: Option<usize>,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self::paper()
    }
}

impl EnvConfig {
    /// Full-size scenario: 20 APs, up to 50 users.
    pub fn paper() -> Self {
        Self {
            radio: RadioParams::default(),
            compute: ComputeModel::default(),
            slices: default_slices(),
            horizon: 200,
            omega_hat: 10.0,
            energy_floor_w: 1e-6,
            energy_cap_w: 1000.0,
            mean_lifetime_steps: 20.0,
            initial_users: None,
        }
    }

    /// Laptop-scale scenario: 4 APs, up to 8 users.
    pub fn desk() -> Self {
        Self {
            radio: RadioParams { n_aps: 4, n_users_max: 8, ..RadioParams::default() },
            compute: ComputeModel { max_cpus: 16, max_vnfs: 4, ..ComputeModel::default() },
            energy_cap_w: 200.0,
            ..Self::paper()
        }
    }

    pub fn n_slices(&self) -> usize {
        self.slices.len()
    }

    pub fn obs_dim(&self) -> usize {
        3 * self.n_slices() + 1
    }

    /// One CPU-scaling component plus one power level per slice.
    pub fn action_dim(&self) -> usize {
        1 + self.n_slices()
    }

    pub fn cpu_capacity(&self) -> f64 {
        self.compute.max_cpus as f64
    }

    pub fn validate(&self) -> Result<()> {
        self.radio.validate()?;
        self.compute.validate()?;
        if self.slices.is_empty() {
            return Err(Error::Config("at least one slice is required".into()));
        }
        for s in &self.slices {
            s.validate()?;
        }
        if self.horizon == 0 {
            return Err(Error::Config("horizon must be at least 1".into()));
        }
        if !(self.omega_hat > 0.0) || !(self.energy_floor_w > 0.0) || !(self.energy_cap_w > 0.0) {
            return Err(Error::Config("omega_hat, energy_floor_w and energy_cap_w must be positive".into()));
        }
        if !(self.mean_lifetime_steps >= 1.0) {
            return Err(Error::Config("mean_lifetime_steps must be >= 1".into()));
        }
        if self.initial_users.is_some_and(|n| n > self.radio.n_users_max) {
            return Err(Error::Config("initial_users exceeds n_users_max".into()));
        }
        Ok(())
    }
}

/// Maps the raw CPU component in `[-1, 1]` onto `[-demand, capacity - demand]`
/// and returns the resulting allocation, clamped to `[0, capacity]`.
pub fn rescale_cpu(raw: f64, demand: f64, capacity: f64) -> f64 {
    let lo = -demand;
    let hi = capacity - demand;
    let scaling = lo + 0.5 * (raw + 1.0) * (hi - lo);
    (demand + scaling).clamp(0.0, capacity)
}

/// Maps a raw power component in `[-1, 1]` onto `[0, p_max]`.
pub fn rescale_power(raw: f64, p_max: f64) -> f64 {
    (0.5 * (raw + 1.0) * p_max).clamp(0.0, p_max)
}

/// Per-user constraint check.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Violation {
    pub sinr: bool,
    pub cpu: bool,
}

impl Violation {
    pub fn any(&self) -> bool {
        self.sinr || self.cpu
    }
}

/// Per-user constraint indicators and the aggregate (`true` when any user violates).
pub fn constraint_indicator(
    per_user_sinr: &[f64],
    per_user_delta: &[f64],
    per_user_slice: &[&SliceSpec],
) -> (Vec<Violation>, bool) {
    let flags: Vec<Violation> = per_user_sinr
        .iter()
        .zip(per_user_delta)
        .zip(per_user_slice)
        .map(|((&s, &d), spec)| Violation {
            sinr: !(s >= spec.sinr_threshold),
            cpu: !(d <= spec.cpu_threshold),
        })
        .collect();
    let chi = flags.iter().any(Violation::any);
    (flags, chi)
}

/// Sum of per-user penalties (non-positive). A user violating both
/// constraints pays the SINR penalty only.
pub fn penalty(violations: &[Violation], per_user_slice: &[&SliceSpec]) -> f64 {
    -violations
        .iter()
        .zip(per_user_slice)
        .map(|(v, s)| {
            if v.sinr {
                s.penalty_sinr
            } else if v.cpu {
                s.penalty_cpu
            } else {
                0.0
            }
        })
        .sum::<f64>()
}

/// `(1 / (E / M) + penalties) / omega_hat` before clamping, where `M` counts
/// served users. The efficiency term is zero when nobody is served.
pub fn reward_unclamped(
    breakdown: &CostBreakdown,
    n_served: usize,
    penalties: f64,
    omega_hat: f64,
    energy_floor_w: f64,
) -> f64 {
    let efficiency = if n_served > 0 {
        n_served as f64 / breakdown.total_w.max(energy_floor_w)
    } else {
        0.0
    };
    (efficiency + penalties) / omega_hat
}

/// The step reward, clamped to `[-1, 1]`.
pub fn reward(
    breakdown: &CostBreakdown,
    n_served: usize,
    penalties: f64,
    omega_hat: f64,
    energy_floor_w: f64,
) -> f64 {
    reward_unclamped(breakdown, n_served, penalties, omega_hat, energy_floor_w).clamp(-1.0, 1.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct User {
    pub slice: usize,
    /// Column of the topology this user occupies.
    pub slot: usize,
}

/// Everything the step computed, for metrics and tests.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct StepInfo {
    pub breakdown: CostBreakdown,
    pub n_users: usize,
    pub per_user_slice: Vec<usize>,
    pub per_user_sinr: Vec<f64>,
    pub per_user_rate: Vec<f64>,
    pub per_user_delta: Vec<f64>,
    pub per_user_served: Vec<bool>,
    pub violations: Vec<Violation>,
    pub sinr_violations: usize,
    pub cpu_violations: usize,
    pub chi: bool,
    /// Penalty term after normalization by the user count.
    pub penalty: f64,
    pub allocation_cores: f64,
    pub granted_cores: f64,
    pub power_per_slice_w: Vec<f64>,
    pub energy_per_slice_w: Vec<f64>,
    pub cpu_utilization: f64,
    pub arrivals: Vec<u32>,
    pub unclamped_reward: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    pub observation: Vec<f64>,
    pub reward: f64,
    pub done: bool,
    pub info: StepInfo,
}

#[derive(Clone, Debug)]
pub struct SliceEnv {
    cfg: EnvConfig,
    rng: ChaCha8Rng,
    topology: RadioTopology,
    users: Vec<User>,
    step_index: usize,
    allocation_cores: f64,
    demand_cores: f64,
    arrivals: Vec<u32>,
    granted_per_slice: Vec<f64>,
    prev_energy_w: f64,
    arrival_dists: Vec<Option<Poisson<f64>>>,
}

impl SliceEnv {
    pub fn new(cfg: EnvConfig) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let topology = RadioTopology::sample(cfg.radio.clone(), &mut rng)?;
        let arrival_dists = arrival_dists(&cfg)?;
        let l = cfg.n_slices();
        let mut env = Self {
            cfg,
            rng,
            topology,
            users: Vec::new(),
            step_index: 0,
            allocation_cores: 0.0,
            demand_cores: 0.0,
            arrivals: vec![0; l],
            granted_per_slice: vec![0.0; l],
            prev_energy_w: 0.0,
            arrival_dists,
        };
        env.reset(0);
        Ok(env)
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn obs_dim(&self) -> usize {
        self.cfg.obs_dim()
    }

    pub fn action_dim(&self) -> usize {
        self.cfg.action_dim()
    }

    pub fn step_index(&self) -> usize {
        self.step_index
    }

    pub fn users(&self) -> &[User] {
        &self.users
    }

    pub fn topology(&self) -> &RadioTopology {
        &self.topology
    }

    pub fn allocation_cores(&self) -> f64 {
        self.allocation_cores
    }

    pub fn users_per_slice(&self) -> Vec<usize> {
        let mut counts = vec![0; self.cfg.n_slices()];
        for u in &self.users {
            counts[u.slice] += 1;
        }
        counts
    }

    /// Starts a new episode: fresh geometry and a random initial population.
    pub fn reset(&mut self, seed: u64) -> Vec<f64> {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
        self.topology = RadioTopology::sample(self.cfg.radio.clone(), &mut self.rng)
            .expect("radio parameters validated at construction");
        let l = self.cfg.n_slices();
        let n0 = self
            .cfg
            .initial_users
            .unwrap_or(self.cfg.radio.n_users_max / 2);
        let weights: Vec<f64> = self.cfg.slices.iter().map(|s| s.arrival_rate).collect();
        let chooser = WeightedIndex::new(&weights).ok();
        self.users = (0..n0)
            .map(|slot| {
                let slice = match &chooser {
                    Some(w) => w.sample(&mut self.rng),
                    None => self.rng.random_range(0..l),
                };
                User { slice, slot }
            })
            .collect();
        self.step_index = 0;
        self.allocation_cores = 0.0;
        self.demand_cores = 0.0;
        self.arrivals = vec![0; l];
        self.granted_per_slice = vec![0.0; l];
        self.prev_energy_w = 0.0;
        self.observation()
    }

    pub fn observation(&self) -> Vec<f64> {
        let users = self.users_per_slice();
        let n_max = self.cfg.radio.n_users_max as f64;
        let cap = self.cfg.cpu_capacity();
        let mut obs = Vec::with_capacity(self.obs_dim());
        obs.extend(self.arrivals.iter().map(|&a| a as f64 / n_max));
        obs.extend(self.granted_per_slice.iter().map(|&g| g / cap));
        obs.push((self.prev_energy_w / self.cfg.energy_cap_w).clamp(0.0, 1.0));
        obs.extend(users.iter().map(|&u| u as f64 / n_max));
        obs
    }

    /// Uniform random action in `[-1, 1]^d`.
    pub fn sample_action<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        (0..self.action_dim())
            .map(|_| rng.random_range(-1.0..=1.0))
            .collect()
    }

    pub fn step(&mut self, action: &[f64]) -> Result<StepOutcome> {
        if action.len() != self.action_dim() {
            return Err(Error::Contract(format!(
                "action has {} components, expected {}",
                action.len(),
                self.action_dim()
            )));
        }
        if let Some(bad) = action.iter().find(|a| !(a.abs() <= 1.0)) {
            return Err(Error::Contract(format!("action component {bad} outside [-1, 1]")));
        }
        let l = self.cfg.n_slices();
        let cap = self.cfg.cpu_capacity();
        let p_max = self.cfg.radio.p_max_watts;

        self.allocation_cores = rescale_cpu(action[0], self.demand_cores, cap);
        let power_per_slice_w: Vec<f64> = action[1..].iter().map(|&a| rescale_power(a, p_max)).collect();

        self.churn_users();

        let channel = draw_channel(&self.topology, &mut self.rng)?;
        let slots: Vec<usize> = self.users.iter().map(|u| u.slot).collect();
        let h = channel.select_columns(&slots);
        let powers: Vec<f64> = self.users.iter().map(|u| power_per_slice_w[u.slice]).collect();
        let v = beamform(&h, &powers, self.cfg.radio.reg_noise())?;
        let sinr = netmodel::sinr_all(&h, &v, self.cfg.radio.noise_w())?;
        let rates: Vec<f64> = sinr.iter().map(|&s| netmodel::rate(s)).collect::<Result<_>>()?;
        let deltas: Vec<f64> = (0..self.users.len())
            .map(|m| {
                let col: Vec<_> = v.vectors.column(m).iter().copied().collect();
                cpu_fraction(rates[m], &col, &self.cfg.compute)
            })
            .collect();
        let demand: f64 = deltas.iter().sum();

        // Serve users slice by slice (first-fit) out of the provisioned pool.
        let mut order: Vec<usize> = (0..self.users.len()).collect();
        order.sort_by_key(|&m| self.users[m].slice);
        let mut served = vec![false; self.users.len()];
        let mut used = 0.0;
        for &m in &order {
            if used + deltas[m] <= self.allocation_cores + 1e-12 {
                used += deltas[m];
                served[m] = true;
            }
        }

        let specs: Vec<&SliceSpec> = self.users.iter().map(|u| &self.cfg.slices[u.slice]).collect();
        let (mut violations, _) = constraint_indicator(&sinr, &deltas, &specs);
        for (flag, ok) in violations.iter_mut().zip(&served) {
            flag.cpu |= !ok;
        }
        let chi = violations.iter().any(Violation::any);

        let breakdown = provisioned_energy(&v, self.allocation_cores, demand, &self.cfg.compute);
        let n_users = self.users.len();
        let penalty_norm = if n_users > 0 {
            penalty(&violations, &specs) / n_users as f64
        } else {
            0.0
        };
        let unclamped = reward_unclamped(
            &breakdown,
            served.iter().filter(|&&s| s).count(),
            penalty_norm,
            self.cfg.omega_hat,
            self.cfg.energy_floor_w,
        );
        let reward = unclamped.clamp(-1.0, 1.0);

        let mut granted = vec![0.0; l];
        let mut slice_tx = vec![0.0; l];
        let mut slice_users = vec![0usize; l];
        for (m, u) in self.users.iter().enumerate() {
            if served[m] {
                granted[u.slice] += deltas[m];
            }
            slice_tx[u.slice] += v.vectors.column(m).norm_squared();
            slice_users[u.slice] += 1;
        }
        let energy_per_slice_w = (0..l)
            .map(|s| {
                let share = if used > 0.0 {
                    granted[s] / used
                } else if n_users > 0 {
                    slice_users[s] as f64 / n_users as f64
                } else {
                    1.0 / l as f64
                };
                breakdown.baseband_w * share + slice_tx[s]
            })
            .collect();
        let cpu_utilization = if self.allocation_cores > 0.0 {
            (used / self.allocation_cores).clamp(0.0, 1.0)
        } else {
            0.0
        };

        self.demand_cores = demand;
        self.granted_per_slice = granted;
        self.prev_energy_w = breakdown.total_w;
        self.step_index += 1;
        let done = self.step_index >= self.cfg.horizon;

        let info = StepInfo {
            n_users,
            per_user_slice: self.users.iter().map(|u| u.slice).collect(),
            per_user_sinr: sinr,
            per_user_rate: rates,
            per_user_delta: deltas,
            per_user_served: served,
            sinr_violations: violations.iter().filter(|v| v.sinr).count(),
            cpu_violations: violations.iter().filter(|v| v.cpu).count(),
            violations,
            chi,
            penalty: penalty_norm,
            allocation_cores: self.allocation_cores,
            granted_cores: used,
            power_per_slice_w,
            energy_per_slice_w,
            cpu_utilization,
            arrivals: self.arrivals.clone(),
            unclamped_reward: unclamped,
            breakdown,
        };
        Ok(StepOutcome { observation: self.observation(), reward, done, info })
    }

    /// Retires users with the geometric-lifetime hazard, then admits this
    /// step's Poisson arrivals in random order while slots remain.
    fn churn_users(&mut self) {
        let hazard = 1.0 / self.cfg.mean_lifetime_steps;
        let rng = &mut self.rng;
        self.users.retain(|_| rng.random::<f64>() >= hazard);

        let mut requests = Vec::new();
        for (s, dist) in self.arrival_dists.iter().enumerate() {
            let k = dist.as_ref().map_or(0, |d| d.sample(&mut self.rng) as u32);
            self.arrivals[s] = k;
            requests.extend(std::iter::repeat_n(s, k as usize));
        }
        requests.shuffle(&mut self.rng);

        let n_max = self.cfg.radio.n_users_max;
        let mut taken = vec![false; n_max];
        for u in &self.users {
            taken[u.slot] = true;
        }
        for slice in requests {
            if self.users.len() >= n_max {
                break;
            }
            let slot = taken.iter().position(|t| !t).expect("a free slot exists");
            taken[slot] = true;
            self.topology.redraw_slot(slot, &mut self.rng);
            self.users.push(User { slice, slot });
        }
    }

    /// Serializes the mutable episode state (config excluded).
    pub fn write_state(&self, w: &mut ByteWriter) {
        w.rng(&self.rng);
        w.f64s(self.topology.distances.as_slice());
        w.usize(self.users.len());
        for u in &self.users {
            w.usize(u.slice);
            w.usize(u.slot);
        }
        w.usize(self.step_index);
        w.f64(self.allocation_cores);
        w.f64(self.demand_cores);
        w.usize(self.arrivals.len());
        for a in &self.arrivals {
            w.u32(*a);
        }
        w.f64s(&self.granted_per_slice);
        w.f64(self.prev_energy_w);
    }

    pub fn read_state(&mut self, r: &mut ByteReader) -> Result<()> {
        let bad = |what: &str| Error::Checkpoint(format!("environment state: bad {what}"));
        self.rng = r.rng()?;
        let d = r.f64s()?;
        if d.len() != self.topology.distances.len() {
            return Err(bad("distance matrix"));
        }
        self.topology.distances.as_mut_slice().copy_from_slice(&d);
        let n = r.usize()?;
        if n > self.cfg.radio.n_users_max {
            return Err(bad("user count"));
        }
        let mut users = Vec::with_capacity(n);
        for _ in 0..n {
            let slice = r.usize()?;
            let slot = r.usize()?;
            if slice >= self.cfg.n_slices() || slot >= self.cfg.radio.n_users_max {
                return Err(bad("user"));
            }
            users.push(User { slice, slot });
        }
        self.users = users;
        self.step_index = r.usize()?;
        self.allocation_cores = r.f64()?;
        self.demand_cores = r.f64()?;
        let l = r.usize()?;
        if l != self.cfg.n_slices() {
            return Err(bad("slice count"));
        }
        self.arrivals = (0..l).map(|_| r.u32()).collect::<Result<_>>()?;
        self.granted_per_slice = r.f64s()?;
        if self.granted_per_slice.len() != l {
            return Err(bad("granted cores"));
        }
        self.prev_energy_w = r.f64()?;
        Ok(())
    }
}

fn arrival_dists(cfg: &EnvConfig) -> Result<Vec<Option<Poisson<f64>>>> {
    cfg.slices
        .iter()
        .map(|s| {
            if s.arrival_rate > 0.0 {
                Poisson::new(s.arrival_rate)
                    .map(Some)
                    .map_err(|e| Error::Config(format!("slice {}: {e}", s.id)))
            } else {
                Ok(None)
            }
        })
        .collect()
}

/// Header of the optional per-step trajectory dump.
pub fn trajectory_header(obs_dim: usize, action_dim: usize) -> String {
    let mut cols = vec!["step".to_string()];
    cols.extend((0..obs_dim).map(|i| format!("obs{i}")));
    cols.extend((0..action_dim).map(|i| format!("act{i}")));
    cols.extend(["reward", "energy_w", "cpu_demand", "violations"].map(String::from));
    cols.join(",")
}

/// One trajectory row: step, observation, action, reward, energy, demand, violating users.
pub fn trajectory_row(step: u64, obs: &[f64], action: &[f64], outcome: &StepOutcome) -> String {
    let mut cols = vec![step.to_string()];
    cols.extend(obs.iter().map(f64::to_string));
    cols.extend(action.iter().map(f64::to_string));
    cols.push(outcome.reward.to_string());
    cols.push(outcome.info.breakdown.total_w.to_string());
    cols.push(outcome.info.breakdown.cpu_demand_cores.to_string());
    cols.push(outcome.info.violations.iter().filter(|v| v.any()).count().to_string());
    cols.join(",")
}
