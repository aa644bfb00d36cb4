use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::codec::{ByteReader, ByteWriter};
use crate::{Error, Result};

/// A minibatch in row-major layout.
#[derive(Clone, Debug, PartialEq)]
pub struct Batch {
    pub size: usize,
    pub states: Vec<f64>,
    pub actions: Vec<f64>,
    pub rewards: Vec<f64>,
    pub next_states: Vec<f64>,
    /// 1.0 where the transition ended in a terminal state.
    pub dones: Vec<f64>,
}

/// Fixed-capacity FIFO of transitions with uniform sampling (with replacement).
#[derive(Clone, Debug, PartialEq)]
pub struct ReplayBuffer {
    capacity: usize,
    obs_dim: usize,
    act_dim: usize,
    states: Vec<f64>,
    actions: Vec<f64>,
    rewards: Vec<f64>,
    next_states: Vec<f64>,
    dones: Vec<bool>,
    len: usize,
    /// Slot the next push writes to.
    head: usize,
    rng: ChaCha8Rng,
}

impl ReplayBuffer {
    pub fn new(capacity: usize, obs_dim: usize, act_dim: usize, seed: u64) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self {
            capacity,
            obs_dim,
            act_dim,
            states: Vec::new(),
            actions: Vec::new(),
            rewards: Vec::new(),
            next_states: Vec::new(),
            dones: Vec::new(),
            len: 0,
            head: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn push(&mut self, state: &[f64], action: &[f64], reward: f64, next_state: &[f64], done: bool) {
        assert_eq!(state.len(), self.obs_dim, "state width");
        assert_eq!(next_state.len(), self.obs_dim, "next-state width");
        assert_eq!(action.len(), self.act_dim, "action width");
        if self.len < self.capacity {
            self.states.extend_from_slice(state);
            self.actions.extend_from_slice(action);
            self.rewards.push(reward);
            self.next_states.extend_from_slice(next_state);
            self.dones.push(done);
            self.len += 1;
        } else {
            let i = self.head;
            self.states[i * self.obs_dim..(i + 1) * self.obs_dim].copy_from_slice(state);
            self.actions[i * self.act_dim..(i + 1) * self.act_dim].copy_from_slice(action);
            self.rewards[i] = reward;
            self.next_states[i * self.obs_dim..(i + 1) * self.obs_dim].copy_from_slice(next_state);
            self.dones[i] = done;
        }
        self.head = (self.head + 1) % self.capacity;
    }

    /// Reward of the `k`-th oldest stored transition.
    pub fn reward_at_age(&self, k: usize) -> Option<f64> {
        (k < self.len).then(|| {
            let oldest = if self.len < self.capacity { 0 } else { self.head };
            self.rewards[(oldest + k) % self.capacity]
        })
    }

    pub fn sample_indices(&mut self, n: usize) -> Vec<usize> {
        assert!(self.len > 0, "sampling from an empty replay buffer");
        (0..n).map(|_| self.rng.random_range(0..self.len)).collect()
    }

    pub fn sample(&mut self, n: usize) -> Batch {
        let idx = self.sample_indices(n);
        self.gather(&idx)
    }

    pub fn gather(&self, idx: &[usize]) -> Batch {
        let (od, ad) = (self.obs_dim, self.act_dim);
        let mut b = Batch {
            size: idx.len(),
            states: Vec::with_capacity(idx.len() * od),
            actions: Vec::with_capacity(idx.len() * ad),
            rewards: Vec::with_capacity(idx.len()),
            next_states: Vec::with_capacity(idx.len() * od),
            dones: Vec::with_capacity(idx.len()),
        };
        for &i in idx {
            b.states.extend_from_slice(&self.states[i * od..(i + 1) * od]);
            b.actions.extend_from_slice(&self.actions[i * ad..(i + 1) * ad]);
            b.rewards.push(self.rewards[i]);
            b.next_states.extend_from_slice(&self.next_states[i * od..(i + 1) * od]);
            b.dones.push(if self.dones[i] { 1.0 } else { 0.0 });
        }
        b
    }

    /// Metadata and RNG always; transitions only when `contents` is set.
    pub fn write(&self, w: &mut ByteWriter, contents: bool) {
        for v in [self.capacity, self.obs_dim, self.act_dim, self.len, self.head] {
            w.usize(v);
        }
        w.rng(&self.rng);
        w.bool(contents);
        if contents {
            w.f64s(&self.states);
            w.f64s(&self.actions);
            w.f64s(&self.rewards);
            w.f64s(&self.next_states);
            w.bytes(&self.dones.iter().map(|&d| d as u8).collect::<Vec<_>>());
        }
    }

    /// Restores a buffer. Without stored contents the buffer comes back empty
    /// but keeps its sampling RNG.
    pub fn read(r: &mut ByteReader) -> Result<Self> {
        let capacity = r.usize()?;
        let obs_dim = r.usize()?;
        let act_dim = r.usize()?;
        let len = r.usize()?;
        let head = r.usize()?;
        let rng = r.rng()?;
        if capacity == 0 || len > capacity || head >= capacity {
            return Err(Error::Checkpoint("inconsistent replay metadata".into()));
        }
        let mut buf = Self { rng, ..Self::new(capacity, obs_dim, act_dim, 0) };
        if r.bool()? {
            buf.states = r.f64s()?;
            buf.actions = r.f64s()?;
            buf.rewards = r.f64s()?;
            buf.next_states = r.f64s()?;
            buf.dones = r.bytes()?.into_iter().map(|b| b != 0).collect();
            let ok = buf.states.len() == len * obs_dim
                && buf.actions.len() == len * act_dim
                && buf.rewards.len() == len
                && buf.next_states.len() == len * obs_dim
                && buf.dones.len() == len;
            if !ok {
                return Err(Error::Checkpoint("replay contents do not match metadata".into()));
            }
            buf.len = len;
            buf.head = head;
        }
        Ok(buf)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fifo_eviction() {
        let mut b = ReplayBuffer::new(3, 1, 1, 0);
        for k in 0..5 {
            b.push(&[k as f64], &[0.0], k as f64, &[0.0], false);
        }
        assert_eq!(b.len(), 3);
        let oldest: Vec<f64> = (0..3).map(|k| b.reward_at_age(k).unwrap()).collect();
        assert_eq!(oldest, vec![2.0, 3.0, 4.0]);
    }

    #[test]
    fn roundtrip_with_contents() {
        let mut b = ReplayBuffer::new(4, 2, 1, 3);
        for k in 0..6 {
            let x = k as f64;
            b.push(&[x, -x], &[0.5], x, &[x + 1.0, 0.0], k % 2 == 0);
        }
        let mut w = ByteWriter::new();
        b.write(&mut w, true);
        let bytes = w.into_bytes();
        let mut c = ReplayBuffer::read(&mut ByteReader::new(&bytes)).unwrap();
        assert_eq!(b, c);
        assert_eq!(b.sample(8), c.sample(8));
    }
}
