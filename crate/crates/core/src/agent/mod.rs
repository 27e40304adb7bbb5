//! Soft actor-critic sampling agent over a binary action space.

mod mlp;
mod sac;
mod train;

pub use mlp::{Adam, Dense, ForwardCache, Gradients, Mlp, ScalarAdam};
pub use sac::{
    actor_loss, critic_loss, critic_targets, policy, temperature_loss, ActionMode, PolicySnapshot, SacAgent, SacConfig,
    UpdateStats, SNAPSHOT_VERSION,
};
pub use train::{Checkpoint, EpisodeRecord, TrainConfig, Trainer, CURVE_HEADER};

use std::collections::VecDeque;

use ndarray::{Array1, Array2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layout::{penalized_deviation, BITS_PER_VEHICLE, MAX_VEHICLES};

pub const ACTION_SKIP: usize = 0;
pub const ACTION_SAMPLE: usize = 1;

/// Raw observation at one interval.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    /// Size of the packet the current scene would produce, bits.
    pub size_bits: usize,
    /// Semantic change degrees, newest first: `[χ_t, χ_{t-1}, ..., χ_{t-W}]`.
    pub chi: Vec<f64>,
    /// Average channel gain (linear).
    pub g_bar: f64,
    /// Intervals since the last sample.
    pub since_sample: u32,
}

/// Fixed-length history of semantic change degrees, newest first, zero
/// padded until it fills.
#[derive(Clone, Debug, PartialEq)]
pub struct ChiWindow {
    values: VecDeque<f64>,
    len: usize,
}

impl ChiWindow {
    /// A window of `w + 1` entries.
    pub fn new(w: usize) -> Self {
        ChiWindow { values: VecDeque::from(vec![0.0; w + 1]), len: w + 1 }
    }

    pub fn push(&mut self, chi: f64) {
        self.values.pop_back();
        self.values.push_front(chi);
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.values.iter().copied().collect()
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Maps raw observations to network features of roughly unit scale.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StateEncoder {
    /// `W`: the window holds `W + 1` values.
    pub window: usize,
    /// Divisor for χ entries (a vehicle-count cap).
    pub chi_scale: f64,
    /// Divisor for the average gain.
    pub g_nominal: f64,
    /// Appends the intervals since the last sample as an extra feature.
    pub include_gap: bool,
    pub gap_scale: f64,
}

impl Default for StateEncoder {
    fn default() -> Self {
        StateEncoder {
            window: 150,
            chi_scale: 16.0,
            g_nominal: 10f64.powf(-11.05),
            include_gap: false,
            gap_scale: 10.0,
        }
    }
}

impl StateEncoder {
    pub fn dim(&self) -> usize {
        self.window + 3 + usize::from(self.include_gap)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.chi_scale > 0.0 && self.g_nominal > 0.0 && self.gap_scale > 0.0) {
            return Err(Error::Config("state scales must be positive".into()));
        }
        Ok(())
    }

    pub fn encode(&self, s: &AgentState) -> Result<Vec<f64>> {
        if s.chi.len() != self.window + 1 {
            return Err(Error::Shape(format!("χ window has {} entries, expected {}", s.chi.len(), self.window + 1)));
        }
        let mut f = Vec::with_capacity(self.dim());
        f.push(s.size_bits as f64 / (MAX_VEHICLES * BITS_PER_VEHICLE) as f64);
        f.extend(s.chi.iter().map(|c| c / self.chi_scale));
        f.push(s.g_bar / self.g_nominal);
        if self.include_gap {
            f.push(s.since_sample as f64 / self.gap_scale);
        }
        Ok(f)
    }
}

/// Reward weights and deviation penalty.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardWeights {
    pub w1: f64,
    pub w2: f64,
    pub w3: f64,
    pub w4: f64,
    pub deviation_threshold: f64,
    pub kappa: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        RewardWeights { w1: 10.0, w2: -6.0, w3: 1.0, w4: 2.0, deviation_threshold: 0.07, kappa: 0.5 }
    }
}

impl RewardWeights {
    /// Reward for sampling at energy `energy_mj` millijoules.
    pub fn sampled(&self, energy_mj: f64) -> f64 {
        self.w2 * (self.w1 * energy_mj).ln_1p()
    }

    /// Reward for skipping when the displayed prediction deviates by `deviation`.
    pub fn skipped(&self, deviation: f64) -> f64 {
        let d_hat = penalized_deviation(deviation, self.deviation_threshold, self.kappa);
        self.w3 - (self.w4 * d_hat - 1.0).exp()
    }
}

/// Immediate reward. `d_hat` is the already penalized deviation.
pub fn reward(action: usize, energy_mj: f64, d_hat: f64, w: &RewardWeights) -> f64 {
    if action == ACTION_SAMPLE {
        w.w2 * (w.w1 * energy_mj).ln_1p()
    } else {
        w.w3 - (w.w4 * d_hat - 1.0).exp()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: usize,
    pub reward: f64,
    pub next_state: Vec<f64>,
    /// Last step of the episode; its successor value is taken as zero.
    pub done: bool,
}

/// A minibatch in matrix form.
#[derive(Clone, Debug, PartialEq)]
pub struct Batch {
    pub states: Array2<f64>,
    pub actions: Vec<usize>,
    pub rewards: Array1<f64>,
    pub next_states: Array2<f64>,
    pub dones: Array1<f64>,
}

impl Batch {
    pub fn from_transitions(ts: &[Transition]) -> Result<Batch> {
        let dim = ts.first().ok_or_else(|| Error::Precondition("empty batch".into()))?.state.len();
        let mut states = Array2::zeros((ts.len(), dim));
        let mut next_states = Array2::zeros((ts.len(), dim));
        for (i, t) in ts.iter().enumerate() {
            if t.state.len() != dim || t.next_state.len() != dim {
                return Err(Error::Shape("transitions with mixed state sizes".into()));
            }
            states.row_mut(i).assign(&ndarray::ArrayView1::from(&t.state[..]));
            next_states.row_mut(i).assign(&ndarray::ArrayView1::from(&t.next_state[..]));
        }
        Ok(Batch {
            states,
            actions: ts.iter().map(|t| t.action).collect(),
            rewards: ts.iter().map(|t| t.reward).collect(),
            next_states,
            dones: ts.iter().map(|t| if t.done { 1.0 } else { 0.0 }).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }
}

/// FIFO replay memory. States are stored in single precision.
#[derive(Clone, Debug)]
pub struct ReplayMemory {
    capacity: usize,
    dim: usize,
    states: Vec<f32>,
    next_states: Vec<f32>,
    actions: Vec<u8>,
    rewards: Vec<f64>,
    dones: Vec<bool>,
    head: usize,
    len: usize,
}

impl ReplayMemory {
    pub fn new(capacity: usize, dim: usize) -> Result<Self> {
        if capacity == 0 || dim == 0 {
            return Err(Error::Config("replay memory needs a positive capacity and state size".into()));
        }
        Ok(ReplayMemory {
            capacity,
            dim,
            states: Vec::new(),
            next_states: Vec::new(),
            actions: Vec::new(),
            rewards: Vec::new(),
            dones: Vec::new(),
            head: 0,
            len: 0,
        })
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

    pub fn push(&mut self, t: &Transition) -> Result<()> {
        if t.state.len() != self.dim || t.next_state.len() != self.dim {
            return Err(Error::Shape(format!("transition state size {} != {}", t.state.len(), self.dim)));
        }
        if t.action > 1 || !t.reward.is_finite() {
            return Err(Error::Precondition(format!("invalid transition (action {}, reward {})", t.action, t.reward)));
        }
        let s = t.state.iter().map(|&v| v as f32);
        let n = t.next_state.iter().map(|&v| v as f32);
        if self.len < self.capacity {
            self.states.extend(s);
            self.next_states.extend(n);
            self.actions.push(t.action as u8);
            self.rewards.push(t.reward);
            self.dones.push(t.done);
            self.len += 1;
        } else {
            let i = self.head;
            let range = i * self.dim..(i + 1) * self.dim;
            self.states[range.clone()].iter_mut().zip(s).for_each(|(d, v)| *d = v);
            self.next_states[range].iter_mut().zip(n).for_each(|(d, v)| *d = v);
            self.actions[i] = t.action as u8;
            self.rewards[i] = t.reward;
            self.dones[i] = t.done;
            self.head = (self.head + 1) % self.capacity;
        }
        Ok(())
    }

    /// Index of the oldest stored transition's slot.
    pub fn oldest_slot(&self) -> usize {
        if self.len < self.capacity {
            0
        } else {
            self.head
        }
    }

    pub fn get(&self, slot: usize) -> Option<Transition> {
        (slot < self.len).then(|| {
            let r = slot * self.dim..(slot + 1) * self.dim;
            Transition {
                state: self.states[r.clone()].iter().map(|&v| v as f64).collect(),
                action: self.actions[slot] as usize,
                reward: self.rewards[slot],
                next_state: self.next_states[r].iter().map(|&v| v as f64).collect(),
                done: self.dones[slot],
            }
        })
    }

    /// Draws `size` distinct stored transitions uniformly.
    pub fn sample<R: Rng + ?Sized>(&self, size: usize, rng: &mut R) -> Result<Batch> {
        if size == 0 || size > self.len {
            return Err(Error::Precondition(format!("cannot draw {size} transitions from {}", self.len)));
        }
        let idx = rand::seq::index::sample(rng, self.len, size);
        self.gather(idx.iter())
    }

    fn gather(&self, idx: impl ExactSizeIterator<Item = usize>) -> Result<Batch> {
        let n = idx.len();
        let mut states = Array2::zeros((n, self.dim));
        let mut next_states = Array2::zeros((n, self.dim));
        let mut actions = Vec::with_capacity(n);
        let mut rewards = Array1::zeros(n);
        let mut dones = Array1::zeros(n);
        for (row, i) in idx.enumerate() {
            let r = i * self.dim..(i + 1) * self.dim;
            states.row_mut(row).iter_mut().zip(&self.states[r.clone()]).for_each(|(d, &v)| *d = v as f64);
            next_states.row_mut(row).iter_mut().zip(&self.next_states[r]).for_each(|(d, &v)| *d = v as f64);
            actions.push(self.actions[i] as usize);
            rewards[row] = self.rewards[i];
            dones[row] = if self.dones[i] { 1.0 } else { 0.0 };
        }
        Ok(Batch { states, actions, rewards, next_states, dones })
    }
}

/// Outcome of one environment step.
#[derive(Clone, Debug, PartialEq)]
pub struct EnvStep {
    /// Action actually taken; may differ from the request when the
    /// environment forces a sample.
    pub applied_action: usize,
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub done: bool,
    pub energy_j: f64,
    /// Deviation of the displayed prediction, on steps without a sample.
    pub deviation: Option<f64>,
}

/// Episodic environment driven by the trainer.
pub trait Environment {
    fn state_dim(&self) -> usize;

    /// Begins an episode and returns its first state. With `new_scene` the
    /// environment draws a fresh initial scene, otherwise it replays the
    /// previous one.
    fn reset(&mut self, new_scene: bool) -> Result<Vec<f64>>;

    fn step(&mut self, action: usize) -> Result<EnvStep>;
}
