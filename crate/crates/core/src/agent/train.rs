use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::sac::{ActionMode, SacAgent, SacConfig, UpdateStats};
use super::{Environment, ReplayMemory, Transition, ACTION_SAMPLE};
use crate::error::{Error, Result};

pub const CURVE_HEADER: &str = "episode,cum_reward,energy_J,mean_deviation,samples";

const MAX_EPISODE_STEPS: usize = 1_000_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub episodes: usize,
    /// Episodes that share one initial scene.
    pub block_len: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { episodes: 500, block_len: 20, seed: 0 }
    }
}

/// Per-episode learning-curve entry.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub episode: usize,
    pub cum_reward: f64,
    pub energy_j: f64,
    /// Mean deviation over steps that displayed a prediction; 0 if none did.
    pub mean_deviation: f64,
    pub samples: usize,
    pub steps: usize,
    pub temperature: f64,
    pub last_update: Option<UpdateStats>,
}

impl EpisodeRecord {
    pub fn csv_row(&self) -> String {
        format!("{},{},{},{},{}", self.episode, self.cum_reward, self.energy_j, self.mean_deviation, self.samples)
    }
}

/// Learner state that survives a restart. The replay memory is not kept.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub agent: SacAgent,
    pub rng: ChaCha8Rng,
    pub episodes_done: usize,
    pub env_steps: u64,
    pub block_len: usize,
    pub records: Vec<EpisodeRecord>,
}

/// Runs the interaction loop: act, store, update.
pub struct Trainer {
    agent: SacAgent,
    memory: ReplayMemory,
    rng: ChaCha8Rng,
    episodes_done: usize,
    env_steps: u64,
    block_len: usize,
    records: Vec<EpisodeRecord>,
}

impl Trainer {
    pub fn new(sac: SacConfig, state_dim: usize, train: &TrainConfig) -> Result<Self> {
        if train.block_len == 0 {
            return Err(Error::Config("scene block length must be >= 1".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(train.seed);
        let memory = ReplayMemory::new(sac.replay_capacity, state_dim)?;
        let agent = SacAgent::new(sac, state_dim, &mut rng)?;
        Ok(Trainer { agent, memory, rng, episodes_done: 0, env_steps: 0, block_len: train.block_len, records: Vec::new() })
    }

    pub fn from_checkpoint(c: Checkpoint) -> Result<Self> {
        if c.version != super::SNAPSHOT_VERSION {
            return Err(Error::Config(format!("checkpoint version {} is not supported", c.version)));
        }
        let memory = ReplayMemory::new(c.agent.config().replay_capacity, c.agent.state_dim())?;
        Ok(Trainer {
            agent: c.agent,
            memory,
            rng: c.rng,
            episodes_done: c.episodes_done,
            env_steps: c.env_steps,
            block_len: c.block_len,
            records: c.records,
        })
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            version: super::SNAPSHOT_VERSION,
            agent: self.agent.clone(),
            rng: self.rng.clone(),
            episodes_done: self.episodes_done,
            env_steps: self.env_steps,
            block_len: self.block_len,
            records: self.records.clone(),
        }
    }

    pub fn agent(&self) -> &SacAgent {
        &self.agent
    }

    pub fn into_agent(self) -> SacAgent {
        self.agent
    }

    pub fn records(&self) -> &[EpisodeRecord] {
        &self.records
    }

    pub fn episodes_done(&self) -> usize {
        self.episodes_done
    }

    pub fn memory(&self) -> &ReplayMemory {
        &self.memory
    }

    /// Plays one episode with stochastic actions, updating as it goes.
    pub fn run_episode<E: Environment + ?Sized>(&mut self, env: &mut E) -> Result<EpisodeRecord> {
        if env.state_dim() != self.agent.state_dim() {
            return Err(Error::Shape(format!(
                "environment state has {} features, agent expects {}",
                env.state_dim(),
                self.agent.state_dim()
            )));
        }
        let cfg = self.agent.config().clone();
        let ready = cfg.warmup.max(cfg.batch_size);
        let new_scene = self.episodes_done % self.block_len == 0;
        let mut state = env.reset(new_scene)?;
        let (mut reward, mut energy, mut dev_sum, mut dev_n, mut samples, mut steps) = (0.0, 0.0, 0.0, 0usize, 0, 0);
        let mut last_update = None;
        loop {
            let action = self.agent.select_action(&state, ActionMode::Stochastic, &mut self.rng)?;
            let out = env.step(action)?;
            if !out.reward.is_finite() {
                return Err(Error::Divergence(format!("environment returned reward {}", out.reward)));
            }
            self.memory.push(&Transition {
                state: std::mem::take(&mut state),
                action: out.applied_action,
                reward: out.reward,
                next_state: out.next_state.clone(),
                done: out.done,
            })?;
            self.env_steps += 1;
            steps += 1;
            reward += out.reward;
            energy += out.energy_j;
            if let Some(d) = out.deviation {
                dev_sum += d;
                dev_n += 1;
            }
            if out.applied_action == ACTION_SAMPLE {
                samples += 1;
            }
            if self.memory.len() >= ready && self.env_steps % cfg.update_interval as u64 == 0 {
                let batch = self.memory.sample(cfg.batch_size, &mut self.rng)?;
                last_update = Some(self.agent.update(&batch)?);
            }
            state = out.next_state;
            if out.done {
                break;
            }
            if steps >= MAX_EPISODE_STEPS {
                return Err(Error::Precondition("environment never ended the episode".into()));
            }
        }
        let record = EpisodeRecord {
            episode: self.episodes_done,
            cum_reward: reward,
            energy_j: energy,
            mean_deviation: if dev_n > 0 { dev_sum / dev_n as f64 } else { 0.0 },
            samples,
            steps,
            temperature: self.agent.temperature(),
            last_update,
        };
        self.episodes_done += 1;
        self.records.push(record.clone());
        log::debug!(
            "episode {} reward {:.3} samples {} temperature {:.4}",
            record.episode,
            record.cum_reward,
            record.samples,
            record.temperature
        );
        Ok(record)
    }

    pub fn train<E: Environment + ?Sized>(&mut self, env: &mut E, episodes: usize) -> Result<()> {
        for _ in 0..episodes {
            self.run_episode(env)?;
        }
        Ok(())
    }

    /// Learning curve as CSV, header included.
    pub fn curve_csv(&self) -> String {
        let mut s = String::from(CURVE_HEADER);
        s.push('\n');
        for r in &self.records {
            s.push_str(&r.csv_row());
            s.push('\n');
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::EnvStep;
    use rand::Rng;

    /// Action 0 pays +1, action 1 pays -1; states are random noise.
    struct Bandit {
        rng: ChaCha8Rng,
        t: usize,
        horizon: usize,
    }

    impl Bandit {
        fn obs(&mut self) -> Vec<f64> {
            (0..4).map(|_| self.rng.random::<f64>()).collect()
        }
    }

    impl Environment for Bandit {
        fn state_dim(&self) -> usize {
            4
        }
        fn reset(&mut self, _new_scene: bool) -> Result<Vec<f64>> {
            self.t = 0;
            Ok(self.obs())
        }
        fn step(&mut self, action: usize) -> Result<EnvStep> {
            self.t += 1;
            Ok(EnvStep {
                applied_action: action,
                reward: if action == 0 { 1.0 } else { -1.0 },
                next_state: self.obs(),
                done: self.t == self.horizon,
                energy_j: 0.0,
                deviation: None,
            })
        }
    }

    fn small_cfg() -> SacConfig {
        SacConfig {
            hidden: vec![16, 16],
            lr_actor: 3e-3,
            lr_critic: 3e-3,
            lr_temperature: 3e-3,
            gamma: 0.9,
            batch_size: 32,
            warmup: 64,
            replay_capacity: 2000,
            ..Default::default()
        }
    }

    #[test]
    fn learns_bandit() {
        let mut env = Bandit { rng: ChaCha8Rng::seed_from_u64(1), t: 0, horizon: 10 };
        let mut tr = Trainer::new(small_cfg(), 4, &TrainConfig { seed: 2, ..Default::default() }).unwrap();
        tr.train(&mut env, 100).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let zeros = (0..1000)
            .filter(|_| {
                let s: Vec<f64> = (0..4).map(|_| rng.random()).collect();
                tr.agent().select_action(&s, ActionMode::Greedy, &mut rng).unwrap() == 0
            })
            .count();
        assert!(zeros >= 990, "{zeros}");
        assert_eq!(tr.records().len(), 100);
    }

    #[test]
    fn deterministic_curve_and_resume() {
        let run = |split: bool| {
            let mut env = Bandit { rng: ChaCha8Rng::seed_from_u64(1), t: 0, horizon: 10 };
            let cfg = SacConfig { warmup: 0, ..small_cfg() };
            let mut tr = Trainer::new(cfg, 4, &TrainConfig { seed: 5, ..Default::default() }).unwrap();
            tr.train(&mut env, 6).unwrap();
            if split {
                let text = serde_json::to_string(&tr.checkpoint()).unwrap();
                let c: Checkpoint = serde_json::from_str(&text).unwrap();
                assert_eq!(c, tr.checkpoint());
            }
            tr.curve_csv()
        };
        assert_eq!(run(false), run(false));
        assert_eq!(run(false), run(true));
        let csv = run(false);
        assert!(csv.starts_with(CURVE_HEADER));
        assert_eq!(csv.lines().count(), 7);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let mut env = Bandit { rng: ChaCha8Rng::seed_from_u64(1), t: 0, horizon: 3 };
        let mut tr = Trainer::new(small_cfg(), 5, &TrainConfig::default()).unwrap();
        assert!(tr.run_episode(&mut env).is_err());
    }
}
