//! The sampling environment: a source walking through a clip, a channel
//! that prices transmissions, and a destination that fills the gaps.

mod compare;
mod env;
mod policy;

pub use compare::{compare_policies, run_comparison, ComparisonRow, EvalClip, COMPARISON_HEADER};
pub use env::{EnvCursor, SamplingEnv};
pub use policy::{AgentPolicy, NeverPolicy, PeriodicPolicy, PolicySpec, SamplingPolicy};

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::agent::{AgentState, ChiWindow, RewardWeights, StateEncoder, ACTION_SAMPLE, ACTION_SKIP};
use crate::channel::{sample_energy, ChannelModel};
use crate::error::{Error, Result};
use crate::ingest::FootageClip;
use crate::layout::{
    decode_message, encode_message, penalized_deviation, prediction_deviation, rasterize, semantic_change,
    SceneAnnotation, SemanticMessage, BITS_PER_VEHICLE,
};
use crate::predictor::{ConstantVelocity, DestinationState, DisplaySource, Feedback, PredictorConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnergyMode {
    /// Expected energy under the fading distribution.
    ClosedForm,
    /// One fading realization per transmission interval.
    Stochastic,
}

/// What the destination rebuilds its layouts from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayoutFidelity {
    /// Exact annotation boxes; packets only set the transmitted size.
    Exact,
    /// Boxes decoded from the packet, on the 1/32 grid.
    Quantized,
}

impl LayoutFidelity {
    /// The scene the destination would rebuild from `scene`.
    pub fn received(self, scene: &SceneAnnotation) -> Result<SceneAnnotation> {
        match self {
            LayoutFidelity::Exact => Ok(scene.clone()),
            LayoutFidelity::Quantized => decode_message(&encode_message(scene)?),
        }
    }
}

/// How transmit energy is computed and how it enters the reward.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnergyConfig {
    pub mode: EnergyMode,
    /// Transmission interval for the stochastic mode, seconds.
    pub tti_s: f64,
    /// The reward sees energy rescaled so that a packet of `anchor_bits`
    /// costs `anchor_mj` millijoules under the closed form.
    pub anchor_mj: f64,
    pub anchor_bits: usize,
}

impl Default for EnergyConfig {
    fn default() -> Self {
        EnergyConfig { mode: EnergyMode::ClosedForm, tti_s: 1e-3, anchor_mj: 0.015, anchor_bits: 10 * BITS_PER_VEHICLE }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EpisodeConfig {
    /// Decision intervals per episode, after the two start-up frames.
    pub steps: usize,
    pub predictor: PredictorConfig,
    pub channel: ChannelModel,
    pub reward: RewardWeights,
    pub state: StateEncoder,
    pub energy: EnergyConfig,
    pub layouts: LayoutFidelity,
    pub seed: u64,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        EpisodeConfig {
            steps: 150,
            predictor: PredictorConfig::default(),
            channel: ChannelModel::desk_default(),
            reward: RewardWeights::default(),
            state: StateEncoder::default(),
            energy: EnergyConfig::default(),
            layouts: LayoutFidelity::Exact,
            seed: 0,
        }
    }
}

impl EpisodeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps < 2 {
            return Err(Error::Config(format!("episodes need at least 2 steps, got {}", self.steps)));
        }
        self.predictor.validate()?;
        self.state.validate()?;
        let e = &self.energy;
        if !(e.tti_s.is_finite() && e.tti_s > 0.0) {
            return Err(Error::Config(format!("transmission interval {} must be > 0", e.tti_s)));
        }
        if !(e.anchor_mj.is_finite() && e.anchor_mj > 0.0) || e.anchor_bits == 0 {
            return Err(Error::Config("energy anchor must be positive".into()));
        }
        Ok(())
    }

    /// Millijoules seen by the reward per physical joule.
    pub fn reward_energy_scale(&self) -> Result<f64> {
        Ok(self.energy.anchor_mj / self.channel.expected_energy(self.energy.anchor_bits)?)
    }

    /// Frames an episode needs from its start offset.
    pub fn frames_needed(&self) -> usize {
        self.steps + 2
    }
}

/// Everything recorded about one decision interval.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepTrace {
    pub t: i64,
    pub requested_action: usize,
    pub action: usize,
    /// The sample was imposed after a large deviation at the previous sample.
    pub forced: bool,
    pub reward: f64,
    pub energy_j: f64,
    pub size_bits: usize,
    pub chi: f64,
    /// Deviation of the displayed prediction from the real layout (skips only).
    pub deviation: Option<f64>,
    pub penalized_deviation: Option<f64>,
    /// Deviation of the received layout from the prediction (samples only).
    pub received_deviation: Option<f64>,
    pub source: DisplaySource,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    pub cumulative_reward: f64,
    /// Start-up transmissions plus every sampled step, joules.
    pub total_energy_j: f64,
    pub bootstrap_energy_j: f64,
    /// Mean deviation over steps that displayed a prediction.
    pub mean_deviation: f64,
    pub sample_count: usize,
    pub forced_samples: usize,
    pub steps: usize,
    /// The clip ran out before the configured number of steps.
    pub truncated: bool,
    pub trace: Vec<StepTrace>,
}

impl EpisodeMetrics {
    pub fn trace_jsonl(&self) -> Result<String> {
        let mut out = String::new();
        for s in &self.trace {
            out.push_str(&serde_json::to_string(s)?);
            out.push('\n');
        }
        Ok(out)
    }
}

/// Result of advancing an episode by one interval.
#[derive(Clone, Debug, PartialEq)]
pub struct StepResult {
    pub trace: StepTrace,
    /// Observation for the next interval; repeats the current one at the end.
    pub next_state: AgentState,
    pub next_features: Vec<f64>,
    pub done: bool,
}

/// One episode in progress over a shared clip.
#[derive(Clone, Debug)]
pub struct Episode {
    config: Arc<EpisodeConfig>,
    clip: Arc<FootageClip>,
    start: usize,
    dest: DestinationState<ConstantVelocity>,
    t: i64,
    last_sampled: SceneAnnotation,
    t_hat: i64,
    chi: ChiWindow,
    state: AgentState,
    force_next: bool,
    energy_scale: f64,
    energy_rng: ChaCha8Rng,
    metrics: EpisodeMetrics,
    deviation_sum: f64,
    deviation_n: usize,
}

impl Episode {
    /// Transmits the frames at `start` and `start + 1` (intervals -1 and 0)
    /// and positions the episode at interval 1.
    pub fn start(config: Arc<EpisodeConfig>, clip: Arc<FootageClip>, start: usize) -> Result<Self> {
        let seed = config.seed;
        Self::start_seeded(config, clip, start, seed)
    }

    /// Like [`Episode::start`] with an explicit seed for stochastic energies.
    pub fn start_seeded(config: Arc<EpisodeConfig>, clip: Arc<FootageClip>, start: usize, seed: u64) -> Result<Self> {
        config.validate()?;
        let frames = clip.frames();
        if frames.len() < start + 3 {
            return Err(Error::Precondition(format!(
                "clip `{}` has {} frames, an episode from offset {start} needs at least {}",
                clip.name(),
                frames.len(),
                start + 3
            )));
        }
        let first = encode_message(&frames[start])?;
        let second = encode_message(&frames[start + 1])?;
        let (dest, _) = DestinationState::bootstrap_scenes(
            config.predictor.clone(),
            ConstantVelocity,
            -1,
            &config.layouts.received(&frames[start])?,
            &config.layouts.received(&frames[start + 1])?,
        )?;
        let mut energy_rng = ChaCha8Rng::seed_from_u64(seed);
        let bootstrap_energy_j = transmission_energy(&config, &first, &mut energy_rng)?
            + transmission_energy(&config, &second, &mut energy_rng)?;
        let metrics = EpisodeMetrics {
            cumulative_reward: 0.0,
            total_energy_j: bootstrap_energy_j,
            bootstrap_energy_j,
            mean_deviation: 0.0,
            sample_count: 0,
            forced_samples: 0,
            steps: 0,
            truncated: false,
            trace: Vec::with_capacity(config.steps),
        };
        let mut ep = Episode {
            energy_scale: config.reward_energy_scale()?,
            chi: ChiWindow::new(config.state.window),
            state: AgentState { size_bits: 0, chi: Vec::new(), g_bar: 0.0, since_sample: 0 },
            last_sampled: frames[start + 1].clone(),
            t_hat: 0,
            t: 1,
            force_next: false,
            dest,
            energy_rng,
            metrics,
            deviation_sum: 0.0,
            deviation_n: 0,
            config,
            clip,
            start,
        };
        ep.state = ep.observe()?;
        Ok(ep)
    }

    fn frame(&self, t: i64) -> Option<&SceneAnnotation> {
        let idx = self.start as i64 + 1 + t;
        usize::try_from(idx).ok().and_then(|i| self.clip.frames().get(i))
    }

    /// Builds the observation at the current interval and advances the χ window.
    fn observe(&mut self) -> Result<AgentState> {
        let scene = self.frame(self.t).ok_or_else(|| Error::Precondition("no frame to observe".into()))?;
        let chi = semantic_change(scene, &self.last_sampled);
        let size_bits = scene.len() * BITS_PER_VEHICLE;
        self.chi.push(chi);
        Ok(AgentState {
            size_bits,
            chi: self.chi.to_vec(),
            g_bar: self.config.channel.fading.g_bar(),
            since_sample: (self.t - self.t_hat) as u32,
        })
    }

    pub fn state(&self) -> &AgentState {
        &self.state
    }

    pub fn features(&self) -> Result<Vec<f64>> {
        self.config.state.encode(&self.state)
    }

    /// Interval the next call to [`Episode::step`] handles.
    pub fn t(&self) -> i64 {
        self.t
    }

    pub fn config(&self) -> &EpisodeConfig {
        &self.config
    }

    pub fn is_done(&self) -> bool {
        self.metrics.steps >= self.config.steps || self.metrics.truncated
    }

    /// The next decision will be overridden to a sample.
    pub fn sample_forced(&self) -> bool {
        self.force_next
    }

    pub fn step(&mut self, requested: usize) -> Result<StepResult> {
        if self.is_done() {
            return Err(Error::Precondition("episode already finished".into()));
        }
        if requested > ACTION_SAMPLE {
            return Err(Error::Precondition(format!("invalid action {requested}")));
        }
        let t = self.t;
        let scene = self.frame(t).expect("frame checked when observed").clone();
        let forced = self.force_next;
        let action = if forced { ACTION_SAMPLE } else { requested };
        self.force_next = false;
        let msg = encode_message(&scene)?;
        let cfg = Arc::clone(&self.config);
        let real_scene = cfg.layouts.received(&scene)?;
        let out = self.dest.step_scene(t, (action == ACTION_SAMPLE).then_some(&real_scene))?;
        let mut trace = StepTrace {
            t,
            requested_action: requested,
            action,
            forced,
            reward: 0.0,
            energy_j: 0.0,
            size_bits: msg.size_bits(),
            chi: self.state.chi[0],
            deviation: None,
            penalized_deviation: None,
            received_deviation: out.deviation,
            source: out.source,
        };
        if action == ACTION_SAMPLE {
            let e = transmission_energy(&cfg, &msg, &mut self.energy_rng)?;
            trace.energy_j = e;
            trace.reward = cfg.reward.sampled(e * self.energy_scale);
            self.t_hat = t;
            self.last_sampled = scene;
            if out.feedback == Feedback::RequestResample {
                self.force_next = true;
            }
            self.metrics.sample_count += 1;
            if forced {
                self.metrics.forced_samples += 1;
            }
        } else {
            let real = rasterize(&real_scene, cfg.predictor.width, cfg.predictor.height);
            let d = prediction_deviation(&real, &out.displayed)?;
            let d_hat = penalized_deviation(d, cfg.reward.deviation_threshold, cfg.reward.kappa);
            trace.deviation = Some(d);
            trace.penalized_deviation = Some(d_hat);
            trace.reward = crate::agent::reward(ACTION_SKIP, 0.0, d_hat, &cfg.reward);
            self.deviation_sum += d;
            self.deviation_n += 1;
        }
        self.metrics.cumulative_reward += trace.reward;
        self.metrics.total_energy_j += trace.energy_j;
        self.metrics.steps += 1;
        self.metrics.mean_deviation =
            if self.deviation_n > 0 { self.deviation_sum / self.deviation_n as f64 } else { 0.0 };
        self.metrics.trace.push(trace.clone());
        self.t += 1;
        if self.metrics.steps < cfg.steps && self.frame(self.t).is_none() {
            self.metrics.truncated = true;
        }
        let done = self.is_done();
        if self.frame(self.t).is_some() {
            self.state = self.observe()?;
        }
        Ok(StepResult { trace, next_features: cfg.state.encode(&self.state)?, next_state: self.state.clone(), done })
    }

    pub fn metrics(&self) -> &EpisodeMetrics {
        &self.metrics
    }

    pub fn into_metrics(self) -> EpisodeMetrics {
        self.metrics
    }

    pub fn destination(&self) -> &DestinationState<ConstantVelocity> {
        &self.dest
    }
}

fn transmission_energy(cfg: &EpisodeConfig, msg: &SemanticMessage, rng: &mut ChaCha8Rng) -> Result<f64> {
    match cfg.energy.mode {
        EnergyMode::ClosedForm => cfg.channel.expected_energy(msg.size_bits()),
        EnergyMode::Stochastic => {
            sample_energy(msg.size_bits(), &cfg.channel.link, &cfg.channel.fading, cfg.energy.tti_s, rng)
        }
    }
}

/// Runs a full episode of `policy` over `clip` from frame `start`.
pub fn run_episode<P: SamplingPolicy + ?Sized>(
    config: Arc<EpisodeConfig>,
    clip: Arc<FootageClip>,
    start: usize,
    policy: &mut P,
) -> Result<EpisodeMetrics> {
    let mut ep = Episode::start(config, clip, start)?;
    policy.reset();
    while !ep.is_done() {
        let features = ep.features()?;
        let action = policy.decide(ep.t(), ep.state(), &features)?;
        ep.step(action)?;
    }
    Ok(ep.into_metrics())
}
