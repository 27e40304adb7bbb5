//! Experiment configuration file (TOML). Every field has a default.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};

use semsample_core::agent::{ActionMode, RewardWeights, SacConfig, StateEncoder, TrainConfig};
use semsample_core::channel::{ChannelModel, LinkBudget};
use semsample_core::ingest::{generate_traffic, FootageClip, TrafficGenConfig};
use semsample_core::predictor::PredictorConfig;
use semsample_core::simulator::{EnergyConfig, EpisodeConfig, EvalClip, LayoutFidelity, PolicySpec};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub episode: EpisodeSection,
    pub channel: ChannelSection,
    pub sac: SacConfig,
    pub train: TrainSection,
    pub evaluate: EvaluateSection,
    pub train_clips: Vec<ClipSource>,
    pub eval_clips: Vec<ClipSource>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EpisodeSection {
    pub steps: usize,
    pub layouts: LayoutFidelity,
    pub predictor: PredictorConfig,
    pub reward: RewardWeights,
    pub state: StateEncoder,
    pub energy: EnergyConfig,
}

impl Default for EpisodeSection {
    fn default() -> Self {
        let e = EpisodeConfig::default();
        EpisodeSection {
            steps: e.steps,
            layouts: e.layouts,
            predictor: e.predictor,
            reward: e.reward,
            state: e.state,
            energy: e.energy,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelSection {
    pub bandwidth_hz: f64,
    pub snr_threshold_db: f64,
    pub noise_psd_dbm_hz: f64,
    pub distance_m: f64,
    /// Multipath shape.
    pub m: f64,
    /// Shadowing shape.
    pub m_s: f64,
}

impl Default for ChannelSection {
    fn default() -> Self {
        ChannelSection {
            bandwidth_hz: 1_000.0,
            snr_threshold_db: 15.0,
            noise_psd_dbm_hz: -90.0,
            distance_m: 100.0,
            m: 6.0,
            m_s: 6.0,
        }
    }
}

impl ChannelSection {
    pub fn model(&self) -> semsample_core::Result<ChannelModel> {
        let link = LinkBudget::new(self.bandwidth_hz, self.snr_threshold_db, self.noise_psd_dbm_hz, self.distance_m)?;
        ChannelModel::new(link, self.m, self.m_s)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub episodes: usize,
    /// Episodes that replay the same initial scene.
    pub block_len: usize,
    /// Write a checkpoint every this many episodes; 0 writes only at the end.
    pub checkpoint_every: usize,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        TrainSection { episodes: t.episodes, block_len: t.block_len, checkpoint_every: 50 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateSection {
    /// `periodic-N`, `always` or `never`.
    pub baselines: Vec<String>,
    pub agent_mode: ActionMode,
    /// Write a JSON-lines trace per clip and policy.
    pub traces: bool,
}

impl Default for EvaluateSection {
    fn default() -> Self {
        EvaluateSection {
            baselines: ["periodic-4", "periodic-5", "periodic-6", "periodic-7"].map(String::from).to_vec(),
            agent_mode: ActionMode::Greedy,
            traces: true,
        }
    }
}

/// Where a clip comes from: a file, or the traffic generator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClipSource {
    pub name: Option<String>,
    /// DETRAC XML or native JSON; relative to the config file.
    pub path: Option<PathBuf>,
    pub generate: Option<TrafficGenConfig>,
    /// Frames to generate.
    #[serde(default = "default_frames")]
    pub frames: usize,
    /// First frame of the evaluation episode.
    #[serde(default)]
    pub start: usize,
}

fn default_frames() -> usize {
    600
}

impl ClipSource {
    pub fn from_path(path: impl Into<PathBuf>) -> Self {
        ClipSource { name: None, path: Some(path.into()), generate: None, frames: default_frames(), start: 0 }
    }

    pub fn load(&self, base: &Path, index: usize) -> anyhow::Result<FootageClip> {
        match (&self.path, &self.generate) {
            (Some(p), None) => {
                let full = if p.is_absolute() { p.clone() } else { base.join(p) };
                let clip = FootageClip::load(&full).with_context(|| format!("loading clip {}", full.display()))?;
                match &self.name {
                    Some(n) => Ok(FootageClip::new(n.clone(), clip.frame_width(), clip.frame_height(), clip.frames().to_vec())?),
                    None => Ok(clip),
                }
            }
            (None, Some(g)) => {
                let name = self.name.clone().unwrap_or_else(|| format!("synthetic-{index}"));
                Ok(generate_traffic(g, self.frames, name)?)
            }
            _ => bail!("clip {index} needs exactly one of `path` or `generate`"),
        }
    }
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 0,
            episode: EpisodeSection::default(),
            channel: ChannelSection::default(),
            sac: SacConfig::default(),
            train: TrainSection::default(),
            evaluate: EvaluateSection::default(),
            train_clips: default_train_clips(),
            eval_clips: default_eval_clips(),
        }
    }
}

/// Light, medium and heavy traffic.
const PROFILES: [(f64, f64); 3] = [(0.08, 0.012), (0.15, 0.02), (0.25, 0.03)];

fn default_train_clips() -> Vec<ClipSource> {
    PROFILES
        .iter()
        .enumerate()
        .map(|(i, &(spawn_rate, speed_mean))| ClipSource {
            name: Some(format!("train-{i}")),
            path: None,
            generate: Some(TrafficGenConfig { seed: 10 + i as u64, spawn_rate, speed_mean, ..Default::default() }),
            frames: 1000,
            start: 0,
        })
        .collect()
}

fn default_eval_clips() -> Vec<ClipSource> {
    PROFILES
        .iter()
        .enumerate()
        .map(|(i, &(spawn_rate, speed_mean))| ClipSource {
            name: Some(format!("clip-{}", i + 1)),
            path: None,
            generate: Some(TrafficGenConfig { seed: 100 + i as u64, spawn_rate, speed_mean, ..Default::default() }),
            frames: 400,
            start: 0,
        })
        .collect()
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> anyhow::Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).context("invalid configuration")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn to_toml(&self) -> anyhow::Result<String> {
        Ok(toml::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        self.episode_config()?.validate()?;
        self.sac.validate()?;
        if self.train.block_len == 0 {
            bail!("train.block_len must be >= 1");
        }
        for b in &self.evaluate.baselines {
            PolicySpec::parse_baseline(b)?;
        }
        Ok(())
    }

    pub fn episode_config(&self) -> anyhow::Result<EpisodeConfig> {
        let e = &self.episode;
        Ok(EpisodeConfig {
            steps: e.steps,
            predictor: e.predictor.clone(),
            channel: self.channel.model()?,
            reward: e.reward,
            state: e.state.clone(),
            energy: e.energy.clone(),
            layouts: e.layouts,
            seed: self.seed,
        })
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig { episodes: self.train.episodes, block_len: self.train.block_len, seed: self.seed }
    }

    pub fn load_train_clips(&self, base: &Path) -> anyhow::Result<Vec<Arc<FootageClip>>> {
        self.train_clips.iter().enumerate().map(|(i, c)| Ok(Arc::new(c.load(base, i)?))).collect()
    }

    pub fn load_eval_clips(&self, base: &Path, sources: &[ClipSource]) -> anyhow::Result<Vec<EvalClip>> {
        sources
            .iter()
            .enumerate()
            .map(|(i, c)| Ok(EvalClip { clip: Arc::new(c.load(base, i)?), start: c.start }))
            .collect()
    }
}
