use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Episode, EpisodeConfig};
use crate::agent::{EnvStep, Environment};
use crate::error::{Error, Result};
use crate::ingest::FootageClip;

/// Position of the scene draw sequence, for resuming a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvCursor {
    pub rng: ChaCha8Rng,
    pub current: Option<(usize, usize)>,
}

/// Training environment over a pool of clips. A new scene is a random
/// clip and start frame; otherwise the previous start is replayed.
pub struct SamplingEnv {
    config: Arc<EpisodeConfig>,
    clips: Vec<Arc<FootageClip>>,
    rng: ChaCha8Rng,
    current: Option<(usize, usize)>,
    episode: Option<Episode>,
}

impl SamplingEnv {
    pub fn new(config: Arc<EpisodeConfig>, clips: Vec<Arc<FootageClip>>, seed: u64) -> Result<Self> {
        config.validate()?;
        let need = config.frames_needed();
        if !clips.iter().any(|c| c.len() >= need) {
            return Err(Error::Precondition(format!("no clip has the {need} frames an episode needs")));
        }
        Ok(SamplingEnv { config, clips, rng: ChaCha8Rng::seed_from_u64(seed), current: None, episode: None })
    }

    pub fn config(&self) -> &EpisodeConfig {
        &self.config
    }

    /// Clip index and start frame of the current episode.
    pub fn current(&self) -> Option<(usize, usize)> {
        self.current
    }

    pub fn episode(&self) -> Option<&Episode> {
        self.episode.as_ref()
    }

    pub fn cursor(&self) -> EnvCursor {
        EnvCursor { rng: self.rng.clone(), current: self.current }
    }

    pub fn restore(&mut self, cursor: EnvCursor) -> Result<()> {
        if let Some((clip, start)) = cursor.current {
            let ok = self.clips.get(clip).is_some_and(|c| start + self.config.frames_needed() <= c.len());
            if !ok {
                return Err(Error::Precondition(format!("saved scene ({clip}, {start}) does not fit the clip pool")));
            }
        }
        self.rng = cursor.rng;
        self.current = cursor.current;
        self.episode = None;
        Ok(())
    }

    fn draw(&mut self) -> (usize, usize) {
        let need = self.config.frames_needed();
        let eligible: Vec<usize> = (0..self.clips.len()).filter(|&i| self.clips[i].len() >= need).collect();
        let clip = eligible[self.rng.random_range(0..eligible.len())];
        let start = self.rng.random_range(0..=self.clips[clip].len() - need);
        (clip, start)
    }
}

impl Environment for SamplingEnv {
    fn state_dim(&self) -> usize {
        self.config.state.dim()
    }

    fn reset(&mut self, new_scene: bool) -> Result<Vec<f64>> {
        let (clip, start) = match self.current {
            Some(c) if !new_scene => c,
            _ => self.draw(),
        };
        self.current = Some((clip, start));
        let seed = self.rng.random();
        let ep = Episode::start_seeded(Arc::clone(&self.config), Arc::clone(&self.clips[clip]), start, seed)?;
        let features = ep.features()?;
        self.episode = Some(ep);
        Ok(features)
    }

    fn step(&mut self, action: usize) -> Result<EnvStep> {
        let ep = self.episode.as_mut().ok_or_else(|| Error::Precondition("step before reset".into()))?;
        let out = ep.step(action)?;
        Ok(EnvStep {
            applied_action: out.trace.action,
            reward: out.trace.reward,
            next_state: out.next_features,
            done: out.done,
            energy_j: out.trace.energy_j,
            deviation: out.trace.deviation,
        })
    }
}
