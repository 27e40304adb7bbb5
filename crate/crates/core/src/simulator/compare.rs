use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{run_episode, EpisodeConfig, EpisodeMetrics, PolicySpec};
use crate::error::Result;
use crate::ingest::FootageClip;

pub const COMPARISON_HEADER: &str = "clip,policy,cum_reward,energy_J,mean_deviation,samples,forced_samples";

/// A clip evaluated from a fixed start frame.
#[derive(Clone, Debug)]
pub struct EvalClip {
    pub clip: Arc<FootageClip>,
    pub start: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub clip: String,
    pub policy: String,
    pub cumulative_reward: f64,
    pub total_energy_j: f64,
    pub mean_deviation: f64,
    pub sample_count: usize,
    pub forced_samples: usize,
}

impl ComparisonRow {
    fn from_metrics(clip: &str, policy: String, m: &EpisodeMetrics) -> Self {
        ComparisonRow {
            clip: clip.to_string(),
            policy,
            cumulative_reward: m.cumulative_reward,
            total_energy_j: m.total_energy_j,
            mean_deviation: m.mean_deviation,
            sample_count: m.sample_count,
            forced_samples: m.forced_samples,
        }
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.clip,
            self.policy,
            self.cumulative_reward,
            self.total_energy_j,
            self.mean_deviation,
            self.sample_count,
            self.forced_samples
        )
    }
}

/// Runs every policy on every clip. Rows come back clip-major in input
/// order regardless of how the jobs were scheduled.
pub fn compare_policies(
    config: Arc<EpisodeConfig>,
    clips: &[EvalClip],
    policies: &[PolicySpec],
    seed: u64,
) -> Result<Vec<ComparisonRow>> {
    Ok(run_comparison(config, clips, policies, seed)?.into_iter().map(|(row, _)| row).collect())
}

/// [`compare_policies`] keeping the full episode metrics of every run.
pub fn run_comparison(
    config: Arc<EpisodeConfig>,
    clips: &[EvalClip],
    policies: &[PolicySpec],
    seed: u64,
) -> Result<Vec<(ComparisonRow, EpisodeMetrics)>> {
    let jobs: Vec<(usize, usize)> =
        (0..clips.len()).flat_map(|c| (0..policies.len()).map(move |p| (c, p))).collect();
    jobs.par_iter()
        .map(|&(c, p)| {
            let clip = &clips[c];
            let spec = &policies[p];
            let mut policy = spec.build(seed.wrapping_add(c as u64));
            let m = run_episode(Arc::clone(&config), Arc::clone(&clip.clip), clip.start, policy.as_mut())?;
            Ok((ComparisonRow::from_metrics(clip.clip.name(), spec.name(), &m), m))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::StateEncoder;
    use crate::ingest::{generate_traffic, TrafficGenConfig};

    #[test]
    fn ordered_and_reproducible() {
        let cfg = Arc::new(EpisodeConfig {
            steps: 30,
            state: StateEncoder { window: 5, ..Default::default() },
            ..Default::default()
        });
        let clips: Vec<EvalClip> = (0..3)
            .map(|i| EvalClip {
                clip: Arc::new(generate_traffic(&TrafficGenConfig { seed: i, ..Default::default() }, 40, &format!("c{i}")).unwrap()),
                start: i as usize,
            })
            .collect();
        let specs = [PolicySpec::Periodic(1), PolicySpec::Periodic(5), PolicySpec::Never];
        let a = compare_policies(cfg.clone(), &clips, &specs, 0).unwrap();
        let b = compare_policies(cfg, &clips, &specs, 0).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 9);
        assert_eq!(a[0].clip, "c0");
        assert_eq!(a[1].policy, "periodic-5");
        assert_eq!(a[8].clip, "c2");
        assert_eq!(a[0].sample_count, 30);
        assert_eq!(a[0].mean_deviation, 0.0);
        assert!(a[0].total_energy_j > a[1].total_energy_j);
    }
}
