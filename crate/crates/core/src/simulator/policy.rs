use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

use crate::agent::{ActionMode, AgentState, PolicySnapshot, ACTION_SAMPLE, ACTION_SKIP};
use crate::error::{Error, Result};

/// Decides, once per interval, whether the source transmits.
pub trait SamplingPolicy {
    fn name(&self) -> String;

    /// Called before every episode.
    fn reset(&mut self) {}

    fn decide(&mut self, t: i64, state: &AgentState, features: &[f64]) -> Result<usize>;
}

/// Samples whenever `t` is a multiple of the period.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PeriodicPolicy {
    period: u32,
}

impl PeriodicPolicy {
    pub fn new(period: u32) -> Result<Self> {
        if period == 0 {
            return Err(Error::Config("sampling period must be >= 1".into()));
        }
        Ok(PeriodicPolicy { period })
    }

    pub fn period(&self) -> u32 {
        self.period
    }
}

impl SamplingPolicy for PeriodicPolicy {
    fn name(&self) -> String {
        format!("periodic-{}", self.period)
    }

    fn decide(&mut self, t: i64, _state: &AgentState, _features: &[f64]) -> Result<usize> {
        Ok(if t.rem_euclid(self.period as i64) == 0 { ACTION_SAMPLE } else { ACTION_SKIP })
    }
}

/// Never transmits after start-up.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct NeverPolicy;

impl SamplingPolicy for NeverPolicy {
    fn name(&self) -> String {
        "never".into()
    }

    fn decide(&mut self, _t: i64, _state: &AgentState, _features: &[f64]) -> Result<usize> {
        Ok(ACTION_SKIP)
    }
}

/// A trained actor.
#[derive(Clone, Debug)]
pub struct AgentPolicy {
    snapshot: Arc<PolicySnapshot>,
    mode: ActionMode,
    seed: u64,
    rng: ChaCha8Rng,
}

impl AgentPolicy {
    pub fn new(snapshot: Arc<PolicySnapshot>, mode: ActionMode, seed: u64) -> Self {
        AgentPolicy { snapshot, mode, seed, rng: ChaCha8Rng::seed_from_u64(seed) }
    }
}

impl SamplingPolicy for AgentPolicy {
    fn name(&self) -> String {
        match self.mode {
            ActionMode::Greedy => "agent".into(),
            ActionMode::Stochastic => "agent-stochastic".into(),
        }
    }

    fn reset(&mut self) {
        self.rng = ChaCha8Rng::seed_from_u64(self.seed);
    }

    fn decide(&mut self, _t: i64, _state: &AgentState, features: &[f64]) -> Result<usize> {
        if features.len() != self.snapshot.state_dim {
            return Err(Error::Shape(format!(
                "policy expects {} features, got {}",
                self.snapshot.state_dim,
                features.len()
            )));
        }
        self.snapshot.select_action(features, self.mode, &mut self.rng)
    }
}

/// Recipe for a policy; every evaluation job builds its own instance.
#[derive(Clone, Debug)]
pub enum PolicySpec {
    Periodic(u32),
    Never,
    Agent { snapshot: Arc<PolicySnapshot>, mode: ActionMode },
}

impl PolicySpec {
    pub fn name(&self) -> String {
        match self {
            PolicySpec::Periodic(p) => format!("periodic-{p}"),
            PolicySpec::Never => "never".into(),
            PolicySpec::Agent { mode: ActionMode::Greedy, .. } => "agent".into(),
            PolicySpec::Agent { mode: ActionMode::Stochastic, .. } => "agent-stochastic".into(),
        }
    }

    /// Parses `periodic-N`, `always` or `never`.
    pub fn parse_baseline(s: &str) -> Result<Self> {
        match s {
            "always" => Ok(PolicySpec::Periodic(1)),
            "never" => Ok(PolicySpec::Never),
            _ => {
                let n = s
                    .strip_prefix("periodic-")
                    .and_then(|n| n.parse::<u32>().ok())
                    .filter(|&n| n > 0)
                    .ok_or_else(|| Error::Config(format!("unknown policy `{s}`")))?;
                Ok(PolicySpec::Periodic(n))
            }
        }
    }

    pub fn build(&self, seed: u64) -> Box<dyn SamplingPolicy + Send> {
        match self {
            PolicySpec::Periodic(p) => Box::new(PeriodicPolicy::new(*p).expect("period checked on parse")),
            PolicySpec::Never => Box::new(NeverPolicy),
            PolicySpec::Agent { snapshot, mode } => Box::new(AgentPolicy::new(Arc::clone(snapshot), *mode, seed)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn st() -> AgentState {
        AgentState { size_bits: 0, chi: vec![0.0], g_bar: 1.0, since_sample: 0 }
    }

    #[test]
    fn periodic_schedule() {
        let mut p = PeriodicPolicy::new(5).unwrap();
        let picks: Vec<usize> = (1..=10).map(|t| p.decide(t, &st(), &[]).unwrap()).collect();
        assert_eq!(picks, vec![0, 0, 0, 0, 1, 0, 0, 0, 0, 1]);
        assert!(PeriodicPolicy::new(0).is_err());
    }

    #[test]
    fn parse_names() {
        assert_eq!(PolicySpec::parse_baseline("periodic-7").unwrap().name(), "periodic-7");
        assert_eq!(PolicySpec::parse_baseline("always").unwrap().name(), "periodic-1");
        assert_eq!(PolicySpec::parse_baseline("never").unwrap().name(), "never");
        assert!(PolicySpec::parse_baseline("periodic-0").is_err());
        assert!(PolicySpec::parse_baseline("sometimes").is_err());
    }
}
