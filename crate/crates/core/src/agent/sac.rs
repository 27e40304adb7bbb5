use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis, Zip};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::mlp::{Adam, Gradients, Mlp, ScalarAdam};
use super::{Batch, ACTION_SAMPLE, ACTION_SKIP};
use crate::error::{Error, Result};

pub const SNAPSHOT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SacConfig {
    pub hidden: Vec<usize>,
    pub lr_actor: f64,
    pub lr_critic: f64,
    pub lr_temperature: f64,
    pub gamma: f64,
    pub tau: f64,
    pub target_entropy: f64,
    pub initial_temperature: f64,
    pub replay_capacity: usize,
    pub batch_size: usize,
    /// Transitions collected before the first update.
    pub warmup: usize,
    /// Environment steps between gradient updates.
    pub update_interval: usize,
}

impl Default for SacConfig {
    fn default() -> Self {
        SacConfig {
            hidden: vec![300, 200, 200],
            lr_actor: 1e-5,
            lr_critic: 2e-5,
            lr_temperature: 1e-5,
            gamma: 1.0,
            tau: 0.2,
            target_entropy: -1.0,
            initial_temperature: 0.2,
            replay_capacity: 100_000,
            batch_size: 1024,
            warmup: 2000,
            update_interval: 1,
        }
    }
}

impl SacConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return bad(format!("hidden widths {:?} must be non-empty and positive", self.hidden));
        }
        for (name, v) in [("lr_actor", self.lr_actor), ("lr_critic", self.lr_critic), ("lr_temperature", self.lr_temperature)] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{name} = {v} must be >= 0"));
            }
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad(format!("discount {} outside [0, 1]", self.gamma));
        }
        if !(0.0..=1.0).contains(&self.tau) {
            return bad(format!("soft update rate {} outside [0, 1]", self.tau));
        }
        if !self.target_entropy.is_finite() {
            return bad("target entropy must be finite".into());
        }
        if !(self.initial_temperature.is_finite() && self.initial_temperature > 0.0) {
            return bad(format!("initial temperature {} must be > 0", self.initial_temperature));
        }
        if self.batch_size == 0 || self.replay_capacity < self.batch_size {
            return bad(format!(
                "batch size {} must be positive and fit in the replay memory ({})",
                self.batch_size, self.replay_capacity
            ));
        }
        if self.update_interval == 0 {
            return bad("update interval must be >= 1".into());
        }
        Ok(())
    }

    fn sizes(&self, state_dim: usize) -> Vec<usize> {
        std::iter::once(state_dim).chain(self.hidden.iter().copied()).chain(std::iter::once(2)).collect()
    }
}

fn log_softmax(logits: &Array2<f64>) -> Array2<f64> {
    let mut out = logits.clone();
    for mut row in out.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        row.mapv_inplace(|v| v - lse);
    }
    out
}

/// Action probabilities and their logarithms for every row of `states`.
pub fn policy(actor: &Mlp, states: ArrayView2<f64>) -> Result<(Array2<f64>, Array2<f64>)> {
    let logp = log_softmax(&actor.forward(states)?);
    Ok((logp.mapv(f64::exp), logp))
}

fn min_q(critics: [&Mlp; 2], states: ArrayView2<f64>) -> Result<Array2<f64>> {
    let mut q = critics[0].forward(states)?;
    let q2 = critics[1].forward(states)?;
    Zip::from(&mut q).and(&q2).for_each(|a, &b| *a = a.min(b));
    Ok(q)
}

/// Soft Bellman targets
/// `y = r + γ (1 - done) Σ_a' π(a'|S') (min Q̄(S', a') - ϑ log π(a'|S'))`.
pub fn critic_targets(actor: &Mlp, targets: [&Mlp; 2], temperature: f64, batch: &Batch, gamma: f64) -> Result<Array1<f64>> {
    let (p, logp) = policy(actor, batch.next_states.view())?;
    let q = min_q(targets, batch.next_states.view())?;
    let soft = (&p * &(&q - &(&logp * temperature))).sum_axis(Axis(1));
    Ok(&batch.rewards + &(&soft * &(1.0 - &batch.dones) * gamma))
}

/// `½ mean (Q(S, a) - y)²` and its gradient.
pub fn critic_loss(critic: &Mlp, states: ArrayView2<f64>, actions: &[usize], y: ArrayView1<f64>) -> Result<(f64, Gradients)> {
    let n = actions.len();
    if n == 0 || states.nrows() != n || y.len() != n {
        return Err(Error::Shape(format!("critic batch of {} states, {n} actions, {} targets", states.nrows(), y.len())));
    }
    let (q, cache) = critic.forward_cached(states)?;
    let mut grad = Array2::zeros(q.raw_dim());
    let mut loss = 0.0;
    for (i, &a) in actions.iter().enumerate() {
        let diff = q[[i, a]] - y[i];
        loss += 0.5 * diff * diff;
        grad[[i, a]] = diff / n as f64;
    }
    Ok((loss / n as f64, critic.backward(&cache, &grad)))
}

/// `mean Σ_a π(a|S) (ϑ log π(a|S) - min Q(S, a))` with the critics held
/// fixed. Also returns the action probabilities.
pub fn actor_loss(actor: &Mlp, critics: [&Mlp; 2], temperature: f64, states: ArrayView2<f64>) -> Result<(f64, Gradients, Array2<f64>)> {
    let n = states.nrows();
    if n == 0 {
        return Err(Error::Precondition("empty actor batch".into()));
    }
    let (logits, cache) = actor.forward_cached(states)?;
    let logp = log_softmax(&logits);
    let p = logp.mapv(f64::exp);
    let q = min_q(critics, states)?;
    let f = &(&logp * temperature) - &q;
    let per_row = (&p * &f).sum_axis(Axis(1));
    let mut grad = &f - &per_row.insert_axis(Axis(1));
    grad *= &p;
    grad /= n as f64;
    let loss = (&p * &f).sum() / n as f64;
    Ok((loss, actor.backward(&cache, &grad), p))
}

/// Policy entropy of each row.
fn entropy(p: &Array2<f64>) -> Array1<f64> {
    p.map_axis(Axis(1), |row| -row.iter().map(|&x| if x > 0.0 { x * x.ln() } else { 0.0 }).sum::<f64>())
}

/// `ϑ · mean(H(π) - H̄)` and its derivative with respect to `log ϑ`.
pub fn temperature_loss(log_temperature: f64, probs: &Array2<f64>, target_entropy: f64) -> Result<(f64, f64)> {
    if probs.nrows() == 0 {
        return Err(Error::Precondition("empty temperature batch".into()));
    }
    let gap = entropy(probs).mean().expect("non-empty") - target_entropy;
    let loss = log_temperature.exp() * gap;
    Ok((loss, loss))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionMode {
    Stochastic,
    Greedy,
}

fn choose<R: Rng + ?Sized>(p: [f64; 2], mode: ActionMode, rng: &mut R) -> usize {
    match mode {
        ActionMode::Greedy => {
            if p[ACTION_SAMPLE] > p[ACTION_SKIP] {
                ACTION_SAMPLE
            } else {
                ACTION_SKIP
            }
        }
        ActionMode::Stochastic => {
            if rng.random::<f64>() < p[ACTION_SAMPLE] {
                ACTION_SAMPLE
            } else {
                ACTION_SKIP
            }
        }
    }
}

fn probs_of(actor: &Mlp, features: &[f64]) -> Result<[f64; 2]> {
    let x = ArrayView2::from_shape((1, features.len()), features).map_err(|e| Error::Shape(e.to_string()))?;
    let (p, _) = policy(actor, x)?;
    Ok([p[[0, 0]], p[[0, 1]]])
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct UpdateStats {
    pub critic_loss: f64,
    pub actor_loss: f64,
    pub temperature_loss: f64,
    pub temperature: f64,
    pub entropy: f64,
}

/// Actor, twin critics with targets, temperature and their optimizers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SacAgent {
    config: SacConfig,
    state_dim: usize,
    actor: Mlp,
    critics: [Mlp; 2],
    targets: [Mlp; 2],
    log_temperature: f64,
    actor_opt: Adam,
    critic_opts: [Adam; 2],
    temperature_opt: ScalarAdam,
    updates: u64,
}

impl SacAgent {
    pub fn new<R: Rng + ?Sized>(config: SacConfig, state_dim: usize, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let sizes = config.sizes(state_dim);
        let actor = Mlp::new(&sizes, rng)?;
        let critics = [Mlp::new(&sizes, rng)?, Mlp::new(&sizes, rng)?];
        Ok(SacAgent {
            actor_opt: Adam::new(&actor, config.lr_actor),
            critic_opts: [Adam::new(&critics[0], config.lr_critic), Adam::new(&critics[1], config.lr_critic)],
            temperature_opt: ScalarAdam::new(config.lr_temperature),
            targets: critics.clone(),
            critics,
            actor,
            log_temperature: config.initial_temperature.ln(),
            state_dim,
            config,
            updates: 0,
        })
    }

    pub fn config(&self) -> &SacConfig {
        &self.config
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn actor(&self) -> &Mlp {
        &self.actor
    }

    pub fn critics(&self) -> &[Mlp; 2] {
        &self.critics
    }

    pub fn targets(&self) -> &[Mlp; 2] {
        &self.targets
    }

    pub fn temperature(&self) -> f64 {
        self.log_temperature.exp()
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    pub fn action_probs(&self, features: &[f64]) -> Result<[f64; 2]> {
        probs_of(&self.actor, features)
    }

    pub fn select_action<R: Rng + ?Sized>(&self, features: &[f64], mode: ActionMode, rng: &mut R) -> Result<usize> {
        Ok(choose(self.action_probs(features)?, mode, rng))
    }

    /// One gradient step on critics, actor and temperature, then a soft
    /// update of the target critics.
    pub fn update(&mut self, batch: &Batch) -> Result<UpdateStats> {
        let temperature = self.temperature();
        let y = critic_targets(&self.actor, [&self.targets[0], &self.targets[1]], temperature, batch, self.config.gamma)?;
        let mut critic_total = 0.0;
        for (critic, opt) in self.critics.iter_mut().zip(&mut self.critic_opts) {
            let (loss, grads) = critic_loss(critic, batch.states.view(), &batch.actions, y.view())?;
            if !loss.is_finite() || !grads.all_finite() {
                return Err(Error::Divergence(format!("critic loss {loss} after {} updates", self.updates)));
            }
            opt.apply(critic, &grads)?;
            critic_total += loss;
        }
        let (a_loss, a_grads, probs) =
            actor_loss(&self.actor, [&self.critics[0], &self.critics[1]], temperature, batch.states.view())?;
        if !a_loss.is_finite() || !a_grads.all_finite() {
            return Err(Error::Divergence(format!("actor loss {a_loss} after {} updates", self.updates)));
        }
        self.actor_opt.apply(&mut self.actor, &a_grads)?;
        let (t_loss, t_grad) = temperature_loss(self.log_temperature, &probs, self.config.target_entropy)?;
        if !t_grad.is_finite() {
            return Err(Error::Divergence(format!("temperature gradient {t_grad}")));
        }
        self.temperature_opt.apply(&mut self.log_temperature, t_grad);
        for (t, c) in self.targets.iter_mut().zip(&self.critics) {
            t.soft_update_from(c, self.config.tau)?;
        }
        self.updates += 1;
        Ok(UpdateStats {
            critic_loss: critic_total / 2.0,
            actor_loss: a_loss,
            temperature_loss: t_loss,
            temperature: self.temperature(),
            entropy: entropy(&probs).mean().unwrap_or(0.0),
        })
    }

    /// Evaluation-only view of the policy.
    pub fn snapshot(&self) -> PolicySnapshot {
        PolicySnapshot {
            version: SNAPSHOT_VERSION,
            state_dim: self.state_dim,
            hidden: self.config.hidden.clone(),
            actor: self.actor.clone(),
            log_temperature: self.log_temperature,
        }
    }
}

/// Stored policy: layer shapes, row-major weights and the temperature.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicySnapshot {
    pub version: u32,
    pub state_dim: usize,
    pub hidden: Vec<usize>,
    pub actor: Mlp,
    pub log_temperature: f64,
}

impl PolicySnapshot {
    pub fn validate(&self) -> Result<()> {
        if self.version != SNAPSHOT_VERSION {
            return Err(Error::Config(format!("snapshot version {} is not supported", self.version)));
        }
        let expect: Vec<usize> =
            std::iter::once(self.state_dim).chain(self.hidden.iter().copied()).chain(std::iter::once(2)).collect();
        if self.actor.sizes() != expect {
            return Err(Error::Shape(format!("snapshot actor {:?} does not match {:?}", self.actor.sizes(), expect)));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let s: PolicySnapshot = serde_json::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn action_probs(&self, features: &[f64]) -> Result<[f64; 2]> {
        probs_of(&self.actor, features)
    }

    pub fn select_action<R: Rng + ?Sized>(&self, features: &[f64], mode: ActionMode, rng: &mut R) -> Result<usize> {
        Ok(choose(self.action_probs(features)?, mode, rng))
    }
}
