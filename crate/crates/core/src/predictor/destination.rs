use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::{ConstantVelocity, Predictor};
use crate::error::{Error, Result};
use crate::layout::{
    decode_message, prediction_deviation, rasterize, SceneAnnotation, SemanticMessage, VehicleRecord, VisualLayout,
    DEFAULT_HEIGHT, DEFAULT_WIDTH,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PredictorConfig {
    /// Layouts predicted per round.
    pub horizon: usize,
    pub width: usize,
    pub height: usize,
    /// Deviation above which a received layout triggers a resample request.
    pub deviation_threshold: f64,
    /// Largest center distance at which a received vehicle inherits the
    /// identity of a predicted one.
    pub association_gate: f64,
    /// Displayed layouts kept for inspection.
    pub history: usize,
}

impl Default for PredictorConfig {
    fn default() -> Self {
        PredictorConfig {
            horizon: 5,
            width: DEFAULT_WIDTH,
            height: DEFAULT_HEIGHT,
            deviation_threshold: 0.07,
            association_gate: 0.1,
            history: 256,
        }
    }
}

impl PredictorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::Config("prediction horizon must be at least 1".into()));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::Config(format!("layout grid {}x{} is empty", self.width, self.height)));
        }
        if !(self.deviation_threshold.is_finite() && self.deviation_threshold >= 0.0) {
            return Err(Error::Config(format!("deviation threshold {} must be >= 0", self.deviation_threshold)));
        }
        if !(self.association_gate.is_finite() && self.association_gate >= 0.0) {
            return Err(Error::Config(format!("association gate {} must be >= 0", self.association_gate)));
        }
        Ok(())
    }
}

/// Renumbers vehicles `0..n` in list order, as a decoded packet would be.
fn anonymize(scene: &SceneAnnotation) -> SceneAnnotation {
    let vehicles = scene.vehicles().iter().enumerate().map(|(i, v)| VehicleRecord::new(i as u32, v.class, v.bbox)).collect();
    SceneAnnotation::new(scene.frame_index(), vehicles).expect("ids are distinct")
}

/// Gives decoded vehicles persistent identities. Vehicles of `incoming` are
/// paired with same-class vehicles of `reference`, closest centers first,
/// within `gate`; the rest receive fresh ids from `next_id`.
pub fn associate(reference: &SceneAnnotation, incoming: &SceneAnnotation, gate: f64, next_id: &mut u32) -> SceneAnnotation {
    let mut pairs = Vec::new();
    for (i, v) in incoming.vehicles().iter().enumerate() {
        let (x, y) = v.bbox.center();
        for (j, r) in reference.vehicles().iter().enumerate() {
            if r.class != v.class {
                continue;
            }
            let (rx, ry) = r.bbox.center();
            let d = (x - rx).hypot(y - ry);
            if d <= gate {
                pairs.push((d, i, j));
            }
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut ids: Vec<Option<u32>> = vec![None; incoming.len()];
    let mut taken = vec![false; reference.len()];
    for (_, i, j) in pairs {
        if ids[i].is_none() && !taken[j] {
            ids[i] = Some(reference.vehicles()[j].track_id);
            taken[j] = true;
        }
    }
    let vehicles = incoming
        .vehicles()
        .iter()
        .zip(ids)
        .map(|(v, id)| {
            let id = id.unwrap_or_else(|| {
                let fresh = *next_id;
                *next_id += 1;
                fresh
            });
            VehicleRecord::new(id, v.class, v.bbox)
        })
        .collect();
    SceneAnnotation::new(incoming.frame_index(), vehicles).expect("ids are distinct")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DisplaySource {
    /// Layout built from a message received this interval.
    Received,
    /// Head of the pending prediction queue.
    Predicted,
    /// Head of a prediction round chained from the last two displayed layouts.
    Repredicted,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feedback {
    None,
    RequestResample,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    pub t: i64,
    pub source: DisplaySource,
    pub displayed: VisualLayout,
    pub displayed_scene: SceneAnnotation,
    /// What the destination expected at `t` before any message was read.
    pub predicted: VisualLayout,
    /// Deviation of the received layout from the prediction, when a message arrived.
    pub deviation: Option<f64>,
    pub feedback: Feedback,
}

/// Receiver state. Created from two consecutive messages, then advanced
/// exactly once per interval.
#[derive(Clone, Debug, PartialEq)]
pub struct DestinationState<P = ConstantVelocity> {
    config: PredictorConfig,
    predictor: P,
    queue: VecDeque<(i64, SceneAnnotation)>,
    last_sampled: (i64, SceneAnnotation),
    recent: [(i64, SceneAnnotation); 2],
    history: VecDeque<(i64, VisualLayout)>,
    clock: i64,
    next_id: u32,
    rounds: u64,
    chained_rounds: u64,
}

impl<P: Predictor> DestinationState<P> {
    /// Start-up: `first` is received at `t0`, `second` at `t0 + 1`, and the
    /// first prediction round covers `t0 + 2 ..= t0 + 1 + P`. Returns the
    /// two displayed layouts.
    pub fn bootstrap(
        config: PredictorConfig,
        predictor: P,
        t0: i64,
        first: &SemanticMessage,
        second: &SemanticMessage,
    ) -> Result<(Self, [VisualLayout; 2])> {
        Self::bootstrap_scenes(config, predictor, t0, &decode_message(first)?, &decode_message(second)?)
    }

    /// [`DestinationState::bootstrap`] for receivers that get exact boxes
    /// instead of quantized packets. Track ids of the inputs are ignored.
    pub fn bootstrap_scenes(
        config: PredictorConfig,
        predictor: P,
        t0: i64,
        first: &SceneAnnotation,
        second: &SceneAnnotation,
    ) -> Result<(Self, [VisualLayout; 2])> {
        config.validate()?;
        let a = anonymize(first);
        let mut next_id = a.len() as u32;
        let b = associate(&a, &anonymize(second), config.association_gate, &mut next_id);
        let shown = [rasterize(&a, config.width, config.height), rasterize(&b, config.width, config.height)];
        let mut state = DestinationState {
            queue: VecDeque::with_capacity(config.horizon),
            last_sampled: (t0 + 1, b.clone()),
            recent: [(t0, a.clone()), (t0 + 1, b.clone())],
            history: VecDeque::new(),
            clock: t0 + 2,
            next_id,
            rounds: 0,
            chained_rounds: 0,
            predictor,
            config,
        };
        state.record(t0, shown[0].clone());
        state.record(t0 + 1, shown[1].clone());
        state.refill(&a, &b, 1, t0 + 2)?;
        Ok((state, shown))
    }

    fn refill(&mut self, older: &SceneAnnotation, newer: &SceneAnnotation, gap: u32, from: i64) -> Result<()> {
        let scenes = self.predictor.predict(older, newer, gap, self.config.horizon)?;
        if scenes.len() != self.config.horizon {
            return Err(Error::Shape(format!(
                "predictor returned {} layouts, expected {}",
                scenes.len(),
                self.config.horizon
            )));
        }
        self.queue.clear();
        self.queue.extend(scenes.into_iter().enumerate().map(|(k, s)| (from + k as i64, s)));
        self.rounds += 1;
        Ok(())
    }

    fn record(&mut self, t: i64, layout: VisualLayout) {
        if self.config.history == 0 {
            return;
        }
        if self.history.len() == self.config.history {
            self.history.pop_front();
        }
        self.history.push_back((t, layout));
    }

    /// Advances to interval `t`, which must be the interval after the last
    /// one handled.
    pub fn step(&mut self, t: i64, received: Option<&SemanticMessage>) -> Result<StepOutcome> {
        match received {
            Some(msg) => self.step_scene(t, Some(&decode_message(msg)?)),
            None => self.step_scene(t, None),
        }
    }

    /// [`DestinationState::step`] with an exact scene in place of a packet.
    /// Track ids of the input are ignored.
    pub fn step_scene(&mut self, t: i64, received: Option<&SceneAnnotation>) -> Result<StepOutcome> {
        if t != self.clock {
            return Err(Error::Precondition(format!("destination expected interval {}, got {t}", self.clock)));
        }
        let (width, height) = (self.config.width, self.config.height);
        let source = if self.queue.is_empty() {
            let [(_, older), (_, newer)] = self.recent.clone();
            self.refill(&older, &newer, 1, t)?;
            self.chained_rounds += 1;
            DisplaySource::Repredicted
        } else {
            DisplaySource::Predicted
        };
        let (due, predicted_scene) = self.queue.pop_front().expect("queue refilled");
        if due != t {
            return Err(Error::Precondition(format!("queued prediction is for {due}, not {t}")));
        }
        let predicted = rasterize(&predicted_scene, width, height);

        let outcome = match received {
            None => StepOutcome {
                t,
                source,
                displayed: predicted.clone(),
                displayed_scene: predicted_scene,
                predicted,
                deviation: None,
                feedback: Feedback::None,
            },
            Some(scene) => {
                let real = associate(&predicted_scene, &anonymize(scene), self.config.association_gate, &mut self.next_id);
                let layout = rasterize(&real, width, height);
                let deviation = prediction_deviation(&layout, &predicted)?;
                let (t_hat, last) = std::mem::replace(&mut self.last_sampled, (t, real.clone()));
                let gap = u32::try_from(t - t_hat).map_err(|_| Error::Precondition("sample times out of order".into()))?;
                self.refill(&last, &real, gap, t + 1)?;
                let feedback =
                    if deviation > self.config.deviation_threshold { Feedback::RequestResample } else { Feedback::None };
                StepOutcome {
                    t,
                    source,
                    displayed: layout,
                    displayed_scene: real,
                    predicted,
                    deviation: Some(deviation),
                    feedback,
                }
            }
        };
        self.recent.swap(0, 1);
        self.recent[1] = (t, outcome.displayed_scene.clone());
        self.record(t, outcome.displayed.clone());
        self.clock += 1;
        Ok(outcome)
    }

    pub fn config(&self) -> &PredictorConfig {
        &self.config
    }

    /// Interval the next call to [`DestinationState::step`] must handle.
    pub fn next_time(&self) -> i64 {
        self.clock
    }

    pub fn last_sampled_time(&self) -> i64 {
        self.last_sampled.0
    }

    pub fn last_sampled_scene(&self) -> &SceneAnnotation {
        &self.last_sampled.1
    }

    pub fn pending(&self) -> usize {
        self.queue.len()
    }

    /// Prediction rounds run so far, the start-up round included.
    pub fn prediction_rounds(&self) -> u64 {
        self.rounds
    }

    /// Rounds chained from displayed predictions because the queue ran dry.
    pub fn chained_rounds(&self) -> u64 {
        self.chained_rounds
    }

    pub fn history(&self) -> impl Iterator<Item = (i64, &VisualLayout)> {
        self.history.iter().map(|(t, l)| (*t, l))
    }
}
