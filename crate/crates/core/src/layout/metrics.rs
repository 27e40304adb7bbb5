use std::collections::BTreeMap;

use super::{BoundingBox, SceneAnnotation, VisualLayout, NUM_CLASSES};
use crate::error::{Error, Result};

/// Overlap area of two boxes, zero when they are disjoint.
pub fn box_intersection_area(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let w = (a.b3().min(b.b3()) - a.b1().max(b.b1())).max(0.0);
    let h = (a.b4().min(b.b4()) - a.b2().max(b.b2())).max(0.0);
    w * h
}

/// Contribution of one track to the semantic change degree.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChangeTerm {
    pub track_id: u32,
    pub value: f64,
}

/// `(A + A' - 2I) / (2 (A + A' - I))`, with `0/0` taken as 0.
fn mismatch_ratio(a: f64, b: f64, inter: f64) -> f64 {
    let denom = 2.0 * (a + b - inter);
    if denom <= 0.0 {
        return 0.0;
    }
    ((a + b - 2.0 * inter) / denom).max(0.0)
}

/// Per-track change terms between the current scene and the last sampled
/// scene, ordered by track id. Tracks present in only one scene score 0.5.
pub fn semantic_change_terms(current: &SceneAnnotation, last_sampled: &SceneAnnotation) -> Vec<ChangeTerm> {
    let mut pairs: BTreeMap<u32, (Option<&BoundingBox>, Option<&BoundingBox>)> = BTreeMap::new();
    for v in current.vehicles() {
        pairs.entry(v.track_id).or_default().0 = Some(&v.bbox);
    }
    for v in last_sampled.vehicles() {
        pairs.entry(v.track_id).or_default().1 = Some(&v.bbox);
    }
    pairs
        .into_iter()
        .map(|(track_id, pair)| {
            let value = match pair {
                (Some(a), Some(b)) => mismatch_ratio(a.area(), b.area(), box_intersection_area(a, b)),
                _ => 0.5,
            };
            ChangeTerm { track_id, value }
        })
        .collect()
}

/// Semantic change degree between the current scene and the last sampled scene.
pub fn semantic_change(current: &SceneAnnotation, last_sampled: &SceneAnnotation) -> f64 {
    semantic_change_terms(current, last_sampled).iter().map(|t| t.value).sum()
}

/// Pixel counts of one class in the real (`n`) and predicted (`n_pred`)
/// layouts and in both (`n_both`).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ClassOverlap {
    pub n_real: u64,
    pub n_pred: u64,
    pub n_both: u64,
}

impl ClassOverlap {
    /// `(n + n' - 2 n̂) / (2 (n + n'))`; classes absent from both layouts give 0.
    pub fn term(&self) -> f64 {
        let total = self.n_real + self.n_pred;
        if total == 0 {
            return 0.0;
        }
        (total - 2 * self.n_both) as f64 / (2 * total) as f64
    }
}

pub fn class_overlaps(real: &VisualLayout, predicted: &VisualLayout) -> Result<[ClassOverlap; NUM_CLASSES]> {
    if real.dims() != predicted.dims() {
        return Err(Error::DimensionMismatch { left: real.dims(), right: predicted.dims() });
    }
    let mut out = [ClassOverlap::default(); NUM_CLASSES];
    for (&r, &p) in real.cells().iter().zip(predicted.cells()) {
        if r > 0 {
            out[r as usize - 1].n_real += 1;
        }
        if p > 0 {
            out[p as usize - 1].n_pred += 1;
        }
        if r > 0 && r == p {
            out[r as usize - 1].n_both += 1;
        }
    }
    Ok(out)
}

/// Prediction deviation between a real and a predicted layout, summed over
/// the class masks.
pub fn prediction_deviation(real: &VisualLayout, predicted: &VisualLayout) -> Result<f64> {
    Ok(class_overlaps(real, predicted)?.iter().map(ClassOverlap::term).sum())
}

/// Deviation with the over-threshold penalty: `D` if `D <= threshold`,
/// otherwise `min(D + kappa, 1)`.
pub fn penalized_deviation(deviation: f64, threshold: f64, kappa: f64) -> f64 {
    if deviation <= threshold {
        deviation
    } else {
        (deviation + kappa).min(1.0)
    }
}
