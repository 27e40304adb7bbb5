//! Destination-side frame interpolation: predictors and the receiver state
//! machine that decides, interval by interval, what layout is shown.

mod destination;

pub use destination::{associate, DestinationState, DisplaySource, Feedback, PredictorConfig, StepOutcome};

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::layout::{rasterize, BoundingBox, SceneAnnotation, VehicleRecord, VisualLayout, NUM_CLASSES};

/// Extrapolates future scenes from two past ones.
pub trait Predictor: Send + Sync {
    /// `older` and `newer` are `gap` intervals apart. Returns the scenes for
    /// the next `horizon` intervals after `newer`.
    fn predict(&self, older: &SceneAnnotation, newer: &SceneAnnotation, gap: u32, horizon: usize)
        -> Result<Vec<SceneAnnotation>>;
}

/// Per-track linear extrapolation of all four box coordinates.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ConstantVelocity;

impl Predictor for ConstantVelocity {
    fn predict(
        &self,
        older: &SceneAnnotation,
        newer: &SceneAnnotation,
        gap: u32,
        horizon: usize,
    ) -> Result<Vec<SceneAnnotation>> {
        if gap == 0 {
            return Err(Error::Precondition("prediction gap must be at least one interval".into()));
        }
        let before: HashMap<u32, &BoundingBox> = older.vehicles().iter().map(|v| (v.track_id, &v.bbox)).collect();
        let tracks: Vec<(&VehicleRecord, [f64; 4])> = newer
            .vehicles()
            .iter()
            .map(|v| {
                let velocity = match before.get(&v.track_id) {
                    Some(b) => {
                        let (now, then) = (v.bbox.coords(), b.coords());
                        std::array::from_fn(|i| (now[i] - then[i]) / gap as f64)
                    }
                    None => [0.0; 4],
                };
                (v, velocity)
            })
            .collect();
        (1..=horizon)
            .map(|k| {
                let vehicles = tracks
                    .iter()
                    .filter_map(|(v, vel)| {
                        let c = v.bbox.coords();
                        let p: [f64; 4] = std::array::from_fn(|i| c[i] + k as f64 * vel[i]);
                        let (x1, x2) = (p[0].min(p[2]), p[0].max(p[2]));
                        let (y1, y2) = (p[1].min(p[3]), p[1].max(p[3]));
                        let outside = x2 <= 0.0 || x1 >= 1.0 || y2 <= 0.0 || y1 >= 1.0;
                        if outside {
                            return None;
                        }
                        BoundingBox::clamped(x1, y1, x2, y2).map(|b| VehicleRecord::new(v.track_id, v.class, b))
                    })
                    .collect();
                SceneAnnotation::new(newer.frame_index() + k as u64, vehicles)
            })
            .collect()
    }
}

/// Runs a scene predictor and rasterizes its output.
pub fn predict_layouts<P: Predictor + ?Sized>(
    predictor: &P,
    older: &SceneAnnotation,
    newer: &SceneAnnotation,
    gap: u32,
    horizon: usize,
    width: usize,
    height: usize,
) -> Result<Vec<VisualLayout>> {
    Ok(predictor.predict(older, newer, gap, horizon)?.iter().map(|s| rasterize(s, width, height)).collect())
}

fn class_centroids(layout: &VisualLayout) -> [Option<(f64, f64)>; NUM_CLASSES] {
    let mut sums = [(0.0, 0.0, 0u64); NUM_CLASSES];
    for y in 0..layout.height() {
        for x in 0..layout.width() {
            let c = layout.get(x, y);
            if c > 0 {
                let s = &mut sums[c as usize - 1];
                s.0 += x as f64;
                s.1 += y as f64;
                s.2 += 1;
            }
        }
    }
    sums.map(|(sx, sy, n)| (n > 0).then(|| (sx / n as f64, sy / n as f64)))
}

/// Raster-only prediction for inputs without track identity: every class
/// plane of `newer` is translated by the per-class centroid shift, scaled to
/// one interval. Classes missing from either input stay put.
pub fn predict_from_layouts(
    older: &VisualLayout,
    newer: &VisualLayout,
    gap: u32,
    horizon: usize,
) -> Result<Vec<VisualLayout>> {
    if gap == 0 {
        return Err(Error::Precondition("prediction gap must be at least one interval".into()));
    }
    if older.dims() != newer.dims() {
        return Err(Error::DimensionMismatch { left: older.dims(), right: newer.dims() });
    }
    let (a, b) = (class_centroids(older), class_centroids(newer));
    let shift: [(f64, f64); NUM_CLASSES] = std::array::from_fn(|c| match (a[c], b[c]) {
        (Some(p), Some(q)) => ((q.0 - p.0) / gap as f64, (q.1 - p.1) / gap as f64),
        _ => (0.0, 0.0),
    });
    let (w, h) = newer.dims();
    let mut out = Vec::with_capacity(horizon);
    for k in 1..=horizon {
        let mut cells = vec![0u8; w * h];
        for y in 0..h {
            for x in 0..w {
                let c = newer.get(x, y);
                if c == 0 {
                    continue;
                }
                let (dx, dy) = shift[c as usize - 1];
                let nx = x as f64 + (k as f64 * dx).round();
                let ny = y as f64 + (k as f64 * dy).round();
                if (0.0..w as f64).contains(&nx) && (0.0..h as f64).contains(&ny) {
                    cells[ny as usize * w + nx as usize] = c;
                }
            }
        }
        out.push(VisualLayout::from_cells(w, h, cells)?);
    }
    Ok(out)
}
