//! Scene streams: UA-DETRAC annotation parsing, a native JSON clip format,
//! and a synthetic bidirectional traffic generator.

mod detrac;
mod generator;

pub use detrac::{parse_detrac_xml, write_detrac_xml, DEFAULT_SOURCE_HEIGHT, DEFAULT_SOURCE_WIDTH};
pub use generator::{generate_traffic, TrafficGenConfig, TrafficGenerator, TrafficPhase};

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layout::{BoundingBox, SceneAnnotation, VehicleClass, VehicleRecord, NUM_CLASSES};

/// An ordered run of annotated frames.
#[derive(Clone, Debug, PartialEq)]
pub struct FootageClip {
    name: String,
    frame_width: f64,
    frame_height: f64,
    frames: Vec<SceneAnnotation>,
}

impl FootageClip {
    /// Frame indices must increase by exactly one from frame to frame.
    pub fn new(name: impl Into<String>, frame_width: f64, frame_height: f64, frames: Vec<SceneAnnotation>) -> Result<Self> {
        if !(frame_width > 0.0 && frame_height > 0.0) {
            return Err(Error::Config(format!("frame dimensions {frame_width}x{frame_height} must be positive")));
        }
        for pair in frames.windows(2) {
            if pair[1].frame_index() != pair[0].frame_index() + 1 {
                return Err(Error::Config(format!(
                    "frame index {} follows {}",
                    pair[1].frame_index(),
                    pair[0].frame_index()
                )));
            }
        }
        Ok(FootageClip { name: name.into(), frame_width, frame_height, frames })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn frame_width(&self) -> f64 {
        self.frame_width
    }

    pub fn frame_height(&self) -> f64 {
        self.frame_height
    }

    pub fn frames(&self) -> &[SceneAnnotation] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn vehicle_count(&self) -> usize {
        self.frames.iter().map(SceneAnnotation::len).sum()
    }

    /// Vehicle observations per class over the whole clip.
    pub fn class_histogram(&self) -> [usize; NUM_CLASSES] {
        let mut h = [0; NUM_CLASSES];
        for v in self.frames.iter().flat_map(|f| f.vehicles()) {
            h[v.class.index()] += 1;
        }
        h
    }

    /// Serializes to the native JSON clip format.
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&JsonClip::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: JsonClip = serde_json::from_str(text)?;
        raw.try_into()
    }

    /// Loads a clip from disk: `.xml` as UA-DETRAC annotations, anything
    /// else as native JSON.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let is_xml = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("xml"));
        if is_xml {
            parse_detrac_xml(&text)
        } else {
            Self::from_json(&text)
        }
    }
}

/// Native clip format: `frames[i]` lists `[id, class, b1, b2, b3, b4]` rows
/// of frame `first_frame + i`.
#[derive(Serialize, Deserialize)]
struct JsonClip {
    name: String,
    frame_width: f64,
    frame_height: f64,
    #[serde(default)]
    first_frame: u64,
    frames: Vec<Vec<(u32, u8, f64, f64, f64, f64)>>,
}

impl From<&FootageClip> for JsonClip {
    fn from(clip: &FootageClip) -> Self {
        JsonClip {
            name: clip.name.clone(),
            frame_width: clip.frame_width,
            frame_height: clip.frame_height,
            first_frame: clip.frames.first().map_or(0, SceneAnnotation::frame_index),
            frames: clip
                .frames
                .iter()
                .map(|f| {
                    f.vehicles()
                        .iter()
                        .map(|v| {
                            let [b1, b2, b3, b4] = v.bbox.coords();
                            (v.track_id, v.class.code(), b1, b2, b3, b4)
                        })
                        .collect()
                })
                .collect(),
        }
    }
}

impl TryFrom<JsonClip> for FootageClip {
    type Error = Error;

    fn try_from(raw: JsonClip) -> Result<Self> {
        let mut frames = Vec::with_capacity(raw.frames.len());
        for (i, rows) in raw.frames.into_iter().enumerate() {
            let vehicles = rows
                .into_iter()
                .map(|(id, class, b1, b2, b3, b4)| {
                    Ok(VehicleRecord::new(id, VehicleClass::from_code(class)?, BoundingBox::new(b1, b2, b3, b4)?))
                })
                .collect::<Result<Vec<_>>>()?;
            frames.push(SceneAnnotation::new(raw.first_frame + i as u64, vehicles)?);
        }
        FootageClip::new(raw.name, raw.frame_width, raw.frame_height, frames)
    }
}
