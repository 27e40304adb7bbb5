//! Scene and layout domain types, the semantic packet codec, rasterization
//! and the semantic metrics (change degree and prediction deviation).

mod codec;
mod metrics;
mod raster;

pub use codec::{decode_message, encode_message, SemanticMessage, BITS_PER_VEHICLE, COORD_LEVELS, MAX_VEHICLES};
pub use metrics::{
    box_intersection_area, class_overlaps, penalized_deviation, prediction_deviation, semantic_change,
    semantic_change_terms, ChangeTerm, ClassOverlap,
};
pub use raster::{rasterize, VisualLayout, DEFAULT_HEIGHT, DEFAULT_WIDTH};

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of vehicle categories carried by a message.
pub const NUM_CLASSES: usize = 4;

/// Vehicle category. The raster value of a painted pixel equals [`VehicleClass::code`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum VehicleClass {
    Car = 1,
    Bus = 2,
    Van = 3,
    Others = 4,
}

impl VehicleClass {
    pub const ALL: [VehicleClass; NUM_CLASSES] =
        [VehicleClass::Car, VehicleClass::Bus, VehicleClass::Van, VehicleClass::Others];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Result<Self> {
        match code {
            1 => Ok(VehicleClass::Car),
            2 => Ok(VehicleClass::Bus),
            3 => Ok(VehicleClass::Van),
            4 => Ok(VehicleClass::Others),
            other => Err(Error::InvalidClass(other)),
        }
    }

    /// Maps an annotation label to a class; anything outside the known
    /// vocabulary becomes [`VehicleClass::Others`].
    pub fn from_label(label: &str) -> Self {
        match label.trim().to_ascii_lowercase().as_str() {
            "car" => VehicleClass::Car,
            "bus" => VehicleClass::Bus,
            "van" => VehicleClass::Van,
            _ => VehicleClass::Others,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            VehicleClass::Car => "car",
            VehicleClass::Bus => "bus",
            VehicleClass::Van => "van",
            VehicleClass::Others => "others",
        }
    }

    /// Zero-based index, handy for per-class arrays.
    pub fn index(self) -> usize {
        self.code() as usize - 1
    }
}

impl TryFrom<u8> for VehicleClass {
    type Error = Error;

    fn try_from(code: u8) -> Result<Self> {
        VehicleClass::from_code(code)
    }
}

impl From<VehicleClass> for u8 {
    fn from(class: VehicleClass) -> u8 {
        class.code()
    }
}

impl fmt::Display for VehicleClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Axis-aligned box in normalized image coordinates: `(b1, b2)` is the
/// top-left corner and `(b3, b4)` the bottom-right corner.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct BoundingBox {
    b1: f64,
    b2: f64,
    b3: f64,
    b4: f64,
}

impl BoundingBox {
    pub fn new(b1: f64, b2: f64, b3: f64, b4: f64) -> Result<Self> {
        let err = |reason| Error::InvalidBox { b1, b2, b3, b4, reason };
        if ![b1, b2, b3, b4].iter().all(|v| v.is_finite()) {
            return Err(err("non-finite coordinate"));
        }
        if ![b1, b2, b3, b4].iter().all(|v| (0.0..=1.0).contains(v)) {
            return Err(err("coordinate outside [0, 1]"));
        }
        if b1 > b3 || b2 > b4 {
            return Err(err("top-left corner is not above-left of bottom-right corner"));
        }
        Ok(BoundingBox { b1, b2, b3, b4 })
    }

    /// Clamps each coordinate into `[0, 1]` and orders the corners.
    /// Returns `None` when a coordinate is not finite.
    pub fn clamped(x1: f64, y1: f64, x2: f64, y2: f64) -> Option<Self> {
        if ![x1, y1, x2, y2].iter().all(|v| v.is_finite()) {
            return None;
        }
        let c = |v: f64| v.clamp(0.0, 1.0);
        let (x1, x2) = (c(x1.min(x2)), c(x1.max(x2)));
        let (y1, y2) = (c(y1.min(y2)), c(y1.max(y2)));
        Some(BoundingBox { b1: x1, b2: y1, b3: x2, b4: y2 })
    }

    pub fn full() -> Self {
        BoundingBox { b1: 0.0, b2: 0.0, b3: 1.0, b4: 1.0 }
    }

    pub fn b1(&self) -> f64 {
        self.b1
    }
    pub fn b2(&self) -> f64 {
        self.b2
    }
    pub fn b3(&self) -> f64 {
        self.b3
    }
    pub fn b4(&self) -> f64 {
        self.b4
    }

    pub fn coords(&self) -> [f64; 4] {
        [self.b1, self.b2, self.b3, self.b4]
    }

    pub fn width(&self) -> f64 {
        self.b3 - self.b1
    }

    pub fn height(&self) -> f64 {
        self.b4 - self.b2
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn center(&self) -> (f64, f64) {
        (0.5 * (self.b1 + self.b3), 0.5 * (self.b2 + self.b4))
    }
}

impl TryFrom<[f64; 4]> for BoundingBox {
    type Error = Error;

    fn try_from(c: [f64; 4]) -> Result<Self> {
        BoundingBox::new(c[0], c[1], c[2], c[3])
    }
}

impl From<BoundingBox> for [f64; 4] {
    fn from(b: BoundingBox) -> [f64; 4] {
        b.coords()
    }
}

/// One detected vehicle: identity, category and position.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VehicleRecord {
    pub track_id: u32,
    pub class: VehicleClass,
    pub bbox: BoundingBox,
}

impl VehicleRecord {
    pub fn new(track_id: u32, class: VehicleClass, bbox: BoundingBox) -> Self {
        VehicleRecord { track_id, class, bbox }
    }
}

/// All vehicles observed in one sensing interval.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawScene", into = "RawScene")]
pub struct SceneAnnotation {
    frame_index: u64,
    vehicles: Vec<VehicleRecord>,
}

#[derive(Serialize, Deserialize)]
struct RawScene {
    frame_index: u64,
    vehicles: Vec<VehicleRecord>,
}

impl TryFrom<RawScene> for SceneAnnotation {
    type Error = Error;
    fn try_from(raw: RawScene) -> Result<Self> {
        SceneAnnotation::new(raw.frame_index, raw.vehicles)
    }
}

impl From<SceneAnnotation> for RawScene {
    fn from(s: SceneAnnotation) -> RawScene {
        RawScene { frame_index: s.frame_index, vehicles: s.vehicles }
    }
}

impl SceneAnnotation {
    pub fn new(frame_index: u64, vehicles: Vec<VehicleRecord>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(vehicles.len());
        for v in &vehicles {
            if !seen.insert(v.track_id) {
                return Err(Error::DuplicateTrack(v.track_id));
            }
        }
        Ok(SceneAnnotation { frame_index, vehicles })
    }

    pub fn empty(frame_index: u64) -> Self {
        SceneAnnotation { frame_index, vehicles: Vec::new() }
    }

    pub fn frame_index(&self) -> u64 {
        self.frame_index
    }

    pub fn with_frame_index(mut self, frame_index: u64) -> Self {
        self.frame_index = frame_index;
        self
    }

    pub fn vehicles(&self) -> &[VehicleRecord] {
        &self.vehicles
    }

    pub fn len(&self) -> usize {
        self.vehicles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vehicles.is_empty()
    }

    pub fn get(&self, track_id: u32) -> Option<&VehicleRecord> {
        self.vehicles.iter().find(|v| v.track_id == track_id)
    }
}
