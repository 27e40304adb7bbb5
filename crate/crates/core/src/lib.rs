//! Agent-driven semantic sampling over a fading wireless channel.
//!
//! A source observes traffic scenes, encodes them as compact semantic
//! packets, and a soft actor-critic agent decides at every sensing interval
//! whether to transmit. The destination fills the gaps with predicted
//! layouts. The library prices every transmission under F composite fading
//! and scores reconstruction with layout-space deviation metrics.

pub mod agent;
pub mod channel;
pub mod error;
pub mod ingest;
pub mod layout;
pub mod predictor;
pub mod simulator;

pub use error::{Error, Result};
pub use layout::{BoundingBox, SceneAnnotation, SemanticMessage, VehicleClass, VehicleRecord, VisualLayout};
