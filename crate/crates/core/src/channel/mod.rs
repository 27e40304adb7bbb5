//! F composite fading, link budget, and transmission energy.

mod check;
mod fading;
mod link;
pub mod quadrature;

pub use check::{self_check, ChannelCheck, CheckLine};
pub use fading::{FadingParams, GainSampler};
pub use link::{db_to_linear, expected_energy, pathloss_db, sample_energy, ChannelModel, LinkBudget};
