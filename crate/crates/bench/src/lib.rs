//! Fixtures shared by the benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use semsample_core::agent::{Batch, Transition};
use semsample_core::ingest::{generate_traffic, FootageClip, TrafficGenConfig};
use semsample_core::{BoundingBox, SceneAnnotation, VehicleClass, VehicleRecord};

/// `n` random vehicles.
pub fn random_scene(n: usize, seed: u64) -> SceneAnnotation {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vehicles = (0..n as u32)
        .map(|id| {
            let (x, y) = (rng.random_range(0.0..0.9), rng.random_range(0.0..0.9));
            let (w, h) = (rng.random_range(0.02..0.1), rng.random_range(0.02..0.1));
            VehicleRecord::new(id, VehicleClass::ALL[rng.random_range(0..4)], BoundingBox::new(x, y, x + w, y + h).unwrap())
        })
        .collect();
    SceneAnnotation::new(0, vehicles).unwrap()
}

/// Medium-density synthetic traffic.
pub fn traffic(frames: usize) -> FootageClip {
    let cfg = TrafficGenConfig { seed: 5, spawn_rate: 0.15, speed_mean: 0.02, ..Default::default() };
    generate_traffic(&cfg, frames, "bench").unwrap()
}

pub fn random_batch(size: usize, dim: usize, seed: u64) -> Batch {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ts: Vec<Transition> = (0..size)
        .map(|_| Transition {
            state: (0..dim).map(|_| rng.random()).collect(),
            action: rng.random_range(0..2),
            reward: rng.random_range(-1.0..1.0),
            next_state: (0..dim).map(|_| rng.random()).collect(),
            done: rng.random_bool(0.01),
        })
        .collect();
    Batch::from_transitions(&ts).unwrap()
}
