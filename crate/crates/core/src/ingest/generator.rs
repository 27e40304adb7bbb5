use rand::distr::weighted::WeightedIndex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use super::{FootageClip, DEFAULT_SOURCE_HEIGHT, DEFAULT_SOURCE_WIDTH};
use crate::error::{Error, Result};
use crate::layout::{BoundingBox, SceneAnnotation, VehicleClass, VehicleRecord, MAX_VEHICLES, NUM_CLASSES};

const ROAD_TOP: f64 = 0.15;
const ROAD_BOTTOM: f64 = 0.95;
const ENTRY_CLEARANCE: f64 = 0.02;

/// Nominal (width, height) of each class in normalized frame units.
const CLASS_SIZE: [(f64, f64); NUM_CLASSES] = [(0.09, 0.07), (0.20, 0.10), (0.12, 0.085), (0.06, 0.05)];

/// Overrides the arrival rate and mean speed from `start_frame` onwards.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrafficPhase {
    pub start_frame: u64,
    pub spawn_rate: f64,
    pub speed_mean: f64,
}

/// Synthetic two-way road. Speeds are in frame widths per frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrafficGenConfig {
    /// Lanes in each direction.
    pub lanes: u32,
    /// Mean Poisson arrivals per frame over the whole road.
    pub spawn_rate: f64,
    pub speed_mean: f64,
    /// Relative spread of per-vehicle base speeds, uniform in `±spread`.
    pub speed_spread: f64,
    /// Per-frame additive speed noise, uniform in `±jitter`.
    pub speed_jitter: f64,
    pub class_mix: [f64; NUM_CLASSES],
    pub seed: u64,
    /// Frames simulated and discarded before the first emitted frame.
    pub warmup_frames: u64,
    pub phases: Vec<TrafficPhase>,
}

impl Default for TrafficGenConfig {
    fn default() -> Self {
        TrafficGenConfig {
            lanes: 2,
            spawn_rate: 0.15,
            speed_mean: 0.02,
            speed_spread: 0.25,
            speed_jitter: 0.0,
            class_mix: [0.7, 0.1, 0.15, 0.05],
            seed: 0,
            warmup_frames: 60,
            phases: Vec::new(),
        }
    }
}

impl TrafficGenConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.lanes == 0 {
            return bad("at least one lane per direction is required".into());
        }
        if !(self.spawn_rate.is_finite() && self.spawn_rate >= 0.0) {
            return bad(format!("spawn rate {} must be >= 0", self.spawn_rate));
        }
        if !(self.speed_mean.is_finite() && self.speed_mean > 0.0) {
            return bad(format!("mean speed {} must be > 0", self.speed_mean));
        }
        if !(0.0..1.0).contains(&self.speed_spread) {
            return bad(format!("speed spread {} must lie in [0, 1)", self.speed_spread));
        }
        if !(self.speed_jitter.is_finite() && self.speed_jitter >= 0.0) {
            return bad(format!("speed jitter {} must be >= 0", self.speed_jitter));
        }
        if self.class_mix.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return bad(format!("class mix {:?} has a negative entry", self.class_mix));
        }
        let total: f64 = self.class_mix.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return bad(format!("class mix sums to {total}, not 1"));
        }
        for w in self.phases.windows(2) {
            if w[1].start_frame <= w[0].start_frame {
                return bad("traffic phases must have increasing start frames".into());
            }
        }
        for p in &self.phases {
            if !(p.spawn_rate.is_finite() && p.spawn_rate >= 0.0 && p.speed_mean.is_finite() && p.speed_mean > 0.0) {
                return bad(format!("invalid phase {p:?}"));
            }
        }
        Ok(())
    }

    fn regime(&self, frame: u64) -> (f64, f64) {
        self.phases
            .iter()
            .rev()
            .find(|p| p.start_frame <= frame)
            .map_or((self.spawn_rate, self.speed_mean), |p| (p.spawn_rate, p.speed_mean))
    }
}

#[derive(Clone, Debug)]
struct Mover {
    id: u32,
    class: VehicleClass,
    lane: usize,
    /// Leading edge along the direction of travel.
    front: f64,
    speed: f64,
}

/// Stateful generator. Each call to [`TrafficGenerator::step`] advances the
/// road by one frame and returns the visible vehicles.
#[derive(Clone, Debug)]
pub struct TrafficGenerator {
    config: TrafficGenConfig,
    rng: ChaCha8Rng,
    classes: WeightedIndex<f64>,
    movers: Vec<Mover>,
    next_id: u32,
    clock: u64,
    spawned: u64,
    despawned: u64,
}

impl TrafficGenerator {
    pub fn new(config: TrafficGenConfig) -> Result<Self> {
        config.validate()?;
        let classes = WeightedIndex::new(config.class_mix).map_err(|e| Error::Config(format!("class mix: {e}")))?;
        let rng = ChaCha8Rng::seed_from_u64(config.seed);
        Ok(TrafficGenerator {
            config,
            rng,
            classes,
            movers: Vec::new(),
            next_id: 1,
            clock: 0,
            spawned: 0,
            despawned: 0,
        })
    }

    pub fn spawned(&self) -> u64 {
        self.spawned
    }

    pub fn despawned(&self) -> u64 {
        self.despawned
    }

    pub fn live(&self) -> usize {
        self.movers.len()
    }

    fn lane_count(&self) -> usize {
        2 * self.config.lanes as usize
    }

    /// Lanes in the upper half travel right to left.
    fn eastbound(&self, lane: usize) -> bool {
        lane >= self.config.lanes as usize
    }

    fn lane_height(&self) -> f64 {
        (ROAD_BOTTOM - ROAD_TOP) / self.lane_count() as f64
    }

    fn size(&self, class: VehicleClass) -> (f64, f64) {
        let (w, h) = CLASS_SIZE[class.index()];
        (w, h.min(0.9 * self.lane_height()))
    }

    fn bbox(&self, m: &Mover) -> BoundingBox {
        let (w, h) = self.size(m.class);
        let cy = ROAD_TOP + (m.lane as f64 + 0.5) * self.lane_height();
        let (x1, x2) = if self.eastbound(m.lane) { (m.front - w, m.front) } else { (m.front, m.front + w) };
        BoundingBox::clamped(x1, cy - h / 2.0, x2, cy + h / 2.0).expect("finite coordinates")
    }

    fn entry_clear(&self, lane: usize) -> bool {
        let east = self.eastbound(lane);
        self.movers.iter().filter(|m| m.lane == lane).all(|m| {
            let (w, _) = self.size(m.class);
            if east {
                m.front - w >= ENTRY_CLEARANCE
            } else {
                m.front + w <= 1.0 - ENTRY_CLEARANCE
            }
        })
    }

    fn advance(&mut self) {
        let jitter = self.config.speed_jitter;
        for i in 0..self.movers.len() {
            let noise = if jitter > 0.0 { self.rng.random_range(-jitter..=jitter) } else { 0.0 };
            let step = (self.movers[i].speed + noise).max(0.0);
            let m = &mut self.movers[i];
            if m.lane >= self.config.lanes as usize {
                m.front += step;
            } else {
                m.front -= step;
            }
        }
        let before = self.movers.len();
        let lanes = self.config.lanes as usize;
        self.movers.retain(|m| {
            let w = CLASS_SIZE[m.class.index()].0;
            if m.lane >= lanes {
                m.front - w < 1.0
            } else {
                m.front + w > 0.0
            }
        });
        self.despawned += (before - self.movers.len()) as u64;
    }

    fn spawn(&mut self) {
        let (rate, speed_mean) = self.config.regime(self.clock);
        if rate <= 0.0 {
            return;
        }
        let arrivals = Poisson::new(rate).expect("positive rate").sample(&mut self.rng) as u64;
        for _ in 0..arrivals {
            let lane = self.rng.random_range(0..self.lane_count());
            let class = VehicleClass::ALL[self.classes.sample(&mut self.rng)];
            let spread = self.config.speed_spread;
            let factor = if spread > 0.0 { 1.0 + self.rng.random_range(-spread..=spread) } else { 1.0 };
            if self.movers.len() >= MAX_VEHICLES || !self.entry_clear(lane) {
                continue;
            }
            let speed = speed_mean * factor;
            let front = if self.eastbound(lane) { speed } else { 1.0 - speed };
            self.movers.push(Mover { id: self.next_id, class, lane, front, speed });
            self.next_id += 1;
            self.spawned += 1;
        }
    }

    /// Moves existing vehicles, admits new arrivals, and reports the frame.
    pub fn step(&mut self) -> SceneAnnotation {
        self.advance();
        self.spawn();
        let vehicles = self.movers.iter().map(|m| VehicleRecord::new(m.id, m.class, self.bbox(m))).collect();
        let frame = self.clock;
        self.clock += 1;
        SceneAnnotation::new(frame, vehicles).expect("ids are unique")
    }
}

/// Runs the generator through its warm-up and records `num_frames` frames,
/// indexed from zero.
pub fn generate_traffic(config: &TrafficGenConfig, num_frames: usize, name: impl Into<String>) -> Result<FootageClip> {
    let mut g = TrafficGenerator::new(config.clone())?;
    for _ in 0..config.warmup_frames {
        g.step();
    }
    let frames = (0..num_frames as u64).map(|i| g.step().with_frame_index(i)).collect();
    FootageClip::new(name, DEFAULT_SOURCE_WIDTH, DEFAULT_SOURCE_HEIGHT, frames)
}
