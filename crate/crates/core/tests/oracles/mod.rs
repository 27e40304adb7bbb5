//! Independent reference computations shared by the integration tests and
//! the acceptance suite. Nothing here calls the code under test except to
//! read network outputs.

#![allow(dead_code)]

use std::collections::BTreeMap;

use ndarray::{Array2, ArrayView2};
use num_rational::Ratio;
use rand::{Rng, SeedableRng};

use semsample_core::agent::Mlp;
use semsample_core::layout::{BoundingBox, SceneAnnotation, VehicleClass, VehicleRecord};

pub type Q = Ratio<i128>;

/// Coordinates used by the exact oracles are multiples of `1 / GRID`.
pub const GRID: i64 = 64;

/// A box with integer corners on the `1 / GRID` lattice.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct IBox {
    pub x1: i64,
    pub y1: i64,
    pub x2: i64,
    pub y2: i64,
}

impl IBox {
    pub fn to_bbox(self) -> BoundingBox {
        let g = GRID as f64;
        BoundingBox::new(self.x1 as f64 / g, self.y1 as f64 / g, self.x2 as f64 / g, self.y2 as f64 / g).unwrap()
    }

    /// Area in units of `1 / GRID²`.
    pub fn area(self) -> i64 {
        (self.x2 - self.x1) * (self.y2 - self.y1)
    }

    pub fn intersection(self, o: IBox) -> i64 {
        let w = (self.x2.min(o.x2) - self.x1.max(o.x1)).max(0);
        let h = (self.y2.min(o.y2) - self.y1.max(o.y1)).max(0);
        w * h
    }
}

#[derive(Clone, Debug)]
pub struct IScene {
    pub vehicles: Vec<(u32, VehicleClass, IBox)>,
}

impl IScene {
    pub fn to_scene(&self) -> SceneAnnotation {
        SceneAnnotation::new(
            0,
            self.vehicles.iter().map(|&(id, c, b)| VehicleRecord::new(id, c, b.to_bbox())).collect(),
        )
        .unwrap()
    }
}

pub fn random_ibox<R: Rng>(rng: &mut R) -> IBox {
    let (a, b) = (rng.random_range(0..=GRID), rng.random_range(0..=GRID));
    let (c, d) = (rng.random_range(0..=GRID), rng.random_range(0..=GRID));
    IBox { x1: a.min(b), x2: a.max(b), y1: c.min(d), y2: c.max(d) }
}

/// Up to `max` vehicles with ids drawn from `0..id_range`.
pub fn random_iscene<R: Rng>(rng: &mut R, max: usize, id_range: u32) -> IScene {
    let n = rng.random_range(0..=max);
    let mut ids: Vec<u32> = (0..id_range).collect();
    let mut vehicles = Vec::new();
    for _ in 0..n.min(id_range as usize) {
        let id = ids.swap_remove(rng.random_range(0..ids.len()));
        let class = VehicleClass::ALL[rng.random_range(0..4)];
        vehicles.push((id, class, random_ibox(rng)));
    }
    IScene { vehicles }
}

/// Per-track change terms as exact fractions `(numerator, denominator)`,
/// ordered by track id.
pub fn change_terms_exact(current: &IScene, last: &IScene) -> Vec<(u32, i64, i64)> {
    let mut pairs: BTreeMap<u32, (Option<IBox>, Option<IBox>)> = BTreeMap::new();
    for &(id, _, b) in &current.vehicles {
        pairs.entry(id).or_default().0 = Some(b);
    }
    for &(id, _, b) in &last.vehicles {
        pairs.entry(id).or_default().1 = Some(b);
    }
    pairs
        .into_iter()
        .map(|(id, p)| match p {
            (Some(a), Some(b)) => {
                let (aa, ab, i) = (a.area(), b.area(), a.intersection(b));
                let den = 2 * (aa + ab - i);
                if den == 0 {
                    (id, 0, 1)
                } else {
                    (id, aa + ab - 2 * i, den)
                }
            }
            _ => (id, 1, 2),
        })
        .collect()
}

pub fn ratio_sum(terms: impl IntoIterator<Item = (i64, i64)>) -> Q {
    terms.into_iter().fold(Q::from_integer(0), |acc, (n, d)| acc + Q::new(n as i128, d as i128))
}

/// Correctly rounded value of an exact fraction whose parts fit in 53 bits.
pub fn exact_f64(n: i64, d: i64) -> f64 {
    n as f64 / d as f64
}

/// `|x - q| <= tol` checked in rational arithmetic after converting `x`,
/// which must be a finite double. `tol` is an exact fraction.
pub fn close_to_ratio(x: f64, q: Q, tol: Q) -> bool {
    let scaled = (x * (1u64 << 52) as f64).round();
    let xr = Q::new(scaled as i128, 1i128 << 52);
    let err = if xr > q { xr - q } else { q - xr };
    err <= tol + Q::new(1, 1i128 << 52)
}

/// Independent raster: pixel `(x, y)` is painted by a box when
/// `floor(lo·n) <= px < max(ceil(hi·n), floor(lo·n) + 1)`, all in integers.
pub fn raster_exact(scene: &IScene, w: i64, h: i64) -> Vec<u8> {
    let span = |lo: i64, hi: i64, n: i64| {
        let start = (lo * n).div_euclid(GRID).min(n - 1);
        let end = ((hi * n + GRID - 1).div_euclid(GRID)).min(n);
        (start, end.max(start + 1))
    };
    let mut cells = vec![0u8; (w * h) as usize];
    for &(_, class, b) in &scene.vehicles {
        let (x0, x1) = span(b.x1, b.x2, w);
        let (y0, y1) = span(b.y1, b.y2, h);
        for y in y0..y1 {
            for x in x0..x1 {
                cells[(y * w + x) as usize] = class.code();
            }
        }
    }
    cells
}

/// Per-class `(n, n', n̂)` from two rasters.
pub fn class_counts_exact(real: &[u8], pred: &[u8]) -> [(u64, u64, u64); 4] {
    let mut out = [(0, 0, 0); 4];
    for (&r, &p) in real.iter().zip(pred) {
        if r > 0 {
            out[r as usize - 1].0 += 1;
        }
        if p > 0 {
            out[p as usize - 1].1 += 1;
        }
        if r > 0 && r == p {
            out[r as usize - 1].2 += 1;
        }
    }
    out
}

/// Per-class deviation terms as exact fractions.
pub fn deviation_terms_exact(real: &[u8], pred: &[u8]) -> [(i64, i64); 4] {
    class_counts_exact(real, pred).map(|(n, np, nb)| {
        let t = (n + np) as i64;
        if t == 0 {
            (0, 1)
        } else {
            (t - 2 * nb as i64, 2 * t)
        }
    })
}

/// `E[1/g]` of the F composite model from the gamma-function identity
/// `Γ(x + 1) = x Γ(x)`: `m m_s / ((m - 1)(m_s - 1) ḡ)`.
pub fn inverse_moment_closed(m: f64, m_s: f64, g_bar: f64) -> f64 {
    m * m_s / ((m - 1.0) * (m_s - 1.0) * g_bar)
}

/// Energy of an `bits`-bit packet from first principles.
pub fn energy_oracle(bits: usize, bandwidth_hz: f64, snr_db: f64, noise_dbm_hz: f64, m: f64, m_s: f64, g_bar: f64) -> f64 {
    let theta = 10f64.powf(snr_db / 10.0);
    let rate = bandwidth_hz * (1.0 + theta).log2();
    let delta = bits as f64 / rate;
    let noise_w = 10f64.powf((noise_dbm_hz + 10.0 * bandwidth_hz.log10()) / 10.0) / 1000.0;
    delta * theta * noise_w * inverse_moment_closed(m, m_s, g_bar)
}

/// Row-wise numerically naive softmax.
pub fn softmax_rows(logits: &Array2<f64>) -> Array2<f64> {
    let mut out = logits.clone();
    for mut row in out.rows_mut() {
        let mx = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|v| (v - mx).exp());
        let s: f64 = row.sum();
        row.mapv_inplace(|v| v / s);
    }
    out
}

pub fn critic_loss_oracle(critic: &Mlp, states: ArrayView2<f64>, actions: &[usize], y: &[f64]) -> f64 {
    let q = critic.forward(states).unwrap();
    actions.iter().enumerate().map(|(i, &a)| 0.5 * (q[[i, a]] - y[i]).powi(2)).sum::<f64>() / actions.len() as f64
}

pub fn actor_loss_oracle(actor: &Mlp, critics: [&Mlp; 2], temperature: f64, states: ArrayView2<f64>) -> f64 {
    let p = softmax_rows(&actor.forward(states).unwrap());
    let q1 = critics[0].forward(states).unwrap();
    let q2 = critics[1].forward(states).unwrap();
    let mut total = 0.0;
    for i in 0..states.nrows() {
        for a in 0..p.ncols() {
            total += p[[i, a]] * (temperature * p[[i, a]].ln() - q1[[i, a]].min(q2[[i, a]]));
        }
    }
    total / states.nrows() as f64
}

pub fn temperature_loss_oracle(log_temperature: f64, probs: &Array2<f64>, target_entropy: f64) -> f64 {
    let h: f64 = probs.rows().into_iter().map(|r| -r.iter().map(|&p| p * p.ln()).sum::<f64>()).sum::<f64>()
        / probs.nrows() as f64;
    log_temperature.exp() * (h - target_entropy)
}

/// Central differences of `f` over the flat parameters of `net`.
pub fn finite_difference<F: Fn(&Mlp) -> f64>(net: &Mlp, f: F, eps: f64) -> Vec<f64> {
    let base = net.flat_params();
    let mut probe = net.clone();
    let mut out = Vec::with_capacity(base.len());
    for i in 0..base.len() {
        let mut p = base.clone();
        p[i] = base[i] + eps;
        probe.set_flat_params(&p).unwrap();
        let up = f(&probe);
        p[i] = base[i] - eps;
        probe.set_flat_params(&p).unwrap();
        let down = f(&probe);
        out.push((up - down) / (2.0 * eps));
    }
    out
}

/// Largest relative error, with a floor on the denominator so that
/// near-zero components are judged absolutely.
pub fn max_relative_error(analytic: &[f64], numeric: &[f64], floor: f64) -> f64 {
    analytic.iter().zip(numeric).map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(floor)).fold(0.0, f64::max)
}

/// Codec record fields as raw integers: class index and four 5-bit coordinates.
pub type RawRecord = (u8, [u32; 4]);

pub fn random_raw<R: Rng>(rng: &mut R) -> RawRecord {
    let (a, b) = (rng.random_range(0..32u32), rng.random_range(0..32u32));
    let (c, d) = (rng.random_range(0..32u32), rng.random_range(0..32u32));
    (rng.random_range(0..4u8), [a.min(b), c.min(d), a.max(b), c.max(d)])
}

/// MSB-first packing written out bit by bit.
pub fn pack_records(records: &[RawRecord]) -> Vec<u8> {
    let mut bits = Vec::new();
    for (class, q) in records {
        bits.extend((0..2).rev().map(|i| (class >> i) & 1));
        for v in q {
            bits.extend((0..5).rev().map(|i| ((v >> i) & 1) as u8));
        }
    }
    bits.chunks(8).map(|c| c.iter().enumerate().fold(0u8, |acc, (i, &b)| acc | (b << (7 - i)))).collect()
}

/// A small random actor-critic problem for gradient checks.
pub struct GradInstance {
    pub actor: Mlp,
    pub critics: [Mlp; 2],
    pub states: Array2<f64>,
    pub actions: Vec<usize>,
    pub y: Vec<f64>,
    pub temperature: f64,
}

pub fn grad_instance(seed: u64) -> GradInstance {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let dim = rng.random_range(2..7);
    let hidden: Vec<usize> = (0..rng.random_range(1..4)).map(|_| rng.random_range(3..9)).collect();
    let sizes: Vec<usize> = std::iter::once(dim).chain(hidden).chain(std::iter::once(2)).collect();
    let n = rng.random_range(3..12);
    GradInstance {
        actor: Mlp::new(&sizes, &mut rng).unwrap(),
        critics: [Mlp::new(&sizes, &mut rng).unwrap(), Mlp::new(&sizes, &mut rng).unwrap()],
        states: Array2::from_shape_fn((n, dim), |_| rng.random_range(-2.0..2.0)),
        actions: (0..n).map(|_| rng.random_range(0..2)).collect(),
        y: (0..n).map(|_| rng.random_range(-3.0..3.0)).collect(),
        temperature: rng.random_range(0.01..1.0),
    }
}

/// Sampling probability that changes every few hundred steps, with runs of
/// silence and of back-to-back samples mixed in.
pub struct SendPattern {
    rng: rand_chacha::ChaCha8Rng,
    p: f64,
    left: usize,
}

impl SendPattern {
    pub fn new(seed: u64) -> Self {
        SendPattern { rng: rand_chacha::ChaCha8Rng::seed_from_u64(seed), p: 0.5, left: 0 }
    }

    pub fn next(&mut self) -> bool {
        if self.left == 0 {
            self.left = self.rng.random_range(1..400);
            self.p = match self.rng.random_range(0..4) {
                0 => 0.0,
                1 => 1.0,
                _ => self.rng.random(),
            };
        }
        self.left -= 1;
        self.rng.random_bool(self.p)
    }
}

#[derive(Debug, Default)]
pub struct FuzzReport {
    pub steps: usize,
    pub sent: usize,
    pub chained: usize,
    pub resample_requests: usize,
    pub max_queue: usize,
}

/// Drives a receiver through `steps` intervals of generated traffic under a
/// fuzzed sampling pattern, asserting the display contract at every step.
pub fn fuzz_destination(steps: usize, seed: u64, quantized: bool) -> FuzzReport {
    use semsample_core::ingest::{TrafficGenConfig, TrafficGenerator};
    use semsample_core::layout::encode_message;
    use semsample_core::predictor::{ConstantVelocity, DestinationState, DisplaySource, Feedback, PredictorConfig};

    let config = PredictorConfig { history: 8, ..Default::default() };
    let horizon = config.horizon;
    let mut generator =
        TrafficGenerator::new(TrafficGenConfig { seed, spawn_rate: 0.2, speed_jitter: 0.002, ..Default::default() }).unwrap();
    let mut pattern = SendPattern::new(seed);
    let (a, b) = (generator.step(), generator.step());
    let (mut dest, _) = if quantized {
        DestinationState::bootstrap(config, ConstantVelocity, 0, &encode_message(&a).unwrap(), &encode_message(&b).unwrap())
            .unwrap()
    } else {
        DestinationState::bootstrap_scenes(config, ConstantVelocity, 0, &a, &b).unwrap()
    };
    let mut report = FuzzReport { steps, max_queue: dest.pending(), ..Default::default() };
    assert!(dest.pending() <= horizon);
    for t in 2..steps as i64 + 2 {
        // stepping out of order is refused and leaves the state alone
        if t % 997 == 0 {
            assert!(dest.step_scene(t + 1, None).is_err());
            assert_eq!(dest.next_time(), t);
        }
        let scene = generator.step();
        let send = pattern.next();
        let out = if !send {
            dest.step_scene(t, None).unwrap()
        } else if quantized {
            dest.step(t, Some(&encode_message(&scene).unwrap())).unwrap()
        } else {
            dest.step_scene(t, Some(&scene)).unwrap()
        };
        assert_eq!(out.t, t);
        assert_eq!(dest.next_time(), t + 1);
        report.max_queue = report.max_queue.max(dest.pending());
        assert!(dest.pending() <= horizon, "queue {} at {t}", dest.pending());
        assert_eq!(out.deviation.is_some(), send);
        if send {
            report.sent += 1;
            assert_eq!(dest.last_sampled_time(), t);
            assert_eq!(dest.pending(), horizon);
        } else {
            assert_eq!(out.displayed, out.predicted);
            assert_eq!(out.feedback, Feedback::None);
        }
        if out.feedback == Feedback::RequestResample {
            report.resample_requests += 1;
        }
        if out.source == DisplaySource::Repredicted {
            report.chained += 1;
        }
        // the display history holds exactly one layout per interval, in order
        let times: Vec<i64> = dest.history().map(|(s, _)| s).collect();
        assert_eq!(*times.last().unwrap(), t);
        assert!(times.windows(2).all(|w| w[1] == w[0] + 1));
        assert_eq!(dest.history().last().unwrap().1, &out.displayed);
    }
    assert_eq!(dest.chained_rounds() as usize, report.chained);
    report
}
