use std::hint::black_box;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use semsample_bench::{random_batch, random_scene, traffic};
use semsample_core::agent::{SacAgent, SacConfig};
use semsample_core::channel::ChannelModel;
use semsample_core::layout::{
    decode_message, encode_message, prediction_deviation, rasterize, semantic_change, DEFAULT_HEIGHT, DEFAULT_WIDTH,
};
use semsample_core::simulator::{run_episode, EpisodeConfig, PeriodicPolicy};

fn layouts(c: &mut Criterion) {
    let a = random_scene(20, 1);
    let b = random_scene(20, 2);
    let msg = encode_message(&a).unwrap();
    c.bench_function("encode 20 vehicles", |bch| bch.iter(|| encode_message(black_box(&a)).unwrap()));
    c.bench_function("decode 20 vehicles", |bch| bch.iter(|| decode_message(black_box(&msg)).unwrap()));
    c.bench_function("semantic change 20 vs 20", |bch| bch.iter(|| semantic_change(black_box(&a), black_box(&b))));
    let (la, lb) = (rasterize(&a, DEFAULT_WIDTH, DEFAULT_HEIGHT), rasterize(&b, DEFAULT_WIDTH, DEFAULT_HEIGHT));
    c.bench_function("rasterize 20 vehicles", |bch| bch.iter(|| rasterize(black_box(&a), DEFAULT_WIDTH, DEFAULT_HEIGHT)));
    c.bench_function("prediction deviation 120x80", |bch| bch.iter(|| prediction_deviation(black_box(&la), black_box(&lb)).unwrap()));
}

fn channel(c: &mut Criterion) {
    let model = ChannelModel::desk_default();
    c.bench_function("expected energy", |bch| bch.iter(|| model.expected_energy(black_box(220)).unwrap()));
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    c.bench_function("gain draw", |bch| bch.iter(|| model.fading.sample_gain(&mut rng)));
}

fn agent(c: &mut Criterion) {
    let cfg = SacConfig { hidden: vec![64, 64, 64], batch_size: 128, replay_capacity: 1000, ..Default::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut agent = SacAgent::new(cfg, 15, &mut rng).unwrap();
    let batch = random_batch(128, 15, 5);
    c.bench_function("sac update 64x3 batch 128", |bch| bch.iter(|| agent.update(black_box(&batch)).unwrap()));
}

fn episode(c: &mut Criterion) {
    let config = Arc::new(EpisodeConfig::default());
    let clip = Arc::new(traffic(200));
    c.bench_function("150-step episode, periodic-5", |bch| {
        bch.iter(|| run_episode(Arc::clone(&config), Arc::clone(&clip), 0, &mut PeriodicPolicy::new(5).unwrap()).unwrap())
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(20);
    targets = layouts, channel, agent, episode
}
criterion_main!(benches);
