mod oracles;

use oracles::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use semsample_core::layout::{class_overlaps, prediction_deviation, rasterize, semantic_change, semantic_change_terms};
use semsample_core::layout::{DEFAULT_HEIGHT, DEFAULT_WIDTH};
use semsample_core::{SceneAnnotation, VehicleClass};

const W: i64 = DEFAULT_WIDTH as i64;
const H: i64 = DEFAULT_HEIGHT as i64;

fn check_change(cur: &IScene, last: &IScene) {
    let exact = change_terms_exact(cur, last);
    let got = semantic_change_terms(&cur.to_scene(), &last.to_scene());
    assert_eq!(got.len(), exact.len());
    for (g, &(id, n, d)) in got.iter().zip(&exact) {
        assert_eq!(g.track_id, id);
        // dyadic corners make areas exact, so each term is one correctly rounded division
        assert_eq!(g.value, exact_f64(n, d), "track {id}: {n}/{d}");
    }
    let total = ratio_sum(exact.iter().map(|&(_, n, d)| (n, d)));
    let chi = semantic_change(&cur.to_scene(), &last.to_scene());
    assert!(close_to_ratio(chi, total, Q::new(exact.len() as i128, 1i128 << 50)), "{chi} vs {total}");
}

fn check_deviation(real: &IScene, pred: &IScene) {
    let (rr, pr) = (raster_exact(real, W, H), raster_exact(pred, W, H));
    let (rl, pl) = (rasterize(&real.to_scene(), DEFAULT_WIDTH, DEFAULT_HEIGHT), rasterize(&pred.to_scene(), DEFAULT_WIDTH, DEFAULT_HEIGHT));
    assert_eq!(rl.cells(), &rr[..], "raster of {real:?}");
    assert_eq!(pl.cells(), &pr[..]);
    let counts = class_counts_exact(&rr, &pr);
    let got = class_overlaps(&rl, &pl).unwrap();
    for (g, &(n, np, nb)) in got.iter().zip(&counts) {
        assert_eq!((g.n_real, g.n_pred, g.n_both), (n, np, nb));
    }
    let terms = deviation_terms_exact(&rr, &pr);
    for (g, &(n, d)) in got.iter().zip(&terms) {
        assert_eq!(g.term(), exact_f64(n, d));
    }
    let d = prediction_deviation(&rl, &pl).unwrap();
    assert!(close_to_ratio(d, ratio_sum(terms), Q::new(4, 1i128 << 50)));
}

#[test]
fn random_scenes_match_exact_oracles() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..1000 {
        let a = random_iscene(&mut rng, 6, 10);
        let b = if rng.random_bool(0.3) { a.clone() } else { random_iscene(&mut rng, 6, 10) };
        check_change(&a, &b);
        check_deviation(&a, &b);
    }
}

#[test]
fn self_comparison_is_zero() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..1000 {
        let s = random_iscene(&mut rng, 8, 12).to_scene();
        assert_eq!(semantic_change(&s, &s), 0.0);
        let l = rasterize(&s, DEFAULT_WIDTH, DEFAULT_HEIGHT);
        assert_eq!(prediction_deviation(&l, &l).unwrap(), 0.0);
    }
}

#[test]
fn disjoint_single_objects_score_one_half() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut seen = 0;
    while seen < 500 {
        let (a, b) = (random_ibox(&mut rng), random_ibox(&mut rng));
        // two lattice steps are more than two pixels on either axis, so rasters cannot touch
        let gap_x = b.x1 >= a.x2 + 2 || a.x1 >= b.x2 + 2;
        let gap_y = b.y1 >= a.y2 + 2 || a.y1 >= b.y2 + 2;
        if a.area() == 0 || b.area() == 0 || !(gap_x || gap_y) {
            continue;
        }
        seen += 1;
        let class = VehicleClass::ALL[rng.random_range(0..4)];
        let sa = IScene { vehicles: vec![(1, class, a)] };
        let sb = IScene { vehicles: vec![(1, class, b)] };
        assert_eq!(semantic_change(&sa.to_scene(), &sb.to_scene()), 0.5);
        let (la, lb) = (rasterize(&sa.to_scene(), DEFAULT_WIDTH, DEFAULT_HEIGHT), rasterize(&sb.to_scene(), DEFAULT_WIDTH, DEFAULT_HEIGHT));
        assert_eq!(prediction_deviation(&la, &lb).unwrap(), 0.5);
        // different ids never match, wherever the boxes are
        let sc = IScene { vehicles: vec![(2, class, a)] };
        assert_eq!(semantic_change(&sc.to_scene(), &sb.to_scene()), 1.0);
    }
}

#[test]
fn empty_scenes() {
    let e = SceneAnnotation::empty(0);
    assert_eq!(semantic_change(&e, &e), 0.0);
    let l = rasterize(&e, DEFAULT_WIDTH, DEFAULT_HEIGHT);
    assert_eq!(prediction_deviation(&l, &l).unwrap(), 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn oracle_agreement(seed in any::<u64>(), max in 0usize..12) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_iscene(&mut rng, max, 16);
        let b = random_iscene(&mut rng, max, 16);
        check_change(&a, &b);
        check_deviation(&a, &b);
    }

    #[test]
    fn change_is_symmetric_and_bounded(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_iscene(&mut rng, 8, 10).to_scene();
        let b = random_iscene(&mut rng, 8, 10).to_scene();
        let (ab, ba) = (semantic_change(&a, &b), semantic_change(&b, &a));
        prop_assert_eq!(ab, ba);
        let tracks = semantic_change_terms(&a, &b).len() as f64;
        prop_assert!((0.0..=0.5 * tracks).contains(&ab));
    }

    #[test]
    fn deviation_is_bounded(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = rasterize(&random_iscene(&mut rng, 8, 10).to_scene(), DEFAULT_WIDTH, DEFAULT_HEIGHT);
        let b = rasterize(&random_iscene(&mut rng, 8, 10).to_scene(), DEFAULT_WIDTH, DEFAULT_HEIGHT);
        let d = prediction_deviation(&a, &b).unwrap();
        prop_assert!((0.0..=2.0).contains(&d), "{}", d);
        prop_assert_eq!(d, prediction_deviation(&b, &a).unwrap());
    }
}
