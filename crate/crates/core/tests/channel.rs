mod oracles;

use oracles::{energy_oracle, inverse_moment_closed};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Distribution;
use statrs::distribution::{ContinuousCDF, FisherSnedecor};

use semsample_core::channel::quadrature::integrate_half_line;
use semsample_core::channel::{expected_energy, ChannelModel, FadingParams, LinkBudget};

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

#[test]
fn inverse_moment_matches_gamma_identity() {
    for g_bar in [1e-9, 2.3e-7, 1.0, 40.0] {
        let f = FadingParams::new(6.0, 6.0, g_bar).unwrap();
        let got = f.moment(-1.0).unwrap();
        assert!(rel(got, 1.44 / g_bar) < 1e-9, "{got}");
        assert!(rel(got, inverse_moment_closed(6.0, 6.0, g_bar)) < 1e-9);
    }
}

#[test]
fn inverse_moment_monte_carlo() {
    let f = FadingParams::new(6.0, 6.0, 1.0).unwrap();
    let s = f.sampler();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let n = 1_000_000;
    let mean = (0..n).map(|_| 1.0 / s.sample(&mut rng)).sum::<f64>() / n as f64;
    assert!(rel(mean, 1.44) < 0.02, "{mean}");
}

#[test]
fn pdf_integrates_to_one() {
    for (m, ms) in [(6.0, 6.0), (2.5, 3.0), (1.2, 8.0)] {
        let f = FadingParams::new(m, ms, 1.0).unwrap();
        let q = integrate_half_line(|g| f.pdf(g).unwrap(), 1.0, 1e-12);
        assert!((q.value - 1.0).abs() < 1e-6, "m {m} m_s {ms}: {}", q.value);
        let mean = integrate_half_line(|g| g * f.pdf(g).unwrap(), 1.0, 1e-12).value;
        assert!((mean - 1.0).abs() < 1e-6, "{mean}");
    }
}

/// `g m_s / ((m_s - 1) ḡ)` is F(2m, 2m_s) distributed.
#[test]
fn samples_follow_scaled_f_distribution() {
    let (m, ms, g_bar) = (6.0, 6.0, 3.0);
    let f = FadingParams::new(m, ms, g_bar).unwrap();
    let reference = FisherSnedecor::new(2.0 * m, 2.0 * ms).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let n = 20_000;
    let mut xs: Vec<f64> = (0..n).map(|_| f.sample_gain(&mut rng) * ms / ((ms - 1.0) * g_bar)).collect();
    xs.sort_by(f64::total_cmp);
    let ks = xs
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let c = reference.cdf(x);
            (c - i as f64 / n as f64).abs().max((c - (i + 1) as f64 / n as f64).abs())
        })
        .fold(0.0, f64::max);
    // 1.63 / sqrt(n) is the 1% critical value
    assert!(ks < 1.63 / (n as f64).sqrt(), "KS {ks}");
    // the library cdf agrees with the reference on the same scale
    for &x in xs.iter().step_by(997) {
        let g = x * (ms - 1.0) * g_bar / ms;
        assert!((f.cdf(g) - reference.cdf(x)).abs() < 1e-9);
    }
}

#[test]
fn desk_default_packet_energy() {
    let c = ChannelModel::desk_default();
    let e = c.expected_energy(22).unwrap();
    let o = energy_oracle(22, 1000.0, 15.0, -90.0, 6.0, 6.0, 10f64.powf(-(35.3 + 37.6 * 2.0) / 10.0));
    assert!(rel(e, o) < 1e-12, "{e} vs {o}");
    assert!((e - 22.36).abs() < 0.01, "{e}");
}

#[test]
fn energy_identity_on_random_parameters() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for _ in 0..100 {
        let bits = rng.random_range(1..2000);
        let bw = 10f64.powf(rng.random_range(2.0..7.0));
        let snr_db = rng.random_range(-5.0..30.0);
        let noise = rng.random_range(-180.0..-80.0);
        let dist = rng.random_range(5.0..2000.0);
        let (m, ms) = (rng.random_range(1.1..10.0), rng.random_range(1.5..10.0));
        let link = LinkBudget::new(bw, snr_db, noise, dist).unwrap();
        let fading = FadingParams::new(m, ms, link.g_bar()).unwrap();
        let e = expected_energy(bits, &link, &fading).unwrap();
        let o = energy_oracle(bits, bw, snr_db, noise, m, ms, link.g_bar());
        assert!(rel(e, o) < 1e-12, "{e} vs {o}");
    }
}

#[test]
fn energy_is_monotone_on_grid() {
    let sizes = [22, 44, 110, 220, 1408];
    let snrs = [0.0, 5.0, 10.0, 15.0, 20.0];
    let gains = [1e-12, 1e-10, 1e-8, 1e-6, 1e-4];
    let e = |l: usize, s: f64, g: f64| {
        let link = LinkBudget::new(1000.0, s, -90.0, 100.0).unwrap();
        expected_energy(l, &link, &FadingParams::new(6.0, 6.0, g).unwrap()).unwrap()
    };
    for i in 0..5 {
        for j in 0..5 {
            for k in 0..5 {
                let here = e(sizes[i], snrs[j], gains[k]);
                if i + 1 < 5 {
                    assert!(e(sizes[i + 1], snrs[j], gains[k]) > here);
                }
                if j + 1 < 5 {
                    assert!(e(sizes[i], snrs[j + 1], gains[k]) > here);
                }
                if k + 1 < 5 {
                    // larger mean gain, i.e. smaller 1/ḡ, costs less
                    assert!(e(sizes[i], snrs[j], gains[k + 1]) < here);
                }
            }
        }
    }
}

#[test]
fn self_check_passes_at_defaults() {
    let report = semsample_core::channel::self_check(&ChannelModel::desk_default(), 200_000, 22, 1).unwrap();
    assert!(report.passed(), "{report:?}");
    assert!((report.normalized_inverse_moment - 1.44).abs() < 1e-9);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn moment_closed_form_matches_quadrature(m in 1.5f64..8.0, ms in 2.5f64..8.0, n in -1.0f64..1.0) {
        let f = FadingParams::new(m, ms, 1.0).unwrap();
        let q = integrate_half_line(|g| g.powf(n) * f.pdf(g).unwrap(), 1.0, 1e-12).value;
        let c = f.moment(n).unwrap();
        prop_assert!(rel(c, q) < 1e-6, "n {} closed {} quad {}", n, c, q);
    }

    #[test]
    fn energy_scales_linearly_in_size(bits in 1usize..5000, k in 2usize..10) {
        let c = ChannelModel::desk_default();
        let (a, b) = (c.expected_energy(bits).unwrap(), c.expected_energy(bits * k).unwrap());
        prop_assert!(rel(b, a * k as f64) < 1e-12);
    }
}
