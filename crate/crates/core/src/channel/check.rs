use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};

use super::quadrature::integrate_half_line;
use super::{sample_energy, ChannelModel};
use crate::error::{Error, Result};

/// One quantity computed three ways.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckLine {
    pub name: String,
    pub closed_form: f64,
    pub monte_carlo: Option<f64>,
    pub quadrature: f64,
    pub mc_tolerance: f64,
    pub quadrature_tolerance: f64,
}

impl CheckLine {
    pub fn mc_error(&self) -> Option<f64> {
        self.monte_carlo.map(|v| rel(v, self.closed_form))
    }

    pub fn quadrature_error(&self) -> f64 {
        rel(self.quadrature, self.closed_form)
    }

    pub fn passed(&self) -> bool {
        self.mc_error().is_none_or(|e| e <= self.mc_tolerance) && self.quadrature_error() <= self.quadrature_tolerance
    }
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelCheck {
    pub m: f64,
    pub m_s: f64,
    pub g_bar: f64,
    pub draws: usize,
    /// `E[1/g] · g_bar`.
    pub normalized_inverse_moment: f64,
    pub lines: Vec<CheckLine>,
}

impl ChannelCheck {
    pub fn passed(&self) -> bool {
        self.lines.iter().all(CheckLine::passed)
    }
}

/// Compares the closed-form moments and energy with seeded Monte-Carlo
/// averages and numerical integration of the density. Quadrature runs on
/// the unit-mean density and is rescaled by the matching power of `g_bar`.
pub fn self_check(model: &ChannelModel, draws: usize, packet_bits: usize, seed: u64) -> Result<ChannelCheck> {
    if draws == 0 {
        return Err(Error::Config("need at least one Monte-Carlo draw".into()));
    }
    let f = model.fading;
    let gb = f.g_bar();
    let unit = f.with_g_bar(1.0)?;
    let pdf = |g: f64| unit.pdf(g).unwrap_or(0.0);
    let tol = 1e-12;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sampler = f.sampler();
    let (mut sum, mut sum_inv) = (0.0, 0.0);
    for _ in 0..draws {
        let g = sampler.sample(&mut rng);
        sum += g;
        sum_inv += 1.0 / g;
    }
    let n = draws as f64;

    let norm = integrate_half_line(pdf, 1.0, tol).value;
    let mean_q = integrate_half_line(|g| g * pdf(g), 1.0, tol).value * gb;
    let inv_q = integrate_half_line(|g| pdf(g) / g, 1.0, tol).value / gb;
    let inverse = f.moment(-1.0)?;

    let link = &model.link;
    let energy = model.expected_energy(packet_bits)?;
    let energy_q = link.transmission_duration(packet_bits) * link.snr_threshold() * link.noise_power_w() * inv_q;
    let packets = (draws / 10).max(1);
    let mut e_sum = 0.0;
    for _ in 0..packets {
        e_sum += sample_energy(packet_bits, link, &f, 1e-3, &mut rng)?;
    }

    let lines = vec![
        CheckLine {
            name: "pdf normalization".into(),
            closed_form: 1.0,
            monte_carlo: None,
            quadrature: norm,
            mc_tolerance: 0.0,
            quadrature_tolerance: 1e-6,
        },
        CheckLine {
            name: "mean gain E[g]".into(),
            closed_form: f.moment(1.0)?,
            monte_carlo: Some(sum / n),
            quadrature: mean_q,
            mc_tolerance: 0.02,
            quadrature_tolerance: 1e-6,
        },
        CheckLine {
            name: "inverse moment E[1/g]".into(),
            closed_form: inverse,
            monte_carlo: Some(sum_inv / n),
            quadrature: inv_q,
            mc_tolerance: 0.02,
            quadrature_tolerance: 1e-6,
        },
        CheckLine {
            name: format!("energy of a {packet_bits}-bit packet (J)"),
            closed_form: energy,
            monte_carlo: Some(e_sum / packets as f64),
            quadrature: energy_q,
            mc_tolerance: 0.02,
            quadrature_tolerance: 1e-6,
        },
    ];
    Ok(ChannelCheck { m: f.m(), m_s: f.m_s(), g_bar: gb, draws, normalized_inverse_moment: inverse * gb, lines })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_pass() {
        let c = self_check(&ChannelModel::desk_default(), 200_000, 22, 1).unwrap();
        assert!(c.passed(), "{c:#?}");
        assert!((c.normalized_inverse_moment - 1.44).abs() < 1e-12);
    }

    #[test]
    fn needs_draws() {
        assert!(self_check(&ChannelModel::desk_default(), 0, 22, 1).is_err());
    }
}
