use rand::Rng;
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};

use super::FadingParams;
use crate::error::{Error, Result};

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Path loss in dB at distance `d` meters: `35.3 + 37.6 log10(d)`.
pub fn pathloss_db(distance_m: f64) -> f64 {
    35.3 + 37.6 * distance_m.log10()
}

/// Link constants. All decibel quantities are converted once, here.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkBudget {
    bandwidth_hz: f64,
    snr_threshold: f64,
    noise_psd_dbm_hz: f64,
    distance_m: f64,
    pathloss_db: f64,
    g_bar: f64,
    noise_power_w: f64,
}

impl LinkBudget {
    pub fn new(bandwidth_hz: f64, snr_threshold_db: f64, noise_psd_dbm_hz: f64, distance_m: f64) -> Result<Self> {
        Self::with_linear_snr(bandwidth_hz, db_to_linear(snr_threshold_db), noise_psd_dbm_hz, distance_m)
    }

    pub fn with_linear_snr(bandwidth_hz: f64, snr_threshold: f64, noise_psd_dbm_hz: f64, distance_m: f64) -> Result<Self> {
        if !(bandwidth_hz.is_finite() && bandwidth_hz > 0.0) {
            return Err(Error::Domain(format!("bandwidth {bandwidth_hz} Hz must be > 0")));
        }
        if !(snr_threshold.is_finite() && snr_threshold > 0.0) {
            return Err(Error::Domain(format!("SNR threshold {snr_threshold} must be > 0")));
        }
        if !(distance_m.is_finite() && distance_m > 0.0) {
            return Err(Error::Domain(format!("distance {distance_m} m must be > 0")));
        }
        if !noise_psd_dbm_hz.is_finite() {
            return Err(Error::Domain("noise density must be finite".into()));
        }
        let pl = pathloss_db(distance_m);
        Ok(LinkBudget {
            bandwidth_hz,
            snr_threshold,
            noise_psd_dbm_hz,
            distance_m,
            pathloss_db: pl,
            g_bar: db_to_linear(-pl),
            noise_power_w: db_to_linear(noise_psd_dbm_hz + 10.0 * bandwidth_hz.log10() - 30.0),
        })
    }

    /// Default link budget: 1 kHz, 15 dB, -90 dBm/Hz, 100 m.
    pub fn desk_default() -> Self {
        LinkBudget::new(1_000.0, 15.0, -90.0, 100.0).expect("valid defaults")
    }

    pub fn bandwidth_hz(&self) -> f64 {
        self.bandwidth_hz
    }
    pub fn snr_threshold(&self) -> f64 {
        self.snr_threshold
    }
    pub fn noise_psd_dbm_hz(&self) -> f64 {
        self.noise_psd_dbm_hz
    }
    pub fn distance_m(&self) -> f64 {
        self.distance_m
    }
    pub fn pathloss_db(&self) -> f64 {
        self.pathloss_db
    }
    /// Average channel gain implied by the path loss (linear).
    pub fn g_bar(&self) -> f64 {
        self.g_bar
    }
    /// Noise power over the allocated band, in watts.
    pub fn noise_power_w(&self) -> f64 {
        self.noise_power_w
    }

    /// Achievable rate `W log2(1 + Θ)` in bit/s.
    pub fn rate_bits_per_s(&self) -> f64 {
        self.bandwidth_hz * self.snr_threshold.ln_1p() / std::f64::consts::LN_2
    }

    /// Airtime of an `L`-bit packet, seconds.
    pub fn transmission_duration(&self, size_bits: usize) -> f64 {
        if size_bits == 0 {
            return 0.0;
        }
        size_bits as f64 / self.rate_bits_per_s()
    }
}

/// Expected transmit energy (J) under power control `p = Θσ²/g`:
/// `δ Θ σ² E[1/g]`.
pub fn expected_energy(size_bits: usize, link: &LinkBudget, fading: &FadingParams) -> Result<f64> {
    let inverse = fading.moment(-1.0)?;
    Ok(link.transmission_duration(size_bits) * link.snr_threshold() * link.noise_power_w() * inverse)
}

/// One Monte-Carlo realization of the transmit energy: the airtime is cut
/// into transmission intervals of `tti_s` seconds with i.i.d. gains.
pub fn sample_energy<R: Rng + ?Sized>(
    size_bits: usize,
    link: &LinkBudget,
    fading: &FadingParams,
    tti_s: f64,
    rng: &mut R,
) -> Result<f64> {
    if !(tti_s.is_finite() && tti_s > 0.0) {
        return Err(Error::Domain(format!("transmission interval {tti_s} s must be > 0")));
    }
    let mut remaining = link.transmission_duration(size_bits);
    let sampler = fading.sampler();
    let power = link.snr_threshold() * link.noise_power_w();
    let mut energy = 0.0;
    while remaining > 0.0 {
        let dt = remaining.min(tti_s);
        energy += dt * power / sampler.sample(rng);
        remaining -= dt;
    }
    Ok(energy)
}

/// Link budget plus fading: everything needed to price a transmission.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelModel {
    pub link: LinkBudget,
    pub fading: FadingParams,
}

impl ChannelModel {
    /// Fading shapes on top of a link; the mean gain comes from the path loss.
    pub fn new(link: LinkBudget, m: f64, m_s: f64) -> Result<Self> {
        Ok(ChannelModel { link, fading: FadingParams::new(m, m_s, link.g_bar())? })
    }

    pub fn desk_default() -> Self {
        ChannelModel::new(LinkBudget::desk_default(), 6.0, 6.0).expect("valid defaults")
    }

    pub fn expected_energy(&self, size_bits: usize) -> Result<f64> {
        expected_energy(size_bits, &self.link, &self.fading)
    }
}
