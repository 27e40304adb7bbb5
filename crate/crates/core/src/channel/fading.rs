use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};
use statrs::function::beta::{beta_reg, ln_beta};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Parameters of the Fisher–Snedecor F composite fading model.
///
/// `m` is the multipath shape, `m_s` the shadowing shape and `g_bar` the
/// mean channel gain (linear). Both shapes must exceed 1 so that the mean
/// and the inverse moment are finite.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FadingParams {
    m: f64,
    m_s: f64,
    g_bar: f64,
}

impl FadingParams {
    pub fn new(m: f64, m_s: f64, g_bar: f64) -> Result<Self> {
        if !(m.is_finite() && m > 1.0) {
            return Err(Error::Domain(format!("multipath shape m = {m} must be finite and > 1")));
        }
        if !(m_s.is_finite() && m_s > 1.0) {
            return Err(Error::Domain(format!("shadowing shape m_s = {m_s} must be finite and > 1")));
        }
        if !(g_bar.is_finite() && g_bar > 0.0) {
            return Err(Error::Domain(format!("mean gain {g_bar} must be finite and > 0")));
        }
        Ok(FadingParams { m, m_s, g_bar })
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    pub fn m_s(&self) -> f64 {
        self.m_s
    }

    pub fn g_bar(&self) -> f64 {
        self.g_bar
    }

    pub fn with_g_bar(self, g_bar: f64) -> Result<Self> {
        FadingParams::new(self.m, self.m_s, g_bar)
    }

    /// Probability density of the instantaneous gain, evaluated in log space.
    pub fn pdf(&self, g: f64) -> Result<f64> {
        if !(g > 0.0) || !g.is_finite() {
            return Err(Error::Domain(format!("pdf argument {g} must be finite and > 0")));
        }
        Ok(self.ln_pdf(g).exp())
    }

    fn ln_pdf(&self, g: f64) -> f64 {
        let (m, ms, gb) = (self.m, self.m_s, self.g_bar);
        m * m.ln() + ms * (ms - 1.0).ln() + ms * gb.ln() + (m - 1.0) * g.ln()
            - ln_beta(m, ms)
            - (m + ms) * (m * g + (ms - 1.0) * gb).ln()
    }

    /// Cumulative distribution via the regularized incomplete beta function.
    pub fn cdf(&self, g: f64) -> f64 {
        if g <= 0.0 {
            return 0.0;
        }
        if g.is_infinite() {
            return 1.0;
        }
        let x = self.m * g / (self.m * g + (self.m_s - 1.0) * self.g_bar);
        beta_reg(self.m, self.m_s, x)
    }

    /// `E[g^n]`, finite for `-m < n < m_s`.
    pub fn moment(&self, n: f64) -> Result<f64> {
        let (m, ms, gb) = (self.m, self.m_s, self.g_bar);
        if !(n.is_finite() && -m < n && n < ms) {
            return Err(Error::Domain(format!("moment order {n} outside ({}, {})", -m, ms)));
        }
        if n == 0.0 {
            return Ok(1.0);
        }
        if n.fract() == 0.0 && n.abs() <= 64.0 {
            return Ok(integer_moment(m, ms, gb, n as i32));
        }
        let ln = n * ((ms - 1.0) * gb / m).ln() + ln_gamma(m + n) + ln_gamma(ms - n) - ln_gamma(m) - ln_gamma(ms);
        Ok(ln.exp())
    }

    /// Draws one gain as `g_bar (m_s - 1) U / (m V)` with `U ~ Gamma(m, 1)`
    /// and `V ~ Gamma(m_s, 1)` independent.
    pub fn sample_gain<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.sampler().sample(rng)
    }

    /// A reusable sampler that avoids rebuilding the gamma distributions.
    pub fn sampler(&self) -> GainSampler {
        GainSampler {
            u: Gamma::new(self.m, 1.0).expect("validated shape"),
            v: Gamma::new(self.m_s, 1.0).expect("validated shape"),
            scale: self.g_bar * (self.m_s - 1.0) / self.m,
        }
    }
}

#[derive(Clone, Debug)]
pub struct GainSampler {
    u: Gamma<f64>,
    v: Gamma<f64>,
    scale: f64,
}

impl Distribution<f64> for GainSampler {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u = self.u.sample(rng);
        let v = self.v.sample(rng);
        self.scale * u / v
    }
}

/// Gamma ratios written as finite products. The factors are arranged so
/// that the first moment reduces to `g_bar` without rounding.
fn integer_moment(m: f64, ms: f64, gb: f64, n: i32) -> f64 {
    let j = n.unsigned_abs();
    let mut num = 1.0;
    let mut den = 1.0;
    if n > 0 {
        // (m_s-1)^n Γ(m+n)/Γ(m) / (m^n Γ(m_s)/Γ(m_s-n))
        for k in 0..j {
            num *= (ms - 1.0) * (m + k as f64);
            den *= m * (ms - 1.0 - k as f64);
        }
        gb.powi(n) * (num / den)
    } else {
        // m^j Γ(m_s+j)/Γ(m_s) / ((m_s-1)^j Γ(m)/Γ(m-j))
        for k in 0..j {
            num *= m * (ms + k as f64);
            den *= (ms - 1.0) * (m - 1.0 - k as f64);
        }
        (num / den) / gb.powi(j as i32)
    }
}
