//! BPSK over AWGN and fast (i.i.d.) Rayleigh fading, with coherent channel LLRs.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{config_err, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelKind {
    Awgn,
    RayleighFast,
}

impl ChannelKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ChannelKind::Awgn => "awgn",
            ChannelKind::RayleighFast => "rayleigh_fast",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChannelConfig {
    pub kind: ChannelKind,
    pub ebno_db: f64,
    pub code_rate: f64,
}

impl ChannelConfig {
    pub fn new(kind: ChannelKind, ebno_db: f64, code_rate: f64) -> Result<Self> {
        let cfg = Self {
            kind,
            ebno_db,
            code_rate,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.ebno_db.is_finite() {
            return config_err(format!("Eb/N0 must be finite, got {}", self.ebno_db));
        }
        if !(self.code_rate > 0.0 && self.code_rate <= 1.0) {
            return config_err(format!(
                "code rate must be in (0, 1], got {}",
                self.code_rate
            ));
        }
        Ok(())
    }

    /// Noise variance per real dimension for unit-energy symbols:
    /// `1 / (2 R Eb/N0)`.
    pub fn noise_variance(&self) -> f64 {
        1.0 / (2.0 * self.code_rate * 10f64.powf(self.ebno_db / 10.0))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReceivedFrame {
    pub observations: Vec<f64>,
    /// Fading amplitudes known to the receiver; all ones on AWGN.
    pub gains: Vec<f64>,
    pub noise_variance: f64,
}

/// Bit 0 -> +1, bit 1 -> -1.
pub fn bpsk_modulate(bits: &[u8]) -> Vec<f64> {
    bits.iter()
        .map(|&b| if b & 1 == 0 { 1.0 } else { -1.0 })
        .collect()
}

/// Sends unit-energy symbols through the configured channel.
///
/// For each symbol the fading gain (Rayleigh only) is drawn before the
/// noise sample, so a given random stream always maps to the same frame.
pub fn transmit<R: Rng + ?Sized>(
    symbols: &[f64],
    cfg: &ChannelConfig,
    rng: &mut R,
) -> ReceivedFrame {
    let noise_variance = cfg.noise_variance();
    let sigma = noise_variance.sqrt();
    let mut observations = Vec::with_capacity(symbols.len());
    let mut gains = Vec::with_capacity(symbols.len());
    for &x in symbols {
        let a = match cfg.kind {
            ChannelKind::Awgn => 1.0,
            ChannelKind::RayleighFast => rayleigh_gain(rng),
        };
        let n: f64 = rng.sample(StandardNormal);
        observations.push(a * x + sigma * n);
        gains.push(a);
    }
    ReceivedFrame {
        observations,
        gains,
        noise_variance,
    }
}

/// Rayleigh amplitude normalised to `E[a^2] = 1`.
fn rayleigh_gain<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let i: f64 = rng.sample(StandardNormal);
    let q: f64 = rng.sample(StandardNormal);
    ((i * i + q * q) / 2.0).sqrt()
}

/// `2 a y / sigma^2` for every received sample.
pub fn channel_llr(rx: &ReceivedFrame) -> Vec<f64> {
    let scale = 2.0 / rx.noise_variance;
    rx.observations
        .iter()
        .zip(&rx.gains)
        .map(|(&y, &a)| scale * a * y)
        .collect()
}
