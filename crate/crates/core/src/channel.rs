//! The impaired channel `r = g·|s|·e^{j(φ + arg s)} + n`.
//!
//! `g ~ N(1, σ_g²)` truncated to `g > 0`, `φ ~ N(0, σ_φ²)` and `n` is circular
//! complex Gaussian with total variance `σ_n²` (`σ_n²/2` per component).

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Largest admissible gain variance; keeps `P(g ≤ 0)` below `Φ(−2)`.
pub const MAX_SIGMA_G2: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImpairmentParams {
    /// Total complex AWGN variance σ_n².
    pub sigma_n2: f64,
    /// Residual amplitude-gain variance σ_g².
    pub sigma_g2: f64,
    /// Phase-noise variance σ_φ² in rad².
    pub sigma_phi2: f64,
}

impl ImpairmentParams {
    pub fn new(sigma_n2: f64, sigma_g2: f64, sigma_phi2: f64) -> Result<Self> {
        for (name, v) in [
            ("sigma_n2", sigma_n2),
            ("sigma_g2", sigma_g2),
            ("sigma_phi2", sigma_phi2),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::InvalidParams(format!(
                    "{name} must be finite and ≥ 0, got {v}"
                )));
            }
        }
        if sigma_g2 > MAX_SIGMA_G2 {
            return Err(Error::InvalidParams(format!(
                "sigma_g2 must be ≤ {MAX_SIGMA_G2}, got {sigma_g2}"
            )));
        }
        Ok(Self {
            sigma_n2,
            sigma_g2,
            sigma_phi2,
        })
    }

    /// Impairments at a given `E_s/σ_n²` in dB (unit symbol energy assumed).
    pub fn at_snr_db(snr_db: f64, sigma_g2: f64, sigma_phi2: f64) -> Result<Self> {
        Self::new(snr_to_sigma_n2(snr_db), sigma_g2, sigma_phi2)
    }

    pub fn noiseless() -> Self {
        Self {
            sigma_n2: 0.0,
            sigma_g2: 0.0,
            sigma_phi2: 0.0,
        }
    }

    pub fn is_noiseless(&self) -> bool {
        self.sigma_n2 == 0.0 && self.sigma_g2 == 0.0 && self.sigma_phi2 == 0.0
    }

    /// Amplitude-residual variance `V^(a) = σ_n²/2 + σ_g²|s|²`.
    pub fn amplitude_variance(&self, amplitude: f64) -> f64 {
        0.5 * self.sigma_n2 + self.sigma_g2 * amplitude * amplitude
    }

    /// Phase-residual variance `V^(θ) = σ_φ² + σ_n²/(2|s|²)`.
    pub fn phase_variance(&self, amplitude: f64) -> f64 {
        self.sigma_phi2 + self.sigma_n2 / (2.0 * amplitude * amplitude)
    }
}

/// `σ_n² = 10^(−SNR/10)` for unit-energy constellations.
pub fn snr_to_sigma_n2(snr_db: f64) -> f64 {
    10f64.powf(-snr_db / 10.0)
}

/// Identifies one independent random stream: a run seed plus a per-trial index.
///
/// Identical `(seed, index)` pairs give identical draws regardless of how trials
/// are scheduled across threads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RandomStream {
    pub seed: u64,
    pub index: u64,
}

impl RandomStream {
    pub fn new(seed: u64, index: u64) -> Self {
        Self { seed, index }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        StreamFactory::new(self.seed).stream(self.index)
    }
}

/// Produces per-index generators for a fixed seed without re-deriving the key.
#[derive(Clone)]
pub struct StreamFactory {
    base: ChaCha8Rng,
}

impl StreamFactory {
    pub fn new(seed: u64) -> Self {
        Self {
            base: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn stream(&self, index: u64) -> ChaCha8Rng {
        let mut rng = self.base.clone();
        rng.set_stream(index);
        rng.set_word_pos(0);
        rng
    }
}

/// One realisation of the channel's random quantities, independent of the
/// transmitted symbol (the basis of common random numbers).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelDraw {
    pub gain: f64,
    pub phase: f64,
    pub noise: Complex64,
    /// Gain draws discarded because they were ≤ 0.
    pub rejections: u32,
}

impl ChannelDraw {
    pub fn sample<R: Rng + ?Sized>(p: &ImpairmentParams, rng: &mut R) -> Self {
        let sigma_g = p.sigma_g2.sqrt();
        let mut rejections = 0;
        let gain = loop {
            let z: f64 = rng.sample(StandardNormal);
            let g = 1.0 + sigma_g * z;
            if g > 0.0 {
                break g;
            }
            rejections += 1;
        };
        let phase = p.sigma_phi2.sqrt() * rng.sample::<f64, _>(StandardNormal);
        let sigma_c = (0.5 * p.sigma_n2).sqrt();
        let noise = Complex64::new(
            sigma_c * rng.sample::<f64, _>(StandardNormal),
            sigma_c * rng.sample::<f64, _>(StandardNormal),
        );
        Self {
            gain,
            phase,
            noise,
            rejections,
        }
    }

    /// `g·s·e^{jφ} + n`, identical to `g|s|e^{j(φ + arg s)} + n`.
    pub fn apply(&self, s: Complex64) -> Complex64 {
        s * Complex64::from_polar(self.gain, self.phase) + self.noise
    }
}

/// Draws one received sample for transmitted symbol `s`.
pub fn sample_received<R: Rng + ?Sized>(s: Complex64, p: &ImpairmentParams, rng: &mut R) -> Complex64 {
    ChannelDraw::sample(p, rng).apply(s)
}
