use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::fmt;
use core::str::FromStr;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::math;
use crate::{Error, Result};

/// Noise family. `lambda` is the half-width for Uniform, the standard
/// deviation for Normal, the scale for Laplace and the mean (scale) for
/// Exponential.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Distribution {
    Uniform,
    Normal,
    Laplace,
    #[serde(alias = "exp")]
    Exponential,
}

impl Distribution {
    pub const ALL: [Distribution; 4] = [
        Distribution::Uniform,
        Distribution::Normal,
        Distribution::Laplace,
        Distribution::Exponential,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Distribution::Uniform => "uniform",
            Distribution::Normal => "normal",
            Distribution::Laplace => "laplace",
            Distribution::Exponential => "exponential",
        }
    }

    /// Analytic (mean, variance) for parameter `lambda`.
    pub fn moments(self, lambda: f64) -> (f64, f64) {
        match self {
            Distribution::Uniform => (0.0, lambda * lambda / 3.0),
            Distribution::Normal => (0.0, lambda * lambda),
            Distribution::Laplace => (0.0, 2.0 * lambda * lambda),
            Distribution::Exponential => (lambda, lambda * lambda),
        }
    }
}

impl fmt::Display for Distribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Distribution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "uniform" => Ok(Distribution::Uniform),
            "normal" | "gaussian" => Ok(Distribution::Normal),
            "laplace" => Ok(Distribution::Laplace),
            "exp" | "exponential" => Ok(Distribution::Exponential),
            other => Err(Error::Config(format!("unknown distribution {other:?}"))),
        }
    }
}

/// Uniform in the open interval (0, 1) with 53 random bits.
#[inline]
pub(crate) fn unit_open(rng: &mut impl RngCore) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// Seeded i.i.d. sampler. Every family is drawn by inverse transform (Box–
/// Muller for Normal) from the same uniform stream, so for a fixed seed the
/// samples scale exactly linearly with `lambda`.
pub struct NoiseSampler {
    rng: ChaCha8Rng,
    distribution: Distribution,
    lambda: f64,
    spare: Option<f64>,
}

impl NoiseSampler {
    pub fn new(distribution: Distribution, lambda: f64, seed: u64) -> Self {
        NoiseSampler {
            rng: ChaCha8Rng::seed_from_u64(seed),
            distribution,
            lambda,
            spare: None,
        }
    }

    /// Standard normal deviate.
    pub(crate) fn standard_normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = unit_open(&mut self.rng);
        let u2 = unit_open(&mut self.rng);
        let r = math::sqrt(-2.0 * math::ln(u1));
        let a = 2.0 * PI * u2;
        self.spare = Some(r * math::sin(a));
        r * math::cos(a)
    }

    #[inline]
    pub fn sample(&mut self) -> f64 {
        let l = self.lambda;
        match self.distribution {
            Distribution::Uniform => l * (2.0 * unit_open(&mut self.rng) - 1.0),
            Distribution::Normal => l * self.standard_normal(),
            Distribution::Laplace => {
                let u = unit_open(&mut self.rng) - 0.5;
                let mag = -math::ln(1.0 - 2.0 * u.abs());
                if u < 0.0 {
                    -l * mag
                } else {
                    l * mag
                }
            }
            Distribution::Exponential => -l * math::ln(unit_open(&mut self.rng)),
        }
    }
}

/// `n` i.i.d. samples, deterministic in `(distribution, lambda, n, seed)`.
pub fn sample_noise(distribution: Distribution, lambda: f64, n: usize, seed: u64) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::Config("sample count must be >= 1".into()));
    }
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::Config(format!("lambda must be > 0, got {lambda}")));
    }
    let mut sampler = NoiseSampler::new(distribution, lambda, seed);
    Ok((0..n).map(|_| sampler.sample()).collect())
}
