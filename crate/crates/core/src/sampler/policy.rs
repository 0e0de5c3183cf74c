use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::SamplerError;
use crate::dynamics::{ControlBounds, ControlSequence, TailFill};

/// Random stream for `(seed, key, stream)`: `key` typically counts controller
/// calls and `stream` indexes particles, so draws do not depend on the order
/// in which particles are processed.
pub fn stream_rng(seed: u64, key: u64, stream: u64) -> ChaCha8Rng {
    let mut bytes = [0u8; 32];
    bytes[..8].copy_from_slice(&seed.to_le_bytes());
    bytes[8..16].copy_from_slice(&key.to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(bytes);
    rng.set_stream(stream);
    rng
}

/// Gaussian over control sequences with mean `v` and a diagonal per-step
/// covariance shared by all steps.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPolicy {
    pub mean: ControlSequence,
    variance: Vec<f64>,
}

impl GaussianPolicy {
    pub fn new(mean: ControlSequence, variance: Vec<f64>) -> Result<Self, SamplerError> {
        if mean.horizon() == 0 {
            return Err(SamplerError::Invalid("horizon must be >= 1".into()));
        }
        if variance.len() != mean.dim() {
            return Err(SamplerError::Invalid(format!(
                "covariance has {} entries for a {}-dimensional control",
                variance.len(),
                mean.dim()
            )));
        }
        if variance.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(SamplerError::Invalid(
                "covariance entries must be > 0".into(),
            ));
        }
        Ok(Self { mean, variance })
    }

    pub fn from_std(mean: ControlSequence, std: &[f64]) -> Result<Self, SamplerError> {
        Self::new(mean, std.iter().map(|s| s * s).collect())
    }

    pub fn horizon(&self) -> usize {
        self.mean.horizon()
    }

    pub fn dim(&self) -> usize {
        self.mean.dim()
    }

    pub fn variance(&self) -> &[f64] {
        &self.variance
    }

    /// `n` zero-mean noise sequences, one random stream per particle.
    pub fn sample_noise(&self, n: usize, seed: u64, key: u64) -> Vec<ControlSequence> {
        let std: Vec<f64> = self.variance.iter().map(|v| v.sqrt()).collect();
        (0..n)
            .map(|i| {
                let mut rng = stream_rng(seed, key, i as u64);
                let mut eps = ControlSequence::zeros(self.horizon(), self.dim());
                for (j, e) in eps.as_mut_slice().iter_mut().enumerate() {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    *e = std[j % std.len()] * z;
                }
                eps
            })
            .collect()
    }

    /// `u^i = v + eps^i`, clamped to `bounds`.
    pub fn sample_controls(
        &self,
        n: usize,
        seed: u64,
        key: u64,
        bounds: &ControlBounds,
    ) -> Vec<ControlSequence> {
        let mut samples = self.sample_noise(n, seed, key);
        for s in &mut samples {
            for (u, v) in s.as_mut_slice().iter_mut().zip(self.mean.as_slice()) {
                *u += v;
            }
            s.clamp(bounds);
        }
        samples
    }

    /// Log density of `u` under this Gaussian, including normalization.
    pub fn log_density(&self, u: &ControlSequence) -> f64 {
        gaussian_log_density(u.as_slice(), self.mean.as_slice(), &self.variance)
    }

    /// Replaces the mean with `estimate` shifted one step forward.
    pub fn recede(&mut self, estimate: &ControlSequence, tail: TailFill) {
        self.mean = estimate.shifted(tail);
    }
}

/// Log density of a diagonal Gaussian whose per-step variance repeats.
pub fn gaussian_log_density(u: &[f64], mean: &[f64], variance: &[f64]) -> f64 {
    let ln_2pi = (2.0 * std::f64::consts::PI).ln();
    u.iter()
        .zip(mean)
        .enumerate()
        .map(|(j, (x, m))| {
            let var = variance[j % variance.len()];
            -0.5 * ((x - m) * (x - m) / var + var.ln() + ln_2pi)
        })
        .sum()
}
