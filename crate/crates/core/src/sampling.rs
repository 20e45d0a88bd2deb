//! Seeded sampling settings shared by the quasi-monotonicity falsifiers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// How many random pairs to draw, from which box, with which seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingConfig {
    pub samples: usize,
    pub bound: f64,
    pub seed: u64,
}

impl SamplingConfig {
    pub fn new(samples: usize, bound: f64, seed: u64) -> Self {
        SamplingConfig {
            samples,
            bound,
            seed,
        }
    }

    pub(crate) fn validate(&self) -> Result<(), String> {
        if self.samples == 0 {
            return Err("sample count must be at least 1".into());
        }
        if !(self.bound > 0.0 && self.bound.is_finite()) {
            return Err(format!("box bound must be positive, got {}", self.bound));
        }
        Ok(())
    }

    pub(crate) fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }
}

impl Default for SamplingConfig {
    fn default() -> Self {
        SamplingConfig::new(1000, 10.0, 0)
    }
}

/// Outcome of a sampling-based falsifier. Absence of a counterexample is
/// evidence, not a proof.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FalsifierVerdict {
    NoCounterexampleFound,
    CounterexampleFound,
}
