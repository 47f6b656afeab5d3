use rand::Rng;

use crate::error::{Error, Result};

/// Unigram noise distribution raised to a power, sampled through a cumulative table.
#[derive(Clone, Debug)]
pub struct NegativeSampler {
    cumulative: Vec<f64>,
}

pub const NOISE_EXPONENT: f64 = 0.75;

impl NegativeSampler {
    pub fn new(counts: &[u64]) -> Result<Self> {
        Self::with_exponent(counts, NOISE_EXPONENT)
    }

    pub fn with_exponent(counts: &[u64], exponent: f64) -> Result<Self> {
        let mut acc = 0.0;
        let cumulative: Vec<f64> = counts
            .iter()
            .map(|&c| {
                acc += (c as f64).powf(exponent);
                acc
            })
            .collect();
        if acc <= 0.0 || !acc.is_finite() {
            return Err(Error::Empty(
                "negative sampler needs at least one positive count".into(),
            ));
        }
        Ok(NegativeSampler { cumulative })
    }

    pub fn len(&self) -> usize {
        self.cumulative.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cumulative.is_empty()
    }

    /// Target probability of drawing `id`.
    pub fn probability(&self, id: u32) -> f64 {
        let i = id as usize;
        let lo = if i == 0 { 0.0 } else { self.cumulative[i - 1] };
        (self.cumulative[i] - lo) / self.total()
    }

    fn total(&self) -> f64 {
        *self.cumulative.last().expect("non-empty table")
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> u32 {
        let u = rng.random::<f64>() * self.total();
        let idx = self.cumulative.partition_point(|&c| c <= u);
        idx.min(self.cumulative.len() - 1) as u32
    }

    /// Draws until the result differs from `exclude`. `None` when the
    /// excluded word is the only one with positive weight.
    pub fn sample_excluding<R: Rng>(&self, exclude: u32, rng: &mut R) -> Option<u32> {
        if self.probability(exclude) >= 1.0 {
            return None;
        }
        loop {
            let id = self.sample(rng);
            if id != exclude {
                return Some(id);
            }
        }
    }
}

/// Effective context offset, uniform over `1..=window`.
#[inline]
pub fn dynamic_window<R: Rng>(window: usize, rng: &mut R) -> usize {
    debug_assert!(window >= 1);
    rng.random_range(1..=window)
}

pub const MIN_ALPHA_RATIO: f64 = 1e-4;

/// Linear learning-rate decay, floored at `MIN_ALPHA_RATIO * alpha`.
#[inline]
pub fn lr_schedule(alpha: f64, progress: f64) -> f64 {
    let progress = progress.clamp(0.0, 1.0);
    (alpha * (1.0 - progress)).max(alpha * MIN_ALPHA_RATIO)
}
