use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{GeomError, Result};

const PRIMES: [u32; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

/// Radical inverse of `index` in base `base`.
fn radical_inverse(mut index: u64, base: u32) -> f64 {
    let b = base as u64;
    let inv = 1.0 / base as f64;
    let mut scale = inv;
    let mut out = 0.0;
    while index > 0 {
        out += (index % b) as f64 * scale;
        index /= b;
        scale *= inv;
    }
    out
}

/// A coordinate box with a deterministic sampling policy.
///
/// Sample points form a Halton sequence with a seeded Cranley–Patterson
/// shift, mapped into the box shrunk by `margin` of each interval length at
/// both ends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chart {
    bounds: Vec<(f64, f64)>,
    sample_count: usize,
    seed: u64,
    margin: f64,
}

impl Chart {
    pub const DEFAULT_MARGIN: f64 = 0.05;

    pub fn new(bounds: Vec<(f64, f64)>, sample_count: usize, seed: u64, margin: f64) -> Result<Self> {
        if bounds.is_empty() || bounds.len() > PRIMES.len() {
            return Err(GeomError::UnsupportedDim(bounds.len()));
        }
        if let Some((a, b)) = bounds
            .iter()
            .find(|(a, b)| !(b > a) || !a.is_finite() || !b.is_finite())
        {
            return Err(GeomError::InvalidArgument(format!(
                "chart interval [{a}, {b}] must have positive length"
            )));
        }
        if sample_count == 0 {
            return Err(GeomError::InvalidArgument("sample_count must be >= 1".into()));
        }
        if !(0.0..0.5).contains(&margin) {
            return Err(GeomError::InvalidArgument(format!(
                "margin {margin} must lie in [0, 0.5)"
            )));
        }
        Ok(Chart {
            bounds,
            sample_count,
            seed,
            margin,
        })
    }

    /// The box `[lo, hi]^dim` with default margin.
    pub fn cube(dim: usize, lo: f64, hi: f64, sample_count: usize, seed: u64) -> Result<Self> {
        Chart::new(vec![(lo, hi); dim], sample_count, seed, Self::DEFAULT_MARGIN)
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn sample_count(&self) -> usize {
        self.sample_count
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn margin(&self) -> f64 {
        self.margin
    }

    pub fn with_samples(&self, sample_count: usize) -> Result<Self> {
        Chart::new(self.bounds.clone(), sample_count, self.seed, self.margin)
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Chart { seed, ..self.clone() }
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.len() == self.dim() && p.iter().zip(&self.bounds).all(|(x, (a, b))| x >= a && x <= b)
    }

    pub fn points(&self) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let shift: Vec<f64> = (0..self.dim()).map(|_| rng.gen::<f64>()).collect();
        (1..=self.sample_count as u64)
            .map(|i| {
                self.bounds
                    .iter()
                    .enumerate()
                    .map(|(d, (a, b))| {
                        let u = (radical_inverse(i, PRIMES[d]) + shift[d]).fract();
                        let len = b - a;
                        let lo = a + self.margin * len;
                        let width = len * (1.0 - 2.0 * self.margin);
                        lo + u * width
                    })
                    .collect()
            })
            .collect()
    }
}
