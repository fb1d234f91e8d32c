use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{EmbeddingSet, Sample, Split};
use crate::error::{Error, Result};

/// Isotropic Gaussian clusters, one per writer.
///
/// Writer centers are drawn from `N(0, I)`; each sample is its writer's center
/// plus `cluster_spread * N(0, I)` noise. Gallery sizes are uniform over
/// `gallery_size_range` (inclusive).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub writers: usize,
    pub gallery_size_range: (usize, usize),
    pub dim: usize,
    pub cluster_spread: f64,
    pub seed: u64,
}

impl SyntheticConfig {
    fn validate(&self) -> Result<()> {
        let (lo, hi) = self.gallery_size_range;
        let err = |m: String| Err(Error::InvalidArgument(m));
        if self.writers < 2 {
            return err(format!("need at least 2 writers, got {}", self.writers));
        }
        if lo < 2 || lo > hi {
            return err(format!("gallery size range ({lo}, {hi}) must satisfy 2 <= min <= max"));
        }
        if self.dim == 0 {
            return err("dim must be positive".into());
        }
        if !(self.cluster_spread >= 0.0 && self.cluster_spread.is_finite()) {
            return err(format!("cluster_spread must be finite and >= 0, got {}", self.cluster_spread));
        }
        Ok(())
    }
}

/// Writer ids are `w0000`, `w0001`, ...; sample ids `w0000_s000`, ...
pub fn generate_synthetic(config: &SyntheticConfig) -> Result<EmbeddingSet> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let (lo, hi) = config.gallery_size_range;
    let mut samples = Vec::new();
    for w in 0..config.writers {
        let center: Vec<f64> = (0..config.dim).map(|_| StandardNormal.sample(&mut rng)).collect();
        let size = rng.random_range(lo..=hi);
        let writer = format!("w{w:04}");
        for s in 0..size {
            let vector = center
                .iter()
                .map(|&c| {
                    let noise: f64 = StandardNormal.sample(&mut rng);
                    (c + config.cluster_spread * noise) as f32
                })
                .collect();
            samples.push(Sample::new(format!("{writer}_s{s:03}"), writer.clone(), vector));
        }
    }
    EmbeddingSet::new(samples, Split::Test)
}
