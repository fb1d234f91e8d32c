//! Labeled embedding sets: validation, normalization, whitening, file formats
//! and synthetic corpora.

mod io;
mod synth;
mod whiten;

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use io::{load_embeddings, save_embeddings, Format};
pub use synth::{generate_synthetic, SyntheticConfig};
pub use whiten::{pca_whiten, WhiteningModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Split::Train => f.write_str("train"),
            Split::Test => f.write_str("test"),
        }
    }
}

/// One global descriptor with its identity and writer label.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub sample_id: String,
    pub writer_id: String,
    pub vector: Vec<f32>,
}

impl Sample {
    pub fn new(sample_id: impl Into<String>, writer_id: impl Into<String>, vector: Vec<f32>) -> Self {
        Sample {
            sample_id: sample_id.into(),
            writer_id: writer_id.into(),
            vector,
        }
    }

    pub fn vector_f64(&self) -> Vec<f64> {
        self.vector.iter().map(|&x| f64::from(x)).collect()
    }
}

/// An ordered, validated collection of samples sharing one dimension.
///
/// Sample ids are unique and every entry is finite. The set is immutable once
/// built; transforms return new sets.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet {
    samples: Vec<Sample>,
    split: Split,
    dim: usize,
}

impl EmbeddingSet {
    /// Builds a set, inferring the dimension from the first sample.
    pub fn new(samples: Vec<Sample>, split: Split) -> Result<Self> {
        let dim = samples.first().ok_or(Error::EmptySet)?.vector.len();
        Self::with_dim(dim, samples, split)
    }

    /// Builds a set of known dimension; `samples` may be empty.
    pub fn with_dim(dim: usize, samples: Vec<Sample>, split: Split) -> Result<Self> {
        let mut seen = HashSet::with_capacity(samples.len());
        for (row, s) in samples.iter().enumerate() {
            if s.vector.len() != dim {
                return Err(Error::DimensionMismatch {
                    row: row + 1,
                    expected: dim,
                    found: s.vector.len(),
                });
            }
            if !seen.insert(s.sample_id.as_str()) {
                return Err(Error::DuplicateId {
                    row: row + 1,
                    id: s.sample_id.clone(),
                });
            }
            if s.vector.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite {
                    row: row + 1,
                    id: s.sample_id.clone(),
                });
            }
        }
        Ok(EmbeddingSet {
            samples,
            split,
            dim,
        })
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn split(&self) -> Split {
        self.split
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn with_split(mut self, split: Split) -> Self {
        self.split = split;
        self
    }

    pub fn ids(&self) -> Vec<String> {
        self.samples.iter().map(|s| s.sample_id.clone()).collect()
    }

    pub fn writers(&self) -> Vec<&str> {
        self.samples.iter().map(|s| s.writer_id.as_str()).collect()
    }

    /// Vectors widened to `f64`, in sample order.
    pub fn matrix_f64(&self) -> Vec<Vec<f64>> {
        self.samples.iter().map(Sample::vector_f64).collect()
    }

    /// Returns a set with every vector replaced by `f(vector)`.
    ///
    /// `f` must preserve finiteness; the output dimension is taken from the
    /// first mapped vector.
    pub(crate) fn map_vectors<F>(&self, mut f: F) -> Result<Self>
    where
        F: FnMut(&Sample) -> Result<Vec<f32>>,
    {
        let mut samples = Vec::with_capacity(self.samples.len());
        for s in &self.samples {
            samples.push(Sample {
                sample_id: s.sample_id.clone(),
                writer_id: s.writer_id.clone(),
                vector: f(s)?,
            });
        }
        let dim = samples.first().map_or(self.dim, |s| s.vector.len());
        Self::with_dim(dim, samples, self.split)
    }

    pub fn gallery_profile(&self) -> Result<GallerySizeProfile> {
        GallerySizeProfile::from_writers(self.writers())
    }

    /// Splits by writer: the first `train_writers` distinct writers (in order
    /// of first appearance) go to the train set, the rest to the test set.
    pub fn split_writers(&self, train_writers: usize) -> Result<(EmbeddingSet, EmbeddingSet)> {
        let mut order: Vec<&str> = Vec::new();
        for s in &self.samples {
            if !order.contains(&s.writer_id.as_str()) {
                order.push(&s.writer_id);
            }
        }
        if train_writers == 0 || train_writers >= order.len() {
            return Err(Error::InvalidArgument(format!(
                "train_writers must be in 1..{}, got {train_writers}",
                order.len()
            )));
        }
        let train_set: HashSet<&str> = order[..train_writers].iter().copied().collect();
        let (train, test): (Vec<Sample>, Vec<Sample>) = self
            .samples
            .iter()
            .cloned()
            .partition(|s| train_set.contains(s.writer_id.as_str()));
        Ok((
            EmbeddingSet::with_dim(self.dim, train, Split::Train)?,
            EmbeddingSet::with_dim(self.dim, test, Split::Test)?,
        ))
    }
}

/// Fails when the two sets share a writer label.
pub fn check_writer_disjoint(train: &EmbeddingSet, test: &EmbeddingSet) -> Result<()> {
    let train_writers: HashSet<&str> = train.writers().into_iter().collect();
    match test.writers().into_iter().find(|w| train_writers.contains(w)) {
        Some(w) => Err(Error::WriterOverlap(w.to_string())),
        None => Ok(()),
    }
}

/// Scales every vector to unit Euclidean norm.
pub fn l2_normalize(set: &EmbeddingSet) -> Result<EmbeddingSet> {
    set.map_vectors(|s| {
        let norm = s
            .vector
            .iter()
            .map(|&x| f64::from(x) * f64::from(x))
            .sum::<f64>()
            .sqrt();
        if norm == 0.0 {
            return Err(Error::ZeroVector(s.sample_id.clone()));
        }
        Ok(s.vector.iter().map(|&x| (f64::from(x) / norm) as f32).collect())
    })
}

/// Signed square root `sign(x) * sqrt(|x|)` applied element-wise.
pub fn power_normalize(set: &EmbeddingSet) -> EmbeddingSet {
    set.map_vectors(|s| Ok(s.vector.iter().map(|&x| signed_sqrt(x)).collect()))
        .expect("signed sqrt preserves finiteness and shape")
}

fn signed_sqrt(x: f32) -> f32 {
    x.signum() * x.abs().sqrt()
}

/// Per-writer sample counts (gallery sizes) of a set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GallerySizeProfile {
    pub counts: BTreeMap<String, usize>,
    pub min: usize,
    pub median: f64,
    pub max: usize,
}

impl GallerySizeProfile {
    pub fn from_writers<'a, I>(writers: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        for w in writers {
            *counts.entry(w.to_string()).or_default() += 1;
        }
        let mut sizes: Vec<usize> = counts.values().copied().collect();
        if sizes.is_empty() {
            return Err(Error::EmptySet);
        }
        sizes.sort_unstable();
        let n = sizes.len();
        let median = if n % 2 == 1 {
            sizes[n / 2] as f64
        } else {
            (sizes[n / 2 - 1] + sizes[n / 2]) as f64 / 2.0
        };
        Ok(GallerySizeProfile {
            min: sizes[0],
            max: sizes[n - 1],
            median,
            counts,
        })
    }

    pub fn writers(&self) -> usize {
        self.counts.len()
    }
}
