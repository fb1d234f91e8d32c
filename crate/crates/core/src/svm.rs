//! Linear SVM training for exemplar models: one to three positives against a
//! large negative set.
//!
//! The solver is dual coordinate descent on the L2-regularized hinge loss
//! (L1-loss SVM) with per-class costs. The bias is learned as the weight of an
//! appended constant-1 feature.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{check_writer_disjoint, EmbeddingSet, Sample};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvmConfig {
    pub cost_positive: f64,
    pub cost_negative: f64,
    /// Multiply `cost_positive` by `|negatives| / |positives|`.
    pub balance_classes: bool,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub seed: u64,
}

impl Default for SvmConfig {
    fn default() -> Self {
        SvmConfig {
            cost_positive: 0.01,
            cost_negative: 0.01,
            balance_classes: true,
            tolerance: 1e-4,
            max_iterations: 1000,
            seed: 0,
        }
    }
}

impl SvmConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |x: f64| x > 0.0 && x.is_finite();
        if !positive(self.cost_positive) || !positive(self.cost_negative) {
            return Err(Error::InvalidArgument("SVM costs must be positive".into()));
        }
        if !positive(self.tolerance) {
            return Err(Error::InvalidArgument("SVM tolerance must be positive".into()));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidArgument("max_iterations must be >= 1".into()));
        }
        Ok(())
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        SvmConfig { seed, ..self.clone() }
    }
}

/// The exemplar (query) followed by up to two friends.
#[derive(Debug, Clone, PartialEq)]
pub struct PositiveSet {
    vectors: Vec<Vec<f64>>,
}

impl PositiveSet {
    pub fn new(query: Vec<f64>, friends: Vec<Vec<f64>>) -> Result<Self> {
        if friends.len() > 2 {
            return Err(Error::InvalidArgument(format!(
                "positive set holds at most 2 friends, got {}",
                friends.len()
            )));
        }
        let mut vectors = Vec::with_capacity(1 + friends.len());
        vectors.push(query);
        vectors.extend(friends);
        Ok(PositiveSet { vectors })
    }

    pub fn single(query: Vec<f64>) -> Self {
        PositiveSet { vectors: vec![query] }
    }

    pub fn query(&self) -> &[f64] {
        &self.vectors[0]
    }

    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub converged: bool,
    pub epochs: usize,
    /// Dual objective `0.5 * |w|^2 - sum(alpha)` after each epoch.
    pub objective_trace: Vec<f64>,
    /// Every training point lies strictly on its own side of the hyperplane.
    pub separable: bool,
}

impl SvmModel {
    pub fn decision(&self, x: &[f64]) -> f64 {
        dot(&self.weights, x) + self.bias
    }

    /// Unit-norm weight vector; the bias is dropped.
    pub fn to_feature(&self) -> Result<Vec<f64>> {
        to_feature(&self.weights)
    }

    pub fn dump_json(&self, config: &SvmConfig) -> serde_json::Value {
        serde_json::json!({
            "weights": self.weights,
            "bias": self.bias,
            "config": config,
            "converged": self.converged,
        })
    }
}

pub fn to_feature(weights: &[f64]) -> Result<Vec<f64>> {
    let norm = dot(weights, weights).sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::ZeroWeights);
    }
    Ok(weights.iter().map(|w| w / norm).collect())
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

pub fn train(positives: &PositiveSet, negatives: &[Vec<f64>], config: &SvmConfig) -> Result<SvmModel> {
    config.validate()?;
    if negatives.is_empty() {
        return Err(Error::InvalidArgument("negative set is empty".into()));
    }
    let d = positives.query().len();
    for v in positives.vectors().iter().chain(negatives) {
        if v.len() != d {
            return Err(Error::Shape {
                expected: d,
                found: v.len(),
            });
        }
    }

    let n_pos = positives.len();
    let rows: Vec<&[f64]> = positives
        .vectors()
        .iter()
        .chain(negatives)
        .map(Vec::as_slice)
        .collect();
    let l = rows.len();
    let label = |i: usize| if i < n_pos { 1.0 } else { -1.0 };
    let c_pos = if config.balance_classes {
        config.cost_positive * negatives.len() as f64 / n_pos as f64
    } else {
        config.cost_positive
    };
    let upper = |i: usize| if i < n_pos { c_pos } else { config.cost_negative };

    // Diagonal of Q including the constant bias feature.
    let qd: Vec<f64> = rows.iter().map(|x| dot(x, x) + 1.0).collect();
    let mut alpha = vec![0.0; l];
    let mut w = vec![0.0; d];
    let mut w_bias = 0.0;
    let mut objective = 0.0;
    let mut trace = Vec::new();

    let mut index: Vec<usize> = (0..l).collect();
    let mut active = l;
    let mut pg_max_old = f64::INFINITY;
    let mut pg_min_old = f64::NEG_INFINITY;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut epochs = 0;
    let mut converged = false;

    while epochs < config.max_iterations {
        let mut pg_max = f64::NEG_INFINITY;
        let mut pg_min = f64::INFINITY;
        index[..active].shuffle(&mut rng);

        let mut s = 0;
        while s < active {
            let i = index[s];
            let y = label(i);
            let c = upper(i);
            let g = y * (dot(&w, rows[i]) + w_bias) - 1.0;

            let mut pg = 0.0;
            if alpha[i] == 0.0 {
                if g > pg_max_old {
                    active -= 1;
                    index.swap(s, active);
                    continue;
                } else if g < 0.0 {
                    pg = g;
                }
            } else if alpha[i] == c {
                if g < pg_min_old {
                    active -= 1;
                    index.swap(s, active);
                    continue;
                } else if g > 0.0 {
                    pg = g;
                }
            } else {
                pg = g;
            }
            pg_max = pg_max.max(pg);
            pg_min = pg_min.min(pg);

            if pg.abs() > 1e-12 {
                let old = alpha[i];
                alpha[i] = (old - g / qd[i]).clamp(0.0, c);
                let delta = alpha[i] - old;
                objective += delta * (g + 0.5 * qd[i] * delta);
                axpy(delta * y, rows[i], &mut w);
                w_bias += delta * y;
            }
            s += 1;
        }
        epochs += 1;
        trace.push(objective);

        if pg_max - pg_min <= config.tolerance {
            if active == l {
                converged = true;
                break;
            }
            active = l;
            pg_max_old = f64::INFINITY;
            pg_min_old = f64::NEG_INFINITY;
            continue;
        }
        pg_max_old = if pg_max <= 0.0 { f64::INFINITY } else { pg_max };
        pg_min_old = if pg_min >= 0.0 { f64::NEG_INFINITY } else { pg_min };
    }
    if !converged {
        log::debug!("SVM stopped after {epochs} epochs without reaching tolerance");
    }

    let separable = rows
        .iter()
        .enumerate()
        .all(|(i, x)| label(i) * (dot(&w, x) + w_bias) > 0.0);

    Ok(SvmModel {
        weights: w,
        bias: w_bias,
        converged,
        epochs,
        objective_trace: trace,
        separable,
    })
}

/// Exemplar-SVM feature transform: one model per `test` sample, trained with
/// that sample as the sole positive against every `negatives` sample. The
/// output vector is the unit-norm weight vector.
pub fn esvm_feature_transform(
    test: &EmbeddingSet,
    negatives: &EmbeddingSet,
    config: &SvmConfig,
) -> Result<EmbeddingSet> {
    config.validate()?;
    if negatives.is_empty() {
        return Err(Error::InvalidArgument("negative set is empty".into()));
    }
    if negatives.dim() != test.dim() {
        return Err(Error::Shape {
            expected: test.dim(),
            found: negatives.dim(),
        });
    }
    check_writer_disjoint(negatives, test)?;
    let neg = negatives.matrix_f64();
    let features: Vec<Vec<f32>> = test
        .samples()
        .par_iter()
        .map(|s| {
            let model = train(&PositiveSet::single(s.vector_f64()), &neg, config)?;
            Ok(model.to_feature()?.into_iter().map(|x| x as f32).collect())
        })
        .collect::<Result<_>>()?;
    let samples = test
        .samples()
        .iter()
        .zip(features)
        .map(|(s, v)| Sample::new(s.sample_id.clone(), s.writer_id.clone(), v))
        .collect();
    EmbeddingSet::with_dim(test.dim(), samples, test.split())
}
