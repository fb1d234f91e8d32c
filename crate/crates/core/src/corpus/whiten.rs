use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::EmbeddingSet;
use crate::error::{Error, Result};

/// Added to every eigenvalue before the inverse square root.
pub const VARIANCE_FLOOR: f64 = 1e-12;

/// PCA-whitening transform fitted on one set and applicable to others.
///
/// Maps `x` to `diag(1/sqrt(ev + floor)) * V^T (x - mean)` where `V` holds
/// the leading `out_dim` eigenvectors of the (population) covariance of the
/// fitting set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WhiteningModel {
    pub mean: Vec<f64>,
    /// `out_dim` rows of length `D`, already divided by the component scale.
    pub projection: Vec<Vec<f64>>,
    pub eigenvalues: Vec<f64>,
}

impl WhiteningModel {
    pub fn fit(train: &EmbeddingSet, out_dim: usize) -> Result<Self> {
        let d = train.dim();
        if out_dim == 0 || out_dim > d {
            return Err(Error::InvalidArgument(format!(
                "out_dim must be in 1..={d}, got {out_dim}"
            )));
        }
        let n = train.len();
        if n < out_dim {
            return Err(Error::InvalidArgument(format!(
                "whitening to {out_dim} components needs at least {out_dim} train samples, got {n}"
            )));
        }

        let rows = train.matrix_f64();
        let mut mean = vec![0.0; d];
        for r in &rows {
            for (m, x) in mean.iter_mut().zip(r) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);

        let mut cov = DMatrix::<f64>::zeros(d, d);
        for r in &rows {
            let c = DVector::from_iterator(d, r.iter().zip(&mean).map(|(x, m)| x - m));
            cov.syger(1.0, &c, &c, 1.0);
        }
        cov /= n as f64;
        cov.fill_upper_triangle_with_lower_triangle();

        let eig = SymmetricEigen::new(cov);
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));

        let mut projection = Vec::with_capacity(out_dim);
        let mut eigenvalues = Vec::with_capacity(out_dim);
        for &j in order.iter().take(out_dim) {
            let ev = eig.eigenvalues[j].max(0.0);
            let mut v: Vec<f64> = eig.eigenvectors.column(j).iter().copied().collect();
            // Fix the sign so the largest-magnitude entry is positive.
            let pivot = v
                .iter()
                .copied()
                .fold(0.0f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
            let scale = pivot.signum() / (ev + VARIANCE_FLOOR).sqrt();
            v.iter_mut().for_each(|x| *x *= scale);
            projection.push(v);
            eigenvalues.push(ev);
        }
        Ok(WhiteningModel {
            mean,
            projection,
            eigenvalues,
        })
    }

    pub fn in_dim(&self) -> usize {
        self.mean.len()
    }

    pub fn out_dim(&self) -> usize {
        self.projection.len()
    }

    pub fn transform_vector(&self, x: &[f64]) -> Vec<f64> {
        let centered: Vec<f64> = x.iter().zip(&self.mean).map(|(a, m)| a - m).collect();
        self.projection
            .iter()
            .map(|p| p.iter().zip(&centered).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn apply(&self, set: &EmbeddingSet) -> Result<EmbeddingSet> {
        if set.dim() != self.in_dim() {
            return Err(Error::Shape {
                expected: self.in_dim(),
                found: set.dim(),
            });
        }
        set.map_vectors(|s| {
            Ok(self
                .transform_vector(&s.vector_f64())
                .into_iter()
                .map(|x| x as f32)
                .collect())
        })
    }
}

/// Fits whitening on `train` only and applies it to `apply_to`.
pub fn pca_whiten(
    train: &EmbeddingSet,
    apply_to: &EmbeddingSet,
    out_dim: usize,
) -> Result<(EmbeddingSet, WhiteningModel)> {
    let model = WhiteningModel::fit(train, out_dim)?;
    Ok((model.apply(apply_to)?, model))
}
