//! Re-ranking by k-reciprocal set overlap.
//!
//! Each sample's k-reciprocal set is encoded as a set vector with entries
//! `exp(-d(q, x_i))` for members and zero elsewhere. Two samples are compared
//! with the weighted Jaccard distance
//!
//! ```text
//! J(q, t) = 1 - sum_i min(eta_q[i], eta_t[i]) / (sum_i max(eta_q[i], eta_t[i]) + eps)
//! ```
//!
//! and candidates are re-sorted by `(1 - lambda) * J(q, t) + lambda * d(q, t)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ranking::{k_reciprocal_sets, square_index, DistanceMatrix, Ranked, Ranking};

pub const DEFAULT_EPSILON: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RerankConfig {
    pub k: usize,
    pub lambda: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
}

fn default_epsilon() -> f64 {
    DEFAULT_EPSILON
}

impl RerankConfig {
    pub fn new(k: usize, lambda: f64) -> Self {
        RerankConfig {
            k,
            lambda,
            epsilon: DEFAULT_EPSILON,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidArgument("k must be >= 1".into()));
        }
        check_lambda(self.lambda)?;
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        Ok(())
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if (0.0..=1.0).contains(&lambda) {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("lambda must be in [0, 1], got {lambda}")))
    }
}

/// Sparse nonnegative vector over the candidate index space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetVector {
    pub owner: String,
    len: usize,
    /// `(candidate index, weight)`, strictly increasing in index.
    entries: Vec<(usize, f64)>,
}

impl SetVector {
    pub fn new(owner: impl Into<String>, len: usize, mut entries: Vec<(usize, f64)>) -> Result<Self> {
        entries.sort_by_key(|e| e.0);
        if entries.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidArgument("set vector has repeated indices".into()));
        }
        if let Some(&(i, _)) = entries.iter().find(|e| e.0 >= len) {
            return Err(Error::InvalidArgument(format!("index {i} out of range for length {len}")));
        }
        if entries.iter().any(|e| !(e.1 >= 0.0 && e.1.is_finite())) {
            return Err(Error::InvalidArgument("set vector weights must be finite and >= 0".into()));
        }
        Ok(SetVector {
            owner: owner.into(),
            len,
            entries,
        })
    }

    pub fn from_dense(owner: impl Into<String>, dense: &[f64]) -> Result<Self> {
        let entries = dense
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 0.0)
            .map(|(i, &v)| (i, v))
            .collect();
        Self::new(owner, dense.len(), entries)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn nonzero_count(&self) -> usize {
        self.entries.iter().filter(|e| e.1 != 0.0).count()
    }

    pub fn dense(&self) -> Vec<f64> {
        let mut v = vec![0.0; self.len];
        for &(i, w) in &self.entries {
            v[i] = w;
        }
        v
    }

    fn total(&self) -> f64 {
        self.entries.iter().map(|e| e.1).sum()
    }
}

fn check_aligned(ranking: &Ranking, distances: &DistanceMatrix) -> Result<()> {
    if ranking.queries() != distances.queries() || ranking.candidates() != distances.candidates() {
        return Err(Error::InvalidArgument(
            "ranking and distance matrix cover different samples".into(),
        ));
    }
    Ok(())
}

/// Set vectors of every query, in query-row order.
pub fn build_set_vectors(ranking: &Ranking, distances: &DistanceMatrix, k: usize) -> Result<Vec<SetVector>> {
    check_aligned(ranking, distances)?;
    let sets = k_reciprocal_sets(ranking, k)?;
    let n = ranking.candidates().len();
    sets.iter()
        .enumerate()
        .map(|(q, set)| {
            let entries = set
                .members
                .iter()
                .map(|&c| (c, (-distances.get(q, c)).exp()))
                .collect();
            SetVector::new(set.owner.clone(), n, entries)
        })
        .collect()
}

pub fn jaccard_distance(a: &SetVector, b: &SetVector, epsilon: f64) -> Result<f64> {
    if a.len != b.len {
        return Err(Error::Shape {
            expected: a.len,
            found: b.len,
        });
    }
    let (mut num, mut den) = (0.0, 0.0);
    let (mut i, mut j) = (0, 0);
    let (ea, eb) = (&a.entries, &b.entries);
    while i < ea.len() || j < eb.len() {
        match (ea.get(i), eb.get(j)) {
            (Some(&(ia, va)), Some(&(ib, vb))) if ia == ib => {
                num += va.min(vb);
                den += va.max(vb);
                i += 1;
                j += 1;
            }
            (Some(&(ia, va)), Some(&(ib, _))) if ia < ib => {
                den += va;
                i += 1;
            }
            (Some(&(_, va)), None) => {
                den += va;
                i += 1;
            }
            (_, Some(&(_, vb))) => {
                den += vb;
                j += 1;
            }
            (None, None) => unreachable!(),
        }
    }
    Ok(1.0 - num / (den + epsilon))
}

/// `(1 - lambda) * jaccard + lambda * original`.
pub fn final_distance(original: f64, jaccard: f64, lambda: f64) -> Result<f64> {
    check_lambda(lambda)?;
    Ok(blend(original, jaccard, lambda))
}

#[inline]
fn blend(original: f64, jaccard: f64, lambda: f64) -> f64 {
    (1.0 - lambda) * jaccard + lambda * original
}

/// Pairwise Jaccard distances for one `k`, reusable across lambda values.
#[derive(Debug, Clone)]
pub struct JaccardReranker<'a> {
    ranking: &'a Ranking,
    distances: &'a DistanceMatrix,
    k: usize,
    epsilon: f64,
    /// Row-major `queries x candidates`.
    jaccard: Vec<f64>,
}

impl<'a> JaccardReranker<'a> {
    pub fn new(ranking: &'a Ranking, distances: &'a DistanceMatrix, k: usize, epsilon: f64) -> Result<Self> {
        RerankConfig { k, lambda: 1.0, epsilon }.validate()?;
        let vectors = build_set_vectors(ranking, distances, k)?;
        let cand_to_query = square_index(ranking)?;
        let n = cand_to_query.len();

        // Postings: candidate index -> (owner query row, weight).
        let mut postings: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (t, v) in vectors.iter().enumerate() {
            for &(i, w) in &v.entries {
                postings[i].push((t, w));
            }
        }
        let totals: Vec<f64> = vectors.iter().map(SetVector::total).collect();

        let jaccard: Vec<f64> = (0..vectors.len())
            .into_par_iter()
            .flat_map_iter(|q| {
                let mut overlap = vec![0.0f64; n];
                let mut touched = vec![false; n];
                for &(i, wq) in &vectors[q].entries {
                    for &(t, wt) in &postings[i] {
                        overlap[t] += wq.min(wt);
                        touched[t] = true;
                    }
                }
                let totals = &totals;
                let cand_to_query = &cand_to_query;
                (0..n).map(move |c| {
                    let t = cand_to_query[c];
                    if touched[t] {
                        let union = totals[q] + totals[t] - overlap[t];
                        1.0 - overlap[t] / (union + epsilon)
                    } else {
                        1.0
                    }
                })
            })
            .collect();

        Ok(JaccardReranker {
            ranking,
            distances,
            k,
            epsilon,
            jaccard,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn jaccard(&self, query: usize, candidate: usize) -> f64 {
        self.jaccard[query * self.ranking.candidates().len() + candidate]
    }

    pub fn rerank(&self, lambda: f64) -> Result<Ranking> {
        check_lambda(lambda)?;
        let lists = self
            .ranking
            .lists()
            .par_iter()
            .enumerate()
            .map(|(q, list)| {
                list.iter()
                    .map(|r| Ranked {
                        candidate: r.candidate,
                        distance: blend(self.distances.get(q, r.candidate), self.jaccard(q, r.candidate), lambda),
                    })
                    .collect()
            })
            .collect();
        Ok(self.ranking.with_lists(lists))
    }
}

pub fn jaccard_rerank(ranking: &Ranking, distances: &DistanceMatrix, config: &RerankConfig) -> Result<Ranking> {
    config.validate()?;
    JaccardReranker::new(ranking, distances, config.k, config.epsilon)?.rerank(config.lambda)
}
