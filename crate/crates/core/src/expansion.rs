//! Query expansion re-ranking over exemplar-SVM features.
//!
//! Friends are drawn from the query's k-reciprocal set. Pair and triple modes
//! retrain the query's exemplar SVM with one or two friends added to the
//! positive set; AQE averages the query's feature with its friends' features.
//! Either way the new query feature is compared to the unchanged candidate
//! features by cosine distance. Queries without friends keep their initial
//! list.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{check_writer_disjoint, EmbeddingSet};
use crate::error::{Error, Result};
use crate::ranking::{cosine_distance, k_reciprocal_sets, DistanceMatrix, Ranked, Ranking, ReciprocalSets};
use crate::svm::{self, PositiveSet, SvmConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QeMode {
    Aqe,
    Pair,
    Triple,
}

impl QeMode {
    /// Friend cap; AQE uses the whole reciprocal set.
    pub fn max_friends(self) -> Option<usize> {
        match self {
            QeMode::Aqe => None,
            QeMode::Pair => Some(1),
            QeMode::Triple => Some(2),
        }
    }
}

impl fmt::Display for QeMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            QeMode::Aqe => "aqe",
            QeMode::Pair => "pair",
            QeMode::Triple => "triple",
        })
    }
}

impl FromStr for QeMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "aqe" => Ok(QeMode::Aqe),
            "pair" => Ok(QeMode::Pair),
            "triple" => Ok(QeMode::Triple),
            _ => Err(Error::InvalidArgument(format!("unknown query expansion mode `{s}`"))),
        }
    }
}

/// Reciprocal neighbours chosen to join the query, closest first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FriendSet {
    pub query: String,
    /// Candidate indices.
    pub members: Vec<usize>,
}

impl FriendSet {
    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }
}

/// `(q0 + sum(friends)) / (n + 1)`.
pub fn aqe_query(query: &[f64], friends: &[Vec<f64>]) -> Result<Vec<f64>> {
    let mut sum = query.to_vec();
    for f in friends {
        if f.len() != query.len() {
            return Err(Error::Shape {
                expected: query.len(),
                found: f.len(),
            });
        }
        for (s, x) in sum.iter_mut().zip(f) {
            *s += x;
        }
    }
    let n = (friends.len() + 1) as f64;
    Ok(sum.into_iter().map(|s| s / n).collect())
}

fn friends_for_row(query: usize, rsets: &ReciprocalSets, distances: &DistanceMatrix, mode: QeMode) -> FriendSet {
    let set = rsets.by_query(query);
    let candidates = distances.candidates();
    let mut members = set.members.clone();
    members.sort_by(|&a, &b| {
        distances
            .get(query, a)
            .total_cmp(&distances.get(query, b))
            .then_with(|| candidates[a].cmp(&candidates[b]))
    });
    if let Some(cap) = mode.max_friends() {
        members.truncate(cap);
    }
    FriendSet {
        query: set.owner.clone(),
        members,
    }
}

/// Picks the reciprocal neighbours of `query` with the smallest original
/// distance: one for pair, two for triple, all of them for AQE.
pub fn select_friends(
    query: &str,
    rsets: &ReciprocalSets,
    distances: &DistanceMatrix,
    mode: QeMode,
) -> Result<FriendSet> {
    let row = distances
        .queries()
        .iter()
        .position(|q| q == query)
        .ok_or_else(|| Error::InvalidArgument(format!("unknown query `{query}`")))?;
    if rsets.len() != distances.queries().len() || rsets.by_query(row).owner != query {
        return Err(Error::InvalidArgument(
            "reciprocal sets and distance matrix cover different queries".into(),
        ));
    }
    Ok(friends_for_row(row, rsets, distances, mode))
}

/// Embeddings needed to re-query with an expanded exemplar model.
#[derive(Debug, Clone, Copy)]
pub struct QeInputs<'a> {
    /// Embeddings the exemplar SVMs are trained on, in candidate order.
    pub raw: &'a EmbeddingSet,
    /// Exemplar-SVM features of the same samples, in candidate order.
    pub features: &'a EmbeddingSet,
    /// Writer-disjoint negatives for SVM training.
    pub negatives: &'a EmbeddingSet,
}

impl QeInputs<'_> {
    fn validate(&self, initial: &Ranking) -> Result<()> {
        let cands = initial.candidates();
        let same = |set: &EmbeddingSet| set.samples().iter().map(|s| &s.sample_id).eq(cands.iter());
        if !same(self.raw) || !same(self.features) {
            return Err(Error::InvalidArgument(
                "raw and feature sets must list the ranking's candidates in order".into(),
            ));
        }
        if self.negatives.is_empty() {
            return Err(Error::InvalidArgument("negative set is empty".into()));
        }
        if self.negatives.dim() != self.raw.dim() {
            return Err(Error::Shape {
                expected: self.raw.dim(),
                found: self.negatives.dim(),
            });
        }
        check_writer_disjoint(self.negatives, self.raw)
    }
}

pub fn qe_rerank(
    inputs: &QeInputs<'_>,
    initial: &Ranking,
    distances: &DistanceMatrix,
    k: usize,
    mode: QeMode,
    svm_config: &SvmConfig,
) -> Result<Ranking> {
    svm_config.validate()?;
    inputs.validate(initial)?;
    if initial.queries() != distances.queries() || initial.candidates() != distances.candidates() {
        return Err(Error::InvalidArgument(
            "ranking and distance matrix cover different samples".into(),
        ));
    }
    let rsets = k_reciprocal_sets(initial, k)?;
    let raw = inputs.raw.matrix_f64();
    let features = inputs.features.matrix_f64();
    let negatives = inputs.negatives.matrix_f64();

    let lists = (0..initial.queries().len())
        .into_par_iter()
        .map(|q| {
            let friends = friends_for_row(q, &rsets, distances, mode);
            if friends.is_empty() {
                return Ok(initial.list(q).to_vec());
            }
            let own = initial.self_index(q).expect("square ranking");
            let query_feature = match mode {
                QeMode::Aqe => {
                    let fs: Vec<Vec<f64>> = friends.members.iter().map(|&c| features[c].clone()).collect();
                    aqe_query(&features[own], &fs)?
                }
                QeMode::Pair | QeMode::Triple => {
                    let fs = friends.members.iter().map(|&c| raw[c].clone()).collect();
                    let positives = PositiveSet::new(raw[own].clone(), fs)?;
                    svm::train(&positives, &negatives, svm_config)?.to_feature()?
                }
            };
            let mut list: Vec<Ranked> = initial
                .list(q)
                .iter()
                .map(|r| Ranked {
                    candidate: r.candidate,
                    distance: cosine_distance(&query_feature, &features[r.candidate]),
                })
                .collect();
            initial.sort_list(&mut list);
            Ok(list)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(initial.with_sorted_lists(lists))
}
