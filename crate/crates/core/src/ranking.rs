//! Distance matrices, leave-one-out rankings and k-reciprocal neighbour sets.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::EmbeddingSet;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Cosine,
}

/// Dense row-major `|queries| x |candidates|` matrix of finite, nonnegative
/// distances.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    queries: Vec<String>,
    candidates: Vec<String>,
    values: Vec<f64>,
    metric: Metric,
}

impl DistanceMatrix {
    pub fn new(queries: Vec<String>, candidates: Vec<String>, values: Vec<f64>, metric: Metric) -> Result<Self> {
        let expected = queries.len() * candidates.len();
        if values.len() != expected {
            return Err(Error::Shape {
                expected,
                found: values.len(),
            });
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::InvalidArgument(format!(
                "distances must be finite and nonnegative, found {v}"
            )));
        }
        Ok(DistanceMatrix {
            queries,
            candidates,
            values,
            metric,
        })
    }

    pub fn queries(&self) -> &[String] {
        &self.queries
    }

    pub fn candidates(&self) -> &[String] {
        &self.candidates
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    #[inline]
    pub fn get(&self, query: usize, candidate: usize) -> f64 {
        self.values[query * self.candidates.len() + candidate]
    }

    pub fn row(&self, query: usize) -> &[f64] {
        let n = self.candidates.len();
        &self.values[query * n..(query + 1) * n]
    }
}

/// `1 - cos(a, b)`, clamped to `[0, 2]`.
pub fn cosine_distance(a: &[f64], b: &[f64]) -> f64 {
    let ab: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let aa: f64 = a.iter().map(|x| x * x).sum();
    let bb: f64 = b.iter().map(|x| x * x).sum();
    cosine_from_parts(ab, aa, bb)
}

#[inline]
fn cosine_from_parts(ab: f64, aa: f64, bb: f64) -> f64 {
    (1.0 - ab / (aa * bb).sqrt()).clamp(0.0, 2.0)
}

fn squared_norms(set: &EmbeddingSet, rows: &[Vec<f64>]) -> Result<Vec<f64>> {
    rows.iter()
        .zip(set.samples())
        .map(|(r, s)| {
            let nn: f64 = r.iter().map(|x| x * x).sum();
            if nn == 0.0 {
                Err(Error::ZeroVector(s.sample_id.clone()))
            } else {
                Ok(nn)
            }
        })
        .collect()
}

pub fn cosine_distances(queries: &EmbeddingSet, candidates: &EmbeddingSet) -> Result<DistanceMatrix> {
    if queries.dim() != candidates.dim() {
        return Err(Error::Shape {
            expected: queries.dim(),
            found: candidates.dim(),
        });
    }
    let q = queries.matrix_f64();
    let c = candidates.matrix_f64();
    let qn = squared_norms(queries, &q)?;
    let cn = squared_norms(candidates, &c)?;
    let values: Vec<f64> = q
        .par_iter()
        .zip(&qn)
        .flat_map_iter(|(qv, &qq)| {
            c.iter().zip(&cn).map(move |(cv, &cc)| {
                let ab: f64 = qv.iter().zip(cv).map(|(x, y)| x * y).sum();
                cosine_from_parts(ab, qq, cc)
            })
        })
        .collect();
    DistanceMatrix::new(queries.ids(), candidates.ids(), values, Metric::Cosine)
}

/// One entry of a ranked list; `candidate` indexes [`Ranking::candidates`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ranked {
    pub candidate: usize,
    pub distance: f64,
}

/// Per-query candidate lists sorted by ascending distance.
///
/// A query never appears in its own list (matched by sample id). Equal
/// distances are ordered by ascending candidate sample id.
#[derive(Debug, Clone, PartialEq)]
pub struct Ranking {
    queries: Vec<String>,
    candidates: Vec<String>,
    lists: Vec<Vec<Ranked>>,
    /// Position of each candidate in sample-id order.
    id_order: Vec<usize>,
    /// Candidate index of each query itself, when present.
    self_index: Vec<Option<usize>>,
}

impl Ranking {
    fn skeleton(queries: Vec<String>, candidates: Vec<String>) -> Self {
        let mut by_id: Vec<usize> = (0..candidates.len()).collect();
        by_id.sort_by(|&a, &b| candidates[a].cmp(&candidates[b]));
        let mut id_order = vec![0; candidates.len()];
        for (pos, &c) in by_id.iter().enumerate() {
            id_order[c] = pos;
        }
        let lookup: HashMap<&str, usize> = candidates
            .iter()
            .enumerate()
            .map(|(i, id)| (id.as_str(), i))
            .collect();
        let self_index = queries.iter().map(|q| lookup.get(q.as_str()).copied()).collect();
        Ranking {
            queries,
            candidates,
            lists: Vec::new(),
            id_order,
            self_index,
        }
    }

    /// Builds a ranking sibling to `self` (same queries and candidates) from
    /// unsorted per-query lists, applying the standard ordering.
    pub(crate) fn with_lists(&self, mut lists: Vec<Vec<Ranked>>) -> Ranking {
        lists.par_iter_mut().for_each(|l| self.sort_list(l));
        Ranking {
            queries: self.queries.clone(),
            candidates: self.candidates.clone(),
            lists,
            id_order: self.id_order.clone(),
            self_index: self.self_index.clone(),
        }
    }

    /// Sibling ranking from lists that are already in final order.
    pub(crate) fn with_sorted_lists(&self, lists: Vec<Vec<Ranked>>) -> Ranking {
        Ranking {
            lists,
            ..self.clone_meta()
        }
    }

    fn clone_meta(&self) -> Ranking {
        Ranking {
            queries: self.queries.clone(),
            candidates: self.candidates.clone(),
            lists: Vec::new(),
            id_order: self.id_order.clone(),
            self_index: self.self_index.clone(),
        }
    }

    pub(crate) fn compare(&self, a: &Ranked, b: &Ranked) -> Ordering {
        a.distance
            .total_cmp(&b.distance)
            .then_with(|| self.id_order[a.candidate].cmp(&self.id_order[b.candidate]))
    }

    pub(crate) fn sort_list(&self, list: &mut [Ranked]) {
        list.sort_by(|a, b| self.compare(a, b));
    }

    pub fn queries(&self) -> &[String] {
        &self.queries
    }

    pub fn candidates(&self) -> &[String] {
        &self.candidates
    }

    pub fn lists(&self) -> &[Vec<Ranked>] {
        &self.lists
    }

    pub fn list(&self, query: usize) -> &[Ranked] {
        &self.lists[query]
    }

    pub fn self_index(&self, query: usize) -> Option<usize> {
        self.self_index[query]
    }

    /// Candidate ids of one query's list, in rank order.
    pub fn ranked_ids(&self, query: usize) -> Vec<&str> {
        self.lists[query]
            .iter()
            .map(|r| self.candidates[r.candidate].as_str())
            .collect()
    }

    /// Writes `query_id,rank,candidate_id,distance` rows; ranks start at 1.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["query_id", "rank", "candidate_id", "distance"])?;
        for (q, list) in self.lists.iter().enumerate() {
            for (pos, r) in list.iter().enumerate() {
                wtr.write_record([
                    self.queries[q].as_str(),
                    &(pos + 1).to_string(),
                    &self.candidates[r.candidate],
                    &r.distance.to_string(),
                ])?;
            }
        }
        wtr.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

/// Sorts every row of `matrix`, excluding each query's own sample.
pub fn rank(matrix: &DistanceMatrix) -> Ranking {
    let mut ranking = Ranking::skeleton(matrix.queries.clone(), matrix.candidates.clone());
    let lists: Vec<Vec<Ranked>> = (0..matrix.queries.len())
        .into_par_iter()
        .map(|q| {
            let own = ranking.self_index[q];
            let mut list: Vec<Ranked> = matrix
                .row(q)
                .iter()
                .enumerate()
                .filter(|&(c, _)| Some(c) != own)
                .map(|(c, &distance)| Ranked { candidate: c, distance })
                .collect();
            ranking.sort_list(&mut list);
            list
        })
        .collect();
    ranking.lists = lists;
    ranking
}

/// Candidates in the owner's top-k whose own top-k contains the owner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReciprocalSet {
    pub owner: String,
    pub k: usize,
    /// Candidate indices in the owner's rank order.
    pub members: Vec<usize>,
}

impl ReciprocalSet {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, candidate: usize) -> bool {
        self.members.contains(&candidate)
    }
}

/// k-reciprocal sets of every query of a square ranking, indexed by query row.
#[derive(Debug, Clone, PartialEq)]
pub struct ReciprocalSets {
    /// Effective k after clamping.
    pub k: usize,
    sets: Vec<ReciprocalSet>,
    owner_rows: HashMap<String, usize>,
}

impl ReciprocalSets {
    pub fn get(&self, sample_id: &str) -> Option<&ReciprocalSet> {
        self.owner_rows.get(sample_id).map(|&r| &self.sets[r])
    }

    pub fn by_query(&self, query: usize) -> &ReciprocalSet {
        &self.sets[query]
    }

    pub fn iter(&self) -> impl Iterator<Item = &ReciprocalSet> {
        self.sets.iter()
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }
}

/// Maps each candidate index to the query row of the same sample.
///
/// Fails unless queries and candidates are the same sample ids.
pub(crate) fn square_index(ranking: &Ranking) -> Result<Vec<usize>> {
    if ranking.queries.len() != ranking.candidates.len() {
        return Err(Error::InvalidArgument(
            "reciprocal neighbours need every sample as both query and candidate".into(),
        ));
    }
    let mut cand_to_query = vec![usize::MAX; ranking.candidates.len()];
    for (q, own) in ranking.self_index.iter().enumerate() {
        match own {
            Some(c) => cand_to_query[*c] = q,
            None => {
                return Err(Error::InvalidArgument(format!(
                    "query `{}` is not among the candidates",
                    ranking.queries[q]
                )))
            }
        }
    }
    Ok(cand_to_query)
}

pub fn k_reciprocal_sets(ranking: &Ranking, k: usize) -> Result<ReciprocalSets> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be >= 1".into()));
    }
    let cand_to_query = square_index(ranking)?;
    let max_k = ranking.candidates.len().saturating_sub(1);
    let k_eff = if k > max_k {
        log::warn!("k = {k} exceeds the {max_k} available neighbours; clamping");
        max_k
    } else {
        k
    };

    let mut top: Vec<Vec<usize>> = ranking
        .lists
        .iter()
        .map(|l| l.iter().take(k_eff).map(|r| r.candidate).collect())
        .collect();
    top.iter_mut().for_each(|t| t.sort_unstable());

    let sets = (0..ranking.queries.len())
        .into_par_iter()
        .map(|q| {
            let own = ranking.self_index[q].expect("checked by square_index");
            let members = ranking.lists[q]
                .iter()
                .take(k_eff)
                .map(|r| r.candidate)
                .filter(|&t| top[cand_to_query[t]].binary_search(&own).is_ok())
                .collect();
            ReciprocalSet {
                owner: ranking.queries[q].clone(),
                k: k_eff,
                members,
            }
        })
        .collect();
    let owner_rows = ranking
        .queries
        .iter()
        .enumerate()
        .map(|(i, id)| (id.clone(), i))
        .collect();
    Ok(ReciprocalSets {
        k: k_eff,
        sets,
        owner_rows,
    })
}
