//! Retrieval metrics (mAP, Top-1, Hard-k, Soft-k), report tables and
//! (k, lambda) sweeps.
//!
//! A candidate is relevant to a query when it shares the query's writer and is
//! not the query itself. Queries without any relevant candidate are excluded
//! from every metric.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::hash::Hash;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::EmbeddingSet;
use crate::error::{Error, Result};
use crate::expansion::{qe_rerank, QeInputs, QeMode};
use crate::jaccard::{JaccardReranker, DEFAULT_EPSILON};
use crate::ranking::{DistanceMatrix, Ranking};
use crate::svm::SvmConfig;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryRelevance {
    pub query: String,
    /// Candidate indices of the query's ranking.
    pub relevant: HashSet<usize>,
}

/// Relevance judgements for every query row of a ranking.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Relevance {
    queries: Vec<QueryRelevance>,
}

impl Relevance {
    /// Same-writer relevance between `queries` and `candidates` (both in the
    /// ranking's row and column order).
    pub fn from_writers(queries: &EmbeddingSet, candidates: &EmbeddingSet) -> Self {
        let queries = queries
            .samples()
            .iter()
            .map(|q| QueryRelevance {
                query: q.sample_id.clone(),
                relevant: candidates
                    .samples()
                    .iter()
                    .enumerate()
                    .filter(|(_, c)| c.writer_id == q.writer_id && c.sample_id != q.sample_id)
                    .map(|(i, _)| i)
                    .collect(),
            })
            .collect();
        Relevance { queries }
    }

    pub fn new(queries: Vec<QueryRelevance>) -> Self {
        Relevance { queries }
    }

    pub fn get(&self, query: usize) -> &QueryRelevance {
        &self.queries[query]
    }

    pub fn len(&self) -> usize {
        self.queries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queries.is_empty()
    }

    /// Number of queries without any relevant candidate.
    pub fn excluded(&self) -> usize {
        self.queries.iter().filter(|q| q.relevant.is_empty()).count()
    }

    fn check(&self, ranking: &Ranking) -> Result<()> {
        let aligned = self.queries.len() == ranking.queries().len()
            && self.queries.iter().zip(ranking.queries()).all(|(r, q)| &r.query == q);
        if aligned {
            Ok(())
        } else {
            Err(Error::InvalidArgument("relevance does not match the ranking's queries".into()))
        }
    }

    /// Applies `f` to each valid query's candidate list, in query order.
    fn per_query<T, F>(&self, ranking: &Ranking, f: F) -> Result<Vec<T>>
    where
        F: Fn(&[usize], &HashSet<usize>) -> T,
    {
        self.check(ranking)?;
        let excluded = self.excluded();
        if excluded > 0 {
            log::debug!("{excluded} queries have no relevant candidate and are excluded");
        }
        Ok(self
            .queries
            .iter()
            .zip(ranking.lists())
            .filter(|(r, _)| !r.relevant.is_empty())
            .map(|(r, list)| {
                let ids: Vec<usize> = list.iter().map(|x| x.candidate).collect();
                f(&ids, &r.relevant)
            })
            .collect())
    }
}

/// `sum_k P(k) * rel(k) / |relevant|` over the full ranked list.
///
/// `None` when `relevant` is empty.
pub fn average_precision<T: Eq + Hash>(ranked: &[T], relevant: &HashSet<T>) -> Option<f64> {
    if relevant.is_empty() {
        return None;
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (i, item) in ranked.iter().enumerate() {
        if relevant.contains(item) {
            hits += 1;
            sum += hits as f64 / (i + 1) as f64;
        }
    }
    Some(sum / relevant.len() as f64)
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn percent(flags: &[bool]) -> f64 {
    if flags.is_empty() {
        return 0.0;
    }
    100.0 * flags.iter().filter(|&&b| b).count() as f64 / flags.len() as f64
}

/// Mean AveP over queries with at least one relevant candidate, in `[0, 1]`.
pub fn mean_average_precision(ranking: &Ranking, relevance: &Relevance) -> Result<f64> {
    let aps = relevance.per_query(ranking, |ids, rel| {
        average_precision(ids, rel).expect("filtered to nonempty")
    })?;
    if aps.is_empty() {
        return Err(Error::NoValidQueries);
    }
    Ok(mean(&aps))
}

/// Percentage of queries whose first candidate is relevant.
pub fn top1(ranking: &Ranking, relevance: &Relevance) -> Result<f64> {
    soft_k(ranking, relevance, 1)
}

/// Percentage of queries whose first `k` candidates are all relevant.
pub fn hard_k(ranking: &Ranking, relevance: &Relevance, k: usize) -> Result<f64> {
    check_k(k)?;
    let hits = relevance.per_query(ranking, |ids, rel| {
        ids.len() >= k && ids[..k].iter().all(|c| rel.contains(c))
    })?;
    Ok(percent(&hits))
}

/// Percentage of queries with at least one relevant candidate in the first `k`.
pub fn soft_k(ranking: &Ranking, relevance: &Relevance, k: usize) -> Result<f64> {
    check_k(k)?;
    let hits = relevance.per_query(ranking, |ids, rel| ids.iter().take(k).any(|c| rel.contains(c)))?;
    Ok(percent(&hits))
}

fn check_k(k: usize) -> Result<()> {
    if k == 0 {
        Err(Error::InvalidArgument("k must be >= 1".into()))
    } else {
        Ok(())
    }
}

/// One table row. All metrics are percentages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub method: String,
    pub queries: usize,
    pub excluded: usize,
    pub top1: f64,
    pub hard2: f64,
    pub hard3: f64,
    pub hard4: f64,
    pub soft5: f64,
    pub soft10: f64,
    pub map: f64,
    /// Sample standard deviation of `map` over repeated runs.
    pub map_spread: f64,
    pub runs: usize,
    #[serde(default)]
    pub config: serde_json::Value,
}

pub fn evaluate(ranking: &Ranking, relevance: &Relevance, method: &str) -> Result<EvalReport> {
    let excluded = relevance.excluded();
    Ok(EvalReport {
        method: method.to_string(),
        queries: relevance.len() - excluded,
        excluded,
        top1: top1(ranking, relevance)?,
        hard2: hard_k(ranking, relevance, 2)?,
        hard3: hard_k(ranking, relevance, 3)?,
        hard4: hard_k(ranking, relevance, 4)?,
        soft5: soft_k(ranking, relevance, 5)?,
        soft10: soft_k(ranking, relevance, 10)?,
        map: 100.0 * mean_average_precision(ranking, relevance)?,
        map_spread: 0.0,
        runs: 1,
        config: serde_json::Value::Null,
    })
}

/// Averages reports of repeated runs; `map_spread` becomes the sample
/// standard deviation of their mAP values (0 for a single run).
pub fn aggregate(reports: &[EvalReport]) -> Result<EvalReport> {
    let first = reports.first().ok_or_else(|| Error::InvalidArgument("no runs to aggregate".into()))?;
    let avg = |f: fn(&EvalReport) -> f64| mean(&reports.iter().map(f).collect::<Vec<_>>());
    let map = avg(|r| r.map);
    let spread = if reports.len() > 1 {
        let ss: f64 = reports.iter().map(|r| (r.map - map).powi(2)).sum();
        (ss / (reports.len() - 1) as f64).sqrt()
    } else {
        0.0
    };
    Ok(EvalReport {
        method: first.method.clone(),
        queries: first.queries,
        excluded: first.excluded,
        top1: avg(|r| r.top1),
        hard2: avg(|r| r.hard2),
        hard3: avg(|r| r.hard3),
        hard4: avg(|r| r.hard4),
        soft5: avg(|r| r.soft5),
        soft10: avg(|r| r.soft10),
        map,
        map_spread: spread,
        runs: reports.len(),
        config: first.config.clone(),
    })
}

/// Aligned text table with the columns
/// `Method | Top-1 | Hard-2 | Hard-3 | Hard-4 | Soft-5 | Soft-10 | mAP`.
pub fn format_table(reports: &[EvalReport]) -> String {
    let headers = ["Method", "Top-1", "Hard-2", "Hard-3", "Hard-4", "Soft-5", "Soft-10", "mAP"];
    let rows: Vec<Vec<String>> = reports
        .iter()
        .map(|r| {
            let map = if r.runs > 1 {
                format!("{:.2} ± {:.2}", r.map, r.map_spread)
            } else {
                format!("{:.2}", r.map)
            };
            vec![
                r.method.clone(),
                format!("{:.2}", r.top1),
                format!("{:.2}", r.hard2),
                format!("{:.2}", r.hard3),
                format!("{:.2}", r.hard4),
                format!("{:.2}", r.soft5),
                format!("{:.2}", r.soft10),
                map,
            ]
        })
        .collect();
    let width = |c: usize| {
        rows.iter()
            .map(|r| r[c].chars().count())
            .chain([headers[c].len()])
            .max()
            .unwrap_or(0)
    };
    let widths: Vec<usize> = (0..headers.len()).map(width).collect();
    let mut out = String::new();
    let line = |out: &mut String, cells: &[String]| {
        for (c, cell) in cells.iter().enumerate() {
            let pad = widths[c] - cell.chars().count();
            if c == 0 {
                let _ = write!(out, "{cell}{}", " ".repeat(pad));
            } else {
                let _ = write!(out, "  {}{cell}", " ".repeat(pad));
            }
        }
        out.push('\n');
    };
    line(&mut out, &headers.map(String::from));
    for r in &rows {
        line(&mut out, r);
    }
    out
}

pub fn default_k_grid() -> Vec<usize> {
    vec![2, 4, 8, 16, 32, 64]
}

pub fn default_lambda_grid() -> Vec<f64> {
    (0..=10).map(|i| i as f64 / 10.0).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub k: usize,
    pub lambda: f64,
    pub map: f64,
}

/// mAP (in `[0, 1]`) for every `(k, lambda)` combination.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub k_values: Vec<usize>,
    pub lambda_values: Vec<f64>,
    /// `map[i][j]` belongs to `k_values[i]`, `lambda_values[j]`.
    pub map: Vec<Vec<f64>>,
    pub baseline_map: f64,
}

impl SweepGrid {
    pub fn cells(&self) -> impl Iterator<Item = SweepCell> + '_ {
        self.k_values.iter().enumerate().flat_map(move |(i, &k)| {
            self.lambda_values
                .iter()
                .enumerate()
                .map(move |(j, &lambda)| SweepCell {
                    k,
                    lambda,
                    map: self.map[i][j],
                })
        })
    }

    /// Best cell; the first one in (k, lambda) grid order wins ties.
    pub fn argmax(&self) -> SweepCell {
        self.cells()
            .reduce(|best, c| if c.map > best.map { c } else { best })
            .expect("grid is nonempty")
    }

    /// Every `lambda == 1` cell must reproduce the baseline exactly.
    pub fn check_lambda_one(&self) -> Result<()> {
        for c in self.cells().filter(|c| c.lambda == 1.0) {
            if c.map != self.baseline_map {
                return Err(Error::Consistency(format!(
                    "lambda = 1 cell at k = {} has mAP {} but the initial ranking has {}",
                    c.k, c.map, self.baseline_map
                )));
            }
        }
        Ok(())
    }

    /// `k,lambda,map` rows.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["k", "lambda", "map"])?;
        for c in self.cells() {
            wtr.write_record([c.k.to_string(), c.lambda.to_string(), c.map.to_string()])?;
        }
        wtr.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

fn check_grids(k_grid: &[usize], lambda_grid: &[f64]) -> Result<()> {
    if k_grid.is_empty() || lambda_grid.is_empty() {
        return Err(Error::InvalidArgument("sweep grids must be nonempty".into()));
    }
    if k_grid.contains(&0) {
        return Err(Error::InvalidArgument("k grid values must be >= 1".into()));
    }
    if let Some(l) = lambda_grid.iter().find(|l| !(0.0..=1.0).contains(*l)) {
        return Err(Error::InvalidArgument(format!("lambda grid value {l} outside [0, 1]")));
    }
    Ok(())
}

/// Jaccard re-ranking of `ranking` for every grid cell.
pub fn sweep_jaccard(
    ranking: &Ranking,
    distances: &DistanceMatrix,
    relevance: &Relevance,
    k_grid: &[usize],
    lambda_grid: &[f64],
) -> Result<SweepGrid> {
    check_grids(k_grid, lambda_grid)?;
    let baseline_map = mean_average_precision(ranking, relevance)?;
    let map = k_grid
        .par_iter()
        .map(|&k| {
            let reranker = JaccardReranker::new(ranking, distances, k, DEFAULT_EPSILON)?;
            lambda_grid
                .iter()
                .map(|&lambda| mean_average_precision(&reranker.rerank(lambda)?, relevance))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepGrid {
        k_values: k_grid.to_vec(),
        lambda_values: lambda_grid.to_vec(),
        map,
        baseline_map,
    })
}

/// Query-expansion re-ranking per `k`. Lambda does not enter the method, so
/// each row is constant across the lambda grid; the grid shape is kept so
/// results line up with Jaccard sweeps.
#[allow(clippy::too_many_arguments)]
pub fn sweep_query_expansion(
    inputs: &QeInputs<'_>,
    ranking: &Ranking,
    distances: &DistanceMatrix,
    relevance: &Relevance,
    k_grid: &[usize],
    lambda_grid: &[f64],
    mode: QeMode,
    svm_config: &SvmConfig,
) -> Result<SweepGrid> {
    check_grids(k_grid, lambda_grid)?;
    let baseline_map = mean_average_precision(ranking, relevance)?;
    let map = k_grid
        .iter()
        .map(|&k| {
            let reranked = qe_rerank(inputs, ranking, distances, k, mode, svm_config)?;
            let m = mean_average_precision(&reranked, relevance)?;
            Ok(vec![m; lambda_grid.len()])
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepGrid {
        k_values: k_grid.to_vec(),
        lambda_values: lambda_grid.to_vec(),
        map,
        baseline_map,
    })
}
