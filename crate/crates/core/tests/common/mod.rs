//! Shared fixtures and brute-force reference implementations.
//!
//! The `oracle` module recomputes neighbour sets, set vectors, Jaccard
//! distances, blended distances and retrieval metrics straight from their
//! definitions on dense matrices. It shares no code with the library.

#![allow(dead_code)]

use krnn_rerank::corpus::{EmbeddingSet, Sample, Split};
use krnn_rerank::ranking::Metric;
use krnn_rerank::DistanceMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A random square problem: sample ids (shuffled so id order differs from
/// index order), writer labels and a dense distance matrix.
#[derive(Debug, Clone)]
pub struct Problem {
    pub ids: Vec<String>,
    pub writers: Vec<String>,
    pub d: Vec<Vec<f64>>,
}

impl Problem {
    pub fn n(&self) -> usize {
        self.ids.len()
    }

    pub fn matrix(&self) -> DistanceMatrix {
        DistanceMatrix::new(
            self.ids.clone(),
            self.ids.clone(),
            self.d.iter().flatten().copied().collect(),
            Metric::Cosine,
        )
        .unwrap()
    }

    /// Same-writer candidates of each query, the query itself excluded.
    pub fn relevant(&self) -> Vec<Vec<usize>> {
        (0..self.n())
            .map(|q| {
                (0..self.n())
                    .filter(|&c| c != q && self.writers[c] == self.writers[q])
                    .collect()
            })
            .collect()
    }
}

fn shuffled_ids(rng: &mut ChaCha8Rng, n: usize) -> Vec<String> {
    let mut ids: Vec<String> = (0..n).map(|i| format!("s{i:03}")).collect();
    ids.shuffle(rng);
    ids
}

/// Points in a small cube; with `grid` the coordinates are integers, which
/// produces many exactly tied distances.
pub fn random_problem(rng: &mut ChaCha8Rng, n: usize, writers: usize, grid: bool) -> Problem {
    let dim = 3;
    let points: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            (0..dim)
                .map(|_| {
                    if grid {
                        rng.random_range(0..4) as f64
                    } else {
                        rng.random::<f64>()
                    }
                })
                .collect()
        })
        .collect();
    let d = points
        .iter()
        .map(|a| {
            points
                .iter()
                .map(|b| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt())
                .collect()
        })
        .collect();
    Problem {
        ids: shuffled_ids(rng, n),
        writers: (0..n).map(|_| format!("w{}", rng.random_range(0..writers))).collect(),
        d,
    }
}

/// Gaussian writer clusters with exactly `per_writer` samples each.
pub fn clustered_set(rng: &mut ChaCha8Rng, writers: usize, per_writer: usize, dim: usize, spread: f64) -> EmbeddingSet {
    let mut samples = Vec::with_capacity(writers * per_writer);
    for w in 0..writers {
        let center: Vec<f64> = (0..dim).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        for s in 0..per_writer {
            let v = center
                .iter()
                .map(|c| (c + spread * (rng.random::<f64>() * 2.0 - 1.0)) as f32)
                .collect();
            samples.push(Sample::new(format!("w{w:03}_{s:02}"), format!("w{w:03}"), v));
        }
    }
    EmbeddingSet::new(samples, Split::Test).unwrap()
}

pub mod oracle {
    /// Candidates of query `q` by ascending distance, ties by ascending id,
    /// with `q` itself left out.
    pub fn order(ids: &[String], d: &[Vec<f64>], q: usize) -> Vec<usize> {
        let mut c: Vec<usize> = (0..ids.len()).filter(|&c| c != q).collect();
        c.sort_by(|&a, &b| d[q][a].total_cmp(&d[q][b]).then(ids[a].cmp(&ids[b])));
        c
    }

    pub fn knn(ids: &[String], d: &[Vec<f64>], q: usize, k: usize) -> Vec<usize> {
        order(ids, d, q).into_iter().take(k).collect()
    }

    /// Members of `q`'s k-nearest list that also have `q` among their own.
    pub fn reciprocal(ids: &[String], d: &[Vec<f64>], q: usize, k: usize) -> Vec<usize> {
        knn(ids, d, q, k)
            .into_iter()
            .filter(|&g| knn(ids, d, g, k).contains(&q))
            .collect()
    }

    /// Dense set vector: `exp(-d(q, g))` on reciprocal members, else 0.
    pub fn set_vector(ids: &[String], d: &[Vec<f64>], q: usize, k: usize) -> Vec<f64> {
        let members = reciprocal(ids, d, q, k);
        (0..ids.len())
            .map(|g| if members.contains(&g) { (-d[q][g]).exp() } else { 0.0 })
            .collect()
    }

    pub fn jaccard(a: &[f64], b: &[f64], eps: f64) -> f64 {
        let num: f64 = a.iter().zip(b).map(|(x, y)| x.min(*y)).sum();
        let den: f64 = a.iter().zip(b).map(|(x, y)| x.max(*y)).sum();
        1.0 - num / (den + eps)
    }

    pub fn blend(original: f64, jaccard: f64, lambda: f64) -> f64 {
        (1.0 - lambda) * jaccard + lambda * original
    }

    /// Full matrix of blended distances.
    pub fn final_distances(ids: &[String], d: &[Vec<f64>], k: usize, lambda: f64, eps: f64) -> Vec<Vec<f64>> {
        let n = ids.len();
        let v: Vec<Vec<f64>> = (0..n).map(|q| set_vector(ids, d, q, k)).collect();
        (0..n)
            .map(|q| (0..n).map(|c| blend(d[q][c], jaccard(&v[q], &v[c], eps), lambda)).collect())
            .collect()
    }

    /// Precision at every cutoff, averaged over the relevant cutoffs.
    pub fn average_precision(list: &[usize], relevant: &[usize]) -> Option<f64> {
        if relevant.is_empty() {
            return None;
        }
        let mut sum = 0.0;
        for k in 1..=list.len() {
            if relevant.contains(&list[k - 1]) {
                let hits = list[..k].iter().filter(|c| relevant.contains(c)).count();
                sum += hits as f64 / k as f64;
            }
        }
        Some(sum / relevant.len() as f64)
    }

    fn valid<'a>(lists: &'a [Vec<usize>], relevant: &'a [Vec<usize>]) -> Vec<(&'a Vec<usize>, &'a Vec<usize>)> {
        lists.iter().zip(relevant).filter(|(_, r)| !r.is_empty()).collect()
    }

    pub fn mean_average_precision(lists: &[Vec<usize>], relevant: &[Vec<usize>]) -> f64 {
        let v = valid(lists, relevant);
        v.iter().map(|(l, r)| average_precision(l, r).unwrap()).sum::<f64>() / v.len() as f64
    }

    fn rate(lists: &[Vec<usize>], relevant: &[Vec<usize>], hit: impl Fn(&[usize], &[usize]) -> bool) -> f64 {
        let v = valid(lists, relevant);
        let hits = v.iter().filter(|(l, r)| hit(l, r)).count();
        100.0 * hits as f64 / v.len() as f64
    }

    pub fn soft(lists: &[Vec<usize>], relevant: &[Vec<usize>], k: usize) -> f64 {
        rate(lists, relevant, |l, r| (0..k.min(l.len())).any(|i| r.contains(&l[i])))
    }

    pub fn hard(lists: &[Vec<usize>], relevant: &[Vec<usize>], k: usize) -> f64 {
        rate(lists, relevant, |l, r| l.len() >= k && (0..k).all(|i| r.contains(&l[i])))
    }

    pub fn top1(lists: &[Vec<usize>], relevant: &[Vec<usize>]) -> f64 {
        rate(lists, relevant, |l, r| !l.is_empty() && r.contains(&l[0]))
    }
}
