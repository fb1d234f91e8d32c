//! Acceptance suite. Every criterion prints one PASS/FAIL line with its
//! runtime against the time limit; the process fails if any criterion does.

mod common;

use std::collections::HashSet;
use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use krnn_rerank::corpus::{
    generate_synthetic, save_embeddings, EmbeddingSet, Format, Sample, Split, SyntheticConfig,
};
use krnn_rerank::eval::{hard_k, mean_average_precision, soft_k, top1, QueryRelevance, Relevance};
use krnn_rerank::expansion::{qe_rerank, QeInputs, QeMode};
use krnn_rerank::jaccard::{
    build_set_vectors, jaccard_distance, jaccard_rerank, JaccardReranker, RerankConfig, SetVector, DEFAULT_EPSILON,
};
use krnn_rerank::pipeline::{self, RunConfig};
use krnn_rerank::ranking::{cosine_distances, k_reciprocal_sets, rank, Metric};
use krnn_rerank::svm::{esvm_feature_transform, train, PositiveSet, SvmConfig};
use krnn_rerank::{DistanceMatrix, Ranking};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};
use rand::Rng;

use common::{oracle, random_problem, rng, Problem};

type Check = Result<String, String>;
type Criterion = (&'static str, &'static str, u64, fn() -> Check);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if $cond {
        } else {
            return Err(format!($($msg)+));
        }
    };
}

fn runner(cases: u32) -> TestRunner {
    let config = Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha))
}

fn lists(r: &Ranking) -> Vec<Vec<usize>> {
    r.lists().iter().map(|l| l.iter().map(|x| x.candidate).collect()).collect()
}

fn relevance_of(p: &Problem) -> Relevance {
    Relevance::new(
        p.relevant()
            .into_iter()
            .zip(&p.ids)
            .map(|(rel, id)| QueryRelevance {
                query: id.clone(),
                relevant: rel.into_iter().collect(),
            })
            .collect(),
    )
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

fn lambda_identity() -> Check {
    let mut r = rng(1);
    let mut compared = 0;
    for n in [10, 100, 1000] {
        let set = common::clustered_set(&mut r, n / 5, 5, 16, 0.6);
        let d = cosine_distances(&set, &set).map_err(|e| e.to_string())?;
        let initial = rank(&d);
        for k in [2, 8, 32] {
            let out = jaccard_rerank(&initial, &d, &RerankConfig::new(k, 1.0)).map_err(|e| e.to_string())?;
            ensure!(lists(&out) == lists(&initial), "N={n} k={k}: order differs");
            ensure!(out == initial, "N={n} k={k}: distances differ");
            compared += 1;
        }
    }
    Ok(format!("{compared} (N, k) pairs identical"))
}

fn check_problem(p: &Problem, k: usize, lambda: f64) -> Result<(), String> {
    let n = p.n();
    let d = p.matrix();
    let initial = rank(&d);
    let eps = DEFAULT_EPSILON;

    for q in 0..n {
        ensure!(lists(&initial)[q] == oracle::order(&p.ids, &p.d, q), "initial order of {q}");
    }
    let rsets = k_reciprocal_sets(&initial, k).map_err(|e| e.to_string())?;
    let k_eff = k.min(n - 1);
    for q in 0..n {
        ensure!(
            rsets.by_query(q).members == oracle::reciprocal(&p.ids, &p.d, q, k_eff),
            "reciprocal set of {q} at k={k}"
        );
    }

    let vectors = build_set_vectors(&initial, &d, k).map_err(|e| e.to_string())?;
    let dense: Vec<Vec<f64>> = (0..n).map(|q| oracle::set_vector(&p.ids, &p.d, q, k_eff)).collect();
    for q in 0..n {
        for (x, y) in vectors[q].dense().iter().zip(&dense[q]) {
            ensure!(close(*x, *y, 1e-12), "set vector of {q}");
        }
    }

    let reranker = JaccardReranker::new(&initial, &d, k, eps).map_err(|e| e.to_string())?;
    for q in 0..n {
        for c in 0..n {
            let want = oracle::jaccard(&dense[q], &dense[c], eps);
            ensure!(close(reranker.jaccard(q, c), want, 1e-12), "jaccard({q},{c}) matrix");
            let pair = jaccard_distance(&vectors[q], &vectors[c], eps).map_err(|e| e.to_string())?;
            ensure!(close(pair, want, 1e-12), "jaccard({q},{c}) pairwise");
        }
    }

    let fin = oracle::final_distances(&p.ids, &p.d, k_eff, lambda, eps);
    let out = jaccard_rerank(&initial, &d, &RerankConfig::new(k, lambda)).map_err(|e| e.to_string())?;
    for q in 0..n {
        let want = oracle::order(&p.ids, &fin, q);
        let got = &out.lists()[q];
        ensure!(got.len() == want.len(), "list length of {q}");
        for (g, &w) in got.iter().zip(&want) {
            ensure!(close(g.distance, fin[q][g.candidate], 1e-12), "final distance ({q},{})", g.candidate);
            // Positions may only swap between candidates tied within tolerance.
            ensure!(
                g.candidate == w || close(fin[q][g.candidate], fin[q][w], 1e-12),
                "final order of {q}"
            );
        }
    }

    let rel = relevance_of(p);
    let truth = p.relevant();
    if truth.iter().all(|r| r.is_empty()) {
        return Ok(());
    }
    for ranking in [&initial, &out] {
        let l = lists(ranking);
        let map = mean_average_precision(ranking, &rel).map_err(|e| e.to_string())?;
        ensure!(close(map, oracle::mean_average_precision(&l, &truth), 1e-12), "mAP");
        let t1 = top1(ranking, &rel).map_err(|e| e.to_string())?;
        ensure!(close(t1, oracle::top1(&l, &truth), 1e-12), "top-1");
        for kk in 1..=n + 1 {
            let h = hard_k(ranking, &rel, kk).map_err(|e| e.to_string())?;
            ensure!(close(h, oracle::hard(&l, &truth, kk), 1e-12), "hard-{kk}");
            let s = soft_k(ranking, &rel, kk).map_err(|e| e.to_string())?;
            ensure!(close(s, oracle::soft(&l, &truth, kk), 1e-12), "soft-{kk}");
        }
    }
    Ok(())
}

fn oracle_equivalence() -> Check {
    let mut r = rng(2);
    let corpora = 300;
    for i in 0..corpora {
        let n = r.random_range(2..=12);
        let grid = i % 3 == 0;
        let writers = r.random_range(1..=4);
        let p = random_problem(&mut r, n, writers, grid);
        let k = r.random_range(1..=n + 1);
        let lambda = r.random_range(0..=10) as f64 / 10.0;
        check_problem(&p, k, lambda).map_err(|e| format!("corpus {i} (N={n}, k={k}, lambda={lambda}): {e}"))?;
    }
    Ok(format!("{corpora} corpora, N <= 12, tolerance 1e-12"))
}

fn sparse_weights(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(prop_oneof![2 => Just(0.0), 3 => 1e-9f64..=1.0], n)
}

fn jaccard_bounds() -> Check {
    let cases = 10_000;
    let strategy = (1usize..24).prop_flat_map(|n| (sparse_weights(n), sparse_weights(n)));
    runner(cases)
        .run(&strategy, |(a, b)| {
            let n = a.len();
            let va = SetVector::from_dense("a", &a).unwrap();
            let vb = SetVector::from_dense("b", &b).unwrap();
            let zero = SetVector::from_dense("z", &vec![0.0; n]).unwrap();
            let ab = jaccard_distance(&va, &vb, DEFAULT_EPSILON).unwrap();
            let ba = jaccard_distance(&vb, &va, DEFAULT_EPSILON).unwrap();
            prop_assert!((0.0..=1.0).contains(&ab), "out of range: {ab}");
            prop_assert_eq!(ab.to_bits(), ba.to_bits());
            prop_assert_eq!(jaccard_distance(&zero, &zero, DEFAULT_EPSILON).unwrap(), 1.0);
            prop_assert_eq!(jaccard_distance(&zero, &va, DEFAULT_EPSILON).unwrap(), 1.0);
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    Ok(format!("{cases} random pairs"))
}

fn reciprocal_laws() -> Check {
    let cases = 1_000;
    let strategy = (any::<u64>(), 2usize..=30, any::<bool>());
    runner(cases)
        .run(&strategy, |(seed, n, grid)| {
            let p = random_problem(&mut rng(seed), n, 3, grid);
            let ranking = rank(&p.matrix());
            let mut previous: Option<Vec<HashSet<usize>>> = None;
            for k in 1..=n + 1 {
                let rs = k_reciprocal_sets(&ranking, k).unwrap();
                let sets: Vec<HashSet<usize>> = rs.iter().map(|s| s.members.iter().copied().collect()).collect();
                for (i, s) in sets.iter().enumerate() {
                    prop_assert!(s.len() <= k, "|R({i},{k})| = {}", s.len());
                    prop_assert!(!s.contains(&i));
                    for &j in s {
                        prop_assert!(sets[j].contains(&i), "{j} in R({i},{k}) but not vice versa");
                    }
                    if let Some(prev) = &previous {
                        prop_assert!(prev[i].is_subset(s), "R({i},{}) not in R({i},{k})", k - 1);
                    }
                }
                previous = Some(sets);
            }
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    Ok(format!("{cases} random corpora, every k"))
}

fn metric_laws() -> Check {
    let mut r = rng(5);
    let mut checked = 0;
    for i in 0..400 {
        let fixed = i % 2 == 0;
        let (set, ng) = if fixed {
            let (ng, writers, spread) = (r.random_range(2..=6), r.random_range(2..=8), r.random_range(0.2..2.0));
            (common::clustered_set(&mut r, writers, ng, 4, spread), Some(ng))
        } else {
            let n = r.random_range(3..=20);
            let p = random_problem(&mut r, n, 4, false);
            let samples = p
                .ids
                .iter()
                .zip(&p.writers)
                .map(|(id, w)| Sample::new(id.clone(), w.clone(), vec![r.random::<f32>() + 0.1, r.random::<f32>()]))
                .collect();
            (EmbeddingSet::new(samples, Split::Test).unwrap(), None)
        };
        let rel = Relevance::from_writers(&set, &set);
        if rel.excluded() == rel.len() {
            continue;
        }
        let ranking = rank(&cosine_distances(&set, &set).unwrap());
        let e = |x: krnn_rerank::Result<f64>| x.map_err(|e| e.to_string());
        let t1 = e(top1(&ranking, &rel))?;
        ensure!(e(hard_k(&ranking, &rel, 1))? == t1, "hard_1 != top1");
        ensure!(e(soft_k(&ranking, &rel, 1))? == t1, "soft_1 != top1");
        let max_k = set.len() + 2;
        for k in 1..max_k {
            ensure!(e(hard_k(&ranking, &rel, k + 1))? <= e(hard_k(&ranking, &rel, k))?, "hard_k increased at {k}");
            ensure!(e(soft_k(&ranking, &rel, k + 1))? >= e(soft_k(&ranking, &rel, k))?, "soft_k decreased at {k}");
        }
        if let Some(ng) = ng {
            for k in ng..=max_k {
                ensure!(e(hard_k(&ranking, &rel, k))? == 0.0, "hard_{k} nonzero with nG={ng}");
            }
        }
        checked += 1;
    }
    Ok(format!("{checked} rankings"))
}

fn write_config(dir: &Path, name: &str, body: serde_json::Value) -> std::path::PathBuf {
    let path = dir.join(name);
    fs::write(&path, serde_json::to_string_pretty(&body).unwrap()).unwrap();
    path
}

fn synthetic_protocol() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    // 50 writers for evaluation plus 50 disjoint writers for negatives and
    // hyper-parameter selection.
    let all = generate_synthetic(&SyntheticConfig {
        writers: 100,
        gallery_size_range: (10, 10),
        dim: 32,
        cluster_spread: 1.0,
        seed: 7,
    })
    .map_err(|e| e.to_string())?;
    let (train, test) = all.split_writers(50).map_err(|e| e.to_string())?;
    save_embeddings(&train, dir.path().join("train.csv"), Format::Csv).map_err(|e| e.to_string())?;
    save_embeddings(&test, dir.path().join("test.csv"), Format::Csv).map_err(|e| e.to_string())?;
    let shared = serde_json::json!({
        "train": "train.csv",
        "test": "test.csv",
        "preprocess": [{"step": "l2"}],
        "seed": 7,
    });
    let with = |extra: serde_json::Value| {
        let mut v = shared.clone();
        v.as_object_mut().unwrap().extend(extra.as_object().unwrap().clone());
        v
    };
    let load = |name: &str, body: serde_json::Value, out: &str| -> Result<RunConfig, String> {
        let mut c = RunConfig::load(write_config(dir.path(), name, body)).map_err(|e| e.to_string())?;
        c.out = Some(dir.path().join(out));
        Ok(c)
    };

    let sweep_cfg = load("sweep.json", with(serde_json::json!({"strategy": "jaccard"})), "sweep")?;
    let best = pipeline::sweep(&sweep_cfg).map_err(|e| e.to_string())?.best;

    let jac_cfg = load(
        "jaccard.json",
        with(serde_json::json!({"strategy": "jaccard", "base": "cosine", "k": best.k, "lambda": best.lambda})),
        "jaccard",
    )?;
    let jac = pipeline::run(&jac_cfg).map_err(|e| e.to_string())?;
    let cosine = jac.baseline.clone().ok_or("missing cosine baseline")?;

    let pair_cfg = load("pair.json", with(serde_json::json!({"strategy": "pair", "k": best.k})), "pair")?;
    let pair = pipeline::run(&pair_cfg).map_err(|e| e.to_string())?;
    let esvm = pair.baseline.clone().ok_or("missing ESVM baseline")?;

    let summary = format!(
        "k={} lambda={}: cosine mAP {:.2}, Jaccard {:.2}; ESVM {:.2}/{:.1}, pair {:.2}/{:.1} (mAP/Top-1)",
        best.k, best.lambda, cosine.map, jac.method.map, esvm.map, esvm.top1, pair.method.map, pair.method.top1
    );
    ensure!(cosine.map > 0.0 && cosine.map < 100.0, "(a) degenerate baseline: {summary}");
    ensure!(jac.method.map - cosine.map >= 1.0, "(b) Jaccard gain below 1 point: {summary}");
    ensure!(pair.method.map > esvm.map, "(c) pair mAP not above ESVM: {summary}");
    ensure!(pair.method.top1 >= esvm.top1, "(c) pair Top-1 below ESVM: {summary}");
    Ok(summary)
}

fn esvm_correctness() -> Check {
    let mut r = rng(7);
    let config = SvmConfig::default();
    let toys = 40;
    for t in 0..toys {
        let dim = r.random_range(2..=8);
        // Separated along a random unit direction u: positives at u.x >= 1,
        // negatives at u.x <= -1.
        let mut u: Vec<f64> = (0..dim).map(|_| r.random::<f64>() - 0.5).collect();
        let norm = u.iter().map(|x| x * x).sum::<f64>().sqrt();
        u.iter_mut().for_each(|x| *x /= norm);
        let point = |r: &mut rand_chacha::ChaCha8Rng, side: f64| -> Vec<f64> {
            let mut v: Vec<f64> = (0..dim).map(|_| r.random::<f64>() * 2.0 - 1.0).collect();
            let along: f64 = v.iter().zip(&u).map(|(a, b)| a * b).sum();
            let shift = side * (1.0 + r.random::<f64>()) - along;
            v.iter_mut().zip(&u).for_each(|(x, ui)| *x += shift * ui);
            v
        };
        let negatives: Vec<Vec<f64>> = (0..r.random_range(5..60)).map(|_| point(&mut r, -1.0)).collect();
        let positive = point(&mut r, 1.0);
        let model = train(&PositiveSet::single(positive.clone()), &negatives, &config).map_err(|e| e.to_string())?;
        let score = model.decision(&positive);
        ensure!(
            negatives.iter().all(|n| model.decision(n) < score),
            "toy {t}: a negative outranks the positive"
        );
        let f = model.to_feature().map_err(|e| e.to_string())?;
        let fnorm = f.iter().map(|x| x * x).sum::<f64>().sqrt();
        ensure!(close(fnorm, 1.0, 1e-6), "toy {t}: feature norm {fnorm}");
        ensure!(
            model.objective_trace.windows(2).all(|w| w[1] <= w[0]),
            "toy {t}: objective increased"
        );

        let to_set = |vs: &[Vec<f64>], tag: &str| {
            let samples = vs
                .iter()
                .enumerate()
                .map(|(i, v)| Sample::new(format!("{tag}{i}"), format!("{tag}{i}"), v.iter().map(|&x| x as f32).collect()))
                .collect();
            EmbeddingSet::new(samples, Split::Test).unwrap()
        };
        let feats = esvm_feature_transform(&to_set(&[positive], "p"), &to_set(&negatives, "n"), &config)
            .map_err(|e| e.to_string())?;
        for s in feats.samples() {
            let n = s.vector_f64().iter().map(|x| x * x).sum::<f64>().sqrt();
            ensure!(close(n, 1.0, 1e-6), "toy {t}: transformed feature norm {n}");
        }
    }
    Ok(format!("{toys} separable toys"))
}

fn csv_bytes(r: &Ranking) -> Vec<u8> {
    let mut buf = Vec::new();
    r.write_csv(&mut buf).unwrap();
    buf
}

fn qe_fallback() -> Check {
    // Each sample's nearest neighbour is the next one around a cycle, so no
    // pair is mutual at k = 1.
    let n = 7;
    let ids: Vec<String> = (0..n).map(|i| format!("q{i}")).collect();
    let mut values = vec![0.0; n * n];
    for q in 0..n {
        for c in 0..n {
            values[q * n + c] = match (c + n - q) % n {
                0 => 0.0,
                1 => 0.1,
                s => 0.5 + 0.01 * s as f64,
            };
        }
    }
    let d = DistanceMatrix::new(ids.clone(), ids.clone(), values, Metric::Cosine).map_err(|e| e.to_string())?;
    let initial = rank(&d);
    let rs = k_reciprocal_sets(&initial, 1).map_err(|e| e.to_string())?;
    ensure!(rs.iter().all(|s| s.is_empty()), "constructed sets are not empty");

    let mut r = rng(8);
    let raw = EmbeddingSet::new(
        ids.iter()
            .map(|id| Sample::new(id.clone(), id.clone(), (0..4).map(|_| r.random::<f32>() - 0.5).collect()))
            .collect(),
        Split::Test,
    )
    .map_err(|e| e.to_string())?;
    let negatives = EmbeddingSet::new(
        (0..10)
            .map(|i| Sample::new(format!("n{i}"), format!("n{i}"), (0..4).map(|_| r.random::<f32>() - 0.5).collect()))
            .collect(),
        Split::Train,
    )
    .map_err(|e| e.to_string())?;
    let features = esvm_feature_transform(&raw, &negatives, &SvmConfig::default()).map_err(|e| e.to_string())?;
    let inputs = QeInputs {
        raw: &raw,
        features: &features,
        negatives: &negatives,
    };
    let before = csv_bytes(&initial);
    for mode in [QeMode::Pair, QeMode::Triple, QeMode::Aqe] {
        let out = qe_rerank(&inputs, &initial, &d, 1, mode, &SvmConfig::default()).map_err(|e| e.to_string())?;
        ensure!(out == initial, "{mode}: ranking changed");
        ensure!(csv_bytes(&out) == before, "{mode}: serialized ranking changed");
    }
    Ok("pair, triple and aqe return the initial ranking byte for byte".into())
}

fn run_cli(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_rerank"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    ensure!(
        out.status.success(),
        "rerank {}: {}",
        args.join(" "),
        String::from_utf8_lossy(&out.stderr)
    );
    Ok(())
}

fn dir_bytes(dir: &Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .map_err(|e| e.to_string())?
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    Ok(files)
}

fn determinism() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let p = |s: &str| dir.path().join(s).to_string_lossy().into_owned();
    run_cli(&[
        "synth", "--writers", "40", "--gallery", "4:6", "--dim", "16", "--spread", "0.9", "--seed", "3",
        "--train-writers", "20", "--train-out", &p("train.bin"), "--out", &p("test.csv"),
    ])?;
    let mut compared = 0;
    for (name, strategy, command) in [("triple", "triple", "run"), ("jaccard", "jaccard", "run"), ("sweep", "jaccard", "sweep")] {
        let config = write_config(
            dir.path(),
            &format!("{name}.json"),
            serde_json::json!({
                "train": "train.bin",
                "test": "test.csv",
                "preprocess": [{"step": "power"}, {"step": "pca", "dim": 12}, {"step": "l2"}],
                "strategy": strategy,
                "k": 4,
                "lambda": 0.3,
                "seed": 11,
                "repeats": 2,
                "sweep": {"k_grid": [2, 4], "lambda_grid": [0.0, 0.5, 1.0], "on": "test", "base": "esvm"},
            }),
        );
        let config = config.to_string_lossy().into_owned();
        let (a, b, c) = (p(&format!("{name}-1")), p(&format!("{name}-4")), p(&format!("{name}-m")));
        run_cli(&["--threads", "1", command, "--config", &config, "--out", &a])?;
        run_cli(&["--threads", "4", command, "--config", &config, "--out", &b])?;
        let manifest = format!("{a}/manifest.json");
        run_cli(&["--threads", "4", command, "--config", &manifest, "--out", &c])?;
        let reference = dir_bytes(Path::new(&a))?;
        ensure!(reference.len() >= 3, "{name}: too few outputs");
        ensure!(dir_bytes(Path::new(&b))? == reference, "{name}: 1 vs 4 threads differ");
        ensure!(dir_bytes(Path::new(&c))? == reference, "{name}: rerun from manifest differs");
        compared += reference.len();
    }
    Ok(format!("{compared} output files identical across threads 1/4 and manifest reruns"))
}

fn sweep_shape() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let all = generate_synthetic(&SyntheticConfig {
        writers: 60,
        gallery_size_range: (3, 8),
        dim: 16,
        cluster_spread: 1.0,
        seed: 10,
    })
    .map_err(|e| e.to_string())?;
    let (train, test) = all.split_writers(30).map_err(|e| e.to_string())?;
    save_embeddings(&train, dir.path().join("train.csv"), Format::Csv).map_err(|e| e.to_string())?;
    save_embeddings(&test, dir.path().join("test.csv"), Format::Csv).map_err(|e| e.to_string())?;
    let path = write_config(
        dir.path(),
        "c.json",
        serde_json::json!({"train": "train.csv", "test": "test.csv", "strategy": "jaccard"}),
    );
    let mut config = RunConfig::load(path).map_err(|e| e.to_string())?;
    config.out = Some(dir.path().join("out"));
    let report = pipeline::sweep(&config).map_err(|e| e.to_string())?;
    let g = &report.grid;
    let cells = g.cells().count();
    ensure!(cells == 66, "{cells} cells");
    let rows = fs::read_to_string(dir.path().join("out/sweep.csv")).map_err(|e| e.to_string())?;
    ensure!(rows.lines().count() == 67, "sweep.csv has {} lines", rows.lines().count());
    let one = g.lambda_values.iter().position(|&l| l == 1.0).ok_or("no lambda = 1 column")?;
    for (k, row) in g.k_values.iter().zip(&g.map) {
        ensure!(row[one].to_bits() == g.baseline_map.to_bits(), "k={k}: lambda=1 cell {} != {}", row[one], g.baseline_map);
    }
    Ok(format!("{cells} cells, lambda=1 column = baseline {:.6}", g.baseline_map))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("C1", "lambda-identity", 5, lambda_identity),
        ("C2", "oracle equivalence", 30, oracle_equivalence),
        ("C3", "Jaccard bounds and symmetry", 5, jaccard_bounds),
        ("C4", "k-reciprocal laws", 10, reciprocal_laws),
        ("C5", "metric laws", 10, metric_laws),
        ("C6", "synthetic protocol", 120, synthetic_protocol),
        ("C7", "ESVM correctness", 10, esvm_correctness),
        ("C8", "query expansion fallback", 10, qe_fallback),
        ("C9", "determinism", 120, determinism),
        ("C10", "sweep shape", 60, sweep_shape),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (id, name, limit, f) in criteria {
        let start = Instant::now();
        let result = panic::catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let elapsed = start.elapsed();
        let result = match result {
            Ok(msg) if elapsed > Duration::from_secs(limit) => Err(format!("{msg}; over the {limit} s limit")),
            other => other,
        };
        let (tag, msg) = match &result {
            Ok(m) => ("PASS", m),
            Err(m) => ("FAIL", m),
        };
        println!("[{tag}] {id} {name} ({:.2} s / {limit} s): {msg}", elapsed.as_secs_f64());
        failed += result.is_err() as usize;
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
    println!("all criteria passed");
}
