//! Config-driven runs: preprocessing, baseline ranking, re-ranking,
//! evaluation and sweeps, with every output written to one directory.

use std::fmt;
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{
    check_writer_disjoint, l2_normalize, load_embeddings, power_normalize, EmbeddingSet, Format, Split,
    WhiteningModel,
};
use crate::error::{Error, Result};
use crate::eval::{
    aggregate, default_k_grid, default_lambda_grid, evaluate, format_table, sweep_jaccard,
    sweep_query_expansion, EvalReport, Relevance, SweepCell, SweepGrid,
};
use crate::expansion::{qe_rerank, QeInputs, QeMode};
use crate::jaccard::{jaccard_rerank, RerankConfig, DEFAULT_EPSILON};
use crate::ranking::{cosine_distances, rank, DistanceMatrix, Ranking};
use crate::svm::{esvm_feature_transform, SvmConfig};

pub const TOOL_NAME: &str = env!("CARGO_PKG_NAME");
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Cosine,
    Esvm,
    Jaccard,
    Pair,
    Triple,
    Aqe,
}

impl Strategy {
    fn qe_mode(self) -> Option<QeMode> {
        match self {
            Strategy::Pair => Some(QeMode::Pair),
            Strategy::Triple => Some(QeMode::Triple),
            Strategy::Aqe => Some(QeMode::Aqe),
            _ => None,
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).expect("unit enum serializes");
        f.write_str(s.as_str().expect("string tag"))
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| Error::Config(format!("unknown strategy `{s}`")))
    }
}

/// Distance behind the initial ranking.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Base {
    Cosine,
    Esvm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "step", rename_all = "lowercase")]
pub enum PreprocessStep {
    /// Signed square root.
    Power,
    L2,
    /// PCA whitening fitted on the train split.
    Pca { dim: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepStrategy {
    Jaccard,
    Pair,
    Triple,
    Aqe,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub k_grid: Vec<usize>,
    pub lambda_grid: Vec<f64>,
    /// Split the sweep ranks; hyper-parameters are normally estimated on train.
    pub on: Split,
    pub base: Base,
    pub strategy: SweepStrategy,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            k_grid: default_k_grid(),
            lambda_grid: default_lambda_grid(),
            on: Split::Train,
            base: Base::Cosine,
            strategy: SweepStrategy::Jaccard,
        }
    }
}

fn default_repeats() -> usize {
    1
}

fn default_epsilon() -> f64 {
    DEFAULT_EPSILON
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train: Option<PathBuf>,
    pub test: PathBuf,
    #[serde(default)]
    pub preprocess: Vec<PreprocessStep>,
    pub strategy: Strategy,
    /// Initial ranking for `jaccard`; defaults to `esvm` when a train split
    /// is given, `cosine` otherwise. Query expansion always uses `esvm`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base: Option<Base>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default)]
    pub svm: SvmConfig,
    /// Root seed; every SVM seed is derived from it.
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    /// Not serialized, so outputs do not depend on where they are written.
    #[serde(default, skip_serializing)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub sweep: SweepConfig,
}

/// Written to every output directory; loadable again as a config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub config: RunConfig,
    pub svm_seeds: Vec<u64>,
}

impl RunConfig {
    /// Reads a config or a manifest; relative paths resolve against the
    /// file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
        let mut config: RunConfig = if value.get("config").is_some() && value.get("tool").is_some() {
            let m: Manifest = serde_json::from_value(value).map_err(|e| Error::Config(e.to_string()))?;
            m.config
        } else {
            serde_json::from_value(value).map_err(|e| Error::Config(e.to_string()))?
        };
        let dir = path.parent().unwrap_or_else(|| Path::new("."));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        };
        resolve(&mut config.test);
        if let Some(t) = config.train.as_mut() {
            resolve(t);
        }
        if let Some(o) = config.out.as_mut() {
            resolve(o);
        }
        Ok(config)
    }

    fn base(&self) -> Base {
        match (self.strategy, self.base) {
            (Strategy::Cosine, _) => Base::Cosine,
            (Strategy::Jaccard, Some(b)) => b,
            (Strategy::Jaccard, None) if self.train.is_none() => Base::Cosine,
            _ => Base::Esvm,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let need = |what: &str| Err(Error::Config(format!("strategy `{}` requires {what}", self.strategy)));
        match self.strategy {
            Strategy::Jaccard if self.k.is_none() || self.lambda.is_none() => return need("k and lambda"),
            Strategy::Pair | Strategy::Triple | Strategy::Aqe if self.k.is_none() => return need("k"),
            _ => {}
        }
        if self.base() == Base::Esvm && self.train.is_none() {
            return need("a train split (ESVM negatives)");
        }
        if self.preprocess.iter().any(|s| matches!(s, PreprocessStep::Pca { .. })) && self.train.is_none() {
            return Err(Error::Config("pca preprocessing requires a train split".into()));
        }
        if self.repeats == 0 {
            return Err(Error::Config("repeats must be >= 1".into()));
        }
        if let Some(k) = self.k {
            if k == 0 {
                return Err(Error::Config("k must be >= 1".into()));
            }
        }
        if let Some(l) = self.lambda {
            if !(0.0..=1.0).contains(&l) {
                return Err(Error::Config(format!("lambda must be in [0, 1], got {l}")));
            }
        }
        self.svm.validate()
    }

    /// One SVM seed per repeat, drawn from the root seed.
    pub fn svm_seeds(&self) -> Vec<u64> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        (0..self.repeats).map(|_| rng.next_u64()).collect()
    }

    fn out_dir(&self) -> Result<&Path> {
        self.out
            .as_deref()
            .ok_or_else(|| Error::Config("no output directory given".into()))
    }

    pub fn manifest(&self) -> Manifest {
        Manifest {
            tool: TOOL_NAME.to_string(),
            version: TOOL_VERSION.to_string(),
            config: self.clone(),
            svm_seeds: self.svm_seeds(),
        }
    }
}

/// Train and test splits after preprocessing.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub train: Option<EmbeddingSet>,
    pub test: EmbeddingSet,
}

pub fn prepare(config: &RunConfig) -> Result<Prepared> {
    let mut test = load_embeddings(&config.test, Format::from_path(&config.test))?.with_split(Split::Test);
    let mut train = match &config.train {
        Some(p) => Some(load_embeddings(p, Format::from_path(p))?.with_split(Split::Train)),
        None => None,
    };
    if let Some(t) = &train {
        check_writer_disjoint(t, &test)?;
        if t.dim() != test.dim() {
            return Err(Error::Shape {
                expected: test.dim(),
                found: t.dim(),
            });
        }
    }
    for step in &config.preprocess {
        match step {
            PreprocessStep::Power => {
                test = power_normalize(&test);
                train = train.map(|t| power_normalize(&t));
            }
            PreprocessStep::L2 => {
                test = l2_normalize(&test)?;
                train = train.map(|t| l2_normalize(&t)).transpose()?;
            }
            PreprocessStep::Pca { dim } => {
                let t = train.as_ref().ok_or_else(|| Error::Config("pca requires train".into()))?;
                let model = WhiteningModel::fit(t, *dim)?;
                test = model.apply(&test)?;
                train = Some(model.apply(t)?);
            }
        }
    }
    Ok(Prepared { train, test })
}

/// A ranking with the distances and features it came from.
struct Baseline {
    distances: DistanceMatrix,
    ranking: Ranking,
    features: Option<EmbeddingSet>,
}

fn baseline(set: &EmbeddingSet, negatives: Option<&EmbeddingSet>, base: Base, svm: &SvmConfig) -> Result<Baseline> {
    let features = match base {
        Base::Cosine => None,
        Base::Esvm => {
            let neg = negatives.ok_or_else(|| Error::Config("ESVM needs a train split".into()))?;
            Some(esvm_feature_transform(set, neg, svm)?)
        }
    };
    let distances = cosine_distances(features.as_ref().unwrap_or(set), features.as_ref().unwrap_or(set))?;
    let ranking = rank(&distances);
    Ok(Baseline {
        distances,
        ranking,
        features,
    })
}

fn base_name(base: Base) -> &'static str {
    match base {
        Base::Cosine => "Cosine",
        Base::Esvm => "ESVM-FE",
    }
}

fn method_name(config: &RunConfig) -> String {
    let k = config.k.unwrap_or(0);
    match config.strategy {
        Strategy::Cosine => "Cosine".into(),
        Strategy::Esvm => "ESVM-FE".into(),
        Strategy::Jaccard => format!("Jaccard(k={k},lambda={})", config.lambda.unwrap_or(1.0)),
        Strategy::Pair => format!("krNN-P(k={k})"),
        Strategy::Triple => format!("krNN-T(k={k})"),
        Strategy::Aqe => format!("AQE(k={k})"),
    }
}

struct RunResult {
    ranking: Ranking,
    report: EvalReport,
    baseline: Option<EvalReport>,
}

fn run_once(config: &RunConfig, data: &Prepared, relevance: &Relevance, svm: &SvmConfig) -> Result<RunResult> {
    let base = config.base();
    let b = baseline(&data.test, data.train.as_ref(), base, svm)?;
    let reranked = match config.strategy {
        Strategy::Cosine | Strategy::Esvm => None,
        Strategy::Jaccard => {
            let rc = RerankConfig {
                k: config.k.expect("validated"),
                lambda: config.lambda.expect("validated"),
                epsilon: config.epsilon,
            };
            Some(jaccard_rerank(&b.ranking, &b.distances, &rc)?)
        }
        s => {
            let mode = s.qe_mode().expect("query expansion strategy");
            let inputs = QeInputs {
                raw: &data.test,
                features: b.features.as_ref().expect("esvm base"),
                negatives: data.train.as_ref().expect("validated"),
            };
            Some(qe_rerank(&inputs, &b.ranking, &b.distances, config.k.expect("validated"), mode, svm)?)
        }
    };
    let base_report = evaluate(&b.ranking, relevance, base_name(base))?;
    Ok(match reranked {
        None => RunResult {
            ranking: b.ranking,
            report: base_report,
            baseline: None,
        },
        Some(r) => RunResult {
            report: evaluate(&r, relevance, &method_name(config))?,
            ranking: r,
            baseline: Some(base_report),
        },
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub method: EvalReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub baseline: Option<EvalReport>,
    pub runs: Vec<EvalReport>,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn create_out(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn sidecar(config: &RunConfig) -> serde_json::Value {
    use serde_json::json;
    match config.strategy {
        Strategy::Cosine => json!({ "strategy": "cosine" }),
        Strategy::Esvm => json!({ "strategy": "esvm", "svm": config.svm }),
        Strategy::Jaccard => json!({
            "strategy": "jaccard",
            "base": config.base(),
            "k": config.k,
            "lambda": config.lambda,
            "epsilon": config.epsilon,
        }),
        s => json!({
            "strategy": s,
            "mode": s.qe_mode(),
            "k": config.k,
            "svm": config.svm,
            "candidate_features": "esvm",
        }),
    }
}

/// Runs the configured strategy `repeats` times (SVM seeds differ per run)
/// and writes `ranking.csv`, `report.json`, `report.txt`, `sidecar.json` and
/// `manifest.json`. The ranking file holds the first run.
pub fn run(config: &RunConfig) -> Result<RunReport> {
    config.validate()?;
    let out = config.out_dir()?.to_path_buf();
    let data = prepare(config)?;
    let relevance = Relevance::from_writers(&data.test, &data.test);

    let mut runs = Vec::with_capacity(config.repeats);
    let mut first: Option<RunResult> = None;
    for seed in config.svm_seeds() {
        let result = run_once(config, &data, &relevance, &config.svm.with_seed(seed))?;
        runs.push(result.report.clone());
        if first.is_none() {
            first = Some(result);
        }
    }
    let first = first.expect("repeats >= 1");
    let mut method = aggregate(&runs)?;
    method.config = serde_json::to_value(config)?;
    let report = RunReport {
        method,
        baseline: first.baseline.clone(),
        runs,
    };

    create_out(&out)?;
    let ranking_path = out.join("ranking.csv");
    let file = fs::File::create(&ranking_path).map_err(|e| Error::io(&ranking_path, e))?;
    first.ranking.write_csv(BufWriter::new(file))?;
    write_json(&out.join("report.json"), &report)?;
    let mut rows: Vec<EvalReport> = report.baseline.iter().cloned().collect();
    rows.push(report.method.clone());
    let txt = out.join("report.txt");
    fs::write(&txt, format_table(&rows)).map_err(|e| Error::io(&txt, e))?;
    write_json(&out.join("sidecar.json"), &sidecar(config))?;
    write_json(&out.join("manifest.json"), &config.manifest())?;
    Ok(report)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepReport {
    pub grid: SweepGrid,
    pub best: SweepCell,
}

/// Runs the configured (k, lambda) sweep and writes `sweep.csv`,
/// `sweep.json` and `manifest.json`. Fails if any `lambda = 1` cell differs
/// from the initial ranking's mAP.
pub fn sweep(config: &RunConfig) -> Result<SweepReport> {
    config.svm.validate()?;
    if config.repeats == 0 {
        return Err(Error::Config("repeats must be >= 1".into()));
    }
    let out = config.out_dir()?.to_path_buf();
    let sc = &config.sweep;
    let data = prepare(config)?;
    let svm = config.svm.with_seed(config.svm_seeds()[0]);

    let (set, negatives) = match sc.on {
        Split::Train => (
            data.train
                .as_ref()
                .ok_or_else(|| Error::Config("sweep on train requires a train split".into()))?,
            None,
        ),
        Split::Test => (&data.test, data.train.as_ref()),
    };
    let relevance = Relevance::from_writers(set, set);
    let b = baseline(set, negatives, sc.base, &svm)?;
    let grid = match sc.strategy {
        SweepStrategy::Jaccard => sweep_jaccard(&b.ranking, &b.distances, &relevance, &sc.k_grid, &sc.lambda_grid)?,
        qe => {
            let mode = match qe {
                SweepStrategy::Pair => QeMode::Pair,
                SweepStrategy::Triple => QeMode::Triple,
                _ => QeMode::Aqe,
            };
            let (features, negatives) = match (&b.features, negatives) {
                (Some(f), Some(n)) => (f, n),
                _ => {
                    return Err(Error::Config(
                        "query expansion sweeps need `on: test` with `base: esvm`".into(),
                    ))
                }
            };
            let inputs = QeInputs {
                raw: set,
                features,
                negatives,
            };
            sweep_query_expansion(
                &inputs,
                &b.ranking,
                &b.distances,
                &relevance,
                &sc.k_grid,
                &sc.lambda_grid,
                mode,
                &svm,
            )?
        }
    };
    grid.check_lambda_one()?;
    let best = grid.argmax();
    let report = SweepReport { grid, best };

    create_out(&out)?;
    let csv_path = out.join("sweep.csv");
    let file = fs::File::create(&csv_path).map_err(|e| Error::io(&csv_path, e))?;
    report.grid.write_csv(BufWriter::new(file))?;
    write_json(&out.join("sweep.json"), &report)?;
    write_json(&out.join("manifest.json"), &config.manifest())?;
    Ok(report)
}
