use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use krnn_rerank::corpus::{
    generate_synthetic, load_embeddings, save_embeddings, EmbeddingSet, Format, SyntheticConfig,
};
use krnn_rerank::eval::format_table;
use krnn_rerank::pipeline::{self, RunConfig, Strategy};
use krnn_rerank::{Error, Result};

#[derive(Parser)]
#[command(name = "rerank", version, about = "k-reciprocal re-ranking and query expansion for embedding retrieval")]
struct Cli {
    /// Worker threads (default: all cores). Outputs do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate an embedding file, print a summary, optionally convert it.
    Ingest {
        input: PathBuf,
        /// Input format; inferred from the extension when omitted.
        #[arg(long, value_parser = parse_format)]
        format: Option<Format>,
        #[arg(long, conflicts_with = "to_csv")]
        to_binary: Option<PathBuf>,
        #[arg(long)]
        to_csv: Option<PathBuf>,
    },
    /// Rank, re-rank and evaluate as described by a config file.
    Run(RunArgs),
    /// Evaluate mAP over a (k, lambda) grid.
    Sweep(RunArgs),
    /// Write a synthetic corpus of Gaussian writer clusters.
    Synth {
        #[arg(long)]
        writers: usize,
        /// Gallery size per writer: `N` or `MIN:MAX`.
        #[arg(long, default_value = "5", value_parser = parse_range)]
        gallery: (usize, usize),
        #[arg(long)]
        dim: usize,
        #[arg(long, default_value_t = 1.0)]
        spread: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the first N writers to `--train-out` instead.
        #[arg(long, requires = "train_out")]
        train_writers: Option<usize>,
        #[arg(long)]
        train_out: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    strategy: Option<String>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    repeats: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl RunArgs {
    fn config(&self) -> Result<RunConfig> {
        let mut c = RunConfig::load(&self.config)?;
        if let Some(s) = &self.strategy {
            c.strategy = s.parse::<Strategy>()?;
        }
        c.k = self.k.or(c.k);
        c.lambda = self.lambda.or(c.lambda);
        c.seed = self.seed.unwrap_or(c.seed);
        c.repeats = self.repeats.unwrap_or(c.repeats);
        if let Some(o) = &self.out {
            c.out = Some(o.clone());
        }
        Ok(c)
    }
}

fn parse_format(s: &str) -> std::result::Result<Format, String> {
    match s {
        "csv" => Ok(Format::Csv),
        "binary" | "bin" => Ok(Format::Binary),
        _ => Err(format!("unknown format `{s}` (csv or binary)")),
    }
}

fn parse_range(s: &str) -> std::result::Result<(usize, usize), String> {
    let num = |x: &str| x.trim().parse::<usize>().map_err(|e| format!("`{x}`: {e}"));
    match s.split_once(':') {
        Some((a, b)) => Ok((num(a)?, num(b)?)),
        None => num(s).map(|n| (n, n)),
    }
}

fn summary(set: &EmbeddingSet) -> Result<String> {
    let p = set.gallery_profile()?;
    Ok(format!(
        "samples: {}\ndim: {}\nwriters: {}\ngallery size: min {} / median {} / max {}",
        set.len(),
        set.dim(),
        p.writers(),
        p.min,
        p.median,
        p.max
    ))
}

fn ingest(input: &Path, format: Option<Format>, to_binary: Option<&Path>, to_csv: Option<&Path>) -> Result<()> {
    let set = load_embeddings(input, format.unwrap_or_else(|| Format::from_path(input)))?;
    println!("{}", summary(&set)?);
    if let Some(p) = to_binary {
        save_embeddings(&set, p, Format::Binary)?;
        println!("wrote {}", p.display());
    }
    if let Some(p) = to_csv {
        save_embeddings(&set, p, Format::Csv)?;
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::Ingest {
            input,
            format,
            to_binary,
            to_csv,
        } => ingest(&input, format, to_binary.as_deref(), to_csv.as_deref()),
        Command::Run(args) => {
            let config = args.config()?;
            let report = pipeline::run(&config)?;
            let mut rows: Vec<_> = report.baseline.into_iter().collect();
            rows.push(report.method);
            print!("{}", format_table(&rows));
            Ok(())
        }
        Command::Sweep(args) => {
            let config = args.config()?;
            let report = pipeline::sweep(&config)?;
            println!(
                "{} cells, baseline mAP {:.4}",
                report.grid.k_values.len() * report.grid.lambda_values.len(),
                report.grid.baseline_map
            );
            println!(
                "best: k = {}, lambda = {}, mAP = {:.4}",
                report.best.k, report.best.lambda, report.best.map
            );
            Ok(())
        }
        Command::Synth {
            writers,
            gallery,
            dim,
            spread,
            seed,
            train_writers,
            train_out,
            out,
        } => {
            let set = generate_synthetic(&SyntheticConfig {
                writers,
                gallery_size_range: gallery,
                dim,
                cluster_spread: spread,
                seed,
            })?;
            match (train_writers, train_out) {
                (Some(n), Some(train_path)) => {
                    let (train, test) = set.split_writers(n)?;
                    save_embeddings(&train, &train_path, Format::from_path(&train_path))?;
                    save_embeddings(&test, &out, Format::from_path(&out))?;
                    println!("train: {} samples -> {}", train.len(), train_path.display());
                    println!("test: {} samples -> {}", test.len(), out.display());
                }
                _ => {
                    save_embeddings(&set, &out, Format::from_path(&out))?;
                    println!("{}", summary(&set)?);
                }
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
