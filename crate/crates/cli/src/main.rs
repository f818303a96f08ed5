use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use log::{info, warn};

use factweave_core::backends::http::DEFAULT_TIMEOUT_MS;
use factweave_core::io::{
    generate_synthetic, load_corpus, load_documents, load_predictions, load_tasks, load_triples,
    pair_by_group, pair_triples, save_predictions, save_tasks, PairingOutput, SyntheticSpec,
};
use factweave_core::metrics::evaluate;
use factweave_core::pipeline::write_traces;
use factweave_core::{build_index, run_batch, BackendConfig, BatchOptions, Index, Report, RunConfig};

#[derive(Parser)]
#[command(name = "factweave", version, about = "Question-driven text fact transfer")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Retrieval index files.
    #[command(subcommand)]
    Index(IndexCommand),

    /// Rewrite every task's source text for its target topic.
    Transfer {
        #[arg(long)]
        tasks: PathBuf,
        #[arg(long)]
        corpus_dir: PathBuf,
        /// `mock` or the base URL of a model service. Overrides the config file.
        #[arg(long)]
        backend: Option<String>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long)]
        skip_on_error: bool,
        /// Worker threads (default: all cores).
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },

    /// Score predictions against the tasks' reference texts.
    Evaluate {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        tasks: PathBuf,
        #[arg(long)]
        corpus_dir: PathBuf,
        #[arg(long)]
        report: PathBuf,
    },

    /// Build transfer tasks from raw collections.
    #[command(subcommand)]
    Pairs(PairsCommand),

    /// Write a seeded synthetic benchmark (tasks, gold targets, corpora).
    Synth {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        attrs: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 1000)]
        vocab: usize,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

#[derive(Subcommand)]
enum IndexCommand {
    /// Embed a corpus file (or every corpus of a directory) into index files.
    Build {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value = "mock")]
        backend: String,
        /// Index file for a single corpus; a directory otherwise.
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum PairsCommand {
    /// Pair TSV relation triples that share a relation.
    FromTriples {
        #[arg(long)]
        triples: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Pair JSON-lines documents within their group.
    ByGroup {
        #[arg(long)]
        docs: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(command: Command) -> Result<ExitCode> {
    match command {
        Command::Index(IndexCommand::Build {
            corpus,
            backend,
            out,
        }) => index_build(&corpus, &backend, &out),
        Command::Transfer {
            tasks,
            corpus_dir,
            backend,
            config,
            trace,
            skip_on_error,
            threads,
            out,
        } => {
            let mut cfg = match &config {
                Some(p) => RunConfig::load(p)?,
                None => RunConfig::default(),
            };
            if let Some(flag) = &backend {
                cfg.backend = BackendConfig::from_flag(flag, cfg.backend.timeout_ms)?;
            }
            if threads == Some(0) {
                bail!("--threads must be positive");
            }
            transfer(
                &tasks,
                &corpus_dir,
                &cfg,
                trace.as_deref(),
                BatchOptions {
                    skip_on_error,
                    threads,
                },
                &out,
            )
        }
        Command::Evaluate {
            pred,
            tasks,
            corpus_dir,
            report,
        } => evaluate_cmd(&pred, &tasks, &corpus_dir, &report),
        Command::Pairs(PairsCommand::FromTriples { triples, seed, out }) => {
            let triples = load_triples(&triples)?;
            write_pairs(pair_triples(&triples, seed), &out)
        }
        Command::Pairs(PairsCommand::ByGroup { docs, seed, out }) => {
            let docs = load_documents(&docs)?;
            write_pairs(pair_by_group(&docs, seed), &out)
        }
        Command::Synth {
            n,
            attrs,
            seed,
            vocab,
            out_dir,
        } => {
            let bench = generate_synthetic(&SyntheticSpec {
                num_tasks: n,
                attrs_per_topic: attrs,
                vocab_size: vocab,
                rng_seed: seed,
            })?;
            bench.write_to_dir(&out_dir)?;
            info!("wrote {} synthetic tasks to {}", bench.tasks.len(), out_dir.display());
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn index_build(corpus: &Path, backend: &str, out: &Path) -> Result<ExitCode> {
    let backends = BackendConfig::from_flag(backend, DEFAULT_TIMEOUT_MS)?.build()?;
    let corpora = load_corpus(corpus)?;
    if corpora.is_empty() {
        bail!("no corpus found at {}", corpus.display());
    }
    let single = corpora.len() == 1;
    for c in corpora.iter() {
        let index: Index = build_index(c, backends.embed.as_ref())?;
        let path = if single {
            out.to_path_buf()
        } else {
            let name = factweave_core::io::corpus_file_name(c.corpus_ref());
            out.join(Path::new(&name).with_extension("fwix"))
        };
        let mut w = create(&path)?;
        index.write_to(&mut w)?;
        w.flush()?;
        info!(
            "{}: {} vectors of dimension {} -> {}",
            c.corpus_ref(),
            index.len(),
            index.dimension(),
            path.display()
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn transfer(
    tasks: &Path,
    corpus_dir: &Path,
    cfg: &RunConfig,
    trace: Option<&Path>,
    opts: BatchOptions,
    out: &Path,
) -> Result<ExitCode> {
    cfg.validate()?;
    let backends = cfg.backend.build()?;
    let tasks = load_tasks(tasks)?;
    let corpora = load_corpus(corpus_dir)?;
    let t0 = Instant::now();
    let result = run_batch::<f32>(&tasks, &corpora, &cfg.pipeline, &backends, &opts)?;
    info!(
        "{} task(s), {} failed, {} index build(s), {:.2}s",
        tasks.len(),
        result.failures.len(),
        result.index_builds,
        t0.elapsed().as_secs_f64()
    );
    save_predictions(out, &result.predictions)?;
    if let Some(path) = trace {
        write_traces(create(path)?, &result.traces)?;
    }
    if result.succeeded() {
        return Ok(ExitCode::SUCCESS);
    }
    for f in &result.failures {
        eprintln!("task {} failed: {}", f.task_id, f.message);
    }
    Ok(ExitCode::from(1))
}

fn evaluate_cmd(pred: &Path, tasks: &Path, corpus_dir: &Path, report: &Path) -> Result<ExitCode> {
    let preds: Vec<(String, String)> = load_predictions(pred)?
        .into_iter()
        .map(|p| (p.task_id, p.prediction))
        .collect();
    let tasks = load_tasks(tasks)?;
    let corpora = load_corpus(corpus_dir)?;
    let rep: Report = evaluate(&preds, &tasks, &corpora)?;
    let mut w = create(report)?;
    serde_json::to_writer_pretty(&mut w, &rep)?;
    w.write_all(b"\n")?;
    w.flush()?;
    println!("{}", serde_json::to_string(&rep.aggregate)?);
    Ok(ExitCode::SUCCESS)
}

fn write_pairs(out: PairingOutput, path: &Path) -> Result<ExitCode> {
    for w in &out.warnings {
        warn!("{w}");
    }
    save_tasks(path, &out.tasks)?;
    info!("wrote {} task(s) to {}", out.tasks.len(), path.display());
    Ok(ExitCode::SUCCESS)
}
