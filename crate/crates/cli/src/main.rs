//! Command-line front end: builds indexes, generates benchmarks, searches,
//! trains weights, evaluates runs, and inspects index internals.
//!
//! Exit codes: 0 on success, 1 with a one-line diagnostic on any runtime or
//! validation error, 2 on unknown commands or flags (usage errors).

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use tuplerank_core::corpus::{load_corpus, load_qrels};
use tuplerank_core::pipeline::{
    build_indexes, load_indexes, save_indexes, search_all, train, write_train_artifacts,
    BuildConfig, Model, SearchOptions, TrainConfig, DEFAULT_CANDIDATES, DEFAULT_CUTOFF,
};
use tuplerank_core::query::load_queries;
use tuplerank_core::ranking::load_weights;
use tuplerank_core::run_file::{entries_from_rankings, read_run, write_run};
use tuplerank_core::scoring::ScoringParams;
use tuplerank_core::synth::{generate, BenchmarkSpec};
use tuplerank_core::evaluation::evaluate;
use tuplerank_core::index::DEFAULT_WINDOW;

#[derive(Parser)]
#[command(
    name = "tuplerank",
    version,
    about = "Entity-relationship retrieval: index, search, train, evaluate"
)]
struct Cli {
    /// Cap the worker thread count (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build entity and relationship indexes from an annotated corpus.
    BuildIndex(BuildIndexArgs),
    /// Generate a synthetic benchmark (corpus, queries, qrels).
    GenBenchmark(GenBenchmarkArgs),
    /// Rank entity tuples for a query file and write a run file.
    Search(SearchArgs),
    /// Learn feature weights by cross-validated coordinate ascent.
    Train(TrainArgs),
    /// Score a run file against relevance judgments.
    Evaluate(EvaluateArgs),
    /// Dump meta-document statistics for one index key.
    Inspect(InspectArgs),
}

#[derive(Args)]
struct BuildIndexArgs {
    /// Annotated corpus (JSON lines).
    #[arg(long)]
    corpus: PathBuf,
    /// Output index directory.
    #[arg(long)]
    out: PathBuf,
    /// Also write every extraction as JSON lines to this file.
    #[arg(long)]
    dump_extractions: Option<PathBuf>,
    /// Unordered co-occurrence window width.
    #[arg(long, default_value_t = DEFAULT_WINDOW)]
    window: usize,
    /// Keep at most this many extractions per key.
    #[arg(long)]
    cap: Option<usize>,
    /// Additionally build the full-sentence pair index (required by base-r).
    #[arg(long)]
    full_sentence_pairs: bool,
}

#[derive(Args)]
struct GenBenchmarkArgs {
    #[arg(long)]
    seed: u64,
    /// Number of planted relationship facts (one query each).
    #[arg(long)]
    facts: usize,
    /// Number of entities.
    #[arg(long)]
    entities: usize,
    /// Number of documents.
    #[arg(long)]
    docs: usize,
    /// Background vocabulary size.
    #[arg(long, default_value_t = 500)]
    vocab: usize,
    /// Noise sentences appended per document.
    #[arg(long, default_value_t = 3)]
    noise: usize,
    /// Output directory (corpus.jsonl, queries.tsv, qrels.tsv).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    EfLm,
    EfBm25,
    ErdmLm,
    ErdmBm25,
    BaseEe,
    BaseE,
    BaseR,
}

impl From<ModelArg> for Model {
    fn from(m: ModelArg) -> Model {
        match m {
            ModelArg::EfLm => Model::EfLm,
            ModelArg::EfBm25 => Model::EfBm25,
            ModelArg::ErdmLm => Model::ErdmLm,
            ModelArg::ErdmBm25 => Model::ErdmBm25,
            ModelArg::BaseEe => Model::BaseEe,
            ModelArg::BaseE => Model::BaseE,
            ModelArg::BaseR => Model::BaseR,
        }
    }
}

#[derive(Args)]
struct ScoringOverrides {
    /// Dirichlet smoothing for entity meta-documents (default: avg length).
    #[arg(long)]
    mu_entity: Option<f64>,
    /// Dirichlet smoothing for relationship meta-documents (default: avg length).
    #[arg(long)]
    mu_relationship: Option<f64>,
    /// BM25 term-frequency saturation.
    #[arg(long)]
    k1: Option<f64>,
    /// BM25 length normalization.
    #[arg(long)]
    b: Option<f64>,
    /// Popularity share of the entity-relationship compatibility feature.
    #[arg(long)]
    alpha: Option<f64>,
}

impl ScoringOverrides {
    fn apply(&self, params: &mut ScoringParams) {
        if self.mu_entity.is_some() {
            params.mu_entity = self.mu_entity;
        }
        if self.mu_relationship.is_some() {
            params.mu_relationship = self.mu_relationship;
        }
        if let Some(k1) = self.k1 {
            params.k1 = k1;
        }
        if let Some(b) = self.b {
            params.b = b;
        }
        if let Some(alpha) = self.alpha {
            params.alpha = alpha;
        }
    }
}

#[derive(Args)]
struct SearchArgs {
    /// Index directory (as written by build-index).
    #[arg(long)]
    index: PathBuf,
    /// Query file (TSV: id, then alternating entity/relationship parts).
    #[arg(long)]
    queries: PathBuf,
    /// Ranking model.
    #[arg(long, value_enum)]
    model: ModelArg,
    /// Feature-weight file for erdm models (default: uniform).
    #[arg(long)]
    weights: Option<PathBuf>,
    /// Candidate depth per query part.
    #[arg(long, default_value_t = DEFAULT_CANDIDATES)]
    k: usize,
    /// Ranking cutoff.
    #[arg(long, default_value_t = DEFAULT_CUTOFF)]
    cutoff: usize,
    /// Run tag written to the output (default: the model name).
    #[arg(long)]
    tag: Option<String>,
    /// Output run file.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    scoring: ScoringOverrides,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    index: PathBuf,
    #[arg(long)]
    queries: PathBuf,
    #[arg(long)]
    qrels: PathBuf,
    /// Trainable model (erdm-lm or erdm-bm25).
    #[arg(long, value_enum)]
    model: ModelArg,
    /// Cross-validation fold count.
    #[arg(long, default_value_t = 5)]
    folds: usize,
    /// Seed for fold shuffling and restart initialization.
    #[arg(long)]
    seed: u64,
    /// Random restarts per optimization.
    #[arg(long, default_value_t = tuplerank_core::learning::DEFAULT_RESTARTS)]
    restarts: usize,
    /// Candidate depth per query part while collecting training candidates.
    #[arg(long, default_value_t = DEFAULT_CANDIDATES)]
    k: usize,
    /// Output directory (weights.json, fold_<i>.json, cv_report.tsv).
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    scoring: ScoringOverrides,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Run file to score.
    #[arg(long)]
    run: PathBuf,
    /// Relevance judgments (TSV: query id, tuple, grade).
    #[arg(long)]
    qrels: PathBuf,
    /// Also print one row per query.
    #[arg(long)]
    per_query: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum IndexKind {
    Entity,
    Relationship,
    RelationshipFull,
}

#[derive(Args)]
struct InspectArgs {
    #[arg(long)]
    index: PathBuf,
    /// Which index to read.
    #[arg(long, value_enum, default_value_t = IndexKind::Entity)]
    kind: IndexKind,
    /// Entity id, or pair written as A|B.
    #[arg(long)]
    key: String,
    /// How many of the most frequent terms to list.
    #[arg(long, default_value_t = 10)]
    top: usize,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            eprintln!("error: could not configure {threads} worker threads: {e}");
            return ExitCode::FAILURE;
        }
    }
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::BuildIndex(args) => build_index_cmd(args),
        Command::GenBenchmark(args) => gen_benchmark_cmd(args),
        Command::Search(args) => search_cmd(args),
        Command::Train(args) => train_cmd(args),
        Command::Evaluate(args) => evaluate_cmd(args),
        Command::Inspect(args) => inspect_cmd(args),
    }
}

fn build_index_cmd(args: BuildIndexArgs) -> Result<()> {
    let docs = load_corpus(&args.corpus)?;
    let cfg = BuildConfig {
        window: args.window,
        cap: args.cap,
        full_sentence_pairs: args.full_sentence_pairs,
    };
    let bundle = build_indexes(&docs, &cfg, args.dump_extractions.as_deref())?;
    save_indexes(&bundle, &args.out)?;
    println!(
        "indexed {} documents: {} entities, {} pairs{} -> {}",
        docs.len(),
        bundle.entity.docs.len(),
        bundle.relationship.docs.len(),
        match &bundle.relationship_full {
            Some(full) => format!(", {} full-sentence pairs", full.docs.len()),
            None => String::new(),
        },
        args.out.display()
    );
    Ok(())
}

fn gen_benchmark_cmd(args: GenBenchmarkArgs) -> Result<()> {
    let spec = BenchmarkSpec {
        seed: args.seed,
        num_entities: args.entities,
        num_facts: args.facts,
        vocab_size: args.vocab,
        noise_sentences: args.noise,
        num_docs: args.docs,
    };
    let bench = generate(&spec)?;
    let paths = bench.write_to_dir(&args.out)?;
    println!(
        "generated {} documents, {} queries, {} judged tuples -> {}",
        bench.documents.len(),
        bench.queries.len(),
        bench.qrels.values().map(Vec::len).sum::<usize>(),
        paths.corpus.parent().unwrap_or(&args.out).display()
    );
    Ok(())
}

fn search_cmd(args: SearchArgs) -> Result<()> {
    let bundle = load_indexes(&args.index)?;
    let queries = load_queries(&args.queries)?;
    let model: Model = args.model.into();
    let mut opts = SearchOptions::new(model);
    opts.k = args.k;
    opts.cutoff = args.cutoff;
    args.scoring.apply(&mut opts.params);
    if let Some(path) = &args.weights {
        opts.weights = load_weights(path)?;
    }
    let rankings = search_all(&bundle, &queries, &opts)?;
    let tag = args.tag.unwrap_or_else(|| model.name().to_string());
    let entries = entries_from_rankings(&rankings, &tag);
    write_run(&args.out, &entries)?;
    let retrieved: usize = rankings.iter().map(|(_, r)| r.len()).sum();
    println!(
        "ranked {} tuples over {} queries -> {}",
        retrieved,
        queries.len(),
        args.out.display()
    );
    Ok(())
}

fn train_cmd(args: TrainArgs) -> Result<()> {
    let model: Model = args.model.into();
    if !model.is_erdm() {
        bail!("model {model} is not trainable; choose erdm-lm or erdm-bm25");
    }
    let bundle = load_indexes(&args.index)?;
    let queries = load_queries(&args.queries)?;
    let qrels = load_qrels(&args.qrels)?;
    let mut params = ScoringParams::default();
    args.scoring.apply(&mut params);
    let cfg = TrainConfig {
        model,
        folds: args.folds,
        seed: args.seed,
        restarts: args.restarts,
        k: args.k,
        params,
    };
    let artifacts = train(&bundle, &queries, &qrels, &cfg)?;
    write_train_artifacts(&args.out, &artifacts)?;
    print!("{}", artifacts.cv.to_tsv());
    println!(
        "training MAP {:.6} -> {}",
        artifacts.full.map,
        args.out.display()
    );
    Ok(())
}

fn evaluate_cmd(args: EvaluateArgs) -> Result<()> {
    let run = read_run(&args.run)?;
    let qrels = load_qrels(&args.qrels)?;
    let report = evaluate(&run, &qrels)?;
    print!("{}", report.to_tsv(args.per_query));
    Ok(())
}

fn inspect_cmd(args: InspectArgs) -> Result<()> {
    let bundle = load_indexes(&args.index)?;
    match args.kind {
        IndexKind::Entity => {
            let doc = bundle
                .entity
                .docs
                .get(&args.key)
                .with_context(|| format!("entity {} is not in the index", args.key))?;
            print_metadoc("entity", &args.key, doc, args.top);
        }
        IndexKind::Relationship | IndexKind::RelationshipFull => {
            let (label, index) = match args.kind {
                IndexKind::Relationship => ("relationship", &bundle.relationship),
                _ => (
                    "relationship-full",
                    bundle.relationship_full.as_ref().with_context(|| {
                        "full-sentence pair index not present; rebuild with --full-sentence-pairs"
                            .to_string()
                    })?,
                ),
            };
            let pair = tuplerank_core::extraction::Pair::parse(&args.key)
                .with_context(|| format!("{} is not a valid A|B pair key", args.key))?;
            let doc = index
                .docs
                .get(&pair)
                .with_context(|| format!("pair {pair} is not in the index"))?;
            print_metadoc(label, &pair.to_string(), doc, args.top);
        }
    }
    Ok(())
}

fn print_metadoc(kind: &str, key: &str, doc: &tuplerank_core::index::MetaDoc, top: usize) {
    println!("kind\t{kind}");
    println!("key\t{key}");
    println!("length\t{}", doc.length);
    println!("distinct_terms\t{}", doc.tf.len());
    println!("ordered_bigrams\t{}", doc.tf_ordered.len());
    println!("window_pairs\t{}", doc.tf_window8.len());
    println!("source_docs\t{}", doc.source_docs.len());
    let mut terms: Vec<(&String, &u64)> = doc.tf.iter().collect();
    terms.sort_by(|a, b| b.1.cmp(a.1).then_with(|| a.0.cmp(b.0)));
    for (term, count) in terms.into_iter().take(top) {
        println!("term\t{term}\t{count}");
    }
}
