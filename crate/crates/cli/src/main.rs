//! `ckg`: file-based pipeline from a paper corpus to a knowledge graph,
//! embeddings, recommendations and evaluation reports.

mod config;
mod stages;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use ckg_core::ErrorKind;
use clap::{Args, Parser, Subcommand};

use config::PipelineConfig;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(ckg_core::Error),
}

impl From<ckg_core::Error> for CliError {
    fn from(e: ckg_core::Error) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Core(e) => match e.kind() {
                ErrorKind::Validation => 2,
                ErrorKind::Runtime => 3,
            },
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "ckg", version, about = "Scholarly knowledge graph pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    options: Options,
}

#[derive(Subcommand, Debug, Clone)]
pub enum Command {
    /// Load and validate the corpus, write a normalized copy
    Ingest,
    /// Normalize authors and concepts, link citations, emit graph input
    Curate,
    /// Build the property graph
    Build,
    /// Graph statistics
    Stats,
    /// Papers matching concepts AND topics, with their authors and institutions
    QueryConceptTopic {
        /// Concept names separated by ';'
        #[arg(long)]
        concepts: String,
        /// Topic labels separated by ';'
        #[arg(long)]
        topics: String,
    },
    /// Papers linked to concepts, ranked by in-corpus citations
    QueryCitationRank {
        /// Concept names separated by ';'
        #[arg(long)]
        concepts: String,
        #[arg(long, default_value_t = 10)]
        limit: usize,
    },
    /// Train TransE embeddings
    TrainKge,
    /// K-fold link-prediction validation
    ValidateKge,
    /// Document vectors from sentence vectors
    EmbedSemantic,
    /// Fuse semantic and KGE paper vectors
    Combine,
    /// Top-k similar papers for every paper
    Recommend,
    /// Metrics over every recommendation file present
    Evaluate,
    /// 2D projection of selected papers and their recommendations
    Svd,
    /// All stages in order
    Pipeline,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Ingest => "ingest",
            Command::Curate => "curate",
            Command::Build => "build",
            Command::Stats => "stats",
            Command::QueryConceptTopic { .. } => "query-concept-topic",
            Command::QueryCitationRank { .. } => "query-citation-rank",
            Command::TrainKge => "train-kge",
            Command::ValidateKge => "validate-kge",
            Command::EmbedSemantic => "embed-semantic",
            Command::Combine => "combine",
            Command::Recommend => "recommend",
            Command::Evaluate => "evaluate",
            Command::Svd => "svd",
            Command::Pipeline => "pipeline",
        }
    }
}

#[derive(Args, Debug, Default)]
struct Options {
    /// key=value file; command-line flags override it
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    corpus_dir: Option<String>,
    #[arg(long, global = true)]
    work_dir: Option<String>,
    #[arg(long, global = true)]
    seed: Option<String>,
    #[arg(long, global = true)]
    workers: Option<String>,
    /// Topic vocabulary, one label per line
    #[arg(long, global = true)]
    topics_file: Option<String>,
    /// Minimum concept-mention confidence
    #[arg(long, global = true)]
    threshold: Option<String>,
    #[arg(long, global = true)]
    min_fraction: Option<String>,
    #[arg(long, global = true)]
    flag_fraction: Option<String>,
    /// lowercase_strip | lowercase_strip_lemma
    #[arg(long, global = true)]
    normalization: Option<String>,
    #[arg(long, global = true)]
    dim: Option<String>,
    #[arg(long, global = true)]
    gamma: Option<String>,
    #[arg(long, global = true)]
    epochs: Option<String>,
    #[arg(long, global = true)]
    lr: Option<String>,
    #[arg(long, global = true)]
    negatives: Option<String>,
    #[arg(long, global = true)]
    batch_size: Option<String>,
    /// Relations left out of KGE training, e.g. "cites"
    #[arg(long, global = true)]
    exclude_relations: Option<String>,
    #[arg(long, global = true)]
    unit_norm: Option<String>,
    #[arg(long, global = true)]
    folds: Option<String>,
    #[arg(long, global = true)]
    semantic_dim: Option<String>,
    /// fallback | external
    #[arg(long, global = true)]
    semantic_source: Option<String>,
    /// Sections used for document vectors, e.g. "title;abstract"
    #[arg(long, global = true)]
    sections: Option<String>,
    #[arg(long, global = true)]
    w_sem: Option<String>,
    #[arg(long, global = true)]
    w_kge: Option<String>,
    #[arg(long, global = true)]
    k: Option<String>,
    /// semantic | kge | combined | random
    #[arg(long, global = true)]
    method: Option<String>,
}

impl Options {
    fn overrides(&self) -> BTreeMap<&'static str, String> {
        let pairs: [(&'static str, &Option<String>); 25] = [
            ("corpus-dir", &self.corpus_dir),
            ("work-dir", &self.work_dir),
            ("seed", &self.seed),
            ("workers", &self.workers),
            ("topics-file", &self.topics_file),
            ("threshold", &self.threshold),
            ("min-fraction", &self.min_fraction),
            ("flag-fraction", &self.flag_fraction),
            ("normalization", &self.normalization),
            ("dim", &self.dim),
            ("gamma", &self.gamma),
            ("epochs", &self.epochs),
            ("lr", &self.lr),
            ("negatives", &self.negatives),
            ("batch-size", &self.batch_size),
            ("exclude-relations", &self.exclude_relations),
            ("unit-norm", &self.unit_norm),
            ("folds", &self.folds),
            ("semantic-dim", &self.semantic_dim),
            ("semantic-source", &self.semantic_source),
            ("sections", &self.sections),
            ("w-sem", &self.w_sem),
            ("w-kge", &self.w_kge),
            ("k", &self.k),
            ("method", &self.method),
        ];
        debug_assert_eq!(pairs.len(), config::KEYS.len());
        pairs
            .into_iter()
            .filter_map(|(k, v)| v.clone().map(|v| (k, v)))
            .collect()
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let config = PipelineConfig::resolve(cli.options.config.as_deref(), &cli.options.overrides())?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build_global()
        .map_err(|e| CliError::Usage(format!("cannot start {} workers: {e}", config.workers)))?;
    stages::run(&cli.command, &config)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("ckg: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
