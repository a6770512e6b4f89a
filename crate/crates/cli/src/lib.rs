//! The `fieldguide` command line.
//!
//! A typical pipeline:
//!
//! ```text
//! fieldguide synth --out-dir data
//! fieldguide embed --corpus data/corpus.jsonl --captions data/captions.jsonl --out data/store.bin
//! fieldguide gen-pairs --captions data/train_captions.jsonl --corpus data/corpus.jsonl \
//!     --lexicon data/lexicon.txt --out data/pairs.jsonl
//! fieldguide train --pairs data/pairs.jsonl --captions data/train_captions.jsonl \
//!     --store data/store.bin --corpus data/corpus.jsonl --out data/model.ckpt
//! fieldguide score --corpus data/corpus.jsonl --captions data/test_captions.jsonl \
//!     --store data/store.bin --checkpoint data/model.ckpt --out data/scores.jsonl
//! fieldguide eval --scores data/scores.jsonl --captions data/test_captions.jsonl
//! ```

mod commands;

use std::fmt;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

pub use commands::run;

#[derive(Debug, Parser)]
#[command(
    name = "fieldguide",
    version,
    about = "Identify species from descriptions by ranking expert documents"
)]
pub struct Cli {
    /// Seed for all randomness; also the hashing seed of the embedding provider.
    #[arg(long, global = true, default_value_t = 42)]
    pub seed: u64,

    /// Cap on worker threads (defaults to one per core).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Log progress (per-epoch losses and similar).
    #[arg(long, global = true)]
    pub verbose: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate a corpus or caption file and write its canonical form.
    Ingest(IngestArgs),
    /// Embed corpus sentences and captions, or import precomputed vectors.
    Embed(EmbedArgs),
    /// Generate labelled training pairs from unlabelled captions.
    GenPairs(GenPairsArgs),
    /// Train the matching model.
    Train(TrainArgs),
    /// Rank the corpus for every image with a trained model or cosine similarity.
    Score(ScoreArgs),
    /// Compare score dumps against ground truth.
    Eval(EvalArgs),
    /// Rank the corpus with a lexical baseline.
    Baseline(BaselineArgs),
    /// Run the HTTP identification service.
    Serve(ServeArgs),
    /// Write a seeded synthetic dataset.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Corpus records: JSON lines with doc_id, class_name and text or sentences.
    #[arg(long, required_unless_present = "captions", conflicts_with = "captions")]
    pub corpus: Option<PathBuf>,
    /// Caption records: JSON lines with image_id, captions and optional class_id.
    #[arg(long)]
    pub captions: Option<PathBuf>,
    /// Abbreviations that never end a sentence, one per line.
    #[arg(long)]
    pub abbreviations: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EmbedArgs {
    #[arg(long, required_unless_present_any = ["captions", "import"])]
    pub corpus: Option<PathBuf>,
    #[arg(long)]
    pub captions: Option<PathBuf>,
    /// Text vectors (`key<TAB>v1 v2 ...`) to convert instead of embedding.
    #[arg(long, conflicts_with_all = ["corpus", "captions"])]
    pub import: Option<PathBuf>,
    /// Hashed bag-of-words dimension.
    #[arg(long, default_value_t = 256)]
    pub dim: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Classes {
    #[value(name = "2")]
    Two,
    #[value(name = "3")]
    Three,
}

#[derive(Debug, Args)]
pub struct GenPairsArgs {
    #[arg(long)]
    pub captions: PathBuf,
    /// Source of document sentences for neutral pairs.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Noun list deciding which pairs count as neutral.
    #[arg(long)]
    pub lexicon: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "3")]
    pub classes: Classes,
    /// Share of neutral pairs in a three-class set.
    #[arg(long, default_value_t = 1.0 / 3.0)]
    pub neutral_fraction: f64,
    /// Probability that a neutral partner is a document sentence rather than another caption.
    #[arg(long, default_value_t = 0.5)]
    pub neutral_doc_share: f64,
    /// Emit every pair in both orders.
    #[arg(long)]
    pub both_orders: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Precision {
    F32,
    F64,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub pairs: PathBuf,
    /// Training images; class labels in the file are ignored.
    #[arg(long)]
    pub captions: PathBuf,
    /// Embeddings of the captions (and of document sentences unless `--doc-store` is given).
    #[arg(long)]
    pub store: PathBuf,
    #[arg(long)]
    pub doc_store: Option<PathBuf>,
    /// Needed for the prior term when `--lambda` is positive.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Checkpoint to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Per-epoch losses as tab-separated values.
    #[arg(long)]
    pub history: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "3")]
    pub classes: Classes,
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    #[arg(long, default_value_t = 10)]
    pub epochs: usize,
    /// Epochs with the prior term (defaults to `--epochs`).
    #[arg(long)]
    pub reg_epochs: Option<usize>,
    #[arg(long, default_value_t = 1e-3)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 64)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 16)]
    pub reg_image_batch: usize,
    /// Score only this many sampled documents per prior step.
    #[arg(long)]
    pub reg_doc_sample: Option<usize>,
    #[arg(long, default_value_t = 128)]
    pub proj_dim: usize,
    #[arg(long, default_value_t = 128)]
    pub hidden_dim: usize,
    /// Build document distributions from `softmax(-z)`.
    #[arg(long)]
    pub negate_scores: bool,
    #[arg(long, value_enum, default_value = "f64")]
    pub precision: Precision,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScoreModeArg {
    Fgsm,
    Cosine,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub captions: PathBuf,
    /// Caption embeddings (and document sentences unless `--doc-store` is given).
    #[arg(long)]
    pub store: PathBuf,
    #[arg(long)]
    pub doc_store: Option<PathBuf>,
    /// Required for `--mode fgsm`.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "fgsm")]
    pub mode: ScoreModeArg,
    /// Rank by ascending score, with probabilities `softmax(-z)`.
    #[arg(long)]
    pub negate_scores: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Score dumps, one per method; repeat the flag to compare methods.
    #[arg(long, required = true)]
    pub scores: Vec<PathBuf>,
    /// Caption file holding the class_id of every image.
    #[arg(long)]
    pub captions: PathBuf,
    /// Check that every class_id names a document.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Add the expected metrics of random guessing over this many documents.
    #[arg(long)]
    pub random_k: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Per-class metrics of the first dump as JSON lines.
    #[arg(long)]
    pub per_class: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BaselineMethod {
    Tfidf,
    Bm25,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum QueryModeArg {
    Concatenate,
    MeanPerCaption,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum IdfFloorArg {
    MeanPositive,
    MeanAll,
}

#[derive(Debug, Args)]
pub struct BaselineArgs {
    #[arg(long, value_enum)]
    pub method: BaselineMethod,
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub captions: PathBuf,
    /// Word n-gram sizes of the TF-IDF vocabulary.
    #[arg(long, value_delimiter = ',', default_value = "2,3")]
    pub ngram_sizes: Vec<usize>,
    #[arg(long, default_value_t = 1.5)]
    pub k1: f64,
    #[arg(long, default_value_t = 0.75)]
    pub b: f64,
    /// BM25 floor for non-positive idf, as a fraction of the mean idf.
    #[arg(long, default_value_t = 0.25)]
    pub epsilon: f64,
    #[arg(long, value_enum, default_value = "mean-positive")]
    pub idf_floor: IdfFloorArg,
    #[arg(long, value_enum, default_value = "concatenate")]
    pub query_mode: QueryModeArg,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ServeMode {
    Fgsm,
    Cosine,
    Tfidf,
    Bm25,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub addr: SocketAddr,
    #[arg(long)]
    pub corpus: PathBuf,
    /// Document sentence embeddings made with the same `--dim` and `--seed`.
    #[arg(long)]
    pub store: PathBuf,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Default mode for requests that name none.
    #[arg(long, value_enum, default_value = "fgsm")]
    pub mode: ServeMode,
    #[arg(long, default_value_t = 256)]
    pub dim: usize,
    /// Built UI to serve under `/`.
    #[arg(long)]
    pub static_dir: Option<PathBuf>,
    /// Opt-in log of submitted descriptions and returned rankings.
    #[arg(long)]
    pub session_log: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = 20)]
    pub classes: usize,
    #[arg(long, default_value_t = 30)]
    pub images_per_class: usize,
    #[arg(long, default_value_t = 5)]
    pub captions_per_image: usize,
    #[arg(long, default_value_t = 4)]
    pub attributes: usize,
    #[arg(long, default_value_t = 6)]
    pub distractor_sentences: usize,
    #[arg(long, default_value_t = 0.1)]
    pub noise: f64,
    /// Every n-th image of each class goes to the test split.
    #[arg(long, default_value_t = 3)]
    pub test_every: usize,
}

/// A failed command with its process exit code.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(fieldguide_core::Error),
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    /// 1 for usage and configuration errors, 2 for bad data, 3 for numeric failures.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Core(e) if e.is_config() => 1,
            CliError::Core(e) if e.is_numeric() => 3,
            CliError::Core(_) | CliError::Io { .. } => 2,
        }
    }

    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_owned(),
            source,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io { path, source } => write!(f, "{}: {source}", path.display()),
        }
    }
}

impl std::error::Error for CliError {}

impl From<fieldguide_core::Error> for CliError {
    fn from(e: fieldguide_core::Error) -> Self {
        CliError::Core(e)
    }
}
