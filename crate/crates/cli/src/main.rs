//! `rpd`: compare embedding spaces, test them for dependence, train SVD
//! embeddings and lay spaces out in the plane.

mod commands;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rpd_core::{EmbeddingFormat, SignalKind, Tail, WindowWeighting};

/// Exit code for usage and input errors. Clap uses the same code.
const EXIT_INPUT: u8 = 2;
const EXIT_INTERNAL: u8 = 1;

#[derive(Debug)]
pub struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_INPUT,
            message: message.into(),
        }
    }

    pub fn internal(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_INTERNAL,
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<rpd_core::Error> for CliError {
    fn from(e: rpd_core::Error) -> Self {
        match e {
            rpd_core::Error::OracleGuard { .. } => CliError::internal(e.to_string()),
            _ => CliError::input(e.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "rpd", version, about = "Relative pairwise inner product distance between embedding spaces")]
#[command(after_help = "Environment: RPD_THREADS caps the number of worker threads (0 = automatic).")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// RPD between two embedding files, as JSON.
    Rpd(RpdArgs),
    /// Pairwise RPD matrix of several embeddings, as TSV.
    Matrix(MatrixArgs),
    /// Dependence z-test of two embeddings against a Monte Carlo null.
    Nulltest(NullArgs),
    /// Train an SVD embedding of a PPMI or log-count signal.
    TrainSvd(TrainArgs),
    /// Word similarity and analogy scores, as JSON.
    Eval(EvalArgs),
    /// RPD to a baseline versus change in task performance, as TSV.
    Study(StudyArgs),
    /// Planar layout of embedding spaces from their pairwise RPDs, as TSV.
    Map(MapArgs),
}

#[derive(Debug, Args)]
pub struct FormatArg {
    /// Embedding file format: word2vec (with header) or glove.
    #[arg(long, default_value = "word2vec")]
    pub format: EmbeddingFormat,
}

#[derive(Debug, Args)]
pub struct OutputArg {
    /// Write the result here instead of stdout.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RpdArgs {
    #[arg(long)]
    pub left: PathBuf,
    #[arg(long)]
    pub right: PathBuf,
    #[command(flatten)]
    pub format: FormatArg,
    /// Compare raw matrices instead of entry-scale standardized ones.
    #[arg(long)]
    pub no_standardize: bool,
    /// Include the per-word decomposition.
    #[arg(long)]
    pub decompose: bool,
    /// Keep only the k most divergent words of the decomposition.
    #[arg(long, requires = "decompose")]
    pub top_k: Option<usize>,
    #[command(flatten)]
    pub output: OutputArg,
}

/// `NAME=PATH`.
#[derive(Debug, Clone)]
pub struct NamedPath {
    pub name: String,
    pub path: PathBuf,
}

fn parse_named_path(s: &str) -> Result<NamedPath, String> {
    let (name, path) = s
        .split_once('=')
        .ok_or_else(|| format!("expected NAME=PATH, got {s:?}"))?;
    if name.is_empty() || path.is_empty() {
        return Err(format!("expected NAME=PATH, got {s:?}"));
    }
    if name.chars().any(|c| c.is_whitespace() || c == ',') {
        return Err(format!("name {name:?} may not contain whitespace or commas"));
    }
    Ok(NamedPath {
        name: name.to_string(),
        path: PathBuf::from(path),
    })
}

#[derive(Debug, Args)]
pub struct MatrixArgs {
    /// Embedding as NAME=PATH; repeat for each space.
    #[arg(long = "emb", value_parser = parse_named_path, required = true)]
    pub embs: Vec<NamedPath>,
    #[command(flatten)]
    pub format: FormatArg,
    /// Compare every pair on the vocabulary shared by all embeddings.
    #[arg(long)]
    pub common_vocab: bool,
    #[command(flatten)]
    pub output: OutputArg,
}

#[derive(Debug, Args)]
pub struct NullArgs {
    #[arg(long)]
    pub left: PathBuf,
    #[arg(long)]
    pub right: PathBuf,
    #[command(flatten)]
    pub format: FormatArg,
    #[arg(long, default_value_t = 1000)]
    pub replicates: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Alternative hypothesis for the p-value: two-sided, lower or upper.
    #[arg(long, default_value = "two-sided")]
    pub tail: Tail,
    /// Also write the raw null draws, one per line.
    #[arg(long)]
    pub samples: Option<PathBuf>,
    #[command(flatten)]
    pub output: OutputArg,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// UTF-8 plain-text corpus.
    #[arg(long)]
    pub corpus: PathBuf,
    /// pmi (positive PMI) or logcount (log(1 + count)).
    #[arg(long)]
    pub signal: SignalKind,
    #[arg(long, default_value_t = 300)]
    pub dim: usize,
    #[arg(long, default_value_t = 10)]
    pub window: usize,
    #[arg(long, default_value_t = 10)]
    pub min_count: usize,
    /// flat or harmonic (1/distance) context weighting.
    #[arg(long, default_value = "flat")]
    pub weighting: WindowWeighting,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 10)]
    pub oversample: usize,
    /// Minimum number of subspace iterations.
    #[arg(long, default_value_t = 4)]
    pub power_iters: usize,
    /// Convergence tolerance on singular values relative to the largest (0 disables).
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[arg(long, default_value_t = 2000)]
    pub max_iters: usize,
    /// Keep case instead of lowercasing tokens.
    #[arg(long)]
    pub keep_case: bool,
    /// Trim punctuation from both ends of each token.
    #[arg(long)]
    pub strip_punctuation: bool,
    /// Treat blank lines as document boundaries.
    #[arg(long)]
    pub split_documents: bool,
    /// Embedding output path (word2vec text format).
    #[arg(long, short)]
    pub output: PathBuf,
    /// Also save the co-occurrence counts as `i j count` triples.
    #[arg(long, requires = "vocab_out")]
    pub counts_out: Option<PathBuf>,
    /// Vocabulary sidecar for --counts-out, one word per line.
    #[arg(long, requires = "counts_out")]
    pub vocab_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DatasetArgs {
    /// Similarity file: word1<TAB>word2<TAB>score per line.
    #[arg(long)]
    pub similarity: Option<PathBuf>,
    /// Analogy file in the Google format.
    #[arg(long)]
    pub analogy: Option<PathBuf>,
    /// Keep dataset case instead of lowercasing.
    #[arg(long)]
    pub keep_case: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub emb: PathBuf,
    #[command(flatten)]
    pub format: FormatArg,
    #[command(flatten)]
    pub datasets: DatasetArgs,
    #[command(flatten)]
    pub output: OutputArg,
}

#[derive(Debug, Args)]
pub struct StudyArgs {
    #[arg(long)]
    pub baseline: PathBuf,
    /// Embedding as NAME=PATH; repeat for each compared space.
    #[arg(long = "emb", value_parser = parse_named_path, required = true)]
    pub embs: Vec<NamedPath>,
    #[command(flatten)]
    pub format: FormatArg,
    #[command(flatten)]
    pub datasets: DatasetArgs,
    #[command(flatten)]
    pub output: OutputArg,
}

#[derive(Debug, Args)]
pub struct MapArgs {
    /// Distance TSV as written by `rpd matrix`.
    #[arg(long, conflicts_with = "embs", required_unless_present = "embs")]
    pub distances: Option<PathBuf>,
    /// Embedding as NAME=PATH, to compute the distances first.
    #[arg(long = "emb", value_parser = parse_named_path)]
    pub embs: Vec<NamedPath>,
    #[command(flatten)]
    pub format: FormatArg,
    #[arg(long)]
    pub common_vocab: bool,
    /// The two fixed spaces, as NAME,NAME.
    #[arg(long, value_delimiter = ',', num_args = 1)]
    pub anchors: Vec<String>,
    #[command(flatten)]
    pub output: OutputArg,
}

fn configure_threads() -> CliResult<()> {
    let Ok(value) = std::env::var("RPD_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .map_err(|_| CliError::input(format!("RPD_THREADS must be a non-negative integer, got {value:?}")))?;
    if threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::internal(format!("cannot configure thread pool: {e}")))?;
    }
    Ok(())
}

fn run(cli: Cli) -> CliResult<()> {
    configure_threads()?;
    match cli.command {
        Command::Rpd(args) => commands::rpd_pair(args),
        Command::Matrix(args) => commands::rpd_matrix(args),
        Command::Nulltest(args) => commands::nulltest(args),
        Command::TrainSvd(args) => commands::train_svd(args),
        Command::Eval(args) => commands::eval(args),
        Command::Study(args) => commands::study(args),
        Command::Map(args) => commands::map(args),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}
