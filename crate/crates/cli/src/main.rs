//! `sstsearch`: parse, transform, serialize, coverage, train, index,
//! search, and eval subcommands over one shared configuration.

mod commands;
mod config;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use std::ffi::OsString;
use std::path::PathBuf;

use sstsearch_core::corpus::Split;
use sstsearch_core::model::{EncoderKind, Mode};
use sstsearch_core::serialize::Method;

use config::Ctx;

#[derive(Parser)]
#[command(
    name = "sstsearch",
    version,
    about = "Semantic code search over tree-serialized code representations",
    propagate_version = true
)]
struct Cli {
    /// Flat JSON config file; flags override its values
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Base seed for all derived randomness (SSTSEARCH_SEED overrides)
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory for artifacts
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse().map_err(|e| format!("{e}"))
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    s.parse().map_err(|e| format!("{e}"))
}

fn parse_encoder(s: &str) -> Result<EncoderKind, String> {
    s.parse().map_err(|e| format!("{e}"))
}

fn parse_split(s: &str) -> Result<Split, String> {
    match s {
        "train" => Ok(Split::Train),
        "valid" => Ok(Split::Valid),
        "test" => Ok(Split::Test),
        other => Err(format!("unknown split \"{other}\" (train|valid|test)")),
    }
}

/// Path-sampling flags shared by serialize, coverage, and train.
#[derive(Args, Debug, Default)]
pub struct SamplerArgs {
    /// Sampled tree paths per snippet
    #[arg(long)]
    pub n_paths: Option<usize>,
    /// Maximum token length of a leaf-to-leaf path
    #[arg(long)]
    pub length_threshold: Option<usize>,
    /// Minimum leg-height difference of a leaf-to-leaf path
    #[arg(long)]
    pub width_threshold: Option<usize>,
}

/// Training flags.
#[derive(Args, Debug, Default)]
pub struct TrainArgs {
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub embedding_dim: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub max_seq_len: Option<usize>,
    #[arg(long)]
    pub vocab_cap: Option<usize>,
    #[arg(long)]
    pub min_token_count: Option<usize>,
    /// Sequence encoder: nbow | selfatt
    #[arg(long, value_parser = parse_encoder)]
    pub encoder: Option<EncoderKind>,
}

#[derive(Subcommand)]
enum Command {
    /// Parse MiniLang source (or corpus snippets) into tree objects
    Parse {
        /// Corpus file; writes asts.jsonl to the output directory
        #[arg(long, value_name = "FILE")]
        corpus: Option<PathBuf>,
        /// Single MiniLang source file; prints the tree object
        #[arg(long, value_name = "FILE", conflicts_with = "corpus")]
        source: Option<PathBuf>,
    },
    /// Apply prune/relabel/unify rules; writes ssts.jsonl
    Transform {
        #[arg(long, value_name = "FILE")]
        corpus: Option<PathBuf>,
        /// Rule file (JSON); defaults to the language's built-in rules
        #[arg(long, value_name = "FILE")]
        rules: Option<PathBuf>,
        /// Language name for built-in rules
        #[arg(long)]
        lang: Option<String>,
    },
    /// Write <split>.<method>.txt sidecar files of serialized sequences
    Serialize {
        #[arg(long, value_name = "FILE")]
        corpus: Option<PathBuf>,
        /// rootpath | leafpath | sbt | lcrs
        #[arg(long, value_parser = parse_method)]
        method: Option<Method>,
        #[arg(long, value_name = "FILE")]
        rules: Option<PathBuf>,
        #[arg(long)]
        lang: Option<String>,
        #[command(flatten)]
        sampler: SamplerArgs,
    },
    /// Link/node coverage table over the corpus for every mode
    Coverage {
        #[arg(long, value_name = "FILE")]
        corpus: Option<PathBuf>,
        #[arg(long, value_name = "FILE")]
        rules: Option<PathBuf>,
        #[arg(long)]
        lang: Option<String>,
        #[command(flatten)]
        sampler: SamplerArgs,
    },
    /// Train encoders; writes <mode>.ckpt and <mode>.history.json
    Train {
        #[arg(long, value_name = "FILE")]
        corpus: Option<PathBuf>,
        /// uni-code | uni-<method> | multi-<method>
        #[arg(long, value_parser = parse_mode)]
        mode: Option<Mode>,
        #[arg(long, value_name = "FILE")]
        rules: Option<PathBuf>,
        #[arg(long)]
        lang: Option<String>,
        #[command(flatten)]
        sampler: SamplerArgs,
        #[command(flatten)]
        train: TrainArgs,
    },
    /// Build a search index over encoded snippets
    Index {
        #[arg(long, value_name = "FILE")]
        corpus: Option<PathBuf>,
        #[arg(long, value_name = "FILE")]
        checkpoint: PathBuf,
        /// Restrict to one split instead of the whole corpus
        #[arg(long, value_parser = parse_split)]
        split: Option<Split>,
    },
    /// Query an index by natural language
    Search {
        #[arg(long, value_name = "FILE")]
        index: PathBuf,
        #[arg(long)]
        query: String,
        /// Number of results
        #[arg(short = 'k', long = "top-k", default_value_t = 10)]
        k: usize,
    },
    /// MRR/NDCG/coverage report, with change ratios against uni-code
    Eval {
        #[arg(long, value_name = "FILE")]
        corpus: Option<PathBuf>,
        /// Checkpoint to evaluate; repeat to compare several modes
        #[arg(long = "checkpoint", value_name = "FILE", required = true)]
        checkpoints: Vec<PathBuf>,
        /// Split to evaluate on (default: test)
        #[arg(long, value_parser = parse_split)]
        split: Option<Split>,
    },
}

/// Usage problems exit 1, data problems exit 2.
pub enum CliError {
    Usage(String),
    Data(anyhow::Error),
}

impl<E: Into<anyhow::Error>> From<E> for CliError {
    fn from(err: E) -> Self {
        CliError::Data(err.into())
    }
}

fn main() {
    let code = cli_main(std::env::args_os().collect());
    std::process::exit(code);
}

fn cli_main(argv: Vec<OsString>) -> i32 {
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(err)
            if matches!(
                err.kind(),
                ErrorKind::DisplayHelp
                    | ErrorKind::DisplayVersion
                    | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand
            ) =>
        {
            print!("{err}");
            return 0;
        }
        Err(err) => {
            eprint!("{err}");
            return 1;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(CliError::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            1
        }
        Err(CliError::Data(err)) => {
            eprintln!("error: {err:#}");
            2
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let ctx = Ctx::new(cli.config.as_deref(), cli.seed, cli.out.as_deref())?;
    match cli.command {
        Command::Parse { corpus, source } => {
            commands::parse(&ctx, corpus.as_deref(), source.as_deref())
        }
        Command::Transform { corpus, rules, lang } => {
            commands::transform(&ctx, corpus.as_deref(), rules.as_deref(), lang.as_deref())
        }
        Command::Serialize { corpus, method, rules, lang, sampler } => commands::serialize(
            &ctx,
            corpus.as_deref(),
            method,
            rules.as_deref(),
            lang.as_deref(),
            &sampler,
        ),
        Command::Coverage { corpus, rules, lang, sampler } => {
            commands::coverage(&ctx, corpus.as_deref(), rules.as_deref(), lang.as_deref(), &sampler)
        }
        Command::Train { corpus, mode, rules, lang, sampler, train } => commands::train(
            &ctx,
            corpus.as_deref(),
            mode,
            rules.as_deref(),
            lang.as_deref(),
            &sampler,
            &train,
        ),
        Command::Index { corpus, checkpoint, split } => {
            commands::index(&ctx, corpus.as_deref(), &checkpoint, split)
        }
        Command::Search { index, query, k } => commands::search(&index, &query, k),
        Command::Eval { corpus, checkpoints, split } => {
            commands::eval(&ctx, corpus.as_deref(), &checkpoints, split)
        }
    }
}
