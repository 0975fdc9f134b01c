//! `leakscope` — measure structural train/test leakage in dependency
//! treebanks and drive the associated experiment tooling from the shell.
//!
//! Subcommands: `leakage` (tree/subtree isomorphism leakage), `analyze`
//! (size+leakage regression with cross-validation), `sample` (leaky /
//! non-leaky / random / diverse training samples), `surgery` (modifier
//! subtree removal), `count` (construction counting), `stats` (treebank
//! summary statistics).
//!
//! Conventions shared by every subcommand:
//! - deterministic output: all randomness is derived from `--seed`
//!   (default 0), and reports echo the seed;
//! - reports embed a config fingerprint (flags plus SHA-256 digests of all
//!   inputs) so results are self-describing;
//! - `--format tsv` (default for tabular commands) emits `#` comment lines
//!   followed by a stable header row; `--format json` emits one object with
//!   `config` and payload fields, validating against `schemas/*.schema.json`;
//! - exit codes: 0 success, 1 usage error, 2 data error (unreadable or
//!   invalid input, infeasible request);
//! - `LEAKSCOPE_THREADS` caps internal parallelism.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use leakscope::{LabelMode, Level, SampleSize, SubtreeStyle, Weighting};

/// A post-parse failure, split by which exit code it deserves.
pub enum Failure {
    Usage(String),
    Data(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Data(_) => 2,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Data(m) => m,
        }
    }
}

/// Shorthand for data-error conversions in command bodies.
pub fn data_err(err: impl std::fmt::Display) -> Failure {
    Failure::Data(err.to_string())
}

#[derive(Parser)]
#[command(
    name = "leakscope",
    version,
    about = "Structural train/test leakage measurement for dependency treebanks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fraction of test trees (or subtree units) already seen in training.
    Leakage(LeakageArgs),
    /// Fit performance = alpha*size + beta*leakage + gamma on a manifest.
    Analyze(AnalyzeArgs),
    /// Write leaky/non-leaky/random/diverse training samples.
    Sample(SampleArgs),
    /// Delete modifier subtrees from tokens under a chosen head relation.
    Surgery(SurgeryArgs),
    /// Count (head relation <- modifier relation) constructions.
    Count(CountArgs),
    /// Summary statistics of one treebank.
    Stats(StatsArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Tsv,
    Json,
}

impl Format {
    pub fn as_str(self) -> &'static str {
        match self {
            Format::Tsv => "tsv",
            Format::Json => "json",
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Strategy {
    Leaky,
    Nonleaky,
    Random,
    Diverse,
    All,
}

fn parse_mode(s: &str) -> Result<LabelMode, String> {
    s.parse()
        .map_err(|e: leakscope::graphcore::ParseLabelModeError| e.to_string())
}

fn parse_level(s: &str) -> Result<Level, String> {
    s.parse()
        .map_err(|e: leakscope::leakage::ParseLevelError| e.to_string())
}

fn parse_weighting(s: &str) -> Result<Weighting, String> {
    s.parse()
        .map_err(|e: leakscope::leakage::ParseWeightingError| e.to_string())
}

fn parse_style(s: &str) -> Result<SubtreeStyle, String> {
    s.parse()
        .map_err(|e: leakscope::leakage::ParseSubtreeStyleError| e.to_string())
}

fn parse_size(s: &str) -> Result<SampleSize, String> {
    s.parse()
        .map_err(|e: leakscope::sampling::ParseSampleSizeError| e.to_string())
}

#[derive(clap::Args)]
pub struct LeakageArgs {
    /// Training treebank; repeat the flag to union several files.
    #[arg(long = "train", required = true, num_args = 1)]
    pub train: Vec<PathBuf>,
    /// Test treebank.
    #[arg(long)]
    pub test: PathBuf,
    /// Label granularity: none, edges, nodes_edges, or nodes.
    #[arg(long, default_value = "none", value_parser = parse_mode)]
    pub mode: LabelMode,
    /// Whole trees or per-token subtree units.
    #[arg(long, default_value = "tree", value_parser = parse_level)]
    pub level: Level,
    /// Count every test item (instance) or each distinct shape once (type).
    #[arg(long, default_value = "instance", value_parser = parse_weighting)]
    pub weighting: Weighting,
    /// Subtree unit layout: text (root unit keeps children) or figure.
    #[arg(long = "subtree-style", default_value = "text", value_parser = parse_style)]
    pub subtree_style: SubtreeStyle,
    /// Truncate dependency relations at ':' before comparing.
    #[arg(long = "strip-deprel-subtypes")]
    pub strip_deprel_subtypes: bool,
    #[arg(long, value_enum, default_value_t = Format::Tsv)]
    pub format: Format,
}

#[derive(clap::Args)]
pub struct AnalyzeArgs {
    /// Manifest file (TSV with a header or a JSON array of rows).
    #[arg(long)]
    pub manifest: PathBuf,
    /// Cross-validation fold count.
    #[arg(long, default_value_t = 5)]
    pub k: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Z-score the predictors before solving (numerics only; same fit).
    #[arg(long)]
    pub standardize: bool,
    #[arg(long, value_enum, default_value_t = Format::Tsv)]
    pub format: Format,
}

#[derive(clap::Args)]
pub struct SampleArgs {
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    /// Which sample(s) to write; `all` is size-controlled to one size.
    #[arg(long, value_enum, default_value_t = Strategy::All)]
    pub strategy: Strategy,
    /// Common sample size, or `auto` = min(|leaky|, |nonleaky|, classes).
    #[arg(long, default_value = "auto", value_parser = parse_size)]
    pub size: SampleSize,
    #[arg(long, default_value = "none", value_parser = parse_mode)]
    pub mode: LabelMode,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Directory for the emitted `.conllu` files.
    #[arg(long = "out-dir")]
    pub out_dir: PathBuf,
    /// Permit a resolved sample size of 0 (writes empty treebanks).
    #[arg(long = "allow-empty")]
    pub allow_empty: bool,
    #[arg(long = "strip-deprel-subtypes")]
    pub strip_deprel_subtypes: bool,
    #[arg(long, value_enum, default_value_t = Format::Tsv)]
    pub format: Format,
}

#[derive(clap::Args)]
pub struct SurgeryArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Path for the edited treebank.
    #[arg(long)]
    pub output: PathBuf,
    /// Relation of the head token (e.g. nsubj, obj).
    #[arg(long = "target-rel")]
    pub target_rel: String,
    /// Relation of the modifier to delete (e.g. amod).
    #[arg(long = "modifier-rel")]
    pub modifier_rel: String,
    /// Also match subtyped relations (nsubj:pass for nsubj).
    #[arg(long = "match-prefix")]
    pub match_prefix: bool,
    /// Treat obj and dobj as the same relation.
    #[arg(long = "obj-dobj-synonyms")]
    pub obj_dobj_synonyms: bool,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(clap::Args)]
pub struct CountArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Relation of the head token (e.g. nsubj, obj).
    #[arg(long = "target-rel")]
    pub target_rel: String,
    /// Relation of the counted modifier (e.g. amod).
    #[arg(long = "modifier-rel")]
    pub modifier_rel: String,
    /// Also match subtyped relations (nsubj:pass for nsubj).
    #[arg(long = "match-prefix")]
    pub match_prefix: bool,
    /// Treat obj and dobj as the same relation.
    #[arg(long = "obj-dobj-synonyms")]
    pub obj_dobj_synonyms: bool,
    #[arg(long, value_enum, default_value_t = Format::Tsv)]
    pub format: Format,
}

#[derive(clap::Args)]
pub struct StatsArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Label mode for the diversity (equivalence class) statistic.
    #[arg(long, default_value = "none", value_parser = parse_mode)]
    pub mode: LabelMode,
    #[arg(long = "strip-deprel-subtypes")]
    pub strip_deprel_subtypes: bool,
    #[arg(long, value_enum, default_value_t = Format::Tsv)]
    pub format: Format,
}

fn init_thread_pool() -> Result<(), Failure> {
    let Ok(raw) = std::env::var("LEAKSCOPE_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw.parse().ok().filter(|&n| n >= 1).ok_or_else(|| {
        Failure::Usage(format!(
            "LEAKSCOPE_THREADS must be a positive integer, got {raw:?}"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Failure::Usage(format!("cannot configure thread pool: {e}")))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            use clap::error::ErrorKind;
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };

    let run = init_thread_pool().and_then(|()| match cli.command {
        Command::Leakage(args) => commands::leakage(&args),
        Command::Analyze(args) => commands::analyze(&args),
        Command::Sample(args) => commands::sample(&args),
        Command::Surgery(args) => commands::surgery(&args),
        Command::Count(args) => commands::count(&args),
        Command::Stats(args) => commands::stats(&args),
    });
    match run {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {}", failure.message());
            ExitCode::from(failure.code())
        }
    }
}
