//! `kbe`: train, evaluate and fuse knowledge base embeddings.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use kbe_core::Error;

#[derive(Debug, Parser)]
#[command(name = "kbe", version, about = "Knowledge base embeddings for relation prediction")]
#[command(args_override_self = true)]
struct Cli {
    /// Load flags from a key=value file; explicit flags win
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train an embedding model on a knowledge base directory
    Train(TrainArgs),
    /// Relation-prediction metrics of a checkpoint on one split
    Eval(EvalArgs),
    /// Fuse extractor scores with a checkpoint and sweep precision-recall curves
    Fuse(FuseArgs),
    /// Write a synthetic knowledge base directory
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Knowledge base directory
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// transe, distmult or complex
    #[arg(long, default_value = "transe")]
    pub model: String,
    #[arg(long)]
    pub dim: Option<usize>,
    /// TransE distance: l1 or l2
    #[arg(long)]
    pub norm: Option<String>,
    #[arg(long)]
    pub margin: Option<f64>,
    #[arg(long = "lr")]
    pub learning_rate: Option<f64>,
    /// sgd or adagrad
    #[arg(long)]
    pub optimizer: Option<String>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Negatives per positive
    #[arg(long)]
    pub negatives: Option<usize>,
    /// Corruption weights subject:object:relation
    #[arg(long)]
    pub corruption: Option<String>,
    /// L2 coefficient of the logistic models
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub normalize_entities: Option<bool>,
    #[arg(long)]
    pub filtered_negatives: Option<bool>,
    /// Suppress per-epoch progress
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Directory written by `train`
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// train, valid or test
    #[arg(long, default_value = "test")]
    pub split: String,
    /// mean, optimistic or pessimistic
    #[arg(long, default_value = "mean")]
    pub tie_policy: String,
    /// Label for the TSV line (defaults to the data directory name)
    #[arg(long)]
    pub dataset: Option<String>,
}

#[derive(Debug, Args)]
pub struct FuseArgs {
    /// Extractor scores, JSON Lines
    #[arg(long)]
    pub re_scores: PathBuf,
    /// Gold facts, triple TSV
    #[arg(long)]
    pub gold: PathBuf,
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Vocabulary source when the checkpoint directory has none
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Comma-separated α values in (0, 1]
    #[arg(long, default_value = "1.0")]
    pub alphas: String,
    /// weighted, geometric, harmonic or softmax-weighted
    #[arg(long, default_value = "weighted")]
    pub strategy: String,
    /// top-nonNA, all-nonNA or all
    #[arg(long, default_value = "top-nonNA")]
    pub scope: String,
    /// minmax, sigmoid or none
    #[arg(long, default_value = "minmax")]
    pub kbe_norm: String,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 20)]
    pub entities: usize,
    /// inverse-pair, symmetric, random or random:<relations>
    #[arg(long, default_value = "inverse-pair")]
    pub pattern: String,
    #[arg(long, default_value_t = 0.5)]
    pub density: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

fn category(err: &Error) -> (&'static str, u8) {
    match err {
        Error::Config(_) | Error::Sampling(_) => ("config", 1),
        Error::Numerical { .. } => ("numerical", 3),
        _ => ("data", 2),
    }
}

fn fail(kind: &str, code: u8, message: &str) -> ExitCode {
    let message = message.replace('\n', " ");
    eprintln!("error\t{kind}\t{}", message.trim());
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let args = match config::expand_args(std::env::args_os().collect()) {
        Ok(args) => args,
        Err(e) => return fail("config", 1, &e.to_string()),
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            let first = e.to_string();
            return fail("config", 1, first.lines().next().unwrap_or("invalid arguments"));
        }
    };
    let result = match cli.command {
        Command::Train(a) => commands::train(&a),
        Command::Eval(a) => commands::eval(&a),
        Command::Fuse(a) => commands::fuse(&a),
        Command::Synth(a) => commands::synth(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (kind, code) = category(&e);
            fail(kind, code, &e.to_string())
        }
    }
}
