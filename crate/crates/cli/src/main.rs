//! `lexhmm`: train, evaluate and analyze part-of-speech inducers.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lexhmm::{EmissionMode, GoldColumn, SamplerKind};

use config::{parse_gold_column, Format};

#[derive(Parser)]
#[command(name = "lexhmm", version, about = "Unsupervised part-of-speech induction with a Pitman-Yor lexicon HMM")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a tagger on a corpus and write its artifacts.
    Train(TrainArgs),
    /// Score a predicted tagging against gold tags.
    Eval(EvalArgs),
    /// Class report and rank-frequency table of a tagging's lexicon.
    Analyze(AnalyzeArgs),
}

/// Flags override values from `--config`; unset values fall back to the
/// defaults shown.
#[derive(Args, Debug, Default)]
pub struct TrainArgs {
    /// `key = value` file with any of the settings below.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Training corpus.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// auto | conllx | vertical [default: auto]
    #[arg(long)]
    pub format: Option<Format>,
    /// CoNLL-X gold column: cpostag | postag [default: cpostag]
    #[arg(long, value_parser = parse_gold_column)]
    pub gold_column: Option<GoldColumn>,
    /// Number of induced tags [default: number of gold tags]
    #[arg(long)]
    pub tags: Option<usize>,
    /// lex | pyp-type | local [default: lex]
    #[arg(long)]
    pub sampler: Option<SamplerKind>,
    /// uniform | charlm [default: uniform]
    #[arg(long)]
    pub emission: Option<EmissionMode>,
    /// Particles per type sweep [default: 10]
    #[arg(long)]
    pub particles: Option<usize>,
    /// Total iterations, counting those before a resumed checkpoint [default: 200]
    #[arg(long)]
    pub iterations: Option<u64>,
    /// [default: 1]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Geometric class-size parameter [default: 0.5]
    #[arg(long)]
    pub p_geom: Option<f64>,
    /// Hyperparameter resampling interval in iterations, 0 = never [default: 1]
    #[arg(long)]
    pub hyper_every: Option<u64>,
    /// Resample particles when ESS / particles falls below this [default: 0.5]
    #[arg(long)]
    pub resample_threshold: Option<f64>,
    /// Worker threads; results do not depend on it [default: 1]
    #[arg(long)]
    pub threads: Option<usize>,
    /// Exact importance weights and MH correction [default: true]
    #[arg(long)]
    pub exact_weights: Option<bool>,
    /// Checkpoint interval in iterations, 0 = only at the end [default: 0]
    #[arg(long)]
    pub checkpoint_every: Option<u64>,
    /// Output directory [default: out]
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Continue from this checkpoint; diagnostics are appended.
    #[arg(long)]
    pub resume: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Predicted tagging, vertical format.
    #[arg(long)]
    pub pred: PathBuf,
    /// Gold corpus with the same tokens.
    #[arg(long)]
    pub gold: PathBuf,
    #[arg(long, default_value = "auto")]
    pub gold_format: Format,
    #[arg(long, default_value = "cpostag", value_parser = parse_gold_column)]
    pub gold_column: GoldColumn,
    /// Also write the class report of the prediction, tags mapped to gold.
    #[arg(long)]
    pub class_report: Option<PathBuf>,
    /// Word types listed per class in the report.
    #[arg(long, default_value_t = 5)]
    pub top: usize,
}

#[derive(Args, Debug)]
pub struct AnalyzeArgs {
    /// Corpus; its gold tags, if any, label the report.
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long, default_value = "auto")]
    pub format: Format,
    #[arg(long, default_value = "cpostag", value_parser = parse_gold_column)]
    pub gold_column: GoldColumn,
    /// Tagging to analyze, vertical format; the corpus gold tags when absent.
    #[arg(long)]
    pub assignment: Option<PathBuf>,
    /// Output directory for class_report.tsv, zipf.tsv and summary.txt.
    #[arg(long)]
    pub out: PathBuf,
    /// Word types listed per class.
    #[arg(long, default_value_t = 5)]
    pub top: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(a) => commands::train(a),
        Command::Eval(a) => commands::eval(a),
        Command::Analyze(a) => commands::analyze(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
