//! `minerscope` command-line front end.

mod commands;
mod fsio;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::fsio::TraceArg;

#[derive(Debug, Parser)]
#[command(name = "minerscope", version, about = "Detect cryptocurrency clients in encrypted traffic metadata")]
struct Cli {
    /// Run folds and trees one at a time.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Convert a pcap or canonical CSV capture into one CSV per direction.
    Ingest(IngestArgs),
    /// Print interarrival and size quantiles of a canonical CSV trace.
    Summarize(SummarizeArgs),
    /// Write the per-packet feature matrix of a trace.
    Featurize(FeaturizeArgs),
    /// Generate synthetic traces from a profile file.
    Synth(SynthArgs),
    /// Cross-validate a multiclass forest per flow direction.
    Cv(CvArgs),
    /// Train a forest on one flow direction and save it.
    Train(TrainArgs),
    /// Classify the rows of a trace with a saved model.
    Predict(PredictArgs),
    /// Binary crypto-versus-standard detection.
    Detect(DetectArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DirectionArg {
    In,
    Out,
    Both,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// pcap file or canonical CSV.
    pub input: PathBuf,
    /// Local network; required for pcap input.
    #[arg(long)]
    pub local_subnet: Option<String>,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Output base name; defaults to the input file stem.
    #[arg(long)]
    pub name: Option<String>,
}

#[derive(Debug, Args)]
pub struct SummarizeArgs {
    pub input: PathBuf,
}

#[derive(Debug, Args)]
pub struct FeaturizeArgs {
    pub input: PathBuf,
    /// Class name written to the label column.
    #[arg(long)]
    pub label: String,
    #[arg(long, default_value_t = 5)]
    pub window: usize,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    pub profiles: PathBuf,
    #[arg(short = 'n', long = "packets", default_value_t = 4576)]
    pub n_packets: usize,
    #[arg(long, env = "CRYPTO_AEGIS_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out_dir: PathBuf,
}

/// Options shared by every command that trains forests.
#[derive(Debug, Args)]
pub struct ModelOpts {
    /// Labeled input as NAME=PATH (canonical CSV); repeat per trace.
    #[arg(long = "trace", value_parser = fsio::parse_trace_arg)]
    pub traces: Vec<TraceArg>,
    #[arg(long, default_value_t = 5)]
    pub window: usize,
    #[arg(long, default_value_t = 20)]
    pub trees: usize,
    /// Features tried per split; defaults to ceil(sqrt(6)).
    #[arg(long)]
    pub m_try: Option<usize>,
    #[arg(long, env = "CRYPTO_AEGIS_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Keep only the first N rows of every class.
    #[arg(long)]
    pub per_class_rows: Option<usize>,
    /// Class counted as positive; repeat for several.
    #[arg(long)]
    pub positive: Vec<String>,
}

#[derive(Debug, Args)]
pub struct CvArgs {
    #[command(flatten)]
    pub model: ModelOpts,
    #[arg(long, default_value_t = 10)]
    pub folds: usize,
    #[arg(long, value_enum, default_value_t = DirectionArg::Both)]
    pub direction: DirectionArg,
    /// Permutation importance for every window in LO:HI.
    #[arg(long)]
    pub window_sweep: Option<String>,
    /// Report JSON path; printed to stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Directory for ROC CSVs of the binary reports.
    #[arg(long)]
    pub roc: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub model: ModelOpts,
    #[arg(long, value_enum, default_value_t = DirectionArg::In)]
    pub direction: DirectionArg,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    pub input: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    /// Per-row predictions as CSV.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    #[command(flatten)]
    pub model_opts: ModelOpts,
    #[arg(long, default_value_t = 10)]
    pub folds: usize,
    #[arg(long, value_enum, default_value_t = DirectionArg::Both)]
    pub direction: DirectionArg,
    /// Evaluate given confusion counts, e.g. `tn=.. fp=.. fn=.. tp=..`.
    #[arg(long, num_args = 4, value_name = "K=V")]
    pub from_confusion: Vec<String>,
    /// Saved model to score `--target` with instead of training.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Trace whose alert fraction is reported.
    #[arg(long)]
    pub target: Option<PathBuf>,
    /// Exit with status 1 when an alert fraction reaches this value.
    #[arg(long)]
    pub alert_threshold: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub roc: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let exec = if cli.sequential {
        minerscope::Exec::Sequential
    } else {
        minerscope::Exec::Parallel
    };
    let result = match cli.command {
        Command::Ingest(a) => commands::ingest(&a),
        Command::Summarize(a) => commands::summarize(&a),
        Command::Featurize(a) => commands::featurize(&a),
        Command::Synth(a) => commands::synth(&a),
        Command::Cv(a) => commands::cv(&a, exec),
        Command::Train(a) => commands::train(&a, exec),
        Command::Predict(a) => commands::predict(&a),
        Command::Detect(a) => commands::detect(&a, exec),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
