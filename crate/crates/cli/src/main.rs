//! `earlybird` command-line runner.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.

mod commands;
mod config;
mod manifest;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// Environment variable naming the default root for run directories.
pub const OUT_ROOT_ENV: &str = "EARLYBIRD_OUT";

#[derive(Debug)]
pub enum CliError {
    /// Bad flags or config; exit 2.
    Config(String),
    /// Anything that went wrong while running; exit 1.
    Runtime(String),
}

impl CliError {
    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Runtime(format!("{}: {e}", path.display()))
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl From<earlybird::Error> for CliError {
    fn from(e: earlybird::Error) -> Self {
        use earlybird::Error as E;
        match e {
            E::Config(_) | E::UnknownVariant(_) => CliError::Config(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Runtime(m) => write!(f, "error: {m}"),
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "earlybird", version, about = "Earliness-guided edge reweighting for fake news detection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a synthetic dataset with a planted earliness signal.
    Generate(GenerateArgs),
    /// Load and validate a dataset directory and print a summary.
    Ingest(IngestArgs),
    /// Split a dataset into temporal bands and write band membership.
    Split(SplitArgs),
    /// Write FNA histograms overall and by earliness group.
    Analyze(AnalyzeArgs),
    /// Train on the train band, select on val, report on test.
    Train(TrainArgs),
    /// Evaluate a checkpoint on the val and test bands.
    Evaluate(EvaluateArgs),
    /// Run a variants x seeds ablation grid.
    Ablate(AblateArgs),
}

#[derive(Args, Debug, Clone, Default)]
pub struct ConfigArgs {
    /// Config file (TOML sections: split, earliness, train, synthetic).
    #[arg(long, short)]
    pub config: Option<PathBuf>,
    /// Named preset used for keys the config leaves out.
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Train/val/test fractions, e.g. 0.7,0.1,0.2.
    #[arg(long, value_delimiter = ',', num_args = 3)]
    pub fractions: Option<Vec<f64>>,
    /// Explicit cut timestamps t_train,t_val,t_test.
    #[arg(long, value_delimiter = ',', num_args = 3, allow_negative_numbers = true)]
    pub cuts: Option<Vec<i64>>,
    #[arg(long)]
    pub deadline_seconds: Option<i64>,
    #[arg(long)]
    pub user_threshold: Option<f64>,
    #[arg(long)]
    pub min_engagements: Option<usize>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct TrainFlags {
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Clean and noisy edges sampled per epoch.
    #[arg(long, short = 'k')]
    pub k: Option<usize>,
    #[arg(long)]
    pub margin: Option<f64>,
    /// joint, rand, no-user, no-eng, ratio or node-feat.
    #[arg(long)]
    pub feature_variant: Option<String>,
    /// rank, none or bc.
    #[arg(long)]
    pub loss: Option<String>,
    /// sum or mean.
    #[arg(long)]
    pub reduction: Option<String>,
    /// Scale val/test count features by the training maxima.
    #[arg(long)]
    pub normalization_reuse: bool,
}

#[derive(Args, Debug)]
pub struct GenerateArgs {
    /// Directory to write articles.tsv, engagements.tsv and features.txt.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub config: ConfigArgs,
    #[arg(long)]
    pub n_articles: Option<usize>,
    #[arg(long)]
    pub n_users: Option<usize>,
    #[arg(long)]
    pub fake_fraction: Option<f64>,
    #[arg(long)]
    pub early_bias: Option<f64>,
    #[arg(long)]
    pub late_bias: Option<f64>,
    #[arg(long)]
    pub feature_dim: Option<usize>,
    #[arg(long)]
    pub feature_separation: Option<f64>,
}

#[derive(Args, Debug)]
pub struct IngestArgs {
    /// Dataset directory.
    #[arg(long)]
    pub data: PathBuf,
    /// Also write the validated, sorted dataset here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SplitArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Run directory; defaults to a fresh directory under the output root.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write each band's edge list, node table and edge features.
    #[arg(long)]
    pub graphs: bool,
}

#[derive(Args, Debug)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[command(flatten)]
    pub config: ConfigArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    pub bins: usize,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[command(flatten)]
    pub config: ConfigArgs,
    #[command(flatten)]
    pub train: TrainFlags,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Checkpoint written by `train`.
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct AblateArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[command(flatten)]
    pub config: ConfigArgs,
    #[command(flatten)]
    pub train: TrainFlags,
    /// Comma-separated variants: full (or dawn), no-rank, bc, rand, no-user,
    /// no-eng, ratio, nf.
    #[arg(long, default_value = "full,no-rank,bc,rand,no-user,no-eng,ratio,nf")]
    pub variants: String,
    /// Number of seeds, counting up from the configured seed.
    #[arg(long, default_value_t = 5)]
    pub seeds: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate(a) => commands::generate(&a),
        Command::Ingest(a) => commands::ingest(&a),
        Command::Split(a) => commands::split(&a),
        Command::Analyze(a) => commands::analyze(&a),
        Command::Train(a) => commands::train(&a),
        Command::Evaluate(a) => commands::evaluate_cmd(&a),
        Command::Ablate(a) => commands::ablate(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("earlybird: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
