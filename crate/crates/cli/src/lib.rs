//! Command-line pipelines over the temporal relation toolkit: corpus
//! generation and import, scheme conversion, the EM and bootstrapped
//! cross-document learners, consistency repair, evaluation, and the
//! stratified shuffling significance test. Every run writes a
//! manifest from which `rerun` reproduces it byte for byte.

mod commands;
mod records;

pub use records::{
    read_manifest, read_predictions, write_predictions, Manifest, PredictionRecord,
};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use std::path::PathBuf;
use temprel_core::corpus::Scheme;
use temprel_core::emtrl::RepairKind;
use temprel_core::features::FeatureSet;

#[derive(Debug, Parser)]
#[command(name = "temprel", version, about = "Temporal relation learning experiments")]
pub struct Cli {
    /// Cap on worker threads for internal parallelism.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SchemeArg {
    Raw14,
    Norm6,
    Coarse3,
}

impl From<SchemeArg> for Scheme {
    fn from(s: SchemeArg) -> Scheme {
        match s {
            SchemeArg::Raw14 => Scheme::Raw14,
            SchemeArg::Norm6 => Scheme::Norm6,
            SchemeArg::Coarse3 => Scheme::Coarse3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InitArg {
    Random,
    Supervised,
    Rules,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RepairArg {
    None,
    Greedy,
    Ilp,
}

impl From<RepairArg> for RepairKind {
    fn from(r: RepairArg) -> RepairKind {
        match r {
            RepairArg::None => RepairKind::None,
            RepairArg::Greedy => RepairKind::Greedy,
            RepairArg::Ilp => RepairKind::Ilp,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FeaturesArg {
    Basic,
    Extra,
}

impl From<FeaturesArg> for FeatureSet {
    fn from(f: FeaturesArg) -> FeatureSet {
        match f {
            FeaturesArg::Basic => FeatureSet::BcdcBasic,
            FeaturesArg::Extra => FeatureSet::BcdcExtra,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LearnerArg {
    /// Supervised naive count model over the EM feature set.
    Nb,
    /// One-vs-one linear margin model over the pair features.
    Ovo,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic corpus with planted consistent gold labels.
    Synth(SynthArgs),
    /// Import TimeML-annotated documents (EVENT/MAKEINSTANCE/TLINK).
    ImportTimeml(ImportTimemlArgs),
    /// Convert corpus tlinks to another labeling scheme.
    Normalize(NormalizeArgs),
    /// Run the EM temporal relation learner.
    TrainEm(TrainEmArgs),
    /// Predict with a saved EM count model.
    PredictEm(PredictEmArgs),
    /// Train the stage-one general margin model.
    TrainBcdc(TrainBcdcArgs),
    /// Run the full bootstrapped cross-document pipeline.
    RunBcdc(RunBcdcArgs),
    /// Repair posterior predictions into consistent labelings.
    Repair(RepairArgs2),
    /// Score predictions against gold, or cross-validate a learner.
    Evaluate(EvaluateArgs),
    /// Stratified shuffling significance test between two runs.
    Significance(SignificanceArgs),
    /// Re-execute a command from its manifest.
    Rerun(RerunArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 50)]
    pub docs: usize,
    #[arg(long, default_value_t = 5)]
    pub topics: usize,
    #[arg(long, default_value_t = 6)]
    pub events_min: usize,
    #[arg(long, default_value_t = 10)]
    pub events_max: usize,
    #[arg(long, default_value_t = 0.5)]
    pub density: f64,
    #[arg(long, value_enum, default_value_t = SchemeArg::Coarse3)]
    pub scheme: SchemeArg,
    #[arg(long, default_value_t = 0.9)]
    pub informativeness: f64,
    #[arg(long, default_value_t = 0.05)]
    pub noise: f64,
    #[arg(long, default_value_t = 0.7)]
    pub intra_fraction: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ImportTimemlArgs {
    /// TimeML files to import, one document each.
    #[arg(long, required = true, num_args = 1..)]
    pub input: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct NormalizeArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Target scheme.
    #[arg(long, value_enum)]
    pub to: SchemeArg,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainEmArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = SchemeArg::Coarse3)]
    pub scheme: SchemeArg,
    #[arg(long, value_enum, default_value_t = InitArg::Random)]
    pub init: InitArg,
    /// Supervised-initialization fraction of each relation type.
    #[arg(long, default_value_t = 0.1)]
    pub fraction: f64,
    /// Attribute rule file for rule-based initialization.
    #[arg(long)]
    pub rules_file: Option<PathBuf>,
    /// Lexical precedence rules (lemma1<TAB>lemma2<TAB>strength).
    #[arg(long)]
    pub lexical_rules: Option<PathBuf>,
    /// Signal-word rules in the attribute rule format.
    #[arg(long)]
    pub signal_rules: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = RepairArg::None)]
    pub repair: RepairArg,
    #[arg(long, default_value_t = 30)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub param_tol: f64,
    /// Soft (posterior-weighted) M-steps instead of hard counting.
    #[arg(long, default_value_t = false)]
    pub soft: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PredictEmArgs {
    /// Saved count-model dump.
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainBcdcArgs {
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long, value_enum, default_value_t = SchemeArg::Coarse3)]
    pub scheme: SchemeArg,
    #[arg(long, value_enum, default_value_t = FeaturesArg::Extra)]
    pub features: FeaturesArg,
    #[arg(long, default_value_t = 50)]
    pub epochs: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub lambda: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RunBcdcArgs {
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub tests: PathBuf,
    /// Unannotated-document pool used for retrieval and pseudo-labels.
    #[arg(long)]
    pub pool: PathBuf,
    #[arg(long, value_enum, default_value_t = SchemeArg::Coarse3)]
    pub scheme: SchemeArg,
    #[arg(long, value_enum, default_value_t = FeaturesArg::Extra)]
    pub features: FeaturesArg,
    /// N: related documents per test document.
    #[arg(long, default_value_t = 25)]
    pub related_docs: usize,
    /// K: confident pseudo-labels injected per round.
    #[arg(long, default_value_t = 40)]
    pub confident_per_round: usize,
    #[arg(long, default_value_t = 10)]
    pub max_rounds: usize,
    /// Disable specialized-model reuse across related test documents.
    #[arg(long, default_value_t = false)]
    pub no_reuse: bool,
    #[arg(long, default_value_t = 50)]
    pub epochs: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub lambda: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RepairArgs2 {
    /// Predictions with posteriors, grouped per document.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = RepairArg::Greedy)]
    pub repair: RepairArg,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Predictions to score (file mode).
    #[arg(long, required_unless_present = "cv")]
    pub pred: Option<PathBuf>,
    /// Gold corpus (file mode).
    #[arg(long, required_unless_present = "cv")]
    pub gold: Option<PathBuf>,
    /// Cross-validation mode over --input.
    #[arg(long, default_value_t = false)]
    pub cv: bool,
    #[arg(long, required_if_eq("cv", "true"))]
    pub input: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = LearnerArg::Nb)]
    pub learner: LearnerArg,
    #[arg(long, value_enum, default_value_t = SchemeArg::Coarse3)]
    pub scheme: SchemeArg,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    /// Document ids excluded from cross-validation (comma separated).
    #[arg(long, value_delimiter = ',')]
    pub holdout: Vec<String>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SignificanceArgs {
    #[arg(long)]
    pub pred_a: PathBuf,
    #[arg(long)]
    pub pred_b: PathBuf,
    #[arg(long)]
    pub gold: PathBuf,
    /// nt: number of shuffling trials.
    #[arg(long, default_value_t = 10000)]
    pub shuffles: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RerunArgs {
    #[arg(long)]
    pub manifest: PathBuf,
}

/// Entry point: parses argv and dispatches. Returns the process exit
/// code (0 success, 1 domain error, 2 usage error).
pub fn run(args: &[String]) -> u8 {
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
            let _ = e.print();
            return code;
        }
    };
    if let Some(threads) = cli.threads {
        // the global pool can only be sized once per process
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
    let argv: Vec<String> = args.iter().skip(1).cloned().collect();
    match commands::dispatch(cli.command, &argv) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}

