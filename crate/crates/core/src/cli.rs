//! The `weaklabel` command-line tool.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use crate::corpus::Corpus;
use crate::cotrain::{annotate, CoTrainConfig, CoTrainError, CoTrainer};
use crate::harness::{
    gen_synthetic, run_data_scaling, run_noise_sweep, run_strategy_comparison, HarnessError, SynthConfig, SynthCorpus,
};
use crate::io::RunManifest;
use crate::labels::TrainingSet;
use crate::learner::LearnError;
use crate::lexicon::Lexicon;
use crate::metrics::{evaluate, GoldLabels};
use crate::ontology::Ontology;
use crate::resolve::Strategy;

#[derive(Parser, Debug)]
#[command(name = "weaklabel", version, about = "Annotate samples with ontology classes without labeled training data")]
pub struct Cli {
    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Co-train on a corpus and write thresholded annotations.
    Annotate(AnnotateArgs),
    /// Score predictions against gold labels.
    Evaluate(EvaluateArgs),
    /// Generate a synthetic corpus.
    Synth(SynthArgs),
    /// Co-train from increasingly corrupted distant labels.
    NoiseSweep(NoiseArgs),
    /// Compare the five resolution strategies.
    StrategyCompare(CompareArgs),
    /// Co-train on growing subsamples of a synthetic corpus.
    DataScaling(ScalingArgs),
}

#[derive(Args, Debug)]
#[command(group(clap::ArgGroup::new("onto").required(true).args(["ontology", "obo"])))]
struct AnnotateArgs {
    /// Samples, one JSON object per line.
    #[arg(long)]
    samples: PathBuf,
    /// Ontology as TSV (`id`, `name`, `parents`, optional `synonyms`).
    #[arg(long)]
    ontology: Option<PathBuf>,
    /// Ontology in OBO format.
    #[arg(long)]
    obo: Option<PathBuf>,
    /// Lexicon TSV (`class_id`, `term`); defaults to class names and synonyms.
    #[arg(long)]
    lexicon: Option<PathBuf>,
    /// Trusted labels added to every training set.
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Annotation TSV to write.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    cotrain: CoTrainArgs,
    /// Directory for the trained models.
    #[arg(long)]
    model_out: Option<PathBuf>,
    /// Per-iteration history JSON.
    #[arg(long)]
    history: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
struct CoTrainArgs {
    #[arg(long, default_value = "relation")]
    resolve: Strategy,
    #[arg(long, default_value_t = 5)]
    iters: usize,
    #[arg(long, default_value_t = 0.3)]
    threshold: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl CoTrainArgs {
    fn config(&self) -> CoTrainConfig {
        CoTrainConfig {
            n_iter: self.iters,
            tau: self.threshold,
            strategy: self.resolve,
            seed: self.seed,
            ..CoTrainConfig::default()
        }
    }
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    /// Scored predictions (`sample_id`, `class_id`, `score`).
    #[arg(long)]
    pred: PathBuf,
    /// Gold labels (`sample_id`, `class_id`).
    #[arg(long)]
    gold: PathBuf,
    #[arg(long)]
    ontology: PathBuf,
    /// Precision-recall curve TSV.
    #[arg(long)]
    curve: Option<PathBuf>,
    /// Report JSON; printed to stdout when omitted.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
struct SynthFlags {
    #[arg(long, default_value_t = SynthConfig::default().n_classes)]
    n_classes: usize,
    #[arg(long, default_value_t = SynthConfig::default().n_samples)]
    n_samples: usize,
    #[arg(long, default_value_t = SynthConfig::default().feature_dim)]
    feature_dim: usize,
    #[arg(long, default_value_t = SynthConfig::default().dag_depth)]
    dag_depth: usize,
    #[arg(long, default_value_t = SynthConfig::default().synonyms_per_class)]
    synonyms_per_class: usize,
    #[arg(long, default_value_t = SynthConfig::default().held_out_synonym_fraction)]
    held_out_synonym_fraction: f64,
    #[arg(long, default_value_t = SynthConfig::default().ambiguity_fraction)]
    ambiguity_fraction: f64,
    #[arg(long, default_value_t = SynthConfig::default().missing_text_fraction)]
    missing_text_fraction: f64,
    #[arg(long, default_value_t = SynthConfig::default().feature_noise_sigma)]
    feature_noise_sigma: f64,
    /// Seed for corpus generation.
    #[arg(long, default_value_t = SynthConfig::default().seed)]
    synth_seed: u64,
}

impl SynthFlags {
    fn config(&self) -> SynthConfig {
        SynthConfig {
            n_classes: self.n_classes,
            n_samples: self.n_samples,
            feature_dim: self.feature_dim,
            dag_depth: self.dag_depth,
            synonyms_per_class: self.synonyms_per_class,
            held_out_synonym_fraction: self.held_out_synonym_fraction,
            ambiguity_fraction: self.ambiguity_fraction,
            missing_text_fraction: self.missing_text_fraction,
            feature_noise_sigma: self.feature_noise_sigma,
            seed: self.synth_seed,
        }
    }
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[command(flatten)]
    synth: SynthFlags,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args, Debug)]
struct CompareArgs {
    #[command(flatten)]
    synth: SynthFlags,
    #[command(flatten)]
    cotrain: ExperimentArgs,
    #[arg(long)]
    out_dir: PathBuf,
}

/// Co-training flags for experiments; the strategy is chosen per
/// experiment.
#[derive(Args, Debug, Clone)]
struct ExperimentArgs {
    #[arg(long, default_value_t = 5)]
    iters: usize,
    #[arg(long, default_value_t = 0.3)]
    threshold: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct NoiseArgs {
    #[command(flatten)]
    synth: SynthFlags,
    #[command(flatten)]
    cotrain: ExperimentArgs,
    #[arg(long, default_value = "relation")]
    resolve: Strategy,
    /// Comma-separated perturbation fractions, ascending.
    #[arg(long, value_delimiter = ',', default_value = "0,0.2,0.4,0.6,0.8,0.95")]
    fractions: Vec<f64>,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args, Debug)]
struct ScalingArgs {
    #[command(flatten)]
    synth: SynthFlags,
    #[command(flatten)]
    cotrain: ExperimentArgs,
    #[arg(long, default_value = "relation")]
    resolve: Strategy,
    /// Comma-separated corpus fractions in (0, 1].
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.3,1.0")]
    fractions: Vec<f64>,
    #[arg(long, default_value_t = 5)]
    repeats: usize,
    #[arg(long)]
    out_dir: PathBuf,
}

impl ExperimentArgs {
    fn config(&self, strategy: Strategy) -> CoTrainConfig {
        CoTrainConfig { n_iter: self.iters, tau: self.threshold, strategy, seed: self.seed, ..CoTrainConfig::default() }
    }
}

/// A failure with its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

pub const EXIT_INPUT: u8 = 2;
pub const EXIT_NO_SUPERVISION: u8 = 3;
pub const EXIT_DIVERGENCE: u8 = 4;
const EXIT_OTHER: u8 = 1;

fn input_error(path: &Path, err: impl fmt::Display) -> Failure {
    Failure { code: EXIT_INPUT, message: format!("{}: {err}", path.display()) }
}

fn io_error(path: &Path, err: std::io::Error) -> Failure {
    Failure { code: EXIT_OTHER, message: format!("{}: {err}", path.display()) }
}

impl From<CoTrainError> for Failure {
    fn from(e: CoTrainError) -> Self {
        let code = match &e {
            CoTrainError::NoSupervision => EXIT_NO_SUPERVISION,
            CoTrainError::Learn(LearnError::Divergence { .. }) => EXIT_DIVERGENCE,
            CoTrainError::InvalidConfig(_) | CoTrainError::UnknownLabeledSample(_) => EXIT_INPUT,
            CoTrainError::Learn(LearnError::InvalidConfig(_)) => EXIT_INPUT,
            _ => EXIT_OTHER,
        };
        Failure { code, message: e.to_string() }
    }
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::CoTrain(e) => e.into(),
            other => Failure { code: EXIT_INPUT, message: other.to_string() },
        }
    }
}

/// Reads a file and records its digest.
fn read_input(manifest: &mut RunManifest, path: &Path) -> Result<String, Failure> {
    let bytes = fs::read(path).map_err(|e| input_error(path, e))?;
    manifest.add_input(path, &bytes);
    String::from_utf8(bytes).map_err(|e| input_error(path, e))
}

fn write_output(manifest: &mut RunManifest, path: &Path, body: &str) -> Result<(), Failure> {
    manifest.write_output(path, body.as_bytes()).map_err(|e| io_error(path, e))
}

fn write_manifest(manifest: &RunManifest, path: &Path) -> Result<(), Failure> {
    crate::io::write_atomic(path, manifest.to_json().as_bytes()).map_err(|e| io_error(path, e))
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

fn sibling_manifest(out: &Path) -> PathBuf {
    let mut name = out.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".manifest.json");
    out.with_file_name(name)
}

fn cmd_annotate(args: &AnnotateArgs) -> Result<(), Failure> {
    let cfg = args.cotrain.config();
    let mut manifest = RunManifest::new("annotate", cfg.seed, serde_json::Value::Null);

    let ontology = match (&args.ontology, &args.obo) {
        (Some(p), _) => Ontology::parse_tsv(&read_input(&mut manifest, p)?).map_err(|e| input_error(p, e))?,
        (None, Some(p)) => Ontology::parse_obo(&read_input(&mut manifest, p)?).map_err(|e| input_error(p, e))?,
        (None, None) => unreachable!("clap requires one ontology source"),
    };
    let corpus =
        Corpus::parse_jsonl(&read_input(&mut manifest, &args.samples)?).map_err(|e| input_error(&args.samples, e))?;
    let lexicon = match &args.lexicon {
        Some(p) => Lexicon::parse_tsv(&read_input(&mut manifest, p)?, &ontology).map_err(|e| input_error(p, e))?,
        None => Lexicon::from_ontology(&ontology),
    };
    let extra = match &args.labels {
        Some(p) => {
            Some(TrainingSet::parse_tsv(&read_input(&mut manifest, p)?, &ontology).map_err(|e| input_error(p, e))?)
        }
        None => None,
    };
    manifest.config = json!({
        "cotrain": &cfg,
        "lexicon": if args.lexicon.is_some() { "file" } else { "ontology names and synonyms" },
        "extra_labels": args.labels.is_some(),
    });
    let cfg = CoTrainConfig { extra_labeled: extra, ..cfg };

    let distant = lexicon.distant_labels(corpus.samples());
    log::info!("{} of {} samples matched the lexicon", distant.len(), corpus.len());
    let tau = cfg.tau;
    let out = CoTrainer::new(&corpus, &ontology, distant, cfg)?.run()?;
    let annotations = annotate(&out.main, &corpus, tau).map_err(CoTrainError::from)?;

    write_output(&mut manifest, &args.out, &annotations.to_tsv(&ontology))?;
    if let Some(dir) = &args.model_out {
        write_output(&mut manifest, &dir.join("main_model.json"), &out.main.to_json())?;
        write_output(&mut manifest, &dir.join("aux_model.json"), &out.aux.to_json())?;
    }
    if let Some(p) = &args.history {
        write_output(&mut manifest, p, &to_json(&out.history))?;
    }
    write_manifest(&manifest, &sibling_manifest(&args.out))
}

fn cmd_evaluate(args: &EvaluateArgs) -> Result<(), Failure> {
    let mut manifest = RunManifest::new("evaluate", 0, json!({}));
    let ontology =
        Ontology::parse_tsv(&read_input(&mut manifest, &args.ontology)?).map_err(|e| input_error(&args.ontology, e))?;
    let pred = TrainingSet::parse_tsv(&read_input(&mut manifest, &args.pred)?, &ontology)
        .map_err(|e| input_error(&args.pred, e))?;
    let gold = GoldLabels::parse_tsv(&read_input(&mut manifest, &args.gold)?, &ontology)
        .map_err(|e| input_error(&args.gold, e))?;
    let (report, curve) = evaluate(&pred, &gold, &ontology);
    let report_json = to_json(&report);
    if let Some(p) = &args.curve {
        write_output(&mut manifest, p, &curve.to_tsv())?;
    }
    match &args.report {
        Some(p) => {
            write_output(&mut manifest, p, &report_json)?;
            write_manifest(&manifest, &sibling_manifest(p))?;
        }
        None => {
            print!("{report_json}");
            if let Some(p) = &args.curve {
                write_manifest(&manifest, &sibling_manifest(p))?;
            }
        }
    }
    Ok(())
}

fn synth_corpus(flags: &SynthFlags) -> Result<(SynthConfig, SynthCorpus), Failure> {
    let cfg = flags.config();
    let corpus = gen_synthetic(&cfg)?;
    Ok((cfg, corpus))
}

fn cmd_synth(args: &SynthArgs) -> Result<(), Failure> {
    let (cfg, corpus) = synth_corpus(&args.synth)?;
    let mut manifest = RunManifest::new("synth", cfg.seed, json!({ "synth": &cfg }));
    for (name, body) in [
        (SynthCorpus::ONTOLOGY_FILE, corpus.ontology.to_tsv()),
        (SynthCorpus::LEXICON_FILE, corpus.lexicon.to_tsv(&corpus.ontology)),
        (SynthCorpus::SAMPLES_FILE, corpus.corpus.to_jsonl()),
        (SynthCorpus::GOLD_FILE, corpus.gold.to_tsv(&corpus.ontology)),
    ] {
        write_output(&mut manifest, &args.out_dir.join(name), &body)?;
    }
    write_manifest(&manifest, &args.out_dir.join("manifest.json"))
}

fn write_report(
    mut manifest: RunManifest,
    out_dir: &Path,
    report: &impl Serialize,
    tsv: String,
) -> Result<(), Failure> {
    write_output(&mut manifest, &out_dir.join("report.json"), &to_json(report))?;
    write_output(&mut manifest, &out_dir.join("report.tsv"), &tsv)?;
    write_manifest(&manifest, &out_dir.join("manifest.json"))
}

fn cmd_strategy_compare(args: &CompareArgs) -> Result<(), Failure> {
    let (synth, corpus) = synth_corpus(&args.synth)?;
    let cfg = args.cotrain.config(Strategy::Relation);
    let manifest = RunManifest::new("strategy-compare", cfg.seed, json!({ "synth": &synth, "cotrain": &cfg }));
    let report = run_strategy_comparison(&corpus, &cfg)?;
    write_report(manifest, &args.out_dir, &report, report.to_tsv())
}

fn cmd_noise_sweep(args: &NoiseArgs) -> Result<(), Failure> {
    let (synth, corpus) = synth_corpus(&args.synth)?;
    let cfg = args.cotrain.config(args.resolve);
    let manifest = RunManifest::new(
        "noise-sweep",
        cfg.seed,
        json!({ "synth": &synth, "cotrain": &cfg, "fractions": &args.fractions }),
    );
    let report = run_noise_sweep(&corpus, &cfg, &args.fractions)?;
    write_report(manifest, &args.out_dir, &report, report.to_tsv())
}

fn cmd_data_scaling(args: &ScalingArgs) -> Result<(), Failure> {
    let (synth, corpus) = synth_corpus(&args.synth)?;
    let cfg = args.cotrain.config(args.resolve);
    let manifest = RunManifest::new(
        "data-scaling",
        cfg.seed,
        json!({ "synth": &synth, "cotrain": &cfg, "fractions": &args.fractions, "repeats": args.repeats }),
    );
    let report = run_data_scaling(&corpus, &cfg, &args.fractions, args.repeats)?;
    write_report(manifest, &args.out_dir, &report, report.to_tsv())
}

/// Runs a parsed command line.
pub fn run(cli: &Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::Annotate(a) => cmd_annotate(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Synth(a) => cmd_synth(a),
        Command::NoiseSweep(a) => cmd_noise_sweep(a),
        Command::StrategyCompare(a) => cmd_strategy_compare(a),
        Command::DataScaling(a) => cmd_data_scaling(a),
    }
}

pub fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).format_timestamp(None).init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code)
        }
    }
}
