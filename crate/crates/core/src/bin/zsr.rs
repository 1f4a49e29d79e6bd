use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use zsr::checkpoint;
use zsr::data::{generate_synthetic, load_manifest, split_classes, Protocol, SyntheticSpec};
use zsr::encoder::EncoderConfig;
use zsr::gradcheck::GradCheck;
use zsr::gradsuite::run_suite;
use zsr::harness::{
    read_report, write_report, Experiment, ExperimentConfig, RunReport, DEFAULT_BATCH, DEFAULT_EPOCHS, DEFAULT_LR,
    DEFAULT_RUNS,
};
use zsr::model::{Modality, Model, ModelConfig, RGB_CHANNELS};
use zsr::rng::derive_seed;
use zsr::temporal::DEFAULT_MAX_FRAMES;
use zsr::zeroshot::Objective;

#[derive(Parser)]
#[command(name = "zsr", version, about = "Two-stream zero-shot sign and action recognition")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a synthetic RGB-D dataset with manifest and embedding table.
    GenData(GenDataArgs),
    /// Print the seen/unseen class split for a protocol and seed.
    Split(SplitArgs),
    /// Train one run's model on its seen classes and save a checkpoint.
    Train(TrainArgs),
    /// Evaluate a checkpoint on one run's unseen classes.
    Eval(EvalArgs),
    /// Split, train and evaluate several runs and write aggregate reports.
    Protocol(ProtocolArgs),
    /// Finite-difference check of every backward pass.
    GradCheck(GradCheckArgs),
    /// Rewrite the confusion CSV of a metrics file and print its summary.
    Report(ReportArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ProtocolArg {
    P1,
    P2,
}

impl From<ProtocolArg> for Protocol {
    fn from(p: ProtocolArg) -> Self {
        match p {
            ProtocolArg::P1 => Protocol::P1,
            ProtocolArg::P2 => Protocol::P2,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModalityArg {
    Rgb,
    Depth,
    Both,
}

impl From<ModalityArg> for Modality {
    fn from(m: ModalityArg) -> Self {
        match m {
            ModalityArg::Rgb => Modality::Rgb,
            ModalityArg::Depth => Modality::Depth,
            ModalityArg::Both => Modality::Both,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ObjectiveArg {
    Softmax,
    Regression,
}

#[derive(Args)]
struct GenDataArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 10)]
    classes: usize,
    #[arg(long, default_value_t = 8)]
    attributes: usize,
    #[arg(long, default_value_t = 30)]
    samples: usize,
    #[arg(long, default_value_t = 6)]
    min_frames: usize,
    #[arg(long, default_value_t = 10)]
    max_frames: usize,
    #[arg(long, default_value_t = 0.05)]
    noise: f64,
    #[arg(long, default_value_t = 48)]
    frame_size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct SplitArgs {
    /// Number of classes; read from --manifest when omitted.
    #[arg(long, required_unless_present = "manifest")]
    classes: Option<usize>,
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "p2")]
    protocol: ProtocolArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Clone)]
struct ModelArgs {
    #[arg(long, value_enum, default_value = "both")]
    modality: ModalityArg,
    #[arg(long, default_value_t = 1024, value_parser = parse_hidden)]
    hidden: usize,
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u8).range(1..=2))]
    fc: u8,
    #[arg(long, default_value_t = 64)]
    embed_dim: usize,
    #[arg(long, default_value_t = 4)]
    heads: usize,
    #[arg(long, default_value_t = 2)]
    layers: usize,
    #[arg(long, default_value_t = 4)]
    mlp_ratio: usize,
    /// Side of the square segment crops.
    #[arg(long, default_value_t = 32)]
    segment_size: usize,
    #[arg(long, default_value_t = DEFAULT_MAX_FRAMES)]
    max_frames: usize,
    #[arg(long, value_enum, default_value = "softmax")]
    objective: ObjectiveArg,
    /// Softmax temperature scale on cosine scores.
    #[arg(long, default_value_t = zsr::zeroshot::DEFAULT_TAU)]
    tau: f64,
}

fn parse_hidden(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(n) if zsr::temporal::HIDDEN_CHOICES.contains(&n) => Ok(n),
        _ => Err(format!("expected one of {:?}", zsr::temporal::HIDDEN_CHOICES)),
    }
}

impl ModelArgs {
    fn config(&self) -> ModelConfig {
        ModelConfig {
            encoder: EncoderConfig {
                embed_dim: self.embed_dim,
                num_heads: self.heads,
                num_layers: self.layers,
                mlp_ratio: self.mlp_ratio,
                segment_size: self.segment_size,
                channels: RGB_CHANNELS,
            },
            hidden: self.hidden,
            fc_count: self.fc as usize,
            modality: self.modality.into(),
            objective: match self.objective {
                ObjectiveArg::Softmax => Objective::SoftmaxCosine { tau: self.tau },
                ObjectiveArg::Regression => Objective::CosineRegression,
            },
            max_frames: self.max_frames,
        }
    }
}

#[derive(Args, Clone)]
struct ExperimentArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    embeddings: PathBuf,
    #[arg(long, value_enum, default_value = "p2")]
    protocol: ProtocolArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_EPOCHS)]
    epochs: usize,
    #[arg(long, default_value_t = DEFAULT_LR)]
    lr: f64,
    #[arg(long, default_value_t = DEFAULT_BATCH)]
    batch: usize,
    #[command(flatten)]
    model: ModelArgs,
    /// Suppress per-epoch progress on stderr.
    #[arg(long)]
    quiet: bool,
}

impl ExperimentArgs {
    fn config(&self, runs: usize) -> ExperimentConfig {
        ExperimentConfig {
            manifest: self.manifest.clone(),
            embeddings: self.embeddings.clone(),
            protocol: self.protocol.into(),
            seed: self.seed,
            runs,
            model: self.model.config(),
            epochs: self.epochs,
            lr: self.lr,
            batch: self.batch,
        }
    }

    fn progress(&self) -> impl FnMut(&str) {
        let quiet = self.quiet;
        move |msg: &str| {
            if !quiet {
                eprintln!("{msg}");
            }
        }
    }
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    exp: ExperimentArgs,
    /// Which run of the protocol to train; its split seed is seed + run.
    #[arg(long, default_value_t = 0)]
    run: usize,
    #[arg(long)]
    checkpoint: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    exp: ExperimentArgs,
    #[arg(long, default_value_t = 0)]
    run: usize,
    #[arg(long)]
    checkpoint: PathBuf,
    /// Directory for metrics.json and confusion.csv.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ProtocolArgs {
    #[command(flatten)]
    exp: ExperimentArgs,
    #[arg(long, default_value_t = DEFAULT_RUNS)]
    runs: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GradCheckArgs {
    #[arg(long, num_args = 1.., default_values_t = [0u64, 1, 2])]
    seeds: Vec<u64>,
}

#[derive(Args)]
struct ReportArgs {
    /// A metrics.json written by `protocol` or `eval`.
    #[arg(long)]
    metrics: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

fn summary(report: &RunReport) -> String {
    format!(
        "protocol {} modality {} hidden {} fc {}: mean unseen accuracy {:.4} ± {:.4} over {} run(s)",
        report.protocol,
        report.modality,
        report.hidden,
        report.fc,
        report.mean_accuracy,
        report.std_accuracy,
        report.runs.len()
    )
}

fn print_outputs(paths: (PathBuf, PathBuf)) {
    println!("wrote {}", paths.0.display());
    println!("wrote {}", paths.1.display());
}

fn run(cli: Cli) -> zsr::Result<bool> {
    match cli.command {
        Command::GenData(a) => {
            let spec = SyntheticSpec {
                classes: a.classes,
                attribute_dim: a.attributes,
                samples_per_class: a.samples,
                min_frames: a.min_frames,
                max_frames: a.max_frames,
                noise: a.noise,
                seed: a.seed,
                frame_size: a.frame_size,
            };
            let ds = generate_synthetic(&spec, &a.out)?;
            println!(
                "wrote {} samples of {} classes to {}",
                ds.manifest.samples.len(),
                ds.manifest.classes.len(),
                a.out.display()
            );
            println!("manifest: {}", ds.manifest_path.display());
            println!("embeddings: {}", ds.embeddings_path.display());
        }
        Command::Split(a) => {
            let (k, names) = match (&a.manifest, a.classes) {
                (Some(path), _) => {
                    let m = load_manifest(path)?;
                    (m.classes.len(), Some(m.classes))
                }
                (None, Some(k)) => (k, None),
                (None, None) => unreachable!("clap requires one of them"),
            };
            let split = split_classes(k, a.protocol.into(), a.seed)?;
            let mut value = serde_json::to_value(&split)?;
            if let Some(names) = names {
                let lookup = |ids: &[usize]| ids.iter().map(|&i| names[i].clone()).collect::<Vec<_>>();
                value["seen_names"] = serde_json::json!(lookup(&split.seen));
                value["unseen_names"] = serde_json::json!(lookup(&split.unseen));
            }
            println!("{}", serde_json::to_string_pretty(&value)?);
        }
        Command::Train(a) => {
            let exp = Experiment::load(a.exp.config(a.run + 1))?;
            let trained = exp.train_run(a.run, &mut a.exp.progress())?;
            checkpoint::save(&trained.model, &a.checkpoint)?;
            let last = trained.history.last().expect("at least one epoch");
            println!(
                "run {} (seed {}): final loss {:.4}, seen accuracy {:.4}",
                a.run, trained.seed, last.mean_loss, last.accuracy
            );
            println!("wrote {}", a.checkpoint.display());
        }
        Command::Eval(a) => {
            let cfg = a.exp.config(a.run + 1);
            let exp = Experiment::load(cfg.clone())?;
            let mut model = Model::new(cfg.model, derive_seed(cfg.run_seed(a.run), "model"))?;
            checkpoint::load(&mut model, &a.checkpoint)?;
            let result = exp.evaluate_model(&model, a.run, &[])?;
            println!(
                "run {} (seed {}): unseen accuracy {:.4} on {} samples",
                a.run, result.seed, result.accuracy, result.test_samples
            );
            if let Some(out) = &a.out {
                let one = ExperimentConfig { runs: 1, ..cfg };
                let report = RunReport::aggregate(&one, &exp.manifest.classes, vec![result]);
                print_outputs(write_report(&report, out)?);
            }
        }
        Command::Protocol(a) => {
            let exp = Experiment::load(a.exp.config(a.runs))?;
            let report = zsr::harness::run_loaded(&exp, &mut a.exp.progress())?;
            println!("{}", summary(&report));
            print_outputs(write_report(&report, &a.out)?);
        }
        Command::GradCheck(a) => {
            let reports = run_suite(&a.seeds, &GradCheck::default());
            for r in &reports {
                println!("{r}");
            }
            let failed = reports.iter().filter(|r| !r.passed()).count();
            println!("{} checks, {failed} failed", reports.len());
            return Ok(failed == 0);
        }
        Command::Report(a) => {
            let report = read_report(&a.metrics)?;
            println!("{}", summary(&report));
            print_outputs(write_report(&report, &a.out)?);
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
