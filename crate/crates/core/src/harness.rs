//! Training, evaluation, multi-run protocol experiments and reports.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{load_manifest_for, prepare_all, split_classes, DatasetManifest, Protocol};
use crate::error::{Error, Result};
use crate::formats::AccessLog;
use crate::model::{ClipInput, Model, ModelConfig};
use crate::param::{Adam, Module};
use crate::rng::{derive_seed, SplitMix64};
use crate::tensor::Tensor;
use crate::zeroshot::{classify, loss, ClassEmbeddingTable};

pub const DEFAULT_BATCH: usize = 8;
pub const DEFAULT_EPOCHS: usize = 30;
pub const DEFAULT_RUNS: usize = 10;
pub const DEFAULT_LR: f64 = 1e-3;

/// A training or test sample: prepared clip plus class name.
pub type Sample<'a> = (&'a ClipInput, &'a str);

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub mean_loss: f64,
    pub accuracy: f64,
}

/// One pass over `samples` in an order shuffled by `shuffle_seed`, with an
/// Adam step after each mini-batch. Accuracy is measured on the forward
/// passes of the epoch.
pub fn train_epoch(
    model: &mut Model,
    samples: &[Sample<'_>],
    seen: &ClassEmbeddingTable,
    adam: &Adam,
    batch: usize,
    shuffle_seed: u64,
) -> Result<EpochMetrics> {
    if samples.is_empty() {
        return Err(Error::Protocol("no training samples".into()));
    }
    if batch == 0 {
        return Err(Error::Config("batch size must be at least 1".into()));
    }
    let labels = samples
        .iter()
        .map(|(_, name)| {
            seen.index_of(name)
                .ok_or_else(|| Error::Protocol(format!("training sample of class {name:?} is not a seen class")))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut order: Vec<usize> = (0..samples.len()).collect();
    SplitMix64::new(shuffle_seed).shuffle(&mut order);
    let objective = model.config.objective;
    let (mut total_loss, mut correct) = (0.0, 0usize);
    model.zero_grad();
    for chunk in order.chunks(batch) {
        let clips: Vec<&ClipInput> = chunk.iter().map(|&i| samples[i].0).collect();
        let (z, cache) = model.forward(&clips)?;
        let mut dz = Tensor::zeros(z.shape());
        let scale = 1.0 / chunk.len() as f64;
        for (r, &i) in chunk.iter().enumerate() {
            let out = loss(z.row(r), labels[i], seen, objective)?;
            total_loss += out.loss;
            correct += (out.predicted() == labels[i]) as usize;
            for (d, g) in dz.row_mut(r).iter_mut().zip(&out.grad) {
                *d = g * scale;
            }
        }
        model.backward(&cache, &dz);
        adam.step(model);
    }
    let n = samples.len() as f64;
    Ok(EpochMetrics {
        mean_loss: total_loss / n,
        accuracy: correct as f64 / n,
    })
}

/// Anything that maps clips to predicted embeddings.
pub trait Predictor {
    fn predict(&self, clips: &[&ClipInput]) -> Result<Vec<Vec<f64>>>;
}

impl Predictor for Model {
    fn predict(&self, clips: &[&ClipInput]) -> Result<Vec<Vec<f64>>> {
        Model::predict(self, clips, DEFAULT_BATCH)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub correct: usize,
    pub total: usize,
    pub accuracy: f64,
    /// `confusion[true][predicted]`, indexed like the candidate table.
    pub confusion: Vec<Vec<usize>>,
    pub predictions: Vec<usize>,
}

/// Nearest-neighbour classification of every sample against `table`.
pub fn evaluate<P: Predictor + ?Sized>(
    model: &P,
    samples: &[Sample<'_>],
    table: &ClassEmbeddingTable,
) -> Result<Evaluation> {
    if samples.is_empty() {
        return Err(Error::Protocol("empty test set".into()));
    }
    let truth = samples
        .iter()
        .map(|(_, name)| {
            table
                .index_of(name)
                .ok_or_else(|| Error::Protocol(format!("test sample of class {name:?} is not a candidate class")))
        })
        .collect::<Result<Vec<_>>>()?;
    let clips: Vec<&ClipInput> = samples.iter().map(|(c, _)| *c).collect();
    let z = model.predict(&clips)?;
    let k = table.len();
    let mut confusion = vec![vec![0usize; k]; k];
    let mut predictions = Vec::with_capacity(z.len());
    for (zi, &t) in z.iter().zip(&truth) {
        let p = classify(zi, table)?;
        confusion[t][p] += 1;
        predictions.push(p);
    }
    let correct = (0..k).map(|i| confusion[i][i]).sum::<usize>();
    Ok(Evaluation {
        correct,
        total: samples.len(),
        accuracy: correct as f64 / samples.len() as f64,
        confusion,
        predictions,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub manifest: PathBuf,
    pub embeddings: PathBuf,
    pub protocol: Protocol,
    pub seed: u64,
    pub runs: usize,
    pub model: ModelConfig,
    pub epochs: usize,
    pub lr: f64,
    pub batch: usize,
}

impl ExperimentConfig {
    pub fn new(manifest: PathBuf, embeddings: PathBuf) -> Self {
        ExperimentConfig {
            manifest,
            embeddings,
            protocol: Protocol::P2,
            seed: 0,
            runs: DEFAULT_RUNS,
            model: ModelConfig::desk(),
            epochs: DEFAULT_EPOCHS,
            lr: DEFAULT_LR,
            batch: DEFAULT_BATCH,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 {
            return Err(Error::Config("runs must be at least 1".into()));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if self.batch == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        if !(self.lr >= 0.0) || !self.lr.is_finite() {
            return Err(Error::Config(format!("learning rate must be finite and non-negative, got {}", self.lr)));
        }
        self.model.validate()
    }

    /// Seed of run `r`.
    pub fn run_seed(&self, r: usize) -> u64 {
        self.seed.wrapping_add(r as u64)
    }
}

/// Manifest, table and prepared clips shared by every run of an experiment.
#[derive(Clone, Debug)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub manifest: DatasetManifest,
    pub table: ClassEmbeddingTable,
    pub clips: Vec<ClipInput>,
    pub access: AccessLog,
}

impl Experiment {
    /// Loads and validates the data a model of the configured modality needs.
    pub fn load(config: ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let mut access = AccessLog::default();
        let manifest = load_manifest_for(&config.manifest, config.model.modality, &mut access)?;
        access.record(&config.embeddings);
        let table = ClassEmbeddingTable::read(&config.embeddings)?;
        let missing: Vec<&String> = manifest
            .classes
            .iter()
            .filter(|c| table.index_of(c).is_none())
            .collect();
        if !missing.is_empty() {
            return Err(Error::Config(format!("embedding table has no entry for classes {missing:?}")));
        }
        let clips = prepare_all(&manifest, &config.model, &mut access)?;
        Ok(Experiment {
            config,
            manifest,
            table,
            clips,
            access,
        })
    }

    fn samples_of(&self, classes: &[usize]) -> Vec<Sample<'_>> {
        let wanted: std::collections::HashSet<usize> = classes.iter().copied().collect();
        self.manifest
            .samples
            .iter()
            .zip(&self.clips)
            .filter(|(s, _)| wanted.contains(&s.class_id))
            .map(|(s, c)| (c, s.class_name.as_str()))
            .collect()
    }

    fn table_of(&self, classes: &[usize]) -> Result<ClassEmbeddingTable> {
        let names: Vec<String> = classes.iter().map(|&c| self.manifest.classes[c].clone()).collect();
        self.table.restrict(&names)
    }

    /// Trains a fresh model on the seen classes of run `r`.
    pub fn train_run(&self, r: usize, progress: &mut dyn FnMut(&str)) -> Result<TrainedRun> {
        let cfg = &self.config;
        let seed = cfg.run_seed(r);
        let split = split_classes(self.manifest.classes.len(), cfg.protocol, seed)?;
        let seen_table = self.table_of(&split.seen)?;
        let train = self.samples_of(&split.seen);
        let mut model = Model::new(cfg.model, derive_seed(seed, "model"))?;
        let adam = Adam::with_lr(cfg.lr);
        let mut history = Vec::with_capacity(cfg.epochs);
        for epoch in 0..cfg.epochs {
            let m = train_epoch(
                &mut model,
                &train,
                &seen_table,
                &adam,
                cfg.batch,
                derive_seed(seed, &format!("epoch{epoch}")),
            )?;
            progress(&format!(
                "run {r} epoch {}/{}: loss {:.4} seen acc {:.3}",
                epoch + 1,
                cfg.epochs,
                m.mean_loss,
                m.accuracy
            ));
            history.push(m);
        }
        Ok(TrainedRun {
            run: r,
            seed,
            split,
            model,
            history,
        })
    }

    /// Scores a trained model on the unseen classes of its split.
    pub fn evaluate_run(&self, trained: &TrainedRun) -> Result<RunResult> {
        self.evaluate_model(&trained.model, trained.run, &trained.history)
    }

    /// Scores `model` on the unseen classes of run `r`'s split.
    pub fn evaluate_model(&self, model: &Model, r: usize, history: &[EpochMetrics]) -> Result<RunResult> {
        let seed = self.config.run_seed(r);
        let split = split_classes(self.manifest.classes.len(), self.config.protocol, seed)?;
        let unseen_table = self.table_of(&split.unseen)?;
        let test = self.samples_of(&split.unseen);
        let eval = evaluate(model, &test, &unseen_table)?;
        let last = history.last().copied();
        Ok(RunResult {
            run: r,
            seed,
            seen: split.seen.clone(),
            unseen: split.unseen.clone(),
            accuracy: eval.accuracy,
            test_samples: eval.total,
            final_loss: last.map(|m| m.mean_loss),
            seen_accuracy: last.map(|m| m.accuracy),
            confusion: eval.confusion,
        })
    }
}

/// A model trained for one run of a protocol.
#[derive(Clone, Debug)]
pub struct TrainedRun {
    pub run: usize,
    pub seed: u64,
    pub split: crate::data::SplitSpec,
    pub model: Model,
    pub history: Vec<EpochMetrics>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub run: usize,
    pub seed: u64,
    pub seen: Vec<usize>,
    pub unseen: Vec<usize>,
    pub accuracy: f64,
    pub test_samples: usize,
    pub final_loss: Option<f64>,
    /// Seen-class training accuracy over the final epoch.
    pub seen_accuracy: Option<f64>,
    /// Confusion over this run's unseen classes, in `unseen` order.
    pub confusion: Vec<Vec<usize>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub protocol: Protocol,
    pub base_seed: u64,
    pub modality: String,
    pub hidden: usize,
    pub fc: usize,
    pub embed_dim: usize,
    pub epochs: usize,
    pub lr: f64,
    pub batch: usize,
    pub classes: Vec<String>,
    pub runs: Vec<RunResult>,
    pub run_accuracies: Vec<f64>,
    pub mean_accuracy: f64,
    /// Sample standard deviation across runs; zero for a single run.
    pub std_accuracy: f64,
    pub mean_seen_accuracy: Option<f64>,
    /// Accuracy per class over all runs it was unseen in; `None` if never tested.
    pub per_class_accuracy: Vec<Option<f64>>,
    /// `confusion[true][predicted]` over all classes, summed across runs.
    pub confusion: Vec<Vec<usize>>,
}

pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

impl RunReport {
    pub fn aggregate(config: &ExperimentConfig, classes: &[String], runs: Vec<RunResult>) -> Self {
        let k = classes.len();
        let mut confusion = vec![vec![0usize; k]; k];
        for r in &runs {
            for (i, row) in r.confusion.iter().enumerate() {
                for (j, &n) in row.iter().enumerate() {
                    confusion[r.unseen[i]][r.unseen[j]] += n;
                }
            }
        }
        let per_class_accuracy = confusion
            .iter()
            .enumerate()
            .map(|(i, row)| {
                let total: usize = row.iter().sum();
                (total > 0).then(|| row[i] as f64 / total as f64)
            })
            .collect();
        let run_accuracies: Vec<f64> = runs.iter().map(|r| r.accuracy).collect();
        let (mean_accuracy, std_accuracy) = mean_std(&run_accuracies);
        let seen: Option<Vec<f64>> = runs.iter().map(|r| r.seen_accuracy).collect();
        RunReport {
            protocol: config.protocol,
            base_seed: config.seed,
            modality: config.model.modality.to_string(),
            hidden: config.model.hidden,
            fc: config.model.fc_count,
            embed_dim: config.model.encoder.embed_dim,
            epochs: config.epochs,
            lr: config.lr,
            batch: config.batch,
            classes: classes.to_vec(),
            runs,
            run_accuracies,
            mean_accuracy,
            std_accuracy,
            mean_seen_accuracy: seen.filter(|s| !s.is_empty()).map(|s| mean_std(&s).0),
            per_class_accuracy,
            confusion,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("serializable");
        s.push('\n');
        s
    }

    /// Confusion matrix as CSV: one row per true class, one column per
    /// predicted class, then the row total and the class accuracy.
    pub fn confusion_csv(&self) -> String {
        let mut out = String::from("true\\predicted");
        for c in &self.classes {
            out.push(',');
            out.push_str(&csv_field(c));
        }
        out.push_str(",total,accuracy\n");
        for (i, row) in self.confusion.iter().enumerate() {
            out.push_str(&csv_field(&self.classes[i]));
            for n in row {
                let _ = write!(out, ",{n}");
            }
            let _ = write!(out, ",{}", row.iter().sum::<usize>());
            match self.per_class_accuracy[i] {
                Some(a) => {
                    let _ = writeln!(out, ",{a}");
                }
                None => out.push_str(",\n"),
            }
        }
        out
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub const METRICS_FILE: &str = "metrics.json";
pub const CONFUSION_FILE: &str = "confusion.csv";

/// Writes `metrics.json` and `confusion.csv` into `out_dir`.
pub fn write_report(report: &RunReport, out_dir: &Path) -> Result<(PathBuf, PathBuf)> {
    fs::create_dir_all(out_dir)?;
    let metrics = out_dir.join(METRICS_FILE);
    let confusion = out_dir.join(CONFUSION_FILE);
    fs::write(&metrics, report.to_json())?;
    fs::write(&confusion, report.confusion_csv())?;
    Ok((metrics, confusion))
}

pub fn read_report(path: &Path) -> Result<RunReport> {
    let text = fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingFile(path.to_path_buf()),
        _ => e.into(),
    })?;
    Ok(serde_json::from_str(&text)?)
}

/// Runs `config.runs` independent split/train/evaluate cycles with seeds
/// `seed, seed+1, …` and aggregates them.
pub fn run_protocol(config: &ExperimentConfig, progress: &mut dyn FnMut(&str)) -> Result<RunReport> {
    let exp = Experiment::load(config.clone())?;
    run_loaded(&exp, progress)
}

/// [`run_protocol`] on already prepared data.
pub fn run_loaded(exp: &Experiment, progress: &mut dyn FnMut(&str)) -> Result<RunReport> {
    let mut results = Vec::with_capacity(exp.config.runs);
    for r in 0..exp.config.runs {
        let trained = exp.train_run(r, progress)?;
        let result = exp.evaluate_run(&trained)?;
        progress(&format!("run {r}: unseen accuracy {:.3}", result.accuracy));
        results.push(result);
    }
    Ok(RunReport::aggregate(&exp.config, &exp.manifest.classes, results))
}
