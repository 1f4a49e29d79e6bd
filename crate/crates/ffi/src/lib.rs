//! C ABI over the zsr core.
//!
//! Every fallible call returns a [`ZsrStatus`]; on failure the message is
//! available from [`zsr_last_error`] on the same thread. Objects are handed
//! out as opaque pointers and released with the matching `*_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use zsr::checkpoint;
use zsr::data::{generate_synthetic, load_manifest_for, prepare_clip, split_classes, DatasetManifest, Protocol, SyntheticSpec};
use zsr::encoder::EncoderConfig;
use zsr::formats::AccessLog;
use zsr::gradcheck::GradCheck;
use zsr::gradsuite::run_suite;
use zsr::harness::{run_protocol, write_report, ExperimentConfig};
use zsr::model::{Modality, Model, ModelConfig, RGB_CHANNELS};
use zsr::zeroshot::{classify, similarity, ClassEmbeddingTable, Objective, DEFAULT_TAU};
use zsr::{Error, Module};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ZsrStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Format = 4,
    Config = 5,
    Protocol = 6,
    Degenerate = 7,
    BufferTooSmall = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ZsrModality {
    Rgb = 0,
    Depth = 1,
    Both = 2,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ZsrProtocol {
    P1 = 0,
    P2 = 1,
}

/// Model hyperparameters. Start from [`zsr_model_config_default`].
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ZsrModelConfig {
    pub embed_dim: usize,
    pub num_heads: usize,
    pub num_layers: usize,
    pub mlp_ratio: usize,
    pub segment_size: usize,
    pub hidden: usize,
    pub fc_count: usize,
    pub max_frames: usize,
    pub modality: ZsrModality,
    /// Softmax temperature; zero or less selects the cosine-regression loss.
    pub tau: f64,
}

/// Synthetic dataset parameters. Start from [`zsr_synthetic_spec_default`].
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ZsrSyntheticSpec {
    pub classes: usize,
    pub attribute_dim: usize,
    pub samples_per_class: usize,
    pub min_frames: usize,
    pub max_frames: usize,
    pub noise: f64,
    pub seed: u64,
    pub frame_size: usize,
}

/// Summary of a protocol run.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ZsrProtocolSummary {
    pub runs: usize,
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
    /// Negative when no training epochs were recorded.
    pub mean_seen_accuracy: f64,
}

/// Class-embedding table.
pub struct ZsrTable(ClassEmbeddingTable);

/// Validated manifest.
pub struct ZsrDataset {
    manifest: DatasetManifest,
}

/// Trainable two-stream model.
pub struct ZsrModel(Model);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> ZsrStatus {
    match e {
        Error::Io(_) | Error::MissingFile(_) | Error::DanglingPath { .. } => ZsrStatus::Io,
        Error::Format { .. } | Error::Json(_) | Error::FrameCountMismatch { .. } | Error::NonDenseClassIds { .. } => {
            ZsrStatus::Format
        }
        Error::Config(_) | Error::Dimension { .. } | Error::AttributeCollision { .. } => ZsrStatus::Config,
        Error::Protocol(_) => ZsrStatus::Protocol,
        Error::DegeneratePose(_) | Error::DegenerateEmbedding(_) | Error::EmptyClip | Error::NonFinite(_) => {
            ZsrStatus::Degenerate
        }
    }
}

struct Fail(ZsrStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn fail<T>(status: ZsrStatus, msg: impl Into<String>) -> Result<T, Fail> {
    Err(Fail(status, msg.into()))
}

/// Runs `f`, converting errors and panics into a status plus last-error text.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> ZsrStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            ZsrStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal panic: {msg}"));
            ZsrStatus::Panic
        }
    }
}

unsafe fn path_arg(p: *const c_char, what: &str) -> Result<PathBuf, Fail> {
    if p.is_null() {
        return fail(ZsrStatus::NullPointer, format!("{what} is null"));
    }
    match CStr::from_ptr(p).to_str() {
        Ok(s) => Ok(PathBuf::from(s)),
        Err(_) => fail(ZsrStatus::InvalidArgument, format!("{what} is not valid UTF-8")),
    }
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref()
        .ok_or_else(|| Fail(ZsrStatus::NullPointer, format!("{what} is null")))
}

unsafe fn slice_arg<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return fail(ZsrStatus::NullPointer, format!("{what} is null"));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut()
        .ok_or_else(|| Fail(ZsrStatus::NullPointer, format!("{what} is null")))
}

fn modality_of(m: ZsrModality) -> Modality {
    match m {
        ZsrModality::Rgb => Modality::Rgb,
        ZsrModality::Depth => Modality::Depth,
        ZsrModality::Both => Modality::Both,
    }
}

fn protocol_of(p: ZsrProtocol) -> Protocol {
    match p {
        ZsrProtocol::P1 => Protocol::P1,
        ZsrProtocol::P2 => Protocol::P2,
    }
}

fn model_config(c: &ZsrModelConfig) -> ModelConfig {
    ModelConfig {
        encoder: EncoderConfig {
            embed_dim: c.embed_dim,
            num_heads: c.num_heads,
            num_layers: c.num_layers,
            mlp_ratio: c.mlp_ratio,
            segment_size: c.segment_size,
            channels: RGB_CHANNELS,
        },
        hidden: c.hidden,
        fc_count: c.fc_count,
        modality: modality_of(c.modality),
        objective: if c.tau > 0.0 {
            Objective::SoftmaxCosine { tau: c.tau }
        } else {
            Objective::CosineRegression
        },
        max_frames: c.max_frames,
    }
}

/// Message of the last failed call on this thread, or null. The pointer stays
/// valid until the next call on this thread.
#[no_mangle]
pub extern "C" fn zsr_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn zsr_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

#[no_mangle]
pub extern "C" fn zsr_model_config_default() -> ZsrModelConfig {
    let d = ModelConfig::desk();
    ZsrModelConfig {
        embed_dim: d.encoder.embed_dim,
        num_heads: d.encoder.num_heads,
        num_layers: d.encoder.num_layers,
        mlp_ratio: d.encoder.mlp_ratio,
        segment_size: d.encoder.segment_size,
        hidden: d.hidden,
        fc_count: d.fc_count,
        max_frames: d.max_frames,
        modality: ZsrModality::Both,
        tau: DEFAULT_TAU,
    }
}

#[no_mangle]
pub extern "C" fn zsr_synthetic_spec_default() -> ZsrSyntheticSpec {
    let s = SyntheticSpec::default();
    ZsrSyntheticSpec {
        classes: s.classes,
        attribute_dim: s.attribute_dim,
        samples_per_class: s.samples_per_class,
        min_frames: s.min_frames,
        max_frames: s.max_frames,
        noise: s.noise,
        seed: s.seed,
        frame_size: s.frame_size,
    }
}

/// Cosine similarity of two `len`-long vectors.
///
/// # Safety
/// `a` and `b` must point to `len` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn zsr_similarity(a: *const f64, b: *const f64, len: usize, out: *mut f64) -> ZsrStatus {
    guard(|| {
        let a = slice_arg(a, len, "a")?;
        let b = slice_arg(b, len, "b")?;
        *out_arg(out, "out")? = similarity(a, b)?;
        Ok(())
    })
}

/// Splits `k` classes into seen and unseen ids. `seen` and `unseen` must each
/// hold `k` entries; the counts actually written go to `seen_len` and
/// `unseen_len`.
///
/// # Safety
/// Output buffers must be writable for `k` elements; length pointers writable.
#[no_mangle]
pub unsafe extern "C" fn zsr_split_classes(
    k: usize,
    protocol: ZsrProtocol,
    seed: u64,
    seen: *mut usize,
    seen_len: *mut usize,
    unseen: *mut usize,
    unseen_len: *mut usize,
) -> ZsrStatus {
    guard(|| {
        if seen.is_null() || unseen.is_null() {
            return fail(ZsrStatus::NullPointer, "output buffer is null");
        }
        let seen_len = out_arg(seen_len, "seen_len")?;
        let unseen_len = out_arg(unseen_len, "unseen_len")?;
        let s = split_classes(k, protocol_of(protocol), seed)?;
        std::slice::from_raw_parts_mut(seen, s.seen.len()).copy_from_slice(&s.seen);
        std::slice::from_raw_parts_mut(unseen, s.unseen.len()).copy_from_slice(&s.unseen);
        *seen_len = s.seen.len();
        *unseen_len = s.unseen.len();
        Ok(())
    })
}

/// Writes a synthetic dataset (clips, `manifest.jsonl`, `embeddings.tsv`)
/// into `out_dir`.
///
/// # Safety
/// `spec` must be readable and `out_dir` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn zsr_generate_synthetic(spec: *const ZsrSyntheticSpec, out_dir: *const c_char) -> ZsrStatus {
    guard(|| {
        let s = ref_arg(spec, "spec")?;
        let dir = path_arg(out_dir, "out_dir")?;
        let spec = SyntheticSpec {
            classes: s.classes,
            attribute_dim: s.attribute_dim,
            samples_per_class: s.samples_per_class,
            min_frames: s.min_frames,
            max_frames: s.max_frames,
            noise: s.noise,
            seed: s.seed,
            frame_size: s.frame_size,
        };
        generate_synthetic(&spec, &dir)?;
        Ok(())
    })
}

/// Reads a class-embedding table (`name<TAB>values`).
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn zsr_table_load(path: *const c_char, out: *mut *mut ZsrTable) -> ZsrStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let table = ClassEmbeddingTable::read(&path_arg(path, "path")?)?;
        *out = Box::into_raw(Box::new(ZsrTable(table)));
        Ok(())
    })
}

/// # Safety
/// `table` must come from [`zsr_table_load`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn zsr_table_free(table: *mut ZsrTable) {
    if !table.is_null() {
        drop(Box::from_raw(table));
    }
}

/// Number of classes, or 0 for a null table.
///
/// # Safety
/// `table` must be null or a live table.
#[no_mangle]
pub unsafe extern "C" fn zsr_table_len(table: *const ZsrTable) -> usize {
    table.as_ref().map_or(0, |t| t.0.len())
}

/// Embedding dimension, or 0 for a null table.
///
/// # Safety
/// `table` must be null or a live table.
#[no_mangle]
pub unsafe extern "C" fn zsr_table_dim(table: *const ZsrTable) -> usize {
    table.as_ref().map_or(0, |t| t.0.dim())
}

/// Index of the class nearest to `z` by cosine similarity.
///
/// # Safety
/// `table` must be live, `z` readable for `len` doubles, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn zsr_classify(table: *const ZsrTable, z: *const f64, len: usize, out: *mut usize) -> ZsrStatus {
    guard(|| {
        let t = &ref_arg(table, "table")?.0;
        if len != t.dim() {
            return fail(
                ZsrStatus::InvalidArgument,
                format!("vector has {len} values, table dimension is {}", t.dim()),
            );
        }
        let z = slice_arg(z, len, "z")?;
        *out_arg(out, "out")? = classify(z, t)?;
        Ok(())
    })
}

/// Loads and validates a manifest, checking the files `modality` needs.
///
/// # Safety
/// `manifest` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn zsr_dataset_load(
    manifest: *const c_char,
    modality: ZsrModality,
    out: *mut *mut ZsrDataset,
) -> ZsrStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let path = path_arg(manifest, "manifest")?;
        let manifest = load_manifest_for(&path, modality_of(modality), &mut AccessLog::default())?;
        *out = Box::into_raw(Box::new(ZsrDataset { manifest }));
        Ok(())
    })
}

/// # Safety
/// `dataset` must come from [`zsr_dataset_load`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn zsr_dataset_free(dataset: *mut ZsrDataset) {
    if !dataset.is_null() {
        drop(Box::from_raw(dataset));
    }
}

/// Number of samples, or 0 for a null dataset.
///
/// # Safety
/// `dataset` must be null or live.
#[no_mangle]
pub unsafe extern "C" fn zsr_dataset_len(dataset: *const ZsrDataset) -> usize {
    dataset.as_ref().map_or(0, |d| d.manifest.samples.len())
}

/// Class id of sample `index`.
///
/// # Safety
/// `dataset` must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn zsr_dataset_class(dataset: *const ZsrDataset, index: usize, out: *mut usize) -> ZsrStatus {
    guard(|| {
        let d = ref_arg(dataset, "dataset")?;
        let Some(s) = d.manifest.samples.get(index) else {
            return fail(ZsrStatus::InvalidArgument, format!("sample {index} out of range"));
        };
        *out_arg(out, "out")? = s.class_id;
        Ok(())
    })
}

/// Creates a freshly initialized model.
///
/// # Safety
/// `config` must be readable and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn zsr_model_new(config: *const ZsrModelConfig, seed: u64, out: *mut *mut ZsrModel) -> ZsrStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let model = Model::new(model_config(ref_arg(config, "config")?), seed)?;
        *out = Box::into_raw(Box::new(ZsrModel(model)));
        Ok(())
    })
}

/// # Safety
/// `model` must come from [`zsr_model_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn zsr_model_free(model: *mut ZsrModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of trainable scalars, or 0 for a null model.
///
/// # Safety
/// `model` must be null or live.
#[no_mangle]
pub unsafe extern "C" fn zsr_model_param_count(model: *const ZsrModel) -> usize {
    model.as_ref().map_or(0, |m| m.0.param_count())
}

/// # Safety
/// `model` must be live and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn zsr_model_save(model: *const ZsrModel, path: *const c_char) -> ZsrStatus {
    guard(|| {
        let m = ref_arg(model, "model")?;
        checkpoint::save(&m.0, &path_arg(path, "path")?)?;
        Ok(())
    })
}

/// Replaces the model's parameters with those stored in a checkpoint of the
/// same architecture.
///
/// # Safety
/// `model` must be live and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn zsr_model_load(model: *mut ZsrModel, path: *const c_char) -> ZsrStatus {
    guard(|| {
        let path = path_arg(path, "path")?;
        let m = model
            .as_mut()
            .ok_or_else(|| Fail(ZsrStatus::NullPointer, "model is null".into()))?;
        checkpoint::load(&mut m.0, &path)?;
        Ok(())
    })
}

/// Embeds sample `index` of `dataset`. `out` must hold `cap` doubles; the
/// embedding length is written to `out_len` even when `cap` is too small.
///
/// # Safety
/// Handles must be live; `out` writable for `cap` doubles; `out_len` writable.
#[no_mangle]
pub unsafe extern "C" fn zsr_model_embed(
    model: *const ZsrModel,
    dataset: *const ZsrDataset,
    index: usize,
    out: *mut f64,
    cap: usize,
    out_len: *mut usize,
) -> ZsrStatus {
    guard(|| {
        let m = &ref_arg(model, "model")?.0;
        let d = ref_arg(dataset, "dataset")?;
        let out_len = out_arg(out_len, "out_len")?;
        let Some(record) = d.manifest.samples.get(index) else {
            return fail(ZsrStatus::InvalidArgument, format!("sample {index} out of range"));
        };
        let clip = prepare_clip(&d.manifest, record, &m.config, &mut AccessLog::default())?;
        let z = m.predict(&[&clip], 1)?.remove(0);
        *out_len = z.len();
        if cap < z.len() {
            return fail(ZsrStatus::BufferTooSmall, format!("need {} doubles, got {cap}", z.len()));
        }
        if out.is_null() {
            return fail(ZsrStatus::NullPointer, "out is null");
        }
        std::slice::from_raw_parts_mut(out, z.len()).copy_from_slice(&z);
        Ok(())
    })
}

/// Runs the full split/train/evaluate protocol and writes `metrics.json` and
/// `confusion.csv` into `out_dir`.
///
/// # Safety
/// Strings must be NUL-terminated, `config` readable, `summary` writable or null.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn zsr_run_protocol(
    manifest: *const c_char,
    embeddings: *const c_char,
    protocol: ZsrProtocol,
    seed: u64,
    runs: usize,
    epochs: usize,
    lr: f64,
    batch: usize,
    config: *const ZsrModelConfig,
    out_dir: *const c_char,
    summary: *mut ZsrProtocolSummary,
) -> ZsrStatus {
    guard(|| {
        let mut cfg = ExperimentConfig::new(path_arg(manifest, "manifest")?, path_arg(embeddings, "embeddings")?);
        cfg.protocol = protocol_of(protocol);
        cfg.seed = seed;
        cfg.runs = runs;
        cfg.epochs = epochs;
        cfg.lr = lr;
        cfg.batch = batch;
        cfg.model = model_config(ref_arg(config, "config")?);
        let out_dir = path_arg(out_dir, "out_dir")?;
        let report = run_protocol(&cfg, &mut |_| {})?;
        write_report(&report, &out_dir)?;
        if let Some(s) = summary.as_mut() {
            *s = ZsrProtocolSummary {
                runs: report.runs.len(),
                mean_accuracy: report.mean_accuracy,
                std_accuracy: report.std_accuracy,
                mean_seen_accuracy: report.mean_seen_accuracy.unwrap_or(-1.0),
            };
        }
        Ok(())
    })
}

/// Runs the gradient-check suite for each seed; the number of failing checks
/// goes to `failed` and the total to `total`.
///
/// # Safety
/// `seeds` readable for `n` values; `failed` and `total` writable.
#[no_mangle]
pub unsafe extern "C" fn zsr_grad_check(seeds: *const u64, n: usize, failed: *mut usize, total: *mut usize) -> ZsrStatus {
    guard(|| {
        let seeds = slice_arg(seeds, n, "seeds")?;
        let failed = out_arg(failed, "failed")?;
        let total = out_arg(total, "total")?;
        let reports = run_suite(seeds, &GradCheck::default());
        *total = reports.len();
        *failed = reports.iter().filter(|r| !r.passed()).count();
        Ok(())
    })
}
