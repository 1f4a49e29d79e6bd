//! Dataset manifests, class-split protocols, pseudo-embeddings and the
//! synthetic RGB-D dataset generator.

use std::collections::HashSet;
use std::f64::consts::PI;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::encoder::segments_to_rows;
use crate::error::{Error, Result};
use crate::formats::{
    keypoint_frame_count, read_keypoints, read_video, read_video_header, write_keypoints, write_video, AccessLog,
    Video,
};
use crate::geometry::{crop_segments, segment_body, FrameImage, Keypoint, KeypointFrame, NUM_KEYPOINTS};
use crate::model::{ClipInput, Modality, ModelConfig, DEPTH_CHANNELS, PIXEL_MEAN, RGB_CHANNELS};
use crate::rng::{derive_seed, fnv1a, SplitMix64};
use crate::temporal::subsample_indices;
use crate::zeroshot::{ClassEmbeddingTable, EMBED_DIM};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    P1,
    P2,
}

impl Protocol {
    /// Fraction of classes used for training.
    pub fn seen_ratio(self) -> f64 {
        match self {
            Protocol::P1 => 0.9,
            Protocol::P2 => 0.7,
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Protocol::P1 => "p1",
            Protocol::P2 => "p2",
        })
    }
}

impl FromStr for Protocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "p1" => Ok(Protocol::P1),
            "p2" => Ok(Protocol::P2),
            other => Err(Error::Config(format!("unknown protocol {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub protocol: Protocol,
    pub seed: u64,
    pub seen: Vec<usize>,
    pub unseen: Vec<usize>,
}

/// Number of seen classes: `round(r·K)`, leaving at least one class on each side.
pub fn seen_count(k: usize, protocol: Protocol) -> usize {
    let n = (protocol.seen_ratio() * k as f64).round() as usize;
    n.clamp(1, k.saturating_sub(1).max(1))
}

/// Shuffles the class ids with a generator seeded by `seed`; the first
/// [`seen_count`] become the seen classes.
pub fn split_classes(k: usize, protocol: Protocol, seed: u64) -> Result<SplitSpec> {
    if k < 2 {
        return Err(Error::Protocol(format!("need at least 2 classes to split, got {k}")));
    }
    let mut ids: Vec<usize> = (0..k).collect();
    SplitMix64::new(seed).shuffle(&mut ids);
    let unseen = ids.split_off(seen_count(k, protocol));
    Ok(SplitSpec {
        protocol,
        seed,
        seen: ids,
        unseen,
    })
}

/// Seed of the fixed random code that maps attribute vectors into the
/// embedding space.
pub const ATTRIBUTE_CODE_SEED: u64 = 0x5a53_5243_4f44_4531;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum EmbedSource<'a> {
    Name(&'a str),
    Attributes(&'a [f64]),
}

fn unit(mut v: Vec<f64>) -> Result<Vec<f64>> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !(n > 0.0) || !n.is_finite() {
        return Err(Error::DegenerateEmbedding("pseudo-embedding input maps to a zero vector".into()));
    }
    v.iter_mut().for_each(|x| *x /= n);
    Ok(v)
}

/// Deterministic unit-norm 1024-dim embedding of a class name or attribute vector.
///
/// Attribute vectors go through a Gaussian code whose column `j` depends only
/// on `j`, so the code is shared across attribute dimensions. Names seed a
/// generator with their FNV-1a hash.
pub fn pseudo_embed(source: EmbedSource<'_>) -> Result<Vec<f64>> {
    match source {
        EmbedSource::Name(name) => {
            if name.is_empty() {
                return Err(Error::Config("cannot embed an empty class name".into()));
            }
            let mut rng = SplitMix64::new(fnv1a(name.as_bytes()));
            unit((0..EMBED_DIM).map(|_| rng.normal()).collect())
        }
        EmbedSource::Attributes(attrs) => {
            if attrs.is_empty() {
                return Err(Error::Config("cannot embed an empty attribute vector".into()));
            }
            let mut out = vec![0.0; EMBED_DIM];
            for (j, &a) in attrs.iter().enumerate() {
                let mut rng = SplitMix64::new(derive_seed(ATTRIBUTE_CODE_SEED, &format!("column{j}")));
                for o in out.iter_mut() {
                    *o += a * rng.normal();
                }
            }
            unit(out)
        }
    }
}

/// Parameters of the synthetic dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub classes: usize,
    pub attribute_dim: usize,
    pub samples_per_class: usize,
    pub min_frames: usize,
    pub max_frames: usize,
    /// Pixel noise std; keypoints get a tenth of it, the per-sample offset all of it.
    pub noise: f64,
    pub seed: u64,
    pub frame_size: usize,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            classes: 10,
            attribute_dim: 8,
            samples_per_class: 30,
            min_frames: 6,
            max_frames: 10,
            noise: 0.05,
            seed: 0,
            frame_size: 48,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.classes < 2 {
            return Err(Error::Config(format!("need at least 2 classes, got {}", self.classes)));
        }
        if self.attribute_dim == 0 {
            return Err(Error::Config("attribute_dim must be at least 1".into()));
        }
        if self.samples_per_class == 0 {
            return Err(Error::Config("samples_per_class must be at least 1".into()));
        }
        if self.min_frames == 0 || self.min_frames > self.max_frames {
            return Err(Error::Config(format!(
                "invalid frame range {}..={}",
                self.min_frames, self.max_frames
            )));
        }
        if !(self.noise >= 0.0) || !self.noise.is_finite() {
            return Err(Error::Config(format!("noise must be a finite non-negative value, got {}", self.noise)));
        }
        if self.frame_size < 8 {
            return Err(Error::Config(format!("frame_size must be at least 8, got {}", self.frame_size)));
        }
        Ok(())
    }
}

/// Distinct binary attribute codes, one per class.
pub fn class_attributes(classes: usize, bits: usize, seed: u64) -> Result<Vec<Vec<bool>>> {
    if bits < 64 && classes as u128 > 1u128 << bits {
        return Err(Error::AttributeCollision { classes, bits });
    }
    let mut rng = SplitMix64::new(derive_seed(seed, "attributes"));
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(classes);
    while out.len() < classes {
        let code: Vec<bool> = (0..bits).map(|_| rng.next_u64() >> 63 == 1).collect();
        if seen.insert(code.clone()) {
            out.push(code);
        }
    }
    Ok(out)
}

fn signed(code: &[bool]) -> Vec<f64> {
    code.iter().map(|&b| if b { 1.0 } else { -1.0 }).collect()
}

/// Bit `i` of a class code, wrapping around short codes.
fn bit(code: &[bool], i: usize) -> f64 {
    code[i % code.len()] as u8 as f64
}

const MOTION_PERIOD: f64 = 8.0;
const UPPER_ARM: f64 = 0.13;
const FOREARM: f64 = 0.12;
const THIGH: f64 = 0.2;
const SHIN: f64 = 0.15;
const LIMB_WIDTH: f64 = 0.035;
const HEAD_RADIUS: f64 = 0.06;
const BACKGROUND_RGB: f32 = 0.05;
const BACKGROUND_DEPTH: f32 = 0.95;

/// Joint positions of a class at frame `t`, before noise.
fn pose(code: &[bool], t: usize) -> [(f64, f64); NUM_KEYPOINTS] {
    let w = 2.0 * PI * t as f64 / MOTION_PERIOD;
    // Angles are measured from hanging straight down, opening away from the body.
    let arm = |side: f64, amp: f64, base: f64, phase: f64, bend: f64, shoulder: (f64, f64)| {
        let up = base + amp * (w + phase).sin();
        let fore = up + bend;
        let elbow = (shoulder.0 + side * UPPER_ARM * up.sin(), shoulder.1 + UPPER_ARM * up.cos());
        let wrist = (elbow.0 + side * FOREARM * fore.sin(), elbow.1 + FOREARM * fore.cos());
        (elbow, wrist)
    };
    let (rs, ls) = ((0.40, 0.32), (0.60, 0.32));
    let (re, rw) = arm(
        -1.0,
        0.2 + 0.6 * bit(code, 0),
        0.5 + 1.0 * bit(code, 2),
        PI * bit(code, 4),
        0.3 + 0.8 * bit(code, 6),
        rs,
    );
    let (le, lw) = arm(
        1.0,
        0.2 + 0.6 * bit(code, 1),
        0.5 + 1.0 * bit(code, 3),
        PI * bit(code, 5),
        0.3 + 0.8 * bit(code, 7),
        ls,
    );
    let (rh, lh) = ((0.44, 0.60), (0.56, 0.60));
    let leg = |side: f64, hip: (f64, f64), phase: f64| {
        let a = 0.1 + 0.1 * (w + phase).sin();
        (hip.0 + side * THIGH * a.sin(), hip.1 + THIGH * a.cos())
    };
    let rk = leg(-1.0, rh, PI * bit(code, 4));
    let lk = leg(1.0, lh, PI * bit(code, 5));
    [
        (0.50, 0.20),
        (0.50, 0.30),
        rs,
        ls,
        re,
        le,
        rw,
        lw,
        rh,
        lh,
        (0.50, 0.60),
        rk,
        lk,
    ]
}

fn segment_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 {
        (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    ((p.0 - a.0 - t * dx).powi(2) + (p.1 - a.1 - t * dy).powi(2)).sqrt()
}

enum Shape {
    Capsule((f64, f64), (f64, f64)),
    Disk((f64, f64), f64),
    Quad([(f64, f64); 4]),
}

impl Shape {
    fn covers(&self, p: (f64, f64)) -> bool {
        match *self {
            Shape::Capsule(a, b) => segment_distance(p, a, b) <= LIMB_WIDTH,
            Shape::Disk(c, r) => (p.0 - c.0).powi(2) + (p.1 - c.1).powi(2) <= r * r,
            Shape::Quad(q) => {
                // Convex quad with vertices in order: same-side test on every edge.
                let mut sign = 0.0f64;
                for i in 0..4 {
                    let (a, b) = (q[i], q[(i + 1) % 4]);
                    let cross = (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0);
                    if cross != 0.0 {
                        if sign != 0.0 && cross.signum() != sign {
                            return false;
                        }
                        sign = cross.signum();
                    }
                }
                true
            }
        }
    }
}

/// Body parts in segment order (head, torso, left upper arm, left forearm,
/// right upper arm, right forearm, left leg, right leg), back to front.
fn body_parts(j: &[(f64, f64); NUM_KEYPOINTS]) -> Vec<(usize, Shape)> {
    let [nose, neck, rs, ls, re, le, rw, lw, rh, lh, _mid, rk, lk] = *j;
    let down = |k: (f64, f64)| (k.0, k.1 + SHIN);
    let hand = |e: (f64, f64), w: (f64, f64)| (w.0 + 0.3 * (w.0 - e.0), w.1 + 0.3 * (w.1 - e.1));
    vec![
        (6, Shape::Capsule(lh, lk)),
        (6, Shape::Capsule(lk, down(lk))),
        (7, Shape::Capsule(rh, rk)),
        (7, Shape::Capsule(rk, down(rk))),
        (1, Shape::Quad([rs, ls, lh, rh])),
        (2, Shape::Capsule(ls, le)),
        (3, Shape::Capsule(le, hand(le, lw))),
        (4, Shape::Capsule(rs, re)),
        (5, Shape::Capsule(re, hand(re, rw))),
        (0, Shape::Capsule(neck, nose)),
        (0, Shape::Disk(nose, HEAD_RADIUS)),
    ]
}

fn part_colour(code: &[bool], part: usize) -> ([f32; 3], f32) {
    let c = |k: usize| (0.2 + 0.6 * bit(code, part + k)) as f32;
    ([c(0), c(1), c(2)], (0.2 + 0.5 * bit(code, part)) as f32)
}

/// Renders RGB and depth frames of one pose. `noise` draws are consumed in a
/// fixed order, so zero noise gives identical pixels for identical poses.
fn render(
    joints: &[(f64, f64); NUM_KEYPOINTS],
    code: &[bool],
    size: usize,
    noise: f64,
    rng: &mut SplitMix64,
) -> (FrameImage, FrameImage) {
    let parts = body_parts(joints);
    let mut rgb = Vec::with_capacity(size * size * 3);
    let mut depth = Vec::with_capacity(size * size);
    let mut jitter = |v: f32| {
        if noise > 0.0 {
            (v as f64 + noise * rng.normal()).clamp(0.0, 1.0) as f32
        } else {
            v
        }
    };
    for i in 0..size {
        for j in 0..size {
            let p = ((j as f64 + 0.5) / size as f64, (i as f64 + 0.5) / size as f64);
            let mut colour = ([BACKGROUND_RGB; 3], BACKGROUND_DEPTH);
            for (part, shape) in &parts {
                if shape.covers(p) {
                    colour = part_colour(code, *part);
                }
            }
            for c in colour.0 {
                rgb.push(jitter(c));
            }
            depth.push(jitter(colour.1));
        }
    }
    (
        FrameImage::new(size, size, RGB_CHANNELS, rgb).expect("pixels in range"),
        FrameImage::new(size, size, DEPTH_CHANNELS, depth).expect("pixels in range"),
    )
}

/// One manifest line.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub sample_id: String,
    pub class_id: usize,
    pub class_name: String,
    pub rgb_path: String,
    pub depth_path: String,
    pub keypoints_path: String,
    pub frame_count: usize,
}

#[derive(Serialize, Deserialize)]
struct ManifestHeader {
    classes: Vec<String>,
}

/// Validated dataset description. Paths in records are relative to `root`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DatasetManifest {
    pub root: PathBuf,
    pub classes: Vec<String>,
    pub samples: Vec<SampleRecord>,
}

impl DatasetManifest {
    pub fn resolve(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = serde_json::to_string(&ManifestHeader {
            classes: self.classes.clone(),
        })
        .expect("serializable");
        out.push('\n');
        for s in &self.samples {
            out.push_str(&serde_json::to_string(s).expect("serializable"));
            out.push('\n');
        }
        out
    }

    /// Parses manifest text without touching the referenced files.
    pub fn parse(text: &str, root: &Path) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::format("manifest", "empty manifest"))?;
        let header: ManifestHeader = serde_json::from_str(header)
            .map_err(|e| Error::format("manifest", format!("header line: {e}")))?;
        let mut samples = Vec::new();
        for (i, line) in lines {
            let rec: SampleRecord = serde_json::from_str(line)
                .map_err(|e| Error::format("manifest", format!("line {}: {e}", i + 1)))?;
            samples.push(rec);
        }
        Ok(DatasetManifest {
            root: root.to_path_buf(),
            classes: header.classes,
            samples,
        })
    }

    /// Structural checks: dense class ids, names matching the header,
    /// unique sample ids.
    pub fn check_structure(&self) -> Result<()> {
        let k = self.classes.len();
        let mut names = HashSet::new();
        for c in &self.classes {
            if !names.insert(c) {
                return Err(Error::format("manifest", format!("duplicate class name {c:?}")));
            }
        }
        let found: std::collections::BTreeSet<usize> = self.samples.iter().map(|s| s.class_id).collect();
        if k == 0 || found.len() != k || found.iter().next_back() != Some(&(k - 1)) {
            return Err(Error::NonDenseClassIds {
                expected: k,
                found: found.into_iter().collect(),
            });
        }
        let mut ids = HashSet::new();
        for s in &self.samples {
            if self.classes[s.class_id] != s.class_name {
                return Err(Error::format(
                    "manifest",
                    format!(
                        "sample {} names class {:?} but id {} is {:?}",
                        s.sample_id, s.class_name, s.class_id, self.classes[s.class_id]
                    ),
                ));
            }
            if !ids.insert(&s.sample_id) {
                return Err(Error::format("manifest", format!("duplicate sample id {}", s.sample_id)));
            }
            if s.frame_count == 0 {
                return Err(Error::format("manifest", format!("sample {} has no frames", s.sample_id)));
            }
        }
        Ok(())
    }
}

fn dangling(sample: &str, path: &Path) -> impl FnOnce(Error) -> Error {
    let (sample, path) = (sample.to_string(), path.to_path_buf());
    move |e| match e {
        Error::MissingFile(_) => Error::DanglingPath { sample, path },
        other => other,
    }
}

/// Loads and validates a manifest, header-checking every referenced file.
pub fn load_manifest(path: &Path) -> Result<DatasetManifest> {
    load_manifest_for(path, Modality::Both, &mut AccessLog::default())
}

/// Like [`load_manifest`], but only checks (and opens) the files a model of
/// `modality` will read. Every opened path is recorded in `log`.
pub fn load_manifest_for(path: &Path, modality: Modality, log: &mut AccessLog) -> Result<DatasetManifest> {
    log.record(path);
    let text = fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingFile(path.to_path_buf()),
        _ => e.into(),
    })?;
    let root = path.parent().unwrap_or_else(|| Path::new("")).to_path_buf();
    let manifest = DatasetManifest::parse(&text, &root)?;
    manifest.check_structure()?;
    for s in &manifest.samples {
        let kp = manifest.resolve(&s.keypoints_path);
        let n = keypoint_frame_count(&kp, log).map_err(dangling(&s.sample_id, &kp))?;
        check_frames(s, &kp, n)?;
        let videos = [
            (modality.uses_rgb(), &s.rgb_path, RGB_CHANNELS),
            (modality.uses_depth(), &s.depth_path, DEPTH_CHANNELS),
        ];
        for (used, rel, channels) in videos {
            if !used {
                continue;
            }
            let p = manifest.resolve(rel);
            let h = read_video_header(&p, log).map_err(dangling(&s.sample_id, &p))?;
            check_frames(s, &p, h.frames)?;
            if h.channels != channels {
                return Err(Error::format(
                    "manifest",
                    format!("{} has {} channels, expected {channels}", p.display(), h.channels),
                ));
            }
        }
    }
    Ok(manifest)
}

fn check_frames(s: &SampleRecord, path: &Path, found: usize) -> Result<()> {
    if found != s.frame_count {
        return Err(Error::FrameCountMismatch {
            sample: s.sample_id.clone(),
            path: path.to_path_buf(),
            expected: s.frame_count,
            found,
        });
    }
    Ok(())
}

/// Output of [`generate_synthetic`].
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticDataset {
    pub manifest_path: PathBuf,
    pub embeddings_path: PathBuf,
    pub manifest: DatasetManifest,
    pub table: ClassEmbeddingTable,
    pub attributes: Vec<Vec<bool>>,
}

pub const MANIFEST_FILE: &str = "manifest.jsonl";
pub const EMBEDDINGS_FILE: &str = "embeddings.tsv";

/// Renders the synthetic dataset into `out_dir`: per-sample ZSRV/ZSRK files
/// under `clips/`, the manifest and the class-embedding table.
pub fn generate_synthetic(spec: &SyntheticSpec, out_dir: &Path) -> Result<SyntheticDataset> {
    spec.validate()?;
    let attributes = class_attributes(spec.classes, spec.attribute_dim, spec.seed)?;
    let classes: Vec<String> = (0..spec.classes).map(|k| format!("class{k:02}")).collect();
    let table = ClassEmbeddingTable::new(
        classes
            .iter()
            .zip(&attributes)
            .map(|(name, code)| Ok((name.clone(), pseudo_embed(EmbedSource::Attributes(&signed(code)))?)))
            .collect::<Result<_>>()?,
    )?;
    fs::create_dir_all(out_dir.join("clips"))?;
    let mut samples = Vec::with_capacity(spec.classes * spec.samples_per_class);
    for (class_id, code) in attributes.iter().enumerate() {
        for i in 0..spec.samples_per_class {
            let index = class_id * spec.samples_per_class + i;
            let sample_id = format!("s{index:05}");
            let mut rng = SplitMix64::new(derive_seed(spec.seed, &sample_id));
            let span = (spec.max_frames - spec.min_frames + 1) as u64;
            let frames = spec.min_frames + rng.below(span) as usize;
            let offset = (spec.noise * rng.normal(), spec.noise * rng.normal());
            let kp_noise = 0.1 * spec.noise;
            let (mut rgb, mut depth, mut kps) = (Vec::new(), Vec::new(), Vec::new());
            for t in 0..frames {
                let mut joints = pose(code, t);
                for j in joints.iter_mut() {
                    j.0 = (j.0 + offset.0 + kp_noise * rng.normal()).clamp(0.0, 1.0);
                    j.1 = (j.1 + offset.1 + kp_noise * rng.normal()).clamp(0.0, 1.0);
                }
                let (r, d) = render(&joints, code, spec.frame_size, spec.noise, &mut rng);
                rgb.push(r);
                depth.push(d);
                let mut pts = [Keypoint::new(0.0, 0.0, 1.0); NUM_KEYPOINTS];
                for (p, j) in pts.iter_mut().zip(&joints) {
                    *p = Keypoint::new(j.0, j.1, 1.0);
                }
                kps.push(KeypointFrame::new(pts));
            }
            let rec = SampleRecord {
                rgb_path: format!("clips/{sample_id}.rgb.zsrv"),
                depth_path: format!("clips/{sample_id}.depth.zsrv"),
                keypoints_path: format!("clips/{sample_id}.kp.zsrk"),
                sample_id,
                class_id,
                class_name: classes[class_id].clone(),
                frame_count: frames,
            };
            write_video(&out_dir.join(&rec.rgb_path), &Video { frames: rgb })?;
            write_video(&out_dir.join(&rec.depth_path), &Video { frames: depth })?;
            write_keypoints(&out_dir.join(&rec.keypoints_path), &kps)?;
            samples.push(rec);
        }
    }
    let manifest = DatasetManifest {
        root: out_dir.to_path_buf(),
        classes,
        samples,
    };
    let manifest_path = out_dir.join(MANIFEST_FILE);
    fs::write(&manifest_path, manifest.to_jsonl())?;
    let embeddings_path = out_dir.join(EMBEDDINGS_FILE);
    table.write(&embeddings_path)?;
    Ok(SyntheticDataset {
        manifest_path,
        embeddings_path,
        manifest,
        table,
        attributes,
    })
}

/// Reads one sample and turns it into encoder inputs for the streams `cfg`
/// uses. Long clips are uniformly subsampled to `cfg.max_frames`.
pub fn prepare_clip(
    manifest: &DatasetManifest,
    record: &SampleRecord,
    cfg: &ModelConfig,
    log: &mut AccessLog,
) -> Result<ClipInput> {
    let kp_path = manifest.resolve(&record.keypoints_path);
    let keypoints = read_keypoints(&kp_path, log).map_err(dangling(&record.sample_id, &kp_path))?;
    check_frames(record, &kp_path, keypoints.len())?;
    let keep = subsample_indices(keypoints.len(), cfg.max_frames);
    let rects = keep
        .iter()
        .map(|&t| segment_body(&keypoints[t]))
        .collect::<Result<Vec<_>>>()?;
    let stream = |rel: &str, channels: usize, log: &mut AccessLog| -> Result<_> {
        let path = manifest.resolve(rel);
        let video = read_video(&path, log).map_err(dangling(&record.sample_id, &path))?;
        check_frames(record, &path, video.frames.len())?;
        let enc = cfg.encoder_for(channels);
        let mut crops = Vec::with_capacity(keep.len() * rects.first().map_or(0, |r| r.len()));
        for (&t, r) in keep.iter().zip(&rects) {
            let frame: &FrameImage = &video.frames[t];
            if frame.channels() != channels {
                return Err(Error::format(
                    "video",
                    format!("{} has {} channels, expected {channels}", path.display(), frame.channels()),
                ));
            }
            crops.extend(crop_segments(frame, r, enc.segment_size)?);
        }
        let mut rows = segments_to_rows(&crops, &enc)?;
        rows.data_mut().iter_mut().for_each(|v| *v -= PIXEL_MEAN);
        Ok(rows)
    };
    let rgb = if cfg.modality.uses_rgb() {
        Some(stream(&record.rgb_path, RGB_CHANNELS, log)?)
    } else {
        None
    };
    let depth = if cfg.modality.uses_depth() {
        Some(stream(&record.depth_path, DEPTH_CHANNELS, log)?)
    } else {
        None
    };
    Ok(ClipInput {
        rgb,
        depth,
        frames: keep.len(),
    })
}

/// [`prepare_clip`] for every sample, in manifest order.
pub fn prepare_all(manifest: &DatasetManifest, cfg: &ModelConfig, log: &mut AccessLog) -> Result<Vec<ClipInput>> {
    manifest
        .samples
        .iter()
        .map(|s| prepare_clip(manifest, s, cfg, log))
        .collect()
}
