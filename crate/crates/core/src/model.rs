//! The full two-stream model: per-modality encoder + LSTM, fusion and the
//! semantic head.

use std::fmt;
use std::str::FromStr;

use crate::encoder::{Encoder, EncoderCache, EncoderConfig};
use crate::error::{Error, Result};
use crate::geometry::NUM_SEGMENTS;
use crate::param::{Module, Parameter};
use crate::rng::{derive_seed, SplitMix64};
use crate::temporal::{Lstm, LstmCache, LstmConfig, DEFAULT_MAX_FRAMES};
use crate::tensor::Tensor;
use crate::zeroshot::{HeadCache, Objective, SemanticHead};

pub const RGB_CHANNELS: usize = 3;
/// Subtracted from every pixel when a clip is prepared, so encoder inputs
/// are centred on zero.
pub const PIXEL_MEAN: f64 = 0.5;
pub const DEPTH_CHANNELS: usize = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Modality {
    Rgb,
    Depth,
    Both,
}

impl Modality {
    pub const ALL: [Modality; 3] = [Modality::Rgb, Modality::Depth, Modality::Both];

    pub fn uses_rgb(self) -> bool {
        matches!(self, Modality::Rgb | Modality::Both)
    }

    pub fn uses_depth(self) -> bool {
        matches!(self, Modality::Depth | Modality::Both)
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Modality::Rgb => "rgb",
            Modality::Depth => "depth",
            Modality::Both => "both",
        })
    }
}

impl FromStr for Modality {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rgb" => Ok(Modality::Rgb),
            "depth" => Ok(Modality::Depth),
            "both" => Ok(Modality::Both),
            other => Err(Error::Config(format!("unknown modality {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelConfig {
    /// Shared encoder shape; `channels` is overridden per stream.
    pub encoder: EncoderConfig,
    pub hidden: usize,
    pub fc_count: usize,
    pub modality: Modality,
    pub objective: Objective,
    pub max_frames: usize,
}

impl ModelConfig {
    pub fn desk() -> Self {
        ModelConfig {
            encoder: EncoderConfig::desk(RGB_CHANNELS),
            hidden: 1024,
            fc_count: 2,
            modality: Modality::Both,
            objective: Objective::default(),
            max_frames: DEFAULT_MAX_FRAMES,
        }
    }

    pub fn encoder_for(&self, channels: usize) -> EncoderConfig {
        EncoderConfig {
            channels,
            ..self.encoder
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.encoder_for(RGB_CHANNELS).validate()?;
        if self.hidden == 0 {
            return Err(Error::Config("hidden size must be positive".into()));
        }
        if !(1..=2).contains(&self.fc_count) {
            return Err(Error::Config(format!("fc_count must be 1 or 2, got {}", self.fc_count)));
        }
        if self.max_frames == 0 {
            return Err(Error::Config("max_frames must be at least 1".into()));
        }
        Ok(())
    }
}

/// Encoder and LSTM for one modality.
#[derive(Clone, Debug, PartialEq)]
pub struct Stream {
    pub encoder: Encoder,
    pub lstm: Lstm,
}

#[derive(Clone, Debug)]
struct StreamCache {
    encoder: EncoderCache,
    lstm: LstmCache,
    lengths: Vec<usize>,
}

impl Stream {
    fn new(name: &str, cfg: &ModelConfig, channels: usize, seed: u64) -> Result<Self> {
        let enc_cfg = cfg.encoder_for(channels);
        let encoder = Encoder::new(
            &format!("encoder.{name}"),
            enc_cfg,
            &mut SplitMix64::new(derive_seed(seed, &format!("encoder.{name}"))),
        )?;
        let lstm = Lstm::new(
            &format!("temporal.{name}"),
            LstmConfig {
                input_dim: enc_cfg.embed_dim,
                hidden_dim: cfg.hidden,
            },
            &mut SplitMix64::new(derive_seed(seed, &format!("temporal.{name}"))),
        )?;
        Ok(Stream { encoder, lstm })
    }

    fn forward(&self, rows: &[&Tensor]) -> Result<(Tensor, StreamCache)> {
        let p = self.encoder.config.patch_len();
        let mut lengths = Vec::with_capacity(rows.len());
        let mut data = Vec::with_capacity(rows.iter().map(|r| r.len()).sum());
        for r in rows {
            let (n, w) = r.dims2()?;
            if w != p || n % NUM_SEGMENTS != 0 || n == 0 {
                return Err(Error::Config(format!(
                    "clip rows {:?} are not [frames*{NUM_SEGMENTS}, {p}]",
                    r.shape()
                )));
            }
            lengths.push(n / NUM_SEGMENTS);
            data.extend_from_slice(r.data());
        }
        let total: usize = lengths.iter().sum();
        let stacked = Tensor::new(vec![total * NUM_SEGMENTS, p], data)?;
        let (feats, encoder) = self.encoder.forward(&stacked)?;
        let d = self.encoder.config.embed_dim;
        let mut seqs = Vec::with_capacity(lengths.len());
        let mut offset = 0;
        for &t in &lengths {
            seqs.push(Tensor::new(vec![t, d], feats.data()[offset * d..(offset + t) * d].to_vec())?);
            offset += t;
        }
        let (h, lstm) = self.lstm.forward_batch(&seqs)?;
        Ok((h, StreamCache { encoder, lstm, lengths }))
    }

    fn backward(&mut self, cache: &StreamCache, dh: &Tensor) {
        let dseqs = self.lstm.backward_batch(&cache.lstm, dh);
        let d = self.encoder.config.embed_dim;
        let total: usize = cache.lengths.iter().sum();
        let mut dfeat = Vec::with_capacity(total * d);
        for s in &dseqs {
            dfeat.extend_from_slice(s.data());
        }
        let dfeat = Tensor::new(vec![total, d], dfeat).expect("shape");
        self.encoder.backward(&cache.encoder, &dfeat, false);
    }
}

impl Module for Stream {
    fn visit(&self, f: &mut dyn FnMut(&Parameter)) {
        self.encoder.visit(f);
        self.lstm.visit(f);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut Parameter)) {
        self.encoder.visit_mut(f);
        self.lstm.visit_mut(f);
    }
}

/// Segment crops of one clip, flattened per modality to `[frames*9, patch_len]`
/// and shifted by [`PIXEL_MEAN`]. A modality the model does not use may be absent.
#[derive(Clone, Debug, PartialEq)]
pub struct ClipInput {
    pub rgb: Option<Tensor>,
    pub depth: Option<Tensor>,
    pub frames: usize,
}

#[derive(Debug)]
pub struct ForwardCache {
    rgb: Option<StreamCache>,
    depth: Option<StreamCache>,
    head: HeadCache,
    batch: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub config: ModelConfig,
    pub rgb: Stream,
    pub depth: Stream,
    pub head: SemanticHead,
}

impl Model {
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        Ok(Model {
            rgb: Stream::new("rgb", &config, RGB_CHANNELS, seed)?,
            depth: Stream::new("depth", &config, DEPTH_CHANNELS, seed)?,
            head: SemanticHead::new(
                2 * config.hidden,
                config.fc_count,
                &mut SplitMix64::new(derive_seed(seed, "head")),
            )?,
            config,
        })
    }

    fn stream_rows<'a>(clips: &[&'a ClipInput], rgb: bool) -> Result<Vec<&'a Tensor>> {
        clips
            .iter()
            .map(|c| {
                let t = if rgb { &c.rgb } else { &c.depth };
                t.as_ref().ok_or_else(|| {
                    Error::Config(format!("clip is missing its {} stream", if rgb { "rgb" } else { "depth" }))
                })
            })
            .collect()
    }

    /// Predicted embeddings `[B, 1024]` for a batch of clips.
    pub fn forward(&self, clips: &[&ClipInput]) -> Result<(Tensor, ForwardCache)> {
        if clips.is_empty() {
            return Err(Error::EmptyClip);
        }
        let b = clips.len();
        let n = self.config.hidden;
        let modality = self.config.modality;
        let mut fused = Tensor::zeros(&[b, 2 * n]);
        let rgb = if modality.uses_rgb() {
            let (h, c) = self.rgb.forward(&Self::stream_rows(clips, true)?)?;
            for r in 0..b {
                fused.row_mut(r)[..n].copy_from_slice(h.row(r));
            }
            Some(c)
        } else {
            None
        };
        let depth = if modality.uses_depth() {
            let (h, c) = self.depth.forward(&Self::stream_rows(clips, false)?)?;
            for r in 0..b {
                fused.row_mut(r)[n..].copy_from_slice(h.row(r));
            }
            Some(c)
        } else {
            None
        };
        let (z, head) = self.head.forward(&fused)?;
        Ok((
            z,
            ForwardCache {
                rgb,
                depth,
                head,
                batch: b,
            },
        ))
    }

    /// Accumulates gradients for `dz: [B, 1024]`.
    pub fn backward(&mut self, cache: &ForwardCache, dz: &Tensor) {
        let n = self.config.hidden;
        let b = cache.batch;
        let dfused = self.head.backward(&cache.head, dz);
        if let Some(c) = &cache.rgb {
            let mut dh = Tensor::zeros(&[b, n]);
            for r in 0..b {
                dh.row_mut(r).copy_from_slice(&dfused.row(r)[..n]);
            }
            self.rgb.backward(c, &dh);
        }
        if let Some(c) = &cache.depth {
            let mut dh = Tensor::zeros(&[b, n]);
            for r in 0..b {
                dh.row_mut(r).copy_from_slice(&dfused.row(r)[n..]);
            }
            self.depth.backward(c, &dh);
        }
    }

    /// Predicted embeddings, computed in batches of `batch` clips.
    pub fn predict(&self, clips: &[&ClipInput], batch: usize) -> Result<Vec<Vec<f64>>> {
        let mut out = Vec::with_capacity(clips.len());
        for chunk in clips.chunks(batch.max(1)) {
            let (z, _) = self.forward(chunk)?;
            for r in 0..chunk.len() {
                out.push(z.row(r).to_vec());
            }
        }
        Ok(out)
    }
}

impl Module for Model {
    fn visit(&self, f: &mut dyn FnMut(&Parameter)) {
        self.rgb.encoder.visit(f);
        self.depth.encoder.visit(f);
        self.rgb.lstm.visit(f);
        self.depth.lstm.visit(f);
        self.head.visit(f);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut Parameter)) {
        self.rgb.encoder.visit_mut(f);
        self.depth.encoder.visit_mut(f);
        self.rgb.lstm.visit_mut(f);
        self.depth.lstm.visit_mut(f);
        self.head.visit_mut(f);
    }
}
