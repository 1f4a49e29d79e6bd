//! Per-frame visual encoder.
//!
//! Each of the nine body-segment crops becomes one token through a shared
//! affine embedding. A learned class token is prepended, learned positional
//! embeddings are added, and the 10-token sequence runs through pre-norm
//! transformer blocks. The final layer-normed class-token row is the frame
//! feature.
//!
//! Frames are processed in batches: token matrices are stacked as
//! `[frames * 10, D]` and attention is applied within each 10-row group.

use crate::error::{Error, Result};
use crate::geometry::{FrameImage, NUM_SEGMENTS};
use crate::nn::{LayerNorm, Linear, INIT_STD};
use crate::param::{Module, Parameter};
use crate::rng::SplitMix64;
use crate::tensor::{Activation, LayerNormCache, Tensor};

/// Class token plus one token per body segment.
pub const SEQ_LEN: usize = NUM_SEGMENTS + 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EncoderConfig {
    pub embed_dim: usize,
    pub num_heads: usize,
    pub num_layers: usize,
    pub mlp_ratio: usize,
    pub segment_size: usize,
    pub channels: usize,
}

impl EncoderConfig {
    pub fn desk(channels: usize) -> Self {
        EncoderConfig {
            embed_dim: 64,
            num_heads: 4,
            num_layers: 2,
            mlp_ratio: 4,
            segment_size: 32,
            channels,
        }
    }

    pub fn full(channels: usize) -> Self {
        EncoderConfig {
            embed_dim: 256,
            num_heads: 4,
            num_layers: 6,
            mlp_ratio: 4,
            segment_size: 64,
            channels,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all_positive = [
            self.embed_dim,
            self.num_heads,
            self.num_layers,
            self.mlp_ratio,
            self.segment_size,
            self.channels,
        ]
        .iter()
        .all(|&v| v > 0);
        if !all_positive {
            return Err(Error::Config(format!("encoder sizes must be positive: {self:?}")));
        }
        if !self.embed_dim.is_multiple_of(self.num_heads) {
            return Err(Error::Config(format!(
                "embed_dim {} is not divisible by num_heads {}",
                self.embed_dim, self.num_heads
            )));
        }
        Ok(())
    }

    /// Flattened length of one segment crop.
    pub fn patch_len(&self) -> usize {
        self.segment_size * self.segment_size * self.channels
    }
}

/// Affine embedding of one segment crop, flattened row-major.
pub fn token_embed(segment: &FrameImage, weight: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let p = segment.pixels().len();
    let (rows, d) = weight.dims2()?;
    if rows != p || bias.shape() != [d] {
        return Err(Error::Config(format!(
            "segment of {p} values does not match embedding weight {:?} / bias {:?}",
            weight.shape(),
            bias.shape()
        )));
    }
    let x = Tensor::new(vec![1, p], segment.pixels().iter().map(|&v| v as f64).collect())?;
    let y = crate::tensor::matmul(&x, weight)?;
    Ok(Tensor::vector(y.add(&bias.clone().reshape(&[1, d])?)?.into_data()))
}

/// Stacks crops into a `[n, patch_len]` token-input matrix.
pub fn segments_to_rows(segments: &[FrameImage], cfg: &EncoderConfig) -> Result<Tensor> {
    let p = cfg.patch_len();
    let mut data = Vec::with_capacity(segments.len() * p);
    for s in segments {
        if s.height() != cfg.segment_size || s.width() != cfg.segment_size || s.channels() != cfg.channels {
            return Err(Error::Config(format!(
                "segment {}x{}x{} does not match configured {}x{}x{}",
                s.height(),
                s.width(),
                s.channels(),
                cfg.segment_size,
                cfg.segment_size,
                cfg.channels
            )));
        }
        data.extend(s.pixels().iter().map(|&v| v as f64));
    }
    Tensor::new(vec![segments.len(), p], data)
}

#[derive(Clone, Debug, PartialEq)]
pub struct MultiHeadAttention {
    pub wq: Linear,
    pub wk: Linear,
    pub wv: Linear,
    pub wo: Linear,
    pub num_heads: usize,
}

#[derive(Clone, Debug)]
pub struct AttentionCache {
    x: Tensor,
    q: Tensor,
    k: Tensor,
    v: Tensor,
    ctx: Tensor,
    /// `[group][head][i][j]`, row-stochastic in `j`.
    probs: Vec<f64>,
    group: usize,
}

impl AttentionCache {
    /// Every attention probability row (length = group size).
    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.probs.chunks(self.group)
    }
}

impl MultiHeadAttention {
    pub fn new(prefix: &str, dim: usize, num_heads: usize, rng: &mut SplitMix64) -> Self {
        MultiHeadAttention {
            wq: Linear::new(&format!("{prefix}.wq"), dim, dim, rng),
            wk: Linear::new(&format!("{prefix}.wk"), dim, dim, rng),
            wv: Linear::new(&format!("{prefix}.wv"), dim, dim, rng),
            wo: Linear::new(&format!("{prefix}.wo"), dim, dim, rng),
            num_heads,
        }
    }

    fn dims(&self) -> (usize, usize) {
        let d = self.wq.output_dim();
        (d, d / self.num_heads)
    }

    /// Self-attention within consecutive groups of `group` rows.
    pub fn forward(&self, x: &Tensor, group: usize) -> Result<(Tensor, AttentionCache)> {
        let (rows, _) = x.dims2()?;
        if group == 0 || rows % group != 0 {
            return Err(Error::Config(format!("{rows} rows do not split into groups of {group}")));
        }
        let (d, dh) = self.dims();
        let heads = self.num_heads;
        let scale = 1.0 / (dh as f64).sqrt();
        let q = self.wq.forward(x)?;
        let k = self.wk.forward(x)?;
        let v = self.wv.forward(x)?;
        let groups = rows / group;
        let mut probs = vec![0.0; groups * heads * group * group];
        let mut ctx = Tensor::zeros(&[rows, d]);
        let (qd, kd, vd) = (q.data(), k.data(), v.data());
        for g in 0..groups {
            for h in 0..heads {
                let off = h * dh;
                for i in 0..group {
                    let qi = &qd[(g * group + i) * d + off..][..dh];
                    let base = ((g * heads + h) * group + i) * group;
                    let row = &mut probs[base..base + group];
                    for (j, s) in row.iter_mut().enumerate() {
                        let kj = &kd[(g * group + j) * d + off..][..dh];
                        *s = scale * crate::tensor::dot(qi, kj);
                    }
                    crate::tensor::softmax_in_place(row);
                    let out = &mut ctx.data_mut()[(g * group + i) * d + off..][..dh];
                    for (j, &p) in row.iter().enumerate() {
                        let vj = &vd[(g * group + j) * d + off..][..dh];
                        for (o, &vv) in out.iter_mut().zip(vj) {
                            *o += p * vv;
                        }
                    }
                }
            }
        }
        let y = self.wo.forward(&ctx)?;
        Ok((
            y,
            AttentionCache {
                x: x.clone(),
                q,
                k,
                v,
                ctx,
                probs,
                group,
            },
        ))
    }

    pub fn backward(&mut self, cache: &AttentionCache, dy: &Tensor) -> Tensor {
        let (d, dh) = self.dims();
        let heads = self.num_heads;
        let group = cache.group;
        let scale = 1.0 / (dh as f64).sqrt();
        let rows = cache.x.shape()[0];
        let groups = rows / group;
        let dctx = self.wo.backward(&cache.ctx, dy, true).expect("input grad");
        let mut dq = Tensor::zeros(&[rows, d]);
        let mut dk = Tensor::zeros(&[rows, d]);
        let mut dv = Tensor::zeros(&[rows, d]);
        let (qd, kd, vd, dc) = (cache.q.data(), cache.k.data(), cache.v.data(), dctx.data());
        let mut dp = vec![0.0; group];
        for g in 0..groups {
            for h in 0..heads {
                let off = h * dh;
                for i in 0..group {
                    let ri = (g * group + i) * d + off;
                    let base = ((g * heads + h) * group + i) * group;
                    let p = &cache.probs[base..base + group];
                    let dci = &dc[ri..ri + dh];
                    for j in 0..group {
                        let rj = (g * group + j) * d + off;
                        dp[j] = crate::tensor::dot(dci, &vd[rj..rj + dh]);
                        let dvj = &mut dv.data_mut()[rj..rj + dh];
                        for (o, &c) in dvj.iter_mut().zip(dci) {
                            *o += p[j] * c;
                        }
                    }
                    let s: f64 = p.iter().zip(&dp).map(|(a, b)| a * b).sum();
                    for j in 0..group {
                        let ds = scale * p[j] * (dp[j] - s);
                        if ds == 0.0 {
                            continue;
                        }
                        let rj = (g * group + j) * d + off;
                        {
                            let dqi = &mut dq.data_mut()[ri..ri + dh];
                            for (o, &kv) in dqi.iter_mut().zip(&kd[rj..rj + dh]) {
                                *o += ds * kv;
                            }
                        }
                        let dkj = &mut dk.data_mut()[rj..rj + dh];
                        for (o, &qv) in dkj.iter_mut().zip(&qd[ri..ri + dh]) {
                            *o += ds * qv;
                        }
                    }
                }
            }
        }
        let mut dx = self.wq.backward(&cache.x, &dq, true).expect("input grad");
        dx.add_assign(&self.wk.backward(&cache.x, &dk, true).expect("input grad"))
            .expect("shape");
        dx.add_assign(&self.wv.backward(&cache.x, &dv, true).expect("input grad"))
            .expect("shape");
        dx
    }
}

impl Module for MultiHeadAttention {
    fn visit(&self, f: &mut dyn FnMut(&Parameter)) {
        self.wq.visit(f);
        self.wk.visit(f);
        self.wv.visit(f);
        self.wo.visit(f);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut Parameter)) {
        self.wq.visit_mut(f);
        self.wk.visit_mut(f);
        self.wv.visit_mut(f);
        self.wo.visit_mut(f);
    }
}

/// Pre-norm block: `x + MHSA(LN(x))`, then `+ MLP(LN(·))` with GELU.
#[derive(Clone, Debug, PartialEq)]
pub struct TransformerBlock {
    pub ln1: LayerNorm,
    pub attn: MultiHeadAttention,
    pub ln2: LayerNorm,
    pub fc1: Linear,
    pub fc2: Linear,
}

#[derive(Clone, Debug)]
pub struct BlockCache {
    ln1: LayerNormCache,
    attn: AttentionCache,
    ln2: LayerNormCache,
    h2: Tensor,
    pre: Tensor,
    act: Tensor,
}

impl BlockCache {
    pub fn attention(&self) -> &AttentionCache {
        &self.attn
    }
}

impl TransformerBlock {
    pub fn new(prefix: &str, dim: usize, heads: usize, mlp_ratio: usize, rng: &mut SplitMix64) -> Self {
        TransformerBlock {
            ln1: LayerNorm::new(&format!("{prefix}.ln1"), dim),
            attn: MultiHeadAttention::new(&format!("{prefix}.attn"), dim, heads, rng),
            ln2: LayerNorm::new(&format!("{prefix}.ln2"), dim),
            fc1: Linear::new(&format!("{prefix}.mlp.fc1"), dim, dim * mlp_ratio, rng),
            fc2: Linear::new(&format!("{prefix}.mlp.fc2"), dim * mlp_ratio, dim, rng),
        }
    }

    pub fn forward(&self, x: &Tensor, group: usize) -> Result<(Tensor, BlockCache)> {
        let (h1, ln1) = self.ln1.forward(x)?;
        let (a, attn) = self.attn.forward(&h1, group)?;
        let x1 = x.add(&a)?;
        let (h2, ln2) = self.ln2.forward(&x1)?;
        let pre = self.fc1.forward(&h2)?;
        let act = Activation::Gelu.forward(&pre);
        let m = self.fc2.forward(&act)?;
        let y = x1.add(&m)?;
        Ok((
            y,
            BlockCache {
                ln1,
                attn,
                ln2,
                h2,
                pre,
                act,
            },
        ))
    }

    pub fn backward(&mut self, cache: &BlockCache, dy: &Tensor) -> Tensor {
        let dact = self.fc2.backward(&cache.act, dy, true).expect("input grad");
        let dpre = Activation::Gelu.backward(&cache.pre, &dact).expect("shape");
        let dh2 = self.fc1.backward(&cache.h2, &dpre, true).expect("input grad");
        let mut dx1 = self.ln2.backward(&cache.ln2, &dh2);
        dx1.add_assign(dy).expect("shape");
        let dh1 = self.attn.backward(&cache.attn, &dx1);
        let mut dx = self.ln1.backward(&cache.ln1, &dh1);
        dx.add_assign(&dx1).expect("shape");
        dx
    }
}

impl Module for TransformerBlock {
    fn visit(&self, f: &mut dyn FnMut(&Parameter)) {
        self.ln1.visit(f);
        self.attn.visit(f);
        self.ln2.visit(f);
        self.fc1.visit(f);
        self.fc2.visit(f);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut Parameter)) {
        self.ln1.visit_mut(f);
        self.attn.visit_mut(f);
        self.ln2.visit_mut(f);
        self.fc1.visit_mut(f);
        self.fc2.visit_mut(f);
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Encoder {
    pub config: EncoderConfig,
    pub embed: Linear,
    pub cls: Parameter,
    pub pos: Parameter,
    pub blocks: Vec<TransformerBlock>,
    pub ln_f: LayerNorm,
}

#[derive(Clone, Debug)]
pub struct EncoderCache {
    tokens_in: Tensor,
    blocks: Vec<BlockCache>,
    ln_f: LayerNormCache,
    frames: usize,
}

impl EncoderCache {
    pub fn blocks(&self) -> &[BlockCache] {
        &self.blocks
    }
}

impl Encoder {
    pub fn new(prefix: &str, config: EncoderConfig, rng: &mut SplitMix64) -> Result<Self> {
        config.validate()?;
        let d = config.embed_dim;
        let embed = Linear::new(&format!("{prefix}.embed"), config.patch_len(), d, rng);
        let cls = Parameter::zeros(format!("{prefix}.cls"), &[d]);
        let pos = Parameter::normal(format!("{prefix}.pos"), &[SEQ_LEN, d], INIT_STD, rng);
        let blocks = (0..config.num_layers)
            .map(|l| {
                TransformerBlock::new(
                    &format!("{prefix}.block{l}"),
                    d,
                    config.num_heads,
                    config.mlp_ratio,
                    rng,
                )
            })
            .collect();
        Ok(Encoder {
            config,
            embed,
            cls,
            pos,
            blocks,
            ln_f: LayerNorm::new(&format!("{prefix}.ln_f"), d),
        })
    }

    /// Encodes a batch of frames. `tokens_in` is `[frames * 9, patch_len]`;
    /// the result is `[frames, D]`.
    pub fn forward(&self, tokens_in: &Tensor) -> Result<(Tensor, EncoderCache)> {
        let (rows, p) = tokens_in.dims2()?;
        if p != self.config.patch_len() || rows % NUM_SEGMENTS != 0 {
            return Err(Error::Config(format!(
                "encoder input {:?} is not [frames*{NUM_SEGMENTS}, {}]",
                tokens_in.shape(),
                self.config.patch_len()
            )));
        }
        let frames = rows / NUM_SEGMENTS;
        let d = self.config.embed_dim;
        let tok = self.embed.forward(tokens_in)?;
        let mut x = Tensor::zeros(&[frames * SEQ_LEN, d]);
        let pos = self.pos.value.data();
        for f in 0..frames {
            for t in 0..SEQ_LEN {
                let src: &[f64] = if t == 0 {
                    self.cls.value.data()
                } else {
                    tok.row(f * NUM_SEGMENTS + t - 1)
                };
                let dst = x.row_mut(f * SEQ_LEN + t);
                for ((o, &s), &pe) in dst.iter_mut().zip(src).zip(&pos[t * d..(t + 1) * d]) {
                    *o = s + pe;
                }
            }
        }
        let mut caches = Vec::with_capacity(self.blocks.len());
        for block in &self.blocks {
            let (y, c) = block.forward(&x, SEQ_LEN)?;
            caches.push(c);
            x = y;
        }
        let (y, ln_f) = self.ln_f.forward(&x)?;
        let mut out = Tensor::zeros(&[frames, d]);
        for f in 0..frames {
            out.row_mut(f).copy_from_slice(y.row(f * SEQ_LEN));
        }
        Ok((
            out,
            EncoderCache {
                tokens_in: tokens_in.clone(),
                blocks: caches,
                ln_f,
                frames,
            },
        ))
    }

    /// Accumulates gradients from `dout: [frames, D]`; optionally returns the
    /// gradient with respect to the pixel rows.
    pub fn backward(&mut self, cache: &EncoderCache, dout: &Tensor, want_input: bool) -> Option<Tensor> {
        let d = self.config.embed_dim;
        let frames = cache.frames;
        let mut dy = Tensor::zeros(&[frames * SEQ_LEN, d]);
        for f in 0..frames {
            dy.row_mut(f * SEQ_LEN).copy_from_slice(dout.row(f));
        }
        let mut dx = self.ln_f.backward(&cache.ln_f, &dy);
        for (block, c) in self.blocks.iter_mut().zip(&cache.blocks).rev() {
            dx = block.backward(c, &dx);
        }
        let mut dtok = Tensor::zeros(&[frames * NUM_SEGMENTS, d]);
        let mut dpos = Tensor::zeros(&[SEQ_LEN, d]);
        let mut dcls = Tensor::zeros(&[d]);
        for f in 0..frames {
            for t in 0..SEQ_LEN {
                let g = dx.row(f * SEQ_LEN + t);
                for (acc, &v) in dpos.row_mut(t).iter_mut().zip(g) {
                    *acc += v;
                }
                let dst = if t == 0 {
                    dcls.data_mut()
                } else {
                    dtok.row_mut(f * NUM_SEGMENTS + t - 1)
                };
                for (acc, &v) in dst.iter_mut().zip(g) {
                    *acc += v;
                }
            }
        }
        self.pos.accumulate(&dpos);
        self.cls.accumulate(&dcls);
        self.embed.backward(&cache.tokens_in, &dtok, want_input)
    }

    /// Frame feature for one frame's nine segment crops.
    pub fn encode_frame(&self, segments: &[FrameImage]) -> Result<Tensor> {
        if segments.len() != NUM_SEGMENTS {
            return Err(Error::Config(format!(
                "expected {NUM_SEGMENTS} segments, got {}",
                segments.len()
            )));
        }
        let rows = segments_to_rows(segments, &self.config)?;
        let (out, _) = self.forward(&rows)?;
        Ok(Tensor::vector(out.into_data()))
    }
}

impl Module for Encoder {
    fn visit(&self, f: &mut dyn FnMut(&Parameter)) {
        self.embed.visit(f);
        f(&self.cls);
        f(&self.pos);
        for b in &self.blocks {
            b.visit(f);
        }
        self.ln_f.visit(f);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut Parameter)) {
        self.embed.visit_mut(f);
        f(&mut self.cls);
        f(&mut self.pos);
        for b in &mut self.blocks {
            b.visit_mut(f);
        }
        self.ln_f.visit_mut(f);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_rows(rows: usize, cols: usize, seed: u64) -> Tensor {
        let mut rng = SplitMix64::new(seed);
        Tensor::new(vec![rows, cols], (0..rows * cols).map(|_| rng.normal()).collect()).unwrap()
    }

    fn tiny_config() -> EncoderConfig {
        EncoderConfig {
            embed_dim: 8,
            num_heads: 2,
            num_layers: 2,
            mlp_ratio: 2,
            segment_size: 2,
            channels: 1,
        }
    }

    #[test]
    fn token_embed_examples() {
        let seg = FrameImage::new(1, 1, 1, vec![0.5]).unwrap();
        let w = Tensor::new(vec![1, 2], vec![1.0, 2.0]).unwrap();
        let b = Tensor::vector(vec![0.0, 1.0]);
        assert_eq!(token_embed(&seg, &w, &b).unwrap().data(), &[0.5, 2.0]);

        let zero = token_embed(&seg, &Tensor::zeros(&[1, 2]), &Tensor::zeros(&[2])).unwrap();
        assert_eq!(zero.data(), &[0.0, 0.0]);

        let px = vec![0.25f32, 0.5, 0.75, 1.0];
        let w = random_rows(4, 3, 9);
        let b = Tensor::zeros(&[3]);
        let base = token_embed(&FrameImage::new(2, 2, 1, px.clone()).unwrap(), &w, &b).unwrap();
        let scaled_px = px.iter().map(|v| v * 0.5).collect();
        let scaled = token_embed(&FrameImage::new(2, 2, 1, scaled_px).unwrap(), &w, &b).unwrap();
        assert!(scaled.max_abs_diff(&base.scale(0.5)) < 1e-12);
    }

    #[test]
    fn single_token_attends_to_itself() {
        let mut rng = SplitMix64::new(4);
        let attn = MultiHeadAttention::new("a", 6, 3, &mut rng);
        let x = random_rows(1, 6, 5);
        let (y, cache) = attn.forward(&x, 1).unwrap();
        assert!(cache.rows().all(|r| r == [1.0]));
        let expected = attn.wo.forward(&attn.wv.forward(&x).unwrap()).unwrap();
        assert!(y.max_abs_diff(&expected) < 1e-12);
    }

    #[test]
    fn identical_tokens_give_identical_rows() {
        let mut rng = SplitMix64::new(6);
        let attn = MultiHeadAttention::new("a", 8, 2, &mut rng);
        let row = random_rows(1, 8, 7);
        let x = Tensor::from_rows(&vec![row.data().to_vec(); 5]).unwrap();
        let (y, _) = attn.forward(&x, 5).unwrap();
        for r in 1..5 {
            assert_eq!(y.row(r), y.row(0));
        }
    }

    #[test]
    fn zero_weight_block_is_identity_for_any_length() {
        let mut rng = SplitMix64::new(8);
        let mut block = TransformerBlock::new("b", 8, 2, 4, &mut rng);
        block.attn.visit_mut(&mut |p| p.value.data_mut().fill(0.0));
        block.fc2.visit_mut(&mut |p| p.value.data_mut().fill(0.0));
        for n in [1, 3, 10] {
            let x = random_rows(n, 8, n as u64);
            let (y, _) = block.forward(&x, n).unwrap();
            assert_eq!(y, x);
        }
    }

    #[test]
    fn grouping_must_divide_rows() {
        let attn = MultiHeadAttention::new("a", 4, 2, &mut SplitMix64::new(0));
        assert!(attn.forward(&Tensor::zeros(&[5, 4]), 2).is_err());
        assert!(attn.forward(&Tensor::zeros(&[4, 4]), 0).is_err());
    }

    fn permuted_rows(x: &Tensor, perm: &[usize]) -> Tensor {
        Tensor::from_rows(&perm.iter().map(|&i| x.row(i).to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn segment_permutation_and_positional_embeddings() {
        let cfg = tiny_config();
        let mut enc = Encoder::new("e", cfg, &mut SplitMix64::new(11)).unwrap();
        let x = random_rows(NUM_SEGMENTS, cfg.patch_len(), 12);
        let perm = [3, 0, 8, 1, 5, 2, 7, 4, 6];
        let px = permuted_rows(&x, &perm);

        let (a, _) = enc.forward(&x).unwrap();
        let (b, _) = enc.forward(&px).unwrap();
        assert_eq!(a.shape(), [1, cfg.embed_dim]);
        assert!(a.max_abs_diff(&b) > 1e-6);

        enc.pos.value.data_mut().fill(0.0);
        let (a, _) = enc.forward(&x).unwrap();
        let (b, _) = enc.forward(&px).unwrap();
        assert!(a.max_abs_diff(&b) < 1e-9);
    }

    #[test]
    fn batched_frames_match_single_frames() {
        let cfg = tiny_config();
        let enc = Encoder::new("e", cfg, &mut SplitMix64::new(13)).unwrap();
        let x = random_rows(3 * NUM_SEGMENTS, cfg.patch_len(), 14);
        let (all, _) = enc.forward(&x).unwrap();
        for f in 0..3 {
            let rows: Vec<Vec<f64>> = (0..NUM_SEGMENTS).map(|s| x.row(f * NUM_SEGMENTS + s).to_vec()).collect();
            let (one, _) = enc.forward(&Tensor::from_rows(&rows).unwrap()).unwrap();
            for (u, v) in one.row(0).iter().zip(all.row(f)) {
                assert!((u - v).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn config_validation() {
        assert!(EncoderConfig::desk(3).validate().is_ok());
        assert!(EncoderConfig { num_heads: 3, ..EncoderConfig::desk(3) }.validate().is_err());
        assert!(EncoderConfig { segment_size: 0, ..EncoderConfig::desk(1) }.validate().is_err());
        let enc = Encoder::new("e", tiny_config(), &mut SplitMix64::new(0)).unwrap();
        assert!(enc.forward(&Tensor::zeros(&[8, 4])).is_err());
        assert!(enc.encode_frame(&[]).is_err());
    }
}
