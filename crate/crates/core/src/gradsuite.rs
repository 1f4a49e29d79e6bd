//! Finite-difference checks of every hand-written backward pass.

use crate::encoder::{EncoderConfig, MultiHeadAttention, TransformerBlock, SEQ_LEN};
use crate::encoder::Encoder;
use crate::geometry::NUM_SEGMENTS;
use crate::gradcheck::{flatten_grads, flatten_values, load_values, GradCheck, GradCheckReport};
use crate::model::{ClipInput, Modality, Model, ModelConfig};
use crate::param::Module;
use crate::rng::{derive_seed, SplitMix64};
use crate::temporal::{Lstm, LstmConfig};
use crate::tensor::Tensor;
use crate::zeroshot::{loss, ClassEmbeddingTable, Objective, SemanticHead, EMBED_DIM};

/// Coordinates checked per parameter set in the wide layers.
pub const HEAD_COORDS: usize = 256;

/// Scale of the random readout weights. Keeping the objective near unit size
/// keeps its rounding error well below the comparison floor.
const PROJ_STD: f64 = 0.1;

fn random(shape: &[usize], std: f64, rng: &mut SplitMix64) -> Tensor {
    let mut t = Tensor::zeros(shape);
    t.data_mut().iter_mut().for_each(|v| *v = std * rng.normal());
    t
}

/// Gives every parameter a non-trivial value so that zero-initialised biases
/// and unit LayerNorm gains are exercised too.
fn jitter<M: Module>(m: &mut M, std: f64, rng: &mut SplitMix64) {
    m.visit_mut(&mut |p| {
        p.value
            .data_mut()
            .iter_mut()
            .for_each(|v| *v += std * rng.normal())
    });
}

/// Checks parameter gradients of `module` under `objective(module) -> f64`,
/// where `backward` accumulates the matching analytic gradient.
fn check_params<M: Module + Clone>(
    name: &str,
    gc: &GradCheck,
    module: &M,
    objective: impl Fn(&M) -> f64,
    backward: impl FnOnce(&mut M),
) -> GradCheckReport {
    let mut m = module.clone();
    m.zero_grad();
    backward(&mut m);
    let analytic = flatten_grads(&m);
    let x0 = flatten_values(module);
    let mut scratch = module.clone();
    gc.run(name, &x0, &analytic, |flat| {
        load_values(&mut scratch, flat);
        objective(&scratch)
    })
}

fn check_input(
    name: &str,
    gc: &GradCheck,
    x: &Tensor,
    analytic: &Tensor,
    objective: impl Fn(&Tensor) -> f64,
) -> GradCheckReport {
    let shape = x.shape().to_vec();
    gc.run(name, x.data(), analytic.data(), |flat| {
        objective(&Tensor::new(shape.clone(), flat.to_vec()).expect("shape"))
    })
}

fn tiny_encoder() -> EncoderConfig {
    EncoderConfig {
        embed_dim: 8,
        num_heads: 2,
        num_layers: 2,
        mlp_ratio: 2,
        segment_size: 4,
        channels: 1,
    }
}

fn attention_checks(seed: u64, gc: &GradCheck, out: &mut Vec<GradCheckReport>) {
    let mut rng = SplitMix64::new(derive_seed(seed, "attention"));
    let mut attn = MultiHeadAttention::new("attn", 8, 2, &mut rng);
    jitter(&mut attn, 0.3, &mut rng);
    let x = random(&[2 * SEQ_LEN, 8], 1.0, &mut rng);
    let proj = random(&[2 * SEQ_LEN, 8], PROJ_STD, &mut rng);
    let obj = |a: &MultiHeadAttention, x: &Tensor| a.forward(x, SEQ_LEN).unwrap().0.dot(&proj).unwrap();
    out.push(check_params(
        &format!("attention/params/{seed}"),
        gc,
        &attn,
        |a| obj(a, &x),
        |a| {
            let (_, c) = a.forward(&x, SEQ_LEN).unwrap();
            a.backward(&c, &proj);
        },
    ));
    let (_, c) = attn.forward(&x, SEQ_LEN).unwrap();
    let dx = attn.clone().backward(&c, &proj);
    out.push(check_input(&format!("attention/input/{seed}"), gc, &x, &dx, |x| obj(&attn, x)));
}

fn block_checks(seed: u64, gc: &GradCheck, out: &mut Vec<GradCheckReport>) {
    let mut rng = SplitMix64::new(derive_seed(seed, "block"));
    let mut block = TransformerBlock::new("block", 8, 2, 2, &mut rng);
    jitter(&mut block, 0.3, &mut rng);
    let x = random(&[2 * SEQ_LEN, 8], 1.0, &mut rng);
    let proj = random(&[2 * SEQ_LEN, 8], PROJ_STD, &mut rng);
    let obj = |b: &TransformerBlock, x: &Tensor| b.forward(x, SEQ_LEN).unwrap().0.dot(&proj).unwrap();
    out.push(check_params(
        &format!("block/params/{seed}"),
        gc,
        &block,
        |b| obj(b, &x),
        |b| {
            let (_, c) = b.forward(&x, SEQ_LEN).unwrap();
            b.backward(&c, &proj);
        },
    ));
    let (_, c) = block.forward(&x, SEQ_LEN).unwrap();
    let dx = block.clone().backward(&c, &proj);
    out.push(check_input(&format!("block/input/{seed}"), gc, &x, &dx, |x| obj(&block, x)));
}

fn encoder_checks(seed: u64, gc: &GradCheck, out: &mut Vec<GradCheckReport>) {
    let cfg = tiny_encoder();
    let mut rng = SplitMix64::new(derive_seed(seed, "encoder"));
    let mut enc = Encoder::new("enc", cfg, &mut rng).unwrap();
    jitter(&mut enc, 0.3, &mut rng);
    let frames = 2;
    let x = random(&[frames * NUM_SEGMENTS, cfg.patch_len()], 1.0, &mut rng);
    let proj = random(&[frames, cfg.embed_dim], PROJ_STD, &mut rng);
    let obj = |e: &Encoder, x: &Tensor| e.forward(x).unwrap().0.dot(&proj).unwrap();

    // The token embedding on its own: one frame, gradients of the affine map.
    let single = Tensor::new(
        vec![NUM_SEGMENTS, cfg.patch_len()],
        x.data()[..NUM_SEGMENTS * cfg.patch_len()].to_vec(),
    )
    .unwrap();
    let tok_proj = random(&[NUM_SEGMENTS, cfg.embed_dim], PROJ_STD, &mut rng);
    out.push(check_params(
        &format!("token_embed/params/{seed}"),
        gc,
        &enc.embed,
        |l| l.forward(&single).unwrap().dot(&tok_proj).unwrap(),
        |l| {
            l.backward(&single, &tok_proj, false);
        },
    ));

    out.push(check_params(
        &format!("encoder/params/{seed}"),
        gc,
        &enc,
        |e| obj(e, &x),
        |e| {
            let (_, c) = e.forward(&x).unwrap();
            e.backward(&c, &proj, false);
        },
    ));
    let (_, c) = enc.forward(&x).unwrap();
    let dx = enc.clone().backward(&c, &proj, true).unwrap();
    out.push(check_input(&format!("encoder/input/{seed}"), gc, &x, &dx, |x| obj(&enc, x)));
}

fn lstm_checks(seed: u64, gc: &GradCheck, out: &mut Vec<GradCheckReport>) {
    let mut rng = SplitMix64::new(derive_seed(seed, "lstm"));
    let cfg = LstmConfig {
        input_dim: 6,
        hidden_dim: 8,
    };
    let mut lstm = Lstm::new("lstm", cfg, &mut rng).unwrap();
    jitter(&mut lstm, 0.3, &mut rng);
    // Two sequences of different lengths exercise the held state.
    let seqs = vec![random(&[3, 6], 1.0, &mut rng), random(&[2, 6], 1.0, &mut rng)];
    let proj = random(&[2, 8], PROJ_STD, &mut rng);
    let obj = |l: &Lstm, seqs: &[Tensor]| l.forward_batch(seqs).unwrap().0.dot(&proj).unwrap();
    out.push(check_params(
        &format!("lstm/params/{seed}"),
        gc,
        &lstm,
        |l| obj(l, &seqs),
        |l| {
            let (_, c) = l.forward_batch(&seqs).unwrap();
            l.backward_batch(&c, &proj);
        },
    ));
    let (_, c) = lstm.forward_batch(&seqs).unwrap();
    let dxs = lstm.clone().backward_batch(&c, &proj);
    for (i, (x, dx)) in seqs.iter().zip(&dxs).enumerate() {
        out.push(check_input(&format!("lstm/input{i}/{seed}"), gc, x, dx, |xi| {
            let mut s = seqs.clone();
            s[i] = xi.clone();
            obj(&lstm, &s)
        }));
    }
}

fn head_checks(seed: u64, gc: &GradCheck, out: &mut Vec<GradCheckReport>) {
    let mut rng = SplitMix64::new(derive_seed(seed, "head"));
    let gc = GradCheck {
        max_coords: Some(HEAD_COORDS),
        seed,
        ..gc.clone()
    };
    let mut head = SemanticHead::new(8, 2, &mut rng).unwrap();
    jitter(&mut head, 0.05, &mut rng);
    let x = random(&[2, 8], 1.0, &mut rng);
    let proj = random(&[2, EMBED_DIM], PROJ_STD, &mut rng);
    let obj = |h: &SemanticHead, x: &Tensor| h.forward(x).unwrap().0.dot(&proj).unwrap();
    out.push(check_params(
        &format!("head/params/{seed}"),
        &gc,
        &head,
        |h| obj(h, &x),
        |h| {
            let (_, c) = h.forward(&x).unwrap();
            h.backward(&c, &proj);
        },
    ));
    let (_, c) = head.forward(&x).unwrap();
    let dx = head.clone().backward(&c, &proj);
    out.push(check_input(&format!("head/input/{seed}"), &gc, &x, &dx, |x| obj(&head, x)));
}

/// Both streams, fusion, head and the cosine-softmax loss.
fn end_to_end_checks(seed: u64, gc: &GradCheck, out: &mut Vec<GradCheckReport>) {
    let mut rng = SplitMix64::new(derive_seed(seed, "end_to_end"));
    let gc = GradCheck {
        max_coords: Some(HEAD_COORDS),
        seed,
        ..gc.clone()
    };
    let enc = EncoderConfig {
        embed_dim: 8,
        num_heads: 2,
        num_layers: 1,
        mlp_ratio: 2,
        segment_size: 2,
        channels: 3,
    };
    let cfg = ModelConfig {
        encoder: enc,
        hidden: 4,
        fc_count: 2,
        modality: Modality::Both,
        objective: Objective::default(),
        max_frames: 4,
    };
    let mut model = Model::new(cfg, seed).unwrap();
    jitter(&mut model, 0.05, &mut rng);
    let clip = |frames: usize, rng: &mut SplitMix64| ClipInput {
        rgb: Some(random(&[frames * NUM_SEGMENTS, 12], 0.5, rng)),
        depth: Some(random(&[frames * NUM_SEGMENTS, 4], 0.5, rng)),
        frames,
    };
    let clips = [clip(3, &mut rng), clip(2, &mut rng)];
    let table = ClassEmbeddingTable::new(
        (0..3)
            .map(|c| (format!("c{c}"), random(&[EMBED_DIM], 1.0, &mut rng).into_data()))
            .collect(),
    )
    .unwrap();
    let labels = [0usize, 2];
    let objective = |m: &Model| {
        let refs: Vec<&ClipInput> = clips.iter().collect();
        let (z, _) = m.forward(&refs).unwrap();
        labels
            .iter()
            .enumerate()
            .map(|(r, &y)| loss(z.row(r), y, &table, cfg.objective).unwrap().loss)
            .sum::<f64>()
            / labels.len() as f64
    };
    let mut m = model.clone();
    m.zero_grad();
    {
        let refs: Vec<&ClipInput> = clips.iter().collect();
        let (z, cache) = m.forward(&refs).unwrap();
        let mut dz = Tensor::zeros(z.shape());
        for (r, &y) in labels.iter().enumerate() {
            let l = loss(z.row(r), y, &table, cfg.objective).unwrap();
            for (d, g) in dz.row_mut(r).iter_mut().zip(&l.grad) {
                *d = g / labels.len() as f64;
            }
        }
        m.backward(&cache, &dz);
    }
    let analytic = flatten_grads(&m);
    let x0 = flatten_values(&model);
    // Visit order puts both streams before the head.
    let head_len = model.head.param_count();
    let split = x0.len() - head_len;
    let mut scratch = model.clone();
    let mut f = |flat: &[f64]| {
        load_values(&mut scratch, flat);
        objective(&scratch)
    };
    let full = GradCheck {
        max_coords: None,
        ..gc.clone()
    };
    out.push(full.run_range(&format!("end_to_end/streams/{seed}"), &x0, &analytic, 0..split, &mut f));
    out.push(gc.run_range(
        &format!("end_to_end/head/{seed}"),
        &x0,
        &analytic,
        split..x0.len(),
        &mut f,
    ));
}

/// Runs every check for each seed.
pub fn run_suite(seeds: &[u64], gc: &GradCheck) -> Vec<GradCheckReport> {
    let mut out = Vec::new();
    for &seed in seeds {
        attention_checks(seed, gc, &mut out);
        block_checks(seed, gc, &mut out);
        encoder_checks(seed, gc, &mut out);
        lstm_checks(seed, gc, &mut out);
        head_checks(seed, gc, &mut out);
        end_to_end_checks(seed, gc, &mut out);
    }
    out
}
