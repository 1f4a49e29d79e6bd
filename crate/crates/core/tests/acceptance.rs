//! End-to-end acceptance checks. Runs as a plain binary so that every
//! criterion prints its own PASS/FAIL line.

use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use zsr::checkpoint;
use zsr::data::{
    generate_synthetic, load_manifest, prepare_all, seen_count, split_classes, Protocol, SyntheticSpec,
};
use zsr::encoder::{Encoder, EncoderConfig, MultiHeadAttention};
use zsr::formats::{
    decode_keypoints, decode_video, encode_keypoints, encode_video, read_keypoints, read_video, AccessLog,
};
use zsr::geometry::NUM_SEGMENTS;
use zsr::gradcheck::GradCheck;
use zsr::gradsuite::run_suite;
use zsr::harness::{run_protocol, train_epoch, ExperimentConfig, RunReport, Sample};
use zsr::model::{ClipInput, Modality, Model, ModelConfig};
use zsr::param::Adam;
use zsr::rng::SplitMix64;
use zsr::tensor::Tensor;
use zsr::zeroshot::{classify, similarity, ClassEmbeddingTable, Objective};

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn gradient_suite() -> Outcome {
    let start = Instant::now();
    let reports = run_suite(&[0, 1, 2], &GradCheck::default());
    let secs = start.elapsed().as_secs_f64();
    let worst = reports.iter().map(|r| r.max_rel_error).fold(0.0, f64::max);
    let failed: Vec<String> = reports.iter().filter(|r| !r.passed()).map(|r| r.to_string()).collect();
    check(failed.is_empty(), format!("failing checks: {failed:?}"))?;
    check(secs <= 60.0, format!("took {secs:.1}s"))?;
    Ok(format!("{} checks over 3 seeds, max rel err {worst:.2e}, {secs:.1}s", reports.len()))
}

/// Independent nearest-neighbour oracle: explicit cosine, first maximum wins.
fn brute_force(z: &[f64], rows: &[Vec<f64>]) -> usize {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut best = (0, f64::NEG_INFINITY);
    for (i, e) in rows.iter().enumerate() {
        let unit: Vec<f64> = e.iter().map(|x| x / norm(e)).collect();
        let c = z.iter().zip(&unit).map(|(a, b)| a * b).sum::<f64>() / norm(z);
        if c > best.1 {
            best = (i, c);
        }
    }
    best.0
}

fn classifier_oracle() -> Outcome {
    let mut rng = SplitMix64::new(0xC1A5);
    let mut ties = 0;
    for case in 0..1000 {
        let k = 2 + rng.below(49) as usize;
        let dim = 1 + rng.below(16) as usize;
        let mut rows: Vec<Vec<f64>> = (0..k).map(|_| (0..dim).map(|_| rng.normal()).collect()).collect();
        let z: Vec<f64> = if case % 4 == 0 {
            // force a tie: copy the best row to a later slot and aim at it
            let a = rng.below(k as u64 - 1) as usize;
            let b = a + 1 + rng.below((k - a - 1) as u64) as usize;
            rows[b] = rows[a].iter().map(|x| 2.0 * x).collect();
            ties += 1;
            rows[a].clone()
        } else {
            (0..dim).map(|_| rng.normal()).collect()
        };
        let table = ClassEmbeddingTable::with_dim(
            rows.iter().enumerate().map(|(i, r)| (format!("c{i}"), r.clone())).collect(),
            dim,
        )
        .map_err(|e| e.to_string())?;
        let got = classify(&z, &table).map_err(|e| e.to_string())?;
        let want = brute_force(&z, &rows);
        check(got == want, format!("case {case}: classify {got}, oracle {want}"))?;
    }
    Ok(format!("1000 instances agree, {ties} with forced ties"))
}

fn cosine_values() -> Outcome {
    let pad = |v: &[f64]| {
        let mut out = v.to_vec();
        out.resize(8, 0.0);
        out
    };
    let a = pad(&[1.0, 2.0, 2.0]);
    let b = pad(&[2.0, 1.0, 2.0]);
    let cases = [
        (similarity(&a, &a), 1.0),
        (similarity(&pad(&[1.0, 0.0]), &pad(&[0.0, 3.0])), 0.0),
        (similarity(&a, &b), 8.0 / 9.0),
    ];
    for (got, want) in cases {
        let got = got.map_err(|e| e.to_string())?;
        check((got - want).abs() <= 1e-12, format!("cos {got} vs {want}"))?;
    }
    Ok("1, 0 and 8/9 within 1e-12".into())
}

fn protocol_splits() -> Outcome {
    let s = split_classes(20, Protocol::P1, 7).map_err(|e| e.to_string())?;
    check((s.seen.len(), s.unseen.len()) == (18, 2), "K=20 P1 is not 18/2")?;
    let s = split_classes(60, Protocol::P2, 7).map_err(|e| e.to_string())?;
    check((s.seen.len(), s.unseen.len()) == (42, 18), "K=60 P2 is not 42/18")?;
    for k in 2..=200 {
        for protocol in [Protocol::P1, Protocol::P2] {
            for seed in [0, 1, 0xFFFF_FFFF] {
                let a = split_classes(k, protocol, seed).map_err(|e| e.to_string())?;
                check(a == split_classes(k, protocol, seed).unwrap(), format!("K={k} not deterministic"))?;
                check(a.seen.len() == seen_count(k, protocol), format!("K={k} wrong size"))?;
                let mut all: Vec<usize> = a.seen.iter().chain(&a.unseen).copied().collect();
                all.sort_unstable();
                check(all == (0..k).collect::<Vec<_>>(), format!("K={k} is not a partition"))?;
            }
        }
    }
    Ok("18/2, 42/18, deterministic partitions for K in 2..=200".into())
}

fn encoder_invariants() -> Outcome {
    let mut rng = SplitMix64::new(0xE1C0);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let heads = 1 + rng.below(4) as usize;
        let d = heads * (1 + rng.below(8) as usize);
        let n = 1 + rng.below(12) as usize;
        let groups = 1 + rng.below(3) as usize;
        let attn = MultiHeadAttention::new("a", d, heads, &mut rng);
        let scale = 0.1 + 5.0 * rng.next_f64();
        let x = Tensor::new(vec![n * groups, d], (0..n * groups * d).map(|_| scale * rng.normal()).collect())
            .map_err(|e| e.to_string())?;
        let (_, cache) = attn.forward(&x, n).map_err(|e| e.to_string())?;
        for row in cache.rows() {
            worst = worst.max((row.iter().sum::<f64>() - 1.0).abs());
        }
    }
    check(worst <= 1e-9, format!("attention row sum off by {worst:e}"))?;

    let mut perm_worst: f64 = 0.0;
    for seed in 0..10 {
        let cfg = EncoderConfig {
            embed_dim: 16,
            num_heads: 4,
            num_layers: 2,
            mlp_ratio: 4,
            segment_size: 3,
            channels: 3,
        };
        let mut rng = SplitMix64::new(seed);
        let mut enc = Encoder::new("e", cfg, &mut rng).map_err(|e| e.to_string())?;
        enc.pos.value.data_mut().fill(0.0);
        let rows: Vec<Vec<f64>> = (0..NUM_SEGMENTS)
            .map(|_| (0..cfg.patch_len()).map(|_| rng.normal()).collect())
            .collect();
        let mut perm: Vec<usize> = (0..NUM_SEGMENTS).collect();
        rng.shuffle(&mut perm);
        let permuted: Vec<Vec<f64>> = perm.iter().map(|&i| rows[i].clone()).collect();
        let (a, _) = enc.forward(&Tensor::from_rows(&rows).unwrap()).map_err(|e| e.to_string())?;
        let (b, _) = enc.forward(&Tensor::from_rows(&permuted).unwrap()).map_err(|e| e.to_string())?;
        perm_worst = perm_worst.max(a.max_abs_diff(&b));
    }
    check(perm_worst <= 1e-9, format!("permutation changed class token by {perm_worst:e}"))?;
    Ok(format!(
        "100 configs, max row-sum error {worst:.1e}; permutation diff {perm_worst:.1e}"
    ))
}

/// Model used for the synthetic transfer run: desk widths (D=64, N=256)
/// with 8-pixel segment crops and 4 frames per clip to fit the time budget.
fn transfer_model() -> ModelConfig {
    ModelConfig {
        encoder: EncoderConfig {
            segment_size: 8,
            ..EncoderConfig::desk(3)
        },
        hidden: 256,
        fc_count: 2,
        modality: Modality::Both,
        objective: Objective::default(),
        max_frames: 4,
    }
}

const TRANSFER_LR: f64 = 3e-4;

fn synthetic_transfer(root: &Path) -> Outcome {
    let start = Instant::now();
    let spec = SyntheticSpec {
        classes: 10,
        attribute_dim: 8,
        samples_per_class: 30,
        noise: 0.05,
        ..SyntheticSpec::default()
    };
    let ds = generate_synthetic(&spec, &root.join("transfer")).map_err(|e| e.to_string())?;
    let mut cfg = ExperimentConfig::new(ds.manifest_path, ds.embeddings_path);
    cfg.protocol = Protocol::P2;
    cfg.runs = 10;
    cfg.epochs = 30;
    cfg.lr = TRANSFER_LR;
    cfg.model = transfer_model();
    let report = run_protocol(&cfg, &mut |_| {}).map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    let seen = report.mean_seen_accuracy.unwrap_or(0.0);
    let summary = format!(
        "unseen {:.3} ± {:.3} (chance 0.333), seen {:.3}, {secs:.0}s, runs {:?}",
        report.mean_accuracy,
        report.std_accuracy,
        seen,
        report.run_accuracies.iter().map(|a| (a * 1000.0).round() / 1000.0).collect::<Vec<_>>()
    );
    check(report.runs.iter().all(|r| r.unseen.len() == 3), "P2 on 10 classes must leave 3 unseen")?;
    check(report.mean_accuracy >= 0.60, format!("unseen accuracy too low: {summary}"))?;
    check(seen >= 0.95, format!("seen accuracy too low: {summary}"))?;
    check(secs <= 600.0, format!("too slow: {summary}"))?;
    Ok(summary)
}

const SMALL_MODEL: &[&str] = &[
    "--embed-dim", "8", "--heads", "2", "--layers", "1", "--mlp-ratio", "2", "--segment-size", "4",
    "--max-frames", "2", "--epochs", "2", "--batch", "4", "--quiet",
];

fn small_dataset(dir: &Path) -> Result<(String, String), String> {
    let spec = SyntheticSpec {
        classes: 5,
        attribute_dim: 4,
        samples_per_class: 3,
        min_frames: 2,
        max_frames: 3,
        frame_size: 24,
        ..SyntheticSpec::default()
    };
    let ds = generate_synthetic(&spec, dir).map_err(|e| e.to_string())?;
    Ok((ds.manifest_path.display().to_string(), ds.embeddings_path.display().to_string()))
}

fn cli_protocol(data: &(String, String), out: &Path, extra: &[&str]) -> Result<(Vec<u8>, Vec<u8>), String> {
    let o = Command::new(env!("CARGO_BIN_EXE_zsr"))
        .args(["protocol", "--manifest", &data.0, "--embeddings", &data.1, "--runs", "2", "--seed", "7"])
        .args(SMALL_MODEL)
        .args(extra)
        .arg("--out")
        .arg(out)
        .output()
        .map_err(|e| e.to_string())?;
    check(o.status.success(), String::from_utf8_lossy(&o.stderr).into_owned())?;
    let read = |f: &str| fs::read(out.join(f)).map_err(|e| e.to_string());
    Ok((read("metrics.json")?, read("confusion.csv")?))
}

fn reproducibility(root: &Path) -> Outcome {
    let data = small_dataset(&root.join("repro"))?;
    let a = cli_protocol(&data, &root.join("repro_a"), &["--hidden", "256"])?;
    let b = cli_protocol(&data, &root.join("repro_b"), &["--hidden", "256"])?;
    check(a.0 == b.0, "metrics JSON differs")?;
    check(a.1 == b.1, "confusion CSV differs")?;
    Ok(format!("{} + {} bytes identical across invocations", a.0.len(), a.1.len()))
}

fn serialization(root: &Path) -> Outcome {
    let dir = root.join("serial");
    let spec = SyntheticSpec {
        classes: 4,
        attribute_dim: 4,
        samples_per_class: 2,
        min_frames: 2,
        max_frames: 3,
        frame_size: 24,
        ..SyntheticSpec::default()
    };
    let ds = generate_synthetic(&spec, &dir).map_err(|e| e.to_string())?;
    let m = load_manifest(&ds.manifest_path).map_err(|e| e.to_string())?;
    let mut log = AccessLog::default();
    for s in &m.samples {
        for rel in [&s.rgb_path, &s.depth_path] {
            let path = m.resolve(rel);
            let bytes = fs::read(&path).map_err(|e| e.to_string())?;
            let video = read_video(&path, &mut log).map_err(|e| e.to_string())?;
            check(encode_video(&video).map_err(|e| e.to_string())? == bytes, format!("{rel} re-encodes differently"))?;
            check(decode_video(&mut bytes.as_slice()).map_err(|e| e.to_string())? == video, format!("{rel} decode"))?;
        }
        let path = m.resolve(&s.keypoints_path);
        let bytes = fs::read(&path).map_err(|e| e.to_string())?;
        let kps = read_keypoints(&path, &mut log).map_err(|e| e.to_string())?;
        check(encode_keypoints(&kps) == bytes, "keypoints re-encode differently")?;
        check(decode_keypoints(&mut bytes.as_slice()).map_err(|e| e.to_string())? == kps, "keypoint decode")?;
    }
    let text = fs::read_to_string(&ds.embeddings_path).map_err(|e| e.to_string())?;
    let table = ClassEmbeddingTable::parse(&text).map_err(|e| e.to_string())?;
    check(table == ds.table, "embedding table does not round-trip")?;
    check(table.to_text() == text, "embedding table text differs")?;

    let cfg = ModelConfig {
        encoder: EncoderConfig {
            embed_dim: 8,
            num_heads: 2,
            num_layers: 1,
            mlp_ratio: 2,
            segment_size: 4,
            channels: 3,
        },
        hidden: 8,
        max_frames: 2,
        ..ModelConfig::desk()
    };
    let clips = prepare_all(&m, &cfg, &mut log).map_err(|e| e.to_string())?;
    let samples: Vec<Sample> = clips.iter().zip(&m.samples).map(|(c, s)| (c, s.class_name.as_str())).collect();
    let mut model = Model::new(cfg, 11).map_err(|e| e.to_string())?;
    train_epoch(&mut model, &samples, &ds.table, &Adam::default(), 4, 0).map_err(|e| e.to_string())?;
    let ckpt = dir.join("model.zsrm");
    checkpoint::save(&model, &ckpt).map_err(|e| e.to_string())?;
    let mut restored = Model::new(cfg, 12).map_err(|e| e.to_string())?;
    checkpoint::load(&mut restored, &ckpt).map_err(|e| e.to_string())?;
    let refs: Vec<&ClipInput> = clips.iter().collect();
    let a = model.predict(&refs, 3).map_err(|e| e.to_string())?;
    let b = restored.predict(&refs, 3).map_err(|e| e.to_string())?;
    let same_bits = a.iter().flatten().zip(b.iter().flatten()).all(|(x, y)| x.to_bits() == y.to_bits());
    check(same_bits && a.len() == b.len(), "restored model predicts differently")?;
    let classes_a: Vec<usize> = a.iter().map(|z| classify(z, &ds.table).unwrap()).collect();
    let classes_b: Vec<usize> = b.iter().map(|z| classify(z, &ds.table).unwrap()).collect();
    check(classes_a == classes_b, "restored model classifies differently")?;
    Ok(format!(
        "{} samples of ZSRV/ZSRK, {}-class table and checkpoint round-trip bit-exactly",
        m.samples.len(),
        table.len()
    ))
}

fn ablations(root: &Path) -> Outcome {
    let data = small_dataset(&root.join("ablation"))?;
    let mut variants: Vec<(String, Vec<&str>)> = Vec::new();
    // each sweep holds the other two axes at values no other sweep uses together
    for modality in ["rgb", "depth", "both"] {
        variants.push((format!("modality {modality}"), vec!["--modality", modality, "--hidden", "256", "--fc", "2"]));
    }
    for hidden in ["256", "512", "1024"] {
        variants.push((format!("hidden {hidden}"), vec!["--hidden", hidden, "--modality", "both", "--fc", "1"]));
    }
    for fc in ["1", "2"] {
        variants.push((format!("fc {fc}"), vec!["--fc", fc, "--hidden", "512", "--modality", "rgb"]));
    }
    let mut seen_reports: Vec<Vec<u8>> = Vec::new();
    for (i, (label, flags)) in variants.iter().enumerate() {
        let (json, csv) = cli_protocol(&data, &root.join(format!("ablation_{i}")), flags)?;
        let report: RunReport = serde_json::from_slice(&json).map_err(|e| format!("{label}: {e}"))?;
        let k = report.classes.len();
        check(report.runs.len() == 2 && report.confusion.len() == k, format!("{label}: malformed report"))?;
        check(csv.iter().filter(|&&c| c == b'\n').count() == k + 1, format!("{label}: malformed CSV"))?;
        let expected = |flag: &str| flags.iter().position(|f| *f == flag).map(|p| flags[p + 1]);
        if let Some(m) = expected("--modality") {
            check(report.modality == m, format!("{label}: modality {}", report.modality))?;
        }
        if let Some(h) = expected("--hidden") {
            check(report.hidden.to_string() == h, format!("{label}: hidden {}", report.hidden))?;
        }
        if let Some(f) = expected("--fc") {
            check(report.fc.to_string() == f, format!("{label}: fc {}", report.fc))?;
        }
        check(!seen_reports.contains(&json), format!("{label}: report duplicates another variant"))?;
        seen_reports.push(json);
    }
    Ok(format!("{} variants over modality/hidden/fc, all distinct", variants.len()))
}

fn main() {
    let root = tempfile::tempdir().expect("temp dir");
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome>)> = vec![
        ("gradient suite", Box::new(gradient_suite)),
        ("classifier oracle", Box::new(classifier_oracle)),
        ("cosine values", Box::new(cosine_values)),
        ("protocol splits", Box::new(protocol_splits)),
        ("encoder invariants", Box::new(encoder_invariants)),
        ("synthetic zero-shot transfer", Box::new(|| synthetic_transfer(root.path()))),
        ("reproducibility", Box::new(|| reproducibility(root.path()))),
        ("serialization", Box::new(|| serialization(root.path()))),
        ("ablation sweeps", Box::new(|| ablations(root.path()))),
    ];
    let mut failures = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        match run() {
            Ok(detail) => println!("PASS {} {name}: {detail}", i + 1),
            Err(detail) => {
                failures += 1;
                println!("FAIL {} {name}: {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failures} failed", criteria.len() - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}
