use proptest::prelude::*;

use zsr::data::{seen_count, split_classes, Protocol};
use zsr::encoder::{Encoder, EncoderConfig, MultiHeadAttention};
use zsr::geometry::{segment_body, t_pose, Keypoint, KeypointFrame, NUM_KEYPOINTS, NUM_SEGMENTS};
use zsr::rng::SplitMix64;
use zsr::tensor::{layer_norm, matmul, softmax, Tensor};
use zsr::zeroshot::{classify, fuse, loss, similarity, ClassEmbeddingTable, Objective};

fn tensor(rows: usize, cols: usize) -> impl Strategy<Value = Tensor> {
    prop::collection::vec(-3.0f64..3.0, rows * cols).prop_map(move |d| Tensor::new(vec![rows, cols], d).unwrap())
}

fn table(k: usize, dim: usize) -> impl Strategy<Value = ClassEmbeddingTable> {
    prop::collection::vec(prop::collection::vec(-1.0f64..1.0, dim), k)
        .prop_filter("non-degenerate rows", |rows| rows.iter().all(|r| r.iter().any(|v| v.abs() > 1e-3)))
        .prop_map(move |rows| {
            ClassEmbeddingTable::with_dim(
                rows.into_iter().enumerate().map(|(i, r)| (format!("c{i}"), r)).collect(),
                dim,
            )
            .unwrap()
        })
}

fn jittered_pose(jitter: Vec<(f64, f64)>) -> KeypointFrame {
    let base = t_pose();
    let mut pts = [Keypoint::new(0.0, 0.0, 1.0); NUM_KEYPOINTS];
    for ((p, b), (dx, dy)) in pts.iter_mut().zip(base.points()).zip(jitter) {
        *p = Keypoint::new(b.x + dx, b.y + dy, b.confidence);
    }
    KeypointFrame::new(pts)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn softmax_rows_sum_to_one_and_ignore_shifts(x in tensor(3, 7), c in -50.0f64..50.0) {
        let y = softmax(&x, 1).unwrap();
        for r in 0..3 {
            prop_assert!((y.row(r).iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(y.row(r).iter().all(|&p| p > 0.0));
        }
        let shifted = softmax(&x.map(|v| v + c), 1).unwrap();
        prop_assert!(shifted.max_abs_diff(&y) < 1e-12);
    }

    #[test]
    fn matmul_is_associative(a in tensor(3, 4), b in tensor(4, 5), c in tensor(5, 2)) {
        let left = matmul(&matmul(&a, &b).unwrap(), &c).unwrap();
        let right = matmul(&a, &matmul(&b, &c).unwrap()).unwrap();
        prop_assert!(left.max_abs_diff(&right) < 1e-10);
    }

    #[test]
    fn layer_norm_centres_and_shifts(x in tensor(4, 6), shift in -2.0f64..2.0) {
        let gamma = Tensor::full(&[6], 1.0);
        let (y, _) = layer_norm(&x, &gamma, &Tensor::zeros(&[6]), 1e-12).unwrap();
        let (ys, _) = layer_norm(&x, &gamma, &Tensor::full(&[6], shift), 1e-12).unwrap();
        for r in 0..4 {
            prop_assert!(y.row(r).iter().sum::<f64>().abs() < 1e-9);
        }
        prop_assert!(ys.max_abs_diff(&y.map(|v| v + shift)) < 1e-12);
    }

    #[test]
    fn segmentation_commutes_with_mirroring(jitter in prop::collection::vec((-0.02f64..0.02, -0.02f64..0.02), NUM_KEYPOINTS)) {
        let kf = jittered_pose(jitter);
        let rects = segment_body(&kf).unwrap();
        let mirrored = segment_body(&kf.mirrored()).unwrap();
        for r in &rects {
            let want = r.mirrored();
            let got = mirrored.iter().find(|m| m.id == want.id).unwrap();
            prop_assert!((got.x0 - want.x0).abs() < 1e-9 && (got.x1 - want.x1).abs() < 1e-9);
            prop_assert!((got.y0 - want.y0).abs() < 1e-9 && (got.y1 - want.y1).abs() < 1e-9);
        }
    }

    #[test]
    fn segmentation_commutes_with_small_translations(
        jitter in prop::collection::vec((-0.01f64..0.01, -0.01f64..0.01), NUM_KEYPOINTS),
        dx in -0.03f64..0.03,
        dy in -0.03f64..0.03,
    ) {
        let kf = jittered_pose(jitter);
        let rects = segment_body(&kf).unwrap();
        let inside = |v: f64, d: f64| v + d > 1e-9 && v + d < 1.0 - 1e-9 && v > 1e-9 && v < 1.0 - 1e-9;
        prop_assume!(rects.iter().all(|r| inside(r.x0, dx) && inside(r.x1, dx) && inside(r.y0, dy) && inside(r.y1, dy)));
        let moved = segment_body(&kf.translated(dx, dy)).unwrap();
        for (a, b) in rects.iter().zip(&moved) {
            prop_assert_eq!(a.id, b.id);
            prop_assert!((a.x0 + dx - b.x0).abs() < 1e-9 && (a.x1 + dx - b.x1).abs() < 1e-9);
            prop_assert!((a.y0 + dy - b.y0).abs() < 1e-9 && (a.y1 + dy - b.y1).abs() < 1e-9);
        }
    }

    #[test]
    fn classify_ignores_positive_scale(t in table(6, 5), z in prop::collection::vec(-1.0f64..1.0, 5), alpha in 1e-3f64..1e3) {
        prop_assume!(z.iter().any(|v| v.abs() > 1e-3));
        let scaled: Vec<f64> = z.iter().map(|v| v * alpha).collect();
        prop_assert_eq!(classify(&z, &t).unwrap(), classify(&scaled, &t).unwrap());
    }

    #[test]
    fn cosine_is_bounded_and_symmetric(a in prop::collection::vec(-1.0f64..1.0, 6), b in prop::collection::vec(-1.0f64..1.0, 6)) {
        prop_assume!(a.iter().any(|v| v.abs() > 1e-3) && b.iter().any(|v| v.abs() > 1e-3));
        let ab = similarity(&a, &b).unwrap();
        prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&ab));
        prop_assert!((ab - similarity(&b, &a).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn softmax_loss_is_positive_with_a_consistent_gradient(t in table(4, 5), z in prop::collection::vec(-1.0f64..1.0, 5), c in 0usize..4) {
        prop_assume!(z.iter().any(|v| v.abs() > 1e-2));
        let out = loss(&z, c, &t, Objective::default()).unwrap();
        prop_assert!(out.loss > 0.0);
        // moving against the gradient lowers the loss
        let step: Vec<f64> = z.iter().zip(&out.grad).map(|(v, g)| v - 1e-4 * g).collect();
        prop_assert!(loss(&step, c, &t, Objective::default()).unwrap().loss <= out.loss + 1e-15);
    }

    #[test]
    fn fuse_concatenates(ab in (1usize..10).prop_flat_map(|n| {
        (prop::collection::vec(-1.0f64..1.0, n), prop::collection::vec(-1.0f64..1.0, n))
    })) {
        let (a, b) = ab;
        let f = fuse(&Tensor::vector(a.clone()), &Tensor::vector(b.clone())).unwrap();
        prop_assert_eq!(f.len(), 2 * a.len());
        prop_assert_eq!(&f.data()[..a.len()], &a[..]);
        prop_assert_eq!(&f.data()[a.len()..], &b[..]);
        let mut longer = b;
        longer.push(0.5);
        prop_assert!(fuse(&Tensor::vector(a), &Tensor::vector(longer)).is_err());
    }

    #[test]
    fn attention_rows_are_distributions(seed in any::<u64>(), heads in 1usize..4, head_dim in 1usize..5, n in 1usize..8, groups in 1usize..3) {
        let d = heads * head_dim;
        let mut rng = SplitMix64::new(seed);
        let attn = MultiHeadAttention::new("a", d, heads, &mut rng);
        let x = Tensor::new(vec![n * groups, d], (0..n * groups * d).map(|_| 2.0 * rng.normal()).collect()).unwrap();
        let (_, cache) = attn.forward(&x, n).unwrap();
        let mut count = 0;
        for row in cache.rows() {
            prop_assert_eq!(row.len(), n);
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            count += 1;
        }
        prop_assert_eq!(count, groups * heads * n);
    }

    #[test]
    fn class_token_ignores_segment_order_without_positions(seed in any::<u64>(), perm_seed in any::<u64>()) {
        let cfg = EncoderConfig { embed_dim: 8, num_heads: 2, num_layers: 2, mlp_ratio: 2, segment_size: 2, channels: 1 };
        let mut rng = SplitMix64::new(seed);
        let mut enc = Encoder::new("e", cfg, &mut rng).unwrap();
        enc.pos.value.data_mut().fill(0.0);
        let x: Vec<Vec<f64>> = (0..NUM_SEGMENTS).map(|_| (0..cfg.patch_len()).map(|_| rng.normal()).collect()).collect();
        let mut perm: Vec<usize> = (0..NUM_SEGMENTS).collect();
        SplitMix64::new(perm_seed).shuffle(&mut perm);
        let px: Vec<Vec<f64>> = perm.iter().map(|&i| x[i].clone()).collect();
        let (a, _) = enc.forward(&Tensor::from_rows(&x).unwrap()).unwrap();
        let (b, _) = enc.forward(&Tensor::from_rows(&px).unwrap()).unwrap();
        prop_assert!(a.max_abs_diff(&b) < 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn splits_partition_the_classes(k in 2usize..=200, seed in any::<u64>(), p1 in any::<bool>()) {
        let protocol = if p1 { Protocol::P1 } else { Protocol::P2 };
        let s = split_classes(k, protocol, seed).unwrap();
        prop_assert_eq!(s.seen.len(), seen_count(k, protocol));
        prop_assert!(!s.seen.is_empty() && !s.unseen.is_empty());
        let mut all: Vec<usize> = s.seen.iter().chain(&s.unseen).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..k).collect::<Vec<_>>());
        prop_assert_eq!(s, split_classes(k, protocol, seed).unwrap());
    }
}
