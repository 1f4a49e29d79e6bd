#![allow(dead_code)]

use std::path::Path;

use zsr::data::{generate_synthetic, SyntheticDataset, SyntheticSpec};
use zsr::encoder::EncoderConfig;
use zsr::model::{Modality, ModelConfig};
use zsr::zeroshot::Objective;

/// A dataset small enough to train on in a unit-test budget.
pub fn tiny_spec(seed: u64) -> SyntheticSpec {
    SyntheticSpec {
        classes: 4,
        attribute_dim: 4,
        samples_per_class: 2,
        min_frames: 2,
        max_frames: 3,
        noise: 0.05,
        seed,
        frame_size: 24,
    }
}

pub fn tiny_dataset(dir: &Path, seed: u64) -> SyntheticDataset {
    generate_synthetic(&tiny_spec(seed), dir).expect("generate")
}

pub fn tiny_model(modality: Modality) -> ModelConfig {
    ModelConfig {
        encoder: EncoderConfig {
            embed_dim: 8,
            num_heads: 2,
            num_layers: 1,
            mlp_ratio: 2,
            segment_size: 4,
            channels: 3,
        },
        hidden: 8,
        fc_count: 2,
        modality,
        objective: Objective::default(),
        max_frames: 2,
    }
}
