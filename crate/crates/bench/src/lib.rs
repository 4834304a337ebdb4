//! Shared fixtures for the benchmarks.

use omnirank_core::nn::model::{random_input, ModelInput};
use omnirank_core::nn::InputDims;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Input sizes close to what the default feature pipeline produces.
pub fn pipeline_dims() -> InputDims {
    InputDims {
        static_num: 12,
        cat_fields: 3,
        cat_vocab: 40,
        window: 12,
        index_channels: 6,
        news_channels: 9,
        comment_channels: 4,
    }
}

/// Positive and negative scores with roughly a quarter of values tied.
pub fn score_sets(n: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |shift: f64| -> Vec<f64> {
        (0..n)
            .map(|_| {
                let v: f64 = rng.random::<f64>() + shift;
                if rng.random_bool(0.25) { (v * 20.0).round() / 20.0 } else { v }
            })
            .collect()
    };
    let pos = draw(0.2);
    let neg = draw(0.0);
    (pos, neg)
}

pub fn model_inputs(dims: &InputDims, n: usize, seed: u64) -> Vec<ModelInput> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|i| random_input(dims, i % 3, &mut rng)).collect()
}
