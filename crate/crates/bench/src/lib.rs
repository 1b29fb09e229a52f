//! Fixtures shared by the benchmarks.

use firecast_core::dataset::{generate_dataset, Dataset, DatasetConfig, LabelMode};
use firecast_core::models::{Model, ModelSpec, Variant};
use firecast_core::sim::{init_forest, SimParams, SimState};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A 251x251 forest a few steps after ignition.
pub fn burning_forest() -> (SimState, SimParams) {
    let params = SimParams {
        rng_seed: 1,
        ..SimParams::default()
    };
    let mut state = init_forest(&params, &mut rng(1)).expect("default params are valid");
    for _ in 0..20 {
        state = state.step(&params);
    }
    (state, params)
}

/// One batch worth of 64x64 training chunks.
pub fn desk_chunks(n: usize) -> Dataset {
    let cfg = DatasetConfig {
        sim: SimParams {
            width: 64,
            height: 64,
            ..SimParams::default()
        },
        train_sims: n,
        test_sims: 0,
        max_chunks_per_sim: Some(1),
        label_mode: LabelMode::Latched,
        ..DatasetConfig::default()
    };
    generate_dataset(&cfg, 1)
        .expect("desk config is valid")
        .train
}

pub fn desk_model(v: Variant) -> Model<f32> {
    Model::new(ModelSpec::desk(v), &mut rng(0)).expect("desk spec is valid")
}
