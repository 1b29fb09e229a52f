use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::io::{Dataset, DatasetManifest, SimRecord, Split};
use super::{chunk_count, Chunk, DatasetError, LabelMode, Palette, CHUNK_LEN, CHUNK_STRIDE};
use crate::sim::{init_forest, step, CellState, SimParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetConfig {
    /// Shared simulation parameters; `rng_seed` is the base seed.
    pub sim: SimParams,
    pub train_sims: usize,
    pub test_sims: usize,
    pub chunk_len: usize,
    pub stride: usize,
    /// Keep only the first `n` chunks of each simulation.
    pub max_chunks_per_sim: Option<usize>,
    pub palette: Palette,
    pub label_mode: LabelMode,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            sim: SimParams::default(),
            train_sims: 70,
            test_sims: 30,
            chunk_len: CHUNK_LEN,
            stride: CHUNK_STRIDE,
            max_chunks_per_sim: None,
            palette: Palette::default(),
            label_mode: LabelMode::default(),
        }
    }
}

impl DatasetConfig {
    pub fn validate(&self) -> Result<(), DatasetError> {
        self.sim.validate()?;
        self.palette.validate()?;
        let positive = |field, v: usize| {
            if v == 0 {
                Err(DatasetError::InvalidParam {
                    field,
                    reason: "must be positive".into(),
                })
            } else {
                Ok(())
            }
        };
        positive("chunk_len", self.chunk_len)?;
        positive("stride", self.stride)?;
        if self.max_chunks_per_sim == Some(0) {
            return Err(DatasetError::InvalidParam {
                field: "max_chunks_per_sim",
                reason: "must be positive when set".into(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedDatasets {
    pub train: Dataset,
    pub test: Dataset,
}

/// Seed of simulation `sim_id` under base seed `base` (SplitMix64 mixing).
pub fn sim_seed(base: u64, sim_id: u64) -> u64 {
    let mut z = base.wrapping_add(sim_id.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

struct SimOutput {
    record: SimRecord,
    chunks: Vec<Chunk>,
}

fn simulate_one(cfg: &DatasetConfig, sim_id: u64) -> Result<SimOutput, DatasetError> {
    let params = SimParams {
        rng_seed: sim_seed(cfg.sim.rng_seed, sim_id),
        ..cfg.sim.clone()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(params.rng_seed);
    let mut state = init_forest(&params, &mut rng)?;
    let occupied = state
        .states
        .iter()
        .filter(|&&s| s != CellState::Empty)
        .count();
    let mut frames: Vec<Vec<u8>> = Vec::new();
    loop {
        frames.push(state.states.iter().map(|s| s.code()).collect());
        if state.step_index >= params.max_steps || !state.has_burning() {
            break;
        }
        state = step(&state, &params);
    }
    let burned = frames
        .last()
        .expect("at least the initial frame")
        .iter()
        .filter(|&&c| c != CellState::Empty.code() && c != CellState::Tree.code())
        .count();

    let mut n = chunk_count(frames.len(), cfg.chunk_len, cfg.stride);
    if let Some(cap) = cfg.max_chunks_per_sim {
        n = n.min(cap);
    }
    let chunks = (0..n)
        .map(|k| {
            let start = k * cfg.stride;
            let codes = frames[start..start + cfg.chunk_len].concat();
            Chunk::from_codes(sim_id, start, params.width, params.height, codes)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SimOutput {
        record: SimRecord {
            sim_id,
            rng_seed: params.rng_seed,
            length: frames.len(),
            burned_fraction: if occupied == 0 {
                0.0
            } else {
                burned as f64 / occupied as f64
            },
        },
        chunks,
    })
}

fn simulate_all(
    cfg: &DatasetConfig,
    ids: &[u64],
    threads: usize,
) -> Result<Vec<SimOutput>, DatasetError> {
    let threads = threads.max(1).min(ids.len().max(1));
    if threads == 1 {
        return ids.iter().map(|&id| simulate_one(cfg, id)).collect();
    }
    let per = ids.len().div_ceil(threads);
    let parts: Vec<Result<Vec<SimOutput>, DatasetError>> = std::thread::scope(|s| {
        let handles: Vec<_> = ids
            .chunks(per)
            .map(|part| s.spawn(move || part.iter().map(|&id| simulate_one(cfg, id)).collect()))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("simulation worker panicked"))
            .collect()
    });
    let mut out = Vec::with_capacity(ids.len());
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}

fn assemble(
    cfg: &DatasetConfig,
    split: Split,
    outputs: Vec<SimOutput>,
) -> Result<Dataset, DatasetError> {
    let mut manifest = DatasetManifest::new(split, cfg.sim.clone(), cfg.chunk_len, cfg.stride);
    manifest.palette = cfg.palette;
    manifest.label_mode = cfg.label_mode;
    let mut chunks = Vec::new();
    for o in outputs {
        manifest.sims.push(o.record);
        chunks.extend(o.chunks);
    }
    Dataset::from_chunks(manifest, chunks)
}

/// Simulates the train and test splits. Train simulations take ids
/// `0..train_sims`, test simulations the following ids, so the splits never
/// share a simulation. Output is independent of `threads`.
pub fn generate_dataset(
    cfg: &DatasetConfig,
    threads: usize,
) -> Result<GeneratedDatasets, DatasetError> {
    cfg.validate()?;
    let n_train = cfg.train_sims as u64;
    let train_ids: Vec<u64> = (0..n_train).collect();
    let test_ids: Vec<u64> = (n_train..n_train + cfg.test_sims as u64).collect();
    let train = assemble(cfg, Split::Train, simulate_all(cfg, &train_ids, threads)?)?;
    let test = assemble(cfg, Split::Test, simulate_all(cfg, &test_ids, threads)?)?;
    Ok(GeneratedDatasets { train, test })
}
