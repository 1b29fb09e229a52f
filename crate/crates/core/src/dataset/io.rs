//! On-disk container: `manifest.json` plus `chunks.bin`, the concatenated
//! per-chunk state-code payloads. Every chunk carries a CRC-32.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Chunk, DatasetError, LabelMode, Palette};
use crate::sim::{CellState, SimParams};

pub const FORMAT_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const PAYLOAD_FILE: &str = "chunks.bin";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl std::fmt::Display for Split {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Test => "test",
        })
    }
}

/// One simulation feeding the dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimRecord {
    pub sim_id: u64,
    pub rng_seed: u64,
    /// Recorded states, including the initial one.
    pub length: usize,
    pub burned_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChunkRecord {
    pub sim_id: u64,
    pub start_step: usize,
    pub offset: u64,
    pub length: u64,
    pub crc32: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub format_version: u32,
    pub split: Split,
    /// Simulation parameters; `rng_seed` is the base seed of the split.
    pub params: SimParams,
    pub palette: Palette,
    pub label_mode: LabelMode,
    pub chunk_len: usize,
    pub stride: usize,
    pub sims: Vec<SimRecord>,
    pub chunks: Vec<ChunkRecord>,
}

impl DatasetManifest {
    pub fn new(split: Split, params: SimParams, chunk_len: usize, stride: usize) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            split,
            params,
            palette: Palette::default(),
            label_mode: LabelMode::default(),
            chunk_len,
            stride,
            sims: Vec::new(),
            chunks: Vec::new(),
        }
    }

    pub fn density(&self) -> f64 {
        self.params.density
    }

    pub fn width(&self) -> usize {
        self.params.width
    }

    pub fn height(&self) -> usize {
        self.params.height
    }

    /// Chunk count implied by the recorded simulation lengths.
    pub fn expected_chunk_count(&self) -> usize {
        self.sims
            .iter()
            .map(|s| super::chunk_count(s.length, self.chunk_len, self.stride))
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub manifest: DatasetManifest,
    pub chunks: Vec<Chunk>,
}

impl Dataset {
    /// Pairs chunks with a manifest, recomputing the chunk records.
    pub fn from_chunks(
        mut manifest: DatasetManifest,
        chunks: Vec<Chunk>,
    ) -> Result<Self, DatasetError> {
        let (w, h) = (manifest.width(), manifest.height());
        let mut offset = 0u64;
        manifest.chunks.clear();
        for (i, c) in chunks.iter().enumerate() {
            if c.width() != w || c.height() != h || c.len() != manifest.chunk_len {
                return Err(DatasetError::Inconsistent(format!(
                    "chunk {i} is {}x{}x{}, manifest expects {}x{w}x{h}",
                    c.len(),
                    c.width(),
                    c.height(),
                    manifest.chunk_len
                )));
            }
            let length = c.codes().len() as u64;
            manifest.chunks.push(ChunkRecord {
                sim_id: c.sim_id,
                start_step: c.start_step,
                offset,
                length,
                crc32: crc32fast::hash(c.codes()),
            });
            offset += length;
        }
        Ok(Self { manifest, chunks })
    }

    pub fn len(&self) -> usize {
        self.chunks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chunks.is_empty()
    }
}

/// Writes `dataset` into directory `dir`, creating it if needed.
pub fn write_dataset(dataset: &Dataset, dir: &Path) -> Result<(), DatasetError> {
    fs::create_dir_all(dir)?;
    let mut payload = Vec::with_capacity(dataset.chunks.iter().map(|c| c.codes().len()).sum());
    for c in &dataset.chunks {
        payload.extend_from_slice(c.codes());
    }
    fs::write(dir.join(PAYLOAD_FILE), payload)?;
    let json = serde_json::to_string_pretty(&dataset.manifest)?;
    fs::write(dir.join(MANIFEST_FILE), json)?;
    Ok(())
}

#[derive(Deserialize)]
struct VersionProbe {
    format_version: u32,
}

pub fn read_manifest(dir: &Path) -> Result<DatasetManifest, DatasetError> {
    let text = fs::read_to_string(dir.join(MANIFEST_FILE))?;
    let probe: VersionProbe = serde_json::from_str(&text)?;
    if probe.format_version != FORMAT_VERSION {
        return Err(DatasetError::Version {
            found: probe.format_version,
            expected: FORMAT_VERSION,
        });
    }
    Ok(serde_json::from_str(&text)?)
}

/// Reads and verifies a dataset written by [`write_dataset`].
pub fn read_dataset(dir: &Path) -> Result<Dataset, DatasetError> {
    let manifest = read_manifest(dir)?;
    let payload = fs::read(dir.join(PAYLOAD_FILE))?;
    let (w, h) = (manifest.width(), manifest.height());
    let expected_len = (manifest.chunk_len * w * h) as u64;
    let mut chunks = Vec::with_capacity(manifest.chunks.len());
    for (index, rec) in manifest.chunks.iter().enumerate() {
        if rec.length != expected_len {
            return Err(DatasetError::Inconsistent(format!(
                "chunk {index} records {} bytes, expected {expected_len}",
                rec.length
            )));
        }
        let end = rec.offset.checked_add(rec.length).unwrap_or(u64::MAX);
        if end > payload.len() as u64 {
            return Err(DatasetError::Truncated {
                index,
                needed: end,
                available: payload.len() as u64,
            });
        }
        let bytes = &payload[rec.offset as usize..end as usize];
        let computed = crc32fast::hash(bytes);
        if computed != rec.crc32 {
            return Err(DatasetError::Checksum {
                index,
                sim_id: rec.sim_id,
                start_step: rec.start_step,
                stored: rec.crc32,
                computed,
            });
        }
        if let Some(&code) = bytes.iter().find(|&&c| CellState::from_code(c).is_none()) {
            return Err(DatasetError::InvalidCode { index, code });
        }
        chunks.push(Chunk::from_codes(
            rec.sim_id,
            rec.start_step,
            w,
            h,
            bytes.to_vec(),
        )?);
    }
    Ok(Dataset { manifest, chunks })
}
