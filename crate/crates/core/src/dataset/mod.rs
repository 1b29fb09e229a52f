//! Chunked, labelled datasets cut from simulation trajectories.
//!
//! A chunk is a fixed-length window of consecutive recorded grids. Chunks
//! are stored as one state code per cell and rendered to RGB on demand.

mod generate;
mod io;
mod render;

pub use generate::{generate_dataset, sim_seed, DatasetConfig, GeneratedDatasets};
pub use io::{
    read_dataset, read_manifest, write_dataset, ChunkRecord, Dataset, DatasetManifest, SimRecord,
    Split, FORMAT_VERSION,
};
pub use render::{decode_rgb, render_codes_into, render_rgb, Frame, Palette};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::nn::{Scalar, Tensor};
use crate::sim::{CellState, Grid, SimError, SimState};

pub const CHUNK_LEN: usize = 60;
pub const CHUNK_STRIDE: usize = 10;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("invalid {field}: {reason}")]
    InvalidParam { field: &'static str, reason: String },
    #[error("invalid palette: {0}")]
    InvalidPalette(String),
    #[error("pixel ({x}, {y}) has colour {rgb:?} not in the palette")]
    UnknownColor { x: usize, y: usize, rgb: [u8; 3] },
    #[error("AOI ({x}, {y}) outside a {width}x{height} grid")]
    AoiOutOfBounds {
        x: usize,
        y: usize,
        width: usize,
        height: usize,
    },
    #[error("dataset format version {found}, expected {expected}")]
    Version { found: u32, expected: u32 },
    #[error("checksum mismatch in chunk {index} (sim {sim_id}, start {start_step}): stored {stored:08x}, computed {computed:08x}")]
    Checksum {
        index: usize,
        sim_id: u64,
        start_step: usize,
        stored: u32,
        computed: u32,
    },
    #[error("payload truncated: chunk {index} needs bytes up to {needed}, file has {available}")]
    Truncated {
        index: usize,
        needed: u64,
        available: u64,
    },
    #[error("chunk {index} holds invalid state code {code}")]
    InvalidCode { index: usize, code: u8 },
    #[error("inconsistent dataset: {0}")]
    Inconsistent(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("manifest: {0}")]
    Manifest(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// `len` consecutive grids of one simulation, stored as state codes in
/// `[t][y][x]` order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Chunk {
    pub sim_id: u64,
    pub start_step: usize,
    width: usize,
    height: usize,
    len: usize,
    codes: Vec<u8>,
}

impl Chunk {
    pub fn from_codes(
        sim_id: u64,
        start_step: usize,
        width: usize,
        height: usize,
        codes: Vec<u8>,
    ) -> Result<Self, DatasetError> {
        let plane = width * height;
        if plane == 0 || codes.len() % plane != 0 || codes.is_empty() {
            return Err(DatasetError::Inconsistent(format!(
                "{} codes do not form {width}x{height} frames",
                codes.len()
            )));
        }
        Ok(Self {
            sim_id,
            start_step,
            width,
            height,
            len: codes.len() / plane,
            codes,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Number of timesteps.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn codes(&self) -> &[u8] {
        &self.codes
    }

    pub fn frame_codes(&self, t: usize) -> &[u8] {
        let plane = self.width * self.height;
        &self.codes[t * plane..(t + 1) * plane]
    }

    pub fn state(&self, t: usize, x: usize, y: usize) -> CellState {
        CellState::from_code(self.frame_codes(t)[y * self.width + x])
            .expect("chunk holds valid codes")
    }

    pub fn grid(&self, t: usize) -> Grid<CellState> {
        Grid::from_vec(
            self.width,
            self.height,
            self.frame_codes(t)
                .iter()
                .map(|&c| CellState::from_code(c).expect("chunk holds valid codes"))
                .collect(),
        )
    }

    /// Frames `range` as a `[T, 3, H, W]` tensor scaled to `[0, 1]`.
    pub fn frames<T: Scalar>(&self, range: std::ops::Range<usize>, palette: &Palette) -> Tensor<T> {
        let plane = self.width * self.height;
        let table = palette.unit_table::<T>();
        let mut out = Tensor::zeros(&[range.len(), 3, self.height, self.width]);
        for (i, t) in range.enumerate() {
            render_codes_into(
                self.frame_codes(t),
                &table,
                &mut out.data_mut()[i * 3 * plane..(i + 1) * 3 * plane],
            );
        }
        out
    }

    /// Burning masks of timesteps `range`, `[t][y][x]`.
    pub fn burning_masks(&self, range: std::ops::Range<usize>) -> Vec<u8> {
        let plane = self.width * self.height;
        self.codes[range.start * plane..range.end * plane]
            .iter()
            .map(|&c| is_burning_code(c) as u8)
            .collect()
    }

    /// Per-cell labels of timesteps `range`, `[t][y][x]`. Latched labels
    /// count ignitions from the first timestep of the chunk.
    pub fn label_maps(&self, range: std::ops::Range<usize>, mode: LabelMode) -> Vec<u8> {
        match mode {
            LabelMode::Instantaneous => self.burning_masks(range),
            LabelMode::Latched => {
                let plane = self.width * self.height;
                let mut lit = vec![0u8; plane];
                let mut out = Vec::with_capacity(range.len() * plane);
                for t in 0..range.end {
                    for (l, &c) in lit.iter_mut().zip(self.frame_codes(t)) {
                        *l |= is_burning_code(c) as u8;
                    }
                    if t >= range.start {
                        out.extend_from_slice(&lit);
                    }
                }
                out
            }
        }
    }
}

fn is_burning_code(code: u8) -> bool {
    code == CellState::Fire.code() || code == CellState::Ember.code()
}

/// Cuts windows of `chunk_len` states starting at `0, stride, 2·stride, …`
/// while they fit. A short trajectory yields no chunks.
pub fn chunk_trajectory(
    trajectory: &[SimState],
    sim_id: u64,
    chunk_len: usize,
    stride: usize,
) -> Result<Vec<Chunk>, DatasetError> {
    if chunk_len == 0 {
        return Err(DatasetError::InvalidParam {
            field: "chunk_len",
            reason: "must be positive".into(),
        });
    }
    if stride == 0 {
        return Err(DatasetError::InvalidParam {
            field: "stride",
            reason: "must be positive".into(),
        });
    }
    let Some(first) = trajectory.first() else {
        return Ok(Vec::new());
    };
    let (w, h) = (first.width(), first.height());
    let mut chunks = Vec::new();
    let mut start = 0;
    while start + chunk_len <= trajectory.len() {
        let mut codes = Vec::with_capacity(chunk_len * w * h);
        for s in &trajectory[start..start + chunk_len] {
            codes.extend(s.states.iter().map(|c| c.code()));
        }
        chunks.push(Chunk {
            sim_id,
            start_step: trajectory[start].step_index,
            width: w,
            height: h,
            len: chunk_len,
            codes,
        });
        start += stride;
    }
    Ok(chunks)
}

/// Number of chunks [`chunk_trajectory`] cuts from `len` states.
pub fn chunk_count(len: usize, chunk_len: usize, stride: usize) -> usize {
    if len < chunk_len || stride == 0 {
        0
    } else {
        (len - chunk_len) / stride + 1
    }
}

/// Grid cell of the agent of interest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AoiSpec {
    pub x: usize,
    pub y: usize,
}

impl AoiSpec {
    pub fn new(x: usize, y: usize) -> Self {
        Self { x, y }
    }

    /// Centre cell of a `width × height` grid.
    pub fn center(width: usize, height: usize) -> Self {
        Self {
            x: width / 2,
            y: height / 2,
        }
    }

    pub fn check(&self, width: usize, height: usize) -> Result<(), DatasetError> {
        if self.x < width && self.y < height {
            Ok(())
        } else {
            Err(DatasetError::AoiOutOfBounds {
                x: self.x,
                y: self.y,
                width,
                height,
            })
        }
    }
}

impl std::fmt::Display for AoiSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{},{}", self.x, self.y)
    }
}

impl std::str::FromStr for AoiSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (x, y) = s
            .split_once(',')
            .ok_or_else(|| format!("expected `x,y`, got `{s}`"))?;
        let parse = |v: &str| {
            v.trim()
                .parse::<usize>()
                .map_err(|e| format!("bad coordinate `{v}`: {e}"))
        };
        Ok(Self::new(parse(x)?, parse(y)?))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelMode {
    /// 1 while the cell is Fire or Ember.
    #[default]
    Instantaneous,
    /// 1 from the first burning step onwards.
    Latched,
}

/// Per-timestep burning labels of the AOI cell.
pub fn extract_aoi_labels(
    chunk: &Chunk,
    aoi: AoiSpec,
    mode: LabelMode,
) -> Result<Vec<u8>, DatasetError> {
    aoi.check(chunk.width, chunk.height)?;
    let idx = aoi.y * chunk.width + aoi.x;
    let plane = chunk.width * chunk.height;
    let mut lit = false;
    Ok((0..chunk.len)
        .map(|t| {
            let burning = is_burning_code(chunk.codes[t * plane + idx]);
            match mode {
                LabelMode::Instantaneous => burning as u8,
                LabelMode::Latched => {
                    lit |= burning;
                    lit as u8
                }
            }
        })
        .collect())
}

/// Centre cells of the 3×3 equal partition of the grid, row by row.
/// Coordinate `k` along an axis of length `n` is `floor((2k + 1) · n / 6)`.
pub fn aoi_grid_coords(width: usize, height: usize) -> Result<Vec<AoiSpec>, DatasetError> {
    if width < 3 || height < 3 {
        return Err(DatasetError::InvalidParam {
            field: "grid",
            reason: format!("{width}x{height} is smaller than 3x3"),
        });
    }
    let centers = |n: usize| [0, 1, 2].map(|k| (2 * k + 1) * n / 6);
    let (xs, ys) = (centers(width), centers(height));
    Ok(ys
        .iter()
        .flat_map(|&y| xs.iter().map(move |&x| AoiSpec::new(x, y)))
        .collect())
}

#[cfg(test)]
mod tests;
