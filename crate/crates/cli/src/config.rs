//! Run configuration: a TOML file with one section per concern, overridden
//! by command-line flags. Every run writes the resolved configuration to
//! `config.toml` in its output directory.

use std::path::{Path, PathBuf};

use firecast_core::dataset::{DatasetConfig, LabelMode, Palette, CHUNK_LEN, CHUNK_STRIDE};
use firecast_core::models::{ModelSpec, Variant};
use firecast_core::sim::SimParams;
use firecast_core::train::TrainConfig;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const SNAPSHOT: &str = "config.toml";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Worker threads; 1 forces the deterministic single-threaded path.
    pub threads: usize,
    pub sim: SimParams,
    pub simulate: SimulateSection,
    pub dataset: DatasetSection,
    pub model: ModelSection,
    pub train: TrainConfig,
    pub eval: EvalSection,
    pub paths: PathsSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            threads: 1,
            sim: SimParams::default(),
            simulate: SimulateSection::default(),
            dataset: DatasetSection::default(),
            model: ModelSection::default(),
            train: TrainConfig::default(),
            eval: EvalSection::default(),
            paths: PathsSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateSection {
    pub sims: usize,
    /// Write every frame of every run as a PPM image.
    pub export_frames: bool,
}

impl Default for SimulateSection {
    fn default() -> Self {
        Self {
            sims: 1,
            export_frames: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetSection {
    pub train_sims: usize,
    pub test_sims: usize,
    pub chunk_len: usize,
    pub stride: usize,
    pub max_chunks_per_sim: Option<usize>,
    pub label_mode: LabelMode,
    pub palette: Palette,
}

impl Default for DatasetSection {
    fn default() -> Self {
        let d = DatasetConfig::default();
        Self {
            train_sims: d.train_sims,
            test_sims: d.test_sims,
            chunk_len: CHUNK_LEN,
            stride: CHUNK_STRIDE,
            max_chunks_per_sim: None,
            label_mode: d.label_mode,
            palette: d.palette,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    /// `paper`, `desk` or `toy`.
    pub profile: String,
    pub variant: Variant,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            profile: "paper".into(),
            variant: Variant::Aoi,
        }
    }
}

impl ModelSection {
    /// Architecture of the profile, resized to `width x height` frames.
    pub fn spec(&self, width: usize, height: usize) -> Result<ModelSpec, CliError> {
        let mut spec = ModelSpec::named(&self.profile, self.variant).ok_or_else(|| {
            CliError::Config(format!(
                "unknown model profile `{}` (paper, desk, toy)",
                self.profile
            ))
        })?;
        spec.width = width;
        spec.height = height;
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSection {
    pub checkpoint: Option<PathBuf>,
    /// Score with the ground-truth labels instead of a model.
    pub oracle: bool,
    /// `test` or `train`.
    pub split: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathsSection {
    pub out: PathBuf,
    /// Dataset root holding `train/` and `test/`.
    pub data: Option<PathBuf>,
}

impl Default for PathsSection {
    fn default() -> Self {
        Self {
            out: PathBuf::from("runs/latest"),
            data: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).map_err(|source| CliError::ConfigFile {
            path: path.to_path_buf(),
            source,
        })?;
        toml::from_str(&text).map_err(|source| CliError::ConfigParse {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn dataset_config(&self) -> DatasetConfig {
        let d = &self.dataset;
        DatasetConfig {
            sim: self.sim.clone(),
            train_sims: d.train_sims,
            test_sims: d.test_sims,
            chunk_len: d.chunk_len,
            stride: d.stride,
            max_chunks_per_sim: d.max_chunks_per_sim,
            palette: d.palette,
            label_mode: d.label_mode,
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.threads == 0 {
            return Err(CliError::Config("threads must be at least 1".into()));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config is always representable as TOML")
    }

    /// Writes the snapshot into `dir`, creating it if needed.
    pub fn write_snapshot(&self, dir: &Path) -> Result<(), CliError> {
        std::fs::create_dir_all(dir).map_err(CliError::io(dir))?;
        let path = dir.join(SNAPSHOT);
        std::fs::write(&path, self.to_toml()).map_err(CliError::io(path))
    }
}
