use std::path::PathBuf;

use firecast_core::dataset::DatasetError;
use firecast_core::models::ModelError;
use firecast_core::nn::NnError;
use firecast_core::sim::SimError;
use firecast_core::train::TrainError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("cannot read config {path}: {source}")]
    ConfigFile {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("config {path}: {source}")]
    ConfigParse {
        path: PathBuf,
        #[source]
        source: toml::de::Error,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Train(#[from] TrainError),
}

impl CliError {
    pub const CONFIG: u8 = 2;
    pub const DATA: u8 = 3;
    pub const NUMERIC: u8 = 4;

    pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
        let path = path.into();
        move |source| CliError::Io { path, source }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::ConfigFile { .. } | CliError::ConfigParse { .. } => {
                Self::CONFIG
            }
            CliError::Io { .. } => Self::DATA,
            CliError::Sim(e) => sim_code(e),
            CliError::Dataset(e) => dataset_code(e),
            CliError::Model(e) => model_code(e),
            CliError::Train(e) => train_code(e),
        }
    }
}

fn sim_code(e: &SimError) -> u8 {
    match e {
        SimError::InvalidParam { .. } | SimError::NotEnoughTrees { .. } => CliError::CONFIG,
    }
}

fn dataset_code(e: &DatasetError) -> u8 {
    match e {
        DatasetError::InvalidParam { .. }
        | DatasetError::InvalidPalette(_)
        | DatasetError::AoiOutOfBounds { .. } => CliError::CONFIG,
        DatasetError::Sim(e) => sim_code(e),
        _ => CliError::DATA,
    }
}

fn model_code(e: &ModelError) -> u8 {
    match e {
        ModelError::InvalidSpec { .. } | ModelError::InputTooSmall { .. } => CliError::CONFIG,
        ModelError::Nn(NnError::NonFiniteGradient { .. }) => CliError::NUMERIC,
        _ => CliError::DATA,
    }
}

fn train_code(e: &TrainError) -> u8 {
    match e {
        e if e.is_numeric() => CliError::NUMERIC,
        TrainError::InvalidConfig { .. } => CliError::CONFIG,
        TrainError::Aoi { source, .. } => train_code(source),
        TrainError::Model(m) => model_code(m),
        TrainError::Dataset(d) => dataset_code(d),
        TrainError::Nn(NnError::NonFiniteGradient { .. }) => CliError::NUMERIC,
        _ => CliError::DATA,
    }
}
