//! Training (BPTT with Adam on the windowed BCE objective) and evaluation.

mod eval;
pub mod metrics;
mod report;

pub use eval::{
    evaluate_windows, multi_aoi_sweep, AoiSweepReport, ConstantScorer, ModelScorer, OracleScorer,
    Scorer, WindowMetrics,
};
pub use metrics::{
    default_thresholds, f1, mann_whitney_auc, roc_auc, Confusion, MetricError, Roc, RocPoint,
};
pub use report::{cost_report, loss_csv, sweep_csv, windows_csv, CostReport, CostRow};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{
    extract_aoi_labels, AoiSpec, Chunk, Dataset, DatasetError, LabelMode, Palette,
};
use crate::models::{Mode, Model, ModelError};
use crate::nn::{bce_grad, bce_loss, Adam, AdamConfig, Module, NnError, Tensor, BCE_EPS};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training config {field}: {reason}")]
    InvalidConfig { field: &'static str, reason: String },
    #[error("empty dataset")]
    EmptyDataset,
    #[error("model and dataset are incompatible: {0}")]
    Incompatible(String),
    #[error("non-finite loss at epoch {epoch}, batch {batch} (chunks {chunks:?})")]
    NonFiniteLoss {
        epoch: usize,
        batch: usize,
        /// `(sim_id, start_step)` of each chunk in the batch.
        chunks: Vec<(u64, usize)>,
    },
    #[error("non-finite test loss after epoch {epoch}")]
    NonFiniteTestLoss { epoch: usize },
    #[error("non-finite gradient at epoch {epoch}, batch {batch}: {source}")]
    NonFiniteGradient {
        epoch: usize,
        batch: usize,
        #[source]
        source: NnError,
    },
    #[error("AOI {aoi}: {source}")]
    Aoi {
        aoi: AoiSpec,
        #[source]
        source: Box<TrainError>,
    },
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Nn(#[from] NnError),
}

impl TrainError {
    /// Whether the failure is numeric rather than a configuration or data
    /// problem.
    pub fn is_numeric(&self) -> bool {
        match self {
            TrainError::NonFiniteLoss { .. }
            | TrainError::NonFiniteTestLoss { .. }
            | TrainError::NonFiniteGradient { .. } => true,
            TrainError::Aoi { source, .. } => source.is_numeric(),
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub label_mode: LabelMode,
    /// Defaults to the grid centre.
    pub aoi: Option<AoiSpec>,
    /// Probability clamp of the loss.
    pub eps: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 5e-6,
            batch_size: 4,
            epochs: 100,
            seed: 0,
            label_mode: LabelMode::Instantaneous,
            aoi: None,
            eps: BCE_EPS,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |field, reason: &str| {
            Err(TrainError::InvalidConfig {
                field,
                reason: reason.into(),
            })
        };
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return bad("lr", "must be finite and non-negative");
        }
        if self.batch_size == 0 {
            return bad("batch_size", "must be at least 1");
        }
        if !(self.eps > 0.0 && self.eps < 0.5) {
            return bad("eps", "must lie in (0, 0.5)");
        }
        Ok(())
    }

    pub fn aoi_for(&self, width: usize, height: usize) -> AoiSpec {
        self.aoi.unwrap_or_else(|| AoiSpec::center(width, height))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpochLoss {
    pub epoch: usize,
    pub train_loss: f64,
    pub test_loss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainReport {
    pub aoi: AoiSpec,
    pub seed: u64,
    pub epochs: Vec<EpochLoss>,
    pub updates: u64,
}

/// Checks that `model` can consume chunks of `dataset`.
pub fn check_compatible(model: &Model<f32>, dataset: &Dataset) -> Result<(), TrainError> {
    let spec = model.spec();
    let m = &dataset.manifest;
    if (spec.width, spec.height) != (m.width(), m.height()) {
        return Err(TrainError::Incompatible(format!(
            "model expects {}x{} frames, dataset has {}x{}",
            spec.width,
            spec.height,
            m.width(),
            m.height()
        )));
    }
    if spec.t_obs + spec.t_pred != m.chunk_len {
        return Err(TrainError::Incompatible(format!(
            "model window {}+{} does not match chunk length {}",
            spec.t_obs, spec.t_pred, m.chunk_len
        )));
    }
    if spec.in_channels != 3 {
        return Err(TrainError::Incompatible(
            "model must take RGB frames".into(),
        ));
    }
    Ok(())
}

/// Observed frames of a batch: `t_obs` tensors of shape `B x 3 x H x W`.
pub fn batch_frames(chunks: &[&Chunk], t_obs: usize, palette: &Palette) -> Vec<Tensor<f32>> {
    let (h, w) = (chunks[0].height(), chunks[0].width());
    let per = 3 * h * w;
    let table = palette.unit_table::<f32>();
    (0..t_obs)
        .map(|t| {
            let mut x = Tensor::zeros(&[chunks.len(), 3, h, w]);
            for (b, c) in chunks.iter().enumerate() {
                crate::dataset::render_codes_into(
                    c.frame_codes(t),
                    &table,
                    &mut x.data_mut()[b * per..(b + 1) * per],
                );
            }
            x
        })
        .collect()
}

/// Targets of the prediction window: `B x T_pred` for the single-cell
/// variant, `B x T_pred x H x W` for map variants.
pub fn batch_targets(
    model: &Model<f32>,
    chunks: &[&Chunk],
    aoi: AoiSpec,
    mode: LabelMode,
) -> Result<Tensor<f32>, TrainError> {
    let spec = model.spec();
    let range = spec.t_obs..spec.t_obs + spec.t_pred;
    let mut data = Vec::new();
    for c in chunks {
        if spec.variant.is_map() {
            data.extend(c.label_maps(range.clone(), mode).into_iter().map(f32::from));
        } else {
            let labels = extract_aoi_labels(c, aoi, mode)?;
            data.extend(labels[range.clone()].iter().map(|&l| f32::from(l)));
        }
    }
    let shape: Vec<usize> = if spec.variant.is_map() {
        vec![chunks.len(), spec.t_pred, spec.height, spec.width]
    } else {
        vec![chunks.len(), spec.t_pred]
    };
    Ok(Tensor::from_vec(&shape, data)?)
}

/// Mean loss of `model` over `dataset` in evaluation mode.
pub fn evaluate_loss(
    model: &mut Model<f32>,
    dataset: &Dataset,
    cfg: &TrainConfig,
) -> Result<f64, TrainError> {
    check_compatible(model, dataset)?;
    if dataset.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    let aoi = cfg.aoi_for(dataset.manifest.width(), dataset.manifest.height());
    let (mut total, mut count) = (0.0, 0usize);
    let chunks: Vec<&Chunk> = dataset.chunks.iter().collect();
    for batch in chunks.chunks(cfg.batch_size) {
        let frames = batch_frames(batch, model.spec().t_obs, &dataset.manifest.palette);
        let (probs, _) = model.forward(&frames, Mode::Eval)?;
        let target = batch_targets(model, batch, aoi, cfg.label_mode)?;
        total += bce_loss(probs.data(), target.data(), cfg.eps)? * probs.len() as f64;
        count += probs.len();
    }
    Ok(total / count as f64)
}

/// Trains `model` in place. Batches are drawn from a seeded shuffle, one
/// Adam update per batch; the test split (if any) is scored once per epoch.
pub fn train(
    model: &mut Model<f32>,
    train_set: &Dataset,
    test_set: Option<&Dataset>,
    cfg: &TrainConfig,
) -> Result<TrainReport, TrainError> {
    cfg.validate()?;
    if train_set.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    check_compatible(model, train_set)?;
    if let Some(t) = test_set {
        check_compatible(model, t)?;
    }
    let aoi = cfg.aoi_for(train_set.manifest.width(), train_set.manifest.height());
    aoi.check(train_set.manifest.width(), train_set.manifest.height())?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut opt = Adam::new(AdamConfig::with_lr(cfg.lr));
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut epochs = Vec::with_capacity(cfg.epochs);
    let t_obs = model.spec().t_obs;
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let (mut total, mut count) = (0.0, 0usize);
        for (bi, idx) in order.chunks(cfg.batch_size).enumerate() {
            let batch: Vec<&Chunk> = idx.iter().map(|&i| &train_set.chunks[i]).collect();
            let frames = batch_frames(&batch, t_obs, &train_set.manifest.palette);
            let target = batch_targets(model, &batch, aoi, cfg.label_mode)?;
            let (probs, tape) = model.forward(&frames, Mode::Train)?;
            let loss = bce_loss(probs.data(), target.data(), cfg.eps)?;
            if !loss.is_finite() {
                return Err(TrainError::NonFiniteLoss {
                    epoch,
                    batch: bi,
                    chunks: batch.iter().map(|c| (c.sim_id, c.start_step)).collect(),
                });
            }
            let dprobs = Tensor::from_vec(
                probs.shape(),
                bce_grad(probs.data(), target.data(), cfg.eps)?,
            )?;
            model.zero_grad();
            model.backward(
                tape.as_ref().expect("training mode records a tape"),
                &dprobs,
            )?;
            opt.step(model)
                .map_err(|source| TrainError::NonFiniteGradient {
                    epoch,
                    batch: bi,
                    source,
                })?;
            total += loss * probs.len() as f64;
            count += probs.len();
        }
        let test_loss = test_set.map(|t| evaluate_loss(model, t, cfg)).transpose()?;
        if test_loss.is_some_and(|l| !l.is_finite()) {
            return Err(TrainError::NonFiniteTestLoss { epoch });
        }
        epochs.push(EpochLoss {
            epoch,
            train_loss: total / count as f64,
            test_loss,
        });
    }
    Ok(TrainReport {
        aoi,
        seed: cfg.seed,
        epochs,
        updates: opt.t,
    })
}
