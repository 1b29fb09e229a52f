use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::metrics::{default_thresholds, roc_auc, Confusion, MetricError, Roc};
use super::{batch_frames, check_compatible, train, TrainConfig, TrainError, TrainReport};
use crate::dataset::{extract_aoi_labels, AoiSpec, Chunk, Dataset, LabelMode, Palette};
use crate::models::{Mode, Model, ModelSpec};

/// Produces, for each chunk, the AOI burning probability at the final
/// prediction step.
pub trait Scorer {
    fn score(&mut self, chunks: &[&Chunk], palette: &Palette) -> Result<Vec<f64>, TrainError>;
}

/// Scores with a model in evaluation mode.
pub struct ModelScorer<'a> {
    pub model: &'a Model<f32>,
    pub aoi: AoiSpec,
    pub batch_size: usize,
    /// Worker threads; each evaluates whole batches with its own model copy.
    pub threads: usize,
}

impl ModelScorer<'_> {
    fn score_serial(
        model: &mut Model<f32>,
        aoi: AoiSpec,
        batches: &[&[&Chunk]],
        palette: &Palette,
    ) -> Result<Vec<f64>, TrainError> {
        let mut out = Vec::new();
        for batch in batches {
            let frames = batch_frames(batch, model.spec().t_obs, palette);
            let (probs, _) = model.forward(&frames, Mode::Eval)?;
            let p = model.aoi_probabilities(&probs, aoi)?;
            let tp = p.shape()[1];
            out.extend((0..batch.len()).map(|b| p.data()[b * tp + tp - 1] as f64));
        }
        Ok(out)
    }
}

impl Scorer for ModelScorer<'_> {
    fn score(&mut self, chunks: &[&Chunk], palette: &Palette) -> Result<Vec<f64>, TrainError> {
        let batches: Vec<&[&Chunk]> = chunks.chunks(self.batch_size.max(1)).collect();
        let threads = self.threads.clamp(1, batches.len().max(1));
        if threads == 1 {
            return Self::score_serial(&mut self.model.clone(), self.aoi, &batches, palette);
        }
        let per = batches.len().div_ceil(threads);
        let aoi = self.aoi;
        let model = self.model;
        let parts: Vec<Result<Vec<f64>, TrainError>> = std::thread::scope(|s| {
            let handles: Vec<_> = batches
                .chunks(per)
                .map(|part| {
                    s.spawn(move || Self::score_serial(&mut model.clone(), aoi, part, palette))
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("evaluation worker panicked"))
                .collect()
        });
        let mut out = Vec::with_capacity(chunks.len());
        for p in parts {
            out.extend(p?);
        }
        Ok(out)
    }
}

/// Returns the ground-truth label as the score.
pub struct OracleScorer {
    pub aoi: AoiSpec,
    pub label_mode: LabelMode,
}

impl Scorer for OracleScorer {
    fn score(&mut self, chunks: &[&Chunk], _: &Palette) -> Result<Vec<f64>, TrainError> {
        chunks
            .iter()
            .map(|c| {
                let l = extract_aoi_labels(c, self.aoi, self.label_mode)?;
                Ok(f64::from(l[l.len() - 1]))
            })
            .collect()
    }
}

/// Scores every chunk with the same value.
pub struct ConstantScorer(pub f64);

impl Scorer for ConstantScorer {
    fn score(&mut self, chunks: &[&Chunk], _: &Palette) -> Result<Vec<f64>, TrainError> {
        Ok(vec![self.0; chunks.len()])
    }
}

/// Metrics of one window position (all chunks sharing a start step).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WindowMetrics {
    pub start_step: usize,
    /// Simulation step of the scored label.
    pub label_step: usize,
    pub samples: usize,
    pub positives: usize,
    /// `None` when the window holds a single class.
    pub roc: Option<Roc>,
    pub f1: f64,
    pub confusion: Confusion,
}

impl WindowMetrics {
    pub fn auc(&self) -> Option<f64> {
        self.roc.as_ref().map(|r| r.auc)
    }
}

/// Scores the final prediction step of every chunk against the label of
/// the chunk's last timestep, grouped by window start.
pub fn evaluate_windows(
    scorer: &mut dyn Scorer,
    dataset: &Dataset,
    aoi: AoiSpec,
    label_mode: LabelMode,
) -> Result<Vec<WindowMetrics>, TrainError> {
    aoi.check(dataset.manifest.width(), dataset.manifest.height())?;
    let mut groups: BTreeMap<usize, Vec<&Chunk>> = BTreeMap::new();
    for c in &dataset.chunks {
        groups.entry(c.start_step).or_default().push(c);
    }
    let thresholds = default_thresholds();
    let mut out = Vec::with_capacity(groups.len());
    for (start_step, chunks) in groups {
        let scores = scorer.score(&chunks, &dataset.manifest.palette)?;
        let mut labels = Vec::with_capacity(chunks.len());
        for c in &chunks {
            let l = extract_aoi_labels(c, aoi, label_mode)?;
            labels.push(l[l.len() - 1] == 1);
        }
        let roc = match roc_auc(&scores, &labels, &thresholds) {
            Ok(r) => Some(r),
            Err(MetricError::SingleClass { .. }) => None,
            Err(e) => return Err(e.into()),
        };
        let confusion = Confusion::at(&scores, &labels, 0.5)?;
        out.push(WindowMetrics {
            start_step,
            label_step: start_step + chunks[0].len() - 1,
            samples: chunks.len(),
            positives: labels.iter().filter(|&&l| l).count(),
            roc,
            f1: confusion.f1(),
            confusion,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AoiSweepReport {
    pub aoi: AoiSpec,
    /// Seed of both the initial weights and the batch shuffle.
    pub seed: u64,
    pub training: TrainReport,
    pub windows: Vec<WindowMetrics>,
}

/// Trains one single-cell model per AOI (seed `cfg.seed + index`) and
/// evaluates it on `test_set`.
pub fn multi_aoi_sweep(
    spec: &ModelSpec,
    train_set: &Dataset,
    test_set: &Dataset,
    cfg: &TrainConfig,
    aois: &[AoiSpec],
    threads: usize,
) -> Result<Vec<AoiSweepReport>, TrainError> {
    let mut out = Vec::with_capacity(aois.len());
    for (i, &aoi) in aois.iter().enumerate() {
        let tag = |source: TrainError| TrainError::Aoi {
            aoi,
            source: Box::new(source),
        };
        let seed = cfg.seed.wrapping_add(i as u64);
        let cfg = TrainConfig {
            seed,
            aoi: Some(aoi),
            ..cfg.clone()
        };
        let mut model = Model::new(spec.clone(), &mut ChaCha8Rng::seed_from_u64(seed))
            .map_err(|e| tag(e.into()))?;
        check_compatible(&model, test_set).map_err(tag)?;
        let training = train(&mut model, train_set, None, &cfg).map_err(tag)?;
        let mut scorer = ModelScorer {
            model: &model,
            aoi,
            batch_size: cfg.batch_size.max(8),
            threads,
        };
        let windows = evaluate_windows(&mut scorer, test_set, aoi, cfg.label_mode).map_err(tag)?;
        out.push(AoiSweepReport {
            aoi,
            seed,
            training,
            windows,
        });
    }
    Ok(out)
}
