//! Threshold metrics for binary forecasts.

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricError {
    #[error("scores ({scores}) and labels ({labels}) differ in length")]
    Length { scores: usize, labels: usize },
    #[error("no samples")]
    Empty,
    #[error("AUC undefined: {positives} positive and {negatives} negative labels")]
    SingleClass { positives: usize, negatives: usize },
}

/// `0.00, 0.05, …, 1.00`.
pub fn default_thresholds() -> Vec<f64> {
    (0..=20).map(|i| i as f64 / 20.0).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Confusion {
    /// Counts with a positive prediction iff `score > threshold`.
    pub fn at(scores: &[f64], labels: &[bool], threshold: f64) -> Result<Self, MetricError> {
        check(scores, labels)?;
        let mut c = Confusion::default();
        for (&s, &l) in scores.iter().zip(labels) {
            match (s > threshold, l) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, false) => c.tn += 1,
                (false, true) => c.fn_ += 1,
            }
        }
        Ok(c)
    }

    pub fn f1(&self) -> f64 {
        let denom = 2 * self.tp + self.fp + self.fn_;
        if denom == 0 {
            0.0
        } else {
            2.0 * self.tp as f64 / denom as f64
        }
    }
}

fn check(scores: &[f64], labels: &[bool]) -> Result<(), MetricError> {
    if scores.len() != labels.len() {
        return Err(MetricError::Length {
            scores: scores.len(),
            labels: labels.len(),
        });
    }
    if scores.is_empty() {
        return Err(MetricError::Empty);
    }
    Ok(())
}

/// F1 with positives `score > threshold`; 0 when there are no true
/// positives, false positives or false negatives at all.
pub fn f1(scores: &[f64], labels: &[bool], threshold: f64) -> Result<f64, MetricError> {
    Ok(Confusion::at(scores, labels, threshold)?.f1())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Roc {
    /// One point per threshold, in threshold order.
    pub points: Vec<RocPoint>,
    pub auc: f64,
}

fn class_counts(labels: &[bool]) -> Result<(usize, usize), MetricError> {
    let positives = labels.iter().filter(|&&l| l).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(MetricError::SingleClass {
            positives,
            negatives,
        });
    }
    Ok((positives, negatives))
}

/// ROC curve over `thresholds` and the trapezoidal area under it, with the
/// `(0, 0)` and `(1, 1)` corners included.
pub fn roc_auc(scores: &[f64], labels: &[bool], thresholds: &[f64]) -> Result<Roc, MetricError> {
    check(scores, labels)?;
    let (p, n) = class_counts(labels)?;
    let points: Vec<RocPoint> = thresholds
        .iter()
        .map(|&threshold| {
            let c = Confusion::at(scores, labels, threshold).expect("checked above");
            RocPoint {
                threshold,
                fpr: c.fp as f64 / n as f64,
                tpr: c.tp as f64 / p as f64,
            }
        })
        .collect();
    let mut curve: Vec<(f64, f64)> = points.iter().map(|q| (q.fpr, q.tpr)).collect();
    curve.push((0.0, 0.0));
    curve.push((1.0, 1.0));
    curve.sort_by(|a, b| a.partial_cmp(b).expect("rates are finite"));
    let auc = curve
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[0].1 + w[1].1) / 2.0)
        .sum();
    Ok(Roc { points, auc })
}

/// Probability that a random positive outscores a random negative, ties
/// counting one half.
pub fn mann_whitney_auc(scores: &[f64], labels: &[bool]) -> Result<f64, MetricError> {
    check(scores, labels)?;
    let (p, n) = class_counts(labels)?;
    let mut neg: Vec<f64> = scores
        .iter()
        .zip(labels)
        .filter(|(_, &l)| !l)
        .map(|(&s, _)| s)
        .collect();
    neg.sort_by(|a, b| a.partial_cmp(b).expect("finite scores"));
    let mut wins = 0.0;
    for (&s, _) in scores.iter().zip(labels).filter(|(_, &l)| l) {
        let below = neg.partition_point(|&v| v < s);
        let not_above = neg.partition_point(|&v| v <= s);
        wins += below as f64 + 0.5 * (not_above - below) as f64;
    }
    Ok(wins / (p as f64 * n as f64))
}

#[cfg(test)]
mod tests {
    use super::*;

    const L: [bool; 4] = [true, false, true, false];

    #[test]
    fn hand_case_auc() {
        let roc = roc_auc(&[0.9, 0.8, 0.7, 0.1], &L, &default_thresholds()).unwrap();
        assert_eq!(roc.auc, 0.75);
        assert_eq!(roc.points.len(), 21);
        assert_eq!(mann_whitney_auc(&[0.9, 0.8, 0.7, 0.1], &L).unwrap(), 0.75);
    }

    #[test]
    fn perfect_and_inverted() {
        let t = default_thresholds();
        assert_eq!(roc_auc(&[0.9, 0.2, 0.8, 0.1], &L, &t).unwrap().auc, 1.0);
        assert_eq!(roc_auc(&[0.1, 0.8, 0.2, 0.9], &L, &t).unwrap().auc, 0.0);
    }

    #[test]
    fn constant_scores_give_half() {
        let roc = roc_auc(&[0.5; 4], &L, &default_thresholds()).unwrap();
        assert!((roc.auc - 0.5).abs() < 1e-12);
    }

    #[test]
    fn single_class_is_an_error() {
        assert!(matches!(
            roc_auc(&[0.3, 0.4], &[true, true], &default_thresholds()),
            Err(MetricError::SingleClass {
                positives: 2,
                negatives: 0
            })
        ));
    }

    #[test]
    fn roc_is_a_monotone_staircase() {
        let scores = [0.05, 0.93, 0.41, 0.41, 0.77, 0.12, 0.66, 0.5];
        let labels = [false, true, true, false, true, false, false, true];
        let roc = roc_auc(&scores, &labels, &default_thresholds()).unwrap();
        for w in roc.points.windows(2) {
            assert!(w[1].tpr <= w[0].tpr && w[1].fpr <= w[0].fpr);
        }
    }

    #[test]
    fn f1_cases() {
        // TP=2, FP=1, FN=1.
        let s = [0.9, 0.8, 0.7, 0.2, 0.1];
        let l = [true, true, false, true, false];
        assert!((f1(&s, &l, 0.5).unwrap() - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(f1(&[0.9, 0.1], &[true, false], 0.5).unwrap(), 1.0);
        assert_eq!(f1(&[0.1, 0.2], &[true, false], 0.5).unwrap(), 0.0);
        assert_eq!(f1(&[0.1, 0.2], &[false, false], 0.5).unwrap(), 0.0);
        // Ties at the threshold are negative.
        assert_eq!(Confusion::at(&[0.5], &[true], 0.5).unwrap().fn_, 1);
    }

    #[test]
    fn length_mismatch() {
        assert!(matches!(
            f1(&[0.1], &[], 0.5),
            Err(MetricError::Length { .. })
        ));
        assert!(matches!(f1(&[], &[], 0.5), Err(MetricError::Empty)));
    }
}
