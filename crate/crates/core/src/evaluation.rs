//! Count-based evaluation of a [`VideoReport`] against labelled frames.
//!
//! Labels give per-frame counts, not instances, so predicted and true counts
//! are matched by truncation: `TP = min(pred, gt)`, the surplus on either side
//! becomes FP or FN. Only the masked quantity has a negative class (unmasked
//! faces); the other three have `TN = 0`, which makes accuracy equal to
//! `TP / (TP + FP + FN)` for them. Confusions are summed over all labelled
//! frames before any ratio is taken.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pipeline::{Counts, VideoReport};

/// Ground-truth counts for one sampled frame.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameLabels {
    pub people: u64,
    pub violators: u64,
    pub faces: u64,
    pub masked: u64,
}

impl From<Counts> for FrameLabels {
    fn from(c: Counts) -> Self {
        Self {
            people: c.people,
            violators: c.violators,
            faces: c.faces,
            masked: c.masked,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroundTruthLabels {
    pub frames: BTreeMap<u64, FrameLabels>,
}

impl GroundTruthLabels {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let labels: GroundTruthLabels =
            serde_json::from_str(text).map_err(|e| Error::parse("labels", e))?;
        labels.validate()?;
        Ok(labels)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        for (idx, f) in &self.frames {
            if f.violators > f.people {
                return Err(Error::validation(
                    "labels",
                    format!("frame {idx}: violators {} exceed people {}", f.violators, f.people),
                ));
            }
            if f.masked > f.faces {
                return Err(Error::validation(
                    "labels",
                    format!("frame {idx}: masked {} exceeds faces {}", f.masked, f.faces),
                ));
            }
        }
        Ok(())
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("labels serialize")
    }
}

/// Labels that agree exactly with the report's own counts.
pub fn labels_from_report(report: &VideoReport) -> GroundTruthLabels {
    GroundTruthLabels {
        frames: report.frames.iter().map(|f| (f.index, f.counts.into())).collect(),
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }
}

impl std::ops::Add for ConfusionCounts {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self {
            tp: self.tp + o.tp,
            tn: self.tn + o.tn,
            fp: self.fp + o.fp,
            fn_: self.fn_ + o.fn_,
        }
    }
}

impl std::ops::AddAssign for ConfusionCounts {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

pub fn confusion_from_counts(pred: u64, gt: u64, pred_neg: u64, gt_neg: u64) -> ConfusionCounts {
    ConfusionCounts {
        tp: pred.min(gt),
        fp: pred.saturating_sub(gt),
        fn_: gt.saturating_sub(pred),
        tn: pred_neg.min(gt_neg),
    }
}

/// `(TP + TN) / (TP + FP + TN + FN)`; `None` for an all-zero confusion.
pub fn accuracy(cc: &ConfusionCounts) -> Option<f64> {
    let total = cc.total();
    (total > 0).then(|| (cc.tp + cc.tn) as f64 / total as f64)
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

/// Precision, recall and their harmonic mean. F1 is `None` whenever either
/// input is, and also when both are zero.
pub fn precision_recall_f1(cc: &ConfusionCounts) -> (Option<f64>, Option<f64>, Option<f64>) {
    let precision = ratio(cc.tp, cc.tp + cc.fp);
    let recall = ratio(cc.tp, cc.tp + cc.fn_);
    let f1 = match (precision, recall) {
        (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
        (Some(_), Some(_)) => Some(0.0),
        _ => None,
    };
    (precision, recall, f1)
}

/// The four evaluated quantities, in report order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantity {
    People,
    Violators,
    Faces,
    Masked,
}

impl Quantity {
    pub const ALL: [Quantity; 4] = [Quantity::People, Quantity::Violators, Quantity::Faces, Quantity::Masked];

    /// Row name in the metrics report.
    pub fn stage(self) -> &'static str {
        match self {
            Quantity::People => "person_detection",
            Quantity::Violators => "social_distancing",
            Quantity::Faces => "face_detection",
            Quantity::Masked => "mask_classification",
        }
    }

    pub fn confusion(self, pred: &Counts, gt: &FrameLabels) -> ConfusionCounts {
        match self {
            Quantity::People => confusion_from_counts(pred.people, gt.people, 0, 0),
            Quantity::Violators => confusion_from_counts(pred.violators, gt.violators, 0, 0),
            Quantity::Faces => confusion_from_counts(pred.faces, gt.faces, 0, 0),
            Quantity::Masked => confusion_from_counts(
                pred.masked,
                gt.masked,
                pred.faces.saturating_sub(pred.masked),
                gt.faces.saturating_sub(gt.masked),
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageMetrics {
    pub stage: String,
    pub quantity: String,
    pub accuracy: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    pub seconds_per_video_second: f64,
    pub confusion: ConfusionCounts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub frames_evaluated: u64,
    pub rows: Vec<StageMetrics>,
    pub total_seconds_per_video_second: f64,
    pub notes: Vec<String>,
}

impl MetricsReport {
    pub fn row(&self, stage: &str) -> Option<&StageMetrics> {
        self.rows.iter().find(|r| r.stage == stage)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("metrics serialize")
    }
}

/// Micro-averaged metrics of `report` against `labels`. Every labelled frame
/// must be present in the report.
pub fn evaluate(report: &VideoReport, labels: &GroundTruthLabels) -> Result<MetricsReport> {
    labels.validate()?;
    let predicted: BTreeMap<u64, &Counts> = report.frames.iter().map(|f| (f.index, &f.counts)).collect();
    let missing: Vec<u64> = labels
        .frames
        .keys()
        .filter(|i| !predicted.contains_key(i))
        .copied()
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingFrames(missing));
    }

    let mut confusions = [ConfusionCounts::default(); 4];
    for (idx, gt) in &labels.frames {
        let pred = predicted[idx];
        for (cc, q) in confusions.iter_mut().zip(Quantity::ALL) {
            *cc += q.confusion(pred, gt);
        }
    }

    let t = &report.timing_per_video_second_s;
    let rows = Quantity::ALL
        .iter()
        .zip(confusions)
        .map(|(&q, cc)| {
            let (precision, recall, f1) = precision_recall_f1(&cc);
            let seconds_per_video_second = match q {
                Quantity::People => t.person_detection,
                Quantity::Violators => t.distancing,
                Quantity::Faces => t.face_detection,
                Quantity::Masked => t.mask_classification,
            };
            StageMetrics {
                stage: q.stage().to_string(),
                quantity: format!("{q:?}").to_lowercase(),
                accuracy: accuracy(&cc),
                precision,
                recall,
                f1,
                seconds_per_video_second,
                confusion: cc,
            }
        })
        .collect();

    Ok(MetricsReport {
        frames_evaluated: labels.frames.len() as u64,
        rows,
        total_seconds_per_video_second: t.total,
        notes: vec![
            "counts matched by truncation: TP = min(pred, gt), FP/FN = the surplus".to_string(),
            "TN is 0 except for mask_classification, whose negatives are unmasked faces".to_string(),
            "confusions are summed over all labelled frames before computing ratios".to_string(),
        ],
    })
}
