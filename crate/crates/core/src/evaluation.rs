//! Video-mAP and video classification accuracy.
//!
//! A predicted tube is a true positive at threshold δ when its tube IoU with
//! a not yet matched ground-truth tube of the same video and class is at
//! least δ. Predictions are matched in descending score order and AP uses
//! the all-point precision envelope.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::tube_iou_unchecked;
use crate::model::{GroundTruthTube, LabeledTube};
use crate::scoring::classify_video;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub iou_thresholds: Vec<f64>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            iou_thresholds: vec![0.1, 0.2, 0.3, 0.4, 0.5],
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iou_thresholds.is_empty() {
            return Err(Error::validation("no IoU thresholds given"));
        }
        for &d in &self.iou_thresholds {
            if !(d > 0.0 && d <= 1.0) {
                return Err(Error::validation(format!("IoU threshold {d} outside (0, 1]")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdReport {
    pub delta: f64,
    /// AP per class; `None` for classes without ground truth.
    pub class_ap: Vec<Option<f64>>,
    pub map: f64,
    pub true_positives: usize,
    pub false_positives: usize,
    pub missed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub num_classes: usize,
    pub num_videos: usize,
    pub thresholds: Vec<ThresholdReport>,
    pub accuracy: f64,
}

impl EvalReport {
    /// mAP at `delta`, if it was evaluated.
    pub fn map_at(&self, delta: f64) -> Option<f64> {
        self.thresholds
            .iter()
            .find(|t| t.delta == delta)
            .map(|t| t.map)
    }

    /// Plain-text table with one column per threshold, values in percent.
    pub fn to_table(&self, method: &str) -> String {
        let width = method.len().max(10);
        let mut out = String::new();
        let _ = write!(out, "{:<width$}", "IoU δ");
        for t in &self.thresholds {
            let _ = write!(out, " | {:>6}", format!("{}", t.delta));
        }
        out.push('\n');
        let _ = write!(out, "{}", "-".repeat(width));
        for _ in &self.thresholds {
            out.push_str("-+-------");
        }
        out.push('\n');
        let _ = write!(out, "{method:<width$}");
        for t in &self.thresholds {
            let _ = write!(out, " | {:>6.2}", 100.0 * t.map);
        }
        out.push('\n');
        let _ = writeln!(
            out,
            "classification accuracy: {:.2}% over {} videos",
            100.0 * self.accuracy,
            self.num_videos
        );
        out
    }
}

/// TP/FP flag for each prediction, in the order given.
///
/// `preds` should be sorted by score, highest first. A prediction can only
/// match a ground truth of its own video and predicted class, and each
/// ground truth is used at most once.
pub fn match_tubes(preds: &[&LabeledTube], gts: &[&GroundTruthTube], delta: f64) -> Vec<bool> {
    let mut used = vec![false; gts.len()];
    preds
        .iter()
        .map(|pred| {
            let framed = pred.framed_boxes();
            let mut best: Option<(usize, f64)> = None;
            for (g, gt) in gts.iter().enumerate() {
                if used[g] || gt.video_id() != pred.video_id || gt.class_label() != pred.predicted_class
                {
                    continue;
                }
                let overlap = tube_iou_unchecked(&framed, gt.boxes());
                if best.is_none_or(|(_, b)| overlap > b) {
                    best = Some((g, overlap));
                }
            }
            match best {
                Some((g, overlap)) if overlap >= delta => {
                    used[g] = true;
                    true
                }
                _ => false,
            }
        })
        .collect()
}

/// Area under the precision/recall curve with the precision envelope.
pub fn average_precision(flags: &[bool], num_gt: usize) -> f64 {
    if num_gt == 0 {
        return 0.0;
    }
    let mut precision = Vec::with_capacity(flags.len());
    let mut recall = Vec::with_capacity(flags.len());
    let mut tp = 0usize;
    for (k, &hit) in flags.iter().enumerate() {
        tp += hit as usize;
        precision.push(tp as f64 / (k + 1) as f64);
        recall.push(tp as f64 / num_gt as f64);
    }
    for k in (0..precision.len().saturating_sub(1)).rev() {
        precision[k] = precision[k].max(precision[k + 1]);
    }
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for (p, r) in precision.iter().zip(&recall) {
        if *r > prev_recall {
            ap += (r - prev_recall) * p;
            prev_recall = *r;
        }
    }
    ap
}

fn class_count(preds: &[LabeledTube], gts: &[GroundTruthTube]) -> Result<usize> {
    let mut count: Option<usize> = None;
    for p in preds {
        match count {
            None => count = Some(p.class_scores.len()),
            Some(c) if c != p.class_scores.len() => {
                return Err(Error::Vocabulary(format!(
                    "tubes of video {} score {} classes, earlier tubes score {c}",
                    p.video_id,
                    p.class_scores.len()
                )))
            }
            _ => {}
        }
    }
    let max_label = gts.iter().map(|g| g.class_label() + 1).max().unwrap_or(0);
    match count {
        Some(c) if max_label > c => Err(Error::Vocabulary(format!(
            "ground truth uses class {} but tubes score only {c} classes",
            max_label - 1
        ))),
        Some(c) => Ok(c),
        None => Ok(max_label),
    }
}

/// Evaluates all predicted tubes against all ground-truth tubes.
pub fn video_map(
    preds: &[LabeledTube],
    gts: &[GroundTruthTube],
    cfg: &EvalConfig,
) -> Result<EvalReport> {
    cfg.validate()?;
    let num_classes = class_count(preds, gts)?;

    let mut preds_by_class: Vec<Vec<&LabeledTube>> = vec![Vec::new(); num_classes];
    for p in preds {
        preds_by_class[p.predicted_class].push(p);
    }
    for list in &mut preds_by_class {
        list.sort_by(|a, b| b.predicted_score.total_cmp(&a.predicted_score));
    }
    let mut gts_by_class: Vec<Vec<&GroundTruthTube>> = vec![Vec::new(); num_classes];
    for g in gts {
        gts_by_class[g.class_label()].push(g);
    }

    let thresholds = cfg
        .iou_thresholds
        .iter()
        .map(|&delta| {
            let mut class_ap = Vec::with_capacity(num_classes);
            let (mut tp, mut fp, mut missed) = (0, 0, 0);
            for (class_preds, class_gts) in preds_by_class.iter().zip(&gts_by_class) {
                let flags = match_tubes(class_preds, class_gts, delta);
                let hits = flags.iter().filter(|&&f| f).count();
                tp += hits;
                fp += flags.len() - hits;
                missed += class_gts.len() - hits;
                class_ap.push(
                    (!class_gts.is_empty()).then(|| average_precision(&flags, class_gts.len())),
                );
            }
            let present: Vec<f64> = class_ap.iter().flatten().copied().collect();
            let map = if present.is_empty() {
                0.0
            } else {
                present.iter().sum::<f64>() / present.len() as f64
            };
            ThresholdReport {
                delta,
                class_ap,
                map,
                true_positives: tp,
                false_positives: fp,
                missed,
            }
        })
        .collect();

    let mut labels: BTreeMap<&str, usize> = BTreeMap::new();
    for g in gts {
        labels.entry(g.video_id()).or_insert(g.class_label());
    }
    let mut tubes_by_video: BTreeMap<&str, Vec<LabeledTube>> = BTreeMap::new();
    for p in preds {
        tubes_by_video
            .entry(p.video_id.as_str())
            .or_default()
            .push(p.clone());
    }
    let correct = labels
        .iter()
        .filter(|(video, &label)| {
            tubes_by_video
                .get(*video)
                .and_then(|tubes| classify_video(tubes).ok())
                .is_some_and(|(class, _)| class == label)
        })
        .count();
    let accuracy = if labels.is_empty() {
        0.0
    } else {
        correct as f64 / labels.len() as f64
    };

    Ok(EvalReport {
        num_classes,
        num_videos: labels.len(),
        thresholds,
        accuracy,
    })
}
