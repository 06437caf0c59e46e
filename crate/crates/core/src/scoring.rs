//! Tube-level class scores, temporal-model score folding and video labels.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fusion::{fuse_frame_scores, FusionConfig};
use crate::io::TunRecord;
use crate::model::{ClassScores, LabeledTube, Stream, Tubelet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScoreConfig {
    /// Weight on the linked detector scores; temporal-model scores get `1 - lambda1`.
    pub lambda1: f64,
}

impl Default for ScoreConfig {
    fn default() -> Self {
        Self { lambda1: 2.0 / 3.0 }
    }
}

impl ScoreConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.lambda1) {
            return Err(Error::validation(format!(
                "lambda1 {} outside [0, 1]",
                self.lambda1
            )));
        }
        Ok(())
    }
}

/// Per-frame class scores from an external temporal model, one entry per
/// frame of the tube they belong to.
#[derive(Debug, Clone, PartialEq)]
pub struct TunScores(pub Vec<ClassScores>);

impl TunScores {
    pub fn new(frames: Vec<Vec<f64>>) -> Result<Self> {
        frames
            .into_iter()
            .map(ClassScores::new)
            .collect::<Result<Vec<_>>>()
            .map(Self)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

fn frame_mean(frames: &[ClassScores], num_classes: usize) -> Result<Vec<f64>> {
    if frames.is_empty() {
        return Err(Error::validation("cannot average zero frames"));
    }
    let mut sum = vec![0.0; num_classes];
    for scores in frames {
        if scores.len() != num_classes {
            return Err(Error::validation(format!(
                "frame has {} class scores, expected {num_classes}",
                scores.len()
            )));
        }
        for (acc, s) in sum.iter_mut().zip(scores.as_slice()) {
            *acc += s;
        }
    }
    let n = frames.len() as f64;
    Ok(sum.into_iter().map(|s| s / n).collect())
}

fn blend(detector_mean: &[f64], tun_mean: &[f64], lambda1: f64) -> ClassScores {
    ClassScores::from_raw(
        detector_mean
            .iter()
            .zip(tun_mean)
            .map(|(s, t)| lambda1 * s + (1.0 - lambda1) * t)
            .collect(),
    )
}

/// Video-level class scores of a tubelet.
///
/// Averages the linked per-frame scores and, when temporal-model scores are
/// given, mixes in their per-frame average with weight `1 - lambda1`.
/// Without them the plain average is returned.
pub fn tube_class_scores(
    tubelet: &Tubelet,
    tun: Option<&TunScores>,
    cfg: &ScoreConfig,
) -> Result<ClassScores> {
    cfg.validate()?;
    let num_classes = tubelet
        .per_frame_scores
        .first()
        .map(ClassScores::len)
        .ok_or_else(|| Error::validation("tubelet has no frames"))?;
    let detector = frame_mean(&tubelet.per_frame_scores, num_classes)?;
    match tun {
        None => Ok(ClassScores::from_raw(detector)),
        Some(tun) => {
            if tun.len() != tubelet.len() {
                return Err(Error::validation(format!(
                    "{} temporal-model frames for a tube of {} frames",
                    tun.len(),
                    tubelet.len()
                )));
            }
            let temporal = frame_mean(&tun.0, num_classes)?;
            Ok(blend(&detector, &temporal, cfg.lambda1))
        }
    }
}

/// Folds temporal-model scores into a tube already carrying the plain
/// detector average as its class scores.
pub fn rescore_tube(
    tube: &LabeledTube,
    tun: Option<&TunScores>,
    cfg: &ScoreConfig,
) -> Result<LabeledTube> {
    cfg.validate()?;
    let Some(tun) = tun else {
        return Ok(tube.clone());
    };
    if tun.len() != tube.boxes.len() {
        return Err(Error::validation(format!(
            "video {}: {} temporal-model frames for a tube of {} frames",
            tube.video_id,
            tun.len(),
            tube.boxes.len()
        )));
    }
    let temporal = frame_mean(&tun.0, tube.class_scores.len())?;
    let scores = blend(tube.class_scores.as_slice(), &temporal, cfg.lambda1);
    LabeledTube::new(
        tube.video_id.clone(),
        tube.boxes.clone(),
        scores,
        tube.link_score,
    )
}

/// Combines appearance and motion temporal-model scores frame by frame.
pub fn fuse_tun_scores(
    appearance: &TunScores,
    motion: &TunScores,
    cfg: &FusionConfig,
) -> Result<TunScores> {
    if appearance.len() != motion.len() {
        return Err(Error::validation(format!(
            "temporal-model streams have {} and {} frames",
            appearance.len(),
            motion.len()
        )));
    }
    appearance
        .0
        .iter()
        .zip(&motion.0)
        .map(|(a, m)| fuse_frame_scores(a, m, cfg))
        .collect::<Result<Vec<_>>>()
        .map(TunScores)
}

/// Rescores every tube that has temporal-model records. Tubes are matched
/// by video and by their position among that video's tubes; when both
/// streams are present they are fused first.
pub fn apply_tun_records(
    tubes: &[LabeledTube],
    records: &[TunRecord],
    score_cfg: &ScoreConfig,
    fusion_cfg: &FusionConfig,
) -> Result<Vec<LabeledTube>> {
    let mut by_tube: BTreeMap<(&str, usize), BTreeMap<Stream, TunScores>> = BTreeMap::new();
    for r in records {
        let scores = TunScores::new(r.frame_scores.clone())?;
        let slot = by_tube
            .entry((r.video_id.as_str(), r.tube_index))
            .or_default();
        if slot.insert(r.stream, scores).is_some() {
            return Err(Error::validation(format!(
                "duplicate {} temporal-model scores for video {} tube {}",
                r.stream, r.video_id, r.tube_index
            )));
        }
    }

    let mut position: BTreeMap<&str, usize> = BTreeMap::new();
    let mut out = Vec::with_capacity(tubes.len());
    for tube in tubes {
        let index = position.entry(tube.video_id.as_str()).or_insert(0);
        let key = (tube.video_id.as_str(), *index);
        *index += 1;
        let tun = match by_tube.remove(&key) {
            None => None,
            Some(mut streams) => {
                let a = streams.remove(&Stream::Appearance);
                let m = streams.remove(&Stream::Motion);
                match (a, m) {
                    (Some(a), Some(m)) => Some(fuse_tun_scores(&a, &m, fusion_cfg)?),
                    (a, m) => a.or(m),
                }
            }
        };
        out.push(rescore_tube(tube, tun.as_ref(), score_cfg)?);
    }
    if let Some(((video, index), _)) = by_tube.into_iter().next() {
        return Err(Error::validation(format!(
            "temporal-model scores for video {video} tube {index} match no tube"
        )));
    }
    Ok(out)
}

/// Labels a tubelet with the argmax of `scores`.
pub fn label_tube(video_id: &str, tubelet: &Tubelet, scores: ClassScores) -> Result<LabeledTube> {
    LabeledTube::new(
        video_id,
        tubelet.boxes.clone(),
        scores,
        tubelet.cumulative_link_score,
    )
}

/// Video-level prediction: the label of the tube with the highest score,
/// earliest tube on ties.
pub fn classify_video(tubes: &[LabeledTube]) -> Result<(usize, f64)> {
    let mut best: Option<&LabeledTube> = None;
    for t in tubes {
        if best.is_none_or(|b| t.predicted_score > b.predicted_score) {
            best = Some(t);
        }
    }
    best.map(|t| (t.predicted_class, t.predicted_score))
        .ok_or_else(|| Error::validation("cannot classify a video without tubes"))
}
