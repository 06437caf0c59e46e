//! Greedy trellis linking of per-frame proposals into tubelet proposals.
//!
//! Every proposal of frame 1 seeds a tubelet. At each later frame every
//! surviving tubelet is extended by the proposal with the highest linking
//! score against its previous region, the set is cut to the `top_k` highest
//! cumulative scores, and a final tube-level NMS removes overlapping
//! tubelets.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{aligned_tube_iou, iou_2d};
use crate::model::{BBox, ClassScores, RegionProposal, StreamDetections, Tubelet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmptyFramePolicy {
    #[default]
    Error,
    /// Hold each tubelet's last box through the empty frame without changing its score.
    CarryForward,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinkConfig {
    pub top_k: usize,
    pub nms_threshold: f64,
    pub empty_frame_policy: EmptyFramePolicy,
}

impl Default for LinkConfig {
    fn default() -> Self {
        Self {
            top_k: 10,
            nms_threshold: 0.3,
            empty_frame_policy: EmptyFramePolicy::Error,
        }
    }
}

impl LinkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.top_k == 0 {
            return Err(Error::validation("top_k must be at least 1"));
        }
        if !(self.nms_threshold > 0.0 && self.nms_threshold <= 1.0) {
            return Err(Error::validation(format!(
                "nms threshold {} outside (0, 1]",
                self.nms_threshold
            )));
        }
        Ok(())
    }
}

/// Class-agnostic confidence of a proposal: its highest class score.
pub fn objectness(p: &RegionProposal) -> Result<f64> {
    p.scores
        .max()
        .ok_or_else(|| Error::validation("objectness of a proposal without class scores"))
}

#[inline]
fn link_value(prev_objectness: f64, next_objectness: f64, overlap: f64) -> f64 {
    next_objectness + prev_objectness + overlap
}

/// Affinity between proposals of consecutive frames: both objectness
/// scores plus the IoU of their boxes.
pub fn linking_score(prev: &RegionProposal, next: &RegionProposal) -> Result<f64> {
    Ok(link_value(
        objectness(prev)?,
        objectness(next)?,
        iou_2d(&next.bbox, &prev.bbox),
    ))
}

struct Track {
    path: Vec<Option<usize>>,
    last_box: BBox,
    last_objectness: f64,
    score: f64,
    seed: usize,
}

fn rank(tracks: &mut [Track]) {
    tracks.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.seed.cmp(&b.seed)));
}

/// Links the proposals of `video` into at most `cfg.top_k` tubelets,
/// sorted by cumulative linking score, highest first.
pub fn generate_tubelets(video: &StreamDetections, cfg: &LinkConfig) -> Result<Vec<Tubelet>> {
    cfg.validate()?;
    let num_frames = video.num_frames();
    if num_frames == 0 {
        return Err(Error::validation("video has no frames"));
    }
    let objectness_by_frame = video
        .frames()
        .iter()
        .map(|f| f.proposals.iter().map(objectness).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;

    let first = video.frame(0);
    if first.is_empty() {
        return Err(Error::EmptyFrame { frame: 1 });
    }
    let mut tracks: Vec<Track> = first
        .iter()
        .enumerate()
        .map(|(i, p)| Track {
            path: vec![Some(i)],
            last_box: p.bbox,
            last_objectness: objectness_by_frame[0][i],
            score: 0.0,
            seed: i,
        })
        .collect();

    for (k, frame_objectness) in objectness_by_frame.iter().enumerate().skip(1) {
        let frame = video.frame(k);
        if frame.is_empty() {
            match cfg.empty_frame_policy {
                EmptyFramePolicy::Error => {
                    return Err(Error::EmptyFrame {
                        frame: k as u32 + 1,
                    })
                }
                EmptyFramePolicy::CarryForward => {
                    for track in &mut tracks {
                        track.path.push(None);
                        track.last_objectness = 0.0;
                    }
                }
            }
        } else {
            for track in &mut tracks {
                let mut best = 0;
                let mut best_score = f64::NEG_INFINITY;
                for (i, p) in frame.iter().enumerate() {
                    let score = link_value(
                        track.last_objectness,
                        frame_objectness[i],
                        iou_2d(&p.bbox, &track.last_box),
                    );
                    if score > best_score {
                        best = i;
                        best_score = score;
                    }
                }
                track.path.push(Some(best));
                track.last_box = frame[best].bbox;
                track.last_objectness = frame_objectness[best];
                track.score += best_score;
            }
        }
        rank(&mut tracks);
        tracks.truncate(cfg.top_k);
    }
    if num_frames == 1 {
        tracks.truncate(cfg.top_k);
    }

    let tubelets: Vec<Tubelet> = tracks.into_iter().map(|t| materialize(t, video)).collect();
    Ok(tube_nms(tubelets, cfg.nms_threshold))
}

fn materialize(track: Track, video: &StreamDetections) -> Tubelet {
    let num_classes = video.frame(0)[track.seed].scores.len();
    let mut boxes = Vec::with_capacity(track.path.len());
    let mut per_frame_scores = Vec::with_capacity(track.path.len());
    for (k, idx) in track.path.iter().enumerate() {
        match idx {
            Some(i) => {
                let p = &video.frame(k)[*i];
                boxes.push(p.bbox);
                per_frame_scores.push(p.scores.clone());
            }
            None => {
                let carried = *boxes.last().expect("frame 1 always has a region");
                boxes.push(carried);
                per_frame_scores.push(ClassScores::zeros(num_classes));
            }
        }
    }
    Tubelet {
        region_indices: track.path,
        boxes,
        per_frame_scores,
        cumulative_link_score: track.score,
        seed: track.seed,
    }
}

/// Recomputes a tubelet's cumulative linking score from its region indices.
pub fn tubelet_score(tubelet: &Tubelet, video: &StreamDetections) -> Result<f64> {
    if tubelet.region_indices.len() > video.num_frames() {
        return Err(Error::validation(format!(
            "tubelet spans {} frames but the video has {}",
            tubelet.region_indices.len(),
            video.num_frames()
        )));
    }
    let lookup = |k: usize, idx: Option<usize>| -> Result<Option<&RegionProposal>> {
        match idx {
            None if k == 0 => Err(Error::validation("tubelet has no region at frame 1")),
            None => Ok(None),
            Some(i) => video.frame(k).get(i).map(Some).ok_or_else(|| {
                Error::validation(format!(
                    "region index {i} out of range at frame {}",
                    k + 1
                ))
            }),
        }
    };

    let mut total = 0.0;
    let Some(&first) = tubelet.region_indices.first() else {
        return Ok(0.0);
    };
    let first = lookup(0, first)?.expect("checked above");
    let mut prev_box = first.bbox;
    let mut prev_objectness = objectness(first)?;
    for (k, &idx) in tubelet.region_indices.iter().enumerate().skip(1) {
        match lookup(k, idx)? {
            // carried box: zero increment, zero objectness going forward
            None => prev_objectness = 0.0,
            Some(p) => {
                let o = objectness(p)?;
                total += link_value(prev_objectness, o, iou_2d(&p.bbox, &prev_box));
                prev_box = p.bbox;
                prev_objectness = o;
            }
        }
    }
    Ok(total)
}

/// Greedy tube-level NMS over tubelets sorted by score, highest first.
///
/// A tubelet is dropped when its tube IoU with an already kept tubelet
/// exceeds `threshold`.
pub fn tube_nms(tubes: Vec<Tubelet>, threshold: f64) -> Vec<Tubelet> {
    let mut kept: Vec<Tubelet> = Vec::with_capacity(tubes.len());
    for tube in tubes {
        let suppressed = kept
            .iter()
            .any(|k| aligned_tube_iou(&k.boxes, &tube.boxes) > threshold);
        if !suppressed {
            kept.push(tube);
        }
    }
    kept
}
