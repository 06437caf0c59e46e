//! Appearance/motion correspondence and convex score fusion.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::iou_2d;
use crate::model::{
    ClassScores, FrameProposals, RegionProposal, Stream, StreamDetections, VideoDetections,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FusionConfig {
    /// Weight on the appearance stream; the motion stream gets `1 - lambda2`.
    pub lambda2: f64,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self { lambda2: 1.0 / 3.0 }
    }
}

impl FusionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.lambda2) {
            return Err(Error::validation(format!(
                "lambda2 {} outside [0, 1]",
                self.lambda2
            )));
        }
        Ok(())
    }
}

/// Index of the motion proposal overlapping `rgb` the most; lowest index on ties.
pub fn correspond(rgb: &RegionProposal, flow_frame: &FrameProposals) -> Result<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (k, p) in flow_frame.proposals.iter().enumerate() {
        let overlap = iou_2d(&rgb.bbox, &p.bbox);
        if best.is_none_or(|(_, b)| overlap > b) {
            best = Some((k, overlap));
        }
    }
    best.map(|(k, _)| k).ok_or(Error::EmptyFrame {
        frame: flow_frame.frame_index,
    })
}

/// Per-class `lambda2 * rgb + (1 - lambda2) * flow`.
pub fn fuse_frame_scores(
    rgb: &ClassScores,
    flow: &ClassScores,
    cfg: &FusionConfig,
) -> Result<ClassScores> {
    if rgb.len() != flow.len() {
        return Err(Error::validation(format!(
            "cannot fuse {} appearance scores with {} motion scores",
            rgb.len(),
            flow.len()
        )));
    }
    let w = cfg.lambda2;
    let fused = rgb
        .as_slice()
        .iter()
        .zip(flow.as_slice())
        .map(|(s, f)| w * s + (1.0 - w) * f)
        .collect();
    Ok(ClassScores::from_raw(fused))
}

/// Appearance stream carrying fused scores, plus the motion proposal each
/// appearance proposal was matched to.
#[derive(Debug, Clone, PartialEq)]
pub struct FusedStream {
    pub detections: StreamDetections,
    /// `correspondence[k][i]` is the motion index matched to appearance proposal `i` of frame `k + 1`.
    pub correspondence: Vec<Vec<usize>>,
}

/// Keeps every appearance box and replaces its scores with the fusion of its
/// own scores and those of the best-overlapping motion proposal.
pub fn fuse_video(video: &VideoDetections, cfg: &FusionConfig) -> Result<FusedStream> {
    cfg.validate()?;
    let motion = video.motion().ok_or_else(|| {
        Error::validation(format!("video {}: no motion stream to fuse", video.video_id()))
    })?;
    let mut frames = Vec::with_capacity(video.num_frames());
    let mut correspondence = Vec::with_capacity(video.num_frames());
    for (rgb_frame, flow_frame) in video.appearance().frames().iter().zip(motion.frames()) {
        if flow_frame.proposals.is_empty() {
            return Err(Error::EmptyFrame {
                frame: flow_frame.frame_index,
            });
        }
        let mut matches = Vec::with_capacity(rgb_frame.proposals.len());
        let mut fused = Vec::with_capacity(rgb_frame.proposals.len());
        for p in &rgb_frame.proposals {
            let j = correspond(p, flow_frame)?;
            let scores = fuse_frame_scores(&p.scores, &flow_frame.proposals[j].scores, cfg)?;
            matches.push(j);
            fused.push(RegionProposal::new(p.bbox, scores));
        }
        frames.push(FrameProposals {
            frame_index: rgb_frame.frame_index,
            proposals: fused,
        });
        correspondence.push(matches);
    }
    Ok(FusedStream {
        detections: StreamDetections::new(Stream::Appearance, frames)?,
        correspondence,
    })
}
