//! Domain types shared by every stage of the pipeline.
//!
//! All types validate on construction and are immutable afterwards. Frame
//! indices are 1-based; proposal indices are 0-based positions within a frame.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Axis-aligned box in corner form with continuous pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    x1: f64,
    y1: f64,
    x2: f64,
    y2: f64,
}

impl BBox {
    pub fn new(x1: f64, y1: f64, x2: f64, y2: f64) -> Result<Self> {
        let finite = [x1, y1, x2, y2].iter().all(|v| v.is_finite());
        if !finite || x2 < x1 || y2 < y1 {
            return Err(Error::InvalidBox { x1, y1, x2, y2 });
        }
        Ok(Self { x1, y1, x2, y2 })
    }

    pub fn x1(&self) -> f64 {
        self.x1
    }

    pub fn y1(&self) -> f64 {
        self.y1
    }

    pub fn x2(&self) -> f64 {
        self.x2
    }

    pub fn y2(&self) -> f64 {
        self.y2
    }

    pub fn width(&self) -> f64 {
        self.x2 - self.x1
    }

    pub fn height(&self) -> f64 {
        self.y2 - self.y1
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.x1, self.y1, self.x2, self.y2]
    }
}

impl TryFrom<[f64; 4]> for BBox {
    type Error = Error;

    fn try_from(v: [f64; 4]) -> Result<Self> {
        BBox::new(v[0], v[1], v[2], v[3])
    }
}

impl Serialize for BBox {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.to_array().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for BBox {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = <[f64; 4]>::deserialize(deserializer)?;
        BBox::try_from(raw).map_err(serde::de::Error::custom)
    }
}

/// Per-class action confidences, background excluded.
///
/// Scores are raw detector outputs: they need not be probabilities and need
/// not sum to one, but every entry must be finite.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct ClassScores(Vec<f64>);

impl ClassScores {
    pub fn new(scores: Vec<f64>) -> Result<Self> {
        if let Some(bad) = scores.iter().find(|v| !v.is_finite()) {
            return Err(Error::validation(format!("non-finite class score {bad}")));
        }
        Ok(Self(scores))
    }

    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn get(&self, class: usize) -> Option<f64> {
        self.0.get(class).copied()
    }

    /// Highest score and its class; ties go to the lowest class index.
    pub fn argmax(&self) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for (c, &s) in self.0.iter().enumerate() {
            match best {
                Some((_, b)) if s <= b => {}
                _ => best = Some((c, s)),
            }
        }
        best
    }

    pub fn max(&self) -> Option<f64> {
        self.argmax().map(|(_, s)| s)
    }

    pub(crate) fn from_raw(scores: Vec<f64>) -> Self {
        debug_assert!(scores.iter().all(|v| v.is_finite()));
        Self(scores)
    }
}

impl<'de> Deserialize<'de> for ClassScores {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = Vec::<f64>::deserialize(deserializer)?;
        ClassScores::new(raw).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionProposal {
    #[serde(rename = "box")]
    pub bbox: BBox,
    pub scores: ClassScores,
}

impl RegionProposal {
    pub fn new(bbox: BBox, scores: ClassScores) -> Self {
        Self { bbox, scores }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameProposals {
    pub frame_index: u32,
    pub proposals: Vec<RegionProposal>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stream {
    Appearance,
    Motion,
}

impl fmt::Display for Stream {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stream::Appearance => "appearance",
            Stream::Motion => "motion",
        })
    }
}

/// Proposals for frames `1..=T` of one stream.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamDetections {
    stream: Stream,
    frames: Vec<FrameProposals>,
}

impl StreamDetections {
    /// Frames must be numbered 1, 2, ..., T with T >= 1.
    pub fn new(stream: Stream, frames: Vec<FrameProposals>) -> Result<Self> {
        if frames.is_empty() {
            return Err(Error::validation(format!("{stream} stream has no frames")));
        }
        for (k, frame) in frames.iter().enumerate() {
            let expected = k as u32 + 1;
            if frame.frame_index != expected {
                return Err(Error::NonContiguousFrames {
                    video_id: String::new(),
                    stream: stream.to_string(),
                    expected,
                    found: frame.frame_index,
                });
            }
        }
        Ok(Self { stream, frames })
    }

    /// Builds a stream from per-frame proposal lists, numbering frames from 1.
    pub fn from_proposals(stream: Stream, frames: Vec<Vec<RegionProposal>>) -> Result<Self> {
        let frames = frames
            .into_iter()
            .enumerate()
            .map(|(k, proposals)| FrameProposals {
                frame_index: k as u32 + 1,
                proposals,
            })
            .collect();
        Self::new(stream, frames)
    }

    pub fn stream(&self) -> Stream {
        self.stream
    }

    pub fn frames(&self) -> &[FrameProposals] {
        &self.frames
    }

    pub fn num_frames(&self) -> usize {
        self.frames.len()
    }

    /// Proposals of frame `k`, 0-based.
    pub fn frame(&self, k: usize) -> &[RegionProposal] {
        &self.frames[k].proposals
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VideoDetections {
    video_id: String,
    class_names: Vec<String>,
    appearance: StreamDetections,
    motion: Option<StreamDetections>,
}

impl VideoDetections {
    pub fn new(
        video_id: impl Into<String>,
        class_names: Vec<String>,
        appearance: StreamDetections,
        motion: Option<StreamDetections>,
    ) -> Result<Self> {
        let video_id = video_id.into();
        if class_names.is_empty() {
            return Err(Error::validation(format!(
                "video {video_id}: class list is empty"
            )));
        }
        if appearance.stream() != Stream::Appearance {
            return Err(Error::validation(format!(
                "video {video_id}: appearance slot holds a {} stream",
                appearance.stream()
            )));
        }
        if let Some(m) = &motion {
            if m.stream() != Stream::Motion {
                return Err(Error::validation(format!(
                    "video {video_id}: motion slot holds a {} stream",
                    m.stream()
                )));
            }
            if m.num_frames() != appearance.num_frames() {
                return Err(Error::StreamLengthMismatch {
                    video_id,
                    appearance: appearance.num_frames(),
                    motion: m.num_frames(),
                });
            }
        }
        let expected = class_names.len();
        for stream in std::iter::once(&appearance).chain(motion.as_ref()) {
            for frame in stream.frames() {
                for p in &frame.proposals {
                    if p.scores.len() != expected {
                        return Err(Error::InconsistentClassCount {
                            video_id,
                            expected,
                            found: p.scores.len(),
                        });
                    }
                }
            }
        }
        Ok(Self {
            video_id,
            class_names,
            appearance,
            motion,
        })
    }

    pub fn video_id(&self) -> &str {
        &self.video_id
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn num_frames(&self) -> usize {
        self.appearance.num_frames()
    }

    pub fn appearance(&self) -> &StreamDetections {
        &self.appearance
    }

    pub fn motion(&self) -> Option<&StreamDetections> {
        self.motion.as_ref()
    }

    pub fn stream(&self, stream: Stream) -> Option<&StreamDetections> {
        match stream {
            Stream::Appearance => Some(&self.appearance),
            Stream::Motion => self.motion.as_ref(),
        }
    }
}

/// A path through the detection trellis produced by the linker.
///
/// `region_indices[k]` is the proposal linked at frame `k + 1`, or `None`
/// where the frame was empty and the previous box was carried forward.
#[derive(Debug, Clone, PartialEq)]
pub struct Tubelet {
    pub region_indices: Vec<Option<usize>>,
    pub boxes: Vec<BBox>,
    pub per_frame_scores: Vec<ClassScores>,
    pub cumulative_link_score: f64,
    /// Position of the frame-1 proposal this tubelet grew from.
    pub seed: usize,
}

impl Tubelet {
    pub fn len(&self) -> usize {
        self.boxes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.boxes.is_empty()
    }

    /// Boxes keyed by 1-based frame index.
    pub fn framed_boxes(&self) -> Vec<(u32, BBox)> {
        self.boxes
            .iter()
            .enumerate()
            .map(|(k, b)| (k as u32 + 1, *b))
            .collect()
    }
}

/// A tube with video-level class scores and its predicted label.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LabeledTube {
    pub video_id: String,
    pub boxes: Vec<BBox>,
    pub class_scores: ClassScores,
    pub predicted_class: usize,
    pub predicted_score: f64,
    pub link_score: f64,
}

impl LabeledTube {
    /// Labels the tube with the argmax of `class_scores` (lowest class on ties).
    pub fn new(
        video_id: impl Into<String>,
        boxes: Vec<BBox>,
        class_scores: ClassScores,
        link_score: f64,
    ) -> Result<Self> {
        let video_id = video_id.into();
        if boxes.is_empty() {
            return Err(Error::validation(format!("video {video_id}: tube has no boxes")));
        }
        if !link_score.is_finite() {
            return Err(Error::validation(format!(
                "video {video_id}: non-finite link score"
            )));
        }
        let (predicted_class, predicted_score) = class_scores.argmax().ok_or_else(|| {
            Error::validation(format!("video {video_id}: tube has no class scores"))
        })?;
        Ok(Self {
            video_id,
            boxes,
            class_scores,
            predicted_class,
            predicted_score,
            link_score,
        })
    }

    pub fn framed_boxes(&self) -> Vec<(u32, BBox)> {
        self.boxes
            .iter()
            .enumerate()
            .map(|(k, b)| (k as u32 + 1, *b))
            .collect()
    }
}

#[derive(Deserialize)]
struct RawLabeledTube {
    video_id: String,
    boxes: Vec<BBox>,
    class_scores: ClassScores,
    predicted_class: usize,
    predicted_score: f64,
    link_score: f64,
}

impl<'de> Deserialize<'de> for LabeledTube {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        use serde::de::Error as _;
        let raw = RawLabeledTube::deserialize(deserializer)?;
        let tube = LabeledTube::new(raw.video_id, raw.boxes, raw.class_scores, raw.link_score)
            .map_err(D::Error::custom)?;
        if tube.predicted_class != raw.predicted_class
            || tube.predicted_score != raw.predicted_score
        {
            return Err(D::Error::custom(format!(
                "predicted class/score ({}, {}) is not the argmax of class_scores ({}, {})",
                raw.predicted_class, raw.predicted_score, tube.predicted_class, tube.predicted_score
            )));
        }
        Ok(tube)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthTube {
    video_id: String,
    class_label: usize,
    boxes: Vec<(u32, BBox)>,
}

impl GroundTruthTube {
    pub fn new(
        video_id: impl Into<String>,
        class_label: usize,
        boxes: Vec<(u32, BBox)>,
    ) -> Result<Self> {
        let video_id = video_id.into();
        if boxes.is_empty() {
            return Err(Error::validation(format!(
                "video {video_id}: ground-truth tube has no boxes"
            )));
        }
        if boxes.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::validation(format!(
                "video {video_id}: ground-truth frame indices are not strictly increasing"
            )));
        }
        if boxes[0].0 == 0 {
            return Err(Error::validation(format!(
                "video {video_id}: frame indices start at 1"
            )));
        }
        Ok(Self {
            video_id,
            class_label,
            boxes,
        })
    }

    pub fn video_id(&self) -> &str {
        &self.video_id
    }

    pub fn class_label(&self) -> usize {
        self.class_label
    }

    pub fn boxes(&self) -> &[(u32, BBox)] {
        &self.boxes
    }
}

#[derive(Serialize, Deserialize)]
struct RawGroundTruth {
    video_id: String,
    label: usize,
    boxes: Vec<(u32, f64, f64, f64, f64)>,
}

impl Serialize for GroundTruthTube {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        RawGroundTruth {
            video_id: self.video_id.clone(),
            label: self.class_label,
            boxes: self
                .boxes
                .iter()
                .map(|(t, b)| (*t, b.x1, b.y1, b.x2, b.y2))
                .collect(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for GroundTruthTube {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        use serde::de::Error as _;
        let raw = RawGroundTruth::deserialize(deserializer)?;
        let boxes = raw
            .boxes
            .into_iter()
            .map(|(t, x1, y1, x2, y2)| BBox::new(x1, y1, x2, y2).map(|b| (t, b)))
            .collect::<Result<Vec<_>>>()
            .map_err(D::Error::custom)?;
        GroundTruthTube::new(raw.video_id, raw.label, boxes).map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bx(x1: f64, y1: f64, x2: f64, y2: f64) -> BBox {
        BBox::new(x1, y1, x2, y2).unwrap()
    }

    #[test]
    fn bbox_rejects_negative_extent_and_non_finite() {
        assert!(BBox::new(1.0, 0.0, 0.0, 1.0).is_err());
        assert!(BBox::new(0.0, 1.0, 1.0, 0.5).is_err());
        assert!(BBox::new(f64::NAN, 0.0, 1.0, 1.0).is_err());
        assert!(BBox::new(0.0, 0.0, f64::INFINITY, 1.0).is_err());
        // zero area is allowed
        assert_eq!(bx(2.0, 2.0, 2.0, 5.0).area(), 0.0);
    }

    #[test]
    fn class_scores_reject_non_finite() {
        assert!(ClassScores::new(vec![0.1, f64::NAN]).is_err());
        assert!(ClassScores::new(vec![-3.0, 7.5]).is_ok());
    }

    #[test]
    fn argmax_ties_go_low() {
        let s = ClassScores::new(vec![0.5, 0.5]).unwrap();
        assert_eq!(s.argmax(), Some((0, 0.5)));
        let s = ClassScores::new(vec![0.1, 0.9, 0.3]).unwrap();
        assert_eq!(s.argmax(), Some((1, 0.9)));
        assert_eq!(ClassScores::new(vec![]).unwrap().argmax(), None);
    }

    #[test]
    fn stream_requires_contiguous_frames() {
        let p = RegionProposal::new(bx(0.0, 0.0, 1.0, 1.0), ClassScores::zeros(1));
        let frames = vec![
            FrameProposals {
                frame_index: 1,
                proposals: vec![p.clone()],
            },
            FrameProposals {
                frame_index: 3,
                proposals: vec![p],
            },
        ];
        assert!(matches!(
            StreamDetections::new(Stream::Appearance, frames),
            Err(Error::NonContiguousFrames { expected: 2, found: 3, .. })
        ));
        assert!(StreamDetections::new(Stream::Appearance, vec![]).is_err());
    }

    #[test]
    fn video_checks_class_count_and_stream_lengths() {
        let p3 = RegionProposal::new(bx(0.0, 0.0, 1.0, 1.0), ClassScores::zeros(3));
        let p2 = RegionProposal::new(bx(0.0, 0.0, 1.0, 1.0), ClassScores::zeros(2));
        let names: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        let app = StreamDetections::from_proposals(Stream::Appearance, vec![vec![p3.clone()]])
            .unwrap();
        let bad = StreamDetections::from_proposals(Stream::Appearance, vec![vec![p2]]).unwrap();
        assert!(matches!(
            VideoDetections::new("v", names.clone(), bad, None),
            Err(Error::InconsistentClassCount { expected: 3, found: 2, .. })
        ));
        let motion = StreamDetections::from_proposals(
            Stream::Motion,
            vec![vec![p3.clone()], vec![p3.clone()]],
        )
        .unwrap();
        assert!(matches!(
            VideoDetections::new("v", names, app, Some(motion)),
            Err(Error::StreamLengthMismatch { .. })
        ));
    }

    #[test]
    fn labeled_tube_rejects_forged_prediction() {
        let line = r#"{"video_id":"v","boxes":[[0,0,1,1]],"class_scores":[0.1,0.9],"predicted_class":0,"predicted_score":0.1,"link_score":0}"#;
        assert!(serde_json::from_str::<LabeledTube>(line).is_err());
        let line = r#"{"video_id":"v","boxes":[[0,0,1,1]],"class_scores":[0.1,0.9],"predicted_class":1,"predicted_score":0.9,"link_score":0}"#;
        let tube: LabeledTube = serde_json::from_str(line).unwrap();
        assert_eq!(tube.predicted_class, 1);
    }

    #[test]
    fn ground_truth_frames_strictly_increase() {
        let b = bx(0.0, 0.0, 1.0, 1.0);
        assert!(GroundTruthTube::new("v", 0, vec![(2, b), (2, b)]).is_err());
        assert!(GroundTruthTube::new("v", 0, vec![]).is_err());
        let gt: GroundTruthTube =
            serde_json::from_str(r#"{"video_id":"v","label":2,"boxes":[[1,0,0,4,4],[3,1,1,5,5]]}"#)
                .unwrap();
        assert_eq!(gt.class_label(), 2);
        assert_eq!(gt.boxes()[1].0, 3);
    }
}
