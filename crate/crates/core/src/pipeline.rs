//! Run configuration and the per-video link-and-score path shared by the
//! command line and the browser demo.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::EvalConfig;
use crate::fusion::{fuse_video, FusionConfig};
use crate::linking::{generate_tubelets, LinkConfig};
use crate::model::{LabeledTube, VideoDetections};
use crate::scoring::{label_tube, tube_class_scores, ScoreConfig};

/// Which detection stream feeds the linker.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StreamMode {
    /// Appearance stream only.
    Rgb,
    /// Motion stream only.
    Flow,
    /// Appearance boxes carrying fused appearance/motion scores.
    #[default]
    Fused,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub stream: StreamMode,
    /// Worker threads for per-video processing; 0 uses every core.
    pub workers: usize,
    pub link: LinkConfig,
    pub fusion: FusionConfig,
    pub score: ScoreConfig,
    pub eval: EvalConfig,
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.link.validate()?;
        self.fusion.validate()?;
        self.score.validate()?;
        self.eval.validate()
    }
}

/// Links one video and labels each tubelet with its averaged detector scores.
pub fn link_video(video: &VideoDetections, cfg: &PipelineConfig) -> Result<Vec<LabeledTube>> {
    let fused;
    let stream = match cfg.stream {
        StreamMode::Rgb => video.appearance(),
        StreamMode::Flow => video.motion().ok_or_else(|| {
            Error::validation(format!("video {}: no motion stream", video.video_id()))
        })?,
        StreamMode::Fused => {
            fused = fuse_video(video, &cfg.fusion)?;
            &fused.detections
        }
    };
    generate_tubelets(stream, &cfg.link)?
        .iter()
        .map(|t| {
            let scores = tube_class_scores(t, None, &cfg.score)?;
            label_tube(video.video_id(), t, scores)
        })
        .collect()
}
