//! Class-independent tubelet proposals from per-frame action detections.
//!
//! Per-frame region proposals are linked into tubelets by a greedy,
//! top-K-pruned walk over the detection trellis, optionally after fusing an
//! appearance and a motion detection stream. Tubelets are scored per class,
//! optionally folding in scores from an external temporal model, and the
//! labelled tubes are evaluated with video-mAP.

pub mod error;
pub mod evaluation;
pub mod fusion;
pub mod geometry;
pub mod io;
pub mod linking;
pub mod model;
pub mod oracle;
pub mod pipeline;
pub mod scoring;
pub mod synth;

pub use error::{Error, Result};
pub use evaluation::{average_precision, match_tubes, video_map, EvalConfig, EvalReport};
pub use fusion::{correspond, fuse_frame_scores, fuse_video, FusionConfig, FusedStream};
pub use geometry::{iou_2d, tube_iou};
pub use linking::{
    generate_tubelets, linking_score, objectness, tube_nms, tubelet_score, EmptyFramePolicy,
    LinkConfig,
};
pub use model::{
    BBox, ClassScores, FrameProposals, GroundTruthTube, LabeledTube, RegionProposal, Stream,
    StreamDetections, Tubelet, VideoDetections,
};
pub use oracle::{dp_optimal_path, enumerate_paths, ScoredPath};
pub use pipeline::{link_video, PipelineConfig, StreamMode};
pub use scoring::{classify_video, label_tube, tube_class_scores, ScoreConfig, TunScores};
pub use synth::{synth_corpus, SynthConfig};
