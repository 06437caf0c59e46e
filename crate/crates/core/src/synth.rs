//! Deterministic synthetic detection corpora with known ground truth.
//!
//! Each video holds one actor moving at constant velocity (bouncing off the
//! frame border) and a number of distractors moving the same way. Detector
//! proposals are jittered copies of those boxes. The actor's proposals score
//! high on the true class; distractors score low on every class.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    BBox, ClassScores, GroundTruthTube, RegionProposal, Stream, StreamDetections, VideoDetections,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub num_videos: usize,
    pub frames_per_video: usize,
    pub num_classes: usize,
    /// Jittered proposals emitted around the actor in each frame.
    pub proposals_per_actor: usize,
    /// Distractor tracks per video, each contributing one proposal per frame.
    pub distractors: usize,
    /// Standard deviation of per-coordinate box jitter, in pixels.
    pub box_jitter: f64,
    /// Standard deviation of score noise; zero gives fixed scores.
    pub score_noise: f64,
    pub frame_width: f64,
    pub frame_height: f64,
    pub min_box_size: f64,
    pub max_box_size: f64,
    pub motion: bool,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            num_videos: 20,
            frames_per_video: 20,
            num_classes: 3,
            proposals_per_actor: 1,
            distractors: 5,
            box_jitter: 0.0,
            score_noise: 0.0,
            frame_width: 320.0,
            frame_height: 240.0,
            min_box_size: 40.0,
            max_box_size: 100.0,
            motion: true,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_videos == 0
            || self.frames_per_video == 0
            || self.num_classes == 0
            || self.proposals_per_actor == 0
        {
            return Err(Error::validation(
                "synthetic corpus counts must all be at least 1",
            ));
        }
        let sizes_ok = self.min_box_size > 0.0
            && self.min_box_size <= self.max_box_size
            && self.max_box_size < self.frame_width.min(self.frame_height);
        if !sizes_ok {
            return Err(Error::validation(
                "box sizes must satisfy 0 < min <= max < frame size",
            ));
        }
        if !(self.box_jitter >= 0.0 && self.score_noise >= 0.0) {
            return Err(Error::validation("noise levels must be non-negative"));
        }
        Ok(())
    }
}

/// Score profile of one stream: base score of the true class, of one
/// per-video confuser class, and of every other class.
#[derive(Clone, Copy)]
struct StreamProfile {
    true_class: f64,
    confuser: f64,
    other: f64,
}

// Motion separates the classes more clearly than appearance.
const APPEARANCE: StreamProfile = StreamProfile {
    true_class: 0.9,
    confuser: 0.3,
    other: 0.05,
};
const MOTION: StreamProfile = StreamProfile {
    true_class: 0.9,
    confuser: 0.15,
    other: 0.05,
};
const DISTRACTOR_SCORE: f64 = 0.1;

struct Track {
    x: f64,
    y: f64,
    w: f64,
    h: f64,
    vx: f64,
    vy: f64,
}

impl Track {
    fn random(cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> Self {
        let w = rng.random_range(cfg.min_box_size..=cfg.max_box_size);
        let h = rng.random_range(cfg.min_box_size..=cfg.max_box_size);
        Self {
            x: rng.random_range(0.0..=cfg.frame_width - w),
            y: rng.random_range(0.0..=cfg.frame_height - h),
            w,
            h,
            vx: rng.random_range(-3.0..=3.0),
            vy: rng.random_range(-2.0..=2.0),
        }
    }

    fn bbox(&self) -> BBox {
        BBox::new(self.x, self.y, self.x + self.w, self.y + self.h).expect("positive size")
    }

    fn step(&mut self, cfg: &SynthConfig) {
        let bounce = |pos: &mut f64, vel: &mut f64, limit: f64| {
            *pos += *vel;
            if *pos < 0.0 {
                *pos = -*pos;
                *vel = -*vel;
            } else if *pos > limit {
                *pos = 2.0 * limit - *pos;
                *vel = -*vel;
            }
        };
        bounce(&mut self.x, &mut self.vx, cfg.frame_width - self.w);
        bounce(&mut self.y, &mut self.vy, cfg.frame_height - self.h);
    }
}

fn jitter(b: &BBox, sigma: f64, rng: &mut ChaCha8Rng) -> BBox {
    if sigma == 0.0 {
        return *b;
    }
    let noise = Normal::new(0.0, sigma).expect("sigma is finite and positive");
    let c = b.to_array().map(|v| v + noise.sample(rng));
    BBox::new(c[0].min(c[2]), c[1].min(c[3]), c[0].max(c[2]), c[1].max(c[3]))
        .expect("finite coordinates")
}

fn noisy(base: f64, sigma: f64, rng: &mut ChaCha8Rng) -> f64 {
    if sigma == 0.0 {
        return base;
    }
    let noise = Normal::new(0.0, sigma).expect("sigma is finite and positive");
    (base + noise.sample(rng)).clamp(0.0, 1.0)
}

struct VideoPlan {
    label: usize,
    confuser: Option<usize>,
    actor_boxes: Vec<BBox>,
    distractor_boxes: Vec<Vec<BBox>>,
}

fn plan_video(cfg: &SynthConfig, index: usize, rng: &mut ChaCha8Rng) -> VideoPlan {
    let label = index % cfg.num_classes;
    let confuser = (cfg.num_classes > 1).then(|| {
        let offset = rng.random_range(1..cfg.num_classes);
        (label + offset) % cfg.num_classes
    });
    let mut actor = Track::random(cfg, rng);
    let mut distractors: Vec<Track> = (0..cfg.distractors).map(|_| Track::random(cfg, rng)).collect();
    let mut actor_boxes = Vec::with_capacity(cfg.frames_per_video);
    let mut distractor_boxes = Vec::with_capacity(cfg.frames_per_video);
    for _ in 0..cfg.frames_per_video {
        actor_boxes.push(actor.bbox());
        distractor_boxes.push(distractors.iter().map(Track::bbox).collect());
        actor.step(cfg);
        distractors.iter_mut().for_each(|d| d.step(cfg));
    }
    VideoPlan {
        label,
        confuser,
        actor_boxes,
        distractor_boxes,
    }
}

fn render_stream(
    cfg: &SynthConfig,
    plan: &VideoPlan,
    profile: StreamProfile,
    stream: Stream,
    rng: &mut ChaCha8Rng,
) -> StreamDetections {
    // persistent per-video bias, independent per stream
    let bias: Vec<f64> = (0..cfg.num_classes)
        .map(|_| noisy(0.5, cfg.score_noise, rng) - 0.5)
        .collect();
    let actor_scores = |rng: &mut ChaCha8Rng| {
        let scores = (0..cfg.num_classes)
            .map(|c| {
                let base = if c == plan.label {
                    profile.true_class
                } else if Some(c) == plan.confuser {
                    profile.confuser
                } else {
                    profile.other
                };
                if cfg.score_noise == 0.0 {
                    base
                } else {
                    noisy(base + bias[c], cfg.score_noise, rng)
                }
            })
            .collect();
        ClassScores::new(scores).expect("finite scores")
    };
    let distractor_scores = |rng: &mut ChaCha8Rng| {
        let scores = (0..cfg.num_classes)
            .map(|_| {
                if cfg.score_noise == 0.0 {
                    DISTRACTOR_SCORE
                } else {
                    rng.random_range(0.0..0.3)
                }
            })
            .collect();
        ClassScores::new(scores).expect("finite scores")
    };

    let frames = plan
        .actor_boxes
        .iter()
        .zip(&plan.distractor_boxes)
        .map(|(actor, distractors)| {
            let mut proposals: Vec<RegionProposal> = (0..cfg.proposals_per_actor)
                .map(|_| {
                    let b = jitter(actor, cfg.box_jitter, rng);
                    RegionProposal::new(b, actor_scores(rng))
                })
                .collect();
            for d in distractors {
                let b = jitter(d, cfg.box_jitter, rng);
                proposals.push(RegionProposal::new(b, distractor_scores(rng)));
            }
            proposals.shuffle(rng);
            proposals
        })
        .collect();
    StreamDetections::from_proposals(stream, frames).expect("at least one frame")
}

/// Generates `cfg.num_videos` videos and their ground-truth tubes.
///
/// Video `i` is labelled `i mod num_classes`; the same seed always yields
/// the same corpus.
pub fn synth_corpus(cfg: &SynthConfig) -> Result<(Vec<VideoDetections>, Vec<GroundTruthTube>)> {
    cfg.validate()?;
    let class_names: Vec<String> = (0..cfg.num_classes).map(|c| format!("class_{c}")).collect();
    let mut videos = Vec::with_capacity(cfg.num_videos);
    let mut gts = Vec::with_capacity(cfg.num_videos);
    for index in 0..cfg.num_videos {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(index as u64);
        let plan = plan_video(cfg, index, &mut rng);
        let appearance = render_stream(cfg, &plan, APPEARANCE, Stream::Appearance, &mut rng);
        let motion = cfg
            .motion
            .then(|| render_stream(cfg, &plan, MOTION, Stream::Motion, &mut rng));
        let video_id = format!("video_{index:04}");
        gts.push(GroundTruthTube::new(
            video_id.clone(),
            plan.label,
            plan.actor_boxes
                .iter()
                .enumerate()
                .map(|(k, b)| (k as u32 + 1, *b))
                .collect(),
        )?);
        videos.push(VideoDetections::new(
            video_id,
            class_names.clone(),
            appearance,
            motion,
        )?);
    }
    Ok((videos, gts))
}
