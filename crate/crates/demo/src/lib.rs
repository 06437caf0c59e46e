//! WebAssembly bindings for the browser demo.
//!
//! Every export takes plain numbers and returns a JSON string, so the page
//! needs no generated TypeScript types. The functions also run natively.

use serde::Serialize;
use serde_json::json;
use tubelet_core::{
    iou_2d, link_video, synth_corpus, video_map, BBox, EvalConfig, FusionConfig, LabeledTube,
    LinkConfig, PipelineConfig, StreamMode, SynthConfig,
};
use wasm_bindgen::prelude::*;

#[derive(Serialize)]
struct LinkView {
    width: f64,
    height: f64,
    frames: Vec<Vec<[f64; 4]>>,
    truth: Vec<[f64; 4]>,
    label: usize,
    tubes: Vec<TubeView>,
}

#[derive(Serialize)]
struct TubeView {
    boxes: Vec<[f64; 4]>,
    class: usize,
    score: f64,
    link_score: f64,
}

fn error_json(msg: impl std::fmt::Display) -> String {
    json!({ "error": msg.to_string() }).to_string()
}

/// Synthesizes one video and links its detections.
#[wasm_bindgen]
pub fn link_demo(
    seed: u32,
    frames: u32,
    distractors: u32,
    jitter: f64,
    top_k: u32,
    nms: f64,
) -> String {
    let synth = SynthConfig {
        num_videos: 1,
        frames_per_video: frames as usize,
        proposals_per_actor: 2,
        distractors: distractors as usize,
        box_jitter: jitter,
        score_noise: 0.2,
        seed: seed as u64,
        ..SynthConfig::default()
    };
    let cfg = PipelineConfig {
        link: LinkConfig {
            top_k: top_k as usize,
            nms_threshold: nms,
            ..LinkConfig::default()
        },
        ..PipelineConfig::default()
    };
    let run = || -> tubelet_core::Result<LinkView> {
        cfg.validate()?;
        let (videos, gts) = synth_corpus(&synth)?;
        let tubes = link_video(&videos[0], &cfg)?;
        Ok(LinkView {
            width: synth.frame_width,
            height: synth.frame_height,
            frames: videos[0]
                .appearance()
                .frames()
                .iter()
                .map(|f| f.proposals.iter().map(|p| p.bbox.to_array()).collect())
                .collect(),
            truth: gts[0].boxes().iter().map(|(_, b)| b.to_array()).collect(),
            label: gts[0].class_label(),
            tubes: tubes
                .into_iter()
                .map(|t| TubeView {
                    boxes: t.boxes.iter().map(BBox::to_array).collect(),
                    class: t.predicted_class,
                    score: t.predicted_score,
                    link_score: t.link_score,
                })
                .collect(),
        })
    };
    match run() {
        Ok(view) => serde_json::to_string(&view).unwrap_or_else(error_json),
        Err(e) => error_json(e),
    }
}

/// Overlap of two boxes given as corner coordinates.
#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn iou_demo(ax1: f64, ay1: f64, ax2: f64, ay2: f64, bx1: f64, by1: f64, bx2: f64, by2: f64) -> String {
    let boxes = BBox::new(ax1, ay1, ax2, ay2).and_then(|a| Ok((a, BBox::new(bx1, by1, bx2, by2)?)));
    match boxes {
        Ok((a, b)) => json!({ "iou": iou_2d(&a, &b) }).to_string(),
        Err(e) => error_json(e),
    }
}

/// Video-mAP of each stream on a noisy corpus while sweeping the fusion weight.
#[wasm_bindgen]
pub fn fusion_demo(seed: u32, videos: u32, delta: f64, steps: u32) -> String {
    let synth = SynthConfig {
        num_videos: videos as usize,
        frames_per_video: 15,
        num_classes: 4,
        proposals_per_actor: 2,
        distractors: 3,
        box_jitter: 6.0,
        score_noise: 0.3,
        seed: seed as u64,
        ..SynthConfig::default()
    };
    let eval = EvalConfig {
        iou_thresholds: vec![delta],
    };
    let run = || -> tubelet_core::Result<serde_json::Value> {
        let (corpus, gts) = synth_corpus(&synth)?;
        let map_for = |stream: StreamMode, lambda2: f64| -> tubelet_core::Result<f64> {
            let cfg = PipelineConfig {
                stream,
                fusion: FusionConfig { lambda2 },
                eval: eval.clone(),
                ..PipelineConfig::default()
            };
            cfg.validate()?;
            let mut tubes: Vec<LabeledTube> = Vec::new();
            for v in &corpus {
                tubes.extend(link_video(v, &cfg)?);
            }
            Ok(video_map(&tubes, &gts, &cfg.eval)?.thresholds[0].map)
        };
        let steps = steps.max(1);
        let mut sweep = Vec::new();
        for k in 0..=steps {
            let lambda2 = k as f64 / steps as f64;
            sweep.push(json!({ "lambda2": lambda2, "map": map_for(StreamMode::Fused, lambda2)? }));
        }
        Ok(json!({
            "rgb": map_for(StreamMode::Rgb, 1.0)?,
            "flow": map_for(StreamMode::Flow, 1.0)?,
            "sweep": sweep,
        }))
    };
    match run() {
        Ok(v) => v.to_string(),
        Err(e) => error_json(e),
    }
}
