//! JSON Lines readers and writers for detection, tube, ground-truth and
//! temporal-score files.
//!
//! Floats are written in shortest round-trip form, so `parse(write(x)) == x`.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    FrameProposals, GroundTruthTube, LabeledTube, RegionProposal, Stream, StreamDetections,
    VideoDetections,
};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DetectionRecord {
    video_id: String,
    t: u32,
    stream: Stream,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    class_names: Option<Vec<String>>,
    proposals: Vec<RegionProposal>,
}

/// One line of a temporal-model score file, aligned to the tube file by
/// `(video_id, tube_index)` where `tube_index` counts tubes of that video in
/// file order from 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TunRecord {
    pub video_id: String,
    pub tube_index: usize,
    pub stream: Stream,
    pub frame_scores: Vec<Vec<f64>>,
}

fn lines<R: BufRead>(reader: R) -> impl Iterator<Item = Result<(usize, String)>> {
    reader
        .lines()
        .enumerate()
        .map(|(k, line)| line.map(|l| (k + 1, l)).map_err(Error::from))
        .filter(|item| !matches!(item, Ok((_, l)) if l.trim().is_empty()))
}

/// Reads one JSON value per non-blank line.
pub fn read_jsonl<T: DeserializeOwned, R: BufRead>(reader: R) -> Result<Vec<T>> {
    lines(reader)
        .map(|item| {
            let (line, text) = item?;
            serde_json::from_str(&text).map_err(|e| Error::Malformed {
                line,
                message: e.to_string(),
            })
        })
        .collect()
}

pub fn write_jsonl<T: Serialize, W: Write>(items: &[T], mut writer: W) -> Result<()> {
    for item in items {
        serde_json::to_writer(&mut writer, item).map_err(std::io::Error::from)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()?;
    Ok(())
}

#[derive(Default)]
struct VideoBuilder {
    first_line: usize,
    class_names: Option<Vec<String>>,
    frames: BTreeMap<(Stream, u32), Vec<RegionProposal>>,
}

/// Parses a detection file into one [`VideoDetections`] per `video_id`,
/// ordered by `video_id`. Records of different videos may interleave.
pub fn parse_detections<R: BufRead>(reader: R) -> Result<Vec<VideoDetections>> {
    let mut videos: BTreeMap<String, VideoBuilder> = BTreeMap::new();
    for item in lines(reader) {
        let (line, text) = item?;
        let record: DetectionRecord = serde_json::from_str(&text).map_err(|e| Error::Malformed {
            line,
            message: e.to_string(),
        })?;
        let builder = videos.entry(record.video_id.clone()).or_insert_with(|| VideoBuilder {
            first_line: line,
            ..Default::default()
        });
        match (&builder.class_names, record.class_names) {
            (None, Some(names)) if builder.first_line == line => {
                builder.class_names = Some(names)
            }
            (None, _) => {
                return Err(Error::Malformed {
                    line,
                    message: format!(
                        "first record of video {} must carry class_names",
                        record.video_id
                    ),
                })
            }
            (Some(known), Some(names)) if *known != names => {
                return Err(Error::Malformed {
                    line,
                    message: format!("class_names of video {} changed", record.video_id),
                })
            }
            _ => {}
        }
        let key = (record.stream, record.t);
        if builder.frames.insert(key, record.proposals).is_some() {
            return Err(Error::Malformed {
                line,
                message: format!(
                    "duplicate {} frame {} for video {}",
                    record.stream, record.t, record.video_id
                ),
            });
        }
    }

    videos
        .into_iter()
        .map(|(video_id, builder)| {
            let class_names = builder.class_names.unwrap_or_default();
            let mut appearance = Vec::new();
            let mut motion = Vec::new();
            for ((stream, t), proposals) in builder.frames {
                let frame = FrameProposals {
                    frame_index: t,
                    proposals,
                };
                match stream {
                    Stream::Appearance => appearance.push(frame),
                    Stream::Motion => motion.push(frame),
                }
            }
            let appearance = build_stream(&video_id, Stream::Appearance, appearance)?;
            let motion = if motion.is_empty() {
                None
            } else {
                Some(build_stream(&video_id, Stream::Motion, motion)?)
            };
            VideoDetections::new(video_id, class_names, appearance, motion)
        })
        .collect()
}

fn build_stream(
    video_id: &str,
    stream: Stream,
    frames: Vec<FrameProposals>,
) -> Result<StreamDetections> {
    if frames.is_empty() {
        return Err(Error::validation(format!(
            "video {video_id}: no {stream} frames"
        )));
    }
    StreamDetections::new(stream, frames).map_err(|e| match e {
        Error::NonContiguousFrames {
            stream,
            expected,
            found,
            ..
        } => Error::NonContiguousFrames {
            video_id: video_id.to_string(),
            stream,
            expected,
            found,
        },
        other => other,
    })
}

/// Writes videos in the detection format: appearance frames first, then
/// motion frames, with `class_names` on each video's first line.
pub fn write_detections<W: Write>(videos: &[VideoDetections], mut writer: W) -> Result<()> {
    for video in videos {
        let mut first = true;
        let streams = std::iter::once(video.appearance()).chain(video.motion());
        for stream in streams {
            for frame in stream.frames() {
                let record = DetectionRecord {
                    video_id: video.video_id().to_string(),
                    t: frame.frame_index,
                    stream: stream.stream(),
                    class_names: first.then(|| video.class_names().to_vec()),
                    proposals: frame.proposals.clone(),
                };
                first = false;
                serde_json::to_writer(&mut writer, &record).map_err(std::io::Error::from)?;
                writer.write_all(b"\n")?;
            }
        }
    }
    writer.flush()?;
    Ok(())
}

pub fn write_tubes<W: Write>(tubes: &[LabeledTube], writer: W) -> Result<()> {
    write_jsonl(tubes, writer)
}

pub fn parse_tubes<R: BufRead>(reader: R) -> Result<Vec<LabeledTube>> {
    read_jsonl(reader)
}

pub fn write_ground_truth<W: Write>(gts: &[GroundTruthTube], writer: W) -> Result<()> {
    write_jsonl(gts, writer)
}

pub fn parse_ground_truth<R: BufRead>(reader: R) -> Result<Vec<GroundTruthTube>> {
    read_jsonl(reader)
}

pub fn parse_tun_scores<R: BufRead>(reader: R) -> Result<Vec<TunRecord>> {
    read_jsonl(reader)
}
