use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use rayon::prelude::*;
use tubelet_core::io::{
    parse_detections, parse_ground_truth, parse_tubes, parse_tun_scores, write_detections,
    write_ground_truth, write_jsonl, write_tubes,
};
use tubelet_core::scoring::apply_tun_records;
use tubelet_core::{
    dp_optimal_path, fuse_video, link_video, video_map, PipelineConfig, ScoredPath, Stream,
    StreamMode, SynthConfig, VideoDetections,
};

/// Tubelet proposals, two-stream fusion and video-mAP evaluation.
#[derive(Parser, Debug)]
#[command(name = "tubelet", version)]
struct Cli {
    #[command(flatten)]
    overrides: Overrides,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Overrides {
    /// TOML run configuration (see `print-config`)
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Seed for synthetic corpora
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for per-video processing (0 = all cores)
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Detection stream fed to the linker
    #[arg(long, global = true, value_enum)]
    stream: Option<StreamArg>,

    /// Tubelets kept after each linking step
    #[arg(long, global = true)]
    top_k: Option<usize>,

    /// Tube IoU above which the weaker tubelet is suppressed
    #[arg(long = "nms-iou", global = true)]
    nms_iou: Option<f64>,

    /// Weight of linked detector scores against temporal-model scores
    #[arg(long, global = true)]
    lambda1: Option<f64>,

    /// Weight of the appearance stream against the motion stream
    #[arg(long, global = true)]
    lambda2: Option<f64>,

    /// Evaluation IoU threshold; repeat for several
    #[arg(long = "delta", global = true)]
    deltas: Vec<f64>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum StreamArg {
    Rgb,
    Flow,
    Fused,
}

impl From<StreamArg> for StreamMode {
    fn from(s: StreamArg) -> Self {
        match s {
            StreamArg::Rgb => StreamMode::Rgb,
            StreamArg::Flow => StreamMode::Flow,
            StreamArg::Fused => StreamMode::Fused,
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic detection corpus and its ground truth
    Synth(SynthArgs),
    /// Link detections into labelled tubes
    Link {
        #[arg(long)]
        detections: PathBuf,
        /// Tube file to write ("-" for standard output)
        #[arg(long, default_value = "-")]
        out: PathBuf,
    },
    /// Write the appearance stream with fused appearance/motion scores
    Fuse {
        #[arg(long)]
        detections: PathBuf,
        #[arg(long, default_value = "-")]
        out: PathBuf,
    },
    /// Fold temporal-model scores into a tube file
    Score {
        #[arg(long)]
        tubes: PathBuf,
        #[arg(long)]
        tun: PathBuf,
        #[arg(long, default_value = "-")]
        out: PathBuf,
    },
    /// Evaluate tubes against ground truth
    Eval {
        #[arg(long)]
        tubes: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        /// JSON report to write
        #[arg(long)]
        report: Option<PathBuf>,
        /// Row label in the printed table
        #[arg(long, default_value = "tubelets")]
        method: String,
    },
    /// Exact best path per video by dynamic programming
    Oracle {
        #[arg(long)]
        detections: PathBuf,
        #[arg(long, default_value = "-")]
        out: PathBuf,
    },
    /// Print the effective configuration as TOML
    PrintConfig,
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long)]
    detections: PathBuf,
    #[arg(long)]
    gt: PathBuf,
    #[arg(long, default_value_t = 20)]
    videos: usize,
    #[arg(long, default_value_t = 20)]
    frames: usize,
    #[arg(long, default_value_t = 3)]
    classes: usize,
    #[arg(long, default_value_t = 5)]
    distractors: usize,
    /// Jittered proposals around the actor per frame
    #[arg(long, default_value_t = 1)]
    per_actor: usize,
    /// Box jitter standard deviation in pixels
    #[arg(long, default_value_t = 0.0)]
    jitter: f64,
    #[arg(long, default_value_t = 0.0)]
    score_noise: f64,
    /// Omit the motion stream
    #[arg(long)]
    no_motion: bool,
}

#[derive(Debug)]
enum Failure {
    Io(String),
    Invalid(String),
}

impl From<tubelet_core::Error> for Failure {
    fn from(e: tubelet_core::Error) -> Self {
        if e.is_io() {
            Failure::Io(e.to_string())
        } else {
            Failure::Invalid(e.to_string())
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

type CliResult<T> = Result<T, Failure>;

fn open(path: &Path) -> CliResult<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn create(path: &Path) -> CliResult<Box<dyn Write>> {
    if path == Path::new("-") {
        return Ok(Box::new(BufWriter::new(io::stdout().lock())));
    }
    let file =
        File::create(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
    Ok(Box::new(BufWriter::new(file)))
}

fn load_config(o: &Overrides) -> CliResult<PipelineConfig> {
    let mut cfg = match &o.config {
        None => PipelineConfig::default(),
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
            toml::from_str(&text)
                .map_err(|e| Failure::Invalid(format!("{}: {e}", path.display())))?
        }
    };
    if let Some(w) = o.workers {
        cfg.workers = w;
    }
    if let Some(s) = o.stream {
        cfg.stream = s.into();
    }
    if let Some(k) = o.top_k {
        cfg.link.top_k = k;
    }
    if let Some(t) = o.nms_iou {
        cfg.link.nms_threshold = t;
    }
    if let Some(l) = o.lambda1 {
        cfg.score.lambda1 = l;
    }
    if let Some(l) = o.lambda2 {
        cfg.fusion.lambda2 = l;
    }
    if !o.deltas.is_empty() {
        cfg.eval.iou_thresholds = o.deltas.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Maps `f` over videos on `workers` threads, keeping input order.
fn per_video<T, F>(videos: &[VideoDetections], workers: usize, f: F) -> CliResult<Vec<T>>
where
    T: Send,
    F: Fn(&VideoDetections) -> tubelet_core::Result<T> + Sync,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Failure::Invalid(e.to_string()))?;
    let out = pool.install(|| videos.par_iter().map(&f).collect::<tubelet_core::Result<Vec<T>>>())?;
    Ok(out)
}

fn run(cli: Cli) -> CliResult<()> {
    let cfg = load_config(&cli.overrides)?;
    match cli.command {
        Command::PrintConfig => {
            let text = toml::to_string(&cfg).map_err(|e| Failure::Invalid(e.to_string()))?;
            print!("{text}");
        }
        Command::Synth(args) => {
            let synth = SynthConfig {
                num_videos: args.videos,
                frames_per_video: args.frames,
                num_classes: args.classes,
                proposals_per_actor: args.per_actor,
                distractors: args.distractors,
                box_jitter: args.jitter,
                score_noise: args.score_noise,
                motion: !args.no_motion,
                seed: cli.overrides.seed.unwrap_or(0),
                ..SynthConfig::default()
            };
            let (videos, gts) = tubelet_core::synth_corpus(&synth)?;
            write_detections(&videos, create(&args.detections)?)?;
            write_ground_truth(&gts, create(&args.gt)?)?;
            info!("wrote {} synthetic videos", videos.len());
        }
        Command::Link { detections, out } => {
            let videos = parse_detections(open(&detections)?)?;
            let tubes = per_video(&videos, cfg.workers, |v| link_video(v, &cfg))?;
            for (video, tubes) in videos.iter().zip(&tubes) {
                eprintln!("{}\t{}", video.video_id(), tubes.len());
            }
            let flat: Vec<_> = tubes.into_iter().flatten().collect();
            write_tubes(&flat, create(&out)?)?;
        }
        Command::Fuse { detections, out } => {
            let videos = parse_detections(open(&detections)?)?;
            let fused = per_video(&videos, cfg.workers, |v| {
                let stream = fuse_video(v, &cfg.fusion)?.detections;
                VideoDetections::new(v.video_id(), v.class_names().to_vec(), stream, None)
            })?;
            write_detections(&fused, create(&out)?)?;
        }
        Command::Score { tubes, tun, out } => {
            let tubes = parse_tubes(open(&tubes)?)?;
            let records = parse_tun_scores(open(&tun)?)?;
            let rescored = apply_tun_records(&tubes, &records, &cfg.score, &cfg.fusion)?;
            write_tubes(&rescored, create(&out)?)?;
        }
        Command::Eval {
            tubes,
            gt,
            report,
            method,
        } => {
            let tubes = parse_tubes(open(&tubes)?)?;
            let gts = parse_ground_truth(open(&gt)?)?;
            let result = video_map(&tubes, &gts, &cfg.eval)?;
            if let Some(path) = report {
                let mut w = create(&path)?;
                serde_json::to_writer_pretty(&mut w, &result).map_err(io::Error::from)?;
                w.write_all(b"\n")?;
                w.flush()?;
            }
            let mut stdout = io::stdout().lock();
            stdout.write_all(result.to_table(&method).as_bytes())?;
        }
        Command::Oracle { detections, out } => {
            #[derive(serde::Serialize)]
            struct Row<'a> {
                video_id: &'a str,
                stream: Stream,
                path: Vec<usize>,
                score: f64,
            }
            let videos = parse_detections(open(&detections)?)?;
            let paths: Vec<(ScoredPath, Stream)> = per_video(&videos, cfg.workers, |v| {
                let (stream, source) = match cfg.stream {
                    StreamMode::Rgb => (v.appearance().clone(), Stream::Appearance),
                    StreamMode::Flow => (
                        v.motion()
                            .ok_or_else(|| {
                                tubelet_core::Error::Validation(format!(
                                    "video {}: no motion stream",
                                    v.video_id()
                                ))
                            })?
                            .clone(),
                        Stream::Motion,
                    ),
                    StreamMode::Fused => (fuse_video(v, &cfg.fusion)?.detections, Stream::Appearance),
                };
                Ok((dp_optimal_path(&stream)?, source))
            })?;
            let rows: Vec<Row> = videos
                .iter()
                .zip(paths)
                .map(|(v, (p, stream))| Row {
                    video_id: v.video_id(),
                    stream,
                    path: p.path,
                    score: p.score,
                })
                .collect();
            write_jsonl(&rows, create(&out)?)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Invalid(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Io(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
