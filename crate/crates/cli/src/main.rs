mod config;
mod plot;

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use log::info;
use serde::{Deserialize, Serialize};

use scenegraph_vad::eval::{
    evaluate_all, EvalResult, MatchParams, DEFAULT_IOU_MIN, DEFAULT_TRACK_COVERAGE_MIN,
};
use scenegraph_vad::exemplar::{load_model, save_model};
use scenegraph_vad::ingest::{
    parse_annotations, parse_class_map, parse_track_stream, write_track_stream, GroundTruth,
};
use scenegraph_vad::metric::Attribute;
use scenegraph_vad::pipeline::{build_model, score_video, Video};
use scenegraph_vad::scoring::{detect, read_scores, write_scores, ScoredRegion};
use scenegraph_vad::synth::{campus_scene, generate, inject, AnomalyKind, ScenarioSpec};

use config::Settings;

/// Scene-graph exemplar anomaly detection for tracked video objects.
#[derive(Debug, Parser)]
#[command(name = "sgvad", version)]
struct Cli {
    /// TOML file with any of the tunables below (kebab-case keys)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(flatten)]
    settings: Settings,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build an exemplar model from nominal track streams
    BuildModel {
        /// Track stream files, one video each
        #[arg(required = true)]
        streams: Vec<PathBuf>,
        /// Where to write the model
        #[arg(short, long)]
        out: PathBuf,
        /// Class id to name sidecar stored in the model
        #[arg(long)]
        class_map: Option<PathBuf>,
    },
    /// Score test track streams against a model
    Score {
        #[arg(required = true)]
        streams: Vec<PathBuf>,
        #[arg(short, long)]
        model: PathBuf,
        /// Where to write the scores file
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Compute frame, region and track AUCs for a scores file
    Eval {
        #[arg(short, long)]
        scores: PathBuf,
        /// Directory holding `<video_id>.json` annotation files
        #[arg(short, long)]
        annotations: PathBuf,
        /// Where to write the results document
        #[arg(short, long)]
        out: PathBuf,
        /// Also write one SVG curve per criterion into this directory
        #[arg(long)]
        plots: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_IOU_MIN)]
        iou_min: f64,
        #[arg(long, default_value_t = DEFAULT_TRACK_COVERAGE_MIN)]
        track_coverage_min: f64,
    },
    /// Generate a synthetic track stream and annotations
    Synth {
        /// Scenario file (JSON, or TOML with a .toml extension)
        #[arg(
            long,
            conflicts_with = "campus_seed",
            required_unless_present = "campus_seed"
        )]
        spec: Option<PathBuf>,
        /// Use the campus preset with this seed instead of a scenario file
        #[arg(long)]
        campus_seed: Option<u64>,
        /// Video id for the campus preset
        #[arg(long, default_value = "campus")]
        video_id: String,
        /// Frame count for the campus preset
        #[arg(long, default_value_t = 600)]
        frames: u64,
        /// Inject one event into the scenario
        #[arg(long)]
        inject: Option<EventKind>,
        #[arg(long, default_value_t = 90, requires = "inject")]
        onset: u64,
        #[arg(long, default_value_t = 150, requires = "inject")]
        duration: u64,
        /// Where to write the track stream
        #[arg(short, long)]
        out: PathBuf,
        /// Where to write the annotation file (empty when there are no events)
        #[arg(long)]
        annotations: Option<PathBuf>,
        /// Write the resolved scenario as JSON
        #[arg(long)]
        write_spec: Option<PathBuf>,
    },
    /// Draw SVG curves from an eval results document
    Plot {
        #[arg(short, long)]
        results: PathBuf,
        #[arg(short, long)]
        out_dir: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum EventKind {
    LeftBehindObject,
    StationaryPair,
    LoneCompanion,
    TrajectoryDeviation,
}

impl From<EventKind> for AnomalyKind {
    fn from(k: EventKind) -> Self {
        match k {
            EventKind::LeftBehindObject => AnomalyKind::LeftBehindObject,
            EventKind::StationaryPair => AnomalyKind::StationaryPair,
            EventKind::LoneCompanion => AnomalyKind::LoneCompanion,
            EventKind::TrajectoryDeviation => AnomalyKind::TrajectoryDeviation,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct ResultsDocument {
    scores: PathBuf,
    videos: Vec<String>,
    iou_min: f64,
    track_coverage_min: f64,
    results: Vec<EvalResult>,
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path).with_context(|| {
        format!("cannot read {}", path.display())
    })?))
}

/// Write through `body`, flushing before reporting success.
fn write_file(path: &Path, body: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
    let file = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    let mut w = BufWriter::new(file);
    body(&mut w).with_context(|| format!("cannot write {}", path.display()))?;
    w.flush()
        .with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

fn read_video(path: &Path) -> Result<Video> {
    let records = parse_track_stream(open(path)?)
        .with_context(|| format!("invalid track stream {}", path.display()))?;
    Ok(Video::from_records(records))
}

fn cmd_build_model(
    settings: &Settings,
    streams: &[PathBuf],
    out: &Path,
    class_map: Option<&Path>,
) -> Result<()> {
    let videos = streams
        .iter()
        .map(|p| read_video(p))
        .collect::<Result<Vec<_>>>()?;
    let classes = match class_map {
        Some(p) => parse_class_map(open(p)?)
            .with_context(|| format!("invalid class map {}", p.display()))?,
        None => BTreeMap::new(),
    };
    let config = settings.model_config();
    info!(
        "building model from {} streams with {config:?}",
        videos.len()
    );
    let model = build_model(&videos, &config, classes, settings.execution())?;
    write_file(out, |w| Ok(save_model(&model, w)?))?;

    println!("isolated exemplars: {}", model.iso.len());
    println!("pair exemplars: {}", model.pairs.len());
    println!("normalization constants (mean, std):");
    for attribute in Attribute::ALL {
        let s = model.constants.get(attribute);
        println!(
            "  {:<10} {:.6} {:.6}",
            format!("{attribute:?}"),
            s.mean,
            s.std
        );
    }
    println!("wrote {}", out.display());
    Ok(())
}

fn cmd_score(
    settings: &Settings,
    streams: &[PathBuf],
    model_path: &Path,
    out: &Path,
) -> Result<()> {
    let model = load_model(open(model_path)?)
        .with_context(|| format!("invalid model {}", model_path.display()))?;
    let threshold = settings.anomaly_threshold();
    let mut all: Vec<ScoredRegion> = Vec::new();
    for path in streams {
        let video = read_video(path)?;
        let regions = score_video(
            &video,
            &model,
            settings.trajectory_length,
            settings.edge_threshold(),
            settings.execution(),
        )
        .with_context(|| format!("cannot score {}", path.display()))?;
        println!(
            "{}: {} frames, {} regions, {} above {threshold}",
            path.display(),
            video.records.len(),
            regions.len(),
            detect(&regions, threshold).len()
        );
        all.extend(regions);
    }
    write_file(out, |w| Ok(write_scores(&all, w)?))?;
    println!("wrote {}", out.display());
    Ok(())
}

fn cmd_eval(
    settings: &Settings,
    scores: &Path,
    annotations: &Path,
    out: &Path,
    plots: Option<&Path>,
    params: MatchParams,
) -> Result<()> {
    let regions = read_scores(open(scores)?)
        .with_context(|| format!("invalid scores file {}", scores.display()))?;
    let mut videos: Vec<String> = regions.iter().map(|r| r.video_id.clone()).collect();
    videos.sort();
    videos.dedup();
    if videos.is_empty() {
        bail!("{} holds no scored regions", scores.display());
    }

    let missing: Vec<&str> = videos
        .iter()
        .filter(|v| !annotations.join(format!("{v}.json")).is_file())
        .map(String::as_str)
        .collect();
    if !missing.is_empty() {
        bail!(
            "no annotation file in {} for video ids: {}",
            annotations.display(),
            missing.join(", ")
        );
    }
    let mut gt: BTreeMap<String, GroundTruth> = BTreeMap::new();
    for v in &videos {
        let path = annotations.join(format!("{v}.json"));
        let truth = parse_annotations(open(&path)?)
            .with_context(|| format!("invalid annotations {}", path.display()))?;
        gt.insert(v.clone(), truth);
    }

    let results = evaluate_all(&regions, &gt, params, settings.execution())?;
    for r in &results {
        println!("{:<6} AUC {:.4}", r.criterion.to_string(), r.auc);
    }
    let doc = ResultsDocument {
        scores: scores.to_path_buf(),
        videos,
        iou_min: params.iou_min,
        track_coverage_min: params.track_coverage_min,
        results: results.to_vec(),
    };
    write_file(out, |w| {
        serde_json::to_writer_pretty(&mut *w, &doc)?;
        Ok(w.write_all(b"\n")?)
    })?;
    println!("wrote {}", out.display());
    if let Some(dir) = plots {
        write_plots(&doc.results, dir)?;
    }
    Ok(())
}

fn write_plots(results: &[EvalResult], dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    for r in results {
        let path = dir.join(format!("{}.svg", r.criterion));
        write_file(&path, |w| Ok(w.write_all(plot::curve_svg(r).as_bytes())?))?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn cmd_plot(results: &Path, out_dir: &Path) -> Result<()> {
    let doc: ResultsDocument = serde_json::from_reader(open(results)?)
        .with_context(|| format!("invalid results document {}", results.display()))?;
    write_plots(&doc.results, out_dir)
}

fn load_scenario(path: &Path) -> Result<ScenarioSpec> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let spec = if path.extension().is_some_and(|e| e == "toml") {
        toml::from_str(&text).map_err(anyhow::Error::from)
    } else {
        serde_json::from_str(&text).map_err(anyhow::Error::from)
    };
    spec.with_context(|| format!("invalid scenario {}", path.display()))
}

#[allow(clippy::too_many_arguments)]
fn cmd_synth(
    spec: Option<&Path>,
    campus_seed: Option<u64>,
    video_id: &str,
    frames: u64,
    event: Option<(EventKind, u64, u64)>,
    out: &Path,
    annotations: Option<&Path>,
    write_spec: Option<&Path>,
) -> Result<()> {
    let mut scenario = match (spec, campus_seed) {
        (Some(p), _) => load_scenario(p)?,
        (None, Some(seed)) => campus_scene(video_id, seed, frames),
        (None, None) => bail!("either --spec or --campus-seed is required"),
    };
    if let Some((kind, onset, duration)) = event {
        scenario = inject(scenario, kind.into(), onset, duration)?;
    }
    let output = generate(&scenario)?;

    write_file(out, |w| Ok(write_track_stream(&output.records, w)?))?;
    println!("wrote {} ({} frames)", out.display(), output.records.len());
    if let Some(path) = annotations {
        let truth = output
            .annotations
            .unwrap_or_else(|| GroundTruth::empty(scenario.frame_count));
        write_file(path, |w| Ok(truth.to_writer(w)?))?;
        println!(
            "wrote {} ({} annotated regions)",
            path.display(),
            truth.annotations.len()
        );
    }
    if let Some(path) = write_spec {
        write_file(path, |w| Ok(serde_json::to_writer_pretty(w, &scenario)?))?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let file = match &cli.config {
        Some(p) => Settings::from_file(p)?,
        None => Settings::default(),
    };
    let settings = cli.settings.over(file);
    settings.validate()?;

    match cli.command {
        Command::BuildModel {
            streams,
            out,
            class_map,
        } => cmd_build_model(&settings, &streams, &out, class_map.as_deref()),
        Command::Score {
            streams,
            model,
            out,
        } => cmd_score(&settings, &streams, &model, &out),
        Command::Eval {
            scores,
            annotations,
            out,
            plots,
            iou_min,
            track_coverage_min,
        } => cmd_eval(
            &settings,
            &scores,
            &annotations,
            &out,
            plots.as_deref(),
            MatchParams {
                iou_min,
                track_coverage_min,
            },
        ),
        Command::Synth {
            spec,
            campus_seed,
            video_id,
            frames,
            inject,
            onset,
            duration,
            out,
            annotations,
            write_spec,
        } => cmd_synth(
            spec.as_deref(),
            campus_seed,
            &video_id,
            frames,
            inject.map(|k| (k, onset, duration)),
            &out,
            annotations.as_deref(),
            write_spec.as_deref(),
        ),
        Command::Plot { results, out_dir } => cmd_plot(&results, &out_dir),
    }
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    run(Cli::parse())
}
