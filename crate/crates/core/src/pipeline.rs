//! End-to-end model building and scoring over parsed track streams.

use std::collections::BTreeMap;

use crate::exemplar::{build_video_model, merge_models, ExemplarModel, DEFAULT_EXEMPLAR_THRESHOLD};
use crate::ingest::{FrameRecord, DEFAULT_TRAJECTORY_LEN};
use crate::metric::{
    estimate_normalization, sample_cooccurring_pairs, MetricError, DEFAULT_NORMALIZATION_SAMPLE,
};
use crate::par::Execution;
use crate::scenegraph::{
    default_edge_threshold, video_graphs, FrameGraph, GraphError, REFERENCE_FRAME_HEIGHT_PX,
};
use crate::scoring::{score_frames, ScoredRegion};

/// Seed used for the normalization sample unless overridden.
pub const DEFAULT_SAMPLE_SEED: u64 = 0x5eed;

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub edge_threshold: f64,
    pub exemplar_threshold: f64,
    pub trajectory_len: usize,
    pub normalization_sample: usize,
    pub sample_seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            edge_threshold: default_edge_threshold(REFERENCE_FRAME_HEIGHT_PX),
            exemplar_threshold: DEFAULT_EXEMPLAR_THRESHOLD,
            trajectory_len: DEFAULT_TRAJECTORY_LEN,
            normalization_sample: DEFAULT_NORMALIZATION_SAMPLE,
            sample_seed: DEFAULT_SAMPLE_SEED,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("no training streams given")]
    NoVideos,
    #[error("video {video}: {source}")]
    Graph {
        video: String,
        #[source]
        source: GraphError,
    },
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("trajectory length {requested} differs from the model's {model}")]
    TrajectoryMismatch { requested: usize, model: usize },
}

/// A video as parsed from one track stream.
#[derive(Debug, Clone, PartialEq)]
pub struct Video {
    pub id: String,
    pub records: Vec<FrameRecord>,
}

impl Video {
    /// The id of the first record, or empty for an empty stream.
    pub fn from_records(records: Vec<FrameRecord>) -> Self {
        let id = records
            .first()
            .map(|r| r.video_id.clone())
            .unwrap_or_default();
        Self { id, records }
    }
}

fn graphs_for(
    video: &Video,
    h: f64,
    t: usize,
    exec: Execution,
) -> Result<Vec<FrameGraph>, PipelineError> {
    video_graphs(&video.records, h, t, exec).map_err(|source| PipelineError::Graph {
        video: video.id.clone(),
        source,
    })
}

/// Build a model from nominal videos. Videos are processed in id order, so
/// the result does not depend on input order or on `exec`.
pub fn build_model(
    videos: &[Video],
    config: &ModelConfig,
    class_map: BTreeMap<u32, String>,
    exec: Execution,
) -> Result<ExemplarModel, PipelineError> {
    if videos.is_empty() {
        return Err(PipelineError::NoVideos);
    }
    let mut ordered: Vec<&Video> = videos.iter().collect();
    ordered.sort_by(|a, b| a.id.cmp(&b.id));

    let graphs = ordered
        .iter()
        .map(|v| graphs_for(v, config.edge_threshold, config.trajectory_len, exec))
        .collect::<Result<Vec<_>, _>>()?;

    let all: Vec<_> = graphs.iter().flatten().map(|f| &f.graph).collect();
    let sample = sample_cooccurring_pairs(&all, config.normalization_sample, config.sample_seed);
    let constants = estimate_normalization(&sample, exec)?;

    let per_video = exec.map(&graphs, |frames| {
        build_video_model(
            frames.iter().map(|f| &f.graph),
            config.exemplar_threshold,
            &constants,
        )
    });
    let merged = merge_models(per_video, config.exemplar_threshold, &constants);

    Ok(ExemplarModel {
        exemplar_threshold: config.exemplar_threshold,
        edge_threshold: config.edge_threshold,
        trajectory_len: config.trajectory_len,
        constants,
        class_map,
        iso: merged.iso,
        pairs: merged.pairs,
    })
}

/// Score one video with a model. `trajectory_len`, when given, must match
/// the model's. `edge_threshold` overrides the model's when given.
pub fn score_video(
    video: &Video,
    model: &ExemplarModel,
    trajectory_len: Option<usize>,
    edge_threshold: Option<f64>,
    exec: Execution,
) -> Result<Vec<ScoredRegion>, PipelineError> {
    if let Some(t) = trajectory_len.filter(|&t| t != model.trajectory_len) {
        return Err(PipelineError::TrajectoryMismatch {
            requested: t,
            model: model.trajectory_len,
        });
    }
    let h = edge_threshold.unwrap_or(model.edge_threshold);
    let frames = graphs_for(video, h, model.trajectory_len, exec)?;
    Ok(score_frames(&frames, model, exec))
}
