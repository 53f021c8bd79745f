//! Frame-level ROC AUC, region- and track-based detection criteria, and
//! score-map to region conversion.
//!
//! The region and track criteria sweep a threshold down through the distinct
//! detection scores. At each step a ground-truth region counts as detected
//! when some detection at or above the threshold in the same frame overlaps
//! it with IoU at least `iou_min`; a detection overlapping no ground-truth
//! region is a false positive. The x axis is false positives per frame, and
//! the reported AUC is the area under the curve for x in `[0, 1]`.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::geom::BBox;
use crate::ingest::GroundTruth;
use crate::par::Execution;
use crate::scoring::{Provenance, ScoredRegion};

pub const DEFAULT_IOU_MIN: f64 = 0.1;
pub const DEFAULT_TRACK_COVERAGE_MIN: f64 = 0.1;
pub const DEFAULT_MIN_COMPONENT_PIXELS: usize = 10;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("{scores} scores but {labels} labels")]
    LengthMismatch { scores: usize, labels: usize },
    #[error("AUC is undefined: labels contain only one class")]
    SingleClass,
    #[error("AUC is undefined: no ground-truth regions")]
    EmptyGroundTruth,
    #[error("detections reference videos without ground truth: {0:?}")]
    UnknownVideos(Vec<String>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    Frame,
    Rbdc,
    Tbdc,
}

impl std::fmt::Display for Criterion {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Criterion::Frame => "frame",
            Criterion::Rbdc => "rbdc",
            Criterion::Tbdc => "tbdc",
        })
    }
}

/// Area under one criterion's curve.
///
/// `curve` starts at `(0, 0)`; x and y never decrease along it, and `auc` is
/// its trapezoidal integral. Several points may share an x value where the
/// curve rises vertically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub criterion: Criterion,
    pub auc: f64,
    pub curve: Vec<(f64, f64)>,
}

/// Trapezoidal area under a polyline.
pub fn trapezoid(curve: &[(f64, f64)]) -> f64 {
    curve
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[0].1 + w[1].1) / 2.0)
        .sum()
}

/// Restrict a monotone curve to `x <= x_max`: interpolate at `x_max` where
/// the curve crosses it, or extend flat to `x_max` if it ends short.
pub fn clip_curve(curve: &[(f64, f64)], x_max: f64) -> Vec<(f64, f64)> {
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(curve.len() + 1);
    for &(x, y) in curve {
        if x <= x_max {
            out.push((x, y));
            continue;
        }
        if let Some(&(px, py)) = out.last() {
            let t = (x_max - px) / (x - px);
            out.push((x_max, py + t * (y - py)));
        }
        return out;
    }
    if let Some(&(px, py)) = out.last() {
        if px < x_max {
            out.push((x_max, py));
        }
    }
    out
}

/// ROC curve `(false positive rate, true positive rate)` from a descending
/// threshold sweep; tied scores enter together.
pub fn roc_curve(scores: &[f64], labels: &[bool]) -> Result<Vec<(f64, f64)>, EvalError> {
    if scores.len() != labels.len() {
        return Err(EvalError::LengthMismatch {
            scores: scores.len(),
            labels: labels.len(),
        });
    }
    let positives = labels.iter().filter(|&&l| l).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(EvalError::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut curve = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut k = 0;
    while k < order.len() {
        let s = scores[order[k]];
        while k < order.len() && scores[order[k]] == s {
            if labels[order[k]] {
                tp += 1;
            } else {
                fp += 1;
            }
            k += 1;
        }
        curve.push((fp as f64 / negatives as f64, tp as f64 / positives as f64));
    }
    Ok(curve)
}

/// Frame-level ROC AUC.
pub fn frame_level_auc(
    frame_scores: &[f64],
    frame_labels: &[bool],
) -> Result<EvalResult, EvalError> {
    let curve = roc_curve(frame_scores, frame_labels)?;
    Ok(EvalResult {
        criterion: Criterion::Frame,
        auc: trapezoid(&curve),
        curve,
    })
}

/// Frames evaluated for one video: `0..total_frame` plus any frame id that
/// appears in its annotations or regions.
pub fn evaluated_frames<'a>(
    gt: &GroundTruth,
    regions: impl IntoIterator<Item = &'a ScoredRegion>,
) -> BTreeSet<i64> {
    let mut frames: BTreeSet<i64> = (0..gt.total_frame as i64).collect();
    frames.extend(gt.annotations.iter().map(|a| a.frame_id));
    frames.extend(regions.into_iter().map(|r| r.frame_id as i64));
    frames
}

fn check_videos(
    regions: &[ScoredRegion],
    gt: &BTreeMap<String, GroundTruth>,
) -> Result<(), EvalError> {
    let unknown: BTreeSet<&str> = regions
        .iter()
        .map(|r| r.video_id.as_str())
        .filter(|v| !gt.contains_key(*v))
        .collect();
    if unknown.is_empty() {
        Ok(())
    } else {
        Err(EvalError::UnknownVideos(
            unknown.into_iter().map(str::to_owned).collect(),
        ))
    }
}

fn regions_by_video(regions: &[ScoredRegion]) -> HashMap<&str, Vec<&ScoredRegion>> {
    let mut by_video: HashMap<&str, Vec<&ScoredRegion>> = HashMap::new();
    for r in regions {
        by_video.entry(r.video_id.as_str()).or_default().push(r);
    }
    by_video
}

/// Per-frame scores and labels across all videos, videos in id order.
///
/// A frame's score is its highest region score, or negative infinity when it
/// has no regions; it is anomalous when it has at least one annotation.
pub fn frame_scores_and_labels(
    regions: &[ScoredRegion],
    gt: &BTreeMap<String, GroundTruth>,
) -> Result<(Vec<f64>, Vec<bool>), EvalError> {
    check_videos(regions, gt)?;
    let by_video = regions_by_video(regions);
    let mut scores = Vec::new();
    let mut labels = Vec::new();
    for (video, truth) in gt {
        let video_regions = by_video
            .get(video.as_str())
            .map(Vec::as_slice)
            .unwrap_or_default();
        let mut best: HashMap<i64, f64> = HashMap::new();
        for r in video_regions {
            let e = best.entry(r.frame_id as i64).or_insert(f64::NEG_INFINITY);
            *e = e.max(r.score);
        }
        let anomalous: BTreeSet<i64> = truth.annotations.iter().map(|a| a.frame_id).collect();
        for f in evaluated_frames(truth, video_regions.iter().copied()) {
            scores.push(best.get(&f).copied().unwrap_or(f64::NEG_INFINITY));
            labels.push(anomalous.contains(&f));
        }
    }
    Ok((scores, labels))
}

/// Frame-level AUC straight from scored regions and annotation files.
pub fn frame_level_auc_from_regions(
    regions: &[ScoredRegion],
    gt: &BTreeMap<String, GroundTruth>,
) -> Result<EvalResult, EvalError> {
    let (scores, labels) = frame_scores_and_labels(regions, gt)?;
    frame_level_auc(&scores, &labels)
}

/// Matching parameters for the region and track criteria.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchParams {
    pub iou_min: f64,
    pub track_coverage_min: f64,
}

impl Default for MatchParams {
    fn default() -> Self {
        Self {
            iou_min: DEFAULT_IOU_MIN,
            track_coverage_min: DEFAULT_TRACK_COVERAGE_MIN,
        }
    }
}

/// Ground-truth regions flattened across videos, with track membership.
struct GtIndex {
    /// Track index of each region.
    region_track: Vec<usize>,
    track_len: Vec<usize>,
    /// (video, frame) -> (region index, bbox)
    by_frame: HashMap<(String, i64), Vec<(usize, BBox)>>,
    frames: usize,
}

impl GtIndex {
    fn new(regions: &[ScoredRegion], gt: &BTreeMap<String, GroundTruth>) -> Self {
        let by_video = regions_by_video(regions);
        let mut region_track = Vec::new();
        let mut track_len = Vec::new();
        let mut by_frame: HashMap<(String, i64), Vec<(usize, BBox)>> = HashMap::new();
        let mut frames = 0;
        for (video, truth) in gt {
            let video_regions = by_video
                .get(video.as_str())
                .map(Vec::as_slice)
                .unwrap_or_default();
            frames += evaluated_frames(truth, video_regions.iter().copied()).len();
            let mut track_of: BTreeMap<i64, usize> = BTreeMap::new();
            for a in &truth.annotations {
                let t = *track_of.entry(a.track_id).or_insert_with(|| {
                    track_len.push(0);
                    track_len.len() - 1
                });
                track_len[t] += 1;
                by_frame
                    .entry((video.clone(), a.frame_id))
                    .or_default()
                    .push((region_track.len(), a.bbox));
                region_track.push(t);
            }
        }
        Self {
            region_track,
            track_len,
            by_frame,
            frames,
        }
    }
}

/// Region (RBDC) and track (TBDC) curves from one threshold sweep.
pub fn detection_curves(
    detections: &[ScoredRegion],
    gt: &BTreeMap<String, GroundTruth>,
    params: MatchParams,
    exec: Execution,
) -> Result<(EvalResult, EvalResult), EvalError> {
    check_videos(detections, gt)?;
    let index = GtIndex::new(detections, gt);
    let n_regions = index.region_track.len();
    if n_regions == 0 {
        return Err(EvalError::EmptyGroundTruth);
    }
    let n_tracks = index.track_len.len();
    let frames = index.frames.max(1) as f64;

    let matches: Vec<Vec<usize>> = exec.map(detections, |d| {
        index
            .by_frame
            .get(&(d.video_id.clone(), d.frame_id as i64))
            .map(|cands| {
                cands
                    .iter()
                    .filter(|(_, b)| d.bbox.iou(b) >= params.iou_min)
                    .map(|&(i, _)| i)
                    .collect()
            })
            .unwrap_or_default()
    });

    let mut order: Vec<usize> = (0..detections.len()).collect();
    order.sort_by(|&a, &b| detections[b].score.total_cmp(&detections[a].score));

    let mut detected = vec![false; n_regions];
    let mut track_hits = vec![0usize; n_tracks];
    let mut track_detected = vec![false; n_tracks];
    let (mut regions_found, mut tracks_found, mut false_pos) = (0usize, 0usize, 0usize);

    let mut region_curve = vec![(0.0, 0.0)];
    let mut track_curve = vec![(0.0, 0.0)];
    let mut k = 0;
    while k < order.len() {
        let s = detections[order[k]].score;
        while k < order.len() && detections[order[k]].score == s {
            let m = &matches[order[k]];
            if m.is_empty() {
                false_pos += 1;
            }
            for &r in m {
                if detected[r] {
                    continue;
                }
                detected[r] = true;
                regions_found += 1;
                let t = index.region_track[r];
                track_hits[t] += 1;
                let coverage = track_hits[t] as f64 / index.track_len[t] as f64;
                if !track_detected[t] && coverage >= params.track_coverage_min {
                    track_detected[t] = true;
                    tracks_found += 1;
                }
            }
            k += 1;
        }
        let x = false_pos as f64 / frames;
        region_curve.push((x, regions_found as f64 / n_regions as f64));
        track_curve.push((x, tracks_found as f64 / n_tracks as f64));
    }

    let finish = |criterion, curve: Vec<(f64, f64)>| {
        let curve = clip_curve(&curve, 1.0);
        EvalResult {
            criterion,
            auc: trapezoid(&curve),
            curve,
        }
    };
    Ok((
        finish(Criterion::Rbdc, region_curve),
        finish(Criterion::Tbdc, track_curve),
    ))
}

/// Region-based detection criterion.
pub fn rbdc(
    detections: &[ScoredRegion],
    gt: &BTreeMap<String, GroundTruth>,
    iou_min: f64,
) -> Result<EvalResult, EvalError> {
    let params = MatchParams {
        iou_min,
        ..MatchParams::default()
    };
    Ok(detection_curves(detections, gt, params, Execution::default())?.0)
}

/// Track-based detection criterion.
pub fn tbdc(
    detections: &[ScoredRegion],
    gt: &BTreeMap<String, GroundTruth>,
    iou_min: f64,
    track_coverage_min: f64,
) -> Result<EvalResult, EvalError> {
    let params = MatchParams {
        iou_min,
        track_coverage_min,
    };
    Ok(detection_curves(detections, gt, params, Execution::default())?.1)
}

/// All three criteria.
pub fn evaluate_all(
    regions: &[ScoredRegion],
    gt: &BTreeMap<String, GroundTruth>,
    params: MatchParams,
    exec: Execution,
) -> Result<[EvalResult; 3], EvalError> {
    let frame = frame_level_auc_from_regions(regions, gt)?;
    let (region, track) = detection_curves(regions, gt, params, exec)?;
    Ok([frame, region, track])
}

/// Row-major grid of per-pixel anomaly scores.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMap {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl ScoreMap {
    /// `None` unless both dimensions are positive and `values` fills the grid.
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Option<Self> {
        (width > 0 && height > 0 && values.len() == width * height).then_some(Self {
            width,
            height,
            values,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }
}

/// One connected component of above-threshold pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskRegion {
    /// Pixel extent, half-open: a component spanning columns `a..=b` has
    /// `x1 = a`, `x2 = b + 1`.
    pub bbox: BBox,
    pub score: f64,
    pub pixels: usize,
}

impl MaskRegion {
    pub fn into_scored(self, video_id: &str, frame_id: u64) -> ScoredRegion {
        ScoredRegion {
            video_id: video_id.to_owned(),
            frame_id,
            track_id: 0,
            bbox: self.bbox,
            score: self.score,
            provenance: Provenance::ScoreMap,
            dominant: None,
        }
    }
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// Threshold a score map (strictly above `threshold`), label 8-connected
/// components, and return the tight box of every component with at least
/// `min_pixels` pixels, ordered by each component's first pixel in raster order.
pub fn mask_to_regions(map: &ScoreMap, threshold: f64, min_pixels: usize) -> Vec<MaskRegion> {
    let (w, h) = (map.width, map.height);
    let on: Vec<bool> = map.values.iter().map(|&v| v > threshold).collect();
    let mut parent: Vec<usize> = (0..w * h).collect();

    // First pass: union each foreground pixel with its already-visited neighbors.
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            if !on[i] {
                continue;
            }
            let mut neighbors = [None; 4];
            if x > 0 {
                neighbors[0] = Some(i - 1);
            }
            if y > 0 {
                neighbors[1] = Some(i - w);
                if x > 0 {
                    neighbors[2] = Some(i - w - 1);
                }
                if x + 1 < w {
                    neighbors[3] = Some(i - w + 1);
                }
            }
            for j in neighbors.into_iter().flatten() {
                if on[j] {
                    let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                    if a != b {
                        parent[a.max(b)] = a.min(b);
                    }
                }
            }
        }
    }

    struct Acc {
        x0: usize,
        y0: usize,
        x1: usize,
        y1: usize,
        score: f64,
        pixels: usize,
        first: usize,
    }
    let mut comps: BTreeMap<usize, Acc> = BTreeMap::new();
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            if !on[i] {
                continue;
            }
            let root = find(&mut parent, i);
            let v = map.values[i];
            comps
                .entry(root)
                .and_modify(|a| {
                    a.x0 = a.x0.min(x);
                    a.x1 = a.x1.max(x);
                    a.y1 = a.y1.max(y);
                    a.score = a.score.max(v);
                    a.pixels += 1;
                })
                .or_insert(Acc {
                    x0: x,
                    y0: y,
                    x1: x,
                    y1: y,
                    score: v,
                    pixels: 1,
                    first: i,
                });
        }
    }

    let mut out: Vec<(usize, MaskRegion)> = comps
        .into_values()
        .filter(|a| a.pixels >= min_pixels)
        .map(|a| {
            let bbox = BBox::new(
                a.x0 as f64,
                a.y0 as f64,
                (a.x1 + 1) as f64,
                (a.y1 + 1) as f64,
            )
            .expect("non-empty component has a positive extent");
            (
                a.first,
                MaskRegion {
                    bbox,
                    score: a.score,
                    pixels: a.pixels,
                },
            )
        })
        .collect();
    out.sort_by_key(|(first, _)| *first);
    out.into_iter().map(|(_, r)| r).collect()
}
