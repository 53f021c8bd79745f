//! Distances between nodes and between node pairs.
//!
//! Five raw attribute distances (location, size, class, pose, trajectory) are
//! z-scored with per-attribute constants estimated from nominal data, and the
//! node distance is the largest of the five z-scores. A node-pair distance
//! tries both member correspondences and keeps the better one.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::geom::{Pose, Trajectory};
use crate::par::Execution;
use crate::scenegraph::{BoxSize, Node, SceneGraph};

/// Lower bound applied to every estimated standard deviation.
pub const SIGMA_FLOOR: f64 = 1e-6;

/// Default cap on the number of node pairs used to estimate constants.
pub const DEFAULT_NORMALIZATION_SAMPLE: usize = 100_000;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricError {
    #[error("trajectory lengths differ: {0} vs {1}")]
    TrajectoryLength(usize, usize),
    #[error("normalization needs at least one node pair")]
    EmptySample,
    #[error("invalid normalization constants for {attribute:?}: mean {mean}, std {std}")]
    InvalidConstants {
        attribute: Attribute,
        mean: f64,
        std: f64,
    },
}

/// The five node attributes compared by [`node_distance`], in evaluation order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Attribute {
    Location,
    Size,
    Class,
    Pose,
    Trajectory,
}

impl Attribute {
    pub const ALL: [Attribute; 5] = [
        Attribute::Location,
        Attribute::Size,
        Attribute::Class,
        Attribute::Pose,
        Attribute::Trajectory,
    ];

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Euclidean distance between node centers.
pub fn location_distance(a: &Node, b: &Node) -> f64 {
    a.center.distance(b.center)
}

/// Width and height differences, each squared and divided by the smaller
/// of the two extents.
pub fn size_distance(a: BoxSize, b: BoxSize) -> f64 {
    let dw = a.width() - b.width();
    let dh = a.height() - b.height();
    (dw * dw / a.width().min(b.width()) + dh * dh / a.height().min(b.height())).sqrt()
}

pub fn class_distance(a: u32, b: u32) -> f64 {
    if a == b {
        0.0
    } else {
        1.0
    }
}

/// Guarded relative difference `|a - b| / max(min(a, b), 1)`.
fn relative_step(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.min(b).max(1.0)
}

/// Distances from the first keypoint to each of the other sixteen.
fn radial_profile(pose: &Pose) -> impl Iterator<Item = f64> + '_ {
    let kp = pose.keypoints();
    kp[1..].iter().map(move |p| kp[0].distance(*p))
}

/// Pose distance over the sixteen radial keypoint distances.
///
/// Zero when either node has no pose.
pub fn pose_distance(a: Option<&Pose>, b: Option<&Pose>) -> f64 {
    match (a, b) {
        (Some(a), Some(b)) => radial_profile(a)
            .zip(radial_profile(b))
            .map(|(da, db)| relative_step(da, db))
            .sum(),
        _ => 0.0,
    }
}

fn trajectory_distance_unchecked(a: &Trajectory, b: &Trajectory) -> f64 {
    a.displacements()
        .zip(b.displacements())
        .map(|((dx1, dy1), (dx2, dy2))| relative_step(dx1, dx2) + relative_step(dy1, dy2))
        .sum()
}

/// Sum over steps of guarded relative differences between signed
/// per-frame displacements, x and y separately.
pub fn trajectory_distance(a: &Trajectory, b: &Trajectory) -> Result<f64, MetricError> {
    if a.len() != b.len() {
        return Err(MetricError::TrajectoryLength(a.len(), b.len()));
    }
    Ok(trajectory_distance_unchecked(a, b))
}

/// Raw attribute distances in [`Attribute::ALL`] order.
///
/// # Panics
///
/// If the two trajectories have different lengths. Nodes built for one
/// model always share its trajectory length.
pub fn attribute_distances(a: &Node, b: &Node) -> [f64; 5] {
    assert_eq!(
        a.trajectory.len(),
        b.trajectory.len(),
        "nodes compared with different trajectory lengths"
    );
    [
        location_distance(a, b),
        size_distance(a.size, b.size),
        class_distance(a.class_id, b.class_id),
        pose_distance(a.pose.as_ref(), b.pose.as_ref()),
        trajectory_distance_unchecked(&a.trajectory, &b.trajectory),
    ]
}

/// Mean and standard deviation of one attribute distance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: f64,
    pub std: f64,
}

impl Standardizer {
    pub fn z(&self, value: f64) -> f64 {
        (value - self.mean) / self.std
    }
}

/// Per-attribute z-scoring constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizationConstants {
    pub location: Standardizer,
    pub size: Standardizer,
    pub class: Standardizer,
    pub pose: Standardizer,
    pub trajectory: Standardizer,
}

impl NormalizationConstants {
    /// Constants from `(mean, std)` pairs in [`Attribute::ALL`] order.
    pub fn from_parts(parts: [(f64, f64); 5]) -> Result<Self, MetricError> {
        let s = parts.map(|(mean, std)| Standardizer { mean, std });
        let k = Self {
            location: s[0],
            size: s[1],
            class: s[2],
            pose: s[3],
            trajectory: s[4],
        };
        k.validate()?;
        Ok(k)
    }

    /// Zero means, unit deviations: z-scores equal raw distances.
    pub fn identity() -> Self {
        Self::from_parts([(0.0, 1.0); 5]).expect("identity constants are valid")
    }

    pub fn get(&self, attribute: Attribute) -> Standardizer {
        match attribute {
            Attribute::Location => self.location,
            Attribute::Size => self.size,
            Attribute::Class => self.class,
            Attribute::Pose => self.pose,
            Attribute::Trajectory => self.trajectory,
        }
    }

    /// Every mean is finite and non-negative, every std at least [`SIGMA_FLOOR`].
    pub fn validate(&self) -> Result<(), MetricError> {
        for attribute in Attribute::ALL {
            let Standardizer { mean, std } = self.get(attribute);
            if !(mean.is_finite() && mean >= 0.0 && std.is_finite() && std >= SIGMA_FLOOR) {
                return Err(MetricError::InvalidConstants {
                    attribute,
                    mean,
                    std,
                });
            }
        }
        Ok(())
    }

    pub fn z_scores(&self, raw: [f64; 5]) -> [f64; 5] {
        let mut out = raw;
        for attribute in Attribute::ALL {
            out[attribute.index()] = self.get(attribute).z(raw[attribute.index()]);
        }
        out
    }

    /// Largest `-mean / std`: the node distance of any node to itself.
    pub fn self_distance(&self) -> f64 {
        Attribute::ALL
            .iter()
            .map(|&a| self.get(a).z(0.0))
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Mean and population standard deviation (floored) of each attribute
/// distance over a sample of node pairs.
pub fn estimate_normalization(
    pairs: &[(&Node, &Node)],
    exec: Execution,
) -> Result<NormalizationConstants, MetricError> {
    if pairs.is_empty() {
        return Err(MetricError::EmptySample);
    }
    let raw = exec.map(pairs, |(a, b)| attribute_distances(a, b));
    let n = raw.len() as f64;
    let mut parts = [(0.0, 0.0); 5];
    for (i, part) in parts.iter_mut().enumerate() {
        let mean = raw.iter().map(|d| d[i]).sum::<f64>() / n;
        let var = raw.iter().map(|d| (d[i] - mean).powi(2)).sum::<f64>() / n;
        *part = (mean, var.sqrt().max(SIGMA_FLOOR));
    }
    NormalizationConstants::from_parts(parts)
}

/// Largest z-scored attribute distance.
pub fn node_distance(a: &Node, b: &Node, k: &NormalizationConstants) -> f64 {
    node_distance_detail(a, b, k).0
}

/// [`node_distance`] together with the attribute that attains it.
/// Ties go to the earliest attribute in [`Attribute::ALL`] order.
pub fn node_distance_detail(a: &Node, b: &Node, k: &NormalizationConstants) -> (f64, Attribute) {
    let z = k.z_scores(attribute_distances(a, b));
    let mut best = (z[0], Attribute::Location);
    for attribute in &Attribute::ALL[1..] {
        let v = z[attribute.index()];
        if v > best.0 {
            best = (v, *attribute);
        }
    }
    best
}

/// Distance between two node pairs: the better of the two member
/// correspondences, each scored by its worse-matching member.
pub fn pair_distance(p: (&Node, &Node), q: (&Node, &Node), k: &NormalizationConstants) -> f64 {
    pair_distance_detail(p, q, k).0
}

/// [`pair_distance`] with the dominating attribute of the chosen correspondence.
pub fn pair_distance_detail(
    p: (&Node, &Node),
    q: (&Node, &Node),
    k: &NormalizationConstants,
) -> (f64, Attribute) {
    let worse = |x: (f64, Attribute), y: (f64, Attribute)| if y.0 > x.0 { y } else { x };
    let straight = worse(
        node_distance_detail(p.0, q.0, k),
        node_distance_detail(p.1, q.1, k),
    );
    let crossed = worse(
        node_distance_detail(p.0, q.1, k),
        node_distance_detail(p.1, q.0, k),
    );
    if crossed.0 < straight.0 {
        crossed
    } else {
        straight
    }
}

/// Draw up to `max_pairs` node pairs uniformly without replacement from all
/// pairs of nodes that share a frame. Returns every such pair when there are
/// at most `max_pairs`, in frame order either way.
pub fn sample_cooccurring_pairs<'a>(
    graphs: &[&'a SceneGraph],
    max_pairs: usize,
    seed: u64,
) -> Vec<(&'a Node, &'a Node)> {
    let per_frame: Vec<usize> = graphs
        .iter()
        .map(|g| g.nodes.len())
        .map(|n| n * n.saturating_sub(1) / 2)
        .collect();
    let total: usize = per_frame.iter().sum();

    let picks: Vec<usize> = if total <= max_pairs {
        (0..total).collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut v = rand::seq::index::sample(&mut rng, total, max_pairs).into_vec();
        v.sort_unstable();
        v
    };

    let mut out = Vec::with_capacity(picks.len());
    let mut frame = 0;
    let mut frame_start = 0;
    for global in picks {
        while global >= frame_start + per_frame[frame] {
            frame_start += per_frame[frame];
            frame += 1;
        }
        let (i, j) = unrank_pair(global - frame_start, graphs[frame].nodes.len());
        let g = graphs[frame];
        out.push((&g.nodes[i], &g.nodes[j]));
    }
    out
}

/// The `rank`-th pair `(i, j)`, `i < j < n`, in lexicographic order.
fn unrank_pair(mut rank: usize, n: usize) -> (usize, usize) {
    let mut i = 0;
    loop {
        let row = n - 1 - i;
        if rank < row {
            return (i, i + 1 + rank);
        }
        rank -= row;
        i += 1;
    }
}
