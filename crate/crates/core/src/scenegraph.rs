//! Frame-to-graph conversion.
//!
//! Each object becomes a [`Node`] carrying its box size, class, center,
//! look-ahead trajectory and optional pose. Two nodes are joined by an edge
//! when their pseudo-depth 3D distance is below the edge threshold `h`; nodes
//! without any edge are isolated.

use serde::{Deserialize, Serialize};

use crate::geom::{BBox, Point, Pose, Trajectory};
use crate::ingest::{FrameRecord, IngestError, RawObject, TrackIndex};
use crate::par::Execution;

/// Edge threshold used at the reference frame height.
pub const REFERENCE_EDGE_THRESHOLD_PX: f64 = 250.0;
/// Frame height the reference edge threshold is calibrated for.
pub const REFERENCE_FRAME_HEIGHT_PX: f64 = 1080.0;

/// Default `h` for a frame of the given height, scaled linearly from
/// 250 px at 1080 px.
pub fn default_edge_threshold(frame_height: f64) -> f64 {
    REFERENCE_EDGE_THRESHOLD_PX * frame_height / REFERENCE_FRAME_HEIGHT_PX
}

#[derive(Debug, thiserror::Error)]
pub enum GraphError {
    #[error("trajectory has {found} points, expected {expected}")]
    TrajectoryLength { expected: usize, found: usize },
    #[error("box size must be positive, got {0}x{1}")]
    BoxSize(f64, f64),
    #[error(transparent)]
    Ingest(#[from] IngestError),
}

/// Bounding-box width and height, both strictly positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 2]", into = "[f64; 2]")]
pub struct BoxSize {
    width: f64,
    height: f64,
}

impl BoxSize {
    pub fn new(width: f64, height: f64) -> Result<Self, GraphError> {
        if width > 0.0 && height > 0.0 && width.is_finite() && height.is_finite() {
            Ok(Self { width, height })
        } else {
            Err(GraphError::BoxSize(width, height))
        }
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn height(&self) -> f64 {
        self.height
    }
}

impl TryFrom<[f64; 2]> for BoxSize {
    type Error = GraphError;

    fn try_from([w, h]: [f64; 2]) -> Result<Self, Self::Error> {
        Self::new(w, h)
    }
}

impl From<BoxSize> for [f64; 2] {
    fn from(b: BoxSize) -> Self {
        [b.width, b.height]
    }
}

/// One object as a graph node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub size: BoxSize,
    pub class_id: u32,
    pub center: Point,
    pub trajectory: Trajectory,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pose: Option<Pose>,
}

impl Node {
    /// Node with the given center and size; the box is implied.
    pub fn bbox(&self) -> BBox {
        BBox::from_center(self.center, self.size.width(), self.size.height())
            .expect("box size is positive by construction")
    }
}

/// Two nodes joined by an edge.
pub type NodePair = (Node, Node);

/// Build a node from a detected object and its look-ahead trajectory.
pub fn build_node(
    obj: &RawObject,
    trajectory: Trajectory,
    trajectory_len: usize,
) -> Result<Node, GraphError> {
    if trajectory.len() != trajectory_len {
        return Err(GraphError::TrajectoryLength {
            expected: trajectory_len,
            found: trajectory.len(),
        });
    }
    Ok(Node {
        size: BoxSize::new(obj.bbox.width(), obj.bbox.height())?,
        class_id: obj.class_id,
        center: obj.bbox.center(),
        trajectory,
        pose: obj.pose.clone(),
    })
}

/// 3D distance between two ground-plane locations, using `|y1 - y2|` as a
/// relative depth: the distance between `(x1, y1, z)` and `(x2, y2, 0)`.
pub fn pseudo_depth_distance(a: Point, b: Point) -> f64 {
    let dx = a.x - b.x;
    let dy = a.y - b.y;
    let dz = dy.abs();
    (dx * dx + dy * dy + dz * dz).sqrt()
}

/// Nodes of one frame with proximity edges.
///
/// `edges` holds index pairs `(i, j)` with `i < j` in lexicographic order;
/// `isolated` lists, ascending, every node that appears in no edge.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SceneGraph {
    pub nodes: Vec<Node>,
    pub edges: Vec<(usize, usize)>,
    pub isolated: Vec<usize>,
}

impl SceneGraph {
    pub fn pair(&self, edge: (usize, usize)) -> (&Node, &Node) {
        (&self.nodes[edge.0], &self.nodes[edge.1])
    }
}

/// Connect every pair of nodes closer than `h` (strictly).
pub fn build_graph(nodes: Vec<Node>, h: f64) -> SceneGraph {
    let n = nodes.len();
    let mut edges = Vec::new();
    let mut connected = vec![false; n];
    for i in 0..n {
        for j in i + 1..n {
            if pseudo_depth_distance(nodes[i].center, nodes[j].center) < h {
                edges.push((i, j));
                connected[i] = true;
                connected[j] = true;
            }
        }
    }
    let isolated = (0..n).filter(|&i| !connected[i]).collect();
    SceneGraph {
        nodes,
        edges,
        isolated,
    }
}

/// A scene graph together with the frame it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameGraph {
    pub video_id: String,
    pub frame_id: u64,
    /// Source track id of each node.
    pub track_ids: Vec<u64>,
    /// Source box of each node.
    pub boxes: Vec<BBox>,
    pub graph: SceneGraph,
}

/// Graph for one frame of a stream.
pub fn frame_graph(
    index: TrackIndex<'_>,
    record: &FrameRecord,
    h: f64,
    trajectory_len: usize,
) -> Result<FrameGraph, GraphError> {
    let mut nodes = Vec::with_capacity(record.objects.len());
    for obj in &record.objects {
        let trajectory = index.trajectory(obj.track_id, record.frame_id, trajectory_len)?;
        nodes.push(build_node(obj, trajectory, trajectory_len)?);
    }
    Ok(FrameGraph {
        video_id: record.video_id.clone(),
        frame_id: record.frame_id,
        track_ids: record.objects.iter().map(|o| o.track_id).collect(),
        boxes: record.objects.iter().map(|o| o.bbox).collect(),
        graph: build_graph(nodes, h),
    })
}

/// Graphs for every frame of a parsed stream, in frame order.
pub fn video_graphs(
    records: &[FrameRecord],
    h: f64,
    trajectory_len: usize,
    exec: Execution,
) -> Result<Vec<FrameGraph>, GraphError> {
    let index = TrackIndex::new(records);
    exec.try_map(records, |record| {
        frame_graph(index, record, h, trajectory_len)
    })
}
