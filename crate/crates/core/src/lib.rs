//! Exemplar-based video anomaly detection over spatio-temporal scene graphs.
//!
//! Objects in each frame become graph nodes (box size, class, center,
//! look-ahead trajectory, optional pose). Nearby objects are joined by
//! edges; the rest are isolated. Nominal video is summarized by two greedy
//! exemplar sets, one of isolated nodes and one of node pairs, and test
//! objects are scored by their distance to the nearest exemplar.
//!
//! The pipeline, stage by stage:
//!
//! - [`ingest`]: track streams and annotation files
//! - [`scenegraph`]: nodes, pseudo-depth edges, per-frame graphs
//! - [`metric`]: attribute distances, normalization, node and pair distances
//! - [`exemplar`]: greedy selection, cross-video merging, model files
//! - [`scoring`]: nearest-exemplar scores and detections
//! - [`eval`]: frame-level AUC, RBDC, TBDC, score-map regions
//! - [`synth`]: deterministic synthetic scenes with ground truth
//! - [`pipeline`]: end-to-end model building and scoring

pub mod eval;
pub mod exemplar;
pub mod geom;
pub mod ingest;
pub mod metric;
pub mod par;
pub mod pipeline;
pub mod scenegraph;
pub mod scoring;
pub mod synth;

pub use exemplar::ExemplarModel;
pub use geom::{BBox, Point, Pose, Trajectory};
pub use ingest::{FrameRecord, GroundTruth, RawObject};
pub use metric::NormalizationConstants;
pub use par::Execution;
pub use scenegraph::{Node, SceneGraph};
pub use scoring::ScoredRegion;
