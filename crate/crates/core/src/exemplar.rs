//! Exemplar selection and the persisted model.
//!
//! Selection is a single greedy pass: an element joins the exemplar set when
//! it is farther than `th` from every exemplar chosen so far. The output is
//! order-dependent, so the pass itself is never parallelized; independent
//! videos are.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use serde_json::value::RawValue;
use sha2::{Digest, Sha256};

use crate::metric::{node_distance, pair_distance, MetricError, NormalizationConstants};
use crate::scenegraph::{Node, NodePair, SceneGraph};

/// Default exemplar selection threshold.
pub const DEFAULT_EXEMPLAR_THRESHOLD: f64 = 0.65;

pub const MODEL_FORMAT: &str = "scenegraph-vad-model";
pub const MODEL_VERSION: u32 = 1;

/// Greedy exemplar selection in input order.
///
/// The first element is always kept; each later element is kept iff
/// `dist(element, e) > th` for every exemplar `e` kept so far.
pub fn select_exemplars<T, I, F>(items: I, th: f64, mut dist: F) -> Vec<T>
where
    I: IntoIterator<Item = T>,
    F: FnMut(&T, &T) -> f64,
{
    let mut exemplars: Vec<T> = Vec::new();
    for item in items {
        if exemplars.iter().all(|e| dist(&item, e) > th) {
            exemplars.push(item);
        }
    }
    exemplars
}

/// Concatenate per-video exemplar sets in the given order and select again.
pub fn merge_video_exemplars<T, F>(per_video: Vec<Vec<T>>, th: f64, dist: F) -> Vec<T>
where
    F: FnMut(&T, &T) -> f64,
{
    select_exemplars(per_video.into_iter().flatten(), th, dist)
}

/// Exemplars selected from one video.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct VideoExemplars {
    pub iso: Vec<Node>,
    pub pairs: Vec<NodePair>,
}

/// Select isolated-node exemplars from every isolated node and pair
/// exemplars from every edge, scanning frames in order.
pub fn build_video_model<'a, G>(graphs: G, th: f64, k: &NormalizationConstants) -> VideoExemplars
where
    G: IntoIterator<Item = &'a SceneGraph>,
    G::IntoIter: Clone,
{
    let graphs = graphs.into_iter();
    let iso_candidates = graphs
        .clone()
        .flat_map(|g| g.isolated.iter().map(move |&i| &g.nodes[i]));
    let pair_candidates = graphs.flat_map(|g| g.edges.iter().map(move |&e| g.pair(e)));

    let iso = select_exemplars(iso_candidates, th, |a, b| node_distance(a, b, k));
    let pairs = select_exemplars(pair_candidates, th, |p, q| pair_distance(*p, *q, k));
    VideoExemplars {
        iso: iso.into_iter().cloned().collect(),
        pairs: pairs
            .into_iter()
            .map(|(a, b)| (a.clone(), b.clone()))
            .collect(),
    }
}

/// Merge per-video exemplar sets (isolated and pair sets independently).
pub fn merge_models(
    per_video: Vec<VideoExemplars>,
    th: f64,
    k: &NormalizationConstants,
) -> VideoExemplars {
    let (iso, pairs): (Vec<_>, Vec<_>) = per_video.into_iter().map(|v| (v.iso, v.pairs)).unzip();
    VideoExemplars {
        iso: merge_video_exemplars(iso, th, |a, b| node_distance(a, b, k)),
        pairs: merge_video_exemplars(pairs, th, |p, q| {
            pair_distance((&p.0, &p.1), (&q.0, &q.1), k)
        }),
    }
}

/// Everything needed to score new video: exemplar sets, normalization
/// constants and the graph-building parameters they were built with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExemplarModel {
    pub exemplar_threshold: f64,
    pub edge_threshold: f64,
    pub trajectory_len: usize,
    pub constants: NormalizationConstants,
    #[serde(default)]
    pub class_map: BTreeMap<u32, String>,
    pub iso: Vec<Node>,
    pub pairs: Vec<NodePair>,
}

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("model file is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("not a model file (format {0:?})")]
    Format(String),
    #[error("unsupported model version {found} (expected {MODEL_VERSION})")]
    Version { found: u32 },
    #[error("model checksum mismatch: file says {expected}, payload hashes to {actual}")]
    Checksum { expected: String, actual: String },
    #[error("invalid model: {0}")]
    Invalid(String),
    #[error(transparent)]
    Constants(#[from] MetricError),
}

impl ExemplarModel {
    /// Check the structural invariants a scorer relies on.
    pub fn validate(&self) -> Result<(), ModelError> {
        self.constants.validate()?;
        if !(self.exemplar_threshold.is_finite() && self.exemplar_threshold > 0.0) {
            return Err(ModelError::Invalid(format!(
                "exemplar threshold {}",
                self.exemplar_threshold
            )));
        }
        if !(self.edge_threshold.is_finite() && self.edge_threshold > 0.0) {
            return Err(ModelError::Invalid(format!(
                "edge threshold {}",
                self.edge_threshold
            )));
        }
        if self.trajectory_len < 2 {
            return Err(ModelError::Invalid(format!(
                "trajectory length {}",
                self.trajectory_len
            )));
        }
        let nodes = self
            .iso
            .iter()
            .chain(self.pairs.iter().flat_map(|(a, b)| [a, b]));
        if let Some(n) = nodes
            .into_iter()
            .find(|n| n.trajectory.len() != self.trajectory_len)
        {
            return Err(ModelError::Invalid(format!(
                "exemplar trajectory has {} points, model length is {}",
                n.trajectory.len(),
                self.trajectory_len
            )));
        }
        Ok(())
    }
}

#[derive(Serialize)]
struct EnvelopeOut<'a> {
    format: &'a str,
    version: u32,
    checksum: String,
    model: &'a RawValue,
}

#[derive(Deserialize)]
struct EnvelopeIn<'a> {
    format: String,
    version: u32,
    checksum: String,
    #[serde(borrow)]
    model: &'a RawValue,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Write `model` as a versioned, checksummed JSON document.
pub fn save_model<W: Write>(model: &ExemplarModel, mut sink: W) -> Result<(), ModelError> {
    model.validate()?;
    let payload = serde_json::to_string(model)?;
    let raw = RawValue::from_string(payload)?;
    let envelope = EnvelopeOut {
        format: MODEL_FORMAT,
        version: MODEL_VERSION,
        checksum: sha256_hex(raw.get().as_bytes()),
        model: &raw,
    };
    serde_json::to_writer(&mut sink, &envelope)?;
    sink.write_all(b"\n")?;
    sink.flush()?;
    Ok(())
}

/// Read a model written by [`save_model`], verifying format, version and checksum.
pub fn load_model<R: Read>(mut source: R) -> Result<ExemplarModel, ModelError> {
    let mut text = String::new();
    source.read_to_string(&mut text)?;
    let envelope: EnvelopeIn<'_> = serde_json::from_str(&text)?;
    if envelope.format != MODEL_FORMAT {
        return Err(ModelError::Format(envelope.format));
    }
    if envelope.version != MODEL_VERSION {
        return Err(ModelError::Version {
            found: envelope.version,
        });
    }
    let actual = sha256_hex(envelope.model.get().as_bytes());
    if actual != envelope.checksum {
        return Err(ModelError::Checksum {
            expected: envelope.checksum,
            actual,
        });
    }
    let model: ExemplarModel = serde_json::from_str(envelope.model.get())?;
    model.validate()?;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{Point, Pose, Trajectory};
    use crate::scenegraph::{build_graph, BoxSize};

    fn abs(a: &f64, b: &f64) -> f64 {
        (a - b).abs()
    }

    /// Brute-force trace of the greedy pass: for each position, check the
    /// exemplar set accumulated over the prefix.
    fn greedy_trace(xs: &[f64], th: f64) -> Vec<f64> {
        let mut kept: Vec<f64> = Vec::new();
        for (i, &x) in xs.iter().enumerate() {
            let nearest = kept
                .iter()
                .map(|e| (x - e).abs())
                .fold(f64::INFINITY, f64::min);
            if i == 0 || nearest > th {
                kept.push(x);
            }
        }
        kept
    }

    #[test]
    fn duplicates_collapse() {
        assert_eq!(select_exemplars(vec![1.5, 1.5, 1.5], 0.1, abs), vec![1.5]);
        assert!(select_exemplars(Vec::<f64>::new(), 0.1, abs).is_empty());
    }

    #[test]
    fn spread_out_sequence_is_unchanged() {
        let xs = vec![0.0, 5.0, -5.0, 11.0];
        assert_eq!(select_exemplars(xs.clone(), 1.0, abs), xs);
    }

    #[test]
    fn scalar_greedy_example() {
        let xs = [0.0, 0.3, 1.0, 1.2];
        let expected = greedy_trace(&xs, 0.5);
        assert_eq!(expected, vec![0.0, 1.0]);
        assert_eq!(select_exemplars(xs, 0.5, abs), expected);
    }

    #[test]
    fn merge_examples() {
        let a = vec![0.0, 1.0];
        assert_eq!(
            merge_video_exemplars(vec![a.clone(), a.clone()], 0.5, abs),
            a
        );
        assert_eq!(
            merge_video_exemplars(vec![vec![0.0, 3.0], vec![6.0, 9.0]], 0.5, abs),
            vec![0.0, 3.0, 6.0, 9.0]
        );
        let b = vec![0.2, 1.1];
        let union: Vec<f64> = a.iter().chain(&b).copied().collect();
        let expected = greedy_trace(&union, 0.5);
        assert_eq!(expected, vec![0.0, 1.0]);
        assert_eq!(merge_video_exemplars(vec![a, b], 0.5, abs), expected);
    }

    fn node(x: f64, y: f64, class_id: u32) -> Node {
        Node {
            size: BoxSize::new(40.0, 100.0).unwrap(),
            class_id,
            center: Point::new(x, y),
            trajectory: Trajectory::stationary(Point::new(x, y), 30).unwrap(),
            pose: None,
        }
    }

    #[test]
    fn video_without_edges_has_no_pair_exemplars() {
        let g = build_graph(vec![node(0.0, 0.0, 0), node(900.0, 0.0, 1)], 250.0);
        let v = build_video_model([&g, &g], 0.65, &NormalizationConstants::identity());
        assert!(v.pairs.is_empty());
        assert_eq!(v.iso.len(), 2);
    }

    #[test]
    fn repeated_frame_matches_single_frame() {
        let g = build_graph(
            vec![
                node(0.0, 0.0, 0),
                node(900.0, 0.0, 1),
                node(100.0, 500.0, 0),
                node(120.0, 510.0, 2),
            ],
            250.0,
        );
        let k = NormalizationConstants::identity();
        let once = build_video_model([&g], 0.65, &k);
        let many = build_video_model(vec![&g; 7], 0.65, &k);
        assert_eq!(once, many);
        assert_eq!(once.pairs.len(), 1);
    }

    #[test]
    fn distinct_frames_add_up() {
        // With identity constants, any two nodes of different class are at
        // distance >= 1 > th; same class at different places are at
        // location distance >= 100.
        let k = NormalizationConstants::identity();
        let g1 = build_graph(vec![node(0.0, 0.0, 0), node(1000.0, 0.0, 1)], 250.0);
        let g2 = build_graph(
            vec![
                node(0.0, 600.0, 0),
                node(1000.0, 600.0, 1),
                node(1500.0, 0.0, 2),
            ],
            250.0,
        );
        let v = build_video_model([&g1, &g2], 0.65, &k);
        // Oracle: every instance is farther than th from all others.
        let all: Vec<&Node> = g1.nodes.iter().chain(&g2.nodes).collect();
        for (i, a) in all.iter().enumerate() {
            for b in &all[i + 1..] {
                assert!(node_distance(a, b, &k) > 0.65);
            }
        }
        assert_eq!(v.iso.len(), 5);
    }

    fn sample_model(n_iso: usize, n_pairs: usize) -> ExemplarModel {
        let pose = Pose::new(std::array::from_fn(|i| {
            Point::new(0.1 * i as f64, 1.0 / (i as f64 + 3.0))
        }));
        let mk = |i: usize| {
            let mut n = node(i as f64 * 1.37, 1080.0 / (i as f64 + 7.0), (i % 3) as u32);
            n.trajectory = Trajectory::new(
                (0..30)
                    .map(|t| Point::new(t as f64 / 3.0, i as f64 * 0.1))
                    .collect(),
            )
            .unwrap();
            if i.is_multiple_of(2) {
                n.pose = Some(pose.clone());
            }
            n
        };
        ExemplarModel {
            exemplar_threshold: 0.65,
            edge_threshold: 250.0,
            trajectory_len: 30,
            constants: NormalizationConstants::from_parts([
                (371.123456789, 211.9876543),
                (2.0 / 3.0, 0.1),
                (0.41, 0.49),
                (1e-7, 1e-6),
                (57.5, 33.3),
            ])
            .unwrap(),
            class_map: [(0, "person".to_owned()), (1, "bicycle".to_owned())].into(),
            iso: (0..n_iso).map(mk).collect(),
            pairs: (0..n_pairs).map(|i| (mk(i), mk(i + 1000))).collect(),
        }
    }

    #[test]
    fn round_trip_empty_and_full() {
        for (ni, np) in [(0, 0), (100, 50)] {
            let m = sample_model(ni, np);
            let mut buf = Vec::new();
            save_model(&m, &mut buf).unwrap();
            let back = load_model(&buf[..]).unwrap();
            assert_eq!(back, m);
            // Byte-stable on re-save.
            let mut again = Vec::new();
            save_model(&back, &mut again).unwrap();
            assert_eq!(buf, again);
        }
    }

    #[test]
    fn tampering_is_detected() {
        let m = sample_model(3, 2);
        let mut buf = Vec::new();
        save_model(&m, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();

        let bad_version = text.replacen("\"version\":1", "\"version\":2", 1);
        assert!(matches!(
            load_model(bad_version.as_bytes()),
            Err(ModelError::Version { found: 2 })
        ));

        let bad_payload = text.replacen(
            "\"exemplar_threshold\":0.65",
            "\"exemplar_threshold\":0.66",
            1,
        );
        assert!(matches!(
            load_model(bad_payload.as_bytes()),
            Err(ModelError::Checksum { .. })
        ));

        let bad_format = text.replacen(MODEL_FORMAT, "something-else", 1);
        assert!(matches!(
            load_model(bad_format.as_bytes()),
            Err(ModelError::Format(_))
        ));

        assert!(matches!(
            load_model(&text.as_bytes()[..text.len() / 2]),
            Err(ModelError::Json(_))
        ));
    }
}
