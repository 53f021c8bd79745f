//! Nearest-exemplar anomaly scores for test frames.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::exemplar::ExemplarModel;
use crate::geom::BBox;
use crate::metric::{node_distance_detail, pair_distance_detail, Attribute};
use crate::par::Execution;
use crate::scenegraph::{FrameGraph, Node};

/// Default detection threshold on region scores.
pub const DEFAULT_ANOMALY_THRESHOLD: f64 = 0.5;

/// Score given when the relevant exemplar set is empty.
pub const MAX_ANOMALY_SCORE: f64 = f64::MAX;

/// Where a region's score came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    Isolated,
    /// Member of the highest-scoring edge the node belongs to.
    PairMember {
        partner_index: usize,
        partner_track: u64,
    },
    /// Component of a thresholded per-pixel score map.
    ScoreMap,
}

/// One scored object box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredRegion {
    pub video_id: String,
    pub frame_id: u64,
    pub track_id: u64,
    pub bbox: BBox,
    pub score: f64,
    pub provenance: Provenance,
    /// Attribute whose z-score set the distance to the nearest exemplar;
    /// absent when the exemplar set was empty.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dominant: Option<Attribute>,
}

/// Distance to the nearest isolated-node exemplar, and the dominating attribute.
pub fn score_isolated_detail(node: &Node, model: &ExemplarModel) -> (f64, Option<Attribute>) {
    model
        .iso
        .iter()
        .map(|e| node_distance_detail(node, e, &model.constants))
        .fold((MAX_ANOMALY_SCORE, None), |best, (d, a)| {
            if d < best.0 {
                (d, Some(a))
            } else {
                best
            }
        })
}

pub fn score_isolated(node: &Node, model: &ExemplarModel) -> f64 {
    score_isolated_detail(node, model).0
}

/// Distance to the nearest node-pair exemplar, and the dominating attribute.
pub fn score_pair_detail(pair: (&Node, &Node), model: &ExemplarModel) -> (f64, Option<Attribute>) {
    model
        .pairs
        .iter()
        .map(|(a, b)| pair_distance_detail(pair, (a, b), &model.constants))
        .fold((MAX_ANOMALY_SCORE, None), |best, (d, a)| {
            if d < best.0 {
                (d, Some(a))
            } else {
                best
            }
        })
}

pub fn score_pair(pair: (&Node, &Node), model: &ExemplarModel) -> f64 {
    score_pair_detail(pair, model).0
}

/// One region per node: isolated nodes carry their own score, nodes in
/// edges the maximum score over their edges. Regions follow node order.
pub fn score_frame(frame: &FrameGraph, model: &ExemplarModel) -> Vec<ScoredRegion> {
    let g = &frame.graph;
    let mut best: Vec<Option<(f64, Option<Attribute>, Provenance)>> = vec![None; g.nodes.len()];

    for &i in &g.isolated {
        let (score, dominant) = score_isolated_detail(&g.nodes[i], model);
        best[i] = Some((score, dominant, Provenance::Isolated));
    }
    for &(i, j) in &g.edges {
        let (score, dominant) = score_pair_detail(g.pair((i, j)), model);
        for (me, partner) in [(i, j), (j, i)] {
            if best[me].is_none_or(|(s, _, _)| score > s) {
                best[me] = Some((
                    score,
                    dominant,
                    Provenance::PairMember {
                        partner_index: partner,
                        partner_track: frame.track_ids[partner],
                    },
                ));
            }
        }
    }

    best.into_iter()
        .enumerate()
        .filter_map(|(i, b)| {
            b.map(|(score, dominant, provenance)| ScoredRegion {
                video_id: frame.video_id.clone(),
                frame_id: frame.frame_id,
                track_id: frame.track_ids[i],
                bbox: frame.boxes[i],
                score,
                provenance,
                dominant,
            })
        })
        .collect()
}

/// Score every frame; output is in input frame order.
pub fn score_frames(
    frames: &[FrameGraph],
    model: &ExemplarModel,
    exec: Execution,
) -> Vec<ScoredRegion> {
    exec.map(frames, |f| score_frame(f, model))
        .into_iter()
        .flatten()
        .collect()
}

/// Regions scoring strictly above `threshold`, in input order.
pub fn detect(regions: &[ScoredRegion], threshold: f64) -> Vec<ScoredRegion> {
    regions
        .iter()
        .filter(|r| r.score > threshold)
        .cloned()
        .collect()
}

#[derive(Debug, thiserror::Error)]
pub enum ScoresFileError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("scores line {line}: {source}")]
    Parse {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
}

/// Write regions as line-delimited JSON.
pub fn write_scores<W: Write>(regions: &[ScoredRegion], mut writer: W) -> std::io::Result<()> {
    for r in regions {
        serde_json::to_writer(&mut writer, r)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()
}

pub fn read_scores<R: BufRead>(reader: R) -> Result<Vec<ScoredRegion>, ScoresFileError> {
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line).map_err(|source| ScoresFileError::Parse {
                line: idx + 1,
                source,
            })?,
        );
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{Point, Trajectory};
    use crate::metric::NormalizationConstants;
    use crate::scenegraph::{build_graph, BoxSize};

    fn node(x: f64, y: f64, class_id: u32) -> Node {
        Node {
            size: BoxSize::new(40.0, 100.0).unwrap(),
            class_id,
            center: Point::new(x, y),
            trajectory: Trajectory::stationary(Point::new(x, y), 30).unwrap(),
            pose: None,
        }
    }

    fn model(
        iso: Vec<Node>,
        pairs: Vec<(Node, Node)>,
        constants: NormalizationConstants,
    ) -> ExemplarModel {
        ExemplarModel {
            exemplar_threshold: 0.65,
            edge_threshold: 250.0,
            trajectory_len: 30,
            constants,
            class_map: Default::default(),
            iso,
            pairs,
        }
    }

    fn frame(nodes: Vec<Node>) -> FrameGraph {
        let boxes = nodes.iter().map(Node::bbox).collect();
        let track_ids = (0..nodes.len() as u64).map(|i| i + 10).collect();
        FrameGraph {
            video_id: "v".into(),
            frame_id: 4,
            track_ids,
            boxes,
            graph: build_graph(nodes, 250.0),
        }
    }

    fn nonneg_constants() -> NormalizationConstants {
        NormalizationConstants::from_parts([
            (300.0, 200.0),
            (1.0, 2.0),
            (0.4, 0.5),
            (3.0, 4.0),
            (50.0, 30.0),
        ])
        .unwrap()
    }

    #[test]
    fn isolated_examples() {
        let k = nonneg_constants();
        let e = node(100.0, 100.0, 0);
        let m = model(vec![node(900.0, 300.0, 1), e.clone()], vec![], k);
        let s = score_isolated(&e, &m);
        assert!(s <= 0.0);
        assert_eq!(s, k.self_distance());

        let empty = model(vec![], vec![], k);
        assert_eq!(score_isolated(&e, &empty), MAX_ANOMALY_SCORE);

        let only_class = model(
            vec![node(100.0, 100.0, 1)],
            vec![],
            NormalizationConstants::identity(),
        );
        assert_eq!(
            score_isolated_detail(&e, &only_class),
            (1.0, Some(Attribute::Class))
        );
    }

    #[test]
    fn pair_examples() {
        let k = nonneg_constants();
        let a = node(100.0, 100.0, 0);
        let b = node(140.0, 100.0, 1);
        let m = model(
            vec![],
            vec![
                (a.clone(), b.clone()),
                (node(0.0, 0.0, 2), node(10.0, 0.0, 2)),
            ],
            k,
        );
        let s = score_pair((&a, &b), &m);
        assert!(s <= 0.0);
        assert_eq!(s, score_pair((&b, &a), &m));
        assert_eq!(
            score_pair((&a, &b), &model(vec![], vec![], k)),
            MAX_ANOMALY_SCORE
        );
    }

    #[test]
    fn frame_counting() {
        // One isolated node far away, one edge.
        let f = frame(vec![
            node(1500.0, 900.0, 0),
            node(100.0, 100.0, 0),
            node(150.0, 100.0, 1),
        ]);
        assert_eq!(f.graph.edges, vec![(1, 2)]);
        let m = model(
            vec![node(0.0, 0.0, 0)],
            vec![(node(0.0, 0.0, 0), node(0.0, 0.0, 1))],
            nonneg_constants(),
        );
        let regions = score_frame(&f, &m);
        assert_eq!(regions.len(), 3);
        assert_eq!(regions[0].provenance, Provenance::Isolated);
        assert_eq!(
            regions[1].provenance,
            Provenance::PairMember {
                partner_index: 2,
                partner_track: 12
            }
        );
        assert_eq!(regions[1].score, regions[2].score);
        assert_eq!(regions[2].track_id, 12);
        assert!(score_frame(&frame(vec![]), &m).is_empty());
    }

    #[test]
    fn node_in_two_edges_takes_max() {
        // Hub at the middle connects to a near-match pair and a poor match.
        let k = NormalizationConstants::identity();
        let hub = node(500.0, 500.0, 0);
        let left = node(320.0, 500.0, 0);
        let right = node(680.0, 500.0, 1);
        let f = frame(vec![left.clone(), hub.clone(), right.clone()]);
        assert_eq!(f.graph.edges, vec![(0, 1), (1, 2)]);

        // Exemplar pair shifted so each edge has a known distance under
        // identity constants: location offset 0.2 for the first edge and
        // 0.9 for the second.
        let shift = |n: &Node, dx: f64| {
            let mut m = n.clone();
            m.center = Point::new(n.center.x + dx, n.center.y);
            m.trajectory = m.trajectory.translated(dx, 0.0);
            m
        };
        let m = model(
            vec![],
            vec![
                (shift(&left, 0.2), shift(&hub, 0.2)),
                (shift(&hub, 0.9), shift(&right, 0.9)),
            ],
            k,
        );
        let s01 = score_pair((&left, &hub), &m);
        let s12 = score_pair((&hub, &right), &m);
        assert!((s01 - 0.2).abs() < 1e-9, "{s01}");
        assert!((s12 - 0.9).abs() < 1e-9, "{s12}");

        let regions = score_frame(&f, &m);
        assert_eq!(regions.len(), 3);
        assert_eq!(regions[1].score, s12);
        assert_eq!(
            regions[1].provenance,
            Provenance::PairMember {
                partner_index: 2,
                partner_track: 12
            }
        );
    }

    fn region(score: f64) -> ScoredRegion {
        ScoredRegion {
            video_id: "v".into(),
            frame_id: 0,
            track_id: 0,
            bbox: BBox::new(0.0, 0.0, 1.0, 1.0).unwrap(),
            score,
            provenance: Provenance::Isolated,
            dominant: None,
        }
    }

    #[test]
    fn detect_filters_strictly_above() {
        let rs = vec![region(-0.3), region(0.49), region(0.51), region(0.5)];
        let d = detect(&rs, 0.5);
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].score, 0.51);
        assert_eq!(detect(&rs, f64::NEG_INFINITY).len(), 4);
        assert!(detect(&[], 0.5).is_empty());
    }

    #[test]
    fn scores_file_round_trip() {
        let mut r = region(MAX_ANOMALY_SCORE);
        r.provenance = Provenance::PairMember {
            partner_index: 3,
            partner_track: 9,
        };
        r.dominant = Some(Attribute::Trajectory);
        let rs = vec![r, region(-0.25)];
        let mut buf = Vec::new();
        write_scores(&rs, &mut buf).unwrap();
        assert_eq!(read_scores(&buf[..]).unwrap(), rs);
    }
}
