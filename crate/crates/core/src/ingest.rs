//! Reading detector/tracker output and ground-truth annotation files.
//!
//! A track stream is line-delimited JSON, one [`FrameRecord`] per line:
//!
//! ```text
//! {"video_id":"v01","frame_id":0,"objects":[{"track_id":1,"class_id":0,"bbox":[0,0,10,20]}]}
//! ```
//!
//! Annotation files hold a single JSON document with `total_frame` and a flat
//! `annotations` list, one entry per annotated object per frame.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::geom::{BBox, Pose, Trajectory, TrajectoryLengthError};

/// Default look-ahead length for trajectories.
pub const DEFAULT_TRAJECTORY_LEN: usize = 30;

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {source}")]
    Parse {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("line {line}: frame_id {found} does not follow {previous}")]
    Ordering {
        line: usize,
        previous: u64,
        found: u64,
    },
    #[error("line {line}: video_id {found:?} differs from {expected:?} earlier in the stream")]
    MixedVideo {
        line: usize,
        expected: String,
        found: String,
    },
    #[error("line {line}: track_id {track_id} appears twice in frame {frame_id}")]
    DuplicateTrack {
        line: usize,
        frame_id: u64,
        track_id: u64,
    },
    #[error("track {track_id} is not present in frame {frame_id}")]
    TrackNotFound { track_id: u64, frame_id: u64 },
    #[error(transparent)]
    TrajectoryLength(#[from] TrajectoryLengthError),
    #[error("annotation document: {0}")]
    Json(serde_json::Error),
    #[error("annotation schema: missing or invalid field `{field}`{}", at.map(|i| format!(" in annotations[{i}]")).unwrap_or_default())]
    Schema {
        field: &'static str,
        at: Option<usize>,
    },
    #[error("class map line {line}: expected `<class_id> <name>`")]
    ClassMap { line: usize },
}

/// One detected and tracked object in one frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawObject {
    pub track_id: u64,
    pub class_id: u32,
    pub bbox: BBox,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pose: Option<Pose>,
}

/// All objects seen in one frame of one video.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub video_id: String,
    pub frame_id: u64,
    #[serde(default)]
    pub objects: Vec<RawObject>,
}

impl FrameRecord {
    pub fn object(&self, track_id: u64) -> Option<&RawObject> {
        self.objects.iter().find(|o| o.track_id == track_id)
    }
}

/// Parse a line-delimited track stream. Blank lines are skipped.
pub fn parse_track_stream<R: BufRead>(reader: R) -> Result<Vec<FrameRecord>, IngestError> {
    let mut records: Vec<FrameRecord> = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: FrameRecord =
            serde_json::from_str(&line).map_err(|source| IngestError::Parse {
                line: line_no,
                source,
            })?;
        if let Some(prev) = records.last() {
            if record.video_id != prev.video_id {
                return Err(IngestError::MixedVideo {
                    line: line_no,
                    expected: prev.video_id.clone(),
                    found: record.video_id,
                });
            }
            if record.frame_id <= prev.frame_id {
                return Err(IngestError::Ordering {
                    line: line_no,
                    previous: prev.frame_id,
                    found: record.frame_id,
                });
            }
        }
        for (i, obj) in record.objects.iter().enumerate() {
            if record.objects[..i]
                .iter()
                .any(|o| o.track_id == obj.track_id)
            {
                return Err(IngestError::DuplicateTrack {
                    line: line_no,
                    frame_id: record.frame_id,
                    track_id: obj.track_id,
                });
            }
        }
        records.push(record);
    }
    Ok(records)
}

/// Write records in the track stream format, one line each.
pub fn write_track_stream<W: Write>(records: &[FrameRecord], mut writer: W) -> std::io::Result<()> {
    for record in records {
        serde_json::to_writer(&mut writer, record)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()
}

/// Random access to a parsed stream by frame id and track id.
#[derive(Debug, Clone, Copy)]
pub struct TrackIndex<'a> {
    records: &'a [FrameRecord],
}

impl<'a> TrackIndex<'a> {
    /// `records` must be sorted by strictly increasing `frame_id`, as
    /// [`parse_track_stream`] guarantees.
    pub fn new(records: &'a [FrameRecord]) -> Self {
        debug_assert!(records.windows(2).all(|w| w[0].frame_id < w[1].frame_id));
        Self { records }
    }

    fn position(&self, frame_id: u64) -> Option<usize> {
        self.records
            .binary_search_by_key(&frame_id, |r| r.frame_id)
            .ok()
    }

    pub fn frame(&self, frame_id: u64) -> Option<&'a FrameRecord> {
        self.position(frame_id).map(|i| &self.records[i])
    }

    /// Bbox centers of `track_id` for `len` frames starting at `start_frame`.
    ///
    /// The track ends at the first frame where it is missing, including a
    /// frame id absent from the stream; remaining points repeat the last
    /// observed center.
    pub fn trajectory(
        &self,
        track_id: u64,
        start_frame: u64,
        len: usize,
    ) -> Result<Trajectory, IngestError> {
        let not_found = || IngestError::TrackNotFound {
            track_id,
            frame_id: start_frame,
        };
        let start = self.position(start_frame).ok_or_else(not_found)?;
        let first = self.records[start]
            .object(track_id)
            .ok_or_else(not_found)?
            .bbox
            .center();

        let mut points = Vec::with_capacity(len);
        points.push(first);
        let mut last = first;
        let mut alive = true;
        for t in 1..len {
            if alive {
                let next = self
                    .records
                    .get(start + t)
                    .filter(|r| r.frame_id == start_frame + t as u64)
                    .and_then(|r| r.object(track_id));
                match next {
                    Some(obj) => last = obj.bbox.center(),
                    None => alive = false,
                }
            }
            points.push(last);
        }
        Ok(Trajectory::new(points)?)
    }
}

/// Trajectory of `track_id` over `len` frames from `start_frame`.
/// See [`TrackIndex::trajectory`] for the short-track rule.
pub fn extract_trajectory(
    records: &[FrameRecord],
    track_id: u64,
    start_frame: u64,
    len: usize,
) -> Result<Trajectory, IngestError> {
    TrackIndex::new(records).trajectory(track_id, start_frame, len)
}

/// One annotated anomalous object in one frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthAnnotation {
    pub track_id: i64,
    pub frame_id: i64,
    pub bbox: BBox,
    pub object_type: String,
}

/// Parsed contents of one annotation file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub total_frame: u64,
    pub annotations: Vec<GroundTruthAnnotation>,
}

impl GroundTruth {
    pub fn empty(total_frame: u64) -> Self {
        Self {
            total_frame,
            annotations: Vec::new(),
        }
    }

    /// Annotations grouped by `track_id`, each group in file order.
    pub fn by_track(&self) -> BTreeMap<i64, Vec<&GroundTruthAnnotation>> {
        let mut out: BTreeMap<i64, Vec<&GroundTruthAnnotation>> = BTreeMap::new();
        for a in &self.annotations {
            out.entry(a.track_id).or_default().push(a);
        }
        out
    }

    /// Annotations grouped by `frame_id`, each group in file order.
    pub fn by_frame(&self) -> BTreeMap<i64, Vec<&GroundTruthAnnotation>> {
        let mut out: BTreeMap<i64, Vec<&GroundTruthAnnotation>> = BTreeMap::new();
        for a in &self.annotations {
            out.entry(a.frame_id).or_default().push(a);
        }
        out
    }

    pub fn to_writer<W: Write>(&self, writer: W) -> serde_json::Result<()> {
        serde_json::to_writer_pretty(writer, self)
    }
}

const ANNOTATION_FIELDS: [&str; 4] = ["track_id", "frame_id", "bbox", "object_type"];

/// Parse an annotation document, naming the first missing or mistyped field.
pub fn parse_annotations<R: std::io::Read>(reader: R) -> Result<GroundTruth, IngestError> {
    let doc: Value = serde_json::from_reader(reader).map_err(IngestError::Json)?;
    let schema = |field, at| IngestError::Schema { field, at };

    let total_frame = doc
        .get("total_frame")
        .and_then(Value::as_u64)
        .ok_or(schema("total_frame", None))?;
    let entries = doc
        .get("annotations")
        .and_then(Value::as_array)
        .ok_or(schema("annotations", None))?;

    let mut annotations = Vec::with_capacity(entries.len());
    for (i, entry) in entries.iter().enumerate() {
        for field in ANNOTATION_FIELDS {
            if entry.get(field).is_none() {
                return Err(schema(field, Some(i)));
            }
        }
        let track_id = entry["track_id"]
            .as_i64()
            .ok_or(schema("track_id", Some(i)))?;
        let frame_id = entry["frame_id"]
            .as_i64()
            .ok_or(schema("frame_id", Some(i)))?;
        let object_type = entry["object_type"]
            .as_str()
            .ok_or(schema("object_type", Some(i)))?
            .to_owned();
        let bbox: BBox =
            serde_json::from_value(entry["bbox"].clone()).map_err(|_| schema("bbox", Some(i)))?;
        annotations.push(GroundTruthAnnotation {
            track_id,
            frame_id,
            bbox,
            object_type,
        });
    }
    Ok(GroundTruth {
        total_frame,
        annotations,
    })
}

/// Parse a class map sidecar: `<class_id> <name>` per line, `#` comments allowed.
pub fn parse_class_map<R: BufRead>(reader: R) -> Result<BTreeMap<u32, String>, IngestError> {
    let mut map = BTreeMap::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (id, name) = line
            .split_once(|c: char| c.is_whitespace() || c == ':' || c == ',')
            .ok_or(IngestError::ClassMap { line: idx + 1 })?;
        let id: u32 = id
            .trim()
            .parse()
            .map_err(|_| IngestError::ClassMap { line: idx + 1 })?;
        let name = name.trim();
        if name.is_empty() {
            return Err(IngestError::ClassMap { line: idx + 1 });
        }
        map.insert(id, name.to_owned());
    }
    Ok(map)
}

pub fn write_class_map<W: Write>(
    map: &BTreeMap<u32, String>,
    mut writer: W,
) -> std::io::Result<()> {
    for (id, name) in map {
        writeln!(writer, "{id} {name}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Point;

    fn obj(track_id: u64, bbox: [f64; 4]) -> RawObject {
        RawObject {
            track_id,
            class_id: 0,
            bbox: BBox::try_from(bbox).unwrap(),
            pose: None,
        }
    }

    fn frame(frame_id: u64, objects: Vec<RawObject>) -> FrameRecord {
        FrameRecord {
            video_id: "v".into(),
            frame_id,
            objects,
        }
    }

    /// Track 7 centered at `centers[i]` in frame `i`, 2x2 boxes.
    fn scripted(centers: &[(f64, f64)]) -> Vec<FrameRecord> {
        centers
            .iter()
            .enumerate()
            .map(|(i, &(x, y))| frame(i as u64, vec![obj(7, [x - 1.0, y - 1.0, x + 1.0, y + 1.0])]))
            .collect()
    }

    #[test]
    fn empty_stream() {
        assert!(parse_track_stream(&b""[..]).unwrap().is_empty());
        assert!(parse_track_stream(&b"\n\n"[..]).unwrap().is_empty());
    }

    #[test]
    fn single_object_line() {
        let line = br#"{"video_id":"a","frame_id":3,"objects":[{"track_id":1,"class_id":0,"bbox":[0,0,10,20],"extra":true}],"fps":30}"#;
        let recs = parse_track_stream(&line[..]).unwrap();
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].frame_id, 3);
        assert_eq!(recs[0].objects.len(), 1);
        assert_eq!(recs[0].objects[0].bbox.to_array(), [0.0, 0.0, 10.0, 20.0]);
    }

    #[test]
    fn inverted_bbox_is_a_parse_error_with_line() {
        let text = "{\"video_id\":\"a\",\"frame_id\":0,\"objects\":[]}\n{\"video_id\":\"a\",\"frame_id\":1,\"objects\":[{\"track_id\":1,\"class_id\":0,\"bbox\":[10,0,5,20]}]}\n";
        match parse_track_stream(text.as_bytes()) {
            Err(IngestError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn non_monotone_frames_rejected() {
        let text = "{\"video_id\":\"a\",\"frame_id\":5}\n{\"video_id\":\"a\",\"frame_id\":5}\n";
        assert!(matches!(
            parse_track_stream(text.as_bytes()),
            Err(IngestError::Ordering {
                line: 2,
                previous: 5,
                found: 5
            })
        ));
    }

    #[test]
    fn duplicate_track_in_frame_rejected() {
        let text = r#"{"video_id":"a","frame_id":0,"objects":[{"track_id":1,"class_id":0,"bbox":[0,0,1,1]},{"track_id":1,"class_id":2,"bbox":[0,0,1,1]}]}"#;
        assert!(matches!(
            parse_track_stream(text.as_bytes()),
            Err(IngestError::DuplicateTrack { track_id: 1, .. })
        ));
    }

    #[test]
    fn pose_with_wrong_arity_rejected() {
        let pose: Vec<[f64; 2]> = vec![[0.0, 0.0]; 5];
        let text = format!(
            r#"{{"video_id":"a","frame_id":0,"objects":[{{"track_id":1,"class_id":0,"bbox":[0,0,1,1],"pose":{}}}]}}"#,
            serde_json::to_string(&pose).unwrap()
        );
        assert!(matches!(
            parse_track_stream(text.as_bytes()),
            Err(IngestError::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn stationary_track() {
        let recs = scripted(&[(5.0, 10.0); 30]);
        let t = extract_trajectory(&recs, 7, 0, 30).unwrap();
        assert_eq!(t.points(), &[Point::new(5.0, 10.0); 30][..]);
    }

    #[test]
    fn moving_track_is_arithmetic() {
        let centers: Vec<_> = (0..30).map(|i| (2.0 * i as f64, 0.0)).collect();
        let recs = scripted(&centers);
        let t = extract_trajectory(&recs, 7, 0, 30).unwrap();
        let expected: Vec<_> = (0..30).map(|i| Point::new(2.0 * i as f64, 0.0)).collect();
        assert_eq!(t.points(), &expected[..]);
        assert_eq!(t.points()[29], Point::new(58.0, 0.0));
    }

    #[test]
    fn short_track_is_padded_with_last_center() {
        // Track visible in 10 frames, then 25 empty frames follow.
        let centers: Vec<_> = (0..10).map(|i| (3.0 * i as f64, 1.0)).collect();
        let mut recs = scripted(&centers);
        for f in 10..35 {
            recs.push(frame(f, vec![]));
        }
        // Oracle: simulate the padding rule directly.
        let mut expected: Vec<Point> = centers.iter().map(|&(x, y)| Point::new(x, y)).collect();
        let last = *expected.last().unwrap();
        expected.resize(30, last);

        let t = extract_trajectory(&recs, 7, 0, 30).unwrap();
        assert_eq!(t.points(), &expected[..]);
        assert_eq!(t.len(), 30);
    }

    #[test]
    fn frame_gap_ends_the_track() {
        let mut recs = scripted(&[(0.0, 0.0), (1.0, 0.0), (2.0, 0.0)]);
        // Frame 3 missing from the stream, track reappears at frame 4.
        recs.push(frame(4, vec![obj(7, [9.0, -1.0, 11.0, 1.0])]));
        let t = extract_trajectory(&recs, 7, 0, 6).unwrap();
        assert_eq!(t.points()[3..], [Point::new(2.0, 0.0); 3]);
    }

    #[test]
    fn absent_track_is_a_lookup_error() {
        let recs = scripted(&[(0.0, 0.0)]);
        assert!(matches!(
            extract_trajectory(&recs, 99, 0, 30),
            Err(IngestError::TrackNotFound {
                track_id: 99,
                frame_id: 0
            })
        ));
        assert!(matches!(
            extract_trajectory(&recs, 7, 4, 30),
            Err(IngestError::TrackNotFound { .. })
        ));
    }

    #[test]
    fn annotations_empty_document() {
        let gt = parse_annotations(&br#"{"total_frame":100,"annotations":[]}"#[..]).unwrap();
        assert_eq!(gt, GroundTruth::empty(100));
    }

    #[test]
    fn annotation_parsed_verbatim() {
        let doc = br#"{"total_frame":10,"annotations":[{"track_id":3,"frame_id":7,"bbox":[1,2,3,4],"object_type":"person"}]}"#;
        let gt = parse_annotations(&doc[..]).unwrap();
        assert_eq!(gt.annotations.len(), 1);
        let a = &gt.annotations[0];
        assert_eq!((a.track_id, a.frame_id), (3, 7));
        assert_eq!(a.bbox.to_array(), [1.0, 2.0, 3.0, 4.0]);
        assert_eq!(a.object_type, "person");
    }

    #[test]
    fn annotations_grouped_by_track_and_frame() {
        let doc = br#"{"total_frame":10,"annotations":[
            {"track_id":3,"frame_id":7,"bbox":[1,2,3,4],"object_type":"person"},
            {"track_id":3,"frame_id":8,"bbox":[2,2,4,4],"object_type":"person"}]}"#;
        let gt = parse_annotations(&doc[..]).unwrap();
        let tracks = gt.by_track();
        assert_eq!(tracks.len(), 1);
        assert_eq!(tracks[&3].len(), 2);
        assert_eq!(gt.by_frame().len(), 2);
    }

    #[test]
    fn missing_field_is_named() {
        let doc = br#"{"total_frame":10,"annotations":[{"track_id":3,"frame_id":7,"object_type":"person"}]}"#;
        let err = parse_annotations(&doc[..]).unwrap_err();
        assert!(matches!(
            err,
            IngestError::Schema {
                field: "bbox",
                at: Some(0)
            }
        ));
        assert!(err.to_string().contains("`bbox`"));
        let err = parse_annotations(&br#"{"annotations":[]}"#[..]).unwrap_err();
        assert!(matches!(
            err,
            IngestError::Schema {
                field: "total_frame",
                at: None
            }
        ));
    }

    #[test]
    fn class_map_lines() {
        let text = "# coco subset\n0 person\n1 bicycle\n\n2: car\n";
        let map = parse_class_map(text.as_bytes()).unwrap();
        assert_eq!(map.len(), 3);
        assert_eq!(map[&2], "car");
        assert!(parse_class_map("person\n".as_bytes()).is_err());
        let mut out = Vec::new();
        write_class_map(&map, &mut out).unwrap();
        assert_eq!(parse_class_map(&out[..]).unwrap(), map);
    }
}
