//! Deterministic synthetic scenes.
//!
//! A [`ScenarioSpec`] lists actors moving on simple paths and, optionally,
//! injected anomalous events. [`generate`] expands it into a track stream
//! plus, when events are present, a ground-truth annotation document with
//! one track id per event. The same spec always yields the same bytes.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::geom::{BBox, Point, Pose};
use crate::ingest::{FrameRecord, GroundTruth, GroundTruthAnnotation, RawObject};

pub const PERSON: u32 = 0;
pub const BICYCLE: u32 = 1;
pub const CAR: u32 = 2;
pub const DOG: u32 = 16;
pub const BACKPACK: u32 = 24;
pub const SUITCASE: u32 = 28;

/// Box size `(width, height)` and name for each class the generator knows.
const CLASS_TABLE: [(u32, &str, f64, f64); 6] = [
    (PERSON, "person", 40.0, 100.0),
    (BICYCLE, "bicycle", 80.0, 60.0),
    (CAR, "car", 180.0, 90.0),
    (DOG, "dog", 50.0, 35.0),
    (BACKPACK, "backpack", 30.0, 40.0),
    (SUITCASE, "suitcase", 40.0, 50.0),
];

fn class_entry(class_id: u32) -> Option<(&'static str, f64, f64)> {
    CLASS_TABLE
        .iter()
        .find(|(c, ..)| *c == class_id)
        .map(|&(_, name, w, h)| (name, w, h))
}

/// Class id to name for every class the generator can emit.
pub fn class_map() -> BTreeMap<u32, String> {
    CLASS_TABLE
        .iter()
        .map(|&(c, n, ..)| (c, n.to_owned()))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "path", rename_all = "kebab-case")]
pub enum PathSpec {
    /// Constant-velocity walk from `start` along `heading`, until the center
    /// leaves the frame.
    StraightCross { start: Point, heading: Point },
    /// Keep a fixed `offset` from another actor, present whenever it is.
    PairedEscort { leader: usize, offset: Point },
    /// Stationary at `at`.
    Parked { at: Point },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActorSpec {
    pub class_id: u32,
    #[serde(flatten)]
    pub path: PathSpec,
    /// Pixels per frame; ignored by escorts and parked actors.
    #[serde(default)]
    pub speed: f64,
    #[serde(default)]
    pub spawn_frame: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AnomalyKind {
    /// An escort stops where it is at onset and stays put for the duration,
    /// then is removed.
    LeftBehindObject,
    /// Straight-cross actors (and anyone escorting them) halt for the duration.
    StationaryPair,
    /// An escort's leader is absent for the duration; the escort carries on.
    LoneCompanion,
    /// Straight-cross actors move sideways instead of forward for the duration.
    TrajectoryDeviation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnomalySpec {
    pub kind: AnomalyKind,
    pub actors: Vec<usize>,
    pub onset_frame: u64,
    pub duration: u64,
}

impl AnomalySpec {
    fn active(&self, frame: u64) -> bool {
        frame >= self.onset_frame && frame < self.onset_frame + self.duration
    }

    /// Frames of `[from, to)` that fall inside this event.
    fn overlap(&self, from: u64, to: u64) -> u64 {
        let a = from.max(self.onset_frame);
        let b = to.min(self.onset_frame + self.duration);
        b.saturating_sub(a)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub video_id: String,
    pub seed: u64,
    pub frame_count: u64,
    pub frame_size: [f64; 2],
    pub actors: Vec<ActorSpec>,
    #[serde(default)]
    pub anomalies: Vec<AnomalySpec>,
    /// Depth cue: boxes shrink toward the top of the frame. Without it every
    /// box has its class's table size.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perspective: Option<Perspective>,
}

/// Box scale varies linearly with the center's image row, from `top_scale`
/// at row 0 to `bottom_scale` at the bottom edge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Perspective {
    pub top_scale: f64,
    pub bottom_scale: f64,
}

impl Perspective {
    pub fn scale_at(&self, y: f64, frame_height: f64) -> f64 {
        let t = (y / frame_height).clamp(0.0, 1.0);
        self.top_scale + (self.bottom_scale - self.top_scale) * t
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SynthError {
    #[error("frame size must be positive")]
    FrameSize,
    #[error("perspective scales must be positive and finite")]
    Perspective,
    #[error("actor {0} has unknown class {1}")]
    UnknownClass(usize, u32),
    #[error("actors {0} and {1} are identical")]
    DuplicateActor(usize, usize),
    #[error("actor {0}: escort leader must be an earlier actor")]
    BadLeader(usize),
    #[error("actor {0}: heading must be a non-zero vector and speed non-negative")]
    BadMotion(usize),
    #[error("anomaly {0}: {1}")]
    BadAnomaly(usize, String),
    #[error("no actor suits a {0:?} injection over frames {1}..{2}")]
    NoCandidate(AnomalyKind, u64, u64),
}

/// Stream and (for scenarios with events) ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthOutput {
    pub records: Vec<FrameRecord>,
    pub annotations: Option<GroundTruth>,
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        let [w, h] = self.frame_size;
        if !(w > 0.0 && h > 0.0) {
            return Err(SynthError::FrameSize);
        }
        if let Some(p) = self.perspective {
            if !(p.top_scale > 0.0
                && p.bottom_scale > 0.0
                && p.top_scale.is_finite()
                && p.bottom_scale.is_finite())
            {
                return Err(SynthError::Perspective);
            }
        }
        for (i, a) in self.actors.iter().enumerate() {
            if class_entry(a.class_id).is_none() {
                return Err(SynthError::UnknownClass(i, a.class_id));
            }
            if let Some(j) = self.actors[..i].iter().position(|b| b == a) {
                return Err(SynthError::DuplicateActor(j, i));
            }
            match &a.path {
                PathSpec::PairedEscort { leader, .. } if *leader >= i => {
                    return Err(SynthError::BadLeader(i))
                }
                PathSpec::StraightCross { heading, .. }
                    if heading.x.hypot(heading.y) == 0.0
                        || !(a.speed.is_finite() && a.speed >= 0.0) =>
                {
                    return Err(SynthError::BadMotion(i))
                }
                _ => {}
            }
        }
        for (k, ev) in self.anomalies.iter().enumerate() {
            let bad = |msg: &str| SynthError::BadAnomaly(k, msg.to_owned());
            if ev.actors.is_empty() {
                return Err(bad("no actors"));
            }
            if ev.duration == 0 {
                return Err(bad("zero duration"));
            }
            if ev.actors.iter().any(|&a| a >= self.actors.len()) {
                return Err(bad("actor index out of range"));
            }
            let paths: Vec<&PathSpec> = ev.actors.iter().map(|&a| &self.actors[a].path).collect();
            let ok = match ev.kind {
                AnomalyKind::LeftBehindObject | AnomalyKind::LoneCompanion => paths
                    .iter()
                    .all(|p| matches!(p, PathSpec::PairedEscort { .. })),
                AnomalyKind::StationaryPair | AnomalyKind::TrajectoryDeviation => paths
                    .iter()
                    .any(|p| matches!(p, PathSpec::StraightCross { .. })),
            };
            if !ok {
                return Err(bad("actor paths do not fit this event kind"));
            }
        }
        Ok(())
    }
}

/// Per-frame state of one actor.
#[derive(Debug, Clone, Copy)]
struct Placement {
    center: Point,
    visible: bool,
}

struct Simulator<'a> {
    spec: &'a ScenarioSpec,
}

impl Simulator<'_> {
    fn events_for(&self, actor: usize, kind: AnomalyKind) -> impl Iterator<Item = &AnomalySpec> {
        self.spec
            .anomalies
            .iter()
            .filter(move |e| e.kind == kind && e.actors.contains(&actor))
    }

    fn in_frame(&self, p: Point) -> bool {
        let [w, h] = self.spec.frame_size;
        p.x >= 0.0 && p.x <= w && p.y >= 0.0 && p.y <= h
    }

    fn leader_hidden(&self, leader: usize, frame: u64) -> bool {
        self.spec.anomalies.iter().any(|e| {
            e.kind == AnomalyKind::LoneCompanion
                && e.active(frame)
                && e.actors.iter().any(|&a| {
                    matches!(self.spec.actors[a].path, PathSpec::PairedEscort { leader: l, .. } if l == leader)
                })
        })
    }

    fn walker_center(
        &self,
        i: usize,
        actor: &ActorSpec,
        start: Point,
        heading: Point,
        frame: u64,
    ) -> Point {
        let norm = heading.x.hypot(heading.y);
        let (ux, uy) = (heading.x / norm, heading.y / norm);
        let elapsed = frame - actor.spawn_frame;
        let frames_in = |kind| -> u64 {
            self.events_for(i, kind)
                .map(|e| e.overlap(actor.spawn_frame, frame))
                .sum()
        };
        let paused = frames_in(AnomalyKind::StationaryPair);
        let sideways = frames_in(AnomalyKind::TrajectoryDeviation);
        let forward = (elapsed - paused - sideways) as f64 * actor.speed;
        let lateral = sideways as f64 * actor.speed;
        // Sideways is the heading rotated a quarter turn clockwise on screen.
        Point::new(
            start.x + ux * forward - uy * lateral,
            start.y + uy * forward + ux * lateral,
        )
    }

    /// Placements of every actor for every frame, `[frame][actor]`.
    fn run(&self) -> Vec<Vec<Placement>> {
        let n = self.spec.actors.len();
        let mut gone = vec![false; n];
        let mut history: Vec<Vec<Placement>> = Vec::with_capacity(self.spec.frame_count as usize);
        for frame in 0..self.spec.frame_count {
            let mut out: Vec<Placement> = Vec::with_capacity(n);
            for (i, actor) in self.spec.actors.iter().enumerate() {
                let placement = match &actor.path {
                    PathSpec::Parked { at } => Placement {
                        center: *at,
                        visible: frame >= actor.spawn_frame,
                    },
                    PathSpec::StraightCross { .. } if frame < actor.spawn_frame => Placement {
                        center: Point::new(0.0, 0.0),
                        visible: false,
                    },
                    PathSpec::StraightCross { start, heading } => {
                        let center = self.walker_center(i, actor, *start, *heading, frame);
                        // Once a walker has left the frame it stays gone.
                        gone[i] |= !self.in_frame(center);
                        Placement {
                            center,
                            visible: !gone[i],
                        }
                    }
                    PathSpec::PairedEscort { leader, offset } => {
                        let lead = out[*leader];
                        let mut p = Placement {
                            center: lead.center.offset(offset.x, offset.y),
                            visible: lead.visible,
                        };
                        let dropped = self
                            .events_for(i, AnomalyKind::LeftBehindObject)
                            .find(|e| frame >= e.onset_frame);
                        if let Some(ev) = dropped {
                            if !ev.active(frame) {
                                p.visible = false;
                            } else if frame > ev.onset_frame {
                                p.center = history[ev.onset_frame as usize][i].center;
                                p.visible = history[ev.onset_frame as usize][i].visible;
                            }
                        }
                        p
                    }
                };
                out.push(placement);
            }
            // Escorts were placed from their leader's position; now hide
            // leaders whose companion is going it alone.
            for (i, p) in out.iter_mut().enumerate() {
                if self.leader_hidden(i, frame) {
                    p.visible = false;
                }
            }
            history.push(out);
        }
        history
    }
}

/// Normalized COCO-order keypoints: x across the body width, y down from the head.
const POSE_TEMPLATE: [(f64, f64); 17] = [
    (0.50, 0.08),
    (0.45, 0.06),
    (0.55, 0.06),
    (0.40, 0.08),
    (0.60, 0.08),
    (0.30, 0.22),
    (0.70, 0.22),
    (0.25, 0.38),
    (0.75, 0.38),
    (0.22, 0.52),
    (0.78, 0.52),
    (0.38, 0.55),
    (0.62, 0.55),
    (0.38, 0.75),
    (0.62, 0.75),
    (0.38, 0.95),
    (0.62, 0.95),
];

/// Body width as a fraction of box height for the pose template.
const POSE_ASPECT: f64 = 0.4;
const POSE_JITTER_PX: f64 = 0.2;

fn mix(seed: u64, actor: u64, frame: u64) -> u64 {
    // splitmix64 finalizer over the combined key
    let mut z = seed
        ^ actor.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ frame.wrapping_mul(0xC2B2_AE3D_27D4_EB4F);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn synth_pose(bbox: &BBox, seed: u64, actor: usize, frame: u64) -> Pose {
    let mut rng = ChaCha8Rng::seed_from_u64(mix(seed, actor as u64, frame));
    let h = bbox.height();
    let cx = bbox.center().x;
    Pose::new(POSE_TEMPLATE.map(|(u, v)| {
        let jx = rng.random_range(-POSE_JITTER_PX..=POSE_JITTER_PX);
        let jy = rng.random_range(-POSE_JITTER_PX..=POSE_JITTER_PX);
        Point::new(
            cx + (u - 0.5) * h * POSE_ASPECT + jx,
            bbox.y1() + v * h + jy,
        )
    }))
}

/// Expand a scenario into frames and ground truth.
pub fn generate(spec: &ScenarioSpec) -> Result<SynthOutput, SynthError> {
    spec.validate()?;
    let placements = Simulator { spec }.run();
    let names = class_map();

    let mut records = Vec::with_capacity(spec.frame_count as usize);
    let mut annotations = Vec::new();
    for frame in 0..spec.frame_count {
        let placements = &placements[frame as usize];
        let mut objects = Vec::new();
        for (i, (actor, p)) in spec.actors.iter().zip(placements).enumerate() {
            if !p.visible {
                continue;
            }
            let (_, w, h) = class_entry(actor.class_id).expect("validated");
            let scale = spec
                .perspective
                .map_or(1.0, |q| q.scale_at(p.center.y, spec.frame_size[1]));
            let (w, h) = (w * scale, h * scale);
            let bbox = BBox::from_center(p.center, w, h).expect("class sizes are positive");
            let pose = (actor.class_id == PERSON).then(|| synth_pose(&bbox, spec.seed, i, frame));
            objects.push(RawObject {
                track_id: i as u64 + 1,
                class_id: actor.class_id,
                bbox,
                pose,
            });

            for (k, ev) in spec.anomalies.iter().enumerate() {
                if ev.active(frame) && ev.actors.contains(&i) {
                    annotations.push(GroundTruthAnnotation {
                        track_id: k as i64 + 1,
                        frame_id: frame as i64,
                        bbox,
                        object_type: names[&actor.class_id].clone(),
                    });
                }
            }
        }
        records.push(FrameRecord {
            video_id: spec.video_id.clone(),
            frame_id: frame,
            objects,
        });
    }

    let annotations = (!spec.anomalies.is_empty()).then_some(GroundTruth {
        total_frame: spec.frame_count,
        annotations,
    });
    Ok(SynthOutput {
        records,
        annotations,
    })
}

/// Layout of the campus preset (1920x1080). Rows are far enough apart
/// vertically that objects on different rows never share an edge at the
/// default edge threshold.
pub mod campus {
    pub const WIDTH: f64 = 1920.0;
    pub const HEIGHT: f64 = 1080.0;
    pub const PARKING_Y: f64 = 140.0;
    pub const NORTH_SIDEWALK_Y: f64 = 340.0;
    pub const ROAD_Y: f64 = 560.0;
    pub const SOUTH_SIDEWALK_Y: f64 = 780.0;
}

/// A nominal street scene that varies with `seed`: parked cars; lone
/// walkers and a pair of friends heading east on the north sidewalk; a
/// cyclist with a bicycle riding east in the road; a dog walker and a backpack carrier
/// heading west on the south sidewalk.
pub fn campus_scene(video_id: &str, seed: u64, frame_count: u64) -> ScenarioSpec {
    use campus::*;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut actors = Vec::new();
    let walker = |x: f64, y: f64, dir: f64, speed: f64, spawn: u64| ActorSpec {
        class_id: PERSON,
        path: PathSpec::StraightCross {
            start: Point::new(x, y),
            heading: Point::new(dir, 0.0),
        },
        speed,
        spawn_frame: spawn,
    };
    let escort = |leader: usize, class_id: u32, dx: f64, dy: f64| ActorSpec {
        class_id,
        path: PathSpec::PairedEscort {
            leader,
            offset: Point::new(dx, dy),
        },
        speed: 0.0,
        spawn_frame: 0,
    };
    let late_spawn = |rng: &mut ChaCha8Rng| {
        rng.random_range(frame_count / 3..frame_count.max(frame_count / 3 + 1))
    };

    for i in 0..rng.random_range(3..=5) {
        let x = 180.0 + i as f64 * 360.0 + rng.random_range(-40.0..40.0);
        actors.push(ActorSpec {
            class_id: CAR,
            path: PathSpec::Parked {
                at: Point::new(x, PARKING_Y + rng.random_range(-10.0..10.0)),
            },
            speed: 0.0,
            spawn_frame: 0,
        });
    }

    // North sidewalk.
    let lead = actors.len();
    actors.push(walker(
        rng.random_range(100.0..300.0),
        NORTH_SIDEWALK_Y + rng.random_range(-10.0..10.0),
        1.0,
        rng.random_range(1.8..2.4),
        0,
    ));
    actors.push(escort(lead, PERSON, 50.0, 0.0));
    for _ in 0..rng.random_range(3..=5) {
        let (x, spawn) = if rng.random_bool(0.5) {
            (1.0, late_spawn(&mut rng))
        } else {
            (rng.random_range(100.0..WIDTH - 100.0), 0)
        };
        let y = NORTH_SIDEWALK_Y + rng.random_range(-15.0..15.0);
        actors.push(walker(x, y, 1.0, rng.random_range(1.6..2.6), spawn));
    }

    // Road: one pair of cyclists, in view from the start.
    let lead = actors.len();
    actors.push(walker(
        rng.random_range(100.0..200.0),
        ROAD_Y + rng.random_range(-10.0..10.0),
        1.0,
        rng.random_range(4.5..5.5),
        0,
    ));
    actors.push(escort(lead, BICYCLE, 0.0, 25.0));

    // South sidewalk: the faster backpack carrier starts ahead of the dog
    // walker, so the two never meet.
    let carrier_x = WIDTH - rng.random_range(450.0..550.0);
    let lead = actors.len();
    actors.push(walker(
        carrier_x,
        SOUTH_SIDEWALK_Y + rng.random_range(-10.0..10.0),
        -1.0,
        rng.random_range(3.2..3.8),
        0,
    ));
    actors.push(escort(lead, BACKPACK, 12.0, 5.0));
    let lead = actors.len();
    actors.push(walker(
        WIDTH - rng.random_range(100.0..200.0),
        SOUTH_SIDEWALK_Y + rng.random_range(-10.0..10.0),
        -1.0,
        rng.random_range(1.8..2.4),
        0,
    ));
    actors.push(escort(lead, DOG, -55.0, 30.0));

    ScenarioSpec {
        video_id: video_id.to_owned(),
        seed,
        frame_count,
        frame_size: [WIDTH, HEIGHT],
        actors,
        anomalies: Vec::new(),
        perspective: Some(Perspective {
            top_scale: 0.6,
            bottom_scale: 1.0,
        }),
    }
}

/// Add one event of `kind` to `spec`. Candidates are tried in a fixed order
/// (preferred classes first) and the first whose event actors stay visible
/// over the whole window of the resulting stream is used.
pub fn inject(
    spec: ScenarioSpec,
    kind: AnomalyKind,
    onset_frame: u64,
    duration: u64,
) -> Result<ScenarioSpec, SynthError> {
    spec.validate()?;
    let end = (onset_frame + duration).min(spec.frame_count);
    let escorts = |preferred: &[u32]| -> Vec<(usize, usize, u32)> {
        let mut v: Vec<(usize, usize, u32)> = spec
            .actors
            .iter()
            .enumerate()
            .filter_map(|(i, a)| match a.path {
                PathSpec::PairedEscort { leader, .. } => Some((leader, i, a.class_id)),
                _ => None,
            })
            .collect();
        v.sort_by_key(|&(_, i, c)| {
            (
                preferred
                    .iter()
                    .position(|&p| p == c)
                    .unwrap_or(preferred.len()),
                i,
            )
        });
        v
    };
    let candidates: Vec<Vec<usize>> = match kind {
        AnomalyKind::LeftBehindObject => escorts(&[BACKPACK, SUITCASE])
            .into_iter()
            .filter(|&(_, _, c)| c == BACKPACK || c == SUITCASE)
            .map(|(_, e, _)| vec![e])
            .collect(),
        AnomalyKind::LoneCompanion => escorts(&[DOG])
            .into_iter()
            .filter(|&(_, _, c)| c != PERSON)
            .map(|(_, e, _)| vec![e])
            .collect(),
        AnomalyKind::StationaryPair => escorts(&[BICYCLE])
            .into_iter()
            .map(|(l, e, _)| vec![l, e])
            .collect(),
        AnomalyKind::TrajectoryDeviation => spec
            .actors
            .iter()
            .enumerate()
            .filter(|(_, a)| matches!(a.path, PathSpec::StraightCross { .. }))
            .map(|(i, _)| vec![i])
            .collect(),
    };

    for actors in candidates {
        let mut trial = spec.clone();
        trial.anomalies.push(AnomalySpec {
            kind,
            actors: actors.clone(),
            onset_frame,
            duration,
        });
        let out = generate(&trial)?;
        let visible = (onset_frame..end).all(|f| {
            actors
                .iter()
                .all(|&a| out.records[f as usize].object(a as u64 + 1).is_some())
        });
        if onset_frame < end && visible {
            return Ok(trial);
        }
    }
    Err(SynthError::NoCandidate(kind, onset_frame, end))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::par::Execution;
    use crate::scenegraph::{default_edge_threshold, video_graphs};

    fn walker_spec(frames: u64) -> ScenarioSpec {
        ScenarioSpec {
            video_id: "w".into(),
            seed: 1,
            frame_count: frames,
            frame_size: [1920.0, 1080.0],
            actors: vec![ActorSpec {
                class_id: PERSON,
                path: PathSpec::StraightCross {
                    start: Point::new(100.0, 500.0),
                    heading: Point::new(1.0, 0.0),
                },
                speed: 2.0,
                spawn_frame: 0,
            }],
            anomalies: vec![],
            perspective: None,
        }
    }

    #[test]
    fn single_walker() {
        let out = generate(&walker_spec(100)).unwrap();
        assert_eq!(out.records.len(), 100);
        assert!(out.annotations.is_none());
        for (f, r) in out.records.iter().enumerate() {
            assert_eq!(r.objects.len(), 1);
            assert_eq!(
                r.objects[0].bbox.center(),
                Point::new(100.0 + 2.0 * f as f64, 500.0)
            );
            assert!(r.objects[0].pose.is_some());
        }
    }

    #[test]
    fn escort_pair_forms_one_edge() {
        let mut spec = walker_spec(120);
        spec.actors.push(ActorSpec {
            class_id: BICYCLE,
            path: PathSpec::PairedEscort {
                leader: 0,
                offset: Point::new(40.0, 0.0),
            },
            speed: 0.0,
            spawn_frame: 0,
        });
        let out = generate(&spec).unwrap();
        // 40 px apart on the same row: pseudo-depth distance is exactly 40.
        let graphs = video_graphs(
            &out.records,
            default_edge_threshold(1080.0),
            30,
            Execution::Sequential,
        )
        .unwrap();
        for g in &graphs {
            assert_eq!(g.graph.edges.len(), 1);
            assert!(g.graph.isolated.is_empty());
        }
    }

    #[test]
    fn walker_leaves_frame_and_stays_gone() {
        let mut spec = walker_spec(100);
        spec.actors[0].path = PathSpec::StraightCross {
            start: Point::new(1900.0, 500.0),
            heading: Point::new(1.0, 0.0),
        };
        let out = generate(&spec).unwrap();
        let visible: Vec<bool> = out.records.iter().map(|r| !r.objects.is_empty()).collect();
        assert!(visible[..11].iter().all(|&v| v));
        assert!(visible[11..].iter().all(|&v| !v));
    }

    #[test]
    fn left_behind_object_annotations() {
        let mut spec = walker_spec(200);
        spec.actors.push(ActorSpec {
            class_id: BACKPACK,
            path: PathSpec::PairedEscort {
                leader: 0,
                offset: Point::new(12.0, 5.0),
            },
            speed: 0.0,
            spawn_frame: 0,
        });
        spec.anomalies.push(AnomalySpec {
            kind: AnomalyKind::LeftBehindObject,
            actors: vec![1],
            onset_frame: 50,
            duration: 1000,
        });
        let out = generate(&spec).unwrap();
        let gt = out.annotations.unwrap();
        let frames: Vec<i64> = gt.annotations.iter().map(|a| a.frame_id).collect();
        assert_eq!(frames, (50..200).collect::<Vec<_>>());
        assert!(gt
            .annotations
            .iter()
            .all(|a| a.track_id == 1 && a.object_type == "backpack"));
        // The bag stays where it was dropped while its carrier walks on.
        let at = |f: usize| out.records[f].object(2).unwrap().bbox.center();
        assert_eq!(at(50), at(199));
        assert_eq!(at(50), Point::new(100.0 + 100.0 + 12.0, 505.0));
        assert_eq!(
            out.records[199].object(1).unwrap().bbox.center().x,
            100.0 + 2.0 * 199.0
        );
    }

    #[test]
    fn stationary_pair_and_deviation() {
        let mut spec = walker_spec(100);
        spec.anomalies.push(AnomalySpec {
            kind: AnomalyKind::StationaryPair,
            actors: vec![0],
            onset_frame: 10,
            duration: 20,
        });
        let out = generate(&spec).unwrap();
        let x = |f: usize| out.records[f].objects[0].bbox.center().x;
        assert_eq!(x(10), 120.0);
        assert_eq!(x(30), 120.0);
        assert_eq!(x(31), 122.0);

        let mut spec = walker_spec(100);
        spec.anomalies.push(AnomalySpec {
            kind: AnomalyKind::TrajectoryDeviation,
            actors: vec![0],
            onset_frame: 10,
            duration: 5,
        });
        let out = generate(&spec).unwrap();
        let c = |f: usize| out.records[f].objects[0].bbox.center();
        assert_eq!(c(15), Point::new(120.0, 510.0));
        assert_eq!(c(16), Point::new(122.0, 510.0));
    }

    #[test]
    fn lone_companion_hides_leader() {
        let mut spec = walker_spec(60);
        spec.actors.push(ActorSpec {
            class_id: DOG,
            path: PathSpec::PairedEscort {
                leader: 0,
                offset: Point::new(-55.0, 30.0),
            },
            speed: 0.0,
            spawn_frame: 0,
        });
        spec.anomalies.push(AnomalySpec {
            kind: AnomalyKind::LoneCompanion,
            actors: vec![1],
            onset_frame: 20,
            duration: 10,
        });
        let out = generate(&spec).unwrap();
        assert_eq!(out.records[19].objects.len(), 2);
        assert_eq!(out.records[20].objects.len(), 1);
        assert_eq!(out.records[20].objects[0].class_id, DOG);
        assert_eq!(
            out.records[20].objects[0].bbox.center(),
            Point::new(100.0 + 40.0 - 55.0, 530.0)
        );
        assert_eq!(out.records[30].objects.len(), 2);
        assert_eq!(out.annotations.unwrap().annotations.len(), 10);
    }

    #[test]
    fn validation_errors() {
        let mut spec = walker_spec(10);
        spec.actors.push(spec.actors[0].clone());
        assert_eq!(generate(&spec), Err(SynthError::DuplicateActor(0, 1)));

        let mut spec = walker_spec(10);
        spec.actors[0].class_id = 999;
        assert_eq!(generate(&spec), Err(SynthError::UnknownClass(0, 999)));

        let mut spec = walker_spec(10);
        spec.anomalies.push(AnomalySpec {
            kind: AnomalyKind::LoneCompanion,
            actors: vec![0],
            onset_frame: 0,
            duration: 5,
        });
        assert!(matches!(generate(&spec), Err(SynthError::BadAnomaly(0, _))));
    }

    #[test]
    fn byte_determinism() {
        let spec = inject(
            campus_scene("c", 7, 240),
            AnomalyKind::LeftBehindObject,
            60,
            120,
        )
        .unwrap();
        let a = generate(&spec).unwrap();
        let b = generate(&spec).unwrap();
        let bytes = |o: &SynthOutput| {
            let mut v = Vec::new();
            crate::ingest::write_track_stream(&o.records, &mut v).unwrap();
            v
        };
        assert_eq!(bytes(&a), bytes(&b));
        assert_eq!(a.annotations, b.annotations);
    }

    #[test]
    fn injection_changes_only_the_event() {
        let nominal = campus_scene("c", 3, 240);
        let anomalous = inject(nominal.clone(), AnomalyKind::LoneCompanion, 60, 90).unwrap();
        let ev = &anomalous.anomalies[0];
        let PathSpec::PairedEscort { leader, .. } = anomalous.actors[ev.actors[0]].path else {
            panic!("lone companion must be an escort")
        };
        let a = generate(&nominal).unwrap();
        let b = generate(&anomalous).unwrap();
        for (f, (ra, rb)) in a.records.iter().zip(&b.records).enumerate() {
            let hidden = ev.active(f as u64);
            let strip = |r: &FrameRecord| -> Vec<RawObject> {
                r.objects
                    .iter()
                    .filter(|o| !(hidden && o.track_id == leader as u64 + 1))
                    .cloned()
                    .collect()
            };
            assert_eq!(strip(ra), strip(rb), "frame {f}");
        }
    }
}
