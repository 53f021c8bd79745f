//! Planar primitives shared by every stage: points, boxes, poses and trajectories.

use serde::{Deserialize, Serialize};

/// A pixel-space coordinate. Serialized as a two-element array `[x, y]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn offset(self, dx: f64, dy: f64) -> Self {
        Self::new(self.x + dx, self.y + dy)
    }
}

impl From<[f64; 2]> for Point {
    fn from([x, y]: [f64; 2]) -> Self {
        Self { x, y }
    }
}

impl From<Point> for [f64; 2] {
    fn from(p: Point) -> Self {
        [p.x, p.y]
    }
}

/// Axis-aligned box `[x1, y1, x2, y2]` with `x2 > x1` and `y2 > y1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct BBox {
    x1: f64,
    y1: f64,
    x2: f64,
    y2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
#[error("malformed bbox [{0}, {1}, {2}, {3}]: need x2 > x1 and y2 > y1")]
pub struct BBoxError(pub f64, pub f64, pub f64, pub f64);

impl BBox {
    pub fn new(x1: f64, y1: f64, x2: f64, y2: f64) -> Result<Self, BBoxError> {
        // NaN fails both comparisons.
        if x2 > x1
            && y2 > y1
            && x1.is_finite()
            && y1.is_finite()
            && x2.is_finite()
            && y2.is_finite()
        {
            Ok(Self { x1, y1, x2, y2 })
        } else {
            Err(BBoxError(x1, y1, x2, y2))
        }
    }

    /// Box of the given size centered on `center`.
    pub fn from_center(center: Point, width: f64, height: f64) -> Result<Self, BBoxError> {
        Self::new(
            center.x - width / 2.0,
            center.y - height / 2.0,
            center.x + width / 2.0,
            center.y + height / 2.0,
        )
    }

    pub fn x1(&self) -> f64 {
        self.x1
    }
    pub fn y1(&self) -> f64 {
        self.y1
    }
    pub fn x2(&self) -> f64 {
        self.x2
    }
    pub fn y2(&self) -> f64 {
        self.y2
    }

    pub fn width(&self) -> f64 {
        self.x2 - self.x1
    }

    pub fn height(&self) -> f64 {
        self.y2 - self.y1
    }

    pub fn center(&self) -> Point {
        Point::new((self.x1 + self.x2) / 2.0, (self.y1 + self.y2) / 2.0)
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn intersection_area(&self, other: &BBox) -> f64 {
        let w = self.x2.min(other.x2) - self.x1.max(other.x1);
        let h = self.y2.min(other.y2) - self.y1.max(other.y1);
        if w <= 0.0 || h <= 0.0 {
            0.0
        } else {
            w * h
        }
    }

    /// Intersection over union, in `[0, 1]`.
    pub fn iou(&self, other: &BBox) -> f64 {
        let inter = self.intersection_area(other);
        if inter == 0.0 {
            return 0.0;
        }
        inter / (self.area() + other.area() - inter)
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.x1, self.y1, self.x2, self.y2]
    }
}

impl TryFrom<[f64; 4]> for BBox {
    type Error = BBoxError;

    fn try_from([x1, y1, x2, y2]: [f64; 4]) -> Result<Self, Self::Error> {
        BBox::new(x1, y1, x2, y2)
    }
}

impl From<BBox> for [f64; 4] {
    fn from(b: BBox) -> Self {
        b.to_array()
    }
}

/// Number of keypoints in a body pose.
pub const POSE_KEYPOINTS: usize = 17;

/// Human pose: exactly 17 keypoints in pixel coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Point>", into = "Vec<Point>")]
pub struct Pose(Box<[Point; POSE_KEYPOINTS]>);

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("pose must have exactly {POSE_KEYPOINTS} keypoints, got {0}")]
pub struct PoseLengthError(pub usize);

impl Pose {
    pub fn new(points: [Point; POSE_KEYPOINTS]) -> Self {
        Self(Box::new(points))
    }

    pub fn keypoints(&self) -> &[Point; POSE_KEYPOINTS] {
        &self.0
    }
}

impl TryFrom<Vec<Point>> for Pose {
    type Error = PoseLengthError;

    fn try_from(points: Vec<Point>) -> Result<Self, Self::Error> {
        let n = points.len();
        let arr: Box<[Point; POSE_KEYPOINTS]> = points
            .into_boxed_slice()
            .try_into()
            .map_err(|_| PoseLengthError(n))?;
        Ok(Self(arr))
    }
}

impl From<Pose> for Vec<Point> {
    fn from(p: Pose) -> Self {
        p.0.to_vec()
    }
}

/// Object-center positions over consecutive frames, starting at the frame
/// the object is observed in. Always holds at least two points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Point>", into = "Vec<Point>")]
pub struct Trajectory(Vec<Point>);

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("trajectory needs at least 2 points, got {0}")]
pub struct TrajectoryLengthError(pub usize);

impl Trajectory {
    pub fn new(points: Vec<Point>) -> Result<Self, TrajectoryLengthError> {
        if points.len() < 2 {
            return Err(TrajectoryLengthError(points.len()));
        }
        Ok(Self(points))
    }

    /// `len` copies of `p`.
    pub fn stationary(p: Point, len: usize) -> Result<Self, TrajectoryLengthError> {
        Self::new(vec![p; len])
    }

    pub fn points(&self) -> &[Point] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Per-step displacement `p[t] - p[t + 1]`, one entry per consecutive pair.
    pub fn displacements(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.0
            .windows(2)
            .map(|w| (w[0].x - w[1].x, w[0].y - w[1].y))
    }

    /// Same shape shifted by `(dx, dy)`.
    pub fn translated(&self, dx: f64, dy: f64) -> Self {
        Self(self.0.iter().map(|p| p.offset(dx, dy)).collect())
    }
}

impl TryFrom<Vec<Point>> for Trajectory {
    type Error = TrajectoryLengthError;

    fn try_from(points: Vec<Point>) -> Result<Self, Self::Error> {
        Self::new(points)
    }
}

impl From<Trajectory> for Vec<Point> {
    fn from(t: Trajectory) -> Self {
        t.0
    }
}
