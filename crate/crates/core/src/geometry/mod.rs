//! Geometric scene state: colored point clouds, calibrated cameras, oriented
//! boxes, and 14-joint human poses. World frame is right-handed, z up, meters.

mod camera;
mod obb;
mod pose;

pub use camera::{backproject, fuse, fuse_indices, project, CameraCalibration, ColorFrame, DepthFrame, FuseParams};
pub use obb::{box_iou, OrientedBox3};
pub use pose::{point_segment_distance, pose_distance, Anchor, HumanPose, Joint, Part, PartList};

use nalgebra::{Point3, Rotation3, Vector3};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ColoredPoint {
    pub position: Point3<f64>,
    pub color: [u8; 3],
}

impl ColoredPoint {
    pub fn new(x: f64, y: f64, z: f64, color: [u8; 3]) -> Self {
        ColoredPoint { position: Point3::new(x, y, z), color }
    }

    pub fn is_finite(&self) -> bool {
        self.position.iter().all(|c| c.is_finite())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<ColoredPoint>,
}

impl PointCloud {
    pub fn new(points: Vec<ColoredPoint>) -> Self {
        PointCloud { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, ColoredPoint> {
        self.points.iter()
    }

    /// Mean position, or `None` for an empty cloud.
    pub fn centroid(&self) -> Option<Point3<f64>> {
        centroid(self.points.iter().map(|p| p.position))
    }

    pub fn select(&self, indices: &[usize]) -> PointCloud {
        PointCloud { points: indices.iter().map(|&i| self.points[i]).collect() }
    }
}

impl FromIterator<ColoredPoint> for PointCloud {
    fn from_iter<I: IntoIterator<Item = ColoredPoint>>(iter: I) -> Self {
        PointCloud { points: iter.into_iter().collect() }
    }
}

pub(crate) fn centroid(points: impl IntoIterator<Item = Point3<f64>>) -> Option<Point3<f64>> {
    let mut sum = Vector3::zeros();
    let mut n = 0usize;
    for p in points {
        sum += p.coords;
        n += 1;
    }
    (n > 0).then(|| Point3::from(sum / n as f64))
}

/// A rigid motion restricted to a rotation about the world z axis followed
/// by a translation. Boxes stay yaw-parameterized under it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanarMotion {
    pub yaw: f64,
    pub translation: Vector3<f64>,
}

impl PlanarMotion {
    pub fn new(yaw: f64, translation: Vector3<f64>) -> Self {
        PlanarMotion { yaw, translation }
    }

    pub fn apply(&self, p: &Point3<f64>) -> Point3<f64> {
        Rotation3::from_axis_angle(&Vector3::z_axis(), self.yaw) * p + self.translation
    }

    pub fn apply_cloud(&self, cloud: &PointCloud) -> PointCloud {
        cloud
            .iter()
            .map(|p| ColoredPoint { position: self.apply(&p.position), color: p.color })
            .collect()
    }

    pub fn apply_pose(&self, pose: &HumanPose) -> HumanPose {
        let mut out = pose.clone();
        for j in out.joints.iter_mut() {
            *j = self.apply(j);
        }
        out
    }

    pub fn apply_box(&self, b: &OrientedBox3) -> OrientedBox3 {
        let mut out = b.clone();
        out.center = self.apply(&b.center);
        out.set_yaw(b.yaw + self.yaw);
        out
    }
}
