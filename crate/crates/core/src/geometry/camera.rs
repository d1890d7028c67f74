use std::collections::HashSet;

use nalgebra::{Matrix3, Matrix4, Point3};

use super::{ColoredPoint, PointCloud};
use crate::error::{Error, Result};

const ORTHONORMAL_TOL: f64 = 1e-6;

/// Pinhole intrinsics plus a camera-to-world rigid transform.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraCalibration {
    pub camera_id: String,
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub extrinsics: Matrix4<f64>,
    /// Meters per raw depth unit.
    pub depth_scale: f64,
}

impl CameraCalibration {
    fn bad(&self, reason: impl Into<String>) -> Error {
        Error::BadCalibration { camera: self.camera_id.clone(), reason: reason.into() }
    }

    pub fn rotation(&self) -> Matrix3<f64> {
        self.extrinsics.fixed_view::<3, 3>(0, 0).into_owned()
    }

    /// Checks positive focal lengths and depth scale, and that the extrinsics
    /// form a proper rigid transform.
    pub fn validate(&self) -> Result<()> {
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return Err(self.bad(format!("focal lengths must be positive (fx={}, fy={})", self.fx, self.fy)));
        }
        if !(self.depth_scale > 0.0 && self.depth_scale.is_finite()) {
            return Err(self.bad(format!("depth_scale must be positive, got {}", self.depth_scale)));
        }
        if !(self.cx.is_finite() && self.cy.is_finite()) || self.extrinsics.iter().any(|v| !v.is_finite()) {
            return Err(self.bad("non-finite parameter"));
        }
        let r = self.rotation();
        let err = (r.transpose() * r - Matrix3::identity()).norm();
        if err >= ORTHONORMAL_TOL {
            return Err(self.bad(format!("rotation not orthonormal (|RtR - I| = {err:.3e})")));
        }
        if r.determinant() < 0.0 {
            return Err(self.bad("rotation is a reflection"));
        }
        let bottom = self.extrinsics.row(3);
        if bottom[0] != 0.0 || bottom[1] != 0.0 || bottom[2] != 0.0 || bottom[3] != 1.0 {
            return Err(self.bad("last extrinsics row must be [0, 0, 0, 1]"));
        }
        Ok(())
    }

    pub fn camera_to_world(&self, p: &Point3<f64>) -> Point3<f64> {
        Point3::from_homogeneous(self.extrinsics * p.to_homogeneous()).expect("rigid transform keeps w = 1")
    }

    pub fn world_to_camera(&self, p: &Point3<f64>) -> Point3<f64> {
        let r = self.rotation();
        let t = self.extrinsics.fixed_view::<3, 1>(0, 3).into_owned();
        Point3::from(r.transpose() * (p.coords - t))
    }
}

/// Raw depth image, row-major; zero or non-finite entries are invalid.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthFrame {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f32>,
}

impl DepthFrame {
    pub fn new(width: usize, height: usize, data: Vec<f32>) -> Self {
        assert_eq!(data.len(), width * height, "depth buffer size");
        DepthFrame { width, height, data }
    }

    pub fn at(&self, u: usize, v: usize) -> f32 {
        self.data[v * self.width + u]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ColorFrame {
    pub width: usize,
    pub height: usize,
    pub data: Vec<[u8; 3]>,
}

/// Lifts every valid depth pixel into the world frame. Pixel `(u, v)` with
/// depth `z` maps to `((u - cx) z / fx, (v - cy) z / fy, z)` in the camera
/// frame, then through the extrinsics. Points come out in row-major pixel order.
pub fn backproject(depth: &DepthFrame, calib: &CameraCalibration, color: Option<&ColorFrame>) -> Result<PointCloud> {
    calib.validate()?;
    let in_domain = |c: f64, n: usize| c >= 0.0 && c < n as f64;
    if !in_domain(calib.cx, depth.width) || !in_domain(calib.cy, depth.height) {
        return Err(calib.bad(format!(
            "principal point ({}, {}) outside {}x{} depth image",
            calib.cx, calib.cy, depth.width, depth.height
        )));
    }
    if let Some(c) = color {
        if c.width != depth.width || c.height != depth.height {
            return Err(calib.bad(format!(
                "color frame {}x{} does not match depth frame {}x{}",
                c.width, c.height, depth.width, depth.height
            )));
        }
    }

    let mut points = Vec::new();
    for v in 0..depth.height {
        for u in 0..depth.width {
            let raw = depth.at(u, v);
            if !raw.is_finite() || raw <= 0.0 {
                continue;
            }
            let z = raw as f64 * calib.depth_scale;
            let cam = Point3::new((u as f64 - calib.cx) * z / calib.fx, (v as f64 - calib.cy) * z / calib.fy, z);
            let rgb = color.map(|c| c.data[v * c.width + u]).unwrap_or([0, 0, 0]);
            points.push(ColoredPoint { position: calib.camera_to_world(&cam), color: rgb });
        }
    }
    Ok(PointCloud { points })
}

/// Projects a world point to `(u, v, depth_m)`; `None` behind the camera.
pub fn project(p: &Point3<f64>, calib: &CameraCalibration) -> Option<(f64, f64, f64)> {
    let c = calib.world_to_camera(p);
    (c.z > 0.0).then(|| (calib.fx * c.x / c.z + calib.cx, calib.fy * c.y / c.z + calib.cy, c.z))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FuseParams {
    /// Voxel edge in meters for duplicate removal; `None` keeps every point.
    pub voxel_size: Option<f64>,
}

impl Default for FuseParams {
    fn default() -> Self {
        FuseParams { voxel_size: Some(0.005) }
    }
}

/// `(cloud index, point index)` of every point that survives fusion, in
/// output order.
pub fn fuse_indices(clouds: &[PointCloud], params: &FuseParams) -> Vec<(usize, usize)> {
    let mut kept = Vec::with_capacity(clouds.iter().map(PointCloud::len).sum());
    let mut occupied: HashSet<(i64, i64, i64)> = HashSet::new();
    for (ci, cloud) in clouds.iter().enumerate() {
        for (pi, p) in cloud.iter().enumerate() {
            if let Some(v) = params.voxel_size {
                let key = (
                    (p.position.x / v).floor() as i64,
                    (p.position.y / v).floor() as i64,
                    (p.position.z / v).floor() as i64,
                );
                if !occupied.insert(key) {
                    continue;
                }
            }
            kept.push((ci, pi));
        }
    }
    kept
}

/// Concatenates world-frame clouds in input order, keeping the first point
/// per voxel when deduplication is enabled.
pub fn fuse(clouds: &[PointCloud], params: &FuseParams) -> PointCloud {
    fuse_indices(clouds, params)
        .into_iter()
        .map(|(c, p)| clouds[c].points[p])
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{Rotation3, Vector3};

    fn calib(extrinsics: Matrix4<f64>) -> CameraCalibration {
        CameraCalibration {
            camera_id: "cam".into(),
            fx: 100.0,
            fy: 100.0,
            cx: 0.0,
            cy: 0.0,
            extrinsics,
            depth_scale: 1.0,
        }
    }

    fn single_pixel(width: usize, u: usize, z: f32) -> DepthFrame {
        let mut d = vec![0.0; width];
        d[u] = z;
        DepthFrame::new(width, 1, d)
    }

    #[test]
    fn principal_ray() {
        let cloud = backproject(&single_pixel(128, 0, 2.0), &calib(Matrix4::identity()), None).unwrap();
        assert_eq!(cloud.len(), 1);
        assert_eq!(cloud.points[0].position, Point3::new(0.0, 0.0, 2.0));
    }

    #[test]
    fn off_axis_pixel() {
        // (100 - 0) * 2 / 100 = 2
        let cloud = backproject(&single_pixel(128, 100, 2.0), &calib(Matrix4::identity()), None).unwrap();
        assert_eq!(cloud.points[0].position, Point3::new(2.0, 0.0, 2.0));
    }

    #[test]
    fn zero_depth_skipped() {
        let d = DepthFrame::new(4, 4, vec![0.0; 16]);
        assert!(backproject(&d, &calib(Matrix4::identity()), None).unwrap().is_empty());
    }

    #[test]
    fn skewed_extrinsics_rejected() {
        let mut m = Matrix4::identity();
        m[(0, 1)] = 0.1;
        let err = backproject(&single_pixel(8, 0, 1.0), &calib(m), None).unwrap_err();
        assert!(matches!(err, Error::BadCalibration { .. }));
    }

    #[test]
    fn project_inverts_backproject() {
        let rot = Rotation3::from_euler_angles(0.3, -0.2, 1.1);
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(rot.matrix());
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&Vector3::new(1.0, -2.0, 3.0));
        let mut c = calib(m);
        c.cx = 32.0;
        c.cy = 24.0;
        let mut data = vec![0.0f32; 64 * 48];
        for (i, d) in data.iter_mut().enumerate() {
            *d = 0.5 + (i % 7) as f32 * 0.37;
        }
        let depth = DepthFrame::new(64, 48, data);
        let cloud = backproject(&depth, &c, None).unwrap();
        for (i, p) in cloud.iter().enumerate() {
            let (u, v, z) = project(&p.position, &c).unwrap();
            assert!((u - (i % 64) as f64).abs() < 1e-6);
            assert!((v - (i / 64) as f64).abs() < 1e-6);
            assert!((z - depth.data[i] as f64).abs() < 1e-6);
        }
    }

    #[test]
    fn fuse_identity_and_dedup() {
        let a: PointCloud = (0..50).map(|i| ColoredPoint::new(i as f64 * 0.01, 0.0, 0.0, [1, 2, 3])).collect();
        let b: PointCloud = (0..30).map(|i| ColoredPoint::new(5.0 + i as f64 * 0.01, 0.0, 0.0, [0; 3])).collect();
        let off = FuseParams { voxel_size: None };
        assert_eq!(fuse(std::slice::from_ref(&a), &off), a);
        assert_eq!(fuse(&[a.clone(), a.clone()], &FuseParams::default()).len(), a.len());
        assert_eq!(fuse(&[a.clone(), b.clone()], &FuseParams::default()).len(), a.len() + b.len());
    }
}
