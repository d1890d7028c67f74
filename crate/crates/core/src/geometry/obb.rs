use std::f64::consts::PI;

use nalgebra::{Point2, Point3, Vector3};

use crate::error::{Error, Result};
use crate::model::EntityClass;

/// Gravity-aligned box: free position and extents, rotation only about z.
#[derive(Debug, Clone, PartialEq)]
pub struct OrientedBox3 {
    pub class: EntityClass,
    pub center: Point3<f64>,
    pub half_extents: Vector3<f64>,
    /// Radians about +z, kept in `[-pi, pi)`.
    pub yaw: f64,
    pub confidence: f64,
}

pub(crate) fn normalize_angle(a: f64) -> f64 {
    // leave in-range values bit-identical so stored yaws round-trip
    if (-PI..PI).contains(&a) {
        return a;
    }
    let n = (a + PI).rem_euclid(2.0 * PI) - PI;
    // rem_euclid can round up to exactly 2pi for tiny negative inputs
    if n >= PI {
        n - 2.0 * PI
    } else {
        n
    }
}

impl OrientedBox3 {
    pub fn new(
        class: EntityClass,
        center: Point3<f64>,
        half_extents: Vector3<f64>,
        yaw: f64,
        confidence: f64,
    ) -> Result<Self> {
        if !half_extents.iter().all(|h| *h > 0.0 && h.is_finite()) {
            return Err(Error::BadSchema(format!("box half extents must be positive, got {half_extents:?}")));
        }
        if !center.iter().all(|c| c.is_finite()) || !yaw.is_finite() {
            return Err(Error::BadSchema("box center and yaw must be finite".into()));
        }
        if !(0.0..=1.0).contains(&confidence) {
            return Err(Error::BadSchema(format!("box confidence {confidence} outside [0, 1]")));
        }
        Ok(OrientedBox3 { class, center, half_extents, yaw: normalize_angle(yaw), confidence })
    }

    pub fn set_yaw(&mut self, yaw: f64) {
        self.yaw = normalize_angle(yaw);
    }

    pub fn volume(&self) -> f64 {
        8.0 * self.half_extents.x * self.half_extents.y * self.half_extents.z
    }

    pub fn bottom(&self) -> f64 {
        self.center.z - self.half_extents.z
    }

    pub fn top(&self) -> f64 {
        self.center.z + self.half_extents.z
    }

    /// Coordinates of `p` in the box frame (axes aligned with the extents).
    pub fn to_local(&self, p: &Point3<f64>) -> Vector3<f64> {
        let d = p - self.center;
        let (s, c) = self.yaw.sin_cos();
        Vector3::new(c * d.x + s * d.y, -s * d.x + c * d.y, d.z)
    }

    pub fn from_local(&self, l: &Vector3<f64>) -> Point3<f64> {
        let (s, c) = self.yaw.sin_cos();
        self.center + Vector3::new(c * l.x - s * l.y, s * l.x + c * l.y, l.z)
    }

    /// Distance from an interior point to the nearest face; `None` unless
    /// `p` is strictly inside.
    pub fn inside_depth(&self, p: &Point3<f64>) -> Option<f64> {
        let l = self.to_local(p);
        let depth = (0..3)
            .map(|i| self.half_extents[i] - l[i].abs())
            .fold(f64::INFINITY, f64::min);
        (depth > 0.0).then_some(depth)
    }

    pub fn contains(&self, p: &Point3<f64>) -> bool {
        self.inside_depth(p).is_some()
    }

    /// Whether `(x, y)` lies in the ground-plane footprint (boundary included).
    pub fn footprint_contains(&self, x: f64, y: f64) -> bool {
        let l = self.to_local(&Point3::new(x, y, self.center.z));
        l.x.abs() <= self.half_extents.x && l.y.abs() <= self.half_extents.y
    }

    /// Footprint corners, counter-clockwise.
    pub fn footprint(&self) -> [Point2<f64>; 4] {
        let (hx, hy) = (self.half_extents.x, self.half_extents.y);
        [(-hx, -hy), (hx, -hy), (hx, hy), (-hx, hy)].map(|(x, y)| {
            let p = self.from_local(&Vector3::new(x, y, 0.0));
            Point2::new(p.x, p.y)
        })
    }
}

fn cross(o: &Point2<f64>, a: &Point2<f64>, b: &Point2<f64>) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

fn polygon_area(poly: &[Point2<f64>]) -> f64 {
    if poly.len() < 3 {
        return 0.0;
    }
    let twice: f64 = poly
        .iter()
        .zip(poly.iter().cycle().skip(1))
        .map(|(a, b)| a.x * b.y - b.x * a.y)
        .sum();
    0.5 * twice.abs()
}

/// Sutherland-Hodgman clip of `subject` against the convex CCW `clip` polygon.
fn clip_convex(subject: &[Point2<f64>], clip: &[Point2<f64>]) -> Vec<Point2<f64>> {
    let mut output = subject.to_vec();
    for i in 0..clip.len() {
        if output.is_empty() {
            break;
        }
        let (a, b) = (clip[i], clip[(i + 1) % clip.len()]);
        let input = std::mem::take(&mut output);
        for j in 0..input.len() {
            let cur = input[j];
            let prev = input[(j + input.len() - 1) % input.len()];
            let cur_in = cross(&a, &b, &cur) >= 0.0;
            let prev_in = cross(&a, &b, &prev) >= 0.0;
            if cur_in != prev_in {
                let dp = cross(&a, &b, &prev);
                let dc = cross(&a, &b, &cur);
                let t = dp / (dp - dc);
                output.push(prev + (cur - prev) * t);
            }
            if cur_in {
                output.push(cur);
            }
        }
    }
    output
}

/// Volumetric IoU of two gravity-aligned boxes: footprint polygon overlap
/// times vertical overlap, over the union volume.
pub fn box_iou(a: &OrientedBox3, b: &OrientedBox3) -> f64 {
    let dz = a.top().min(b.top()) - a.bottom().max(b.bottom());
    if dz <= 0.0 {
        return 0.0;
    }
    let area = polygon_area(&clip_convex(&a.footprint(), &b.footprint()));
    let inter = area * dz;
    if inter <= 0.0 {
        return 0.0;
    }
    let union = a.volume() + b.volume() - inter;
    (inter / union).clamp(0.0, 1.0)
}
