//! Training-time point cloud augmentations: random scale, orientation,
//! position, brightness and hue, per-object draws for relation pairs, and
//! crop-to-hands.

use std::f64::consts::PI;

use nalgebra::{Point3, Rotation3, Vector3};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{centroid, ColoredPoint, HumanPose, PointCloud};
use crate::labeling::{PairSide, RelationPoints};
use crate::rng;

/// Sampling ranges, each `[lo, hi]` with `lo <= hi`. Translation applies
/// per axis in meters, yaw in radians, brightness in color units, hue in
/// degrees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentParams {
    pub scale_range: [f64; 2],
    pub translation_range: [f64; 2],
    pub yaw_range: [f64; 2],
    pub brightness_range: [f64; 2],
    pub hue_range: [f64; 2],
    pub crop_to_hand_prob: f64,
    pub crop_radius: f64,
}

impl Default for AugmentParams {
    fn default() -> Self {
        AugmentParams {
            scale_range: [0.9, 1.1],
            translation_range: [-0.2, 0.2],
            yaw_range: [-PI, PI],
            brightness_range: [-25.0, 25.0],
            hue_range: [-18.0, 18.0],
            crop_to_hand_prob: 0.5,
            crop_radius: 0.6,
        }
    }
}

impl AugmentParams {
    /// Ranges that leave every cloud unchanged.
    pub fn identity() -> Self {
        AugmentParams {
            scale_range: [1.0, 1.0],
            translation_range: [0.0, 0.0],
            yaw_range: [0.0, 0.0],
            brightness_range: [0.0, 0.0],
            hue_range: [0.0, 0.0],
            crop_to_hand_prob: 0.0,
            crop_radius: 0.6,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ranges = [
            ("scale_range", self.scale_range),
            ("translation_range", self.translation_range),
            ("yaw_range", self.yaw_range),
            ("brightness_range", self.brightness_range),
            ("hue_range", self.hue_range),
        ];
        for (name, [lo, hi]) in ranges {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::BadConfig(format!("{name} must be finite with lo <= hi, got [{lo}, {hi}]")));
            }
        }
        if self.scale_range[0] <= 0.0 {
            return Err(Error::BadConfig("scale_range must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.crop_to_hand_prob) {
            return Err(Error::BadConfig(format!("crop_to_hand_prob {} outside [0, 1]", self.crop_to_hand_prob)));
        }
        if !(self.crop_radius > 0.0) {
            return Err(Error::BadConfig("crop_radius must be positive".into()));
        }
        Ok(())
    }
}

fn uniform(rng: &mut ChaCha8Rng, [lo, hi]: [f64; 2]) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..=hi)
    }
}

#[derive(Debug, Clone, Copy)]
struct RigidDraw {
    scale: f64,
    yaw: f64,
    translation: Vector3<f64>,
}

impl RigidDraw {
    fn sample(rng: &mut ChaCha8Rng, params: &AugmentParams) -> Self {
        let scale = uniform(rng, params.scale_range);
        let yaw = uniform(rng, params.yaw_range);
        let translation = Vector3::new(
            uniform(rng, params.translation_range),
            uniform(rng, params.translation_range),
            uniform(rng, params.translation_range),
        );
        RigidDraw { scale, yaw, translation }
    }

    fn is_identity(&self) -> bool {
        self.scale == 1.0 && self.yaw == 0.0 && self.translation == Vector3::zeros()
    }

    /// Scale, then rotate about `pivot`, then translate.
    fn apply(&self, p: &Point3<f64>, pivot: &Point3<f64>, rot: &Rotation3<f64>) -> Point3<f64> {
        pivot + rot * ((p - pivot) * self.scale) + self.translation
    }
}

#[derive(Debug, Clone, Copy)]
struct ColorDraw {
    brightness: f64,
    hue: f64,
}

impl ColorDraw {
    fn sample(rng: &mut ChaCha8Rng, params: &AugmentParams) -> Self {
        ColorDraw { brightness: uniform(rng, params.brightness_range), hue: uniform(rng, params.hue_range) }
    }

    fn apply(&self, rgb: [u8; 3]) -> [u8; 3] {
        let mut out = rgb;
        if self.brightness != 0.0 {
            out = out.map(|c| (c as f64 + self.brightness).round().clamp(0.0, 255.0) as u8);
        }
        if self.hue != 0.0 {
            out = rotate_hue(out, self.hue);
        }
        out
    }
}

fn rgb_to_hsv([r, g, b]: [u8; 3]) -> (f64, f64, f64) {
    let (r, g, b) = (r as f64 / 255.0, g as f64 / 255.0, b as f64 / 255.0);
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    let h = if delta == 0.0 {
        0.0
    } else if max == r {
        60.0 * ((g - b) / delta).rem_euclid(6.0)
    } else if max == g {
        60.0 * ((b - r) / delta + 2.0)
    } else {
        60.0 * ((r - g) / delta + 4.0)
    };
    let s = if max == 0.0 { 0.0 } else { delta / max };
    (h, s, max)
}

fn hsv_to_rgb(h: f64, s: f64, v: f64) -> [u8; 3] {
    let c = v * s;
    let hp = h.rem_euclid(360.0) / 60.0;
    let x = c * (1.0 - (hp.rem_euclid(2.0) - 1.0).abs());
    let (r, g, b) = match hp as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = v - c;
    [r, g, b].map(|ch| ((ch + m) * 255.0).round().clamp(0.0, 255.0) as u8)
}

/// Rotates hue by `degrees` in HSV space, keeping saturation and value.
pub fn rotate_hue(rgb: [u8; 3], degrees: f64) -> [u8; 3] {
    let (h, s, v) = rgb_to_hsv(rgb);
    hsv_to_rgb(h + degrees, s, v)
}

fn transform_subset(points: &mut [ColoredPoint], members: &[usize], draw: &RigidDraw) {
    if draw.is_identity() || members.is_empty() {
        return;
    }
    let pivot = centroid(members.iter().map(|&i| points[i].position)).expect("non-empty subset");
    let rot = Rotation3::from_axis_angle(&Vector3::z_axis(), draw.yaw);
    for &i in members {
        points[i].position = draw.apply(&points[i].position, &pivot, &rot);
    }
}

fn recolor(points: &mut [ColoredPoint], draw: &ColorDraw) {
    for p in points.iter_mut() {
        p.color = draw.apply(p.color);
    }
}

/// Applies one random scale, yaw (both about the centroid), translation,
/// brightness offset and hue rotation to the whole cloud.
pub fn augment_cloud(cloud: &PointCloud, params: &AugmentParams, seed: u64) -> PointCloud {
    let mut rng = rng::seeded(seed);
    let rigid = RigidDraw::sample(&mut rng, params);
    let color = ColorDraw::sample(&mut rng, params);
    let mut points = cloud.points.clone();
    let all: Vec<usize> = (0..points.len()).collect();
    transform_subset(&mut points, &all, &rigid);
    recolor(&mut points, &color);
    PointCloud { points }
}

/// Like [`augment_cloud`], but the two instances of a relation pair get
/// independent geometric draws. The color draw is shared.
pub fn augment_relation_pair(pair: &RelationPoints, params: &AugmentParams, seed: u64) -> Result<RelationPoints> {
    if pair.provenance.len() != pair.cloud.len() || (pair.provenance.is_empty() && !pair.cloud.is_empty()) {
        return Err(Error::NoProvenance { points: pair.cloud.len(), tags: pair.provenance.len() });
    }
    let mut rng = rng::seeded(seed);
    // draw order matches augment_cloud so a one-sided pair behaves identically
    let rigid_a = RigidDraw::sample(&mut rng, params);
    let color = ColorDraw::sample(&mut rng, params);
    let rigid_b = RigidDraw::sample(&mut rng, params);

    let members = |side| -> Vec<usize> {
        pair.provenance
            .iter()
            .enumerate()
            .filter_map(|(i, &s)| (s == side).then_some(i))
            .collect()
    };
    let mut points = pair.cloud.points.clone();
    transform_subset(&mut points, &members(PairSide::A), &rigid_a);
    transform_subset(&mut points, &members(PairSide::B), &rigid_b);
    recolor(&mut points, &color);
    Ok(RelationPoints { cloud: PointCloud { points }, provenance: pair.provenance.clone() })
}

/// With probability `crop_to_hand_prob`, keeps only points within
/// `crop_radius` of either wrist of one pose drawn from `poses`.
pub fn crop_to_hands(cloud: &PointCloud, poses: &[HumanPose], params: &AugmentParams, seed: u64) -> Result<PointCloud> {
    let mut rng = rng::seeded(seed);
    let fires = rng.random::<f64>() < params.crop_to_hand_prob;
    if !fires {
        return Ok(cloud.clone());
    }
    if poses.is_empty() {
        return Err(Error::NoHands);
    }
    let pose = &poses[if poses.len() == 1 { 0 } else { rng.random_range(0..poses.len()) }];
    let wrists = pose.wrists();
    Ok(cloud
        .iter()
        .filter(|p| wrists.iter().any(|w| (p.position - w).norm() <= params.crop_radius))
        .copied()
        .collect())
}
