use std::fmt;
use std::str::FromStr;

use nalgebra::{Point3, Vector3};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Joint {
    Head,
    Neck,
    LeftShoulder,
    RightShoulder,
    LeftElbow,
    RightElbow,
    LeftWrist,
    RightWrist,
    LeftHip,
    RightHip,
    LeftKnee,
    RightKnee,
    LeftAnkle,
    RightAnkle,
}

impl Joint {
    pub const COUNT: usize = 14;

    pub const ALL: [Joint; Self::COUNT] = [
        Joint::Head,
        Joint::Neck,
        Joint::LeftShoulder,
        Joint::RightShoulder,
        Joint::LeftElbow,
        Joint::RightElbow,
        Joint::LeftWrist,
        Joint::RightWrist,
        Joint::LeftHip,
        Joint::RightHip,
        Joint::LeftKnee,
        Joint::RightKnee,
        Joint::LeftAnkle,
        Joint::RightAnkle,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Joint::Head => "head",
            Joint::Neck => "neck",
            Joint::LeftShoulder => "left_shoulder",
            Joint::RightShoulder => "right_shoulder",
            Joint::LeftElbow => "left_elbow",
            Joint::RightElbow => "right_elbow",
            Joint::LeftWrist => "left_wrist",
            Joint::RightWrist => "right_wrist",
            Joint::LeftHip => "left_hip",
            Joint::RightHip => "right_hip",
            Joint::LeftKnee => "left_knee",
            Joint::RightKnee => "right_knee",
            Joint::LeftAnkle => "left_ankle",
            Joint::RightAnkle => "right_ankle",
        }
    }
}

impl fmt::Display for Joint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Joint {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Joint::ALL
            .iter()
            .copied()
            .find(|j| j.name() == s)
            .ok_or_else(|| Error::BadSchema(format!("unknown joint {s:?}")))
    }
}

/// A 14-joint skeleton hypothesis.
#[derive(Debug, Clone, PartialEq)]
pub struct HumanPose {
    pub person_id: u32,
    pub joints: [Point3<f64>; Joint::COUNT],
    pub confidence: Option<[f64; Joint::COUNT]>,
}

impl HumanPose {
    pub fn new(person_id: u32, joints: [Point3<f64>; Joint::COUNT]) -> Result<Self> {
        if joints.iter().flat_map(|j| j.iter()).any(|c| !c.is_finite()) {
            return Err(Error::BadSchema(format!("pose {person_id} has non-finite joints")));
        }
        Ok(HumanPose { person_id, joints, confidence: None })
    }

    pub fn joint(&self, j: Joint) -> Point3<f64> {
        self.joints[j.index()]
    }

    pub fn wrists(&self) -> [Point3<f64>; 2] {
        [self.joint(Joint::LeftWrist), self.joint(Joint::RightWrist)]
    }

    pub fn centroid(&self) -> Point3<f64> {
        super::centroid(self.joints.iter().copied()).expect("poses have 14 joints")
    }

    pub fn anchor(&self, a: Anchor) -> Point3<f64> {
        match a {
            Anchor::Joint(j) => self.joint(j),
            Anchor::Mid(a, b) => nalgebra::center(&self.joint(a), &self.joint(b)),
        }
    }

    /// Shoulder-midpoint minus hip-midpoint.
    pub fn trunk_axis(&self) -> Vector3<f64> {
        self.anchor(Anchor::Mid(Joint::LeftShoulder, Joint::RightShoulder))
            - self.anchor(Anchor::Mid(Joint::LeftHip, Joint::RightHip))
    }

    pub fn translated(&self, offset: Vector3<f64>) -> HumanPose {
        let mut out = self.clone();
        for j in out.joints.iter_mut() {
            *j += offset;
        }
        out
    }
}

/// Mean Euclidean joint distance between two complete poses.
pub fn pose_distance(a: &HumanPose, b: &HumanPose) -> f64 {
    a.joints
        .iter()
        .zip(b.joints.iter())
        .map(|(p, q)| (p - q).norm())
        .sum::<f64>()
        / Joint::COUNT as f64
}

/// Part endpoint: a joint, or the midpoint of a left/right joint pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Anchor {
    Joint(Joint),
    Mid(Joint, Joint),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Part {
    pub name: &'static str,
    pub a: Anchor,
    pub b: Anchor,
}

impl Part {
    const fn limb(name: &'static str, a: Joint, b: Joint) -> Part {
        Part { name, a: Anchor::Joint(a), b: Anchor::Joint(b) }
    }

    pub fn endpoints(&self, pose: &HumanPose) -> (Point3<f64>, Point3<f64>) {
        (pose.anchor(self.a), pose.anchor(self.b))
    }

    pub fn length(&self, pose: &HumanPose) -> f64 {
        let (a, b) = self.endpoints(pose);
        (b - a).norm()
    }
}

/// Body parts used both for PCP scoring and for the labeling capsules.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartList {
    pub parts: Vec<Part>,
}

impl Default for PartList {
    fn default() -> Self {
        use Joint::*;
        PartList {
            parts: vec![
                Part::limb("left_upper_arm", LeftShoulder, LeftElbow),
                Part::limb("right_upper_arm", RightShoulder, RightElbow),
                Part::limb("left_lower_arm", LeftElbow, LeftWrist),
                Part::limb("right_lower_arm", RightElbow, RightWrist),
                Part::limb("left_upper_leg", LeftHip, LeftKnee),
                Part::limb("right_upper_leg", RightHip, RightKnee),
                Part::limb("left_lower_leg", LeftKnee, LeftAnkle),
                Part::limb("right_lower_leg", RightKnee, RightAnkle),
                Part {
                    name: "trunk",
                    a: Anchor::Mid(LeftShoulder, RightShoulder),
                    b: Anchor::Mid(LeftHip, RightHip),
                },
                Part::limb("head", Head, Neck),
            ],
        }
    }
}

impl PartList {
    pub fn len(&self) -> usize {
        self.parts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Part> {
        self.parts.iter()
    }
}

pub fn point_segment_distance(p: &Point3<f64>, a: &Point3<f64>, b: &Point3<f64>) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    let t = if len2 > 0.0 { ((p - a).dot(&ab) / len2).clamp(0.0, 1.0) } else { 0.0 };
    (p - (a + ab * t)).norm()
}
