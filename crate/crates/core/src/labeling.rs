//! Per-point instance labels derived from detected boxes and poses.
//!
//! Instance ids follow a fixed layout for a frame with `B` boxes and `P`
//! poses: box `i` is `1 + i`, pose `j` is `1 + B + j`, and the virtual
//! instrument held by pose `j` is `1 + B + P + j`. Zero is background.

use std::collections::BTreeMap;

use nalgebra::Point3;
use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{point_segment_distance, HumanPose, OrientedBox3, PartList, PointCloud};
use crate::model::{EntityClass, InstanceId};
use crate::rng;

pub const BACKGROUND: InstanceId = 0;
pub const OBJECT_POINT_BUDGET: usize = 4000;
pub const RELATION_POINT_BUDGET: usize = 8000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LabelingParams {
    pub human_capsule_radius: f64,
    pub hand_radius: f64,
    pub min_points_per_instance: usize,
}

impl Default for LabelingParams {
    fn default() -> Self {
        LabelingParams { human_capsule_radius: 0.12, hand_radius: 0.25, min_points_per_instance: 20 }
    }
}

impl LabelingParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.human_capsule_radius > 0.0 && self.hand_radius > 0.0) {
            return Err(Error::BadConfig("labeling radii must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InstanceSource {
    Box(usize),
    Pose(usize),
    /// Virtual instrument owned by the hands of pose `pose`.
    Virtual { pose: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InstanceInfo {
    pub class: EntityClass,
    pub source: InstanceSource,
}

/// Instance id arithmetic for a frame with a given number of boxes and poses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InstanceLayout {
    pub boxes: usize,
    pub poses: usize,
}

impl InstanceLayout {
    pub fn box_id(&self, i: usize) -> InstanceId {
        (1 + i) as InstanceId
    }

    pub fn pose_id(&self, j: usize) -> InstanceId {
        (1 + self.boxes + j) as InstanceId
    }

    pub fn instrument_id(&self, j: usize) -> InstanceId {
        (1 + self.boxes + self.poses + j) as InstanceId
    }

    pub fn source(&self, id: InstanceId) -> Option<InstanceSource> {
        let k = (id as usize).checked_sub(1)?;
        if k < self.boxes {
            Some(InstanceSource::Box(k))
        } else if k < self.boxes + self.poses {
            Some(InstanceSource::Pose(k - self.boxes))
        } else if k < self.boxes + 2 * self.poses {
            Some(InstanceSource::Virtual { pose: k - self.boxes - self.poses })
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InstanceLabelMap {
    pub layout: InstanceLayout,
    /// One id per cloud point, `BACKGROUND` when unclaimed.
    pub labels: Vec<InstanceId>,
    pub instances: BTreeMap<InstanceId, InstanceInfo>,
}

impl InstanceLabelMap {
    pub fn indices_of(&self, id: InstanceId) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter_map(|(i, &l)| (l == id).then_some(i))
            .collect()
    }

    pub fn count(&self, id: InstanceId) -> usize {
        self.labels.iter().filter(|&&l| l == id).count()
    }

    /// Rebuilds the instance table from stored per-point labels and the
    /// detections they were computed from.
    pub fn from_labels(labels: Vec<InstanceId>, boxes: &[OrientedBox3], poses: &[HumanPose]) -> Result<Self> {
        let layout = InstanceLayout { boxes: boxes.len(), poses: poses.len() };
        let mut instances = BTreeMap::new();
        for &id in labels.iter().filter(|&&l| l != BACKGROUND) {
            if instances.contains_key(&id) {
                continue;
            }
            let source = layout.source(id).ok_or(Error::NoSuchInstance(id))?;
            let class = match source {
                InstanceSource::Box(i) => boxes[i].class.clone(),
                InstanceSource::Pose(_) => EntityClass::human(),
                InstanceSource::Virtual { .. } => EntityClass::instrument(),
            };
            instances.insert(id, InstanceInfo { class, source });
        }
        Ok(InstanceLabelMap { layout, labels, instances })
    }

    fn check_cloud(&self, cloud: &PointCloud) -> Result<()> {
        if self.labels.len() != cloud.len() {
            return Err(Error::BadSchema(format!(
                "label map has {} labels for {} points",
                self.labels.len(),
                cloud.len()
            )));
        }
        Ok(())
    }
}

fn capsule_segments(pose: &HumanPose, parts: &PartList) -> Vec<(Point3<f64>, Point3<f64>)> {
    parts.iter().map(|p| p.endpoints(pose)).collect()
}

/// Assigns every point to the box containing it or the human whose limb
/// capsules contain it. Overlapping claims go to the primitive whose
/// surface is nearest the point, then to the lowest instance id. Instances
/// left with fewer than `min_points_per_instance` points fall back to
/// background and are dropped from the table.
pub fn compute_instance_labels(
    cloud: &PointCloud,
    boxes: &[OrientedBox3],
    poses: &[HumanPose],
    params: &LabelingParams,
) -> Result<InstanceLabelMap> {
    params.validate()?;
    if let Some(index) = cloud.iter().position(|p| !p.is_finite()) {
        return Err(Error::InvalidPoints { index });
    }
    let layout = InstanceLayout { boxes: boxes.len(), poses: poses.len() };
    let parts = PartList::default();
    let skeletons: Vec<_> = poses.iter().map(|p| capsule_segments(p, &parts)).collect();
    let radius = params.human_capsule_radius;

    let mut labels = Vec::with_capacity(cloud.len());
    for point in cloud.iter() {
        let p = &point.position;
        // (distance to claiming surface, instance id); ids ascend with scan order
        let mut best: Option<(f64, InstanceId)> = None;
        let mut offer = |dist: f64, id: InstanceId| {
            if best.is_none_or(|(d, _)| dist < d) {
                best = Some((dist, id));
            }
        };
        for (i, b) in boxes.iter().enumerate() {
            if let Some(depth) = b.inside_depth(p) {
                offer(depth, layout.box_id(i));
            }
        }
        for (j, segments) in skeletons.iter().enumerate() {
            let axis = segments
                .iter()
                .map(|(a, b)| point_segment_distance(p, a, b))
                .fold(f64::INFINITY, f64::min);
            if axis <= radius {
                offer(radius - axis, layout.pose_id(j));
            }
        }
        labels.push(best.map_or(BACKGROUND, |(_, id)| id));
    }

    let mut counts: BTreeMap<InstanceId, usize> = BTreeMap::new();
    for &l in labels.iter().filter(|&&l| l != BACKGROUND) {
        *counts.entry(l).or_default() += 1;
    }
    for l in labels.iter_mut() {
        if *l != BACKGROUND && counts[l] < params.min_points_per_instance {
            *l = BACKGROUND;
        }
    }
    let instances = counts
        .into_iter()
        .filter(|&(_, n)| n >= params.min_points_per_instance)
        .map(|(id, _)| {
            let info = match layout.source(id).expect("id produced by layout") {
                InstanceSource::Box(i) => InstanceInfo { class: boxes[i].class.clone(), source: InstanceSource::Box(i) },
                source => InstanceInfo { class: EntityClass::human(), source },
            };
            (id, info)
        })
        .collect();

    Ok(InstanceLabelMap { layout, labels, instances })
}

/// Gives background points within `hand_radius` of a wrist to the virtual
/// instrument of the nearest wrist's owner (lowest pose index on ties).
/// Claimed points never change.
pub fn instrument_region(
    cloud: &PointCloud,
    labels: &InstanceLabelMap,
    poses: &[HumanPose],
    params: &LabelingParams,
) -> Result<InstanceLabelMap> {
    params.validate()?;
    labels.check_cloud(cloud)?;
    let mut out = labels.clone();
    if poses.is_empty() {
        return Ok(out);
    }
    let layout = labels.layout;
    for (point, label) in cloud.iter().zip(out.labels.iter_mut()) {
        if *label != BACKGROUND {
            continue;
        }
        let mut owner: Option<(f64, usize)> = None;
        for (j, pose) in poses.iter().enumerate() {
            for wrist in pose.wrists() {
                let d = (point.position - wrist).norm();
                if d <= params.hand_radius && owner.is_none_or(|(best, _)| d < best) {
                    owner = Some((d, j));
                }
            }
        }
        if let Some((_, j)) = owner {
            let id = layout.instrument_id(j);
            *label = id;
            out.instances.entry(id).or_insert(InstanceInfo {
                class: EntityClass::instrument(),
                source: InstanceSource::Virtual { pose: j },
            });
        }
    }
    Ok(out)
}

/// Sorted subset of `budget` indices drawn uniformly without replacement,
/// or all of them when under budget.
fn subsample(indices: Vec<usize>, budget: usize, seed: u64) -> Vec<usize> {
    if indices.len() <= budget {
        return indices;
    }
    let mut picks = index::sample(&mut rng::seeded(seed), indices.len(), budget).into_vec();
    picks.sort_unstable();
    picks.into_iter().map(|k| indices[k]).collect()
}

/// Points of one instance, subsampled to `budget` (see [`OBJECT_POINT_BUDGET`]).
pub fn extract_object_points(
    cloud: &PointCloud,
    labels: &InstanceLabelMap,
    instance: InstanceId,
    budget: usize,
    seed: u64,
) -> Result<PointCloud> {
    labels.check_cloud(cloud)?;
    if instance == BACKGROUND || !labels.instances.contains_key(&instance) {
        return Err(Error::NoSuchInstance(instance));
    }
    Ok(cloud.select(&subsample(labels.indices_of(instance), budget, seed)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PairSide {
    A,
    B,
}

/// Union of two instances' points with per-point provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct RelationPoints {
    pub cloud: PointCloud,
    pub provenance: Vec<PairSide>,
}

impl RelationPoints {
    pub fn side_count(&self, side: PairSide) -> usize {
        self.provenance.iter().filter(|&&s| s == side).count()
    }
}

/// Points of two instances (A first, then B), jointly subsampled to
/// `budget` (see [`RELATION_POINT_BUDGET`]).
pub fn extract_relation_points(
    cloud: &PointCloud,
    labels: &InstanceLabelMap,
    instance_a: InstanceId,
    instance_b: InstanceId,
    budget: usize,
    seed: u64,
) -> Result<RelationPoints> {
    labels.check_cloud(cloud)?;
    if instance_a == instance_b {
        return Err(Error::SelfPair(instance_a));
    }
    for id in [instance_a, instance_b] {
        if id == BACKGROUND || !labels.instances.contains_key(&id) {
            return Err(Error::NoSuchInstance(id));
        }
    }
    let a = labels.indices_of(instance_a);
    let split = a.len();
    let mut union = a;
    union.extend(labels.indices_of(instance_b));
    let keep = subsample((0..union.len()).collect(), budget, seed);
    Ok(RelationPoints {
        cloud: cloud.select(&keep.iter().map(|&k| union[k]).collect::<Vec<_>>()),
        provenance: keep.iter().map(|&k| if k < split { PairSide::A } else { PairSide::B }).collect(),
    })
}
