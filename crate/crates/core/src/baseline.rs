//! Relation prediction front-ends: a decoder for externally computed
//! per-pair relation scores and a geometric baseline covering the two
//! predicates that follow from geometry alone (CloseTo, LyingOn).

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{HumanPose, OrientedBox3};
use crate::labeling::{InstanceLabelMap, InstanceSource};
use crate::model::{Edge, EntityClass, InstanceId, Node, RelationClass, SceneGraph};

/// 14 predicates followed by the "no relation" class.
pub const SCORE_ARITY: usize = RelationClass::COUNT + 1;
pub const NONE_INDEX: usize = RelationClass::COUNT;

/// Scores for one ordered instance pair, as produced by a trained relation
/// classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct PairLogits {
    pub subject: InstanceId,
    pub object: InstanceId,
    pub scores: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecodeMode {
    /// One label per pair (softmax-trained models).
    #[default]
    Argmax,
    /// Every predicate scoring at least the threshold (sigmoid-trained models).
    Threshold(f64),
}

fn check_pair(p: &PairLogits) -> Result<()> {
    if p.scores.len() != SCORE_ARITY {
        return Err(Error::BadLogits(format!(
            "pair ({}, {}) has {} scores, expected {SCORE_ARITY}",
            p.subject,
            p.object,
            p.scores.len()
        )));
    }
    if p.scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::BadLogits(format!("pair ({}, {}) has non-finite scores", p.subject, p.object)));
    }
    if p.subject == p.object {
        return Err(Error::BadLogits(format!("pair ({}, {}) is a self-pair", p.subject, p.object)));
    }
    Ok(())
}

/// Argmax decoding: the none class yields no edge and ties go to the
/// earliest class in enumeration order.
pub fn decode_logits(pairs: &[PairLogits]) -> Result<Vec<Edge>> {
    decode_logits_with(pairs, DecodeMode::Argmax)
}

/// Decodes edges in input pair order. Symmetric predicates come out
/// canonicalized; repeated edges are emitted once.
pub fn decode_logits_with(pairs: &[PairLogits], mode: DecodeMode) -> Result<Vec<Edge>> {
    let mut seen_pairs = BTreeSet::new();
    let mut seen_edges = BTreeSet::new();
    let mut edges = Vec::new();
    for p in pairs {
        check_pair(p)?;
        if !seen_pairs.insert((p.subject, p.object)) {
            return Err(Error::BadLogits(format!("pair ({}, {}) listed twice", p.subject, p.object)));
        }
        let mut emit = |class: usize| {
            let edge = Edge::new(p.subject, RelationClass::ALL[class], p.object).canonical();
            if seen_edges.insert(edge) {
                edges.push(edge);
            }
        };
        match mode {
            DecodeMode::Argmax => {
                let mut best = 0;
                for (k, s) in p.scores.iter().enumerate() {
                    if *s > p.scores[best] {
                        best = k;
                    }
                }
                if best != NONE_INDEX {
                    emit(best);
                }
            }
            DecodeMode::Threshold(t) => {
                for k in (0..RelationClass::COUNT).filter(|&k| p.scores[k] >= t) {
                    emit(k);
                }
            }
        }
    }
    Ok(edges)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineParams {
    /// Centroid distance (meters) below which two entities are CloseTo.
    pub close_to_threshold: f64,
    /// Maximum trunk inclination from horizontal (degrees) for LyingOn.
    pub lying_on_max_tilt: f64,
    /// Fraction of joints that must project into the table footprint.
    pub lying_on_overlap_frac: f64,
    /// How upstream relation scores become edges.
    pub decode: DecodeMode,
}

impl Default for BaselineParams {
    fn default() -> Self {
        BaselineParams {
            close_to_threshold: 1.5,
            lying_on_max_tilt: 30.0,
            lying_on_overlap_frac: 0.5,
            decode: DecodeMode::Argmax,
        }
    }
}

impl BaselineParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.close_to_threshold > 0.0) {
            return Err(Error::BadConfig("close_to_threshold must be positive".into()));
        }
        if !(0.0..=90.0).contains(&self.lying_on_max_tilt) {
            return Err(Error::BadConfig("lying_on_max_tilt must lie in [0, 90] degrees".into()));
        }
        if !(0.0..=1.0).contains(&self.lying_on_overlap_frac) {
            return Err(Error::BadConfig("lying_on_overlap_frac must lie in [0, 1]".into()));
        }
        if let DecodeMode::Threshold(t) = self.decode {
            if !t.is_finite() {
                return Err(Error::BadConfig("decode threshold must be finite".into()));
            }
        }
        Ok(())
    }
}

/// Trunk inclination from the horizontal plane, in degrees.
pub fn trunk_tilt_degrees(pose: &HumanPose) -> f64 {
    let axis = pose.trunk_axis();
    let norm = axis.norm();
    if norm == 0.0 {
        return 90.0;
    }
    (axis.z.abs() / norm).asin().to_degrees()
}

/// Whether `pose` lies on `table`: near-horizontal trunk and enough joints
/// over the table footprint.
pub fn is_lying_on(pose: &HumanPose, table: &OrientedBox3, params: &BaselineParams) -> bool {
    if trunk_tilt_degrees(pose) > params.lying_on_max_tilt {
        return false;
    }
    let inside = pose.joints.iter().filter(|j| table.footprint_contains(j.x, j.y)).count();
    inside as f64 >= params.lying_on_overlap_frac * pose.joints.len() as f64
}

/// CloseTo and LyingOn edges between the labeled instances of one frame.
/// Node ids are instance ids. No other predicate is ever emitted.
pub fn predict_geometric(
    poses: &[HumanPose],
    boxes: &[OrientedBox3],
    labels: &InstanceLabelMap,
    params: &BaselineParams,
) -> Vec<Edge> {
    let mut humans = Vec::new();
    let mut equipment = Vec::new();
    for (&id, info) in &labels.instances {
        match info.source {
            InstanceSource::Pose(j) => humans.push((id, &poses[j])),
            InstanceSource::Box(i) if boxes[i].class.is_equipment() => equipment.push((id, &boxes[i])),
            _ => {}
        }
    }

    let mut edges = BTreeSet::new();
    let close = |a: nalgebra::Point3<f64>, b: nalgebra::Point3<f64>| (a - b).norm() < params.close_to_threshold;
    for (k, (id_a, pose_a)) in humans.iter().enumerate() {
        for (id_b, pose_b) in &humans[k + 1..] {
            if close(pose_a.centroid(), pose_b.centroid()) {
                edges.insert(Edge::new(*id_a, RelationClass::CloseTo, *id_b).canonical());
            }
        }
        for (id_b, b) in &equipment {
            if close(pose_a.centroid(), b.center) {
                edges.insert(Edge::new(*id_a, RelationClass::CloseTo, *id_b).canonical());
            }
            if b.class.name() == EntityClass::OPERATING_TABLE && is_lying_on(pose_a, b, params) {
                edges.insert(Edge::new(*id_a, RelationClass::LyingOn, *id_b));
            }
        }
    }
    edges.into_iter().collect()
}

/// Assembles a frame graph whose nodes are the labeled instances plus one
/// virtual instrument per labeled human. Edges touching unknown nodes and
/// self-loops are dropped; duplicates collapse.
pub fn frame_graph(frame_id: u64, labels: &InstanceLabelMap, edges: impl IntoIterator<Item = Edge>) -> SceneGraph {
    let mut nodes: Vec<Node> = labels
        .instances
        .iter()
        .map(|(&id, info)| Node { id, class: info.class.clone(), instance_id: Some(id) })
        .collect();
    for info in labels.instances.values() {
        if let InstanceSource::Pose(j) = info.source {
            let id = labels.layout.instrument_id(j);
            if !labels.instances.contains_key(&id) {
                nodes.push(Node { id, class: EntityClass::instrument(), instance_id: Some(id) });
            }
        }
    }
    nodes.sort_by_key(|n| n.id);
    let ids: BTreeSet<_> = nodes.iter().map(|n| n.id).collect();
    let edges: BTreeSet<Edge> = edges
        .into_iter()
        .map(Edge::canonical)
        .filter(|e| e.subject != e.object && ids.contains(&e.subject) && ids.contains(&e.object))
        .collect();
    SceneGraph { frame_id, nodes, edges: edges.into_iter().collect() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Joint;
    use crate::labeling::{InstanceInfo, InstanceLayout};
    use nalgebra::{Point3, Vector3};
    use std::collections::BTreeMap;

    fn one_hot(class: usize) -> Vec<f64> {
        let mut s = vec![0.0; SCORE_ARITY];
        s[class] = 1.0;
        s
    }

    #[test]
    fn argmax_decodes_single_edge() {
        let pairs = [PairLogits { subject: 3, object: 9, scores: one_hot(RelationClass::Saw.index()) }];
        assert_eq!(decode_logits(&pairs).unwrap(), vec![Edge::new(3, RelationClass::Saw, 9)]);
    }

    #[test]
    fn none_class_yields_nothing() {
        let pairs = [PairLogits { subject: 3, object: 9, scores: one_hot(NONE_INDEX) }];
        assert!(decode_logits(&pairs).unwrap().is_empty());
    }

    #[test]
    fn tie_goes_to_earlier_predicate() {
        // Drill precedes Saw in the enumeration.
        let mut scores = vec![0.0; SCORE_ARITY];
        scores[RelationClass::Saw.index()] = 0.5;
        scores[RelationClass::Drill.index()] = 0.5;
        let pairs = [PairLogits { subject: 1, object: 2, scores }];
        assert_eq!(decode_logits(&pairs).unwrap(), vec![Edge::new(1, RelationClass::Drill, 2)]);
    }

    #[test]
    fn wrong_arity_rejected() {
        let pairs = [PairLogits { subject: 1, object: 2, scores: vec![0.0; 14] }];
        assert!(matches!(decode_logits(&pairs), Err(Error::BadLogits(_))));
        let pairs = [PairLogits { subject: 1, object: 2, scores: vec![f64::NAN; 15] }];
        assert!(matches!(decode_logits(&pairs), Err(Error::BadLogits(_))));
    }

    #[test]
    fn threshold_mode_is_multilabel() {
        let mut scores = vec![0.1; SCORE_ARITY];
        scores[RelationClass::Hold.index()] = 0.8;
        scores[RelationClass::CloseTo.index()] = 0.6;
        let pairs = [PairLogits { subject: 5, object: 2, scores }];
        let edges = decode_logits_with(&pairs, DecodeMode::Threshold(0.5)).unwrap();
        assert_eq!(edges, vec![Edge::new(2, RelationClass::CloseTo, 5), Edge::new(5, RelationClass::Hold, 2)]);
    }

    fn pose_at(x: f64, y: f64, lying: bool) -> HumanPose {
        let joints = std::array::from_fn(|k| {
            let t = k as f64 / 13.0;
            if lying {
                Point3::new(x - 0.8 + 1.6 * t, y, 1.0)
            } else {
                Point3::new(x, y, 1.7 - 1.6 * t)
            }
        });
        let mut p = HumanPose::new(0, joints).unwrap();
        // shoulders above hips for a meaningful trunk
        if !lying {
            p.joints[Joint::LeftShoulder.index()].z = 1.45;
            p.joints[Joint::RightShoulder.index()].z = 1.45;
            p.joints[Joint::LeftHip.index()].z = 0.95;
            p.joints[Joint::RightHip.index()].z = 0.95;
        }
        p
    }

    fn table() -> OrientedBox3 {
        OrientedBox3::new(
            EntityClass::new(EntityClass::OPERATING_TABLE),
            Point3::new(0.0, 0.0, 0.45),
            Vector3::new(1.0, 0.4, 0.45),
            0.0,
            1.0,
        )
        .unwrap()
    }

    fn labels_for(boxes: &[OrientedBox3], poses: &[HumanPose]) -> InstanceLabelMap {
        let layout = InstanceLayout { boxes: boxes.len(), poses: poses.len() };
        let mut instances = BTreeMap::new();
        for (i, b) in boxes.iter().enumerate() {
            instances.insert(layout.box_id(i), InstanceInfo { class: b.class.clone(), source: InstanceSource::Box(i) });
        }
        for j in 0..poses.len() {
            instances.insert(layout.pose_id(j), InstanceInfo { class: EntityClass::human(), source: InstanceSource::Pose(j) });
        }
        InstanceLabelMap { layout, labels: vec![], instances }
    }

    #[test]
    fn humans_close_together() {
        let poses = [pose_at(5.0, 0.0, false), pose_at(5.8, 0.0, false)];
        let edges = predict_geometric(&poses, &[], &labels_for(&[], &poses), &BaselineParams::default());
        assert_eq!(edges, vec![Edge::new(1, RelationClass::CloseTo, 2)]);
    }

    #[test]
    fn lying_patient_on_table() {
        let boxes = [table()];
        let poses = [pose_at(0.0, 0.0, true)];
        let edges = predict_geometric(&poses, &boxes, &labels_for(&boxes, &poses), &BaselineParams::default());
        assert!(edges.contains(&Edge::new(2, RelationClass::LyingOn, 1)));
        assert!(edges.contains(&Edge::new(1, RelationClass::CloseTo, 2)));
    }

    #[test]
    fn upright_beside_table_not_lying() {
        let boxes = [table()];
        let poses = [pose_at(0.0, 0.8, false)];
        assert!(trunk_tilt_degrees(&poses[0]) > 80.0);
        let edges = predict_geometric(&poses, &boxes, &labels_for(&boxes, &poses), &BaselineParams::default());
        assert!(!edges.iter().any(|e| e.predicate == RelationClass::LyingOn));
        assert!(edges.iter().all(|e| matches!(e.predicate, RelationClass::CloseTo | RelationClass::LyingOn)));
    }

    #[test]
    fn frame_graph_adds_virtual_instruments() {
        let boxes = [table()];
        let poses = [pose_at(0.0, 0.8, false)];
        let labels = labels_for(&boxes, &poses);
        let g = frame_graph(4, &labels, [Edge::new(2, RelationClass::Saw, 3), Edge::new(2, RelationClass::Cut, 99)]);
        assert_eq!(g.nodes.iter().map(|n| n.id).collect::<Vec<_>>(), vec![1, 2, 3]);
        assert!(g.nodes[2].class.is_virtual());
        assert_eq!(g.edges, vec![Edge::new(2, RelationClass::Saw, 3)]);
        assert!(crate::model::validate_graph(&g).is_empty());
    }
}
