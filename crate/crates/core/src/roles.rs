//! Clinical role scoring for human tracks and unique role assignment.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{EntityClass, RelationClass, SceneGraph};
use crate::tracking::{solve_assignment, AssignmentProblem, Objective, Track, TrackId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoleClass {
    Patient,
    HeadSurgeon,
    AssistantSurgeon,
    CirculatingNurse,
    Anaesthetist,
}

impl RoleClass {
    pub const COUNT: usize = 5;

    pub const ALL: [RoleClass; Self::COUNT] = [
        RoleClass::Patient,
        RoleClass::HeadSurgeon,
        RoleClass::AssistantSurgeon,
        RoleClass::CirculatingNurse,
        RoleClass::Anaesthetist,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            RoleClass::Patient => "patient",
            RoleClass::HeadSurgeon => "head_surgeon",
            RoleClass::AssistantSurgeon => "assistant_surgeon",
            RoleClass::CirculatingNurse => "circulating_nurse",
            RoleClass::Anaesthetist => "anaesthetist",
        }
    }

    /// Human-readable label, as used in reports and DOT output.
    pub fn title(self) -> &'static str {
        match self {
            RoleClass::Patient => "Patient",
            RoleClass::HeadSurgeon => "Head Surgeon",
            RoleClass::AssistantSurgeon => "Assistant Surgeon",
            RoleClass::CirculatingNurse => "Circulating Nurse",
            RoleClass::Anaesthetist => "Anaesthetist",
        }
    }
}

impl fmt::Display for RoleClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RoleClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        RoleClass::ALL
            .into_iter()
            .find(|r| r.name() == s)
            .ok_or_else(|| Error::BadRole(s.to_string()))
    }
}

/// Which end of an edge the scored human must occupy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Subject,
    Object,
    Any,
}

/// Adds `weights` to a track's role scores for every matching edge.
#[derive(Debug, Clone, PartialEq)]
pub struct RoleRule {
    pub predicate: RelationClass,
    pub side: Side,
    /// Restricts the rule to edges whose other endpoint has this class.
    pub counterpart: Option<EntityClass>,
    pub weights: [f64; RoleClass::COUNT],
}

impl RoleRule {
    pub fn new(predicate: RelationClass, side: Side, role: RoleClass, weight: f64) -> Self {
        let mut weights = [0.0; RoleClass::COUNT];
        weights[role.index()] = weight;
        RoleRule { predicate, side, counterpart: None, weights }
    }

    pub fn with_counterpart(mut self, class: impl Into<String>) -> Self {
        self.counterpart = Some(EntityClass::new(class));
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoleWeightConfig {
    pub rules: Vec<RoleRule>,
}

impl Default for RoleWeightConfig {
    fn default() -> Self {
        use RelationClass::*;
        let mut rules: Vec<RoleRule> = [Saw, Drill, Hammer, Cut, Cement, Suture]
            .into_iter()
            .map(|p| RoleRule::new(p, Side::Subject, RoleClass::HeadSurgeon, 1.0))
            .collect();
        rules.push(RoleRule::new(LyingOn, Side::Subject, RoleClass::Patient, 1.0));
        rules.push(RoleRule::new(Assist, Side::Subject, RoleClass::AssistantSurgeon, 1.0));
        rules.push(RoleRule::new(Prepare, Side::Subject, RoleClass::CirculatingNurse, 1.0));
        rules.push(RoleRule::new(Clean, Side::Subject, RoleClass::CirculatingNurse, 1.0));
        rules.push(
            RoleRule::new(CloseTo, Side::Any, RoleClass::Anaesthetist, 1.0)
                .with_counterpart(EntityClass::ANESTHESIA_MACHINE),
        );
        RoleWeightConfig { rules }
    }
}

impl RoleWeightConfig {
    /// Weights must be finite, and sawing and lying-on evidence must keep
    /// pointing at the head surgeon and the patient respectively.
    pub fn validate(&self) -> Result<()> {
        if self.rules.iter().flat_map(|r| r.weights.iter()).any(|w| !w.is_finite()) {
            return Err(Error::BadConfig("role weights must be finite".into()));
        }
        let anchored = |pred: RelationClass, role: RoleClass| {
            self.rules.iter().any(|r| {
                r.predicate == pred
                    && r.side == Side::Subject
                    && r.counterpart.is_none()
                    && r.weights[role.index()] > 0.0
            })
        };
        if !anchored(RelationClass::Saw, RoleClass::HeadSurgeon) {
            return Err(Error::BadConfig("role weights need a Saw/subject rule favouring head_surgeon".into()));
        }
        if !anchored(RelationClass::LyingOn, RoleClass::Patient) {
            return Err(Error::BadConfig("role weights need a LyingOn/subject rule favouring patient".into()));
        }
        Ok(())
    }
}

/// Laplace pseudo-count added to every role before normalization.
pub const SMOOTHING: f64 = 1.0;

/// Frequency-based role distribution for one track. Every frame in which the
/// track's node appears in its graph contributes the weights of all matching
/// incident edges; negative totals are clamped to zero before smoothing.
pub fn score_track_heuristic(
    track: &Track,
    graphs: &BTreeMap<u64, SceneGraph>,
    weights: &RoleWeightConfig,
) -> Result<[f64; RoleClass::COUNT]> {
    let mut acc = [0.0; RoleClass::COUNT];
    let mut referenced = 0;
    for (frame_id, det) in &track.entries {
        let Some(graph) = graphs.get(frame_id) else { continue };
        let node = det.node_id;
        if !graph.has_node(node) {
            continue;
        }
        referenced += 1;
        for edge in graph.edges.iter().filter(|e| e.touches(node)) {
            let is_subject = edge.subject == node;
            let other = if is_subject { edge.object } else { edge.subject };
            let other_class = graph.node(other).map(|n| &n.class);
            for rule in &weights.rules {
                let side_ok = match rule.side {
                    Side::Subject => is_subject,
                    Side::Object => !is_subject,
                    Side::Any => true,
                };
                let counterpart_ok = rule.counterpart.as_ref().is_none_or(|c| Some(c) == other_class);
                if rule.predicate == edge.predicate && side_ok && counterpart_ok {
                    for (a, w) in acc.iter_mut().zip(rule.weights) {
                        *a += w;
                    }
                }
            }
        }
    }
    if referenced == 0 {
        return Err(Error::EmptyTrack(track.track_id));
    }
    let smoothed = acc.map(|a| a.max(0.0) + SMOOTHING);
    let total: f64 = smoothed.iter().sum();
    Ok(smoothed.map(|s| s / total))
}

/// Per-track role probabilities. Rows are non-negative and sum to one.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RoleScoreTable {
    pub rows: BTreeMap<TrackId, [f64; RoleClass::COUNT]>,
}

/// Rows off by more than this from unit sum are rejected on ingestion.
pub const ROW_SUM_TOLERANCE: f64 = 1e-3;

impl RoleScoreTable {
    /// Builds a table from externally produced rows. `roles` gives the column
    /// order when the producer used a different one. Rows summing to one
    /// within 1e-9 are kept verbatim, rows within 1e-3 are renormalized.
    pub fn from_external(roles: Option<&[String]>, rows: &[(TrackId, Vec<f64>)]) -> Result<Self> {
        let order: Vec<RoleClass> = match roles {
            Some(names) => {
                let order = names.iter().map(|n| n.parse()).collect::<Result<Vec<RoleClass>>>()?;
                let mut seen = order.clone();
                seen.sort();
                seen.dedup();
                if seen.len() != RoleClass::COUNT || order.len() != RoleClass::COUNT {
                    return Err(Error::BadRole(format!("role header must list each of the {} roles once", RoleClass::COUNT)));
                }
                order
            }
            None => RoleClass::ALL.to_vec(),
        };

        let mut table = RoleScoreTable::default();
        for (track_id, probs) in rows {
            if probs.len() != RoleClass::COUNT {
                return Err(Error::BadScores(format!("track {track_id}: {} scores, expected {}", probs.len(), RoleClass::COUNT)));
            }
            if let Some(p) = probs.iter().find(|p| !p.is_finite() || **p < 0.0) {
                return Err(Error::BadScores(format!("track {track_id}: invalid probability {p}")));
            }
            let sum: f64 = probs.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                return Err(Error::BadScores(format!("track {track_id}: probabilities sum to {sum}")));
            }
            let mut row = [0.0; RoleClass::COUNT];
            for (role, p) in order.iter().zip(probs) {
                row[role.index()] = if (sum - 1.0).abs() <= 1e-9 { *p } else { p / sum };
            }
            if table.rows.insert(*track_id, row).is_some() {
                return Err(Error::BadScores(format!("track {track_id} listed twice")));
            }
        }
        Ok(table)
    }

    pub fn argmax(&self, track_id: TrackId) -> Option<RoleClass> {
        let row = self.rows.get(&track_id)?;
        let mut best = 0;
        for k in 1..RoleClass::COUNT {
            if row[k] > row[best] {
                best = k;
            }
        }
        Some(RoleClass::ALL[best])
    }
}

/// Heuristic table over every track that references at least one graph.
pub fn heuristic_table(
    tracks: &[Track],
    graphs: &BTreeMap<u64, SceneGraph>,
    weights: &RoleWeightConfig,
) -> Result<RoleScoreTable> {
    let mut table = RoleScoreTable::default();
    for track in tracks {
        table.rows.insert(track.track_id, score_track_heuristic(track, graphs, weights)?);
    }
    Ok(table)
}

/// Bijective role assignment maximizing total probability. With more tracks
/// than roles the surplus tracks get `None`.
pub fn assign_roles_unique(table: &RoleScoreTable) -> BTreeMap<TrackId, Option<RoleClass>> {
    let ids: Vec<TrackId> = table.rows.keys().copied().collect();
    let mut out: BTreeMap<TrackId, Option<RoleClass>> = ids.iter().map(|&t| (t, None)).collect();
    if ids.is_empty() {
        return out;
    }
    let problem = AssignmentProblem::from_fn(ids.len(), RoleClass::COUNT, |r, c| table.rows[&ids[r]][c], Objective::Maximize)
        .expect("table rows hold finite probabilities");
    for (r, c) in solve_assignment(&problem).pairs {
        out.insert(ids[r], Some(RoleClass::ALL[c]));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::HumanPose;
    use crate::model::{Edge, Node};
    use crate::tracking::Detection;
    use nalgebra::Point3;

    fn track(frames: std::ops::Range<u64>, node_id: u32) -> Track {
        let pose = HumanPose::new(0, [Point3::origin(); 14]).unwrap();
        Track { track_id: 0, entries: frames.map(|f| (f, Detection { pose: pose.clone(), node_id })).collect() }
    }

    fn graph(frame_id: u64, edges: &[Edge]) -> SceneGraph {
        let node = |id, class: &str| Node { id, class: EntityClass::new(class), instance_id: Some(id) };
        SceneGraph {
            frame_id,
            nodes: vec![node(1, "operating_table"), node(2, "anesthesia_machine"), node(3, "human"), node(4, "instrument")],
            edges: edges.to_vec(),
        }
    }

    fn argmax(v: &[f64; 5]) -> RoleClass {
        RoleClass::ALL[(0..5).max_by(|&a, &b| v[a].total_cmp(&v[b])).unwrap()]
    }

    #[test]
    fn sawing_means_head_surgeon() {
        let graphs = (0..10).map(|f| (f, graph(f, &[Edge::new(3, RelationClass::Saw, 4)]))).collect();
        let v = score_track_heuristic(&track(0..10, 3), &graphs, &RoleWeightConfig::default()).unwrap();
        assert_eq!(argmax(&v), RoleClass::HeadSurgeon);
        assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        // 11 / 15
        assert!((v[1] - 11.0 / 15.0).abs() < 1e-12);
    }

    #[test]
    fn lying_on_means_patient() {
        let graphs = (0..4).map(|f| (f, graph(f, &[Edge::new(3, RelationClass::LyingOn, 1)]))).collect();
        let v = score_track_heuristic(&track(0..4, 3), &graphs, &RoleWeightConfig::default()).unwrap();
        assert_eq!(argmax(&v), RoleClass::Patient);
    }

    #[test]
    fn no_edges_is_uniform() {
        let graphs = (0..4).map(|f| (f, graph(f, &[]))).collect();
        let v = score_track_heuristic(&track(0..4, 3), &graphs, &RoleWeightConfig::default()).unwrap();
        assert!(v.iter().all(|p| (p - 0.2).abs() < 1e-12));
    }

    #[test]
    fn close_to_machine_either_side() {
        let graphs = (0..3).map(|f| (f, graph(f, &[Edge::new(2, RelationClass::CloseTo, 3)]))).collect();
        let v = score_track_heuristic(&track(0..3, 3), &graphs, &RoleWeightConfig::default()).unwrap();
        assert_eq!(argmax(&v), RoleClass::Anaesthetist);
    }

    #[test]
    fn unreferenced_track_is_error() {
        let graphs = BTreeMap::new();
        assert!(matches!(
            score_track_heuristic(&track(0..3, 3), &graphs, &RoleWeightConfig::default()),
            Err(Error::EmptyTrack(0))
        ));
    }

    #[test]
    fn anchored_rules_required() {
        assert!(RoleWeightConfig::default().validate().is_ok());
        let mut cfg = RoleWeightConfig::default();
        cfg.rules.retain(|r| r.predicate != RelationClass::Saw);
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn external_rows() {
        let t = RoleScoreTable::from_external(None, &[(0, vec![0.7, 0.1, 0.1, 0.05, 0.05])]).unwrap();
        assert_eq!(t.rows[&0], [0.7, 0.1, 0.1, 0.05, 0.05]);
        let t = RoleScoreTable::from_external(None, &[(0, vec![0.7005, 0.1, 0.1, 0.05, 0.05])]).unwrap();
        assert!((t.rows[&0].iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(matches!(
            RoleScoreTable::from_external(None, &[(0, vec![-0.1, 0.5, 0.3, 0.2, 0.1])]),
            Err(Error::BadScores(_))
        ));
        let names: Vec<String> = ["anaesthetist", "patient", "head_surgeon", "assistant_surgeon", "circulating_nurse"]
            .map(String::from)
            .to_vec();
        let t = RoleScoreTable::from_external(Some(&names), &[(0, vec![0.6, 0.1, 0.1, 0.1, 0.1])]).unwrap();
        assert_eq!(t.argmax(0), Some(RoleClass::Anaesthetist));
        let bad: Vec<String> = ["surgeon"].map(String::from).to_vec();
        assert!(matches!(RoleScoreTable::from_external(Some(&bad), &[]), Err(Error::BadRole(_))));
    }

    #[test]
    fn unique_assignment_prefers_total() {
        let mut t = RoleScoreTable::default();
        t.rows.insert(1, [0.05, 0.9, 0.02, 0.02, 0.01]);
        t.rows.insert(2, [0.15, 0.8, 0.02, 0.02, 0.01]);
        let a = assign_roles_unique(&t);
        assert_eq!(a[&1], Some(RoleClass::HeadSurgeon));
        assert_eq!(a[&2], Some(RoleClass::Patient));
    }

    #[test]
    fn surplus_track_gets_none() {
        let mut t = RoleScoreTable::default();
        for k in 0..6u32 {
            let mut row = [0.1; 5];
            row[k as usize % 5] = 0.6;
            t.rows.insert(k, row);
        }
        let a = assign_roles_unique(&t);
        assert_eq!(a.values().filter(|r| r.is_none()).count(), 1);
        let mut roles: Vec<_> = a.values().flatten().collect();
        roles.dedup();
        assert_eq!(roles.len(), 5);
    }
}
