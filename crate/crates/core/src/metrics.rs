//! Evaluation protocols: per-class precision/recall/F1 with unweighted
//! macro averages, PCP3D for poses and AP at a fixed IoU for boxes.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{box_iou, pose_distance, HumanPose, OrientedBox3, PartList};
use crate::model::{graph_edge_diff, identity_correspondence, instance_correspondence, RelationClass, SceneGraph};
use crate::roles::RoleClass;
use crate::tracking::{solve_assignment, AssignmentProblem, Objective};

/// Harmonic mean of precision and recall, 0 when both are 0.
pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassPRF {
    pub class: String,
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// False for classes left out of the macro average.
    pub evaluated: bool,
}

impl ClassPRF {
    pub fn from_counts(class: impl Into<String>, tp: u64, fp: u64, fn_: u64) -> Self {
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        ClassPRF { class: class.into(), tp, fp, fn_, precision, recall, f1: f1_score(precision, recall), evaluated: true }
    }
}

/// How the headline macro F1 is formed from per-class values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MacroConvention {
    /// Unweighted mean of per-class F1.
    #[default]
    MeanF1,
    /// Harmonic mean of macro precision and macro recall.
    HarmonicOfMeans,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MacroReport {
    pub classes: Vec<ClassPRF>,
    pub convention: MacroConvention,
    pub precision: f64,
    pub recall: f64,
    /// Per `convention`.
    pub f1: f64,
    pub f1_mean: f64,
    pub f1_harmonic: f64,
}

impl MacroReport {
    pub fn from_classes(classes: Vec<ClassPRF>, convention: MacroConvention) -> Self {
        let used: Vec<&ClassPRF> = classes.iter().filter(|c| c.evaluated).collect();
        let mean = |f: fn(&ClassPRF) -> f64| {
            if used.is_empty() {
                0.0
            } else {
                used.iter().map(|c| f(c)).sum::<f64>() / used.len() as f64
            }
        };
        let precision = mean(|c| c.precision);
        let recall = mean(|c| c.recall);
        let f1_mean = mean(|c| c.f1);
        let f1_harmonic = f1_score(precision, recall);
        let f1 = match convention {
            MacroConvention::MeanF1 => f1_mean,
            MacroConvention::HarmonicOfMeans => f1_harmonic,
        };
        MacroReport { classes, convention, precision, recall, f1, f1_mean, f1_harmonic }
    }

    pub fn class(&self, name: &str) -> Option<&ClassPRF> {
        self.classes.iter().find(|c| c.class == name)
    }
}

/// How predicted nodes are paired with ground-truth nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Correspondence {
    /// Node ids are shared between the two graphs.
    NodeId,
    /// Nodes correspond when they carry the same instance id.
    #[default]
    InstanceId,
}

/// Relation precision/recall over aligned frames. Predicates absent from
/// both ground truth and prediction are reported but not averaged.
pub fn relation_prf(
    gt: &[SceneGraph],
    pred: &[SceneGraph],
    policy: Correspondence,
    convention: MacroConvention,
) -> Result<MacroReport> {
    let gt_ids: Vec<u64> = gt.iter().map(|g| g.frame_id).collect();
    let pred_ids: Vec<u64> = pred.iter().map(|g| g.frame_id).collect();
    if gt_ids != pred_ids {
        return Err(Error::MisalignedTakes(format!(
            "ground truth has {} frames, prediction {}; frame ids differ",
            gt_ids.len(),
            pred_ids.len()
        )));
    }
    let mut counts = [(0u64, 0u64, 0u64); RelationClass::COUNT];
    for (g, p) in gt.iter().zip(pred) {
        let corr = match policy {
            Correspondence::NodeId => identity_correspondence(p),
            Correspondence::InstanceId => instance_correspondence(g, p),
        };
        let diff = graph_edge_diff(g, p, &corr)?;
        for e in &diff.true_positives {
            counts[e.predicate.index()].0 += 1;
        }
        for e in &diff.false_positives {
            counts[e.predicate.index()].1 += 1;
        }
        for e in &diff.false_negatives {
            counts[e.predicate.index()].2 += 1;
        }
    }
    let classes = RelationClass::ALL
        .iter()
        .zip(counts)
        .map(|(class, (tp, fp, fn_))| {
            let mut c = ClassPRF::from_counts(class.name(), tp, fp, fn_);
            c.evaluated = tp + fp + fn_ > 0;
            c
        })
        .collect();
    Ok(MacroReport::from_classes(classes, convention))
}

/// Role precision/recall over per-frame human labels keyed by
/// `(frame_id, human)`. A prediction of `None` or a missing prediction is a
/// miss for the true role; predictions for unknown humans are false
/// positives. The macro always spans all five roles.
pub fn role_prf(
    gt: &BTreeMap<(u64, u32), RoleClass>,
    pred: &BTreeMap<(u64, u32), Option<RoleClass>>,
    convention: MacroConvention,
) -> MacroReport {
    let mut counts = [(0u64, 0u64, 0u64); RoleClass::COUNT];
    for (key, &truth) in gt {
        match pred.get(key).copied().flatten() {
            Some(p) if p == truth => counts[truth.index()].0 += 1,
            Some(p) => {
                counts[p.index()].1 += 1;
                counts[truth.index()].2 += 1;
            }
            None => counts[truth.index()].2 += 1,
        }
    }
    for (key, p) in pred {
        if let (false, Some(p)) = (gt.contains_key(key), p) {
            counts[p.index()].1 += 1;
        }
    }
    let classes = RoleClass::ALL
        .iter()
        .zip(counts)
        .map(|(role, (tp, fp, fn_))| ClassPRF::from_counts(role.name(), tp, fp, fn_))
        .collect();
    MacroReport::from_classes(classes, convention)
}

/// Default PCP threshold as a fraction of the ground-truth part length.
pub const PCP_ALPHA: f64 = 0.5;

/// Percentage of correct parts, pooled over all ground-truth parts of all
/// frames. Predictions are matched to ground truth per frame by minimum
/// total pose distance; unmatched ground-truth humans score no parts.
/// Returns 0 when there is no ground truth.
pub fn pcp3d(
    gt: &BTreeMap<u64, Vec<HumanPose>>,
    pred: &BTreeMap<u64, Vec<HumanPose>>,
    alpha: f64,
    parts: &PartList,
) -> f64 {
    let mut total = 0usize;
    let mut correct = 0usize;
    for (frame_id, gt_poses) in gt {
        total += gt_poses.len() * parts.len();
        let Some(pred_poses) = pred.get(frame_id).filter(|p| !p.is_empty()) else { continue };
        if gt_poses.is_empty() {
            continue;
        }
        let problem = AssignmentProblem::from_fn(
            gt_poses.len(),
            pred_poses.len(),
            |i, j| pose_distance(&gt_poses[i], &pred_poses[j]),
            Objective::Minimize,
        )
        .expect("poses have finite joints");
        for (i, j) in solve_assignment(&problem).pairs {
            let (g, p) = (&gt_poses[i], &pred_poses[j]);
            for part in parts.iter() {
                let limit = alpha * part.length(g);
                let (ga, gb) = part.endpoints(g);
                let (pa, pb) = part.endpoints(p);
                if (pa - ga).norm() <= limit && (pb - gb).norm() <= limit {
                    correct += 1;
                }
            }
        }
    }
    if total == 0 {
        0.0
    } else {
        100.0 * correct as f64 / total as f64
    }
}

/// Area under the precision/recall curve with all-point interpolation.
fn interpolated_ap(hits: &[bool], n_gt: usize) -> f64 {
    if n_gt == 0 {
        return 0.0;
    }
    let mut recall = vec![0.0];
    let mut precision = vec![0.0];
    let mut tp = 0usize;
    for (k, hit) in hits.iter().enumerate() {
        if *hit {
            tp += 1;
        }
        recall.push(tp as f64 / n_gt as f64);
        precision.push(tp as f64 / (k + 1) as f64);
    }
    recall.push(1.0);
    precision.push(0.0);
    for k in (0..precision.len() - 1).rev() {
        precision[k] = precision[k].max(precision[k + 1]);
    }
    (1..recall.len()).map(|k| (recall[k] - recall[k - 1]) * precision[k]).sum()
}

/// Average precision of box detections at `iou_thresh`, averaged over the
/// classes present in the ground truth. Predictions are taken in descending
/// confidence (ties by frame, then list order) and each claims the unclaimed
/// same-class ground-truth box of its frame with the highest IoU, if that
/// IoU reaches the threshold.
pub fn ap_at_iou(
    gt: &BTreeMap<u64, Vec<OrientedBox3>>,
    pred: &BTreeMap<u64, Vec<OrientedBox3>>,
    iou_thresh: f64,
) -> f64 {
    let classes: BTreeSet<&str> = gt.values().flatten().map(|b| b.class.name()).collect();
    if classes.is_empty() {
        return 0.0;
    }
    let mut sum = 0.0;
    for class in &classes {
        let n_gt = gt.values().flatten().filter(|b| b.class.name() == *class).count();
        let mut dets: Vec<(u64, usize, f64)> = pred
            .iter()
            .flat_map(|(f, boxes)| boxes.iter().enumerate().map(move |(k, b)| (*f, k, b)))
            .filter(|(_, _, b)| b.class.name() == *class)
            .map(|(f, k, b)| (f, k, b.confidence))
            .collect();
        dets.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.0.cmp(&b.0)).then(a.1.cmp(&b.1)));

        let mut claimed: BTreeSet<(u64, usize)> = BTreeSet::new();
        let mut hits = Vec::with_capacity(dets.len());
        for (f, k, _) in dets {
            let det = &pred[&f][k];
            let mut best: Option<(usize, f64)> = None;
            for (g, gbox) in gt.get(&f).into_iter().flatten().enumerate() {
                if gbox.class.name() != *class || claimed.contains(&(f, g)) {
                    continue;
                }
                let iou = box_iou(det, gbox);
                if best.is_none_or(|(_, b)| iou > b) {
                    best = Some((g, iou));
                }
            }
            match best {
                Some((g, iou)) if iou >= iou_thresh => {
                    claimed.insert((f, g));
                    hits.push(true);
                }
                _ => hits.push(false),
            }
        }
        sum += interpolated_ap(&hits, n_gt);
    }
    sum / classes.len() as f64
}
