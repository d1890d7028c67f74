//! Evaluation of a run directory against a take's ground truth.
//!
//! Predictions live in the upstream instance layout, ground truth in its
//! own. Per frame, predicted boxes are matched to ground-truth boxes of the
//! same class by maximum IoU and predicted poses to ground-truth poses by
//! minimum mean joint distance (gated by the tracking gate); a human's
//! virtual instrument follows its human. Unmatched predictions keep no
//! ground-truth identity.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;
use std::path::Path;

use anyhow::{bail, Result};
use or_graph_kit::geometry::{box_iou, fuse_indices, pose_distance, HumanPose, OrientedBox3, PartList};
use or_graph_kit::io::docs::{CameraLabelsDoc, GtRolesDoc, ReportDoc, RolesDoc, TracksDoc};
use or_graph_kit::io::layout;
use or_graph_kit::labeling::{InstanceLayout, BACKGROUND};
use or_graph_kit::metrics::{ap_at_iou, pcp3d, relation_prf, role_prf, Correspondence, MacroReport};
use or_graph_kit::model::{FrameRecord, GeometryRefs, InstanceId, SceneGraph, Take};
use or_graph_kit::roles::RoleClass;
use or_graph_kit::tracking::{solve_assignment, AssignmentProblem, Objective};
use or_graph_kit::Error;

use crate::context::{check_frame, read, read_graphs, read_labels, Context, TakeInput};
use crate::sink::OutputSink;

struct FrameTruth {
    poses: Vec<HumanPose>,
    boxes: Vec<OrientedBox3>,
    graph: SceneGraph,
}

/// Predicted-to-true correspondences of one frame.
#[derive(Default)]
struct FrameMatch {
    /// predicted pose index -> ground-truth pose index
    poses: BTreeMap<usize, usize>,
    /// predicted instance id -> ground-truth instance id
    instances: BTreeMap<InstanceId, InstanceId>,
}

fn match_indices(rows: usize, cols: usize, objective: Objective, cost: impl Fn(usize, usize) -> f64, accept: impl Fn(f64) -> bool) -> Result<Vec<(usize, usize)>> {
    if rows == 0 || cols == 0 {
        return Ok(Vec::new());
    }
    let problem = AssignmentProblem::from_fn(rows, cols, cost, objective)?;
    Ok(solve_assignment(&problem).pairs.into_iter().filter(|&(r, c)| accept(problem.cost(r, c))).collect())
}

fn match_frame(truth: &FrameTruth, poses: &[HumanPose], boxes: &[OrientedBox3], gate: f64) -> Result<FrameMatch> {
    let pred_layout = InstanceLayout { boxes: boxes.len(), poses: poses.len() };
    let gt_layout = InstanceLayout { boxes: truth.boxes.len(), poses: truth.poses.len() };
    let mut m = FrameMatch::default();

    let classes: BTreeSet<&str> = boxes.iter().map(|b| b.class.name()).collect();
    for class in classes {
        let pred: Vec<usize> = (0..boxes.len()).filter(|&i| boxes[i].class.name() == class).collect();
        let gt: Vec<usize> = (0..truth.boxes.len()).filter(|&i| truth.boxes[i].class.name() == class).collect();
        let pairs = match_indices(
            pred.len(),
            gt.len(),
            Objective::Maximize,
            |r, c| box_iou(&boxes[pred[r]], &truth.boxes[gt[c]]),
            |iou| iou > 0.0,
        )?;
        for (r, c) in pairs {
            m.instances.insert(pred_layout.box_id(pred[r]), gt_layout.box_id(gt[c]));
        }
    }

    let pairs = match_indices(
        poses.len(),
        truth.poses.len(),
        Objective::Minimize,
        |r, c| pose_distance(&poses[r], &truth.poses[c]),
        |d| d <= gate,
    )?;
    for (r, c) in pairs {
        m.poses.insert(r, c);
        m.instances.insert(pred_layout.pose_id(r), gt_layout.pose_id(c));
        m.instances.insert(pred_layout.instrument_id(r), gt_layout.instrument_id(c));
    }
    Ok(m)
}

fn relabel(graph: &SceneGraph, m: &FrameMatch) -> SceneGraph {
    let mut g = graph.clone();
    for n in &mut g.nodes {
        n.instance_id = n.instance_id.and_then(|i| m.instances.get(&i).copied());
    }
    g
}

/// Fraction of fused points whose label, mapped to ground-truth identity,
/// equals the label of the camera point it came from. `None` when the take
/// has no per-camera labels.
fn labeling_accuracy(ctx: &Context, take: &TakeInput, out: &Path, matches: &[FrameMatch]) -> Result<Option<f64>> {
    if take.frames().iter().any(|f| !take.dir.join(layout::gt_labels(f.frame_id)).exists()) {
        return Ok(None);
    }
    let params = ctx.config.fusion.params();
    let counts = ctx.per_frame(take.frames(), |f| {
        let k = take.frames().iter().position(|e| e.frame_id == f.frame_id).expect("frame of this take");
        let truth: CameraLabelsDoc = read(&take.dir, &layout::gt_labels(f.frame_id))?;
        check_frame(f.frame_id, truth.frame_id)?;
        let clouds = take.world_clouds(f)?;
        if truth.cameras.len() != clouds.len()
            || truth.cameras.iter().zip(&clouds).any(|(t, c)| t.labels.len() != c.len())
        {
            bail!(Error::InvalidTake(format!("ground-truth labels of frame {} do not match its clouds", f.frame_id)));
        }
        let origin = fuse_indices(&clouds, &params);
        let labels = read_labels(out, f.frame_id)?;
        if labels.len() != origin.len() {
            bail!(Error::MisalignedTakes(format!(
                "frame {} has {} labels for {} fused points",
                f.frame_id,
                labels.len(),
                origin.len()
            )));
        }
        let correct = labels
            .iter()
            .zip(&origin)
            .filter(|&(&pred, &(cam, idx))| {
                let mapped = if pred == BACKGROUND { Some(BACKGROUND) } else { matches[k].instances.get(&pred).copied() };
                mapped == Some(truth.cameras[cam].labels[idx])
            })
            .count();
        Ok((correct, labels.len()))
    })?;
    let (correct, total) = counts.iter().fold((0, 0), |(a, b), (c, t)| (a + c, b + t));
    Ok(Some(if total == 0 { 1.0 } else { correct as f64 / total as f64 }))
}

pub fn eval_stage(ctx: &Context, take: &TakeInput, sink: &mut OutputSink) -> Result<()> {
    let out = sink.root().to_path_buf();
    let gate = ctx.config.tracking.max_cost;
    let metrics = &ctx.config.metrics;

    let truths = ctx.per_frame(take.frames(), |f| {
        Ok(FrameTruth {
            poses: take.gt_poses(f)?.unwrap_or_default(),
            boxes: take.gt_boxes(f)?.unwrap_or_default(),
            graph: take.gt_graph(f)?,
        })
    })?;
    let gt_take = Take {
        take_id: take.manifest.take_id.clone(),
        split: take.manifest.split,
        frames: take
            .frames()
            .iter()
            .zip(&truths)
            .map(|(f, t)| FrameRecord {
                frame_id: f.frame_id,
                timestamp: f.timestamp,
                graph: t.graph.clone(),
                geometry: GeometryRefs { clouds: f.clouds.clone(), poses: f.poses.clone(), boxes: f.boxes.clone() },
            })
            .collect(),
    };
    gt_take.validate()?;

    let upstream = ctx.per_frame(take.frames(), |f| Ok((take.upstream_poses(f.frame_id)?, take.upstream_boxes(f.frame_id)?)))?;
    let matches: Vec<FrameMatch> = truths
        .iter()
        .zip(&upstream)
        .map(|(t, (poses, boxes))| match_frame(t, poses, boxes, gate))
        .collect::<Result<_>>()?;

    let graphs = read_graphs(take, &out)?;
    let gt_graphs: Vec<SceneGraph> = truths.iter().map(|t| t.graph.clone()).collect();
    let pred_graphs: Vec<SceneGraph> = match metrics.correspondence {
        Correspondence::NodeId => graphs.values().cloned().collect(),
        Correspondence::InstanceId => graphs.values().zip(&matches).map(|(g, m)| relabel(g, m)).collect(),
    };
    let relations = relation_prf(&gt_graphs, &pred_graphs, metrics.correspondence, metrics.macro_convention)?;

    let mut report = ReportDoc::blank(take.manifest.take_id.clone(), relations);
    report.frames = take.frames().len();
    report.labeling_accuracy = labeling_accuracy(ctx, take, &out, &matches)?;

    let frame_index: BTreeMap<u64, usize> = take.frames().iter().enumerate().map(|(k, f)| (f.frame_id, k)).collect();
    let tracks: TracksDoc = read(&out, layout::TRACKS)?;
    let roles = read::<RolesDoc>(&out, layout::ROLES)?.to_map()?;
    report.tracks = tracks.tracks.len();

    let gt_roles_path = take.dir.join(layout::GT_ROLES);
    if gt_roles_path.exists() {
        let gt_doc: GtRolesDoc = read(&take.dir, layout::GT_ROLES)?;
        let person_role: BTreeMap<u32, Option<RoleClass>> = gt_doc.persons.iter().map(|p| (p.person_id, p.role)).collect();

        // per-frame, per-human ground truth keyed by person id
        let mut gt_keys: BTreeMap<(u64, u32), RoleClass> = BTreeMap::new();
        for (f, t) in take.frames().iter().zip(&truths) {
            for p in &t.poses {
                if let Some(Some(role)) = person_role.get(&p.person_id) {
                    gt_keys.insert((f.frame_id, p.person_id), *role);
                }
            }
        }
        let mut pred_keys: BTreeMap<(u64, u32), Option<RoleClass>> = BTreeMap::new();
        let mut followed: BTreeMap<u32, BTreeMap<u32, usize>> = BTreeMap::new();
        for rec in &tracks.tracks {
            let role = roles.get(&rec.track_id).copied().flatten();
            for e in &rec.entries {
                let Some(&k) = frame_index.get(&e.frame_id) else {
                    bail!(Error::MisalignedTakes(format!("track {} references unknown frame {}", rec.track_id, e.frame_id)));
                };
                match matches[k].poses.get(&e.pose_index) {
                    Some(&g) => {
                        let person = truths[k].poses[g].person_id;
                        pred_keys.insert((e.frame_id, person), role);
                        *followed.entry(rec.track_id).or_default().entry(person).or_default() += 1;
                    }
                    // keys outside the person id range count as false positives
                    None => {
                        pred_keys.insert((e.frame_id, u32::MAX - e.node_id), role);
                    }
                }
            }
        }
        report.roles = Some(role_prf(&gt_keys, &pred_keys, metrics.macro_convention));

        let expected: BTreeSet<u32> = person_role.iter().filter(|(_, r)| r.is_some()).map(|(&p, _)| p).collect();
        let mut correct = BTreeSet::new();
        for (track_id, persons) in &followed {
            // the person a track follows most often; lowest id on ties
            let (&person, _) = persons.iter().max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0))).expect("non-empty");
            if let (Some(Some(truth)), Some(Some(pred))) = (person_role.get(&person), roles.get(track_id)) {
                if truth == pred {
                    correct.insert(person);
                }
            }
        }
        report.track_roles_correct = Some(correct.len());
        report.track_roles_expected = Some(expected.len());
    }

    let has_poses = take.frames().iter().all(|f| f.poses.is_some());
    if has_poses {
        let gt: BTreeMap<u64, Vec<HumanPose>> = take.frames().iter().zip(&truths).map(|(f, t)| (f.frame_id, t.poses.clone())).collect();
        let pred: BTreeMap<u64, Vec<HumanPose>> = take.frames().iter().zip(&upstream).map(|(f, u)| (f.frame_id, u.0.clone())).collect();
        report.pcp3d = Some(pcp3d(&gt, &pred, metrics.pcp_alpha, &PartList::default()));
    }
    let has_boxes = take.frames().iter().all(|f| f.boxes.is_some());
    if has_boxes {
        let gt: BTreeMap<u64, Vec<OrientedBox3>> = take.frames().iter().zip(&truths).map(|(f, t)| (f.frame_id, t.boxes.clone())).collect();
        let pred: BTreeMap<u64, Vec<OrientedBox3>> = take.frames().iter().zip(&upstream).map(|(f, u)| (f.frame_id, u.1.clone())).collect();
        report.ap_25 = Some(ap_at_iou(&gt, &pred, 0.25));
        report.ap_50 = Some(ap_at_iou(&gt, &pred, 0.50));
    }

    sink.write_doc(layout::REPORT_JSON, &report)?;
    sink.write_bytes(layout::REPORT_TEXT, render(&report).as_bytes())?;
    log::info!("relation macro F1 {:.4}", report.relations.f1);
    Ok(())
}

fn prf_table(out: &mut String, title: &str, r: &MacroReport) {
    writeln!(out, "{title}").unwrap();
    writeln!(out, "  {:<20} {:>9} {:>9} {:>9} {:>6} {:>6} {:>6}", "class", "precision", "recall", "f1", "tp", "fp", "fn").unwrap();
    for c in &r.classes {
        let mark = if c.evaluated { "" } else { "  (absent)" };
        writeln!(
            out,
            "  {:<20} {:>9.4} {:>9.4} {:>9.4} {:>6} {:>6} {:>6}{mark}",
            c.class, c.precision, c.recall, c.f1, c.tp, c.fp, c.fn_
        )
        .unwrap();
    }
    writeln!(out, "  {:<20} {:>9.4} {:>9.4} {:>9.4}", "macro", r.precision, r.recall, r.f1).unwrap();
    writeln!(out, "  mean of F1 {:.4}, harmonic mean of macro P/R {:.4}", r.f1_mean, r.f1_harmonic).unwrap();
}

pub fn render(r: &ReportDoc) -> String {
    let opt = |v: Option<f64>, digits: usize| v.map_or("n/a".to_string(), |v| format!("{v:.digits$}"));
    let mut out = String::new();
    writeln!(out, "take {} ({} frames)", r.take_id, r.frames).unwrap();
    writeln!(out, "labeling accuracy {}", opt(r.labeling_accuracy.map(|a| 100.0 * a), 2)).unwrap();
    writeln!(out, "tracks {}", r.tracks).unwrap();
    if let (Some(c), Some(e)) = (r.track_roles_correct, r.track_roles_expected) {
        writeln!(out, "track roles correct {c}/{e}").unwrap();
    }
    writeln!(out, "PCP3D {}", opt(r.pcp3d, 2)).unwrap();
    writeln!(out, "AP@0.25 {}  AP@0.50 {}", opt(r.ap_25, 4), opt(r.ap_50, 4)).unwrap();
    out.push('\n');
    prf_table(&mut out, "relations", &r.relations);
    if let Some(roles) = &r.roles {
        out.push('\n');
        prf_table(&mut out, "roles", roles);
    }
    out
}
