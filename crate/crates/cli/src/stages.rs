use std::collections::BTreeMap;

use anyhow::{bail, Result};
use or_graph_kit::baseline::{decode_logits_with, frame_graph, predict_geometric};
use or_graph_kit::geometry::fuse;
use or_graph_kit::io::config::RoleSource;
use or_graph_kit::io::docs::{
    GraphDoc, LabelsDoc, RoleScoresDoc, RolesDoc, TrackEntry, TrackRecord, TracksDoc,
};
use or_graph_kit::io::{export_dot, layout, read_doc, read_ply_file};
use or_graph_kit::labeling::{compute_instance_labels, instrument_region, InstanceLabelMap, InstanceSource};
use or_graph_kit::model::NodeId;
use or_graph_kit::roles::{assign_roles_unique, heuristic_table, RoleClass};
use or_graph_kit::tracking::{associate_tracks, Detection, FrameDetections};
use or_graph_kit::Error;

use crate::context::{read, read_graphs, read_labels, read_tracks, Context, TakeInput};
use crate::sink::OutputSink;

pub fn fuse_stage(ctx: &Context, take: &TakeInput, sink: &mut OutputSink) -> Result<()> {
    let params = ctx.config.fusion.params();
    let clouds = ctx.per_frame(take.frames(), |f| Ok(fuse(&take.world_clouds(f)?, &params)))?;
    for (f, cloud) in take.frames().iter().zip(&clouds) {
        sink.write_ply(&layout::fused_cloud(f.frame_id), cloud)?;
    }
    log::info!("fused {} frames", clouds.len());
    Ok(())
}

pub fn label_stage(ctx: &Context, take: &TakeInput, sink: &mut OutputSink) -> Result<()> {
    let params = &ctx.config.labeling;
    let out = sink.root().to_path_buf();
    let labels = ctx.per_frame(take.frames(), |f| {
        let cloud = read_ply_file(&out.join(layout::fused_cloud(f.frame_id)))?;
        let poses = take.upstream_poses(f.frame_id)?;
        let boxes = take.upstream_boxes(f.frame_id)?;
        let map = compute_instance_labels(&cloud, &boxes, &poses, params)?;
        Ok(instrument_region(&cloud, &map, &poses, params)?.labels)
    })?;
    for (f, labels) in take.frames().iter().zip(labels) {
        sink.write_doc(&layout::point_labels(f.frame_id), &LabelsDoc::new(f.frame_id, labels))?;
    }
    log::info!("labeled {} frames", take.frames().len());
    Ok(())
}

pub fn predict_stage(ctx: &Context, take: &TakeInput, sink: &mut OutputSink) -> Result<()> {
    let params = &ctx.config.baseline;
    let out = sink.root().to_path_buf();
    let graphs = ctx.per_frame(take.frames(), |f| {
        let poses = take.upstream_poses(f.frame_id)?;
        let boxes = take.upstream_boxes(f.frame_id)?;
        let labels = InstanceLabelMap::from_labels(read_labels(&out, f.frame_id)?, &boxes, &poses)?;
        let mut edges = decode_logits_with(&take.upstream_logits(f.frame_id)?, params.decode)?;
        edges.extend(predict_geometric(&poses, &boxes, &labels, params));
        Ok(frame_graph(f.frame_id, &labels, edges))
    })?;
    for g in &graphs {
        sink.write_doc(&layout::predicted_graph(g.frame_id), &GraphDoc::from(g))?;
    }
    log::info!("predicted {} graphs", graphs.len());
    Ok(())
}

pub fn track_stage(ctx: &Context, take: &TakeInput, sink: &mut OutputSink) -> Result<()> {
    let graphs = read_graphs(take, sink.root())?;
    let mut frames = Vec::with_capacity(graphs.len());
    // (frame, node) -> index of the pose in the upstream pose file
    let mut pose_index: BTreeMap<(u64, NodeId), usize> = BTreeMap::new();
    for f in take.frames() {
        let poses = take.upstream_poses(f.frame_id)?;
        let boxes = take.upstream_boxes(f.frame_id)?;
        let layout = or_graph_kit::labeling::InstanceLayout { boxes: boxes.len(), poses: poses.len() };
        let mut detections = Vec::new();
        for node in graphs[&f.frame_id].nodes.iter().filter(|n| n.class.is_human()) {
            let Some(InstanceSource::Pose(j)) = layout.source(node.id) else {
                bail!(Error::BadSchema(format!("human node {} of frame {} has no pose", node.id, f.frame_id)));
            };
            pose_index.insert((f.frame_id, node.id), j);
            detections.push(Detection { pose: poses[j].clone(), node_id: node.id });
        }
        frames.push(FrameDetections { frame_id: f.frame_id, detections });
    }
    let tracks = associate_tracks(&frames, &ctx.config.tracking)?;
    let records = tracks
        .iter()
        .map(|t| TrackRecord {
            track_id: t.track_id,
            entries: t
                .entries
                .iter()
                .map(|(&frame_id, d)| TrackEntry { frame_id, node_id: d.node_id, pose_index: pose_index[&(frame_id, d.node_id)] })
                .collect(),
        })
        .collect();
    sink.write_doc(layout::TRACKS, &TracksDoc::new(records))?;
    log::info!("{} tracks", tracks.len());
    Ok(())
}

pub fn roles_stage(ctx: &Context, take: &TakeInput, sink: &mut OutputSink) -> Result<()> {
    let tracks = read_tracks(take, sink.root())?;
    let section = &ctx.config.roles;
    let table = match section.source {
        RoleSource::Heuristic => heuristic_table(&tracks, &read_graphs(take, sink.root())?, &section.weights()?)?,
        RoleSource::External => {
            let rel = section.external_scores.as_ref().expect("validated config");
            let doc: RoleScoresDoc = read_doc(&take.dir.join(rel))?;
            let table = doc.to_table()?;
            let known: Vec<_> = tracks.iter().map(|t| t.track_id).collect();
            if let Some(id) = table.rows.keys().find(|id| !known.contains(id)) {
                bail!(Error::BadScores(format!("scores given for unknown track {id}")));
            }
            table
        }
    };
    let roles = assign_roles_unique(&table);
    sink.write_doc(layout::ROLE_SCORES, &RoleScoresDoc::from(&table))?;
    sink.write_doc(layout::ROLES, &RolesDoc::new(&roles))?;
    log::info!("assigned {} roles", roles.values().filter(|r| r.is_some()).count());
    Ok(())
}

/// Role of every tracked node, keyed by frame and node.
pub fn node_roles(take: &TakeInput, out: &std::path::Path) -> Result<BTreeMap<(u64, NodeId), RoleClass>> {
    let tracks = read_tracks(take, out)?;
    let roles = read::<RolesDoc>(out, layout::ROLES)?.to_map()?;
    let mut map = BTreeMap::new();
    for t in &tracks {
        if let Some(Some(role)) = roles.get(&t.track_id) {
            for (&frame_id, d) in &t.entries {
                map.insert((frame_id, d.node_id), *role);
            }
        }
    }
    Ok(map)
}

pub fn export_dot_stage(take: &TakeInput, sink: &mut OutputSink) -> Result<()> {
    let graphs: Vec<_> = read_graphs(take, sink.root())?.into_values().collect();
    let roles = node_roles(take, sink.root())?;
    sink.write_bytes(layout::DOT, export_dot(&graphs, &roles).as_bytes())
}
