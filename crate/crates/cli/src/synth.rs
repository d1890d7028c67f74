use std::collections::BTreeMap;

use anyhow::Result;
use or_graph_kit::io::docs::{
    BoxesDoc, CalibrationDoc, CameraLabels, CameraLabelsDoc, FrameEntry, GraphDoc, GtRolesDoc, LogitsDoc, PosesDoc,
    TakeDoc, TrackEntry, TrackRecord, TracksDoc,
};
use or_graph_kit::io::layout;
use or_graph_kit::labeling::InstanceLayout;
use or_graph_kit::model::Split;
use or_graph_kit::synth::{generate_take, perturb_predictions};

use crate::context::Context;
use crate::sink::OutputSink;

/// Writes a complete take directory to `<out>/<take_id>`: manifest,
/// calibrations, per-camera clouds, ground truth and upstream predictions.
pub fn synth_stage(ctx: &Context, sink: &mut OutputSink) -> Result<()> {
    let section = &ctx.config.synth;
    let take = generate_take(&section.scenario(ctx.seed))?;
    let bundle = perturb_predictions(&take, &section.perturb, ctx.seed)?;
    let dir = take.take_id().to_string();
    let at = |rel: &str| format!("{dir}/{rel}");

    let manifest = take.take();
    let camera_ids: Vec<String> = take.cameras.iter().map(|c| c.camera_id.clone()).collect();
    let frames = manifest
        .frames
        .iter()
        .map(|f| FrameEntry {
            frame_id: f.frame_id,
            timestamp: f.timestamp,
            clouds: f.geometry.clouds.clone(),
            poses: f.geometry.poses.clone(),
            boxes: f.geometry.boxes.clone(),
            graph: layout::gt_graph(f.frame_id),
        })
        .collect();
    sink.write_doc(&at(layout::MANIFEST), &TakeDoc::new(manifest.take_id.clone(), Split::Test, camera_ids, frames))?;
    for cam in &take.cameras {
        sink.write_doc(&at(&layout::calibration(&cam.camera_id)), &CalibrationDoc::from(cam))?;
    }

    let views: Vec<_> = take.frames.iter().map(|f| take.camera_views(f)).collect();
    for (f, views) in take.frames.iter().zip(views) {
        let mut labels = Vec::with_capacity(views.len());
        for (cam, (cloud, cam_labels)) in take.cameras.iter().zip(views) {
            sink.write_ply(&at(&layout::frame_cloud(f.frame_id, &cam.camera_id)), &cloud)?;
            labels.push(CameraLabels { camera_id: cam.camera_id.clone(), labels: cam_labels });
        }
        sink.write_doc(&at(&layout::gt_labels(f.frame_id)), &CameraLabelsDoc::new(f.frame_id, labels))?;
        sink.write_doc(&at(&layout::gt_poses(f.frame_id)), &PosesDoc::new(f.frame_id, &f.poses))?;
        sink.write_doc(&at(&layout::gt_boxes(f.frame_id)), &BoxesDoc::new(f.frame_id, &f.boxes))?;
        sink.write_doc(&at(&layout::gt_graph(f.frame_id)), &GraphDoc::from(&f.graph))?;
    }

    for p in &bundle.frames {
        sink.write_doc(&at(&layout::upstream_poses(p.frame_id)), &PosesDoc::new(p.frame_id, &p.poses))?;
        sink.write_doc(&at(&layout::upstream_boxes(p.frame_id)), &BoxesDoc::new(p.frame_id, &p.boxes))?;
        sink.write_doc(&at(&layout::upstream_logits(p.frame_id)), &LogitsDoc::new(p.frame_id, &p.logits))?;
    }

    sink.write_doc(&at(layout::GT_ROLES), &GtRolesDoc::new(&take.roles()))?;
    let person_frames: BTreeMap<u32, Vec<u64>> = take.tracks();
    let tracks = person_frames
        .into_iter()
        .map(|(person, frames)| TrackRecord {
            track_id: person,
            entries: frames
                .into_iter()
                .map(|frame_id| {
                    let f = &take.frames[frame_id as usize];
                    let layout = InstanceLayout { boxes: f.boxes.len(), poses: f.poses.len() };
                    TrackEntry { frame_id, node_id: layout.pose_id(person as usize), pose_index: person as usize }
                })
                .collect(),
        })
        .collect();
    sink.write_doc(&at(layout::GT_TRACKS), &TracksDoc::new(tracks))?;
    log::info!("synthesized take {} with {} frames", take.take_id(), take.frames.len());
    Ok(())
}
