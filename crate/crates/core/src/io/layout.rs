//! Relative paths of a take directory and of a run's output directory.

use crate::model::NodeId;

pub const MANIFEST: &str = "take.json";
pub const GT_ROLES: &str = "gt/roles.json";
pub const GT_TRACKS: &str = "gt/tracks.json";

pub const TRACKS: &str = "tracks.json";
pub const ROLE_SCORES: &str = "role_scores.json";
pub const ROLES: &str = "roles.json";
pub const REPORT_JSON: &str = "report.json";
pub const REPORT_TEXT: &str = "report.txt";
pub const DOT: &str = "graphs.dot";

fn frame_dir(frame_id: u64) -> String {
    format!("{frame_id:06}")
}

pub fn calibration(camera_id: &str) -> String {
    format!("calib/{camera_id}.json")
}

pub fn frame_cloud(frame_id: u64, camera_id: &str) -> String {
    format!("frames/{}/{camera_id}.ply", frame_dir(frame_id))
}

pub fn gt_poses(frame_id: u64) -> String {
    format!("gt/{}/poses.json", frame_dir(frame_id))
}

pub fn gt_boxes(frame_id: u64) -> String {
    format!("gt/{}/boxes.json", frame_dir(frame_id))
}

pub fn gt_graph(frame_id: u64) -> String {
    format!("gt/{}/graph.json", frame_dir(frame_id))
}

/// Per-camera ground-truth point labels.
pub fn gt_labels(frame_id: u64) -> String {
    format!("gt/{}/labels.json", frame_dir(frame_id))
}

pub fn upstream_poses(frame_id: u64) -> String {
    format!("upstream/{}/poses.json", frame_dir(frame_id))
}

pub fn upstream_boxes(frame_id: u64) -> String {
    format!("upstream/{}/boxes.json", frame_dir(frame_id))
}

pub fn upstream_logits(frame_id: u64) -> String {
    format!("upstream/{}/logits.json", frame_dir(frame_id))
}

pub fn fused_cloud(frame_id: u64) -> String {
    format!("fused/{}.ply", frame_dir(frame_id))
}

pub fn point_labels(frame_id: u64) -> String {
    format!("labels/{}.json", frame_dir(frame_id))
}

pub fn predicted_graph(frame_id: u64) -> String {
    format!("graphs/{}.json", frame_dir(frame_id))
}

/// DOT node name for a graph node.
pub fn dot_node(id: NodeId) -> String {
    format!("n{id}")
}
