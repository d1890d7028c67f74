//! Optimal assignment and frame-to-frame human track association.

mod assignment;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use assignment::{solve_assignment, AssignmentProblem, Cost, Matching, Objective};

use crate::error::{Error, Result};
use crate::geometry::{pose_distance, HumanPose};
use crate::model::NodeId;

/// One human detection: its pose and the graph node representing it.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub pose: HumanPose,
    pub node_id: NodeId,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameDetections {
    pub frame_id: u64,
    pub detections: Vec<Detection>,
}

pub type TrackId = u32;

#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub track_id: TrackId,
    /// One entry per frame, keyed by frame id.
    pub entries: BTreeMap<u64, Detection>,
}

impl Track {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn last(&self) -> Option<(u64, &Detection)> {
        self.entries.iter().next_back().map(|(f, d)| (*f, d))
    }

    pub fn node_at(&self, frame_id: u64) -> Option<NodeId> {
        self.entries.get(&frame_id).map(|d| d.node_id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrackingParams {
    /// Largest accepted mean joint distance (meters) between a track's last
    /// pose and a new detection.
    pub max_cost: f64,
    /// Frames a track may go unmatched before it is closed.
    pub max_gap: u64,
}

impl Default for TrackingParams {
    fn default() -> Self {
        TrackingParams { max_cost: 0.5, max_gap: 3 }
    }
}

impl TrackingParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.max_cost >= 0.0 && self.max_cost.is_finite()) {
            return Err(Error::BadConfig("tracking max_cost must be finite and non-negative".into()));
        }
        Ok(())
    }
}

/// Greedy-in-time association: each frame is matched optimally against the
/// last poses of the open tracks; gated-out and unmatched detections start
/// new tracks in detection order. Track ids are assigned from 0.
pub fn associate_tracks(frames: &[FrameDetections], params: &TrackingParams) -> Result<Vec<Track>> {
    params.validate()?;
    if let Some(w) = frames.windows(2).find(|w| w[0].frame_id >= w[1].frame_id) {
        return Err(Error::InvalidTake(format!(
            "frame ids must increase strictly, found {} then {}",
            w[0].frame_id, w[1].frame_id
        )));
    }

    let mut tracks: Vec<Track> = Vec::new();
    for frame in frames {
        let live: Vec<usize> = (0..tracks.len())
            .filter(|&t| {
                let (last, _) = tracks[t].last().expect("tracks are never empty");
                frame.frame_id - last - 1 <= params.max_gap
            })
            .collect();

        let mut taken = vec![false; frame.detections.len()];
        if !live.is_empty() && !frame.detections.is_empty() {
            let problem = AssignmentProblem::from_fn(
                live.len(),
                frame.detections.len(),
                |r, c| pose_distance(&tracks[live[r]].last().unwrap().1.pose, &frame.detections[c].pose),
                Objective::Minimize,
            )?;
            for (r, c) in solve_assignment(&problem).pairs {
                if problem.cost(r, c) <= params.max_cost {
                    tracks[live[r]].entries.insert(frame.frame_id, frame.detections[c].clone());
                    taken[c] = true;
                }
            }
        }
        for (c, det) in frame.detections.iter().enumerate() {
            if !taken[c] {
                let track_id = tracks.len() as TrackId;
                tracks.push(Track { track_id, entries: BTreeMap::from([(frame.frame_id, det.clone())]) });
            }
        }
    }
    Ok(tracks)
}
